"""Composable neural-field scenes: object proxies, volume rendering,
interleaved training, and post-training edits."""

from .geometry import AABB, look_at_rotation, quat_from_axis_angle, quat_from_matrix, quat_multiply, quat_normalize, quat_to_matrix, ray_aabb_intersect, rotate_vector
from .shapes import Box, Cylinder, Mesh, NonWatertightMeshError, ProxyShape, Sphere, box_mesh, icosphere_mesh, load_obj, occupancy, save_obj, shape_from_json, shape_to_json, signed_distance, validate_shape
from .scene import (CANONICAL_OBJECT_BOUNDS, FieldSpec, IDENTITY_PLACEMENT, ObjectProxy,
                    RigidPlacement, SceneDescription, SceneFormatError,
                    SceneValidationError, Violation, finalize_scene, load_scene, loads_scene,
                    object_to_scene, save_scene, scene_from_json, scene_to_json,
                    scene_to_object, validate_placement, validate_scene)
from .field import (AnalyticField, CheckpointError, FieldOutput, FieldParams,
                    FieldRegistry, ParamGradient, TENSOR_NAMES, encoding_dim,
                    eval_field, eval_field_batch, eval_field_backward,
                    eval_field_backward_batch, field_channels, field_eval_batch,
                    field_seed, init_field, load_checkpoint, make_analytic_field,
                    positional_encoding, save_checkpoint)
from .shape_prior import (ShapeLossConfig, alpha_nerf, occupancy_iou,
                          sample_shape_points, shape_loss, shape_loss_at_points)
from .images import Image, pfm_bytes, png_bytes, read_pfm, save_render, write_pfm, write_png, zero_image
from .render import (Camera, RenderError, alpha_from_sigma, camera_from_json,
                     camera_look_at, composite, generate_rays, partition_assignment,
                     render_backward, render_composed, render_composed_f64,
                     render_single, sample_ray)
from .guidance import (GuidanceConfig, GuidanceConfigError, GuidanceError,
                       GuidanceGradient, GuidanceHTTPError, GuidanceProtocolError,
                       GuidanceRequest, GuidanceShapeError, GuidanceTimeout,
                       PhotometricGuidance, RemoteGuidance, photometric_guidance,
                       remote_sds_gradient, select_guidance)
from .training import (AdamState, CameraDistribution, EventLogWriter, ObjectGroup,
                       TrainConfig, TrainEvent, adam_update, global_step, local_step,
                       object_groups, sample_camera, schedule_kinds, train,
                       train_config_from_json, train_config_to_json)
from .editing import (EditError, EditRequest, apply_placement_edit, edit_from_json,
                      finetune_color, finetune_geometry)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
