import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenekit import (Box, Cylinder, Mesh, NonWatertightMeshError, Sphere, box_mesh,
                      icosphere_mesh, load_obj, occupancy, save_obj, shape_from_json,
                      shape_to_json, signed_distance, validate_shape)

unit = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)


class TestPrimitiveSDF:
    def test_unit_sphere_center(self):
        assert signed_distance(Sphere(1.0), np.zeros(3)) == -1.0

    def test_unit_sphere_outside(self):
        assert signed_distance(Sphere(1.0), np.array([2.0, 0.0, 0.0])) == 1.0

    def test_box_face_distance(self):
        # closed form: straight above the +z face by 0.5
        d = signed_distance(Box((1.0, 1.0, 1.0)), np.array([0.0, 0.0, 1.5]))
        assert d == pytest.approx(0.5)

    def test_box_corner_distance(self):
        d = signed_distance(Box((1.0, 1.0, 1.0)), np.array([2.0, 2.0, 2.0]))
        assert d == pytest.approx(np.sqrt(3.0))

    def test_box_inside_is_negative_max_axis(self):
        d = signed_distance(Box((1.0, 1.0, 1.0)), np.array([0.2, 0.0, 0.0]))
        assert d == pytest.approx(-0.8)

    def test_cylinder_axis_is_y(self):
        cyl = Cylinder(radius=0.5, half_height=1.0)
        assert signed_distance(cyl, np.array([0.0, 0.9, 0.0])) < 0
        assert signed_distance(cyl, np.array([0.9, 0.0, 0.0])) == pytest.approx(0.4)
        assert signed_distance(cyl, np.array([0.0, 1.4, 0.0])) == pytest.approx(0.4)

    @given(st.tuples(unit, unit, unit))
    @settings(max_examples=60)
    def test_sphere_sdf_matches_norm(self, p):
        p = np.array(p)
        assert signed_distance(Sphere(0.7), p) == pytest.approx(
            np.linalg.norm(p) - 0.7, abs=1e-12)

    @given(st.tuples(unit, unit, unit))
    @settings(max_examples=60)
    def test_box_sdf_brute_force_sign(self, p):
        box = Box((0.6, 0.8, 0.4))
        inside = all(abs(x) <= h for x, h in zip(p, box.half_extents))
        d = signed_distance(box, np.array(p))
        if inside:
            assert d <= 0
        else:
            assert d > 0


class TestOccupancy:
    def test_sphere_center_occupied(self):
        assert occupancy(Sphere(1.0), np.zeros(3)) == 1.0

    def test_far_point_empty(self):
        assert occupancy(Sphere(1.0), np.array([5.0, 0.0, 0.0])) == 0.0

    def test_boundary_counts_as_inside(self):
        assert occupancy(Sphere(1.0), np.array([1.0, 0.0, 0.0])) == 1.0

    def test_batched(self):
        pts = np.array([[0.0, 0.0, 0.0], [3.0, 0.0, 0.0]])
        assert np.array_equal(occupancy(Sphere(1.0), pts), [1.0, 0.0])


class TestMesh:
    def test_box_mesh_watertight(self):
        mesh = box_mesh((0.5, 0.5, 0.5))
        assert mesh.is_watertight()
        assert mesh.euler_characteristic() == 2  # sphere topology

    def test_open_mesh_not_watertight(self):
        tri = Mesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float),
                   np.array([[0, 1, 2]]))
        assert not tri.is_watertight()

    def test_open_mesh_sdf_raises(self):
        tri = Mesh(np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0]], dtype=float),
                   np.array([[0, 1, 2]]))
        with pytest.raises(NonWatertightMeshError):
            signed_distance(tri, np.zeros(3))

    def test_icosphere_watertight_all_radii_close(self):
        mesh = icosphere_mesh(radius=1.0, subdivisions=2)
        assert mesh.is_watertight()
        radii = np.linalg.norm(mesh.vertices, axis=1)
        assert np.allclose(radii, 1.0, atol=1e-12)

    def test_mesh_cube_vs_analytic_box_cross_oracle(self, rng):
        """Occupancy agreement on 1e5 random points must be >= 99.99%."""
        half = (0.5, 0.5, 0.5)
        mesh = box_mesh(half)
        box = Box(half)
        pts = rng.uniform(-1.0, 1.0, size=(100_000, 3))
        occ_mesh = occupancy(mesh, pts)
        occ_box = occupancy(box, pts)
        agreement = np.mean(occ_mesh == occ_box)
        assert agreement >= 0.9999

    def test_mesh_distance_matches_box_sdf(self, rng):
        half = (0.5, 0.5, 0.5)
        mesh = box_mesh(half)
        pts = rng.uniform(-1.2, 1.2, size=(500, 3))
        d_mesh = signed_distance(mesh, pts)
        d_box = signed_distance(Box(half), pts)
        assert np.max(np.abs(d_mesh - d_box)) < 1e-9

    def test_bvh_matches_brute_force_on_larger_mesh(self, rng):
        # icosphere at subdivisions=2 has 320 triangles, above the
        # brute-force cutoff, so this exercises the tree path
        mesh = icosphere_mesh(radius=0.8, subdivisions=2)
        pts = rng.uniform(-1.5, 1.5, size=(200, 3))
        d = signed_distance(mesh, pts)
        sphere_d = np.abs(np.linalg.norm(pts, axis=1) - 0.8)
        # icosphere edge sagitta bounds the deviation from the sphere
        assert np.max(np.abs(np.abs(d) - sphere_d)) < 0.02


class TestValidateShape:
    def test_good_shapes_empty(self):
        assert validate_shape(Sphere(1.0)) == []
        assert validate_shape(Box((1.0, 2.0, 0.5))) == []
        assert validate_shape(box_mesh()) == []

    def test_nonpositive_radius(self):
        assert validate_shape(Sphere(0.0)) == ["nonpositive sphere radius"]

    def test_bad_triangle_index(self):
        mesh = Mesh(np.zeros((3, 3)), np.array([[0, 1, 5]]))
        assert validate_shape(mesh) == ["mesh triangle index out of range"]


class TestObjIO:
    def test_round_trip(self, tmp_path):
        mesh = box_mesh((0.5, 0.25, 1.0))
        path = tmp_path / "box.obj"
        save_obj(mesh, path)
        loaded = load_obj(path)
        assert np.allclose(loaded.vertices, mesh.vertices)
        assert np.array_equal(loaded.triangles, mesh.triangles)

    def test_negative_indices(self, tmp_path):
        path = tmp_path / "neg.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n")
        mesh = load_obj(path)
        assert np.array_equal(mesh.triangles, [[0, 1, 2]])

    def test_quad_face_rejected_with_line_number(self, tmp_path):
        path = tmp_path / "quad.obj"
        path.write_text("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n")
        with pytest.raises(ValueError, match=r"quad\.obj:5"):
            load_obj(path)


class TestShapeJSON:
    @pytest.mark.parametrize("shape", [
        Sphere(0.7),
        Box((0.5, 1.0, 0.25)),
        Cylinder(radius=0.4, half_height=0.9),
    ])
    def test_primitive_round_trip(self, shape):
        assert shape_from_json(shape_to_json(shape)) == shape

    def test_mesh_round_trip_keeps_relative_path(self, tmp_path):
        save_obj(box_mesh(), tmp_path / "cube.obj")
        obj = {"type": "mesh", "path": "cube.obj"}
        mesh = shape_from_json(obj, base_dir=tmp_path)
        assert mesh.path == "cube.obj"
        assert shape_to_json(mesh) == obj

    def test_unknown_key_rejected(self):
        with pytest.raises(ValueError, match="radius_x"):
            shape_from_json({"type": "sphere", "radius_x": 1.0})

    def test_unknown_type_rejected(self):
        with pytest.raises(ValueError, match="torus"):
            shape_from_json({"type": "torus"})
