import math

import numpy as np
import pytest

from scenekit import (ShapeLossConfig, Sphere, TENSOR_NAMES, alpha_nerf, init_field,
                      make_analytic_field, occupancy_iou, sample_shape_points,
                      shape_loss, shape_loss_at_points)
from scenekit.geometry import AABB


class TestAlphaNerf:
    def test_half_opacity_at_ln2(self):
        # sigma * delta = ln 2  =>  alpha = 1 - exp(-ln 2) = 1/2
        field = make_analytic_field("sphere", sigma_inside=math.log(2.0) / 0.05)
        assert alpha_nerf(field, np.zeros(3), delta_ref=0.05) == pytest.approx(0.5, abs=1e-12)

    def test_zero_density_zero_alpha(self):
        field = make_analytic_field("sphere", sigma_inside=0.0)
        assert alpha_nerf(field, np.zeros(3), delta_ref=0.05) == 0.0

    def test_batched(self):
        field = make_analytic_field("sphere", sigma_inside=5.0, radius=1.0)
        a = alpha_nerf(field, np.array([[0.0, 0, 0], [2.0, 0, 0]]), delta_ref=0.1)
        assert a.shape == (2,)
        assert a[0] == pytest.approx(1.0 - math.exp(-0.5))
        assert a[1] == 0.0


class TestBandWeight:
    def test_single_point_contribution_closed_form(self):
        # inside point (occupancy 1) where the field gives alpha exactly 1/2,
        # at squared distance 2*sigma_s from the surface:
        #   BCE = -ln(1/2) = ln 2,  w = 1 - e^-1,  loss = ln2 (1 - 1/e) ~ 0.4382
        config = ShapeLossConfig(sigma_s=0.01, delta_ref=0.05, weight=1.0)
        field = make_analytic_field("sphere", sigma_inside=math.log(2.0) / 0.05,
                                    radius=2.0)
        d = math.sqrt(2.0 * config.sigma_s)
        pts = np.array([[1.0 - d, 0.0, 0.0]])
        loss, grad = shape_loss_at_points(field, Sphere(1.0), config, pts)
        assert grad is None
        assert loss == pytest.approx(math.log(2.0) * (1.0 - math.exp(-1.0)), abs=1e-12)
        assert loss == pytest.approx(0.4382, abs=1e-4)

    def test_weight_vanishes_on_surface(self):
        config = ShapeLossConfig(sigma_s=0.01)
        field = make_analytic_field("sphere", sigma_inside=3.0, radius=2.0)
        loss, _ = shape_loss_at_points(field, Sphere(1.0), config,
                                       np.array([[1.0, 0.0, 0.0]]))
        assert loss == 0.0

    def test_weight_monotone_in_distance(self):
        # same mismatch everywhere; farther from the surface weighs more
        config = ShapeLossConfig(sigma_s=0.01)
        field = make_analytic_field("sphere", sigma_inside=0.0, radius=2.0)
        losses = []
        for x in (1.05, 1.2, 1.5, 1.9):
            loss, _ = shape_loss_at_points(field, Sphere(1.0), config,
                                           np.array([[x, 0.0, 0.0]]))
            losses.append(loss)
        assert losses == sorted(losses)

    def test_loss_scales_with_weight(self):
        field = make_analytic_field("sphere", sigma_inside=1.0, radius=2.0)
        pts = np.array([[0.5, 0.0, 0.0], [1.5, 0.0, 0.0]])
        one, _ = shape_loss_at_points(field, Sphere(1.0), ShapeLossConfig(weight=1.0), pts)
        three, _ = shape_loss_at_points(field, Sphere(1.0), ShapeLossConfig(weight=3.0), pts)
        assert three == pytest.approx(3.0 * one, rel=1e-12)


def fd_loss_gradient(params, shape, config, pts, name, idx, eps=1e-5):
    plus = params.copy()
    getattr(plus, name)[idx] += eps
    minus = params.copy()
    getattr(minus, name)[idx] -= eps
    lp, _ = shape_loss_at_points(plus, shape, config, pts)
    lm, _ = shape_loss_at_points(minus, shape, config, pts)
    return (lp - lm) / (2 * eps)


class TestGradient:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(21)
        params = init_field(seed=8, hidden=6, levels=2).astype(np.float64)
        config = ShapeLossConfig(sigma_s=0.02, delta_ref=0.05)
        shape = Sphere(0.8)
        pts = rng.uniform(-1, 1, size=(16, 3))
        _, grad = shape_loss_at_points(params, shape, config, pts)
        for name in TENSOR_NAMES:
            tensor = getattr(params, name)
            for _ in range(2):
                idx = tuple(rng.integers(0, s) for s in tensor.shape)
                fd = fd_loss_gradient(params, shape, config, pts, name, idx)
                assert getattr(grad, name)[idx] == pytest.approx(fd, abs=1e-4), name

    def test_color_head_gets_no_gradient(self):
        params = init_field(seed=8, hidden=6, levels=2).astype(np.float64)
        pts = np.random.default_rng(0).uniform(-1, 1, size=(16, 3))
        _, grad = shape_loss_at_points(params, Sphere(0.8), ShapeLossConfig(), pts)
        for name in ("wa1", "ba1", "wa2", "ba2"):
            assert not np.any(getattr(grad, name))

    def test_saturated_opacity_gives_zero_gradient(self):
        # push the density bias so alpha clamps at 1 - eps everywhere;
        # the clamp must cut the gradient, not explode it
        params = init_field(seed=8, hidden=6, levels=2).astype(np.float64)
        params.bd[...] = 300.0
        pts = np.random.default_rng(1).uniform(-1, 1, size=(16, 3))
        loss, grad = shape_loss_at_points(params, Sphere(0.8), ShapeLossConfig(), pts)
        assert math.isfinite(loss)
        for t in grad.tensors():
            assert not np.any(t)

    def test_zero_weight_zero_everything(self):
        params = init_field(seed=8, hidden=6, levels=2).astype(np.float64)
        pts = np.random.default_rng(2).uniform(-1, 1, size=(8, 3))
        loss, grad = shape_loss_at_points(params, Sphere(0.8),
                                          ShapeLossConfig(weight=0.0), pts)
        assert loss == 0.0
        for t in grad.tensors():
            assert not np.any(t)


class TestSampling:
    def test_points_in_bounds(self):
        rng = np.random.Generator(np.random.PCG64(5))
        bounds = AABB(np.array([-1.0, -2.0, 0.0]), np.array([1.0, 0.0, 3.0]))
        pts = sample_shape_points(ShapeLossConfig(n_points=512), rng, bounds)
        assert pts.shape == (512, 3)
        assert np.all(pts >= bounds.min) and np.all(pts <= bounds.max)

    def test_reproducible_from_seed(self):
        config = ShapeLossConfig(n_points=64)
        a = sample_shape_points(config, np.random.Generator(np.random.PCG64(9)))
        b = sample_shape_points(config, np.random.Generator(np.random.PCG64(9)))
        assert np.array_equal(a, b)

    def test_shape_loss_uses_generator(self):
        field = make_analytic_field("sphere", sigma_inside=1.0, radius=0.5)
        config = ShapeLossConfig(n_points=256)
        l1, _ = shape_loss(field, Sphere(0.8), config, np.random.Generator(np.random.PCG64(3)))
        l2, _ = shape_loss(field, Sphere(0.8), config, np.random.Generator(np.random.PCG64(3)))
        assert l1 == l2


class TestConfig:
    def test_rejects_bad_values(self):
        with pytest.raises(ValueError, match="sigma_s"):
            ShapeLossConfig(sigma_s=0.0)
        with pytest.raises(ValueError, match="delta_ref"):
            ShapeLossConfig(delta_ref=-1.0)
        with pytest.raises(ValueError, match="weight"):
            ShapeLossConfig(weight=-0.1)


class TestIoU:
    def test_matching_analytic_field_is_perfect(self):
        shape = Sphere(0.7)
        field = make_analytic_field(shape=shape, sigma_inside=50.0)
        assert occupancy_iou(field, shape, resolution=24) == 1.0

    def test_empty_field_is_zero(self):
        field = make_analytic_field("sphere", sigma_inside=0.0, radius=0.7)
        assert occupancy_iou(field, Sphere(0.7), resolution=24) == 0.0

    def test_partial_overlap_in_between(self):
        field = make_analytic_field("sphere", sigma_inside=50.0, radius=1.0)
        iou = occupancy_iou(field, Sphere(0.6), resolution=24)
        # ratio of volumes 0.6^3 = 0.216, quantized to the voxel grid
        assert 0.1 < iou < 0.35
