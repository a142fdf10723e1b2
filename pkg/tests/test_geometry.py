import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scenekit import (AABB, look_at_rotation, quat_from_axis_angle, quat_from_matrix,
                      quat_multiply, quat_normalize, quat_to_matrix,
                      ray_aabb_intersect, rotate_vector)

finite = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)
quat_raw = st.tuples(finite, finite, finite, finite).filter(
    lambda q: sum(x * x for x in q) > 1e-6)


def test_quat_normalize_unit_bits_preserved():
    q = np.array([1.0, 0.0, 0.0, 0.0])
    assert quat_normalize(q) is not q
    assert np.array_equal(quat_normalize(q), q)
    # exact 180-degree quaternion stays bit-identical too
    q = np.array([0.0, 0.0, 0.0, 1.0])
    assert np.array_equal(quat_normalize(q), q)


@given(quat_raw)
def test_quat_normalize_produces_unit_norm(q):
    n = np.linalg.norm(quat_normalize(np.array(q)))
    assert abs(n - 1.0) < 1e-12


@given(quat_raw)
def test_quat_to_matrix_is_rotation(q):
    m = quat_to_matrix(np.array(q))
    assert np.allclose(m @ m.T, np.eye(3), atol=1e-9)
    assert np.linalg.det(m) == pytest.approx(1.0, abs=1e-9)


def test_quat_to_matrix_90_about_z():
    q = quat_from_axis_angle(np.array([0.0, 0.0, 1.0]), math.pi / 2)
    m = quat_to_matrix(q)
    assert np.allclose(m @ [1, 0, 0], [0, 1, 0], atol=1e-12)


def test_quat_to_matrix_180_about_z_exact():
    # scale-invariant formula gives exact +-1/0 entries for axis flips
    m = quat_to_matrix(np.array([0.0, 0.0, 0.0, 1.0]))
    assert np.array_equal(m, np.diag([-1.0, -1.0, 1.0]))


@given(quat_raw, st.tuples(finite, finite, finite))
def test_rotate_vector_matches_matrix(q, v):
    q = np.array(q)
    v = np.array(v)
    assert np.allclose(rotate_vector(q, v), quat_to_matrix(q) @ v, atol=1e-8)


@given(quat_raw, quat_raw)
def test_quat_multiply_composes_rotations(a, b):
    a, b = np.array(a), np.array(b)
    left = quat_to_matrix(quat_multiply(a, b))
    right = quat_to_matrix(a) @ quat_to_matrix(b)
    assert np.allclose(left, right, atol=1e-8)


@given(quat_raw)
def test_quat_from_matrix_round_trip(q):
    q = quat_normalize(np.array(q))
    q2 = quat_from_matrix(quat_to_matrix(q))
    # q and -q encode the same rotation
    assert (np.allclose(q, q2, atol=1e-7) or np.allclose(q, -q2, atol=1e-7))


class TestAABB:
    def test_cube_and_center(self):
        box = AABB.cube(1.5)
        assert np.array_equal(box.center, [0.0, 0.0, 0.0])
        assert np.array_equal(box.extent, [3.0, 3.0, 3.0])

    def test_contains(self):
        box = AABB(np.array([0.0, 0.0, 0.0]), np.array([1.0, 2.0, 3.0]))
        assert box.contains(np.array([0.5, 1.0, 2.9]))
        assert not box.contains(np.array([0.5, 2.1, 1.0]))

    def test_positive_extent(self):
        assert AABB.cube(1.0).has_positive_extent()
        flat = AABB(np.zeros(3), np.array([1.0, 0.0, 1.0]))
        assert not flat.has_positive_extent()


class TestRayAABB:
    def test_hit_through_center(self):
        o = np.array([[0.0, 0.0, 5.0]])
        d = np.array([[0.0, 0.0, -1.0]])
        t0, t1, hit = ray_aabb_intersect(o, d, AABB.cube(1.0))
        assert hit[0]
        assert t0[0] == pytest.approx(4.0)
        assert t1[0] == pytest.approx(6.0)

    def test_parallel_outside_misses(self):
        o = np.array([[0.0, 2.0, 5.0]])  # above the box, parallel to z
        d = np.array([[0.0, 0.0, -1.0]])
        _, _, hit = ray_aabb_intersect(o, d, AABB.cube(1.0))
        assert not hit[0]

    def test_origin_inside_clamps_near_to_zero(self):
        o = np.array([[0.0, 0.0, 0.0]])
        d = np.array([[1.0, 0.0, 0.0]])
        t0, t1, hit = ray_aabb_intersect(o, d, AABB.cube(1.0))
        assert hit[0] and t0[0] == 0.0 and t1[0] == pytest.approx(1.0)

    def test_behind_only_misses(self):
        o = np.array([[0.0, 0.0, 5.0]])
        d = np.array([[0.0, 0.0, 1.0]])  # box is behind the origin
        _, _, hit = ray_aabb_intersect(o, d, AABB.cube(1.0))
        assert not hit[0]

    @given(st.tuples(finite, finite, finite), st.tuples(finite, finite, finite))
    @settings(max_examples=50)
    def test_hit_interval_ordered(self, o, d):
        o = np.array([o])
        d = np.array([d])
        if np.linalg.norm(d) < 1e-6:
            return
        d = d / np.linalg.norm(d)
        t0, t1, hit = ray_aabb_intersect(o, d, AABB.cube(1.0))
        if hit[0]:
            assert 0.0 <= t0[0] < t1[0]


class TestLookAt:
    def test_view_axis_points_at_target(self):
        eye = np.array([0.0, 0.0, 2.0])
        rot = look_at_rotation(eye, np.zeros(3))
        view = rot @ np.array([0.0, 0.0, -1.0])  # camera looks down local -z
        assert np.allclose(view, [0.0, 0.0, -1.0], atol=1e-12)

    def test_columns_orthonormal(self):
        rot = look_at_rotation(np.array([3.0, 2.0, 1.0]), np.array([0.0, -1.0, 0.5]))
        assert np.allclose(rot @ rot.T, np.eye(3), atol=1e-12)

    def test_degenerate_up_falls_back(self):
        # looking straight down the up axis must still produce a valid frame
        rot = look_at_rotation(np.array([0.0, 5.0, 0.0]), np.zeros(3))
        assert np.allclose(rot @ rot.T, np.eye(3), atol=1e-12)
        assert np.isfinite(rot).all()
