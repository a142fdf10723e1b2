"""Shared fixtures: tiny fields and scenes sized for fast CPU tests."""

from __future__ import annotations

import numpy as np
import pytest

from scenekit import (AABB, FieldRegistry, FieldSpec, ObjectProxy, RigidPlacement,
                      SceneDescription, Sphere, init_field, make_analytic_field)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


@pytest.fixture
def tiny_field():
    # hidden=8, levels=2 keeps finite-difference sweeps cheap
    return init_field(seed=7, hidden=8, levels=2, channels=3)


def make_scene(proxies, fields, bounds=None, seed=0, scene_prompt="test scene"):
    return SceneDescription(
        proxies=tuple(proxies),
        scene_prompt=scene_prompt,
        bounds=bounds if bounds is not None else AABB.cube(1.5),
        fields={fid: FieldSpec(checkpoint=None, channels=ch)
                for fid, ch in fields.items()},
        seed=seed,
    )


def analytic_sphere_scene(radius=0.3, sigma=30.0, separation=0.5):
    """Two disjoint analytic spheres on the x axis, distinct colors."""
    scene = make_scene(
        [ObjectProxy(proxy_id="a", field_id="fa",
                     placement=RigidPlacement(location=(-separation, 0.0, 0.0)),
                     shape=Sphere(radius=1.0)),
         ObjectProxy(proxy_id="b", field_id="fb",
                     placement=RigidPlacement(location=(separation, 0.0, 0.0)),
                     shape=Sphere(radius=1.0))],
        {"fa": 3, "fb": 3})
    registry = FieldRegistry({
        "fa": make_analytic_field("sphere", sigma_inside=sigma, radius=radius,
                                  albedo=(1.0, 0.2, 0.1)),
        "fb": make_analytic_field("sphere", sigma_inside=sigma, radius=radius,
                                  albedo=(0.1, 0.4, 1.0)),
    })
    return scene, registry
