"""Proxy shapes: primitives and triangle meshes with signed-distance and
occupancy queries.

All shapes live in canonical object units, centered at the origin (meshes as
authored). Cylinders are aligned with the y axis. Sign convention: negative
inside.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

BOUNDARY_EPS = 1e-9  # |d| below this counts as inside for occupancy

# Fixed, deliberately non-axis-aligned directions for mesh parity tests;
# majority vote over the three tolerates a ray grazing an edge or vertex.
_PARITY_DIRS = np.array([
    [0.57735026, 0.57735027, 0.57735028],
    [-0.26726124, 0.53452248, 0.80178373],
    [0.84515425, -0.16903085, 0.50709255],
])


class NonWatertightMeshError(ValueError):
    """Raised when an occupancy/sign query needs a closed mesh and the mesh is not."""


@dataclass(frozen=True)
class Sphere:
    radius: float = 1.0


@dataclass(frozen=True)
class Box:
    half_extents: tuple[float, float, float] = (1.0, 1.0, 1.0)


@dataclass(frozen=True)
class Cylinder:
    radius: float = 1.0
    half_height: float = 1.0


@dataclass(eq=False)
class Mesh:
    vertices: np.ndarray  # (V, 3) float64
    triangles: np.ndarray  # (T, 3) int64, CCW outward
    path: str | None = None  # source OBJ, kept for scene serialization
    _bvh: "TriangleBVH | None" = field(default=None, repr=False)
    _watertight: bool | None = field(default=None, repr=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64)

    @property
    def bvh(self) -> "TriangleBVH":
        if self._bvh is None:
            self._bvh = TriangleBVH(self.vertices, self.triangles)
        return self._bvh

    def is_watertight(self) -> bool:
        if self._watertight is None:
            self._watertight = _edge_manifold_closed(self.triangles)
        return self._watertight

    def euler_characteristic(self) -> int:
        v = len(np.unique(self.triangles))
        e = len(_undirected_edges(self.triangles))
        f = len(self.triangles)
        return v - e + f


ProxyShape = Union[Sphere, Box, Cylinder, Mesh]


def validate_shape(shape: ProxyShape) -> list[str]:
    """Dimension sanity; returns human-readable violations (empty when valid)."""
    bad: list[str] = []
    if isinstance(shape, Sphere):
        if not shape.radius > 0:
            bad.append("nonpositive sphere radius")
    elif isinstance(shape, Box):
        if not all(h > 0 for h in shape.half_extents):
            bad.append("nonpositive box half extent")
    elif isinstance(shape, Cylinder):
        if not shape.radius > 0:
            bad.append("nonpositive cylinder radius")
        if not shape.half_height > 0:
            bad.append("nonpositive cylinder half height")
    elif isinstance(shape, Mesh):
        if len(shape.vertices) < 3 or len(shape.triangles) < 1:
            bad.append("mesh has no triangles")
        elif shape.triangles.min() < 0 or shape.triangles.max() >= len(shape.vertices):
            bad.append("mesh triangle index out of range")
    else:
        bad.append(f"unknown shape type {type(shape).__name__}")
    return bad


# ---------------------------------------------------------------------------
# signed distance / occupancy


def signed_distance(shape: ProxyShape, p: np.ndarray) -> np.ndarray | float:
    """Signed distance from point(s) to the shape surface, negative inside.

    Exact for primitives. For meshes: unsigned closest-triangle distance via
    a BVH, sign from ray-parity (requires a watertight mesh).
    """
    p = np.asarray(p, dtype=np.float64)
    single = p.ndim == 1
    pts = p.reshape(-1, 3)
    if isinstance(shape, Sphere):
        d = np.linalg.norm(pts, axis=1) - shape.radius
    elif isinstance(shape, Box):
        q = np.abs(pts) - np.asarray(shape.half_extents, dtype=np.float64)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(np.max(q, axis=1), 0.0)
        d = outside + inside
    elif isinstance(shape, Cylinder):
        radial = np.hypot(pts[:, 0], pts[:, 2]) - shape.radius
        axial = np.abs(pts[:, 1]) - shape.half_height
        q = np.stack([radial, axial], axis=1)
        d = np.minimum(np.max(q, axis=1), 0.0) + np.linalg.norm(np.maximum(q, 0.0), axis=1)
    elif isinstance(shape, Mesh):
        d = shape.bvh.closest_distance(pts)
        inside = _mesh_inside(shape, pts)
        d = np.where(inside, -d, d)
    else:
        raise TypeError(f"unknown shape type {type(shape).__name__}")
    return float(d[0]) if single else d


def occupancy(shape: ProxyShape, p: np.ndarray) -> np.ndarray | float:
    """1.0 inside (boundary counts as inside), 0.0 outside."""
    d = signed_distance(shape, p)
    if np.isscalar(d):
        return 1.0 if d < BOUNDARY_EPS else 0.0
    return (d < BOUNDARY_EPS).astype(np.float64)


def _mesh_inside(mesh: Mesh, pts: np.ndarray) -> np.ndarray:
    if not mesh.is_watertight():
        raise NonWatertightMeshError(
            "mesh is not watertight (edge-manifold test failed); "
            "occupancy and sign queries are unavailable")
    votes = np.zeros(len(pts), dtype=np.int64)
    for direction in _PARITY_DIRS:
        crossings = mesh.bvh.count_crossings(pts, direction)
        votes += crossings % 2
    return votes >= 2


def _undirected_edges(triangles: np.ndarray) -> dict[tuple[int, int], int]:
    edges: dict[tuple[int, int], int] = {}
    for a, b, c in triangles:
        for u, v in ((a, b), (b, c), (c, a)):
            key = (int(min(u, v)), int(max(u, v)))
            edges[key] = edges.get(key, 0) + 1
    return edges


def _edge_manifold_closed(triangles: np.ndarray) -> bool:
    """Closed 2-manifold test: every undirected edge borders exactly two
    triangles, traversed once in each direction."""
    if len(triangles) == 0:
        return False
    undirected = _undirected_edges(triangles)
    if any(count != 2 for count in undirected.values()):
        return False
    directed: set[tuple[int, int]] = set()
    for a, b, c in triangles:
        for u, v in ((int(a), int(b)), (int(b), int(c)), (int(c), int(a))):
            if (u, v) in directed:
                return False  # same orientation twice -> inconsistent winding
            directed.add((u, v))
    return True


# ---------------------------------------------------------------------------
# triangle BVH

_LEAF_SIZE = 8
_BRUTE_FORCE_MAX_TRIS = 32  # small meshes skip traversal, fully vectorized


class TriangleBVH:
    """Median-split AABB tree over triangles.

    Supports closest-point distance and ray-crossing counts; both fall back to
    a fully vectorized brute-force path for small meshes.
    """

    def __init__(self, vertices: np.ndarray, triangles: np.ndarray, leaf_size: int = _LEAF_SIZE):
        self.vertices = np.asarray(vertices, dtype=np.float64)
        self.triangles = np.asarray(triangles, dtype=np.int64)
        self._tri_pts = self.vertices[self.triangles]  # (T, 3, 3)
        self.leaf_size = leaf_size
        tri_min = self._tri_pts.min(axis=1)
        tri_max = self._tri_pts.max(axis=1)
        centers = 0.5 * (tri_min + tri_max)

        # Flat node arrays; children == -1 marks a leaf owning order[start:end].
        self._node_min: list[np.ndarray] = []
        self._node_max: list[np.ndarray] = []
        self._node_left: list[int] = []
        self._node_right: list[int] = []
        self._node_start: list[int] = []
        self._node_end: list[int] = []
        self._order = np.arange(len(self.triangles))

        def build(start: int, end: int) -> int:
            idx = self._order[start:end]
            node = len(self._node_min)
            self._node_min.append(tri_min[idx].min(axis=0))
            self._node_max.append(tri_max[idx].max(axis=0))
            self._node_left.append(-1)
            self._node_right.append(-1)
            self._node_start.append(start)
            self._node_end.append(end)
            if end - start > leaf_size:
                axis = int(np.argmax(self._node_max[node] - self._node_min[node]))
                local = np.argsort(centers[idx, axis], kind="stable")
                self._order[start:end] = idx[local]
                mid = (start + end) // 2
                self._node_left[node] = build(start, mid)
                self._node_right[node] = build(mid, end)
            return node

        build(0, len(self.triangles))
        self.node_min = np.array(self._node_min)
        self.node_max = np.array(self._node_max)
        self.node_left = np.array(self._node_left)
        self.node_right = np.array(self._node_right)
        self.node_start = np.array(self._node_start)
        self.node_end = np.array(self._node_end)

    # -- closest distance ---------------------------------------------------

    def closest_distance(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 3)
        if len(self.triangles) <= _BRUTE_FORCE_MAX_TRIS:
            return _point_tri_distance(pts[:, None, :], self._tri_pts[None, :, :, :]).min(axis=1)
        out = np.empty(len(pts))
        for i, p in enumerate(pts):
            out[i] = self._closest_one(p)
        return out

    def _closest_one(self, p: np.ndarray) -> float:
        best = np.inf
        stack = [0]
        while stack:
            node = stack.pop()
            if _aabb_distance(p, self.node_min[node], self.node_max[node]) >= best:
                continue
            left = self.node_left[node]
            if left == -1:
                idx = self._order[self.node_start[node]:self.node_end[node]]
                d = _point_tri_distance(p[None, None, :], self._tri_pts[None, idx]).min()
                best = min(best, float(d))
            else:
                right = self.node_right[node]
                dl = _aabb_distance(p, self.node_min[left], self.node_max[left])
                dr = _aabb_distance(p, self.node_min[right], self.node_max[right])
                # visit nearer child first
                if dl <= dr:
                    stack.extend([right, left])
                else:
                    stack.extend([left, right])
        return best

    # -- ray crossings (for parity) ------------------------------------------

    def count_crossings(self, origins: np.ndarray, direction: np.ndarray) -> np.ndarray:
        origins = np.asarray(origins, dtype=np.float64).reshape(-1, 3)
        direction = np.asarray(direction, dtype=np.float64)
        if len(self.triangles) <= _BRUTE_FORCE_MAX_TRIS:
            hits = _ray_tri_hits(origins, direction, self._tri_pts)
            return hits.sum(axis=1)
        out = np.empty(len(origins), dtype=np.int64)
        for i, o in enumerate(origins):
            out[i] = self._crossings_one(o, direction)
        return out

    def _crossings_one(self, origin: np.ndarray, direction: np.ndarray) -> int:
        count = 0
        stack = [0]
        while stack:
            node = stack.pop()
            if not _ray_hits_aabb(origin, direction, self.node_min[node], self.node_max[node]):
                continue
            left = self.node_left[node]
            if left == -1:
                idx = self._order[self.node_start[node]:self.node_end[node]]
                count += int(_ray_tri_hits(origin[None, :], direction, self._tri_pts[idx]).sum())
            else:
                stack.extend([left, self.node_right[node]])
        return count


def _aabb_distance(p: np.ndarray, bmin: np.ndarray, bmax: np.ndarray) -> float:
    d = np.maximum(np.maximum(bmin - p, 0.0), p - bmax)
    return float(np.linalg.norm(d))


def _ray_hits_aabb(origin, direction, bmin, bmax) -> bool:
    with np.errstate(divide="ignore", invalid="ignore"):
        t0 = (bmin - origin) / direction
        t1 = (bmax - origin) / direction
    lo = np.where(np.isnan(np.minimum(t0, t1)), -np.inf, np.minimum(t0, t1))
    hi = np.where(np.isnan(np.maximum(t0, t1)), np.inf, np.maximum(t0, t1))
    t_near = max(lo.max(), 0.0)
    return bool(hi.min() >= t_near)


def _point_tri_distance(p: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Distance from points to triangles, broadcast over leading dims.

    p: (..., 3), tri: (..., 3, 3). Closest-point-on-triangle via barycentric
    region classification (Ericson, Real-Time Collision Detection 5.1.5).
    """
    a, b, c = tri[..., 0, :], tri[..., 1, :], tri[..., 2, :]
    ab = b - a
    ac = c - a
    ap = p - a

    d1 = np.sum(ab * ap, axis=-1)
    d2 = np.sum(ac * ap, axis=-1)
    bp = p - b
    d3 = np.sum(ab * bp, axis=-1)
    d4 = np.sum(ac * bp, axis=-1)
    cp = p - c
    d5 = np.sum(ab * cp, axis=-1)
    d6 = np.sum(ac * cp, axis=-1)

    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    denom_abc = va + vb + vc
    with np.errstate(divide="ignore", invalid="ignore"):
        v_face = np.where(denom_abc != 0, vb / denom_abc, 0.0)
        w_face = np.where(denom_abc != 0, vc / denom_abc, 0.0)
        v_ab = np.where(d1 - d3 != 0, d1 / (d1 - d3), 0.0)
        w_ac = np.where(d2 - d6 != 0, d2 / (d2 - d6), 0.0)
        num_bc = d4 - d3
        den_bc = (d4 - d3) + (d5 - d6)
        w_bc = np.where(den_bc != 0, num_bc / den_bc, 0.0)

    # region masks, applied in priority order (vertices, edges, face)
    closest = a + v_face[..., None] * ab + w_face[..., None] * ac
    on_bc = b + np.clip(w_bc, 0.0, 1.0)[..., None] * (c - b)
    mask_bc = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
    closest = np.where(mask_bc[..., None], on_bc, closest)
    on_ac = a + np.clip(w_ac, 0.0, 1.0)[..., None] * ac
    mask_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    closest = np.where(mask_ac[..., None], on_ac, closest)
    on_ab = a + np.clip(v_ab, 0.0, 1.0)[..., None] * ab
    mask_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    closest = np.where(mask_ab[..., None], on_ab, closest)
    closest = np.where(((d1 <= 0) & (d2 <= 0))[..., None], a, closest)
    closest = np.where(((d3 >= 0) & (d4 <= d3))[..., None], b, closest)
    closest = np.where(((d6 >= 0) & (d5 <= d6))[..., None], c, closest)

    return np.linalg.norm(p - closest, axis=-1)


def _ray_tri_hits(origins: np.ndarray, direction: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Moller-Trumbore, (N origins) x (T triangles) -> bool (N, T) for t > eps."""
    a, b, c = tri[:, 0, :], tri[:, 1, :], tri[:, 2, :]
    e1 = b - a  # (T, 3)
    e2 = c - a
    pvec = np.cross(direction[None, :], e2)  # (T, 3)
    det = np.sum(e1 * pvec, axis=-1)  # (T,)
    ok = np.abs(det) > 1e-14
    with np.errstate(divide="ignore", invalid="ignore"):
        inv_det = np.where(ok, 1.0 / det, 0.0)
        tvec = origins[:, None, :] - a[None, :, :]  # (N, T, 3)
        u = np.sum(tvec * pvec[None, :, :], axis=-1) * inv_det[None, :]
        qvec = np.cross(tvec, e1[None, :, :])  # (N, T, 3)
        v = np.sum(qvec * direction[None, None, :], axis=-1) * inv_det[None, :]
        t = np.sum(e2[None, :, :] * qvec, axis=-1) * inv_det[None, :]
    return (ok[None, :] & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (t > 1e-12))


# ---------------------------------------------------------------------------
# OBJ I/O (ASCII; vertices + triangular faces only)


def load_obj(path: str | Path) -> Mesh:
    """Parse an ASCII OBJ into a Mesh. Faces must be triangles."""
    vertices: list[list[float]] = []
    faces: list[list[int]] = []
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.decode("utf-8", errors="replace").strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0] == "v":
                if len(parts) < 4:
                    raise ValueError(f"{path}:{lineno}: malformed vertex line")
                vertices.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                if len(parts) != 4:
                    raise ValueError(f"{path}:{lineno}: only triangular faces are supported")
                idx = []
                for token in parts[1:]:
                    v = token.split("/")[0]
                    i = int(v)
                    idx.append(i - 1 if i > 0 else len(vertices) + i)
                faces.append(idx)
            # other directives (vn, vt, o, g, s, usemtl, mtllib) are ignored
    if not vertices or not faces:
        raise ValueError(f"{path}: no triangles found")
    return Mesh(np.array(vertices), np.array(faces), path=str(path))


def save_obj(mesh: Mesh, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for t in mesh.triangles:
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


def box_mesh(half_extents=(1.0, 1.0, 1.0)) -> Mesh:
    """Watertight axis-aligned box mesh (12 triangles, outward CCW winding)."""
    hx, hy, hz = half_extents
    v = np.array([
        [-hx, -hy, -hz], [hx, -hy, -hz], [hx, hy, -hz], [-hx, hy, -hz],
        [-hx, -hy, hz], [hx, -hy, hz], [hx, hy, hz], [-hx, hy, hz],
    ])
    f = np.array([
        [0, 2, 1], [0, 3, 2],  # -z
        [4, 5, 6], [4, 6, 7],  # +z
        [0, 1, 5], [0, 5, 4],  # -y
        [3, 7, 6], [3, 6, 2],  # +y
        [0, 4, 7], [0, 7, 3],  # -x
        [1, 2, 6], [1, 6, 5],  # +x
    ])
    return Mesh(v, f)


def icosphere_mesh(radius: float = 1.0, subdivisions: int = 2) -> Mesh:
    """Watertight icosphere, mainly for tests and demos."""
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        [-1, phi, 0], [1, phi, 0], [-1, -phi, 0], [1, -phi, 0],
        [0, -1, phi], [0, 1, phi], [0, -1, -phi], [0, 1, -phi],
        [phi, 0, -1], [phi, 0, 1], [-phi, 0, -1], [-phi, 0, 1],
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = list(verts)
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(i: int, j: int) -> int:
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                m /= np.linalg.norm(m)
                cache[key] = len(verts)
                verts.append(m)
            return cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new_faces
    return Mesh(radius * np.array(verts), np.array(faces))


# ---------------------------------------------------------------------------
# shape <-> JSON (scene file fragment)


def shape_to_json(shape: ProxyShape) -> dict:
    if isinstance(shape, Sphere):
        return {"type": "sphere", "radius": shape.radius}
    if isinstance(shape, Box):
        return {"type": "box", "half_extents": list(shape.half_extents)}
    if isinstance(shape, Cylinder):
        return {"type": "cylinder", "radius": shape.radius, "half_height": shape.half_height}
    if isinstance(shape, Mesh):
        if shape.path is None:
            raise ValueError("mesh shape has no source path; save it as OBJ first")
        return {"type": "mesh", "path": shape.path}
    raise TypeError(f"unknown shape type {type(shape).__name__}")


def shape_from_json(obj: dict, base_dir: str | Path | None = None, where: str = "shape") -> ProxyShape:
    """Parse a shape object from the scene JSON. Raises ValueError on malformed input."""
    if not isinstance(obj, dict) or "type" not in obj:
        raise ValueError(f"{where}: expected an object with a 'type' key")
    kind = obj["type"]
    allowed = {
        "sphere": {"type", "radius"},
        "box": {"type", "half_extents"},
        "cylinder": {"type", "radius", "half_height"},
        "mesh": {"type", "path"},
    }
    if kind not in allowed:
        raise ValueError(f"{where}: unknown shape type {kind!r}")
    unknown = set(obj) - allowed[kind]
    if unknown:
        raise ValueError(f"{where}: unknown key {sorted(unknown)[0]!r}")
    if kind == "sphere":
        return Sphere(radius=float(obj.get("radius", 1.0)))
    if kind == "box":
        he = obj.get("half_extents", [1.0, 1.0, 1.0])
        if len(he) != 3:
            raise ValueError(f"{where}: half_extents must have 3 entries")
        return Box(half_extents=tuple(float(x) for x in he))
    if kind == "cylinder":
        return Cylinder(radius=float(obj.get("radius", 1.0)),
                        half_height=float(obj.get("half_height", 1.0)))
    path = obj.get("path")
    if not isinstance(path, str):
        raise ValueError(f"{where}: mesh shape needs a 'path' string")
    full = Path(base_dir) / path if base_dir is not None else Path(path)
    mesh = load_obj(full)
    mesh.path = path  # keep the relative form for round-trips
    return mesh
