"""Trainable neural fields: positional encoding, a small density/albedo MLP
with hand-written reverse-mode gradients, analytic oracle fields, binary
checkpoints, and the field registry keyed by field id.

Architecture (hidden width H, encoding levels L, channels C):

    enc (3+6L) -> trunk: H -> H            softplus hidden activations
    density head: H -> 1                   softplus output (sigma >= 0)
    albedo head:  H -> H -> C              softplus hidden, logistic output

Density and albedo heads share the trunk but own disjoint parameters, so
albedo parameters can be retrained without disturbing density (and vice
versa). Parameters are float32 for training and rendering; cast to float64
(`params.astype`) for finite-difference gradient checks.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field as dataclass_field
from pathlib import Path
from typing import Union

import numpy as np

from .shapes import Box, ProxyShape, Sphere, occupancy

MAX_ENCODING_LEVELS = 12
CHECKPOINT_MAGIC = b"STSF"
CHECKPOINT_VERSION = 1

# serialization and update order of the parameter tensors
TENSOR_NAMES = ("w1", "b1", "w2", "b2", "wd", "bd", "wa1", "ba1", "wa2", "ba2")


class CheckpointError(ValueError):
    """Bad magic/version, shape mismatch, or truncated checkpoint."""


def encoding_dim(levels: int) -> int:
    return 3 + 6 * levels


def positional_encoding(p: np.ndarray, levels: int) -> np.ndarray:
    """[p, sin(2^0 pi p), cos(2^0 pi p), ..., sin(2^{L-1} pi p), cos(...)],
    three components per group. Accepts (3,) or (N, 3)."""
    if levels > MAX_ENCODING_LEVELS:
        raise ValueError(f"encoding levels {levels} > {MAX_ENCODING_LEVELS}")
    p = np.asarray(p, dtype=np.float64)
    single = p.ndim == 1
    pts = p.reshape(-1, 3)
    parts = [pts]
    for lvl in range(levels):
        arg = (2.0 ** lvl) * np.pi * pts
        parts.append(np.sin(arg))
        parts.append(np.cos(arg))
    out = np.concatenate(parts, axis=1)
    return out[0] if single else out


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass(eq=False)
class FieldParams:
    """Weights of one neural field. Tensor shapes (E = 3 + 6L):
    w1 (E,H) b1 (H,) w2 (H,H) b2 (H,) wd (H,1) bd (1,)
    wa1 (H,H) ba1 (H,) wa2 (H,C) ba2 (C,)."""

    levels: int
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    wd: np.ndarray
    bd: np.ndarray
    wa1: np.ndarray
    ba1: np.ndarray
    wa2: np.ndarray
    ba2: np.ndarray

    @property
    def hidden(self) -> int:
        return self.w1.shape[1]

    @property
    def channels(self) -> int:
        return self.wa2.shape[1]

    @property
    def dtype(self) -> np.dtype:
        return self.w1.dtype

    def tensors(self) -> tuple[np.ndarray, ...]:
        return tuple(getattr(self, name) for name in TENSOR_NAMES)

    def astype(self, dtype) -> "FieldParams":
        kw = {name: getattr(self, name).astype(dtype) for name in TENSOR_NAMES}
        return FieldParams(levels=self.levels, **kw)

    def copy(self) -> "FieldParams":
        kw = {name: getattr(self, name).copy() for name in TENSOR_NAMES}
        return FieldParams(levels=self.levels, **kw)

    def allclose(self, other: "FieldParams", atol: float = 0.0) -> bool:
        return self.levels == other.levels and all(
            a.shape == b.shape and np.allclose(a, b, atol=atol)
            for a, b in zip(self.tensors(), other.tensors()))

    def equal_bits(self, other: "FieldParams") -> bool:
        return self.levels == other.levels and all(
            np.array_equal(a, b) and a.dtype == b.dtype
            for a, b in zip(self.tensors(), other.tensors()))


@dataclass(eq=False)
class ParamGradient:
    """Same tensor layout as FieldParams; supports in-place accumulation."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    wd: np.ndarray
    bd: np.ndarray
    wa1: np.ndarray
    ba1: np.ndarray
    wa2: np.ndarray
    ba2: np.ndarray

    @classmethod
    def zeros_like(cls, params: FieldParams) -> "ParamGradient":
        kw = {name: np.zeros_like(getattr(params, name)) for name in TENSOR_NAMES}
        return cls(**kw)

    def tensors(self) -> tuple[np.ndarray, ...]:
        return tuple(getattr(self, name) for name in TENSOR_NAMES)

    def add_(self, other: "ParamGradient") -> "ParamGradient":
        for name in TENSOR_NAMES:
            getattr(self, name)[...] += getattr(other, name)
        return self

    def scale_(self, factor: float) -> "ParamGradient":
        for name in TENSOR_NAMES:
            getattr(self, name)[...] *= factor
        return self

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(t))) if t.size else 0.0 for t in self.tensors())


@dataclass(frozen=True)
class FieldOutput:
    sigma: float
    albedo: np.ndarray


def init_field(seed: int, hidden: int = 64, levels: int = 6, channels: int = 3,
               dtype=np.float32) -> FieldParams:
    """Deterministic init: weights uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)),
    biases zero."""
    rng = np.random.Generator(np.random.PCG64(seed))
    e = encoding_dim(levels)

    def layer(fan_in: int, fan_out: int):
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)
        b = np.zeros(fan_out, dtype=dtype)
        return w, b

    w1, b1 = layer(e, hidden)
    w2, b2 = layer(hidden, hidden)
    wd, bd = layer(hidden, 1)
    wa1, ba1 = layer(hidden, hidden)
    wa2, ba2 = layer(hidden, channels)
    return FieldParams(levels=levels, w1=w1, b1=b1, w2=w2, b2=b2, wd=wd, bd=bd,
                       wa1=wa1, ba1=ba1, wa2=wa2, ba2=ba2)


# ---------------------------------------------------------------------------
# forward / backward


@dataclass(eq=False)
class _ForwardCache:
    enc: np.ndarray
    z1: np.ndarray
    h1: np.ndarray
    z2: np.ndarray
    h2: np.ndarray
    zd: np.ndarray
    za1: np.ndarray
    ha: np.ndarray
    albedo: np.ndarray


def _forward(params: FieldParams, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray, _ForwardCache]:
    dtype = params.dtype
    clipped = np.clip(pts, -1.0, 1.0)  # encoding domain; points are still evaluated
    enc = positional_encoding(clipped, params.levels).astype(dtype)
    z1 = enc @ params.w1 + params.b1
    h1 = _softplus(z1)
    z2 = h1 @ params.w2 + params.b2
    h2 = _softplus(z2)
    zd = h2 @ params.wd + params.bd
    sigma = _softplus(zd)[:, 0]
    za1 = h2 @ params.wa1 + params.ba1
    ha = _softplus(za1)
    za2 = ha @ params.wa2 + params.ba2
    albedo = _sigmoid(za2)
    return sigma, albedo, _ForwardCache(enc, z1, h1, z2, h2, zd, za1, ha, albedo)


def eval_field_batch(params: FieldParams, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """sigma (N,), albedo (N, C) for points (N, 3). Pure and deterministic."""
    pts = np.asarray(pts).reshape(-1, 3)
    sigma, albedo, _ = _forward(params, pts)
    return sigma, albedo


def eval_field(params: FieldParams, p: np.ndarray) -> FieldOutput:
    sigma, albedo = eval_field_batch(params, np.asarray(p).reshape(1, 3))
    return FieldOutput(sigma=float(sigma[0]), albedo=albedo[0])


def eval_field_backward_batch(params: FieldParams, pts: np.ndarray,
                              d_sigma: np.ndarray, d_albedo: np.ndarray,
                              cache: _ForwardCache | None = None) -> ParamGradient:
    """Analytic gradient of sum_i (d_sigma_i sigma_i + d_albedo_i . albedo_i)
    with respect to params."""
    pts = np.asarray(pts).reshape(-1, 3)
    if cache is None:
        _, _, cache = _forward(params, pts)
    dtype = params.dtype
    gs = np.asarray(d_sigma, dtype=dtype).reshape(-1, 1)
    ga = np.asarray(d_albedo, dtype=dtype).reshape(len(pts), -1)

    # output activations: d softplus(z) = sigmoid(z); d logistic(z) = a(1-a)
    dza2 = ga * cache.albedo * (1.0 - cache.albedo)
    gwa2 = cache.ha.T @ dza2
    gba2 = dza2.sum(axis=0)
    dha = dza2 @ params.wa2.T

    dza1 = dha * _sigmoid(cache.za1)
    gwa1 = cache.h2.T @ dza1
    gba1 = dza1.sum(axis=0)
    dh2 = dza1 @ params.wa1.T

    dzd = gs * _sigmoid(cache.zd)
    gwd = cache.h2.T @ dzd
    gbd = dzd.sum(axis=0)
    dh2 += dzd @ params.wd.T

    dz2 = dh2 * _sigmoid(cache.z2)
    gw2 = cache.h1.T @ dz2
    gb2 = dz2.sum(axis=0)
    dh1 = dz2 @ params.w2.T

    dz1 = dh1 * _sigmoid(cache.z1)
    gw1 = cache.enc.T @ dz1
    gb1 = dz1.sum(axis=0)

    return ParamGradient(w1=gw1, b1=gb1, w2=gw2, b2=gb2, wd=gwd, bd=gbd,
                         wa1=gwa1, ba1=gba1, wa2=gwa2, ba2=gba2)


def eval_field_backward(params: FieldParams, p: np.ndarray,
                        d_sigma: float, d_albedo: np.ndarray) -> ParamGradient:
    pts = np.asarray(p).reshape(1, 3)
    return eval_field_backward_batch(params, pts, np.array([d_sigma]),
                                     np.asarray(d_albedo).reshape(1, -1))


# ---------------------------------------------------------------------------
# analytic oracle fields


@dataclass(eq=False)
class AnalyticField:
    """Constant-density solid with a hard boundary at the primitive surface.

    Exact and parameter-free; used as a rendering oracle in tests and demos.
    """

    shape: ProxyShape
    sigma_inside: float
    albedo: np.ndarray

    def __post_init__(self):
        self.albedo = np.asarray(self.albedo, dtype=np.float64).reshape(-1)

    @property
    def channels(self) -> int:
        return len(self.albedo)


def make_analytic_field(kind: str = "sphere", sigma_inside: float = 10.0,
                        albedo=(1.0, 1.0, 1.0), radius: float = 1.0,
                        half_extents=(1.0, 1.0, 1.0),
                        shape: ProxyShape | None = None) -> AnalyticField:
    if shape is None:
        if kind == "sphere":
            shape = Sphere(radius=radius)
        elif kind == "box":
            shape = Box(half_extents=tuple(float(h) for h in half_extents))
        else:
            raise ValueError(f"unknown analytic field kind {kind!r}")
    return AnalyticField(shape=shape, sigma_inside=float(sigma_inside), albedo=albedo)


FieldLike = Union[FieldParams, AnalyticField]


def field_channels(field: FieldLike) -> int:
    return field.channels


def field_eval_batch(field: FieldLike, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Uniform evaluation entry point for trainable and analytic fields."""
    pts = np.asarray(pts).reshape(-1, 3)
    if isinstance(field, FieldParams):
        return eval_field_batch(field, pts)
    occ = occupancy(field.shape, pts)
    sigma = field.sigma_inside * occ
    albedo = np.tile(field.albedo, (len(pts), 1))
    return sigma, albedo


# ---------------------------------------------------------------------------
# checkpoints

_HEADER = struct.Struct("<4sIIII")  # magic, version, H, L, C


def _tensor_shapes(hidden: int, levels: int, channels: int) -> dict[str, tuple[int, ...]]:
    e = encoding_dim(levels)
    return {
        "w1": (e, hidden), "b1": (hidden,),
        "w2": (hidden, hidden), "b2": (hidden,),
        "wd": (hidden, 1), "bd": (1,),
        "wa1": (hidden, hidden), "ba1": (hidden,),
        "wa2": (hidden, channels), "ba2": (channels,),
    }


def save_checkpoint(params: FieldParams, path: str | Path) -> None:
    """Little-endian binary: magic, version, (H, L, C), float32 tensors in
    declared order. Round-trip is bit-exact."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
                              params.hidden, params.levels, params.channels))
        for t in params.tensors():
            fh.write(np.ascontiguousarray(t, dtype="<f4").tobytes())


def load_checkpoint(path: str | Path, expected_channels: int | None = None) -> FieldParams:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise CheckpointError(f"{path}: truncated header")
    magic, version, hidden, levels, channels = _HEADER.unpack_from(blob, 0)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    if expected_channels is not None and channels != expected_channels:
        raise CheckpointError(
            f"{path}: checkpoint has {channels} channels, expected {expected_channels}")
    shapes = _tensor_shapes(hidden, levels, channels)
    offset = _HEADER.size
    arrays = {}
    for name in TENSOR_NAMES:
        shape = shapes[name]
        count = int(np.prod(shape))
        nbytes = 4 * count
        if offset + nbytes > len(blob):
            raise CheckpointError(f"{path}: truncated tensor {name!r}")
        arrays[name] = np.frombuffer(blob, dtype="<f4", count=count,
                                     offset=offset).reshape(shape).copy()
        offset += nbytes
    if offset != len(blob):
        raise CheckpointError(f"{path}: {len(blob) - offset} trailing bytes")
    return FieldParams(levels=levels, **arrays)


# ---------------------------------------------------------------------------
# registry


def field_seed(scene_seed: int, field_id: str) -> int:
    """Stable per-field init seed derived from the scene seed."""
    return (int(scene_seed) * 2654435761 + zlib.crc32(field_id.encode("utf-8"))) % (2 ** 63)


class FieldRegistry:
    """Maps field_id -> field (trainable params or analytic oracle)."""

    def __init__(self, fields: dict[str, FieldLike] | None = None):
        self._fields: dict[str, FieldLike] = dict(fields or {})

    @classmethod
    def from_scene(cls, scene, base_dir: str | Path | None = None,
                   hidden: int = 64, levels: int = 6) -> "FieldRegistry":
        """Load checkpoints named by the scene, init missing fields from the
        scene seed. Relative checkpoint paths resolve against base_dir."""
        base = Path(base_dir) if base_dir is not None else Path(".")
        out: dict[str, FieldLike] = {}
        for fid, spec in scene.fields.items():
            if spec.checkpoint is not None:
                p = Path(spec.checkpoint)
                if not p.is_absolute():
                    p = base / p
                out[fid] = load_checkpoint(p, expected_channels=spec.channels)
            else:
                out[fid] = init_field(field_seed(scene.seed, fid), hidden=hidden,
                                      levels=levels, channels=spec.channels)
        return cls(out)

    def __getitem__(self, field_id: str) -> FieldLike:
        try:
            return self._fields[field_id]
        except KeyError:
            raise KeyError(f"no field with id {field_id!r}") from None

    def __setitem__(self, field_id: str, field: FieldLike) -> None:
        self._fields[field_id] = field

    def __contains__(self, field_id: str) -> bool:
        return field_id in self._fields

    def __iter__(self):
        return iter(self._fields)

    def items(self):
        return self._fields.items()

    def save_all(self, scene, base_dir: str | Path) -> dict[str, str]:
        """Write every trainable field to '<field_id>.stsf' under base_dir;
        returns field_id -> relative checkpoint path."""
        base = Path(base_dir)
        base.mkdir(parents=True, exist_ok=True)
        written: dict[str, str] = {}
        for fid, field in self._fields.items():
            if isinstance(field, FieldParams):
                rel = f"{fid}.stsf"
                save_checkpoint(field, base / rel)
                written[fid] = rel
        return written
