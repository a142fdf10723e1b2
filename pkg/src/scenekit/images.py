"""Float image container and file I/O.

Renders are float32 rasters with a separate per-pixel opacity plane
(1 - final transmittance). Lossless output is PFM (little-endian, scale
-1.0, scanlines bottom-up); previews are 8-bit PNG via clamped sRGB.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage


@dataclass(eq=False)
class Image:
    """Row-major float32 pixels (height, width, channels) + opacity plane."""

    pixels: np.ndarray
    opacity: np.ndarray

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float32)
        if self.pixels.ndim == 2:
            self.pixels = self.pixels[:, :, None]
        self.opacity = np.asarray(self.opacity, dtype=np.float32)
        if self.opacity.shape != self.pixels.shape[:2]:
            raise ValueError("opacity plane must match pixel resolution")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    def equal_bits(self, other: "Image") -> bool:
        return (self.pixels.shape == other.pixels.shape
                and np.array_equal(self.pixels, other.pixels)
                and np.array_equal(self.opacity, other.opacity))


def zero_image(width: int, height: int, channels: int = 3) -> Image:
    return Image(np.zeros((height, width, channels), dtype=np.float32),
                 np.zeros((height, width), dtype=np.float32))


# ---------------------------------------------------------------------------
# PFM


def pfm_bytes(data: np.ndarray) -> bytes:
    """Portable FloatMap, little-endian (scale -1.0), rows bottom-up.

    Accepts (H, W) or (H, W, 1) grayscale and (H, W, 3) color.
    """
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 3 and data.shape[2] == 1:
        data = data[:, :, 0]
    if data.ndim == 2:
        header = b"Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        header = b"PF"
    else:
        raise ValueError(f"PFM supports 1 or 3 channels, got shape {data.shape}")
    h, w = data.shape[:2]
    return b"".join([header, b"\n", f"{w} {h}\n".encode("ascii"), b"-1.0\n",
                     np.ascontiguousarray(data[::-1], dtype="<f4").tobytes()])


def write_pfm(path: str | Path, data: np.ndarray) -> None:
    Path(path).write_bytes(pfm_bytes(data))


def read_pfm(path: str | Path) -> np.ndarray:
    """Returns (H, W) for grayscale or (H, W, 3) for color, float32."""
    blob = Path(path).read_bytes()
    m = re.match(rb"(P[Ff])\s+(\d+)\s+(\d+)\s+([-+0-9.eE]+)\s", blob)
    if not m:
        raise ValueError(f"{path}: not a PFM file")
    color = m.group(1) == b"PF"
    w, h = int(m.group(2)), int(m.group(3))
    scale = float(m.group(4))
    dtype = "<f4" if scale < 0 else ">f4"
    count = w * h * (3 if color else 1)
    if len(blob) - m.end() < 4 * count:
        raise ValueError(f"{path}: truncated PFM payload")
    raw = np.frombuffer(blob, dtype=dtype, count=count, offset=m.end())
    shape = (h, w, 3) if color else (h, w)
    return raw.reshape(shape)[::-1].astype(np.float32)


# ---------------------------------------------------------------------------
# PNG previews


def to_srgb_u8(linear: np.ndarray) -> np.ndarray:
    c = np.clip(np.asarray(linear, dtype=np.float64), 0.0, 1.0)
    srgb = np.where(c <= 0.0031308, 12.92 * c, 1.055 * np.power(c, 1.0 / 2.4) - 0.055)
    return np.round(srgb * 255.0).astype(np.uint8)


def png_bytes(data: np.ndarray) -> bytes:
    """8-bit sRGB preview. Channels beyond the first three are dropped;
    single-channel data becomes grayscale. Deterministic encoding."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 2:
        data = data[:, :, None]
    if data.shape[2] == 1:
        pil = PILImage.fromarray(to_srgb_u8(data[:, :, 0]), mode="L")
    else:
        u8 = to_srgb_u8(data[:, :, :3])
        if data.shape[2] < 3:
            pad = np.zeros((*u8.shape[:2], 3 - u8.shape[2]), dtype=np.uint8)
            u8 = np.concatenate([u8, pad], axis=2)
        pil = PILImage.fromarray(u8, mode="RGB")
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def write_png(path: str | Path, data: np.ndarray) -> None:
    Path(path).write_bytes(png_bytes(data))


def save_render(image: Image, path: str | Path) -> list[Path]:
    """Write a render to disk; returns the written paths.

    '.pfm' target: lossless color PFM plus '<stem>_opacity.pfm' sidecar.
    '.png' target: clamped sRGB preview of the color raster only.
    """
    path = Path(path)
    written: list[Path] = []
    if path.suffix.lower() == ".pfm":
        write_pfm(path, image.pixels)
        sidecar = path.with_name(path.stem + "_opacity.pfm")
        write_pfm(sidecar, image.opacity)
        written += [path, sidecar]
    elif path.suffix.lower() == ".png":
        write_png(path, image.pixels)
        written.append(path)
    else:
        raise ValueError(f"unsupported image extension {path.suffix!r} (use .pfm or .png)")
    return written
