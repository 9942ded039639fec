"""Dense 3D scalar volumes: masks, normalization, padding, slice export.

Volumes are stored as C-contiguous (depth, height, width) float arrays with
per-axis voxel spacing in millimetres.  All operations are pure: they return
new objects and never mutate their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

AXES = ("axial", "sagittal", "coronal")

STD_FLOOR = 1e-6


class ModalityId(IntEnum):
    """The four MRI contrasts, in the fixed conditioning order."""

    T1 = 0
    T1C = 1
    T2 = 2
    FLAIR = 3


MODALITY_NAMES = ("t1", "t1c", "t2", "flair")


class Volume:
    """A dense 3D scalar field with voxel spacing.

    Data is (depth, height, width), row-major, width fastest.  float32 is
    the working precision; float64 is accepted for high-precision checks.
    """

    __slots__ = ("data", "spacing")

    def __init__(self, data, spacing=(1.0, 1.0, 1.0)):
        data = np.asarray(data)
        if data.dtype not in (np.float32, np.float64):
            data = data.astype(np.float32)
        if data.ndim != 3 or min(data.shape) < 1:
            raise ValueError(f"volume data must be 3D with positive dims, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("volume data must be finite")
        if len(spacing) != 3 or any(s <= 0 for s in spacing):
            raise ValueError(f"bad spacing {spacing}")
        self.data = np.ascontiguousarray(data)
        self.spacing = (float(spacing[0]), float(spacing[1]), float(spacing[2]))

    @property
    def dims(self):
        return self.data.shape

    def __repr__(self):
        return f"Volume(dims={self.dims}, spacing={self.spacing}, dtype={self.data.dtype})"


class Mask:
    """Boolean voxel set paired with a Volume of the same dims."""

    __slots__ = ("bits",)

    def __init__(self, bits):
        bits = np.asarray(bits)
        if bits.dtype != np.bool_:
            bits = bits.astype(np.bool_)
        if bits.ndim != 3:
            raise ValueError(f"mask must be 3D, got shape {bits.shape}")
        self.bits = np.ascontiguousarray(bits)

    @property
    def dims(self):
        return self.bits.shape

    def count(self) -> int:
        return int(self.bits.sum())

    def fraction(self) -> float:
        return self.count() / self.bits.size

    def __repr__(self):
        return f"Mask(dims={self.dims}, set={self.count()})"


@dataclass(frozen=True)
class NormStats:
    """Mean/std used by :func:`normalize`, kept so outputs can be de-normalized."""

    mean: float
    std: float
    degenerate: bool = False


@dataclass(frozen=True)
class CropRecord:
    """Original dims recorded by :func:`pad_to_multiple`; padding is high-end only."""

    orig_dims: tuple


def normalize(v: Volume, m: Mask):
    """Zero-mean unit-variance scaling of the masked voxels.

    Voxels outside the mask are set to 0.  Uses the population std with a
    1e-6 floor; a floored std is reported via ``NormStats.degenerate``.

    Returns:
        (Volume, NormStats)
    """
    if m.dims != v.dims:
        raise ValueError(f"mask dims {m.dims} do not match volume dims {v.dims}")
    if m.count() == 0:
        raise ValueError("empty-mask: normalization needs at least one masked voxel")
    vals = v.data[m.bits].astype(np.float64)
    mean = float(vals.mean())
    std = float(vals.std())
    degenerate = std < STD_FLOOR
    if degenerate:
        std = 1.0
    out = np.zeros(v.dims, dtype=v.data.dtype)
    out[m.bits] = ((vals - mean) / std).astype(v.data.dtype)
    return Volume(out, v.spacing), NormStats(mean=mean, std=std, degenerate=degenerate)


def denormalize(v: Volume, stats: NormStats) -> Volume:
    """Invert :func:`normalize` using its returned stats (background stays 0)."""
    return Volume(v.data * stats.std + stats.mean, v.spacing)


def pad_to_multiple(v: Volume, multiple: int):
    """Zero-pad each axis at the high end up to the next multiple.

    ``multiple`` must be a power of two >= 2.  Returns the padded volume and
    a CropRecord that restores the original dims exactly.
    """
    if multiple < 2 or (multiple & (multiple - 1)) != 0:
        raise ValueError(f"pad multiple must be a power of two >= 2, got {multiple}")
    d, h, w = v.dims
    nd = -(-d // multiple) * multiple
    nh = -(-h // multiple) * multiple
    nw = -(-w // multiple) * multiple
    rec = CropRecord(orig_dims=(d, h, w))
    if (nd, nh, nw) == (d, h, w):
        return Volume(v.data.copy(), v.spacing), rec
    out = np.zeros((nd, nh, nw), dtype=v.data.dtype)
    out[:d, :h, :w] = v.data
    return Volume(out, v.spacing), rec


def crop(v: Volume, rec: CropRecord) -> Volume:
    """Undo :func:`pad_to_multiple`: keep the low corner block of the recorded dims."""
    d, h, w = rec.orig_dims
    if any(o > c for o, c in zip((d, h, w), v.dims)):
        raise ValueError(f"crop record {rec.orig_dims} exceeds volume dims {v.dims}")
    return Volume(v.data[:d, :h, :w].copy(), v.spacing)


def _slice_array(v: Volume, axis: str, index: int) -> np.ndarray:
    d, h, w = v.dims
    if axis == "axial":
        bound = d
        if 0 <= index < bound:
            return v.data[index]
    elif axis == "coronal":
        bound = h
        if 0 <= index < bound:
            return v.data[:, index]
    elif axis == "sagittal":
        bound = w
        if 0 <= index < bound:
            return v.data[:, :, index]
    else:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    raise ValueError(f"slice index out of range: {index} not in [0, {bound}) for {axis}")


def export_slice(v: Volume, axis: str, index: int, path) -> None:
    """Write one slice as a binary 8-bit PGM after min-max scaling.

    A constant slice maps to all-zero pixels (degenerate range).
    """
    sl = _slice_array(v, axis, index).astype(np.float64)
    lo, hi = float(sl.min()), float(sl.max())
    if hi - lo <= 0.0:
        pixels = np.zeros(sl.shape, dtype=np.uint8)
    else:
        pixels = np.rint((sl - lo) / (hi - lo) * 255.0).clip(0, 255).astype(np.uint8)
    rows, cols = pixels.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (cols, rows))
        f.write(pixels.tobytes())
