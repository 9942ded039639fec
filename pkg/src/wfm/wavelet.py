"""Single-level orthonormal 3D Haar transform between volumes and 8 subbands.

Per axis, disjoint pairs map to low = (a+b)/sqrt(2) and high = (a-b)/sqrt(2),
so the transform is orthogonal: energy is preserved (Parseval) and synthesis
is the exact inverse.  Subband channel order is (LLL, LLH, LHL, LHH, HLL,
HLH, HHL, HHH) with the letters naming the (depth, height, width) filters.
"""

from __future__ import annotations

import numpy as np

from .volume import Volume

SUBBAND_NAMES = ("LLL", "LLH", "LHL", "LHH", "HLL", "HLH", "HHL", "HHH")

_INV_SQRT2 = 0.7071067811865475244008443621048490393


class WaveletRep:
    """8-subband coefficient block at half the source resolution per axis."""

    __slots__ = ("bands", "source_dims", "spacing")

    def __init__(self, bands, source_dims, spacing=(1.0, 1.0, 1.0)):
        bands = np.asarray(bands)
        if bands.ndim != 4 or bands.shape[0] != 8:
            raise ValueError(f"wavelet rep needs shape (8, D/2, H/2, W/2), got {bands.shape}")
        d, h, w = source_dims
        if bands.shape[1:] != (d // 2, h // 2, w // 2):
            raise ValueError(
                f"band dims {bands.shape[1:]} do not match source dims {source_dims}"
            )
        self.bands = bands
        self.source_dims = (int(d), int(h), int(w))
        self.spacing = tuple(spacing)

    @property
    def band_dims(self):
        return self.bands.shape[1:]

    def __repr__(self):
        return f"WaveletRep(band_dims={self.band_dims}, source_dims={self.source_dims})"


def _split(a, axis):
    lo = a.take(range(0, a.shape[axis], 2), axis=axis)
    hi = a.take(range(1, a.shape[axis], 2), axis=axis)
    s = a.dtype.type(_INV_SQRT2)
    return (lo + hi) * s, (lo - hi) * s


def _merge(lo, hi, axis):
    s = lo.dtype.type(_INV_SQRT2)
    shape = list(lo.shape)
    shape[axis] *= 2
    out = np.empty(shape, dtype=lo.dtype)
    even = [slice(None)] * lo.ndim
    odd = [slice(None)] * lo.ndim
    even[axis] = slice(0, None, 2)
    odd[axis] = slice(1, None, 2)
    out[tuple(even)] = (lo + hi) * s
    out[tuple(odd)] = (lo - hi) * s
    return out


def dwt3_array(a: np.ndarray) -> np.ndarray:
    """Analysis on a raw (D, H, W) array; returns (8, D/2, H/2, W/2)."""
    if any(n % 2 for n in a.shape):
        raise ValueError(f"odd-dims: Haar analysis needs even dims, got {a.shape}")
    parts = []
    for d in _split(a, 0):
        for h in _split(d, 1):
            parts.extend(_split(h, 2))
    return np.stack(parts)


def idwt3_array(bands: np.ndarray) -> np.ndarray:
    """Synthesis inverse of :func:`dwt3_array`."""
    halves_h = []
    for i in (0, 2, 4, 6):
        halves_h.append(_merge(bands[i], bands[i + 1], 2))
    halves_d = [_merge(halves_h[0], halves_h[1], 1), _merge(halves_h[2], halves_h[3], 1)]
    return _merge(halves_d[0], halves_d[1], 0)


def dwt3(v: Volume) -> WaveletRep:
    """Decompose a volume into its 8 orthonormal Haar subbands."""
    return WaveletRep(dwt3_array(v.data), v.dims, v.spacing)


def idwt3(w: WaveletRep) -> Volume:
    """Reconstruct the volume from a subband block (exact inverse of dwt3)."""
    return Volume(idwt3_array(w.bands), w.spacing)
