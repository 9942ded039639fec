"""Minimal NIfTI-1 I/O plus a private raw volume format ("WFMV").

Only what volume ingestion needs: uncompressed .nii (or .hdr/.img pairs),
datatypes uint8/int16/float32, scl_slope/scl_inter scaling, and automatic
byte-order detection via the dim[0] in [1, 7] rule.  Orientation fields are
ignored; volumes are treated as voxel-aligned (depth, height, width) grids
with spacing taken from pixdim.
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .volume import Volume

_HDR_FMT = "i10s18sihcc8h3fhhhh8ffffhcc4fii80s24shh6f12f16s4s"
_HDR_SIZE = struct.calcsize("<" + _HDR_FMT)  # 348

_DTYPES = {2: np.uint8, 4: np.int16, 16: np.float32}
_BITPIX = {2: 8, 4: 16, 16: 32}

_RAW_MAGIC = b"WFMV"
_RAW_VERSION = 1


def _unpack_header(raw: bytes):
    """Parse the 348-byte header, trying little endian first then swapped."""
    for order in ("<", ">"):
        f = struct.unpack_from(order + _HDR_FMT, raw)
        hdr = {
            "sizeof_hdr": f[0],
            "dim": f[7:15],
            "datatype": f[19],
            "bitpix": f[20],
            "pixdim": f[22:30],
            "vox_offset": f[30],
            "scl_slope": f[31],
            "scl_inter": f[32],
            "magic": f[-1],
            "order": order,
        }
        if hdr["sizeof_hdr"] == _HDR_SIZE and 1 <= hdr["dim"][0] <= 7:
            return hdr
    raise ValueError("bad-header: sizeof_hdr/dim[0] invalid in either byte order")


def read_nifti(path) -> Volume:
    """Read an uncompressed NIfTI-1 volume as float32."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HDR_SIZE:
        raise ValueError("bad-header: file shorter than a NIfTI-1 header")
    hdr = _unpack_header(raw)
    magic = hdr["magic"]
    if magic not in (b"n+1\x00", b"ni1\x00"):
        raise ValueError(f"bad-magic: {magic!r}")
    if hdr["datatype"] not in _DTYPES:
        raise ValueError(f"unsupported-datatype: code {hdr['datatype']}")
    if hdr["bitpix"] != _BITPIX[hdr["datatype"]]:
        raise ValueError(f"bad-header: bitpix {hdr['bitpix']} for datatype {hdr['datatype']}")
    dim = hdr["dim"]
    extents = [max(1, dim[i]) if i <= dim[0] else 1 for i in range(1, 8)]
    if any(e != 1 for e in extents[3:]):
        raise ValueError(f"unsupported-dims: only 3D volumes, got dim={dim}")
    nx, ny, nz = extents[:3]

    if magic == b"ni1\x00":  # header/data pair: payload lives in the .img file
        img_path = os.path.splitext(str(path))[0] + ".img"
        with open(img_path, "rb") as fh:
            payload = fh.read()
        offset = 0
    else:
        payload = raw
        offset = int(hdr["vox_offset"])
        if offset < _HDR_SIZE:
            raise ValueError(f"bad-header: vox_offset {offset}")

    dt = np.dtype(_DTYPES[hdr["datatype"]]).newbyteorder(hdr["order"])
    nbytes = nx * ny * nz * dt.itemsize
    if len(payload) < offset + nbytes:
        raise ValueError("truncated-data: data section shorter than dim implies")
    data = np.frombuffer(payload, dtype=dt, count=nx * ny * nz, offset=offset)
    data = data.reshape(nz, ny, nx).astype(np.float32)  # x fastest on disk
    slope, inter = hdr["scl_slope"], hdr["scl_inter"]
    if slope != 0.0:
        data = data * np.float32(slope) + np.float32(inter)
    pd = hdr["pixdim"]
    spacing = tuple(p if p > 0 else 1.0 for p in (pd[3], pd[2], pd[1]))  # (d, h, w)
    return Volume(data, spacing)


def write_nifti(v: Volume, path) -> None:
    """Write a single-file float32 NIfTI-1 (.nii), little endian, slope 0."""
    d, h, w = v.dims
    if max(d, h, w) > 32767:
        raise ValueError(f"dims-overflow: {v.dims} exceed the int16 header fields")
    dim = (3, w, h, d, 1, 1, 1, 1)
    pixdim = (1.0, v.spacing[2], v.spacing[1], v.spacing[0], 0.0, 0.0, 0.0, 0.0)
    hdr = struct.pack(
        "<" + _HDR_FMT,
        _HDR_SIZE,  # sizeof_hdr
        b"", b"", 0, 0, b"r", b"\x00",
        *dim,
        0.0, 0.0, 0.0,  # intent params
        0,  # intent_code
        16,  # datatype: float32
        32,  # bitpix
        0,  # slice_start
        *pixdim,
        352.0,  # vox_offset
        0.0, 0.0,  # scl_slope, scl_inter
        0, b"\x00", b"\x00",
        0.0, 0.0, 0.0, 0.0,  # cal_max, cal_min, slice_duration, toffset
        0, 0,
        b"wfm volume", b"",
        0, 0,  # qform_code, sform_code
        0.0, 0.0, 0.0, 0.0, 0.0, 0.0,
        *([0.0] * 12),
        b"",
        b"n+1\x00",
    )
    data = v.data.astype("<f4", copy=False)
    with open(path, "wb") as fh:
        fh.write(hdr)
        fh.write(b"\x00\x00\x00\x00")  # no extensions; pads to vox_offset 352
        fh.write(data.tobytes())


def write_raw(v: Volume, path) -> None:
    """Write the private WFMV format: magic, version, dims, spacing, f32 data."""
    with open(path, "wb") as fh:
        fh.write(_RAW_MAGIC)
        fh.write(struct.pack("<I", _RAW_VERSION))
        fh.write(struct.pack("<3I", *v.dims))
        fh.write(struct.pack("<3f", *v.spacing))
        fh.write(v.data.astype("<f4", copy=False).tobytes())


def read_raw(path) -> Volume:
    """Read the private WFMV format written by :func:`write_raw`."""
    with open(path, "rb") as fh:
        raw = fh.read()
    head = struct.calcsize("<4sI3I3f")
    if len(raw) < head:
        raise ValueError("truncated-data: WFMV header incomplete")
    magic, version, d, h, w, sd, sh, sw = struct.unpack_from("<4sI3I3f", raw)
    if magic != _RAW_MAGIC:
        raise ValueError(f"bad-magic: {magic!r}")
    if version != _RAW_VERSION:
        raise ValueError(f"unsupported-version: {version}")
    n = d * h * w
    if len(raw) < head + 4 * n:
        raise ValueError("truncated-data: WFMV payload shorter than dims imply")
    data = np.frombuffer(raw, dtype="<f4", count=n, offset=head).reshape(d, h, w)
    return Volume(data, (sd, sh, sw))
