"""Operator masks: per-channel multiply/add planes applied in LAB or HLS.

A mask set holds six full-resolution planes, a gain and an offset for each
of the three channels of its working space. Application converts the sRGB
input into that space, computes ``out = in * mul + add`` per channel
(multiply first, then add), converts back and clamps the sRGB result once.

The on-disk format (``.omsk``) is a fixed little-endian header followed by
six raw float32 rasters:

    offset  size  field
    0       5     magic b"OMSK1"
    5       1     space tag (0 = LAB, 1 = HLS)
    6       2     reserved, zero
    8       4     width  (uint32 LE)
    12      4     height (uint32 LE)
    16      48    six plane offsets (uint64 LE each), order
                  mul_ch1, mul_ch2, mul_ch3, add_ch1, add_ch2, add_ch3
                  with channels (L, a, b) or (H, L, S)

Planes are row-major float32 little-endian, width*height*4 bytes each.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, SchemaMismatch, UnknownChannel
from .imagecore import (
    ColorSpace,
    ImageBuf,
    clamp_to_gamut,
    hls_to_srgb,
    lab_to_srgb,
    require_space,
    srgb_to_hls,
    srgb_to_lab,
)

CHANNEL_NAMES = {
    ColorSpace.LAB: ("L", "a", "b"),
    ColorSpace.HLS: ("H", "L", "S"),
}

_MAGIC = b"OMSK1"
_SPACE_TAGS = {ColorSpace.LAB: 0, ColorSpace.HLS: 1}
_TAG_SPACES = {v: k for k, v in _SPACE_TAGS.items()}


@dataclass(frozen=True)
class OperatorMaskSet:
    """Six operator planes; `mul` and `add` have shape (3, H, W) float32."""

    space: ColorSpace
    mul: np.ndarray
    add: np.ndarray

    def __post_init__(self):
        if self.space not in (ColorSpace.LAB, ColorSpace.HLS):
            raise ValueError("operator masks live in LAB or HLS")
        if self.mul.shape != self.add.shape or self.mul.ndim != 3 or self.mul.shape[0] != 3:
            raise DimensionMismatch("mul/add must both be (3, H, W)")
        if not (np.isfinite(self.mul).all() and np.isfinite(self.add).all()):
            raise ValueError("operator planes must be finite")
        for name in ("mul", "add"):
            arr = getattr(self, name)
            if arr.dtype != np.float32:
                object.__setattr__(self, name, arr.astype(np.float32))

    @property
    def width(self) -> int:
        return self.mul.shape[2]

    @property
    def height(self) -> int:
        return self.mul.shape[1]

    def channel_index(self, channel: str) -> int:
        names = CHANNEL_NAMES[self.space]
        if channel not in names:
            raise UnknownChannel(f"channel {channel!r} not in {names}")
        return names.index(channel)


def identity_masks(width: int, height: int, space: ColorSpace = ColorSpace.LAB) -> OperatorMaskSet:
    if width < 1 or height < 1:
        raise DimensionMismatch("mask dims must be >= 1")
    shape = (3, height, width)
    return OperatorMaskSet(space, np.ones(shape, np.float32), np.zeros(shape, np.float32))


def apply(img: ImageBuf, oms: OperatorMaskSet) -> ImageBuf:
    """Retouch an SRGB_01 composite with a mask set (multiply, then add)."""
    require_space(img, ColorSpace.SRGB_01)
    if (img.height, img.width) != (oms.height, oms.width):
        raise DimensionMismatch("image and operator masks differ in size")
    if oms.space is ColorSpace.LAB:
        work = srgb_to_lab(img)
    else:
        work = srgb_to_hls(img)
    out = work.planes.astype(np.float64) * oms.mul + oms.add
    out_buf = ImageBuf(out.astype(np.float32), oms.space)
    if oms.space is ColorSpace.LAB:
        return lab_to_srgb(out_buf)
    return hls_to_srgb(out_buf)


def apply_channels(values: np.ndarray, oms: OperatorMaskSet) -> np.ndarray:
    """Raw channel-space application (no color conversion), for oracles."""
    return values * oms.mul + oms.add


def binarize_add(oms: OperatorMaskSet, threshold: float = 1e-4) -> np.ndarray:
    """Pixels where any add channel moved by more than `threshold`."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    return (np.abs(oms.add) > threshold).any(axis=0)


def mask_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection over union of two boolean masks; 1.0 when both empty."""
    if a.shape != b.shape:
        raise DimensionMismatch("masks differ in size")
    a = a.astype(bool)
    b = b.astype(bool)
    union = np.logical_or(a, b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(a, b).sum() / union)


def edit(
    oms: OperatorMaskSet,
    channel: str,
    which: str,
    value: float,
    region: np.ndarray | None = None,
) -> OperatorMaskSet:
    """Return a new set with `value` added to an add plane or multiplied
    into a mul plane, restricted to `region` (None means everywhere)."""
    if which not in ("mul", "add"):
        raise ValueError("which must be 'mul' or 'add'")
    if not np.isfinite(value):
        raise ValueError("edit value must be finite")
    idx = oms.channel_index(channel)
    if region is None:
        sel = np.ones((oms.height, oms.width), bool)
    else:
        if region.shape != (oms.height, oms.width):
            raise DimensionMismatch("region mask differs in size")
        sel = region.astype(bool)
    mul = oms.mul.copy()
    add = oms.add.copy()
    if which == "mul":
        plane = mul[idx]
        plane[sel] = plane[sel] * np.float32(value)
    else:
        plane = add[idx]
        plane[sel] = plane[sel] + np.float32(value)
    return OperatorMaskSet(oms.space, mul, add)


def save_omsk(oms: OperatorMaskSet, path) -> None:
    path = Path(path)
    w, h = oms.width, oms.height
    plane_bytes = w * h * 4
    header_size = 16 + 6 * 8
    offsets = [header_size + i * plane_bytes for i in range(6)]
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<B2x", _SPACE_TAGS[oms.space]))
        fh.write(struct.pack("<II", w, h))
        fh.write(struct.pack("<6Q", *offsets))
        for plane in (*oms.mul, *oms.add):
            fh.write(np.ascontiguousarray(plane, dtype="<f4").tobytes())


def load_omsk(path) -> OperatorMaskSet:
    path = Path(path)
    data = path.read_bytes()
    if data[:5] != _MAGIC:
        raise SchemaMismatch(f"{path.name}: bad magic, not an OMSK file")
    (tag,) = struct.unpack_from("<B", data, 5)
    if tag not in _TAG_SPACES:
        raise SchemaMismatch(f"{path.name}: unknown space tag {tag}")
    w, h = struct.unpack_from("<II", data, 8)
    offsets = struct.unpack_from("<6Q", data, 16)
    plane_bytes = w * h * 4
    planes = []
    for off in offsets:
        if off + plane_bytes > len(data):
            raise SchemaMismatch(f"{path.name}: truncated plane data")
        planes.append(
            np.frombuffer(data, dtype="<f4", count=w * h, offset=off).reshape(h, w)
        )
    mul = np.stack(planes[:3])
    add = np.stack(planes[3:])
    return OperatorMaskSet(_TAG_SPACES[tag], mul.copy(), add.copy())
