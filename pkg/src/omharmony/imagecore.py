"""Image container, color-space conversions and codec I/O.

Images are planar 32-bit float, shape (3, H, W), tagged with a color space.
Conversions run in float64 internally and are defined along the graph

    SRGB_01 <-> LINEAR_RGB <-> LAB      and      SRGB_01 <-> HLS

LAB is CIE L*a*b* under D65 in unnormalized colorimetric units
(L in [0, 100], a/b roughly [-128, 127]); HLS uses H in degrees [0, 360)
and L, S in [0, 1].
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    DecodeFailure,
    DimensionMismatch,
    InvalidColorSpace,
    UnsupportedBitDepth,
)


class ColorSpace(enum.Enum):
    SRGB_01 = "srgb"
    LINEAR_RGB = "linear"
    LAB = "lab"
    HLS = "hls"


# sRGB (IEC 61966-2-1) <-> CIE XYZ, D65 2-degree observer.
SRGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
XYZ_TO_SRGB = np.linalg.inv(SRGB_TO_XYZ)

# White point taken as the matrix row sums so that sRGB white maps to
# exactly L=100, a=b=0.
D65_WHITE = SRGB_TO_XYZ.sum(axis=1)

_LAB_DELTA = 6.0 / 29.0


@dataclass(frozen=True)
class ImageBuf:
    """Planar float image. `planes` has shape (3, H, W), dtype float32.

    Treat instances as immutable: operations return new buffers and never
    write through `planes`.
    """

    planes: np.ndarray
    space: ColorSpace

    def __post_init__(self):
        if self.planes.ndim != 3 or self.planes.shape[0] != 3:
            raise DimensionMismatch(
                f"planes must have shape (3, H, W), got {self.planes.shape}"
            )
        if self.planes.shape[1] < 1 or self.planes.shape[2] < 1:
            raise DimensionMismatch("image must have positive dimensions")
        if self.planes.dtype != np.float32:
            object.__setattr__(self, "planes", self.planes.astype(np.float32))

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @classmethod
    def from_hwc(cls, arr: np.ndarray, space: ColorSpace) -> "ImageBuf":
        """Build from an (H, W, 3) array."""
        return cls(np.ascontiguousarray(np.moveaxis(arr, -1, 0)), space)

    def to_hwc(self) -> np.ndarray:
        """Return an (H, W, 3) float32 view-copy."""
        return np.ascontiguousarray(np.moveaxis(self.planes, 0, -1))

    def same_dims(self, other: "ImageBuf") -> bool:
        return self.planes.shape == other.planes.shape


def require_space(img: ImageBuf, space: ColorSpace) -> None:
    if img.space is not space:
        raise InvalidColorSpace(
            f"expected {space.value} image, got {img.space.value}"
        )


def _srgb_eotf_inverse(v: np.ndarray) -> np.ndarray:
    # encoded -> linear, standard piecewise sRGB curve
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def _srgb_eotf(v: np.ndarray) -> np.ndarray:
    # linear -> encoded; negative inputs pass through the linear branch
    return np.where(
        v <= 0.0031308,
        v * 12.92,
        1.055 * np.power(np.maximum(v, 1e-12), 1.0 / 2.4) - 0.055,
    )


def _lab_f(t: np.ndarray) -> np.ndarray:
    d3 = _LAB_DELTA ** 3
    return np.where(t > d3, np.cbrt(t), t / (3 * _LAB_DELTA ** 2) + 4.0 / 29.0)


def _lab_f_inverse(t: np.ndarray) -> np.ndarray:
    return np.where(
        t > _LAB_DELTA, t ** 3, 3 * _LAB_DELTA ** 2 * (t - 4.0 / 29.0)
    )


def srgb_to_linear(img: ImageBuf) -> ImageBuf:
    require_space(img, ColorSpace.SRGB_01)
    lin = _srgb_eotf_inverse(img.planes.astype(np.float64))
    return ImageBuf(lin.astype(np.float32), ColorSpace.LINEAR_RGB)


def linear_to_srgb(img: ImageBuf) -> ImageBuf:
    require_space(img, ColorSpace.LINEAR_RGB)
    enc = _srgb_eotf(img.planes.astype(np.float64))
    return ImageBuf(enc.astype(np.float32), ColorSpace.SRGB_01)


def srgb_to_lab(img: ImageBuf) -> ImageBuf:
    """sRGB -> CIE L*a*b* (D65). L in [0, 100] for in-gamut input."""
    require_space(img, ColorSpace.SRGB_01)
    lin = _srgb_eotf_inverse(img.planes.astype(np.float64))
    xyz = np.einsum("ij,jhw->ihw", SRGB_TO_XYZ, lin)
    f = _lab_f(xyz / D65_WHITE[:, None, None])
    lab = np.empty_like(f)
    lab[0] = 116.0 * f[1] - 16.0
    lab[1] = 500.0 * (f[0] - f[1])
    lab[2] = 200.0 * (f[1] - f[2])
    return ImageBuf(lab.astype(np.float32), ColorSpace.LAB)


def lab_to_srgb(img: ImageBuf) -> ImageBuf:
    """L*a*b* -> sRGB; out-of-gamut values are clamped to [0, 1]."""
    require_space(img, ColorSpace.LAB)
    lin = _lab_to_linear_raw(img.planes.astype(np.float64))
    enc = _srgb_eotf(lin)
    return ImageBuf(np.clip(enc, 0.0, 1.0).astype(np.float32), ColorSpace.SRGB_01)


def _lab_to_linear_raw(lab: np.ndarray) -> np.ndarray:
    # lab shape (3, H, W) float64 -> unclamped linear RGB
    fy = (lab[0] + 16.0) / 116.0
    fx = fy + lab[1] / 500.0
    fz = fy - lab[2] / 200.0
    f = np.stack([fx, fy, fz])
    xyz = _lab_f_inverse(f) * D65_WHITE[:, None, None]
    return np.einsum("ij,jhw->ihw", XYZ_TO_SRGB, xyz)


def lab_in_srgb_gamut(img: ImageBuf, tol: float = 1e-9) -> np.ndarray:
    """Boolean (H, W) map of LAB pixels whose sRGB image lies in [0, 1]."""
    require_space(img, ColorSpace.LAB)
    lin = _lab_to_linear_raw(img.planes.astype(np.float64))
    return ((lin >= -tol) & (lin <= 1.0 + tol)).all(axis=0)


def srgb_to_hls(img: ImageBuf) -> ImageBuf:
    """sRGB -> HLS with H in degrees [0, 360); achromatic pixels get H=0."""
    require_space(img, ColorSpace.SRGB_01)
    rgb = img.planes.astype(np.float64)
    r, g, b = rgb[0], rgb[1], rgb[2]
    maxc = np.max(rgb, axis=0)
    minc = np.min(rgb, axis=0)
    l = (maxc + minc) / 2.0
    delta = maxc - minc
    chromatic = delta > 0

    denom = np.where(l <= 0.5, maxc + minc, 2.0 - maxc - minc)
    s = np.where(chromatic, delta / np.where(denom == 0, 1.0, denom), 0.0)

    safe = np.where(chromatic, delta, 1.0)
    rc = (maxc - r) / safe
    gc = (maxc - g) / safe
    bc = (maxc - b) / safe
    h = np.where(maxc == r, bc - gc, np.where(maxc == g, 2.0 + rc - bc, 4.0 + gc - rc))
    h = np.where(chromatic, (h / 6.0) % 1.0, 0.0) * 360.0
    return ImageBuf(np.stack([h, l, s]).astype(np.float32), ColorSpace.HLS)


def hls_to_srgb(img: ImageBuf) -> ImageBuf:
    """HLS -> sRGB. H wraps mod 360; result is clamped to [0, 1]."""
    require_space(img, ColorSpace.HLS)
    hls = img.planes.astype(np.float64)
    h = (hls[0] % 360.0) / 360.0
    l, s = hls[1], hls[2]

    m2 = np.where(l <= 0.5, l * (1.0 + s), l + s - l * s)
    m1 = 2.0 * l - m2

    def hue_component(hue):
        hue = hue % 1.0
        out = np.where(hue < 1.0 / 6.0, m1 + (m2 - m1) * hue * 6.0, m2)
        out = np.where(hue >= 0.5, m1 + (m2 - m1) * (2.0 / 3.0 - hue) * 6.0, out)
        out = np.where(hue >= 2.0 / 3.0, m1, out)
        return out

    rgb = np.stack([hue_component(h + 1.0 / 3.0), hue_component(h), hue_component(h - 1.0 / 3.0)])
    rgb = np.where(s == 0, l[None], rgb)
    return ImageBuf(np.clip(rgb, 0.0, 1.0).astype(np.float32), ColorSpace.SRGB_01)


def clamp_to_gamut(img: ImageBuf) -> ImageBuf:
    """Clamp samples to the valid range of the buffer's space. Idempotent."""
    p = img.planes
    if img.space in (ColorSpace.SRGB_01, ColorSpace.LINEAR_RGB):
        return ImageBuf(np.clip(p, 0.0, 1.0), img.space)
    if img.space is ColorSpace.LAB:
        out = np.stack([
            np.clip(p[0], 0.0, 100.0),
            np.clip(p[1], -128.0, 127.0),
            np.clip(p[2], -128.0, 127.0),
        ])
        return ImageBuf(out, img.space)
    out = np.stack([p[0] % 360.0, np.clip(p[1], 0.0, 1.0), np.clip(p[2], 0.0, 1.0)])
    return ImageBuf(out, img.space)


def resize_planes(planes: np.ndarray, width: int, height: int) -> np.ndarray:
    """Bilinear resize of a (C, H, W) array with edge-clamped, half-pixel
    center sampling; returns float64."""
    if width < 1 or height < 1:
        raise DimensionMismatch("target dimensions must be >= 1")
    src_h, src_w = planes.shape[1], planes.shape[2]
    xs = np.clip((np.arange(width) + 0.5) * (src_w / width) - 0.5, 0, src_w - 1)
    ys = np.clip((np.arange(height) + 0.5) * (src_h / height) - 0.5, 0, src_h - 1)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, src_w - 1)
    y1 = np.minimum(y0 + 1, src_h - 1)
    fx = (xs - x0)[None, None, :]
    fy = (ys - y0)[None, :, None]

    p = planes.astype(np.float64)
    tl = p[:, y0[:, None], x0[None, :]]
    tr = p[:, y0[:, None], x1[None, :]]
    bl = p[:, y1[:, None], x0[None, :]]
    br = p[:, y1[:, None], x1[None, :]]
    top = tl * (1 - fx) + tr * fx
    bot = bl * (1 - fx) + br * fx
    return top * (1 - fy) + bot * fy


def resize_bilinear(img: ImageBuf, width: int, height: int) -> ImageBuf:
    """Bilinear resize; identity dimensions return a bit-identical copy."""
    if width < 1 or height < 1:
        raise DimensionMismatch("target dimensions must be >= 1")
    if width == img.width and height == img.height:
        return ImageBuf(img.planes.copy(), img.space)
    out = resize_planes(img.planes, width, height)
    return ImageBuf(out.astype(np.float32), img.space)


def quantize_to_8bit(img: ImageBuf) -> ImageBuf:
    """Snap sRGB samples to the 8-bit grid (round to nearest level)."""
    require_space(img, ColorSpace.SRGB_01)
    q = np.round(np.clip(img.planes, 0.0, 1.0) * 255.0) / np.float32(255.0)
    return ImageBuf(q.astype(np.float32), ColorSpace.SRGB_01)


def to_uint8(img: ImageBuf) -> np.ndarray:
    """(H, W, 3) uint8 array for encoding."""
    require_space(img, ColorSpace.SRGB_01)
    q = np.round(np.clip(img.to_hwc(), 0.0, 1.0) * 255.0)
    return q.astype(np.uint8)


def from_uint8(arr: np.ndarray) -> ImageBuf:
    return ImageBuf.from_hwc(arr.astype(np.float32) / 255.0, ColorSpace.SRGB_01)


_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _png_bit_depth(header: bytes) -> int:
    # IHDR is the first chunk; bit depth is byte 24 of the file
    if len(header) < 26 or header[12:16] != b"IHDR":
        raise DecodeFailure("malformed PNG header")
    return header[24]


def load_image(path) -> ImageBuf:
    """Decode an 8-bit PNG or JPEG into an SRGB_01 buffer (alpha dropped)."""
    path = Path(path)
    with open(path, "rb") as fh:
        head = fh.read(26)
    if head.startswith(_PNG_MAGIC):
        depth = _png_bit_depth(head)
        if depth != 8:
            raise UnsupportedBitDepth(f"{path.name}: {depth}-bit PNG not supported")
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode not in ("RGB", "RGBA", "L", "LA", "P"):
                raise UnsupportedBitDepth(f"{path.name}: mode {im.mode} not supported")
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise DecodeFailure(f"{path.name}: not a decodable image") from exc
    return from_uint8(arr)


def save_image(img: ImageBuf, path, format: str | None = None, quality: int = 95) -> None:
    """Encode to PNG (lossless) or baseline JPEG, quantizing to 8 bits."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt in ("jpg", "jpeg"):
        pil_fmt, kwargs = "JPEG", {"quality": quality}
    elif fmt == "png":
        pil_fmt, kwargs = "PNG", {}
    else:
        raise DecodeFailure(f"unsupported output format: {fmt}")
    Image.fromarray(to_uint8(img)).save(path, pil_fmt, **kwargs)


def encode_png_bytes(img: ImageBuf) -> bytes:
    """Deterministic PNG encoding of an sRGB buffer."""
    buf = io.BytesIO()
    Image.fromarray(to_uint8(img)).save(buf, "PNG")
    return buf.getvalue()


def jpeg_cycle(img: ImageBuf, quality: int) -> ImageBuf:
    """Encode to baseline JPEG at `quality` and decode again (in memory)."""
    buf = io.BytesIO()
    Image.fromarray(to_uint8(img)).save(buf, "JPEG", quality=quality)
    buf.seek(0)
    with Image.open(buf) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
    return from_uint8(arr)
