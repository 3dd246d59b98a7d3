"""Per-pixel filter primitives and named filter chains.

Every primitive is a pure map on SRGB_01 samples; chains compose primitives
in order and clamp to [0, 1] after each step. The shipped bank
(data/filter_bank.json) approximates well-known photo-app looks; the exact
parameters are project configuration, not a ground truth to reproduce.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import UnknownFilterChain
from .imagecore import ColorSpace, ImageBuf, require_space

# Luminance-weighted color matrices (Rec. 709 luma weights for saturation,
# the conventional sepia matrix). Fixed so chains are bit-reproducible.
SEPIA_MATRIX = np.array([
    [0.393, 0.769, 0.189],
    [0.349, 0.686, 0.168],
    [0.272, 0.534, 0.131],
])

_LUMA = np.array([0.2126, 0.7152, 0.0722])

VALID_KINDS = (
    "brightness",
    "contrast",
    "saturate",
    "hue_rotate",
    "sepia",
    "gamma",
    "channel_curve",
    "color_overlay",
)

BLEND_MODES = ("normal", "multiply", "screen", "overlay", "darken", "lighten", "soft_light")


@dataclass(frozen=True)
class FilterPrimitive:
    kind: str
    params: tuple
    mode: str = "normal"  # only used by color_overlay

    def __post_init__(self):
        if self.kind not in VALID_KINDS:
            raise ValueError(f"unknown primitive kind: {self.kind}")
        if self.kind == "hue_rotate" and not -360.0 <= self.params[0] <= 360.0:
            raise ValueError("hue_rotate degrees must lie in [-360, 360]")
        if self.kind == "color_overlay":
            if self.mode not in BLEND_MODES:
                raise ValueError(f"unknown blend mode: {self.mode}")
            if len(self.params) != 4:
                raise ValueError("color_overlay needs (r, g, b, alpha)")
        if self.kind == "gamma" and self.params[0] <= 0:
            raise ValueError("gamma exponent must be positive")


@dataclass(frozen=True)
class FilterChain:
    name: str
    steps: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not self.steps:
            raise ValueError(f"filter chain {self.name!r} is empty")


def _saturate_matrix(s: float) -> np.ndarray:
    lw = _LUMA
    return s * np.eye(3) + (1.0 - s) * np.outer(np.ones(3), lw)


def _hue_rotate_matrix(deg: float) -> np.ndarray:
    # classic luminance-preserving hue rotation matrix
    c = np.cos(np.deg2rad(deg))
    s = np.sin(np.deg2rad(deg))
    return np.array([
        [0.213 + c * 0.787 - s * 0.213, 0.715 - c * 0.715 - s * 0.715, 0.072 - c * 0.072 + s * 0.928],
        [0.213 - c * 0.213 + s * 0.143, 0.715 + c * 0.285 + s * 0.140, 0.072 - c * 0.072 - s * 0.283],
        [0.213 - c * 0.213 - s * 0.787, 0.715 - c * 0.715 + s * 0.715, 0.072 + c * 0.928 + s * 0.072],
    ])


def _blend(base: np.ndarray, top: np.ndarray, mode: str) -> np.ndarray:
    if mode == "normal":
        return top
    if mode == "multiply":
        return base * top
    if mode == "screen":
        return 1.0 - (1.0 - base) * (1.0 - top)
    if mode == "overlay":
        return np.where(base <= 0.5, 2 * base * top, 1 - 2 * (1 - base) * (1 - top))
    if mode == "darken":
        return np.minimum(base, top)
    if mode == "lighten":
        return np.maximum(base, top)
    # soft_light, W3C compositing definition
    d = np.where(base <= 0.25, ((16 * base - 12) * base + 4) * base, np.sqrt(base))
    return np.where(
        top <= 0.5,
        base - (1 - 2 * top) * base * (1 - base),
        base + (2 * top - 1) * (d - base),
    )


def apply_primitive(planes: np.ndarray, prim: FilterPrimitive) -> np.ndarray:
    """Apply one primitive to (3, H, W) sRGB samples, clamping to [0, 1]."""
    p = planes.astype(np.float64)
    k, a = prim.kind, prim.params
    if k == "brightness":
        out = p * a[0]
    elif k == "contrast":
        out = (p - 0.5) * a[0] + 0.5
    elif k == "saturate":
        out = np.einsum("ij,jhw->ihw", _saturate_matrix(a[0]), p)
    elif k == "hue_rotate":
        out = np.einsum("ij,jhw->ihw", _hue_rotate_matrix(a[0]), p)
    elif k == "sepia":
        sep = np.einsum("ij,jhw->ihw", SEPIA_MATRIX, p)
        out = p * (1.0 - a[0]) + sep * a[0]
    elif k == "gamma":
        out = np.power(np.clip(p, 0.0, 1.0), a[0])
    elif k == "channel_curve":
        ch, gain, offset = int(a[0]), a[1], a[2]
        out = p.copy()
        out[ch] = p[ch] * gain + offset
    else:  # color_overlay
        color = np.array(a[:3])[:, None, None]
        alpha = a[3]
        blended = _blend(p, np.broadcast_to(color, p.shape), prim.mode)
        out = p * (1.0 - alpha) + blended * alpha
    return np.clip(out, 0.0, 1.0)


def apply_chain(img: ImageBuf, chain: FilterChain) -> ImageBuf:
    """Run a chain over the full image; masking is the caller's business."""
    require_space(img, ColorSpace.SRGB_01)
    p = img.planes.astype(np.float64)
    for prim in chain.steps:
        p = apply_primitive(p, prim)
    return ImageBuf(p.astype(np.float32), ColorSpace.SRGB_01)


class FilterBank:
    """Named filter chains loaded from a declarative JSON definition."""

    def __init__(self, chains: dict[str, FilterChain], css: dict[str, FilterChain]):
        self.chains = chains
        self.css = css

    def chain(self, name: str) -> FilterChain:
        if name in self.chains:
            return self.chains[name]
        if name in self.css:
            return self.css[name]
        raise UnknownFilterChain(name)

    @property
    def chain_names(self) -> list[str]:
        return sorted(self.chains)

    @property
    def css_names(self) -> list[str]:
        return sorted(self.css)


def _parse_steps(name: str, raw_steps) -> FilterChain:
    steps = []
    for raw in raw_steps:
        steps.append(FilterPrimitive(
            kind=raw["kind"],
            params=tuple(float(x) for x in raw.get("params", [])),
            mode=raw.get("mode", "normal"),
        ))
    return FilterChain(name=name, steps=tuple(steps))


def load_filter_bank(path=None) -> FilterBank:
    """Load a bank from JSON; defaults to the bundled definition file."""
    if path is None:
        text = resources.files("omharmony.data").joinpath("filter_bank.json").read_text()
    else:
        text = Path(path).read_text()
    doc = json.loads(text)
    chains = {n: _parse_steps(n, s) for n, s in doc["filters"].items()}
    css = {n: _parse_steps(n, s) for n, s in doc.get("css", {}).items()}
    return FilterBank(chains, css)


def identity_bank() -> FilterBank:
    """A bank whose every chain is a no-op; useful for pipeline tests."""
    ident = FilterChain("identity", (FilterPrimitive("brightness", (1.0,)),))
    return FilterBank({"identity": ident}, {"identity_css": ident})
