"""Operator-mask prediction by per-region numerical fitting.

Three fitting routes per region, each producing a per-channel (gain, offset)
pair in the working color space:

  supervised  closed-form least squares against the ground-truth image
  blind       first/second moment matching against reference statistics
              (by default the statistics of the background pixels)
  descent     smooth-L1 (Charbonnier) minimization with backtracking line
              search; cross-checks the closed form and tolerates outliers

Fits are independent per region and channel and fully deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyMask, OverlappingRegions
from .imagecore import ColorSpace, ImageBuf, srgb_to_hls, srgb_to_lab
from .retouch import OperatorMaskSet, apply as retouch_apply, identity_masks

# Region variance below this (channel units squared) makes the gain
# unidentifiable; the fit then pins gain to 1 and matches means only.
DEGENERATE_VARIANCE = 1e-8


@dataclass(frozen=True)
class AffineFit:
    """Per-channel gain/offset with the mean squared residual of the fit."""

    gain: np.ndarray      # (3,)
    offset: np.ndarray    # (3,)
    residual: np.ndarray  # (3,)
    converged: bool = True
    iterations: int = 0

    def __post_init__(self):
        for name in ("gain", "offset", "residual"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != (3,) or not np.isfinite(arr).all():
                raise ValueError(f"{name} must be 3 finite values")
            object.__setattr__(self, name, arr)
        if (self.residual < 0).any():
            raise ValueError("residuals cannot be negative")


@dataclass(frozen=True)
class RegionStats:
    mean: np.ndarray  # (3,)
    std: np.ndarray   # (3,)

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=np.float64)
        s = np.asarray(self.std, dtype=np.float64)
        if m.shape != (3,) or s.shape != (3,) or (s < 0).any():
            raise ValueError("stats need 3 means and 3 non-negative stds")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "std", s)


@dataclass(frozen=True)
class DescentOptions:
    max_iters: int = 500
    eps: float = 1e-3          # Charbonnier constant, in normalized units
    armijo_c: float = 1e-4
    shrink: float = 0.5
    grad_tol: float = 1e-8
    f_tol: float = 1e-13       # stop once accepted improvements stall
    init: tuple | None = None  # (gain, offset) start; default (1, 0)


# The descent objective runs on channels scaled to roughly [0, 1] so that
# its eps is meaningful across spaces; gains are scale-free and offsets are
# mapped back afterwards.
_CHANNEL_SCALE = {
    ColorSpace.LAB: np.array([1 / 100.0, 1 / 128.0, 1 / 128.0]),
    ColorSpace.HLS: np.array([1 / 360.0, 1.0, 1.0]),
}


def to_working_channels(img: ImageBuf, space: ColorSpace) -> np.ndarray:
    """(3, H, W) float64 channel values of an sRGB image in `space`."""
    if space is ColorSpace.LAB:
        return srgb_to_lab(img).planes.astype(np.float64)
    if space is ColorSpace.HLS:
        return srgb_to_hls(img).planes.astype(np.float64)
    raise ValueError("working space must be LAB or HLS")


def region_stats(channels: np.ndarray, mask: np.ndarray) -> RegionStats:
    """Mean/std per channel over a boolean mask (population std)."""
    sel = mask.astype(bool)
    if not sel.any():
        raise EmptyMask("statistics need at least one pixel")
    vals = channels[:, sel]
    return RegionStats(vals.mean(axis=1), vals.std(axis=1))


def fit_channel_affine(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Closed-form least squares y ~ m*x + a over one channel's samples.

    Returns (m, a, mean squared residual); constant regions fall back to
    m=1 with a pure offset.
    """
    mx = x.mean()
    my = y.mean()
    var = np.mean((x - mx) ** 2)
    if var < DEGENERATE_VARIANCE:
        m, a = 1.0, float(my - mx)
    else:
        m = float(np.mean((x - mx) * (y - my)) / var)
        a = float(my - m * mx)
    r = float(np.mean((m * x + a - y) ** 2))
    return m, a, r


def fit_affine_supervised(
    composite: ImageBuf,
    target: ImageBuf,
    mask: np.ndarray,
    space: ColorSpace = ColorSpace.LAB,
) -> AffineFit:
    """Closed-form per-channel least squares mapping composite -> target."""
    sel = mask.astype(bool)
    if not sel.any():
        raise EmptyMask("supervised fit needs a non-empty region")
    xs = to_working_channels(composite, space)[:, sel]
    ys = to_working_channels(target, space)[:, sel]
    gains, offsets, residuals = zip(*(fit_channel_affine(xs[c], ys[c]) for c in range(3)))
    return AffineFit(np.array(gains), np.array(offsets), np.array(residuals))


def fit_affine_blind(
    composite: ImageBuf,
    mask: np.ndarray,
    ref: RegionStats,
    space: ColorSpace = ColorSpace.LAB,
) -> AffineFit:
    """Match the region's first two moments to reference statistics."""
    sel = mask.astype(bool)
    if not sel.any():
        raise EmptyMask("blind fit needs a non-empty region")
    xs = to_working_channels(composite, space)[:, sel]
    stats = RegionStats(xs.mean(axis=1), xs.std(axis=1))
    degenerate = stats.std ** 2 < DEGENERATE_VARIANCE
    gain = np.where(degenerate, 1.0, ref.std / np.where(degenerate, 1.0, stats.std))
    offset = ref.mean - gain * stats.mean
    # residual here measures how far the achieved moments land from the
    # reference (zero up to rounding for non-degenerate regions)
    fitted = gain[:, None] * xs + offset[:, None]
    moment_err = (
        (fitted.mean(axis=1) - ref.mean) ** 2 + (fitted.std(axis=1) - ref.std) ** 2
    )
    return AffineFit(gain, offset, moment_err)


def charbonnier_objective(m: float, a: float, x: np.ndarray, y: np.ndarray, eps: float) -> float:
    return float(np.mean(np.hypot(m * x + a - y, eps)))


def charbonnier_gradient(m: float, a: float, x: np.ndarray, y: np.ndarray, eps: float) -> np.ndarray:
    """Analytic gradient of the Charbonnier objective w.r.t. (m, a)."""
    r = m * x + a - y
    w = r / np.sqrt(r * r + eps * eps)
    return np.array([np.mean(w * x), np.mean(w)])


def _descend_channel(x, y, opts: DescentOptions, trace_sink: list | None = None):
    # Precondition: optimize in centered/scaled coordinates so the two
    # parameters have comparable curvature, then map back.
    mx = x.mean()
    sx = x.std()
    if sx * sx < DEGENERATE_VARIANCE:
        sx = 1.0
    u = (x - mx) / sx

    if opts.init is None:
        m, a = 1.0, 0.0
    else:
        m, a = float(opts.init[0]), float(opts.init[1])
    # transform (m, a) in x-coords to (p, q) in u-coords
    p = m * sx
    q = a + m * mx

    f = charbonnier_objective(p, q, u, y, opts.eps)
    if trace_sink is not None:
        trace_sink.append(f)
    iters = 0
    converged = False
    for _ in range(opts.max_iters):
        g = charbonnier_gradient(p, q, u, y, opts.eps)
        gn = float(g @ g)
        if np.sqrt(gn) <= opts.grad_tol:
            converged = True
            break
        t = 1.0
        accepted = False
        f_prev = f
        while t > 1e-16:
            pp, qq = p - t * g[0], q - t * g[1]
            fn = charbonnier_objective(pp, qq, u, y, opts.eps)
            if fn <= f - opts.armijo_c * t * gn:
                p, q, f = pp, qq, fn
                accepted = True
                break
            t *= opts.shrink
        iters += 1
        if trace_sink is not None and accepted:
            trace_sink.append(f)
        if not accepted or f_prev - f <= opts.f_tol * max(1.0, abs(f_prev)):
            # step collapsed or improvement stalled: at numerical resolution
            converged = True
            break

    m = p / sx
    a = q - p * mx / sx
    res = float(np.mean((m * x + a - y) ** 2))
    return m, a, res, converged, iters


def fit_descent(
    composite: ImageBuf,
    target: ImageBuf,
    mask: np.ndarray,
    opts: DescentOptions = DescentOptions(),
    space: ColorSpace = ColorSpace.LAB,
    trace_sink: list | None = None,
) -> AffineFit:
    """Per-channel Charbonnier descent; monotone under the line search.

    `trace_sink`, when given, collects the objective value after every
    accepted step (all three channels appended in order).
    """
    sel = mask.astype(bool)
    if not sel.any():
        raise EmptyMask("descent fit needs a non-empty region")
    scale = _CHANNEL_SCALE[space]
    xs = to_working_channels(composite, space)[:, sel] * scale[:, None]
    ys = to_working_channels(target, space)[:, sel] * scale[:, None]
    out = []
    for c in range(3):
        channel_trace: list | None = [] if trace_sink is not None else None
        sub_opts = opts
        if opts.init is not None:
            # init is in channel units; offsets shrink with the channel scale
            sub_opts = DescentOptions(
                max_iters=opts.max_iters, eps=opts.eps, armijo_c=opts.armijo_c,
                shrink=opts.shrink, grad_tol=opts.grad_tol, f_tol=opts.f_tol,
                init=(opts.init[0], opts.init[1] * scale[c]),
            )
        out.append(_descend_channel(xs[c], ys[c], sub_opts, channel_trace))
        if trace_sink is not None:
            trace_sink.append(channel_trace)
    gains = np.array([o[0] for o in out])
    offsets = np.array([o[1] for o in out]) / scale
    # residuals reported in channel units to match the supervised fit
    raw_x = to_working_channels(composite, space)[:, sel]
    raw_y = to_working_channels(target, space)[:, sel]
    residuals = np.array([
        np.mean((gains[c] * raw_x[c] + offsets[c] - raw_y[c]) ** 2) for c in range(3)
    ])
    converged = all(o[3] for o in out)
    iterations = max(o[4] for o in out)
    return AffineFit(gains, offsets, residuals, converged=converged, iterations=iterations)


def masks_from_fits(
    fits: list[tuple[np.ndarray, AffineFit]],
    width: int,
    height: int,
    space: ColorSpace = ColorSpace.LAB,
) -> OperatorMaskSet:
    """Constant gain/offset inside each region, identity elsewhere."""
    coverage = np.zeros((height, width), np.int32)
    for mask, _ in fits:
        coverage += mask.astype(bool)
    if (coverage > 1).any():
        raise OverlappingRegions("region masks overlap")

    oms = identity_masks(width, height, space)
    mul = oms.mul.copy()
    add = oms.add.copy()
    for mask, fit in fits:
        sel = mask.astype(bool)
        for c in range(3):
            mul[c][sel] = np.float32(fit.gain[c])
            add[c][sel] = np.float32(fit.offset[c])
    return OperatorMaskSet(space, mul, add)


@dataclass(frozen=True)
class HarmonizeResult:
    image: ImageBuf
    masks: OperatorMaskSet
    fits: list = field(default_factory=list)


def background_stats(
    composite: ImageBuf,
    region_masks: list[np.ndarray],
    space: ColorSpace = ColorSpace.LAB,
) -> RegionStats:
    """Statistics of everything outside the union of the given regions."""
    union = np.zeros((composite.height, composite.width), bool)
    for m in region_masks:
        union |= m.astype(bool)
    background = ~union
    if not background.any():
        raise EmptyMask("regions cover the whole image; no background left")
    return region_stats(to_working_channels(composite, space), background)


def harmonize(
    composite: ImageBuf,
    region_masks: list[np.ndarray],
    mode: str = "supervised",
    target: ImageBuf | None = None,
    ref_stats: RegionStats | None = None,
    space: ColorSpace = ColorSpace.LAB,
    descent_opts: DescentOptions = DescentOptions(),
) -> HarmonizeResult:
    """Fit every region, assemble operator masks, and retouch the composite.

    `supervised` and `descent` need the ground-truth `target`; `blind`
    matches each region to `ref_stats` (background statistics when None).
    """
    if mode in ("supervised", "descent") and target is None:
        raise ValueError(f"{mode} mode needs the ground-truth image")
    if mode not in ("supervised", "blind", "descent"):
        raise ValueError(f"unknown mode: {mode}")

    if mode == "blind" and ref_stats is None and region_masks:
        ref_stats = background_stats(composite, region_masks, space)

    fits = []
    for mask in region_masks:
        if mode == "supervised":
            fit = fit_affine_supervised(composite, target, mask, space)
        elif mode == "descent":
            fit = fit_descent(composite, target, mask, descent_opts, space)
        else:
            fit = fit_affine_blind(composite, mask, ref_stats, space)
        fits.append((mask, fit))

    oms = masks_from_fits(fits, composite.width, composite.height, space)
    return HarmonizeResult(retouch_apply(composite, oms), oms, fits)
