"""Quality metrics and training losses as pure numerical functions.

MSE/PSNR are computed on the 0-255 scale; SSIM follows the original
windowed formulation (11x11 Gaussian, sigma 1.5, K1=0.01, K2=0.03, L=255)
on Rec.601 luma. The perceptual distance is a pluggable backend registry;
the bundled backend is a deliberately trivial stand-in (mean absolute
difference of 4x-downsampled luma) and is NOT a learned perceptual metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .errors import DimensionMismatch, MissingBackend
from .imagecore import ColorSpace, ImageBuf, require_space, resize_bilinear

_LUMA_601 = np.array([0.299, 0.587, 0.114])


def _as_255(img) -> np.ndarray:
    """Accept an SRGB_01 ImageBuf or a plain array already on 0-255."""
    if isinstance(img, ImageBuf):
        require_space(img, ColorSpace.SRGB_01)
        return img.planes.astype(np.float64) * 255.0
    return np.asarray(img, dtype=np.float64)


def _check_dims(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"shape mismatch: {a.shape} vs {b.shape}")


def mse(a, b) -> float:
    x, y = _as_255(a), _as_255(b)
    _check_dims(x, y)
    return float(np.mean((x - y) ** 2))


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB; infinite for identical inputs."""
    err = mse(a, b)
    if err == 0.0:
        return math.inf
    return float(10.0 * math.log10(255.0 ** 2 / err))


def luma_601(img) -> np.ndarray:
    """Rec.601 luma on the 0-255 scale, shape (H, W)."""
    x = _as_255(img)
    if isinstance(img, ImageBuf):
        return np.einsum("c,chw->hw", _LUMA_601, x)
    if x.ndim == 3 and x.shape[-1] == 3:
        return x @ _LUMA_601
    return x


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    w = np.outer(g, g)
    return w / w.sum()

_SSIM_WINDOW = _gaussian_window()


def ssim(a, b) -> float:
    """Mean local SSIM over valid 11x11 windows, on luma, range 255."""
    x = luma_601(a)
    y = luma_601(b)
    _check_dims(x, y)
    if min(x.shape) < 11:
        raise DimensionMismatch("SSIM needs images of at least 11x11")
    w = _SSIM_WINDOW
    c1 = (0.01 * 255.0) ** 2
    c2 = (0.03 * 255.0) ** 2

    mu_x = convolve2d(x, w, mode="valid")
    mu_y = convolve2d(y, w, mode="valid")
    xx = convolve2d(x * x, w, mode="valid")
    yy = convolve2d(y * y, w, mode="valid")
    xy = convolve2d(x * y, w, mode="valid")

    var_x = xx - mu_x * mu_x
    var_y = yy - mu_y * mu_y
    cov = xy - mu_x * mu_y

    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


def charbonnier(a, b, eps: float) -> float:
    """Mean of sqrt(d^2 + eps^2) over all elements; a smooth L1."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(a.planes if isinstance(a, ImageBuf) else a, dtype=np.float64)
    y = np.asarray(b.planes if isinstance(b, ImageBuf) else b, dtype=np.float64)
    _check_dims(x, y)
    return float(np.mean(np.hypot(x - y, eps)))


@dataclass(frozen=True)
class CriticScores:
    real_scores: np.ndarray
    fake_scores: np.ndarray

    def __post_init__(self):
        r = np.atleast_1d(np.asarray(self.real_scores, dtype=np.float64))
        f = np.atleast_1d(np.asarray(self.fake_scores, dtype=np.float64))
        if r.size != f.size or r.size < 1:
            raise ValueError("real/fake score batches must have equal size >= 1")
        if not (np.isfinite(r).all() and np.isfinite(f).all()):
            raise ValueError("critic scores must be finite")
        object.__setattr__(self, "real_scores", r)
        object.__setattr__(self, "fake_scores", f)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-x)), np.exp(x) / (1.0 + np.exp(x)))

_LOG_FLOOR = 1e-12


def rel_d_loss(s: CriticScores) -> float:
    """Relativistic average discriminator loss.

    D(real, fake) = sigmoid(C_real - mean C_fake) is pushed toward 1 and
    D(fake, real) = sigmoid(C_fake - mean C_real) toward 0.
    """
    d_rf = _sigmoid(s.real_scores - s.fake_scores.mean())
    d_fr = _sigmoid(s.fake_scores - s.real_scores.mean())
    return float(
        -np.mean(np.log(np.maximum(d_rf, _LOG_FLOOR)))
        - np.mean(np.log(np.maximum(1.0 - d_fr, _LOG_FLOOR)))
    )


def rel_g_loss(s: CriticScores) -> float:
    """Generator counterpart: roles of the two sigmoid terms swapped."""
    d_rf = _sigmoid(s.real_scores - s.fake_scores.mean())
    d_fr = _sigmoid(s.fake_scores - s.real_scores.mean())
    return float(
        -np.mean(np.log(np.maximum(1.0 - d_rf, _LOG_FLOOR)))
        - np.mean(np.log(np.maximum(d_fr, _LOG_FLOOR)))
    )


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 1.0
    beta: float = 1.0
    gamma: float = 0.005


def total_loss(char: float, perceptual: float, g_adv: float, w: LossWeights = LossWeights()) -> float:
    return w.alpha * char + w.beta * perceptual + w.gamma * g_adv


# --- perceptual distance backends -------------------------------------------

_BACKENDS: dict = {}


def register_backend(name: str, fn) -> None:
    _BACKENDS[name] = fn


def perceptual_distance(a: ImageBuf, b: ImageBuf, backend: str = "downsampled-luma-l1") -> float:
    if backend not in _BACKENDS:
        raise MissingBackend(
            f"no perceptual backend {backend!r}; registered: {sorted(_BACKENDS)}"
        )
    return float(_BACKENDS[backend](a, b))


def _downsampled_luma_l1(a: ImageBuf, b: ImageBuf) -> float:
    # Trivial placeholder, not a learned perceptual metric: mean |luma diff|
    # of 4x-downsampled images on the [0, 1] scale.
    require_space(a, ColorSpace.SRGB_01)
    require_space(b, ColorSpace.SRGB_01)
    if not a.same_dims(b):
        raise DimensionMismatch("images differ in size")
    w = max(1, a.width // 4)
    h = max(1, a.height // 4)
    da = resize_bilinear(a, w, h)
    db = resize_bilinear(b, w, h)
    # luma stays on the [0, 1] scale here, so the distance is unitless
    la = np.einsum("c,chw->hw", _LUMA_601, da.planes.astype(np.float64))
    lb = np.einsum("c,chw->hw", _LUMA_601, db.planes.astype(np.float64))
    return float(np.mean(np.abs(la - lb)))


register_backend("downsampled-luma-l1", _downsampled_luma_l1)
