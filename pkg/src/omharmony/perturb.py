"""Semantic-guided multi-region perturbation: builds composites from real
images by disturbing randomly selected label regions.

Each selected region is hit by one of three method families:

  filter_chain  a named chain from the filter bank
  lab_scale     per-channel multiplication in LAB, converted back to sRGB
  blur_noise    degrade the real image everywhere and the composite only
                outside the region, so the region is left "too clean"

and, independently, a css-bank chain may be superimposed on the region.
Everything is driven by a counter-based RNG so corpus synthesis is
reproducible and each record can be replayed bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .errors import NoForeground, UnknownNoiseKind
from .filters import FilterBank, apply_chain, load_filter_bank
from .imagecore import (
    ColorSpace,
    ImageBuf,
    jpeg_cycle,
    lab_to_srgb,
    quantize_to_8bit,
    srgb_to_lab,
)

METHODS = ("filter_chain", "lab_scale", "blur_noise")
NOISE_KINDS = ("gaussian", "laplace", "poisson", "motion_blur", "jpeg")


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel integer class ids; 0 is background."""

    labels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2:
            raise ValueError("label map must be 2-D")
        if (arr < 0).any():
            raise ValueError("class ids must be >= 0")
        object.__setattr__(self, "labels", arr.astype(np.int32))

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    def class_ids(self) -> list[int]:
        ids = np.unique(self.labels)
        return [int(i) for i in ids if i != 0]

    def mask(self, label: int) -> np.ndarray:
        return self.labels == label


@dataclass(frozen=True)
class PerturbRecord:
    """One region's perturbation; exactly one payload is populated."""

    region_label: int
    method: str
    chain_name: str | None = None
    lab_multipliers: tuple | None = None
    noise_kind: str | None = None
    noise_params: dict | None = None
    css_overlay: str | None = None
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        payloads = [
            self.chain_name is not None,
            self.lab_multipliers is not None,
            self.noise_kind is not None,
        ]
        if sum(payloads) != 1:
            raise ValueError("exactly one method payload must be populated")
        if self.lab_multipliers is not None and any(m <= 0 for m in self.lab_multipliers):
            raise ValueError("lab multipliers must be positive")

    def to_dict(self) -> dict:
        return {
            "region_label": self.region_label,
            "method": self.method,
            "chain_name": self.chain_name,
            "lab_multipliers": list(self.lab_multipliers) if self.lab_multipliers else None,
            "noise_kind": self.noise_kind,
            "noise_params": self.noise_params,
            "css_overlay": self.css_overlay,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PerturbRecord":
        mults = d.get("lab_multipliers")
        return cls(
            region_label=int(d["region_label"]),
            method=d["method"],
            chain_name=d.get("chain_name"),
            lab_multipliers=tuple(mults) if mults else None,
            noise_kind=d.get("noise_kind"),
            noise_params=d.get("noise_params"),
            css_overlay=d.get("css_overlay"),
            seed=int(d.get("seed", 0)),
        )


@dataclass
class PerturbConfig:
    bank: FilterBank
    css_probability: float = 0.5
    lab_scale_range: tuple = ((0.6, 1.4), (0.6, 1.4), (0.6, 1.4))
    method_weights: tuple = (0.6, 0.2, 0.2)
    noise_kinds: tuple = NOISE_KINDS
    source: str = "default"  # config echo for reports

    def __post_init__(self):
        if not 0.0 <= self.css_probability <= 1.0:
            raise ValueError("css_probability must lie in [0, 1]")
        for lo, hi in self.lab_scale_range:
            if lo <= 0 or hi < lo:
                raise ValueError("lab scale ranges need 0 < lo <= hi")
        w = self.method_weights
        if len(w) != 3 or any(x < 0 for x in w) or sum(w) == 0:
            raise ValueError("method weights must be >= 0 and not all zero")
        for k in self.noise_kinds:
            if k not in NOISE_KINDS:
                raise UnknownNoiseKind(k)

    def echo(self) -> dict:
        return {
            "filter_bank": self.source,
            "css_probability": self.css_probability,
            "lab_scale_range": [list(r) for r in self.lab_scale_range],
            "method_weights": list(self.method_weights),
            "noise_kinds": list(self.noise_kinds),
        }


def default_config() -> PerturbConfig:
    return PerturbConfig(bank=load_filter_bank())


def load_perturb_config(path) -> PerturbConfig:
    """Read a JSON config; `filter_bank` is a path or "default"."""
    doc = json.loads(Path(path).read_text())
    bank_ref = doc.get("filter_bank", "default")
    bank = load_filter_bank(None if bank_ref == "default" else bank_ref)
    return PerturbConfig(
        bank=bank,
        css_probability=float(doc.get("css_probability", 0.5)),
        lab_scale_range=tuple(
            tuple(r) for r in doc.get("lab_scale_range", [[0.6, 1.4]] * 3)
        ),
        method_weights=tuple(doc.get("method_weights", [0.6, 0.2, 0.2])),
        noise_kinds=tuple(doc.get("noise_kinds", list(NOISE_KINDS))),
        source=str(bank_ref),
    )


@dataclass
class BenchmarkSample:
    sample_id: str
    real: ImageBuf
    composite: ImageBuf
    labels: LabelMap
    records: list = field(default_factory=list)


def rng_for(seed: int) -> np.random.Generator:
    """Counter-based generator so per-image streams are independent."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def combine_seed(global_seed: int, index: int) -> int:
    """Stable per-image seed derived from the run seed and sample index."""
    ss = np.random.SeedSequence([int(global_seed), int(index)])
    return int(ss.generate_state(1, np.uint64)[0])


def select_regions(labels: LabelMap, rng: np.random.Generator) -> list[tuple[int, np.ndarray]]:
    """Pick floor(K/5)+1 of the K foreground classes, uniformly, without
    replacement; returns (label, mask) pairs in draw order."""
    classes = labels.class_ids()
    if not classes:
        raise NoForeground("label map has no foreground class")
    n = len(classes) // 5 + 1
    chosen = rng.choice(np.array(classes), size=n, replace=False)
    return [(int(c), labels.mask(int(c))) for c in chosen]


def _masked(original: ImageBuf, modified: ImageBuf, mask: np.ndarray) -> ImageBuf:
    """modified inside mask, original (bit-identical) outside."""
    out = np.where(mask[None], modified.planes, original.planes)
    return ImageBuf(out, original.space)


def apply_filter_chain(img: ImageBuf, mask: np.ndarray, chain) -> ImageBuf:
    return _masked(img, apply_chain(img, chain), mask)


def apply_lab_scale(img: ImageBuf, mask: np.ndarray, multipliers) -> ImageBuf:
    """Multiply LAB channels by (l, a, b) inside the mask (gamut-clamped)."""
    mults = np.asarray(multipliers, dtype=np.float64)
    if (mults <= 0).any():
        raise ValueError("lab multipliers must be positive")
    lab = srgb_to_lab(img)
    scaled = ImageBuf(
        (lab.planes.astype(np.float64) * mults[:, None, None]).astype(np.float32),
        ColorSpace.LAB,
    )
    return _masked(img, lab_to_srgb(scaled), mask)


def _motion_kernel(length: int, angle_deg: float) -> np.ndarray:
    if length <= 1:
        return np.ones((1, 1))
    size = length if length % 2 == 1 else length + 1
    kernel = np.zeros((size, size))
    c = (size - 1) / 2.0
    theta = np.deg2rad(angle_deg)
    for t in np.linspace(-(length - 1) / 2.0, (length - 1) / 2.0, length):
        x = c + t * np.cos(theta)
        y = c + t * np.sin(theta)
        x0, y0 = int(np.floor(x)), int(np.floor(y))
        fx, fy = x - x0, y - y0
        for dy, wy in ((0, 1 - fy), (1, fy)):
            for dx, wx in ((0, 1 - fx), (1, fx)):
                yy, xx = y0 + dy, x0 + dx
                if 0 <= yy < size and 0 <= xx < size:
                    kernel[yy, xx] += wy * wx
    return kernel / kernel.sum()


def _convolve(img: ImageBuf, kernel: np.ndarray) -> ImageBuf:
    planes = np.stack([
        ndimage.convolve(p.astype(np.float64), kernel, mode="nearest")
        for p in img.planes
    ])
    return ImageBuf(np.clip(planes, 0.0, 1.0).astype(np.float32), img.space)


def draw_noise_params(kind: str, rng: np.random.Generator) -> dict:
    if kind == "gaussian":
        return {"sigma": float(rng.uniform(0.02, 0.08))}
    if kind == "laplace":
        return {"b": float(rng.uniform(0.01, 0.05))}
    if kind == "poisson":
        return {"scale": float(rng.uniform(100.0, 400.0))}
    if kind == "motion_blur":
        return {
            "length": int(rng.integers(3, 16)),
            "angle": float(rng.uniform(0.0, 180.0)),
        }
    if kind == "jpeg":
        return {"quality": int(rng.integers(10, 51))}
    raise UnknownNoiseKind(kind)


def apply_blur_noise(
    real: ImageBuf,
    composite: ImageBuf,
    mask: np.ndarray,
    kind: str,
    params: dict,
    rng: np.random.Generator,
) -> tuple[ImageBuf, ImageBuf]:
    """Degrade the real image everywhere and the composite outside `mask`.

    Additive fields are shared between the two images so their common
    background stays aligned; Poisson draws are shared wherever the pixel
    values still agree.
    """
    shape = real.planes.shape
    if kind == "gaussian":
        fld = rng.normal(0.0, params["sigma"], shape)
        real_d = ImageBuf(np.clip(real.planes + fld, 0, 1).astype(np.float32), real.space)
        comp_d = ImageBuf(np.clip(composite.planes + fld, 0, 1).astype(np.float32), real.space)
    elif kind == "laplace":
        fld = rng.laplace(0.0, params["b"], shape)
        real_d = ImageBuf(np.clip(real.planes + fld, 0, 1).astype(np.float32), real.space)
        comp_d = ImageBuf(np.clip(composite.planes + fld, 0, 1).astype(np.float32), real.space)
    elif kind == "poisson":
        scale = params["scale"]
        real_counts = rng.poisson(real.planes.astype(np.float64) * scale)
        comp_counts = rng.poisson(composite.planes.astype(np.float64) * scale)
        shared = real.planes == composite.planes
        comp_counts = np.where(shared, real_counts, comp_counts)
        real_d = ImageBuf(np.clip(real_counts / scale, 0, 1).astype(np.float32), real.space)
        comp_d = ImageBuf(np.clip(comp_counts / scale, 0, 1).astype(np.float32), real.space)
    elif kind == "motion_blur":
        kernel = _motion_kernel(params["length"], params["angle"])
        real_d = _convolve(real, kernel)
        comp_d = _convolve(composite, kernel)
    elif kind == "jpeg":
        real_d = jpeg_cycle(real, params["quality"])
        comp_d = jpeg_cycle(composite, params["quality"])
    else:
        raise UnknownNoiseKind(kind)
    return real_d, _masked(comp_d, composite, mask)


def _apply_record(
    real: ImageBuf,
    composite: ImageBuf,
    labels: LabelMap,
    record: PerturbRecord,
    cfg: PerturbConfig,
) -> tuple[ImageBuf, ImageBuf]:
    mask = labels.mask(record.region_label)
    if record.method == "filter_chain":
        composite = apply_filter_chain(composite, mask, cfg.bank.chain(record.chain_name))
    elif record.method == "lab_scale":
        composite = apply_lab_scale(composite, mask, record.lab_multipliers)
    else:
        field_rng = rng_for(record.seed)
        real, composite = apply_blur_noise(
            real, composite, mask, record.noise_kind, record.noise_params, field_rng
        )
    if record.css_overlay is not None:
        composite = apply_filter_chain(composite, mask, cfg.bank.chain(record.css_overlay))
    return real, composite


def make_composite(
    image: ImageBuf,
    labels: LabelMap,
    cfg: PerturbConfig,
    seed: int,
    sample_id: str = "sample",
) -> BenchmarkSample:
    """Perturb the selected regions of `image`; deterministic per seed.

    The input is snapped to the 8-bit grid first so persisted samples can
    be replayed bit-exactly from their PNG form.
    """
    if (labels.height, labels.width) != (image.height, image.width):
        raise ValueError("image and label map differ in size")
    real = quantize_to_8bit(image)
    composite = real
    rng = rng_for(seed)

    weights = np.asarray(cfg.method_weights, dtype=np.float64)
    weights = weights / weights.sum()

    records = []
    for label, mask in select_regions(labels, rng):
        method = METHODS[int(rng.choice(3, p=weights))]
        record_seed = int(rng.integers(0, 2 ** 62))
        chain_name = lab_multipliers = noise_kind = noise_params = None

        if method == "filter_chain":
            chain_name = str(rng.choice(cfg.bank.chain_names))
        elif method == "lab_scale":
            lab_multipliers = tuple(
                float(rng.uniform(lo, hi)) for lo, hi in cfg.lab_scale_range
            )
        else:
            noise_kind = str(rng.choice(sorted(cfg.noise_kinds)))
            noise_params = draw_noise_params(noise_kind, rng)

        css_overlay = None
        if rng.uniform() < cfg.css_probability and cfg.bank.css_names:
            css_overlay = str(rng.choice(cfg.bank.css_names))

        record = PerturbRecord(
            region_label=label,
            method=method,
            chain_name=chain_name,
            lab_multipliers=lab_multipliers,
            noise_kind=noise_kind,
            noise_params=noise_params,
            css_overlay=css_overlay,
            seed=record_seed,
        )
        real, composite = _apply_record(real, composite, labels, record, cfg)
        records.append(record)

    return BenchmarkSample(sample_id, real, composite, labels, records)


def replay_records(
    image: ImageBuf,
    labels: LabelMap,
    records: list[PerturbRecord],
    cfg: PerturbConfig,
) -> tuple[ImageBuf, ImageBuf]:
    """Reproduce (real, composite) from stored records, bit-exactly."""
    real = quantize_to_8bit(image)
    composite = real
    for record in records:
        real, composite = _apply_record(real, composite, labels, record, cfg)
    return real, composite
