"""Dataset plumbing: manifests, label rasters, sample persistence and a
procedural source generator for desk-scale runs.

Manifest format (line-oriented, tab-separated, schema-versioned):

    omh-manifest v1
    meta<TAB>seed<TAB><int>
    meta<TAB>perturb_config<TAB><path or "default">
    meta<TAB>declared_count<TAB><split><TAB><int>      (optional, repeatable)
    pair<TAB><split><TAB><image_path><TAB><label_path>
    sample<TAB><split><TAB><sample_id>

Paths are relative to the manifest's directory. `sample` entries point into
the benchmark layout `<root>/{real,composite,labels,records}/<id>.*`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    NoForeground,
    SchemaMismatch,
    UnsupportedBitDepth,
    UnsupportedLabelEncoding,
)
from .imagecore import (
    ColorSpace,
    ImageBuf,
    lab_to_srgb,
    load_image,
    resize_planes,
    save_image,
)
from .perturb import BenchmarkSample, LabelMap, PerturbRecord, replay_records

MANIFEST_HEADER = "omh-manifest v1"

#: Benchmark directory layout used by persist/load.
SAMPLE_SUBDIRS = ("real", "composite", "labels", "records")


@dataclass(frozen=True)
class ManifestEntry:
    kind: str            # "pair" or "sample"
    split: str           # "train" / "test" / ...
    image_path: str | None = None
    label_path: str | None = None
    sample_id: str | None = None


@dataclass
class Manifest:
    root: Path
    seed: int | None = None
    perturb_config: str = "default"
    declared_counts: dict = field(default_factory=dict)
    entries: list = field(default_factory=list)


def load_manifest(path, check_paths: bool = True) -> Manifest:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0].strip() != MANIFEST_HEADER:
        raise SchemaMismatch(f"{path.name}: expected header {MANIFEST_HEADER!r}")
    m = Manifest(root=path.parent)
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        tag = parts[0]
        if tag == "meta":
            if parts[1] == "seed":
                m.seed = int(parts[2])
            elif parts[1] == "perturb_config":
                m.perturb_config = parts[2]
            elif parts[1] == "declared_count":
                m.declared_counts[parts[2]] = int(parts[3])
            else:
                raise SchemaMismatch(f"{path.name}:{ln}: unknown meta key {parts[1]!r}")
        elif tag == "pair":
            if len(parts) != 4:
                raise SchemaMismatch(f"{path.name}:{ln}: pair needs split, image, labels")
            m.entries.append(ManifestEntry("pair", parts[1], parts[2], parts[3]))
        elif tag == "sample":
            if len(parts) != 3:
                raise SchemaMismatch(f"{path.name}:{ln}: sample needs split, id")
            m.entries.append(ManifestEntry("sample", parts[1], sample_id=parts[2]))
        else:
            raise SchemaMismatch(f"{path.name}:{ln}: unknown entry tag {tag!r}")
    if check_paths:
        _check_entry_paths(m)
    return m


def _check_entry_paths(m: Manifest) -> None:
    for e in m.entries:
        if e.kind == "pair":
            for p in (e.image_path, e.label_path):
                if not (m.root / p).exists():
                    raise FileNotFoundError(m.root / p)
        else:
            for sub, ext in zip(SAMPLE_SUBDIRS, ("png", "png", "png", "json")):
                p = m.root / sub / f"{e.sample_id}.{ext}"
                if not p.exists():
                    raise FileNotFoundError(p)


def save_manifest(m: Manifest, path) -> None:
    path = Path(path)
    lines = [MANIFEST_HEADER]
    if m.seed is not None:
        lines.append(f"meta\tseed\t{m.seed}")
    lines.append(f"meta\tperturb_config\t{m.perturb_config}")
    for split in sorted(m.declared_counts):
        lines.append(f"meta\tdeclared_count\t{split}\t{m.declared_counts[split]}")
    for e in m.entries:
        if e.kind == "pair":
            lines.append(f"pair\t{e.split}\t{e.image_path}\t{e.label_path}")
        else:
            lines.append(f"sample\t{e.split}\t{e.sample_id}")
    path.write_text("\n".join(lines) + "\n")


def stats(m: Manifest) -> dict:
    """Per-split entry counts next to any declared counts."""
    table: dict = {}
    for e in m.entries:
        table.setdefault(e.split, {"actual": 0, "declared": None})
        table[e.split]["actual"] += 1
    for split, count in m.declared_counts.items():
        table.setdefault(split, {"actual": 0, "declared": None})
        table[split]["declared"] = count
    return table


def decode_label_png(path) -> LabelMap:
    """8-bit grayscale or indexed PNG where the pixel value is the class."""
    path = Path(path)
    with Image.open(path) as im:
        im.load()
        if im.mode == "P":
            arr = np.asarray(im, dtype=np.uint8)  # palette indices
        elif im.mode == "L":
            arr = np.asarray(im, dtype=np.uint8)
        elif im.mode in ("I", "I;16"):
            raise UnsupportedBitDepth(f"{path.name}: 16-bit labels not supported")
        else:
            raise UnsupportedLabelEncoding(
                f"{path.name}: mode {im.mode}; labels must be grayscale or indexed"
            )
    return LabelMap(arr.astype(np.int32))


def save_label_png(labels: LabelMap, path) -> None:
    ids = labels.labels
    if ids.max(initial=0) > 255:
        raise UnsupportedLabelEncoding("class ids above 255 cannot be stored as 8-bit PNG")
    Image.fromarray(ids.astype(np.uint8), mode="L").save(path, "PNG")


# --- sample persistence ------------------------------------------------------

RECORDS_SCHEMA = 1


def persist_sample(sample: BenchmarkSample, root) -> None:
    """Write a sample into `<root>/{real,composite,labels,records}/<id>.*`."""
    root = Path(root)
    for sub in SAMPLE_SUBDIRS:
        (root / sub).mkdir(parents=True, exist_ok=True)
    save_image(sample.real, root / "real" / f"{sample.sample_id}.png")
    save_image(sample.composite, root / "composite" / f"{sample.sample_id}.png")
    save_label_png(sample.labels, root / "labels" / f"{sample.sample_id}.png")
    doc = {
        "schema": RECORDS_SCHEMA,
        "sample_id": sample.sample_id,
        "records": [r.to_dict() for r in sample.records],
    }
    (root / "records" / f"{sample.sample_id}.json").write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n"
    )


def load_sample(root, sample_id: str) -> BenchmarkSample:
    root = Path(root)
    doc = json.loads((root / "records" / f"{sample_id}.json").read_text())
    if doc.get("schema") != RECORDS_SCHEMA:
        raise SchemaMismatch(f"records/{sample_id}.json: schema {doc.get('schema')}")
    return BenchmarkSample(
        sample_id=sample_id,
        real=load_image(root / "real" / f"{sample_id}.png"),
        composite=load_image(root / "composite" / f"{sample_id}.png"),
        labels=decode_label_png(root / "labels" / f"{sample_id}.png"),
        records=[PerturbRecord.from_dict(d) for d in doc["records"]],
    )


def verify_replay(sample: BenchmarkSample, cfg) -> bool:
    """True when replaying the records reproduces the stored composite
    bit-exactly after 8-bit quantization."""
    from .imagecore import quantize_to_8bit

    _, replayed = replay_records(sample.real, sample.labels, sample.records, cfg)
    got = quantize_to_8bit(replayed).planes
    want = quantize_to_8bit(sample.composite).planes
    return bool((got == want).all())


# --- procedural sources ------------------------------------------------------

@dataclass(frozen=True)
class CorpusSource:
    """An (image, labels) pair ready for perturbation."""

    sample_id: str
    image: ImageBuf
    labels: LabelMap


# The generator synthesizes directly in LAB inside a box that stays inside
# the sRGB gamut even after per-channel scaling by [0.6, 1.4]: L in
# [40, 60] and chroma radius <= 11 map into L [24, 84], radius <= 15.4,
# which is comfortably in gamut (verified by test_imagecore).
_BASE_L = 50.0
_GRADIENT_AMP = 6.0
_NOISE_AMP_L = 4.0
_NOISE_AMP_AB = 8.0
_TINT_L = 2.0
_TINT_AB = 2.5
_CHROMA_MAX = 11.0


def _value_noise(h: int, w: int, cells: int, rng: np.random.Generator, octaves: int = 2) -> np.ndarray:
    """Smooth value-noise field in [-1, 1], shape (3, h, w)."""
    out = np.zeros((3, h, w))
    amp = 1.0
    total = 0.0
    c = cells
    for _ in range(octaves):
        grid = rng.uniform(-1.0, 1.0, (3, c, c))
        out += amp * resize_planes(grid, w, h)
        total += amp
        amp *= 0.5
        c *= 2
    return out / total


def _place_regions(h: int, w: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Disjoint elliptical blobs labeled 1..n on background 0."""
    labels = np.zeros((h, w), np.int32)
    occupied = np.zeros((h, w), bool)
    ys, xs = np.mgrid[0:h, 0:w]
    min_area = int(0.005 * h * w) + 1
    base = 0.085 * min(h, w)
    placed = 0
    for label in range(1, n + 1):
        for attempt in range(400):
            shrink = 1.0 / (1.0 + attempt / 150.0)
            rx = rng.uniform(0.75, 1.3) * base * shrink
            ry = rng.uniform(0.75, 1.3) * base * shrink
            if np.pi * rx * ry < min_area:
                continue
            cx = rng.uniform(rx + 2, w - rx - 2)
            cy = rng.uniform(ry + 2, h - ry - 2)
            theta = rng.uniform(0, np.pi)
            dx = xs - cx
            dy = ys - cy
            u = dx * np.cos(theta) + dy * np.sin(theta)
            v = -dx * np.sin(theta) + dy * np.cos(theta)
            mask = (u / rx) ** 2 + (v / ry) ** 2 <= 1.0
            if mask.sum() < min_area or (mask & occupied).any():
                continue
            labels[mask] = label
            occupied |= mask
            placed += 1
            break
    if placed < n:
        raise RuntimeError(f"could only place {placed} of {n} regions")
    return labels


def generate_source(width: int, height: int, seed: int, sample_id: str) -> CorpusSource:
    """One deterministic procedural image+labels pair."""
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))
    n_regions = int(rng.integers(4, 13))
    labels = _place_regions(height, width, n_regions, rng)

    noise = _value_noise(height, width, 6, rng)
    ys, xs = np.mgrid[0:height, 0:width]
    phi = rng.uniform(0, 2 * np.pi)
    grad = np.cos(phi) * (xs / width - 0.5) + np.sin(phi) * (ys / height - 0.5)
    grad = grad / max(np.abs(grad).max(), 1e-9)

    L = _BASE_L + _GRADIENT_AMP * grad + _NOISE_AMP_L * noise[0]
    a = _NOISE_AMP_AB * noise[1]
    b = _NOISE_AMP_AB * noise[2]

    for label in range(1, n_regions + 1):
        sel = labels == label
        L[sel] += rng.uniform(-_TINT_L, _TINT_L)
        a[sel] += rng.uniform(-_TINT_AB, _TINT_AB)
        b[sel] += rng.uniform(-_TINT_AB, _TINT_AB)

    L = np.clip(L, _BASE_L - 10.0, _BASE_L + 10.0)
    radius = np.hypot(a, b)
    shrink = np.where(radius > _CHROMA_MAX, _CHROMA_MAX / np.maximum(radius, 1e-9), 1.0)
    a *= shrink
    b *= shrink

    lab = ImageBuf(np.stack([L, a, b]).astype(np.float32), ColorSpace.LAB)
    return CorpusSource(sample_id, lab_to_srgb(lab), LabelMap(labels))


def gen_procedural_corpus(n: int, dims: tuple[int, int], seed: int) -> list[CorpusSource]:
    """n deterministic sources, each with 4-12 disjoint labeled regions."""
    if n < 1:
        raise ValueError("need n >= 1")
    width, height = dims
    sources = []
    for i in range(n):
        child = int(np.random.SeedSequence([int(seed), i]).generate_state(1, np.uint64)[0])
        sources.append(generate_source(width, height, child, f"proc{i:04d}"))
    return sources


def write_source_corpus(sources: list[CorpusSource], out_dir, seed: int) -> Path:
    """Write images+labels plus a pair-entry manifest; returns its path."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "labels").mkdir(parents=True, exist_ok=True)
    m = Manifest(root=out_dir, seed=seed)
    for src in sources:
        img_rel = f"images/{src.sample_id}.png"
        lab_rel = f"labels/{src.sample_id}.png"
        save_image(src.image, out_dir / img_rel)
        save_label_png(src.labels, out_dir / lab_rel)
        m.entries.append(ManifestEntry("pair", "train", img_rel, lab_rel))
    path = out_dir / "manifest.txt"
    save_manifest(m, path)
    return path


def foreground_class_count(labels: LabelMap) -> int:
    n = len(labels.class_ids())
    if n == 0:
        raise NoForeground("no foreground classes")
    return n
