import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from omharmony.cli import main
from omharmony.corpus import gen_procedural_corpus, save_label_png, write_source_corpus
from omharmony.imagecore import save_image
from omharmony.perturb import LabelMap
from omharmony.retouch import load_omsk


def tree_digest(root: Path) -> dict:
    out = {}
    for p in sorted(root.rglob("*")):
        if p.is_file():
            out[str(p.relative_to(root))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return out


def affine_config(tmp_path: Path, lo=0.6, hi=1.4) -> Path:
    cfg = tmp_path / "affine.json"
    cfg.write_text(json.dumps({
        "filter_bank": "default",
        "css_probability": 0.0,
        "method_weights": [0.0, 1.0, 0.0],
        "lab_scale_range": [[lo, hi]] * 3,
    }))
    return cfg


@pytest.fixture()
def source_corpus(tmp_path):
    sources = gen_procedural_corpus(3, (64, 64), seed=13)
    write_source_corpus(sources, tmp_path / "corpus", seed=13)
    return tmp_path / "corpus"


class TestGencorpus:
    def test_writes_manifest_and_sources(self, tmp_path):
        rc = main(["gencorpus", "--count", "2", "--size", "48", "--seed", "3",
                   "--out", str(tmp_path / "c")])
        assert rc == 0
        assert (tmp_path / "c" / "manifest.txt").exists()
        assert len(list((tmp_path / "c" / "images").glob("*.png"))) == 2

    def test_deterministic(self, tmp_path):
        for name in ("a", "b"):
            main(["gencorpus", "--count", "2", "--size", "48", "--seed", "3",
                  "--out", str(tmp_path / name)])
        assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")

    def test_resolution_floor(self, tmp_path):
        rc = main(["gencorpus", "--count", "1", "--size", "16", "--seed", "1",
                   "--out", str(tmp_path / "tiny")])
        assert rc == 2


class TestSynth:
    def test_byte_identical_reruns(self, tmp_path, source_corpus):
        cfg = affine_config(tmp_path)
        for name in ("b1", "b2"):
            rc = main(["synth", "--manifest", str(source_corpus / "manifest.txt"),
                       "--out", str(tmp_path / name), "--seed", "21",
                       "--config", str(cfg)])
            assert rc == 0
        d1 = tree_digest(tmp_path / "b1")
        assert d1 == tree_digest(tmp_path / "b2")
        assert any(k.startswith("composite/") for k in d1)
        assert "synthesis_report.txt" in d1

    def test_empty_manifest_fails(self, tmp_path):
        man = tmp_path / "m.txt"
        man.write_text("omh-manifest v1\n")
        rc = main(["synth", "--manifest", str(man), "--out", str(tmp_path / "o")])
        assert rc != 0

    def test_no_foreground_skipped(self, tmp_path, small_source):
        root = tmp_path / "src"
        (root / "images").mkdir(parents=True)
        (root / "labels").mkdir()
        save_image(small_source.image, root / "images" / "good.png")
        save_label_png(small_source.labels, root / "labels" / "good.png")
        save_image(small_source.image, root / "images" / "empty.png")
        h, w = small_source.labels.height, small_source.labels.width
        save_label_png(LabelMap(np.zeros((h, w), np.int32)), root / "labels" / "empty.png")
        man = root / "manifest.txt"
        man.write_text(
            "omh-manifest v1\n"
            "pair\ttrain\timages/good.png\tlabels/good.png\n"
            "pair\ttrain\timages/empty.png\tlabels/empty.png\n"
        )
        rc = main(["synth", "--manifest", str(man), "--out", str(tmp_path / "o"), "--seed", "4"])
        assert rc == 0
        report = (tmp_path / "o" / "synthesis_report.txt").read_text()
        assert "skip\tempty\tno-foreground" in report
        assert "ok\tgood" in report

    def test_missing_manifest(self, tmp_path):
        rc = main(["synth", "--manifest", str(tmp_path / "ghost.txt"), "--out", str(tmp_path / "o")])
        assert rc == 2


class TestHarmonize:
    def test_supervised_improves_psnr(self, tmp_path, source_corpus, capsys):
        cfg = affine_config(tmp_path)
        main(["synth", "--manifest", str(source_corpus / "manifest.txt"),
              "--out", str(tmp_path / "bench"), "--seed", "8", "--config", str(cfg)])
        rc = main(["harmonize", "--sample-root", str(tmp_path / "bench"),
                   "--out", str(tmp_path / "harm"), "--mode", "supervised"])
        assert rc == 0
        for line in capsys.readouterr().out.splitlines():
            if "->" in line and "psnr" in line:
                before, after = line.split("psnr ")[1].replace(" dB", "").split(" -> ")
                assert float(after) >= float(before)
        assert list((tmp_path / "harm").glob("*.omsk"))

    def test_identity_corpus_gives_identity_masks(self, tmp_path, source_corpus):
        cfg = affine_config(tmp_path, lo=1.0, hi=1.0)
        main(["synth", "--manifest", str(source_corpus / "manifest.txt"),
              "--out", str(tmp_path / "bench"), "--seed", "8", "--config", str(cfg)])
        main(["harmonize", "--sample-root", str(tmp_path / "bench"),
              "--out", str(tmp_path / "harm"), "--mode", "supervised"])
        for path in (tmp_path / "harm").glob("*.omsk"):
            oms = load_omsk(path)
            assert np.abs(oms.mul - 1.0).max() < 5e-3
            assert np.abs(oms.add).max() < 0.5

    def test_requires_inputs(self, tmp_path):
        rc = main(["harmonize", "--out", str(tmp_path / "x")])
        assert rc == 2
        rc = main(["harmonize", "--image", "a.png", "--out", str(tmp_path / "x")])
        assert rc == 2

    def test_blind_single_image(self, tmp_path, small_source):
        img_path = tmp_path / "img.png"
        lab_path = tmp_path / "labels.png"
        save_image(small_source.image, img_path)
        save_label_png(small_source.labels, lab_path)
        rc = main(["harmonize", "--image", str(img_path), "--labels", str(lab_path),
                   "--mode", "blind", "--out", str(tmp_path / "h")])
        assert rc == 0
        assert (tmp_path / "h" / "img.png").exists()
        assert (tmp_path / "h" / "img.omsk").exists()

    def test_supervised_needs_ground_truth(self, tmp_path, small_source):
        img_path = tmp_path / "img.png"
        lab_path = tmp_path / "labels.png"
        save_image(small_source.image, img_path)
        save_label_png(small_source.labels, lab_path)
        rc = main(["harmonize", "--image", str(img_path), "--labels", str(lab_path),
                   "--mode", "supervised", "--out", str(tmp_path / "h")])
        assert rc == 2


class TestEval:
    @pytest.fixture()
    def bench(self, tmp_path, source_corpus):
        cfg = affine_config(tmp_path)
        main(["synth", "--manifest", str(source_corpus / "manifest.txt"),
              "--out", str(tmp_path / "bench"), "--seed", "31", "--config", str(cfg)])
        main(["harmonize", "--sample-root", str(tmp_path / "bench"),
              "--out", str(tmp_path / "harm"), "--mode", "supervised"])
        return tmp_path / "bench", tmp_path / "harm"

    def test_gt_vs_gt_is_zero(self, tmp_path, bench, capsys):
        root, _ = bench
        rc = main(["eval", "--pred", str(root / "real"), "--gt", str(root / "real")])
        assert rc == 0
        out = capsys.readouterr().out
        agg = [l for l in out.splitlines() if l.startswith("aggregate")][0]
        assert agg.split("\t")[1] == "0.0000"

    def test_report_contents(self, tmp_path, bench, capsys):
        root, harm = bench
        report = tmp_path / "report.txt"
        rc = main(["eval", "--pred", str(harm), "--gt", str(root), "--report", str(report)])
        assert rc == 0
        text = report.read_text()
        assert text.startswith("omh-eval-report v1")
        assert "Composite" in text and "Harmonized" in text
        assert "iou" in text.splitlines()[2]
        # aggregate mse equals the mean of the per-image rows
        rows = [l.split("\t") for l in text.splitlines()
                if l.startswith("proc")]
        agg = [l for l in text.splitlines() if l.startswith("aggregate")][0]
        per_image = [float(r[1]) for r in rows]
        assert float(agg.split("\t")[1]) == pytest.approx(np.mean(per_image), abs=1e-3)

    def test_unpaired_files_fail(self, tmp_path, bench):
        root, harm = bench
        stray = harm / "stranger.png"
        save_image(gen_procedural_corpus(1, (64, 64), seed=1)[0].image, stray)
        rc = main(["eval", "--pred", str(harm), "--gt", str(root)])
        assert rc == 2

    def test_missing_dirs(self, tmp_path):
        rc = main(["eval", "--pred", str(tmp_path), "--gt", str(tmp_path)])
        assert rc == 2
