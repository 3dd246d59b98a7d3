import numpy as np
import pytest

from omharmony.corpus import gen_procedural_corpus
from omharmony.imagecore import ColorSpace, ImageBuf
from omharmony.perturb import PerturbConfig, default_config


@pytest.fixture(scope="session")
def small_source():
    return gen_procedural_corpus(1, (96, 96), seed=421)[0]


@pytest.fixture(scope="session")
def sources_128():
    return gen_procedural_corpus(4, (128, 128), seed=77)


@pytest.fixture()
def cfg_default() -> PerturbConfig:
    return default_config()


@pytest.fixture()
def cfg_affine() -> PerturbConfig:
    # pure per-channel LAB scaling, no css overlays: every record is lab_scale
    cfg = default_config()
    cfg.method_weights = (0.0, 1.0, 0.0)
    cfg.css_probability = 0.0
    return cfg


def gray_image(value: float, size: int = 16) -> ImageBuf:
    return ImageBuf(np.full((3, size, size), value, np.float32), ColorSpace.SRGB_01)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
