"""Operator-mask image harmonization: benchmark synthesis, per-region
affine retouching in LAB/HLS, metrics, and an editing service."""

from .imagecore import (
    ColorSpace,
    ImageBuf,
    clamp_to_gamut,
    hls_to_srgb,
    lab_to_srgb,
    load_image,
    quantize_to_8bit,
    resize_bilinear,
    save_image,
    srgb_to_hls,
    srgb_to_lab,
)
from .perturb import (
    BenchmarkSample,
    LabelMap,
    PerturbConfig,
    PerturbRecord,
    default_config,
    make_composite,
    replay_records,
    select_regions,
)
from .retouch import OperatorMaskSet, binarize_add, edit, identity_masks, load_omsk, mask_iou, save_omsk
from .retouch import apply as apply_masks
from .solver import (
    AffineFit,
    DescentOptions,
    RegionStats,
    fit_affine_blind,
    fit_affine_supervised,
    fit_descent,
    harmonize,
    masks_from_fits,
)
from .metrics import CriticScores, LossWeights, charbonnier, mse, psnr, rel_d_loss, rel_g_loss, ssim, total_loss
from .corpus import (
    CorpusSource,
    Manifest,
    decode_label_png,
    gen_procedural_corpus,
    load_manifest,
    load_sample,
    persist_sample,
    stats,
)

__version__ = "0.1.0"
