import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from omharmony import metrics
from omharmony.errors import (
    DecodeFailure,
    DimensionMismatch,
    InvalidColorSpace,
    UnsupportedBitDepth,
)
from omharmony.imagecore import (
    ColorSpace,
    ImageBuf,
    clamp_to_gamut,
    from_uint8,
    hls_to_srgb,
    lab_in_srgb_gamut,
    lab_to_srgb,
    load_image,
    quantize_to_8bit,
    resize_bilinear,
    save_image,
    srgb_to_hls,
    srgb_to_lab,
    to_uint8,
)


def buf_from_colors(colors: np.ndarray) -> ImageBuf:
    """(N, 3) colors -> Nx1 image."""
    return ImageBuf.from_hwc(colors.reshape(-1, 1, 3).astype(np.float32), ColorSpace.SRGB_01)


def srgb_grid(steps: int = 16) -> ImageBuf:
    g = np.linspace(0.0, 1.0, steps)
    grid = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    return buf_from_colors(grid)


class TestLab:
    def test_black_is_origin(self):
        lab = srgb_to_lab(buf_from_colors(np.zeros((1, 3))))
        assert np.allclose(lab.planes, 0.0, atol=1e-6)

    def test_white_is_l100(self):
        lab = srgb_to_lab(buf_from_colors(np.ones((1, 3))))
        l, a, b = lab.planes[:, 0, 0]
        assert l == pytest.approx(100.0, abs=1e-4)
        assert abs(a) < 1e-4 and abs(b) < 1e-4

    def test_matches_reference_conversion(self):
        # cross-check against an independent colorimetric implementation
        skcolor = pytest.importorskip("skimage.color")
        img = srgb_grid(8)
        ours = srgb_to_lab(img).to_hwc().astype(np.float64)
        ref = skcolor.rgb2lab(img.to_hwc().astype(np.float64))
        assert np.abs(ours - ref).max() < 0.02

    def test_round_trip_grid(self):
        img = srgb_grid(16)
        back = lab_to_srgb(srgb_to_lab(img))
        assert np.abs(back.planes - img.planes).max() <= 1e-4

    def test_out_of_gamut_clamped(self):
        lab = ImageBuf(
            np.array([50.0, 200.0, 0.0], np.float32).reshape(3, 1, 1), ColorSpace.LAB
        )
        rgb = lab_to_srgb(lab)
        assert rgb.planes.min() >= 0.0 and rgb.planes.max() <= 1.0

    def test_wrong_space_rejected(self):
        lab = srgb_to_lab(srgb_grid(2))
        with pytest.raises(InvalidColorSpace):
            srgb_to_lab(lab)
        with pytest.raises(InvalidColorSpace):
            lab_to_srgb(srgb_grid(2))

    def test_conversion_is_per_pixel(self):
        # permuting pixels commutes with conversion
        rng = np.random.default_rng(3)
        colors = rng.uniform(0, 1, (64, 3))
        perm = rng.permutation(64)
        a = srgb_to_lab(buf_from_colors(colors)).to_hwc().reshape(64, 3)
        b = srgb_to_lab(buf_from_colors(colors[perm])).to_hwc().reshape(64, 3)
        assert np.array_equal(a[perm], b)

    def test_scaled_corpus_box_stays_in_gamut(self):
        # the procedural corpus emits L in [40, 60], chroma <= 11; scaling
        # channels by [0.6, 1.4] must stay inside the sRGB gamut
        L = np.linspace(24.0, 84.0, 40)
        ang = np.linspace(0, 2 * np.pi, 72, endpoint=False)
        rad = np.linspace(0, 15.4, 12)
        LL, RR, TT = np.meshgrid(L, rad, ang, indexing="ij")
        lab = np.stack([LL, RR * np.cos(TT), RR * np.sin(TT)])
        buf = ImageBuf(lab.reshape(3, -1, 1).astype(np.float32), ColorSpace.LAB)
        assert lab_in_srgb_gamut(buf).all()


class TestHls:
    def test_zero_saturation_is_gray(self):
        hls = ImageBuf(
            np.array([0.0, 0.5, 0.0], np.float32).reshape(3, 1, 1), ColorSpace.HLS
        )
        rgb = hls_to_srgb(hls)
        assert np.allclose(rgb.planes, 0.5, atol=1e-6)

    def test_pure_red(self):
        hls = srgb_to_hls(buf_from_colors(np.array([[1.0, 0.0, 0.0]])))
        h, l, s = hls.planes[:, 0, 0]
        assert h == pytest.approx(0.0, abs=1e-5)
        assert l == pytest.approx(0.5, abs=1e-6)
        assert s == pytest.approx(1.0, abs=1e-6)

    def test_round_trip_grid(self):
        img = srgb_grid(16)
        back = hls_to_srgb(srgb_to_hls(img))
        assert np.abs(back.planes - img.planes).max() <= 1e-4

    def test_hue_wraps(self):
        hls = ImageBuf(
            np.array([370.0, 0.5, 0.8], np.float32).reshape(3, 1, 1), ColorSpace.HLS
        )
        wrapped = ImageBuf(
            np.array([10.0, 0.5, 0.8], np.float32).reshape(3, 1, 1), ColorSpace.HLS
        )
        assert np.allclose(hls_to_srgb(hls).planes, hls_to_srgb(wrapped).planes, atol=1e-6)


class TestClamp:
    @given(st.integers(min_value=0, max_value=2 ** 32 - 1))
    @settings(max_examples=25, deadline=None)
    def test_idempotent(self, seed):
        rng = np.random.default_rng(seed)
        for space, scale in [
            (ColorSpace.SRGB_01, 2.0),
            (ColorSpace.LAB, 300.0),
            (ColorSpace.HLS, 500.0),
        ]:
            img = ImageBuf(
                rng.uniform(-scale, scale, (3, 4, 4)).astype(np.float32), space
            )
            once = clamp_to_gamut(img)
            twice = clamp_to_gamut(once)
            assert np.array_equal(once.planes, twice.planes)


class TestResize:
    def test_identity_dims_bit_identical(self, small_source):
        img = small_source.image
        out = resize_bilinear(img, img.width, img.height)
        assert np.array_equal(out.planes, img.planes)

    def test_checkerboard_average(self):
        checker = ImageBuf.from_hwc(
            np.array([[[0.0] * 3, [1.0] * 3], [[1.0] * 3, [0.0] * 3]], np.float32),
            ColorSpace.SRGB_01,
        )
        out = resize_bilinear(checker, 1, 1)
        assert np.allclose(out.planes, 0.5, atol=1e-7)

    def test_upscale_constant(self):
        one = ImageBuf(np.full((3, 1, 1), 0.37, np.float32), ColorSpace.SRGB_01)
        out = resize_bilinear(one, 256, 256)
        assert np.allclose(out.planes, np.float32(0.37))
        assert (out.width, out.height) == (256, 256)

    def test_zero_target_rejected(self, small_source):
        with pytest.raises(DimensionMismatch):
            resize_bilinear(small_source.image, 0, 4)


class TestCodecs:
    def test_png_round_trip(self, tmp_path, rng):
        img = ImageBuf(rng.uniform(0, 1, (3, 20, 30)).astype(np.float32), ColorSpace.SRGB_01)
        path = tmp_path / "x.png"
        save_image(img, path)
        back = load_image(path)
        assert np.abs(back.planes - img.planes).max() <= 0.5 / 255 + 1e-7

    def test_16bit_png_rejected(self, tmp_path):
        path = tmp_path / "deep.png"
        Image.new("I;16", (8, 8), 30000).save(path, "PNG")
        with pytest.raises(UnsupportedBitDepth):
            load_image(path)

    def test_garbage_rejected(self, tmp_path):
        path = tmp_path / "junk.png"
        path.write_bytes(b"not an image at all, sorry")
        with pytest.raises(DecodeFailure):
            load_image(path)

    def test_jpeg_quality95(self, tmp_path, small_source):
        path = tmp_path / "x.jpg"
        save_image(small_source.image, path, quality=95)
        back = load_image(path)
        assert metrics.psnr(back, quantize_to_8bit(small_source.image)) >= 35.0

    def test_alpha_dropped(self, tmp_path):
        rgba = np.zeros((4, 4, 4), np.uint8)
        rgba[..., 0] = 200
        rgba[..., 3] = 7  # nearly transparent; must be ignored, not blended
        path = tmp_path / "a.png"
        Image.fromarray(rgba, "RGBA").save(path)
        img = load_image(path)
        assert np.allclose(img.planes[0], 200 / 255, atol=1e-6)
        assert np.allclose(img.planes[1:], 0.0)

    def test_quantize_snaps_to_grid(self, rng):
        img = ImageBuf(rng.uniform(0, 1, (3, 5, 5)).astype(np.float32), ColorSpace.SRGB_01)
        q = quantize_to_8bit(img)
        assert np.array_equal(to_uint8(q), to_uint8(img))
        assert np.array_equal(from_uint8(to_uint8(img)).planes, q.planes)


def test_planes_stored_float32(small_source):
    assert small_source.image.planes.dtype == np.float32


def test_bad_shape_rejected():
    with pytest.raises(DimensionMismatch):
        ImageBuf(np.zeros((4, 4, 4), np.float32), ColorSpace.SRGB_01)
    with pytest.raises(DimensionMismatch):
        ImageBuf(np.zeros((3, 0, 4), np.float32), ColorSpace.SRGB_01)
