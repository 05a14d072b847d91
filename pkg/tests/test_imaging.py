"""Window-to-image transform: segmentation, normalization, colormap, resize."""
import hashlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sslse_eeg import _viridis
from sslse_eeg.errors import NonIntegralSegment, ShapeMismatch, ValueOutOfRange, ZeroDimension
from sslse_eeg.imaging import (
    ColorLut,
    EegImage,
    apply_colormap,
    encode_window,
    luminance,
    normalize_matrix,
    normalize_segment,
    resize_bilinear,
    resize_nearest,
    segment_window,
)
from sslse_eeg.ingest import WindowSpec


# --- segmentation --------------------------------------------------------

def test_segment_shape_500hz_5s_50ms():
    block = np.arange(2500, dtype=float).reshape(1, 2500)
    m = segment_window(block, WindowSpec(window_s=5.0, segment_ms=50.0), 500.0)
    assert m.values.shape == (25, 100)


def test_segment_shape_500hz_2s_20ms():
    block = np.zeros((1, 1000))
    m = segment_window(block, WindowSpec(window_s=2.0, segment_ms=20.0), 500.0)
    assert m.values.shape == (10, 100)


def test_segment_channel_major_column_layout():
    # 2 channels, 100 Hz, 1 s window, 100 ms segments -> 20 x 10;
    # column j = [ch0 samples 10j..10j+9, ch1 samples 10j..10j+9]
    ch0 = np.arange(100, dtype=float)
    ch1 = np.arange(100, dtype=float) + 1000.0
    block = np.stack([ch0, ch1])
    m = segment_window(block, WindowSpec(window_s=1.0, segment_ms=100.0), 100.0)
    assert m.values.shape == (20, 10)
    for j in range(10):
        expected = np.concatenate([ch0[10 * j:10 * j + 10], ch1[10 * j:10 * j + 10]])
        np.testing.assert_array_equal(m.values[:, j], expected)


def test_segment_non_integral_rejected():
    block = np.zeros((1, 150))
    with pytest.raises(NonIntegralSegment):
        segment_window(block, WindowSpec(window_s=1.0, segment_ms=10.0), 150.0)  # 1.5 samples


def test_segment_wrong_block_length():
    block = np.zeros((1, 2000))
    with pytest.raises(ShapeMismatch):
        segment_window(block, WindowSpec(window_s=5.0, segment_ms=50.0), 500.0)


def test_segment_column_isolation():
    rng = np.random.default_rng(0)
    spec = WindowSpec(window_s=1.0, segment_ms=100.0)
    block = rng.normal(size=(3, 200))
    base = segment_window(block, spec, 200.0).values
    poked = block.copy()
    poked[:, 60:80] += 5.0  # segment 3 only (samples 60..79 at 20/segment)
    after = segment_window(poked, spec, 200.0).values
    changed = [j for j in range(10) if not np.array_equal(base[:, j], after[:, j])]
    assert changed == [3]


# --- normalization -------------------------------------------------------

def test_normalize_examples():
    np.testing.assert_allclose(normalize_segment(np.array([0.0, 5.0, 10.0])), [0.0, 0.5, 1.0])
    np.testing.assert_allclose(normalize_segment(np.array([3.0, 3.0, 3.0])), [0.5, 0.5, 0.5])
    np.testing.assert_allclose(normalize_segment(np.array([-2.0, 0.0, 6.0])), [0.0, 0.25, 1.0])


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(min_value=-1e6, max_value=1e6), min_size=1, max_size=40))
def test_normalize_stays_in_unit_interval(values):
    out = normalize_segment(np.array(values))
    assert out.min() >= 0.0 and out.max() <= 1.0


def test_normalize_matrix_matches_per_column():
    rng = np.random.default_rng(1)
    block = rng.normal(size=(2, 200))
    m = segment_window(block, WindowSpec(window_s=1.0, segment_ms=100.0), 200.0)
    full = normalize_matrix(m).values
    for j in range(m.cols):
        np.testing.assert_array_equal(full[:, j], normalize_segment(m.values[:, j]))


# --- color table ---------------------------------------------------------

def test_default_lut_shape_and_checksum():
    lut = ColorLut.default()
    assert lut.entries.shape == (256, 3)
    assert hashlib.sha256(lut.entries.tobytes()).hexdigest() == _viridis.TABLE_SHA256
    assert _viridis.TABLE_SHA256 == (
        "0c179522e5b97e7fffeca436042e89ccb0903546ffaf20f013fa6303b1ee684b"
    )


def test_default_lut_luminance_monotone():
    lum = luminance(ColorLut.default().entries)
    assert np.all(np.diff(lum) >= 0.0)


def test_colormap_endpoints_and_rounding():
    lut = ColorLut.default()
    out = apply_colormap(np.array([[0.0, 1.0, 0.5]]), lut)
    np.testing.assert_array_equal(out[0, 0], lut.entries[0])
    np.testing.assert_array_equal(out[0, 1], lut.entries[255])
    # 0.5 * 255 = 127.5, half rounds up
    np.testing.assert_array_equal(out[0, 2], lut.entries[128])


def test_colormap_ramp_hits_every_index_once():
    lut = ColorLut(entries=np.stack([np.arange(256)] * 3, axis=1).astype(np.uint8))
    ramp = np.linspace(0.0, 1.0, 256)[None, :]
    out = apply_colormap(ramp, lut)
    np.testing.assert_array_equal(out[0, :, 0], np.arange(256))


def test_colormap_rejects_out_of_range():
    with pytest.raises(ValueOutOfRange):
        apply_colormap(np.array([[1.00001]]), ColorLut.default())
    with pytest.raises(ValueOutOfRange):
        apply_colormap(np.array([[-0.00001]]), ColorLut.default())


def test_quantization_fidelity_on_grid():
    # values on the 256-level grid survive index round-trip within 1/255
    v = np.arange(256) / 255.0
    idx = np.floor(v * 255.0 + 0.5).astype(int)
    back = idx / 255.0
    assert np.abs(back - v).max() <= 1.0 / 255.0


def test_lut_file_roundtrip(tmp_path):
    path = tmp_path / "table.lut"
    path.write_bytes(ColorLut.default().entries.tobytes())
    lut = ColorLut.from_file(path)
    np.testing.assert_array_equal(lut.entries, ColorLut.default().entries)


# --- resize --------------------------------------------------------------

def test_resize_identity():
    rng = np.random.default_rng(2)
    img = rng.integers(0, 256, size=(25, 100, 3), dtype=np.uint8)
    np.testing.assert_array_equal(resize_nearest(img, 25, 100), img)


def test_resize_2x2_to_4x4_replicates_blocks():
    img = np.arange(12, dtype=np.uint8).reshape(2, 2, 3)
    out = resize_nearest(img, 4, 4)
    for y in range(4):
        for x in range(4):
            np.testing.assert_array_equal(out[y, x], img[y // 2, x // 2])


def test_resize_no_new_colors():
    rng = np.random.default_rng(3)
    img = rng.integers(0, 256, size=(25, 100, 3), dtype=np.uint8)
    out = resize_nearest(img, 224, 224)
    src = {tuple(p) for p in img.reshape(-1, 3)}
    dst = {tuple(p) for p in out.reshape(-1, 3)}
    assert dst <= src


@settings(max_examples=40, deadline=None)
@given(
    h=st.integers(1, 12), w=st.integers(1, 12),
    oh=st.integers(1, 20), ow=st.integers(1, 20),
)
def test_resize_matches_index_formula(h, w, oh, ow):
    rng = np.random.default_rng(h * 1000 + w * 100 + oh * 10 + ow)
    img = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
    out = resize_nearest(img, oh, ow)
    assert out.shape == (oh, ow, 3)
    for y in range(oh):
        for x in range(ow):
            np.testing.assert_array_equal(out[y, x], img[y * h // oh, x * w // ow])


def test_resize_zero_dimension():
    with pytest.raises(ZeroDimension):
        resize_nearest(np.zeros((2, 2, 3), dtype=np.uint8), 0, 4)


def test_resize_bilinear_shape_and_identity():
    rng = np.random.default_rng(4)
    img = rng.integers(0, 256, size=(8, 8, 3), dtype=np.uint8)
    out = resize_bilinear(img, 16, 16)
    assert out.shape == (16, 16, 3)
    np.testing.assert_array_equal(resize_bilinear(img, 8, 8), img)


# --- full encode ---------------------------------------------------------

def test_encode_shape_contract():
    rng = np.random.default_rng(5)
    block = rng.normal(size=(1, 2500))
    img = encode_window(block, WindowSpec(), 500.0)
    assert img.pixels.shape == (224, 224, 3)
    assert img.pixels.dtype == np.uint8


def test_encode_constant_block_hits_midpoint_color():
    lut = ColorLut.default()
    img = encode_window(np.zeros((1, 2500)), WindowSpec(), 500.0, lut=lut)
    assert np.array_equal(img.pixels.reshape(-1, 3),
                          np.tile(lut.entries[128], (224 * 224, 1)))


def test_encode_pure():
    rng = np.random.default_rng(6)
    block = rng.normal(size=(2, 2500))
    a = encode_window(block, WindowSpec(), 500.0, label=1, source_id="x", window_index=3)
    b = encode_window(block, WindowSpec(), 500.0, label=1, source_id="x", window_index=3)
    assert a.pixels.tobytes() == b.pixels.tobytes()
    assert (a.label, a.source_id, a.window_index) == (1, "x", 3)


def test_encode_pixels_stay_in_lut_palette():
    rng = np.random.default_rng(7)
    lut = ColorLut.default()
    img = encode_window(rng.normal(size=(1, 2500)), WindowSpec(), 500.0, lut=lut)
    palette = {tuple(p) for p in lut.entries}
    seen = {tuple(p) for p in img.pixels.reshape(-1, 3)}
    assert seen <= palette


def test_eeg_image_validation():
    with pytest.raises(ValueError):
        EegImage(pixels=np.zeros((4, 4), dtype=np.uint8))
