import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossiris.encoder import (
    IrisCode,
    LogGaborParams,
    code_to_image,
    dumps_code,
    encode,
    filter_rows,
    image_to_code,
    load_code,
    loads_code,
    log_gabor_transfer,
    save_code,
)
from crossiris.exceptions import MalformedCode
from crossiris.iso_image import ImageKind
from crossiris.segmentation import SegmentedPolar

from helpers import random_code, unpacked_similarity


def _band(values, mask=None):
    values = np.asarray(values, dtype=float)
    return SegmentedPolar(values, np.ones(values.shape, bool) if mask is None else mask)


def _fft_filter(x, params):
    """Frequency-domain reference: real part of ifft(fft(x - mean) * G)."""
    x = np.asarray(x, float)
    centred = x - x.mean(axis=-1, keepdims=True)
    g = log_gabor_transfer(x.shape[-1], params)
    return np.fft.ifft(np.fft.fft(centred, axis=-1) * g, axis=-1).real


def test_transfer_function_shape():
    g = log_gabor_transfer(360, LogGaborParams())
    f = np.fft.fftfreq(360)
    assert g[0] == 0 and (g[f < 0] == 0).all()
    # peak at the centre frequency 1/18, i.e. index 20
    assert np.argmax(g) == 20 and g[20] == pytest.approx(1.0)


def test_spatial_filter_matches_fft_reference():
    x = np.random.default_rng(0).normal(size=(32, 360)) * 40 + 120
    ours = filter_rows(x, LogGaborParams())
    ref = _fft_filter(x, LogGaborParams())
    # the spatial version is scaled by the row length
    assert np.allclose(ours / 360, ref, atol=1e-9)


def test_sinusoid_at_centre_frequency_gives_blocks_of_nine():
    # cos(2 pi n / 18): the real response is a scaled copy, positive for half of each period;
    # sample phases are multiples of 20 degrees and never hit a zero crossing
    n = np.arange(360)
    row = 128 + 60 * np.cos(2 * np.pi * n / 18)
    code = encode(_band(np.tile(row, (32, 1))))
    bits = code.bit_array()[0].astype(int)
    runs = np.diff(np.flatnonzero(np.diff(np.r_[bits, bits[0]]) != 0))
    assert set(runs.tolist()) == {9}
    assert bits.sum() == 180


def test_constant_rows_are_masked_out():
    values = np.random.default_rng(1).normal(120, 20, (32, 360))
    values[5] = 77
    code = encode(_band(values))
    assert not code.bit_array()[5].any()
    assert not code.mask_array()[5].any()
    assert code.mask_array()[[0, 6]].all()


def test_encode_is_deterministic():
    values = np.random.default_rng(2).integers(1, 255, (32, 360))
    assert encode(_band(values)) == encode(_band(values))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(-359, 359))
def test_rotation_covariance_is_exact(seed, shift):
    values = np.random.default_rng(seed).integers(1, 255, (32, 360))
    a = encode(_band(values))
    b = encode(_band(np.roll(values, shift, axis=1)))
    assert a.rotated(shift) == b


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(-50, 50))
def test_positive_affine_intensity_change_keeps_code(seed, gain, offset):
    values = np.random.default_rng(seed).integers(60, 190, (32, 360))
    a = encode(_band(values))
    b = encode(_band(values * gain + offset))
    assert a == b


def test_unrelated_textures_agree_about_half_the_time():
    rng = np.random.default_rng(3)
    codes = [encode(_band(rng.normal(128, 30, (32, 360)))) for _ in range(20)]
    sims = [unpacked_similarity(codes[i], codes[j]) for i in range(20) for j in range(i + 1, 20)]
    assert np.mean(sims) == pytest.approx(0.5, abs=0.02)


def test_code_layout_is_msb_first_row_major():
    bits = np.zeros((32, 360), bool)
    bits[0, 0] = True
    bits[1, 0] = True  # bit index 360 -> byte 45, top bit
    code = IrisCode.from_arrays(bits)
    assert code.bits[0] == 0x80 and code.bits[45] == 0x80
    assert code.bits.size == 1440


def test_rotate_and_complement():
    code = random_code(np.random.default_rng(4))
    assert code.rotated(7).rotated(-7) == code
    assert np.array_equal(code.rotated(1).bit_array()[:, 1], code.bit_array()[:, 0])
    assert unpacked_similarity(code, code.complement()) == 0.0


def test_odd_sized_code_has_zero_padding():
    code = IrisCode.from_arrays(np.ones((3, 3), bool))
    assert code.bits.tolist() == [0xFF, 0x80]


def test_ic01_round_trip(tmp_path):
    code = random_code(np.random.default_rng(5), mask_p=0.2)
    code = IrisCode(code.rows, code.cols, code.bits, code.mask, "probe/é_01")
    assert loads_code(dumps_code(code)) == code
    save_code(code, tmp_path / "c.ic01")
    assert load_code(tmp_path / "c.ic01") == code


def test_ic01_layout():
    code = IrisCode.from_arrays(np.ones((2, 4), bool), source_id="ab")
    assert dumps_code(code) == b"IRISCD01" + bytes([2, 0, 4, 0, 0xFF, 0xFF, 2, 0]) + b"ab"


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: b"IRISCD02" + d[8:],
        lambda d: d[:-1],
        lambda d: d + b"x",
        lambda d: d[:12],
    ],
)
def test_ic01_rejects_corruption(mutate):
    data = dumps_code(IrisCode.from_arrays(np.ones((2, 4), bool), source_id="ab"))
    with pytest.raises(MalformedCode):
        loads_code(mutate(data))


def test_ic01_rejects_nonzero_padding():
    data = bytearray(dumps_code(IrisCode.from_arrays(np.ones((3, 3), bool))))
    data[13] |= 0x01  # last bit byte carries 7 padding bits
    with pytest.raises(MalformedCode):
        loads_code(bytes(data))


def test_code_image_round_trip():
    code = random_code(np.random.default_rng(6))
    img = code_to_image(code)
    assert img.kind == ImageKind.BINARY_CODE
    assert set(np.unique(img.pixels)) <= {0, 255}
    assert image_to_code(img) == code
