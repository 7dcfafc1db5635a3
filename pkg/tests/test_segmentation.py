import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossiris.exceptions import BandTooThin, BoundaryNotFound, InsufficientValidity, NoPupilFound
from crossiris.iso_image import EyeImage, PolarImage
from crossiris.segmentation import (
    LimbicBoundary,
    SegmentedPolar,
    circular_moving_sum,
    detect_pupil,
    extract_band,
    find_limbic_boundary,
    fit_circle,
    fuzzy_two_means,
    otsu_threshold,
    segment,
)

from helpers import disc_image, step_polar


def test_otsu_splits_two_levels():
    px = np.array([10] * 50 + [200] * 50, dtype=np.uint8)
    t = otsu_threshold(px)
    assert 10 <= t < 200
    assert otsu_threshold(np.full(10, 7, np.uint8)) is None


def test_fit_circle_exact_on_circle_points():
    th = np.linspace(0, 2 * np.pi, 50, endpoint=False)
    pts = np.column_stack([3 + 7 * np.cos(th), -2 + 7 * np.sin(th)])
    cx, cy, r = fit_circle(pts)
    assert (cx, cy, r) == pytest.approx((3, -2, 7), abs=1e-9)


def test_pupil_on_100_random_discs():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        r = rng.uniform(25, 60)
        cx = rng.uniform(200, 440)
        cy = rng.uniform(160, 320)
        p = detect_pupil(disc_image(cx, cy, r))
        worst = max(worst, np.hypot(p.center[0] - cx, p.center[1] - cy), abs(p.radius - r))
    assert worst <= 1.0


def test_pupil_with_partial_occlusion():
    img = disc_image(320.3, 240.7, 45).pixels.copy()
    # a bright lid covers the top fifth of the pupil
    img[: int(240.7 - 45 + 18)] = 150
    p = detect_pupil(EyeImage(img))
    assert np.hypot(p.center[0] - 320.3, p.center[1] - 240.7) <= 3.0


def test_no_pupil_in_flat_or_noise_images():
    with pytest.raises(NoPupilFound):
        detect_pupil(EyeImage(np.full((200, 200), 128, np.uint8)))
    # at eye-image size the area floor (0.05%) is too high for chance clumps of dark noise
    noise = np.random.default_rng(0).integers(0, 256, (480, 640), dtype=np.uint8)
    with pytest.raises(NoPupilFound):
        detect_pupil(EyeImage(noise))


@settings(max_examples=25, deadline=None)
@given(st.integers(20, 100), st.integers(-12, 12), st.floats(0, 2 * np.pi))
def test_boundary_on_step_fields(base, amp, phase):
    theta = 2 * np.pi * np.arange(360) / 360
    rows = np.rint(base + amp * np.cos(theta + phase)).astype(int)
    rows = np.clip(rows, 10, 120)
    b = find_limbic_boundary(step_polar(rows))
    # a width-11 moving average can shift a slope of |amp| rows per radian by well under a row
    assert np.abs(b.radius_per_column - rows).max() <= 1.0


def test_boundary_ignores_a_span_of_outliers():
    rows = np.full(360, 60)
    polar = step_polar(rows).pixels.copy()
    # a spurious, stronger edge at row 25 over 40 degrees
    polar[25:60, 100:140] = 250
    b = find_limbic_boundary(PolarImage(polar, (0.0, 0.0), 10.0))
    assert np.abs(b.radius_per_column - 60).max() <= 1.0


def test_boundary_needs_enough_columns():
    flat = PolarImage(np.full((128, 360), 120, np.uint8), (0.0, 0.0), 10.0)
    with pytest.raises(BoundaryNotFound):
        find_limbic_boundary(flat)


def test_boundary_is_rotation_equivariant():
    rng = np.random.default_rng(5)
    theta = 2 * np.pi * np.arange(360) / 360
    rows = np.rint(60 + 8 * np.sin(theta) + 3 * np.cos(3 * theta)).astype(int)
    texture = rng.normal(0, 6, (128, 360))
    polar = step_polar(rows, texture=texture)
    b0 = find_limbic_boundary(polar)
    for shift in (1, 37, 200):
        rolled = PolarImage(np.roll(polar.pixels, shift, axis=1), (0.0, 0.0), 10.0)
        b1 = find_limbic_boundary(rolled)
        assert np.allclose(np.roll(b0.radius_per_column, shift), b1.radius_per_column, atol=1e-9)


def test_boundary_is_affine_invariant_in_intensity():
    theta = 2 * np.pi * np.arange(360) / 360
    rows = np.rint(50 + 6 * np.cos(theta)).astype(int)
    a = step_polar(rows, iris=60, sclera=100)
    b = step_polar(rows, iris=120, sclera=200)
    ra = find_limbic_boundary(a).radius_per_column
    rb = find_limbic_boundary(b).radius_per_column
    assert np.array_equal(ra, rb)


def test_fuzzy_two_means_separates_clusters():
    values = np.concatenate([np.zeros(30), np.full(10, 20.0)])
    centers, u = fuzzy_two_means(values)
    assert sorted(centers) == pytest.approx([0, 20], abs=1e-6)
    assert np.allclose(u.sum(axis=1), 1)


def test_circular_moving_sum_wraps():
    x = np.arange(6, dtype=float)
    assert circular_moving_sum(x, 1).tolist() == [6, 3, 6, 9, 12, 9]


def test_band_resamples_rows_linearly():
    polar = np.tile(np.arange(1, 129, dtype=np.uint8)[:, None], (1, 360))
    boundary = LimbicBoundary(np.full(360, 63.0), True, 63.0)
    seg = extract_band(PolarImage(polar, (0.0, 0.0), 10.0), boundary)
    # row k samples position k * 62 / 31 = 2k, whose value is 2k + 1
    assert np.allclose(seg.band[:, 0], 2 * np.arange(32) + 1)
    assert seg.validity_mask.all()


def test_band_masks_zero_samples():
    polar = np.full((128, 360), 90, np.uint8)
    polar[:, 90:180] = 0  # a wedge outside the source image
    boundary = LimbicBoundary(np.full(360, 50.0), True, 50.0)
    seg = extract_band(PolarImage(polar, (0.0, 0.0), 10.0), boundary)
    assert not seg.validity_mask[:, 90:180].any()
    assert seg.validity_mask[:, :90].all() and seg.validity_mask[:, 180:].all()
    assert seg.valid_fraction == pytest.approx(0.75)


def test_band_too_thin():
    boundary = LimbicBoundary(np.full(360, 7.0), True, 7.0)
    with pytest.raises(BandTooThin):
        extract_band(PolarImage(np.full((128, 360), 90, np.uint8), (0.0, 0.0), 10.0), boundary)


def test_segment_rejects_mostly_invalid_band():
    rows = np.full(360, 60)
    px = step_polar(rows).pixels.copy()
    px[:, :200] = 0
    with pytest.raises((InsufficientValidity, BoundaryNotFound)):
        segment(PolarImage(px, (0.0, 0.0), 10.0))


def test_segmented_polar_save_load(tmp_path):
    rng = np.random.default_rng(1)
    band = rng.integers(1, 255, (32, 360)).astype(float)
    mask = rng.random((32, 360)) > 0.2
    seg = SegmentedPolar(band, mask)
    path, mask_path = seg.save(tmp_path / "band.pgm")
    back = SegmentedPolar.load(path)
    assert np.array_equal(back.band, band)
    assert np.array_equal(back.validity_mask, mask)
