"""Pupil detection, limbic boundary search and iris band extraction."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from skimage.measure import perimeter

from .exceptions import BandTooThin, BoundaryNotFound, InsufficientValidity, NoPupilFound
from .iso_image import (
    ANGULAR_RESOLUTION,
    EyeImage,
    ImageKind,
    PolarImage,
    PupilDescriptor,
    decode_pgm,
    encode_pgm,
)

BAND_ROWS = 32
MIN_PUPIL_AREA_FRACTION = 0.0005
MIN_CIRCULARITY = 0.6
MIN_BAND_ROWS = 8
MIN_VALID_FRACTION = 0.5
GRADIENT_HALF_WINDOW = 5
SMOOTHING_WIDTH = 11
MIN_PEAK_COLUMNS = 180


# --------------------------------------------------------------------------
# pupil


def otsu_threshold(pixels: np.ndarray) -> int | None:
    """Otsu threshold on the 256-bin histogram; classes are ``<= t`` and ``> t``.

    Returns None for single-valued images, where no split exists.
    """
    hist = np.bincount(np.asarray(pixels, dtype=np.uint8).ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    levels = np.arange(256, dtype=np.float64)
    w0 = np.cumsum(hist)[:-1]
    w1 = total - w0
    m0 = np.cumsum(hist * levels)[:-1]
    m1 = (hist * levels).sum() - m0
    valid = (w0 > 0) & (w1 > 0)
    if not valid.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        between = w0 * w1 * (m0 / w0 - m1 / w1) ** 2
    between[~valid] = -1.0
    return int(np.argmax(between))


def _edge_points(mask: np.ndarray) -> np.ndarray:
    """Sub-pixel boundary points halfway between inside and outside 4-neighbours."""
    padded = np.pad(mask, 1)
    pts = []
    for dy, dx in ((0, 1), (0, -1), (1, 0), (-1, 0)):
        neighbour = padded[1 + dy : padded.shape[0] - 1 + dy, 1 + dx : padded.shape[1] - 1 + dx]
        ys, xs = np.nonzero(mask & ~neighbour)
        pts.append(np.column_stack([xs + 0.5 * dx, ys + 0.5 * dy]))
    return np.concatenate(pts).astype(np.float64)


def fit_circle(points: np.ndarray) -> tuple[float, float, float]:
    """Algebraic least-squares circle fit; returns ``(cx, cy, r)``."""
    x, y = points[:, 0], points[:, 1]
    mx, my = x.mean(), y.mean()
    u, v = x - mx, y - my
    design = np.column_stack([u, v, np.ones_like(u)])
    rhs = -(u * u + v * v)
    (d, e, f), *_ = np.linalg.lstsq(design, rhs, rcond=None)
    cx, cy = -d / 2, -e / 2
    r2 = cx * cx + cy * cy - f
    return float(cx + mx), float(cy + my), float(np.sqrt(max(r2, 0.0)))


def robust_fit_circle(points: np.ndarray, max_iter: int = 20) -> tuple[float, float, float, np.ndarray]:
    """Circle fit with iterative trimming of points far from the current circle.

    Straight occluder edges (eyelid analogues) get peeled away because they sit
    well inside the circle fitted to the whole boundary.
    """
    keep = np.ones(len(points), dtype=bool)
    cx, cy, r = fit_circle(points)
    for _ in range(max_iter):
        resid = np.hypot(points[:, 0] - cx, points[:, 1] - cy) - r
        inl = np.abs(resid[keep])
        mad = np.median(np.abs(inl - np.median(inl)))
        tol = max(1.0, 3.0 * 1.4826 * mad)
        new_keep = np.abs(resid) <= tol
        if new_keep.sum() < 8 or np.array_equal(new_keep, keep):
            break
        keep = new_keep
        cx, cy, r = fit_circle(points[keep])
    return cx, cy, r, keep


def _circular_component(dark: np.ndarray, min_area: float):
    """Largest connected component of ``dark`` passing the area and circularity tests."""
    labels, n = ndimage.label(dark)
    if n == 0:
        return None
    areas = np.bincount(labels.ravel())[1:]
    slices = ndimage.find_objects(labels)
    for idx in np.argsort(-areas, kind="stable"):
        if areas[idx] < min_area:
            return None
        sl = slices[idx]
        # pad by one so the perimeter estimate sees the blob edge
        sub = ndimage.binary_fill_holes(np.pad(labels[sl] == idx + 1, 1))
        per = perimeter(sub, neighborhood=4)
        if per > 0 and 4 * np.pi * sub.sum() / (per * per) >= MIN_CIRCULARITY:
            return sl, sub
    return None


def detect_pupil(image: EyeImage) -> PupilDescriptor:
    """Locate the pupil as the largest dark, roughly circular blob.

    Otsu's threshold splits the histogram and the darker class is kept. Eye
    images usually hold three intensity populations (pupil, iris, sclera), so
    the split is repeated inside the darker class for as long as it still
    yields a valid blob; the deepest valid blob wins.
    """
    if image.kind != ImageKind.RECTILINEAR_FULL:
        raise ValueError("detect_pupil expects a full rectilinear eye image")
    pixels = image.pixels
    min_area = MIN_PUPIL_AREA_FRACTION * pixels.size
    best = None
    t = otsu_threshold(pixels)
    if t is None:
        raise NoPupilFound("image is uniform")
    while t is not None:
        dark = pixels <= t
        if dark.sum() < min_area:
            break
        found = _circular_component(dark, min_area)
        if found is None and best is not None:
            break
        best = found or best
        t_next = otsu_threshold(pixels[dark])
        t = t_next if t_next is not None and t_next < t else None
    if best is None:
        raise NoPupilFound(
            f"no dark component with area >= {min_area:.0f} px and circularity >= {MIN_CIRCULARITY}"
        )

    sl, sub = best
    pts = _edge_points(sub)
    # undo the padding and the bounding-box offset
    pts[:, 0] += sl[1].start - 1
    pts[:, 1] += sl[0].start - 1
    cx, cy, r, _ = robust_fit_circle(pts)
    resid = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy) - r
    rms = float(np.sqrt(np.mean(resid**2)))
    confidence = 1.0 - min(max(rms / r, 0.0), 1.0) if r > 0 else 0.0
    cx = min(max(cx, 0.0), image.width - 1.0)
    cy = min(max(cy, 0.0), image.height - 1.0)
    if r <= 0:
        raise NoPupilFound("degenerate circle fit")
    return PupilDescriptor((cx, cy), r, confidence)


# --------------------------------------------------------------------------
# limbic boundary


@dataclass(frozen=True)
class LimbicBoundary:
    """Per-column limbic radius, in polar rows (fractional after smoothing)."""

    radius_per_column: np.ndarray
    smoothed: bool
    mean_radius: float

    def __post_init__(self):
        radii = np.asarray(self.radius_per_column, dtype=np.float64)
        if radii.shape != (ANGULAR_RESOLUTION,):
            raise ValueError(f"expected {ANGULAR_RESOLUTION} radii, got shape {radii.shape}")
        radii.setflags(write=False)
        object.__setattr__(self, "radius_per_column", radii)


def circular_moving_sum(values: np.ndarray, half_width: int, axis: int = -1) -> np.ndarray:
    """Sum over a circular window of ``2*half_width + 1`` along ``axis``.

    Terms are always added in offset order, so rotating the input rotates the
    output bit for bit.
    """
    out = np.zeros_like(values, dtype=np.float64)
    for off in range(-half_width, half_width + 1):
        out += np.roll(values, -off, axis=axis)
    return out


def fuzzy_two_means(values: np.ndarray, m: float = 2.0, max_iter: int = 100, tol: float = 1e-9):
    """1-D fuzzy c-means with two clusters.

    The first cluster starts at the median (the bulk of the data), the second at
    the value farthest from it. Returns ``(centers, memberships)`` where
    ``memberships[:, 0]`` is the degree of belonging to the bulk cluster.
    """
    v = np.sort(np.asarray(values, dtype=np.float64))
    med = float(np.median(v))
    far = float(v[np.argmax(np.abs(v - med))])
    centers = np.array([med, far])
    if far == med:
        return centers, np.column_stack([np.ones(len(values)), np.zeros(len(values))])
    expo = 2.0 / (m - 1.0)

    def memberships(x):
        d = np.abs(x[:, None] - centers[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = np.where(d > 0, d ** (-expo), np.inf)
            u = inv / inv.sum(axis=1, keepdims=True)
        exact = np.isinf(inv)
        if exact.any():
            rows = exact.any(axis=1)
            u[rows] = exact[rows] / exact[rows].sum(axis=1, keepdims=True)
        return u

    for _ in range(max_iter):
        um = memberships(v) ** m
        new = (um * v[:, None]).sum(axis=0) / um.sum(axis=0)
        done = np.max(np.abs(new - centers)) < tol
        centers = new
        if done:
            break
    return centers, memberships(np.asarray(values, dtype=np.float64))


def _circular_interpolate(values: np.ndarray, good: np.ndarray) -> np.ndarray:
    n = len(values)
    idx = np.arange(n)
    gi = idx[good]
    # unroll one period on each side so neighbours wrap around
    xs = np.concatenate([gi - n, gi, gi + n])
    ys = np.tile(values[good], 3)
    out = values.astype(np.float64).copy()
    out[~good] = np.interp(idx[~good], xs, ys)
    return out


def find_limbic_boundary(
    polar: PolarImage,
    *,
    min_row: int = MIN_BAND_ROWS,
    pre_blur: float = 0.0,
    min_step: float = 1.0,
    noise_factor: float = 3.0,
    outlier_separation: float = 4.0,
) -> LimbicBoundary:
    """Find the iris/sclera boundary in every column of a polar image.

    Steps: per-column peak of the outward intensity gradient (averaged over
    +/-5 columns); two-cluster fuzzy membership of the candidate radii after
    removing their first circular harmonic (an off-centre circle), columns with
    bulk membership below 0.5 re-filled by circular interpolation; then a
    circular moving average of width 11.
    """
    p = polar.pixels
    rows = p.shape[0]
    if rows < 64:
        raise ValueError(f"polar image needs >= 64 radial rows, got {rows}")
    img = p.astype(np.float64)
    if pre_blur > 0:
        img = ndimage.gaussian_filter(img, pre_blur, mode=("nearest", "wrap"))
    grad = img[1:] - img[:-1]
    grad[(p[1:] == 0) | (p[:-1] == 0)] = 0.0
    grad = circular_moving_sum(grad, GRADIENT_HALF_WINDOW, axis=1) / (2 * GRADIENT_HALF_WINDOW + 1)

    lo = max(min_row - 1, 0)
    search = grad[lo:]
    peak_row = np.argmax(search, axis=0)
    peak_val = search[peak_row, np.arange(ANGULAR_RESOLUTION)]
    med = np.median(grad)
    noise = 1.4826 * np.median(np.abs(grad - med))
    floor = max(min_step, med + noise_factor * noise)
    has_peak = peak_val > floor
    if has_peak.sum() < MIN_PEAK_COLUMNS:
        raise BoundaryNotFound(
            f"only {int(has_peak.sum())} columns show a gradient peak above the noise floor"
        )
    candidates = (peak_row + lo + 1).astype(np.float64)

    theta = 2 * np.pi * np.arange(ANGULAR_RESOLUTION) / ANGULAR_RESOLUTION
    design = np.column_stack([np.ones_like(theta), np.cos(theta), np.sin(theta)])
    coef, *_ = np.linalg.lstsq(design[has_peak], candidates[has_peak], rcond=None)
    resid = candidates - design @ coef

    good = has_peak.copy()
    centers, u = fuzzy_two_means(resid[has_peak])
    if abs(centers[1] - centers[0]) >= outlier_separation:
        k = 0 if u[:, 0].sum() >= u[:, 1].sum() else 1
        bulk = u[:, k] >= 0.5
        good[np.flatnonzero(has_peak)[~bulk]] = False
    if good.sum() < 2:
        raise BoundaryNotFound("too few consistent boundary columns")
    radii = _circular_interpolate(candidates, good)

    half = SMOOTHING_WIDTH // 2
    for _ in range(50):
        radii = circular_moving_sum(radii, half) / SMOOTHING_WIDTH
        if np.max(np.abs(radii - np.roll(radii, 1))) <= 2.0:
            break
    radii = np.clip(radii, 1.0, rows - 1.0)
    return LimbicBoundary(radii, True, float(radii.mean()))


# --------------------------------------------------------------------------
# band


@dataclass(frozen=True)
class SegmentedPolar:
    """Iris band resampled to 32 x 360 plus a mask of in-bounds samples."""

    band: np.ndarray
    validity_mask: np.ndarray

    def __post_init__(self):
        band = np.asarray(self.band, dtype=np.float64)
        mask = np.asarray(self.validity_mask, dtype=bool)
        if band.shape != (BAND_ROWS, ANGULAR_RESOLUTION) or mask.shape != band.shape:
            raise ValueError(
                f"band and mask must be {BAND_ROWS}x{ANGULAR_RESOLUTION}, "
                f"got {band.shape} and {mask.shape}"
            )
        band.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "band", band)
        object.__setattr__(self, "validity_mask", mask)

    @property
    def valid_fraction(self) -> float:
        return float(self.validity_mask.mean())

    @property
    def is_accepted(self) -> bool:
        return self.valid_fraction >= MIN_VALID_FRACTION

    def save(self, path: str | os.PathLike) -> tuple[str, str]:
        """Write the band as PGM and the mask as a 0/255 PGM sidecar."""
        path = os.fspath(path)
        mask_path = os.path.splitext(path)[0] + ".mask.pgm"
        with open(path, "wb") as fh:
            fh.write(encode_pgm(np.clip(np.rint(self.band), 0, 255).astype(np.uint8)))
        with open(mask_path, "wb") as fh:
            fh.write(encode_pgm(self.validity_mask.astype(np.uint8) * 255))
        return path, mask_path

    @classmethod
    def load(cls, path: str | os.PathLike) -> SegmentedPolar:
        path = os.fspath(path)
        with open(path, "rb") as fh:
            band = decode_pgm(fh.read())
        with open(os.path.splitext(path)[0] + ".mask.pgm", "rb") as fh:
            mask = decode_pgm(fh.read())
        return cls(band.astype(np.float64), mask > 127)


def extract_band(polar: PolarImage, boundary: LimbicBoundary, rows: int = BAND_ROWS) -> SegmentedPolar:
    """Resample rows ``[0, radius)`` of each column to exactly ``rows`` samples."""
    radii = boundary.radius_per_column
    if boundary.mean_radius < MIN_BAND_ROWS or radii.min() < MIN_BAND_ROWS:
        raise BandTooThin(
            f"limbic boundary as close as {radii.min():.1f} rows to the pupil "
            f"(minimum {MIN_BAND_ROWS})"
        )
    src = polar.pixels
    n_rows = src.shape[0]
    pos = np.arange(rows)[:, None] * (np.minimum(radii, n_rows) - 1.0)[None, :] / (rows - 1)
    low = np.minimum(np.floor(pos).astype(np.intp), n_rows - 1)
    frac = pos - low
    high = np.minimum(low + 1, n_rows - 1)
    cols = np.broadcast_to(np.arange(src.shape[1]), pos.shape)
    a = src[low, cols].astype(np.float64)
    b = src[high, cols].astype(np.float64)
    band = a * (1 - frac) + b * frac
    valid = (a != 0) & ((frac == 0) | (b != 0))
    return SegmentedPolar(np.where(frac == 0, a, band), valid)


def segment(polar: PolarImage, **kwargs) -> SegmentedPolar:
    """Boundary search plus band extraction; rejects bands with too few valid samples."""
    seg = extract_band(polar, find_limbic_boundary(polar, **kwargs))
    if not seg.is_accepted:
        raise InsufficientValidity(
            f"only {seg.valid_fraction:.0%} of the band lies inside the image"
        )
    return seg
