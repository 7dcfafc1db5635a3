"""Eye image containers, PGM I/O, region-of-interest cropping and polar unwrapping.

The pipeline follows the ISO/IEC 19794-6 image-kind progression: a full
rectilinear eye image (KIND 1) is cropped to a pupil-centred region of
interest (KIND 48) and unwrapped into an unsegmented polar image (KIND 16).
Kinds are carried as metadata only.

Pixel coordinates: pixel ``pixels[i, j]`` has its centre at ``(x=j, y=i)``.
"""

from __future__ import annotations

import enum
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidPupil, MalformedImage

ANGULAR_RESOLUTION = 360
DEFAULT_RADIAL_RESOLUTION = 128
DEFAULT_MARGIN_FACTOR = 4.0
MIN_FULL_SIDE = 64


class ImageKind(enum.IntEnum):
    RECTILINEAR_FULL = 1
    RECTILINEAR_ROI = 48
    POLAR = 16
    # visualisation of a binary code, not part of the ISO kind set
    BINARY_CODE = 0


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EyeImage:
    """8-bit grayscale rectilinear image.

    ``origin`` is the (x, y) position of the top-left pixel in the image this
    one was cropped from; (0, 0) for images that were not cropped.
    """

    pixels: np.ndarray
    kind: ImageKind = ImageKind.RECTILINEAR_FULL
    origin: tuple[int, int] = (0, 0)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise MalformedImage(f"expected a 2-D pixel array, got shape {px.shape}")
        if px.dtype != np.uint8:
            if not np.issubdtype(px.dtype, np.integer) or px.size and (px.min() < 0 or px.max() > 255):
                raise MalformedImage("pixels must be 8-bit unsigned integers")
            px = px.astype(np.uint8)
        if self.kind == ImageKind.RECTILINEAR_FULL and (
            px.shape[0] < MIN_FULL_SIDE or px.shape[1] < MIN_FULL_SIDE
        ):
            raise MalformedImage(
                f"full eye images must be at least {MIN_FULL_SIDE}x{MIN_FULL_SIDE}, "
                f"got {px.shape[1]}x{px.shape[0]}"
            )
        object.__setattr__(self, "pixels", _frozen(px))
        object.__setattr__(self, "kind", ImageKind(self.kind))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class PupilDescriptor:
    center: tuple[float, float]
    radius: float
    boundary_confidence: float = 1.0

    def __post_init__(self):
        if not self.radius > 0:
            raise InvalidPupil(f"pupil radius must be positive, got {self.radius}")
        if not 0.0 <= self.boundary_confidence <= 1.0:
            raise InvalidPupil("boundary_confidence must lie in [0, 1]")
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        object.__setattr__(self, "radius", float(self.radius))

    def check_inside(self, image: EyeImage) -> None:
        x, y = self.center
        if not (0 <= x <= image.width - 1 and 0 <= y <= image.height - 1):
            raise InvalidPupil(
                f"pupil centre ({x:.2f}, {y:.2f}) lies outside a "
                f"{image.width}x{image.height} image"
            )


@dataclass(frozen=True)
class PolarImage:
    """Pupil-centred polar image: rows are radii, columns are angles.

    Row 0 samples the pupil boundary and row ``r`` samples radius
    ``pupil_radius + r * radial_step``. Column ``a`` samples angle
    ``2*pi*a/360``. Zero-valued pixels mark samples taken outside the source.
    """

    pixels: np.ndarray
    pupil_center: tuple[float, float]
    pupil_radius: float
    radial_step: float = 1.0
    kind: ImageKind = field(default=ImageKind.POLAR, init=False)

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.shape[1] != ANGULAR_RESOLUTION:
            raise MalformedImage(
                f"polar images need {ANGULAR_RESOLUTION} angle columns, got shape {px.shape}"
            )
        if px.dtype != np.uint8:
            px = np.clip(np.rint(px), 0, 255).astype(np.uint8)
        object.__setattr__(self, "pixels", _frozen(px))

    @property
    def angular_resolution(self) -> int:
        return self.pixels.shape[1]

    @property
    def radial_resolution(self) -> int:
        return self.pixels.shape[0]


# --------------------------------------------------------------------------
# PGM container


def encode_pgm(pixels: np.ndarray) -> bytes:
    pixels = np.asarray(pixels, dtype=np.uint8)
    h, w = pixels.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(pixels).tobytes()


def decode_pgm(data: bytes) -> np.ndarray:
    """Parse a binary (P5) PGM with maxval 255 into an ``(h, w)`` uint8 array."""
    if data[:2] != b"P5":
        raise MalformedImage("bad magic number, expected binary PGM 'P5'")
    tokens: list[bytes] = []
    pos = 2
    n = len(data)
    while len(tokens) < 3:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise MalformedImage("truncated PGM header")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    if pos >= n or not data[pos : pos + 1].isspace():
        raise MalformedImage("truncated PGM header")
    pos += 1
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise MalformedImage(f"non-numeric PGM header field: {exc}") from None
    if w <= 0 or h <= 0:
        raise MalformedImage(f"invalid PGM dimensions {w}x{h}")
    if maxval != 255:
        raise MalformedImage(f"only 8-bit PGM (maxval 255) is supported, got maxval {maxval}")
    payload = data[pos:]
    if len(payload) != w * h:
        raise MalformedImage(
            f"PGM payload holds {len(payload)} bytes, header requires {w * h}"
        )
    return np.frombuffer(payload, dtype=np.uint8).reshape(h, w).copy()


def load_image(path: str | os.PathLike) -> EyeImage:
    """Read a full rectilinear eye image from a binary PGM file."""
    with open(path, "rb") as fh:
        data = fh.read()
    return EyeImage(decode_pgm(data), ImageKind.RECTILINEAR_FULL)


def save_image(image: EyeImage | PolarImage | np.ndarray, path: str | os.PathLike) -> None:
    pixels = image if isinstance(image, np.ndarray) else image.pixels
    with open(path, "wb") as fh:
        fh.write(encode_pgm(pixels))


def load_polar(path: str | os.PathLike, pupil_center=(0.0, 0.0), pupil_radius=1.0, radial_step=1.0) -> PolarImage:
    with open(path, "rb") as fh:
        pixels = decode_pgm(fh.read())
    return PolarImage(pixels, pupil_center, pupil_radius, radial_step)


# --------------------------------------------------------------------------
# geometry


def crop_roi(image: EyeImage, pupil: PupilDescriptor, margin_factor: float = DEFAULT_MARGIN_FACTOR) -> EyeImage:
    """Square pupil-centred crop of side ``2 * margin_factor * radius``.

    Output pixels falling outside the source image are zero.
    """
    if not margin_factor >= 1:
        raise ValueError(f"margin_factor must be >= 1, got {margin_factor}")
    pupil.check_inside(image)
    side = max(1, int(round(2 * margin_factor * pupil.radius)))
    x0 = math.floor(pupil.center[0] - side / 2 + 0.5)
    y0 = math.floor(pupil.center[1] - side / 2 + 0.5)

    out = np.zeros((side, side), dtype=np.uint8)
    sx0, sy0 = max(x0, 0), max(y0, 0)
    sx1, sy1 = min(x0 + side, image.width), min(y0 + side, image.height)
    if sx1 > sx0 and sy1 > sy0:
        out[sy0 - y0 : sy1 - y0, sx0 - x0 : sx1 - x0] = image.pixels[sy0:sy1, sx0:sx1]
    return EyeImage(out, ImageKind.RECTILINEAR_ROI, origin=(x0 + image.origin[0], y0 + image.origin[1]))


def pupil_in_roi(pupil: PupilDescriptor, roi: EyeImage) -> PupilDescriptor:
    """Express a pupil found in the full image in the coordinates of ``roi``."""
    x, y = pupil.center
    return PupilDescriptor((x - roi.origin[0], y - roi.origin[1]), pupil.radius, pupil.boundary_confidence)


def bilinear_sample(pixels: np.ndarray, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Bilinear samples at float coordinates; returns ``(values, inside)``.

    Points outside ``[0, w-1] x [0, h-1]`` get value 0 and ``inside`` False.
    """
    src = np.asarray(pixels, dtype=np.float64)
    h, w = src.shape
    inside = (x >= 0) & (x <= w - 1) & (y >= 0) & (y <= h - 1)
    xc = np.where(inside, x, 0.0)
    yc = np.where(inside, y, 0.0)
    ix = np.minimum(np.floor(xc).astype(np.intp), max(w - 2, 0))
    iy = np.minimum(np.floor(yc).astype(np.intp), max(h - 2, 0))
    fx = xc - ix
    fy = yc - iy
    ix1 = np.minimum(ix + 1, w - 1)
    iy1 = np.minimum(iy + 1, h - 1)
    top = src[iy, ix] * (1 - fx) + src[iy, ix1] * fx
    bottom = src[iy1, ix] * (1 - fx) + src[iy1, ix1] * fx
    values = top * (1 - fy) + bottom * fy
    return np.where(inside, values, 0.0), inside


def polar_grid(pupil: PupilDescriptor, radial_resolution: int, radial_step: float):
    theta = 2 * np.pi * np.arange(ANGULAR_RESOLUTION) / ANGULAR_RESOLUTION
    radii = pupil.radius + np.arange(radial_resolution) * radial_step
    x = pupil.center[0] + radii[:, None] * np.cos(theta)[None, :]
    y = pupil.center[1] + radii[:, None] * np.sin(theta)[None, :]
    return x, y


def unwrap_polar(
    image: EyeImage,
    pupil: PupilDescriptor,
    radial_resolution: int = DEFAULT_RADIAL_RESOLUTION,
    margin_factor: float = DEFAULT_MARGIN_FACTOR,
) -> PolarImage:
    """Resample the annulus around the pupil onto a 360-column polar grid.

    Radii run from the pupil boundary to ``margin_factor * radius``, which is
    the inscribed circle of the region of interest produced by :func:`crop_roi`
    with the same margin.
    """
    if radial_resolution < 32:
        raise ValueError(f"radial_resolution must be >= 32, got {radial_resolution}")
    if not margin_factor > 1:
        raise ValueError(f"margin_factor must be > 1 for unwrapping, got {margin_factor}")
    pupil.check_inside(image)
    step = (margin_factor - 1.0) * pupil.radius / (radial_resolution - 1)
    x, y = polar_grid(pupil, radial_resolution, step)
    values, _ = bilinear_sample(image.pixels, x, y)
    pixels = np.clip(np.rint(values), 0, 255).astype(np.uint8)
    return PolarImage(pixels, pupil.center, pupil.radius, step)
