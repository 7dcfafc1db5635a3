"""Log-Gabor phase encoding of iris bands into 32 x 360 binary codes."""

from __future__ import annotations

import functools
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .exceptions import MalformedCode
from .iso_image import EyeImage, ImageKind
from .segmentation import SegmentedPolar

CODE_ROWS = 32
CODE_COLS = 360
IC01_MAGIC = b"IRISCD01"


@dataclass(frozen=True)
class LogGaborParams:
    center_wavelength: float = 18.0
    sigma_over_f0: float = 0.55

    def __post_init__(self):
        if not self.center_wavelength >= 3:
            raise ValueError(f"center_wavelength must be >= 3, got {self.center_wavelength}")
        if not 0 < self.sigma_over_f0 < 1:
            raise ValueError(f"sigma_over_f0 must lie in (0, 1), got {self.sigma_over_f0}")


def _packed_len(nbits: int) -> int:
    return (nbits + 7) // 8


def _words(packed: np.ndarray) -> np.ndarray:
    """Zero-pad packed bytes to a multiple of 8 and view them as uint64 words."""
    n = len(packed)
    buf = np.zeros(((n + 7) // 8) * 8, dtype=np.uint8)
    buf[:n] = packed
    return buf.view(np.uint64)


@dataclass(frozen=True, eq=False)
class IrisCode:
    """Bit-packed binary iris code with a validity mask of the same layout.

    Bits are stored row-major, most significant bit first within each byte.
    Padding bits in the final byte are always zero.
    """

    rows: int
    cols: int
    bits: np.ndarray
    mask: np.ndarray
    source_id: str = ""
    words: np.ndarray = field(init=False, repr=False)
    mask_words: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = _packed_len(self.rows * self.cols)
        bits = np.ascontiguousarray(self.bits, dtype=np.uint8).ravel()
        mask = np.ascontiguousarray(self.mask, dtype=np.uint8).ravel()
        if bits.shape != (n,) or mask.shape != (n,):
            raise MalformedCode(
                f"a {self.rows}x{self.cols} code needs {n} packed bytes, "
                f"got {bits.size} bits and {mask.size} mask bytes"
            )
        pad = n * 8 - self.rows * self.cols
        if pad:
            keep = np.uint8((0xFF << pad) & 0xFF)
            bits = bits.copy()
            mask = mask.copy()
            bits[-1] &= keep
            mask[-1] &= keep
        for name, arr in (("bits", bits), ("mask", mask)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name, arr in (("words", _words(bits)), ("mask_words", _words(mask))):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_arrays(cls, bits: np.ndarray, mask: np.ndarray | None = None, source_id: str = "") -> IrisCode:
        bits = np.asarray(bits, dtype=bool)
        if bits.ndim != 2:
            raise MalformedCode(f"expected a 2-D bit array, got shape {bits.shape}")
        mask = np.ones_like(bits) if mask is None else np.asarray(mask, dtype=bool)
        if mask.shape != bits.shape:
            raise MalformedCode("bit and mask arrays differ in shape")
        rows, cols = bits.shape
        return cls(rows, cols, np.packbits(bits, axis=None), np.packbits(mask, axis=None), source_id)

    @property
    def nbits(self) -> int:
        return self.rows * self.cols

    def bit_array(self) -> np.ndarray:
        return np.unpackbits(self.bits, count=self.nbits).reshape(self.rows, self.cols).astype(bool)

    def mask_array(self) -> np.ndarray:
        return np.unpackbits(self.mask, count=self.nbits).reshape(self.rows, self.cols).astype(bool)

    def rotated(self, shift: int) -> IrisCode:
        """Column rotation: column ``c`` of the result is column ``c - shift`` of this code."""
        return IrisCode.from_arrays(
            np.roll(self.bit_array(), shift, axis=1),
            np.roll(self.mask_array(), shift, axis=1),
            self.source_id,
        )

    def complement(self) -> IrisCode:
        return IrisCode.from_arrays(~self.bit_array(), self.mask_array(), self.source_id)

    def __eq__(self, other):
        if not isinstance(other, IrisCode):
            return NotImplemented
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and np.array_equal(self.bits, other.bits)
            and np.array_equal(self.mask, other.mask)
            and self.source_id == other.source_id
        )

    __hash__ = None


# --------------------------------------------------------------------------
# filtering


def log_gabor_transfer(n: int, params: LogGaborParams) -> np.ndarray:
    """One-sided Log-Gabor transfer function sampled on ``np.fft.fftfreq(n)``."""
    freqs = np.fft.fftfreq(n)
    f0 = 1.0 / params.center_wavelength
    g = np.zeros(n)
    pos = freqs > 0
    g[pos] = np.exp(-(np.log(freqs[pos] / f0) ** 2) / (2 * np.log(params.sigma_over_f0) ** 2))
    return g


@functools.lru_cache(maxsize=16)
def _real_kernel(n: int, params: LogGaborParams) -> np.ndarray:
    kernel = np.fft.ifft(log_gabor_transfer(n, params)).real
    kernel.setflags(write=False)
    return kernel


def filter_rows(band: np.ndarray, params: LogGaborParams = LogGaborParams()) -> np.ndarray:
    """Real part of the Log-Gabor response of every row, up to a positive scale.

    Each row is centred (scaled by its length, which keeps integer inputs exact)
    and circularly convolved with the inverse DFT of the transfer function. The
    convolution adds terms in a fixed lag order, so column-rotating the input
    rotates the output bit for bit.
    """
    x = np.asarray(band, dtype=np.float64)
    n = x.shape[-1]
    centred = n * x - x.sum(axis=-1, keepdims=True)
    kernel = _real_kernel(n, params)
    out = np.zeros_like(centred)
    for lag in range(n):
        out += kernel[lag] * np.roll(centred, lag, axis=-1)
    return out


def encode(band: SegmentedPolar, params: LogGaborParams = LogGaborParams(), source_id: str = "") -> IrisCode:
    """One phase bit per band sample: 1 where the real response is >= 0.

    Constant rows have no usable phase; they encode as zeros with the mask
    cleared.
    """
    x = band.band
    response = filter_rows(x, params)
    bits = response >= 0
    degenerate = np.ptp(x, axis=1) == 0
    bits[degenerate] = False
    mask = band.validity_mask & ~degenerate[:, None]
    return IrisCode.from_arrays(bits, mask, source_id)


# --------------------------------------------------------------------------
# conversions and file format


def code_to_image(code: IrisCode) -> EyeImage:
    return EyeImage(code.bit_array().astype(np.uint8) * 255, ImageKind.BINARY_CODE)


def image_to_code(image: EyeImage | np.ndarray, mask: np.ndarray | None = None, source_id: str = "") -> IrisCode:
    pixels = image.pixels if isinstance(image, EyeImage) else np.asarray(image)
    return IrisCode.from_arrays(pixels > 127, mask, source_id)


def dumps_code(code: IrisCode) -> bytes:
    label = code.source_id.encode("utf-8")
    if len(label) > 0xFFFF:
        raise MalformedCode("source_id longer than 65535 bytes")
    return b"".join(
        [
            IC01_MAGIC,
            struct.pack("<HH", code.rows, code.cols),
            code.bits.tobytes(),
            code.mask.tobytes(),
            struct.pack("<H", len(label)),
            label,
        ]
    )


def loads_code(data: bytes) -> IrisCode:
    if data[:8] != IC01_MAGIC:
        raise MalformedCode("bad magic, expected IRISCD01")
    if len(data) < 12:
        raise MalformedCode("truncated code header")
    rows, cols = struct.unpack_from("<HH", data, 8)
    n = _packed_len(rows * cols)
    pos = 12
    if len(data) < pos + 2 * n + 2:
        raise MalformedCode("truncated code payload")
    bits = np.frombuffer(data, np.uint8, n, pos)
    mask = np.frombuffer(data, np.uint8, n, pos + n)
    pos += 2 * n
    (label_len,) = struct.unpack_from("<H", data, pos)
    pos += 2
    if len(data) != pos + label_len:
        raise MalformedCode("label length does not match file size")
    try:
        label = data[pos:].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedCode(f"source_id is not UTF-8: {exc}") from None
    code = IrisCode(rows, cols, bits, mask, label)
    if not (np.array_equal(code.bits, bits) and np.array_equal(code.mask, mask)):
        raise MalformedCode("non-zero padding bits")
    return code


def save_code(code: IrisCode, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps_code(code))


def load_code(path: str | os.PathLike) -> IrisCode:
    with open(path, "rb") as fh:
        return loads_code(fh.read())
