"""Hamming similarity between packed iris codes and digital-identity membership.

The similarity of two codes is the fraction of agreeing bits. By default all
bits are compared (no masks, no rotation); masking and rotation search are
opt-in.
"""

from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence, TextIO

import numba
import numpy as np

from .encoder import IrisCode
from .exceptions import DimensionMismatch, EmptyOverlap

_M1 = np.uint64(0x5555555555555555)
_M2 = np.uint64(0x3333333333333333)
_M4 = np.uint64(0x0F0F0F0F0F0F0F0F)
_H01 = np.uint64(0x0101010101010101)


@numba.njit(inline="always")
def _popcount(x):
    x = x - ((x >> np.uint64(1)) & _M1)
    x = (x & _M2) + ((x >> np.uint64(2)) & _M2)
    x = (x + (x >> np.uint64(4))) & _M4
    return (x * _H01) >> np.uint64(56)


@numba.njit(nogil=True, cache=True)
def _disagreements(p, g):
    """Popcount of ``p[i] ^ g[j]`` for every probe/gallery row pair."""
    n, w = p.shape
    m = g.shape[0]
    out = np.empty((n, m), np.int64)
    for i in range(n):
        for j in range(m):
            s = np.uint64(0)
            for k in range(w):
                s += _popcount(p[i, k] ^ g[j, k])
            out[i, j] = s
    return out


@numba.njit(nogil=True, cache=True)
def _masked_agreements(p, pm, g, gm):
    """Agreeing and jointly valid bit counts for every probe/gallery row pair."""
    n, w = p.shape
    m = g.shape[0]
    agree = np.empty((n, m), np.int64)
    valid = np.empty((n, m), np.int64)
    for i in range(n):
        for j in range(m):
            a = np.uint64(0)
            v = np.uint64(0)
            for k in range(w):
                both = pm[i, k] & gm[j, k]
                v += _popcount(both)
                a += _popcount(~(p[i, k] ^ g[j, k]) & both)
            agree[i, j] = a
            valid[i, j] = v
    return agree, valid


@dataclass(frozen=True)
class SimilarityScore:
    value: float
    compared_bits: int
    shift_used: int = 0


class Aggregation(str, enum.Enum):
    MAX = "max"
    MEAN = "mean"
    OWA = "owa"


OWA_WEIGHTS = (0.5, 0.3, 0.2)


@dataclass(frozen=True)
class DigitalIdentity:
    identity_id: str
    codes: tuple[IrisCode, ...]
    aggregation: Aggregation = Aggregation.MAX

    def __post_init__(self):
        codes = tuple(self.codes)
        if not codes:
            raise ValueError(f"identity {self.identity_id!r} has no codes")
        shape = (codes[0].rows, codes[0].cols)
        if any((c.rows, c.cols) != shape for c in codes):
            raise DimensionMismatch(f"identity {self.identity_id!r} mixes code dimensions")
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "aggregation", Aggregation(self.aggregation))


def _check_dims(a: IrisCode, b: IrisCode) -> None:
    if (a.rows, a.cols) != (b.rows, b.cols):
        raise DimensionMismatch(f"cannot compare {a.rows}x{a.cols} with {b.rows}x{b.cols} codes")


def shift_order(max_shift: int) -> list[int]:
    """Shifts in tie-break priority: 0, -1, +1, -2, +2, ..."""
    if max_shift < 0:
        raise ValueError(f"max_shift must be >= 0, got {max_shift}")
    order = [0]
    for s in range(1, max_shift + 1):
        order += [-s, s]
    return order


def hamming_similarity(a: IrisCode, b: IrisCode, use_masks: bool = False) -> SimilarityScore:
    """Fraction of agreeing bits; masked mode counts only bits valid in both codes."""
    _check_dims(a, b)
    if not use_masks:
        diff = int(_disagreements(a.words[None, :], b.words[None, :])[0, 0])
        return SimilarityScore((a.nbits - diff) / a.nbits, a.nbits)
    agree, valid = _masked_agreements(
        a.words[None, :], a.mask_words[None, :], b.words[None, :], b.mask_words[None, :]
    )
    valid = int(valid[0, 0])
    if valid == 0:
        raise EmptyOverlap("the two codes share no valid bits")
    return SimilarityScore(int(agree[0, 0]) / valid, valid)


def hamming_similarity_shifted(
    a: IrisCode, b: IrisCode, max_shift: int = 0, use_masks: bool = False
) -> SimilarityScore:
    """Best similarity over column rotations of ``b`` by ``-max_shift .. +max_shift``.

    ``shift_used`` is the rotation applied to ``b``: if ``b`` is ``a`` rotated
    by +3 columns, the best match is found at shift -3. Ties go to the smallest
    absolute shift, then to the negative one.
    """
    _check_dims(a, b)
    best = None
    for s in shift_order(max_shift):
        cand = b if s == 0 else b.rotated(s)
        try:
            score = hamming_similarity(a, cand, use_masks)
        except EmptyOverlap:
            continue
        if best is None or score.value > best.value:
            best = SimilarityScore(score.value, score.compared_bits, s)
    if best is None:
        raise EmptyOverlap("no rotation leaves any jointly valid bits")
    return best


def aggregate(scores: Sequence[float], aggregation: Aggregation | str = Aggregation.MAX) -> float:
    """Combine per-code similarities; sums run over descending scores."""
    aggregation = Aggregation(aggregation)
    ordered = sorted((float(s) for s in scores), reverse=True)
    if not ordered:
        raise ValueError("nothing to aggregate")
    if aggregation is Aggregation.MAX:
        return ordered[0]
    if aggregation is Aggregation.MEAN:
        total = 0.0
        for s in ordered:
            total += s
        return total / len(ordered)
    weights = list(OWA_WEIGHTS[: len(ordered)]) + [0.0] * max(0, len(ordered) - len(OWA_WEIGHTS))
    norm = sum(weights)
    total = 0.0
    for w, s in zip(weights, ordered):
        total += w * s
    return total / norm


def identity_membership(
    probe: IrisCode, identity: DigitalIdentity, max_shift: int = 0, use_masks: bool = False
) -> float:
    scores = [hamming_similarity_shifted(probe, c, max_shift, use_masks).value for c in identity.codes]
    return aggregate(scores, identity.aggregation)


# --------------------------------------------------------------------------
# batch matching


def _stack(codes: Sequence[IrisCode], attr: str) -> np.ndarray:
    return np.ascontiguousarray(np.stack([getattr(c, attr) for c in codes]))


def _check_uniform(codes: Sequence[IrisCode]) -> tuple[int, int]:
    shape = (codes[0].rows, codes[0].cols)
    for c in codes:
        if (c.rows, c.cols) != shape:
            raise DimensionMismatch(f"mixed code dimensions {shape} and {(c.rows, c.cols)}")
    return shape


def similarity_matrix(
    probes: Sequence[IrisCode],
    gallery: Sequence[IrisCode],
    max_shift: int = 0,
    use_masks: bool = False,
    n_jobs: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise shifted similarity; returns ``(values, shifts)`` of shape (probes, gallery).

    Every cell is an exact integer count divided once, so results do not
    depend on ``n_jobs``.
    """
    if not probes or not gallery:
        raise ValueError("probes and gallery must be non-empty")
    shape = _check_uniform(list(probes) + list(gallery))
    nbits = shape[0] * shape[1]
    order = shift_order(max_shift)
    p_words = _stack(probes, "words")
    p_masks = _stack(probes, "mask_words")
    stacks = {}
    for s in order:
        g = gallery if s == 0 else [c.rotated(s) for c in gallery]
        stacks[s] = (_stack(g, "words"), _stack(g, "mask_words"))

    def block(lo: int, hi: int):
        values = np.full((hi - lo, len(gallery)), -1.0)
        shifts = np.zeros((hi - lo, len(gallery)), np.int64)
        for s in order:
            g_words, g_masks = stacks[s]
            if use_masks:
                agree, valid = _masked_agreements(p_words[lo:hi], p_masks[lo:hi], g_words, g_masks)
                with np.errstate(divide="ignore", invalid="ignore"):
                    cand = np.where(valid > 0, agree / np.maximum(valid, 1), -1.0)
            else:
                cand = (nbits - _disagreements(p_words[lo:hi], g_words)) / nbits
            better = cand > values
            values[better] = cand[better]
            shifts[better] = s
        return values, shifts

    n = len(probes)
    n_jobs = max(1, int(n_jobs))
    if n_jobs == 1 or n < 2:
        values, shifts = block(0, n)
    else:
        bounds = np.linspace(0, n, min(n_jobs * 4, n) + 1).astype(int)
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            parts = list(pool.map(lambda lh: block(*lh), zip(bounds[:-1], bounds[1:])))
        values = np.concatenate([p[0] for p in parts])
        shifts = np.concatenate([p[1] for p in parts])
    if use_masks and (values < 0).any():
        i, j = np.argwhere(values < 0)[0]
        raise EmptyOverlap(
            f"codes {probes[i].source_id!r} and {gallery[j].source_id!r} share no valid bits"
        )
    return values, shifts


def cross_match(
    probes: Sequence[IrisCode],
    gallery: Sequence[DigitalIdentity],
    max_shift: int = 0,
    use_masks: bool = False,
    n_jobs: int = 1,
) -> np.ndarray:
    """Membership of every probe in every digital identity, shape (probes, identities)."""
    if not probes or not gallery:
        raise ValueError("probes and gallery must be non-empty")
    flat = [c for ident in gallery for c in ident.codes]
    values, _ = similarity_matrix(probes, flat, max_shift, use_masks, n_jobs)
    out = np.empty((len(probes), len(gallery)))
    start = 0
    for j, ident in enumerate(gallery):
        stop = start + len(ident.codes)
        for i in range(len(probes)):
            out[i, j] = aggregate(values[i, start:stop], ident.aggregation)
        start = stop
    return out


def write_score_matrix(
    fh: TextIO, matrix: np.ndarray, probe_ids: Sequence[str], identity_ids: Sequence[str]
) -> None:
    """CSV: header of identity ids, one row per probe, values with 6 decimals."""
    fh.write(",".join(["probe", *identity_ids]) + "\n")
    for pid, row in zip(probe_ids, np.asarray(matrix)):
        fh.write(",".join([pid, *(f"{v:.6f}" for v in row)]) + "\n")
