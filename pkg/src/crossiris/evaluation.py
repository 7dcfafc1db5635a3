"""Biometric evaluation of genuine/imposter similarity scores.

Similarity scores are accepted when ``score >= threshold``. Standard deviations
are population deviations (divide by N). All moments are computed with
correctly rounded summation so results do not depend on input order.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .exceptions import EmptyInput, ZeroVariance
from .sigset import Label, SigSet

HIST_BINS = 200
DEFAULT_FAR_TARGETS = (1e-3, 1e-4, 1e-5, 1e-6)
DEFAULT_MISLABEL_K = 6.0
DEFAULT_THRESHOLDS = np.linspace(0.0, 1.0, 2001)

Pair = tuple[str, str]


@dataclass(frozen=True)
class ScoreSet:
    """Genuine and imposter scores, each with the (probe, enrolled) pair it came from."""

    genuine_scores: np.ndarray
    imposter_scores: np.ndarray
    genuine_pairs: tuple[Pair, ...] = ()
    imposter_pairs: tuple[Pair, ...] = ()
    excluded: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        for name in ("genuine_scores", "imposter_scores"):
            arr = np.array(getattr(self, name), dtype=np.float64).ravel()
            if arr.size and (np.isnan(arr).any() or arr.min() < 0 or arr.max() > 1):
                raise ValueError(f"{name} must lie in [0, 1]")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        for name, scores in (("genuine_pairs", self.genuine_scores), ("imposter_pairs", self.imposter_scores)):
            pairs = tuple(tuple(p) for p in getattr(self, name))
            if pairs and len(pairs) != len(scores):
                raise ValueError(f"{name} must match the number of scores")
            object.__setattr__(self, name, pairs)
        object.__setattr__(self, "excluded", tuple(self.excluded))

    @classmethod
    def from_labeled(cls, scores: dict[Pair, float], labels: dict[Pair, Label], excluded=()) -> ScoreSet:
        gen, imp = [], []
        for pair in sorted(scores):
            (gen if labels[pair] is Label.GENUINE else imp).append((pair, scores[pair]))
        return cls(
            [s for _, s in gen], [s for _, s in imp], [p for p, _ in gen], [p for p, _ in imp], excluded
        )

    def require_both(self) -> None:
        if self.genuine_scores.size == 0 or self.imposter_scores.size == 0:
            raise EmptyInput(
                f"need genuine and imposter scores, got {self.genuine_scores.size} "
                f"and {self.imposter_scores.size}"
            )


# --------------------------------------------------------------------------
# distribution statistics


@dataclass(frozen=True)
class DistributionStats:
    mean: float
    std: float
    count: int
    min: float
    max: float
    histogram: np.ndarray = field(repr=False)
    median: float = math.nan
    robust_std: float = math.nan


def histogram_edges() -> np.ndarray:
    return np.linspace(0.0, 1.0, HIST_BINS + 1)


def stats(scores: Iterable[float]) -> DistributionStats:
    """Mean, population std, extrema and a 200-bin histogram over [0, 1]."""
    arr = np.sort(np.asarray(scores if isinstance(scores, np.ndarray) else list(scores), dtype=np.float64).ravel())
    if arr.size == 0:
        raise EmptyInput("cannot summarise an empty score list")
    n = arr.size
    mean = math.fsum(arr) / n
    std = math.sqrt(math.fsum((arr - mean) ** 2) / n)
    hist, _ = np.histogram(arr, bins=histogram_edges())
    median = float(np.median(arr))
    mad = float(np.median(np.abs(arr - median)))
    return DistributionStats(
        mean=mean,
        std=std,
        count=n,
        min=float(arr[0]),
        max=float(arr[-1]),
        histogram=hist,
        median=median,
        robust_std=1.4826 * mad,
    )


def decidability_from_moments(mu_imposter: float, sd_imposter: float, mu_genuine: float, sd_genuine: float) -> float:
    pooled = math.sqrt((sd_imposter**2 + sd_genuine**2) / 2)
    gap = abs(mu_imposter - mu_genuine)
    if pooled == 0:
        if gap == 0:
            raise ZeroVariance("both distributions are the same single value; decidability is undefined")
        # two distinct point masses are perfectly separable
        return math.inf
    return gap / pooled


def decidability(imposter: DistributionStats, genuine: DistributionStats) -> float:
    """Separation of the two distributions in pooled-std units."""
    return decidability_from_moments(imposter.mean, imposter.std, genuine.mean, genuine.std)


# --------------------------------------------------------------------------
# error rates


def _sorted_pair(scores: ScoreSet) -> tuple[np.ndarray, np.ndarray]:
    scores.require_both()
    return np.sort(scores.genuine_scores), np.sort(scores.imposter_scores)


def _rates(gen: np.ndarray, imp: np.ndarray, thresholds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    far = (imp.size - np.searchsorted(imp, thresholds, side="left")) / imp.size
    frr = np.searchsorted(gen, thresholds, side="left") / gen.size
    return far, frr


def far_frr_curves(scores: ScoreSet, thresholds: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """FAR and FRR at each threshold (accept iff score >= threshold)."""
    t = np.asarray(thresholds, dtype=np.float64)
    if t.size == 0:
        raise EmptyInput("no thresholds")
    if t.size > 1 and not np.all(np.diff(t) > 0):
        raise ValueError("thresholds must be strictly increasing")
    gen, imp = _sorted_pair(scores)
    return _rates(gen, imp, t)


@dataclass(frozen=True)
class EerPoint:
    value: float
    threshold: float


def _above(x: float) -> float:
    return float(np.nextafter(x, np.inf))


def eer(scores: ScoreSet) -> EerPoint:
    """Equal error rate, linearly interpolated where FAR - FRR changes sign.

    FAR and FRR are step functions that are constant on ``(s_k, s_{k+1}]`` for
    consecutive distinct scores. If they coincide on a run of such intervals,
    the threshold is the midpoint of that run.
    """
    gen, imp = _sorted_pair(scores)
    distinct = np.unique(np.concatenate([gen, imp]))
    reps = np.append(distinct, _above(distinct[-1]))
    far, frr = _rates(gen, imp, reps)
    diff = far - frr
    equal = np.flatnonzero(diff == 0)
    if equal.size:
        a, b = equal[0], equal[-1]
        lo = distinct[a - 1] if a > 0 else 0.0
        hi = distinct[b] if b < distinct.size else reps[b]
        return EerPoint(float(far[a]), float((lo + hi) / 2))
    k = int(np.flatnonzero(diff > 0)[-1])
    # bracket: the score itself, and the midpoint of the gap above it
    t_a = distinct[k]
    t_b = (distinct[k] + distinct[k + 1]) / 2 if k + 1 < distinct.size else reps[k + 1]
    lam = diff[k] / (diff[k] - diff[k + 1])
    value = far[k] + lam * (far[k + 1] - far[k])
    return EerPoint(float(value), float(t_a + lam * (t_b - t_a)))


@dataclass(frozen=True)
class OperatingPoint:
    far_target: float
    frr: float
    threshold: float
    far: float
    resolvable: bool = True

    @property
    def status(self) -> str:
        return "OK" if self.resolvable else "UNRESOLVABLE"


def operating_points(scores: ScoreSet, far_targets: Sequence[float] = DEFAULT_FAR_TARGETS) -> list[OperatingPoint]:
    """Smallest threshold (0, any observed score, or just above the maximum)
    whose FAR meets each target, with the FRR there.

    Targets finer than one imposter out of all imposters are flagged
    unresolvable instead of being reported at FAR 0.
    """
    gen, imp = _sorted_pair(scores)
    distinct = np.unique(np.concatenate([gen, imp]))
    cands = np.concatenate([[0.0], distinct[distinct > 0], [_above(distinct[-1])]])
    far, frr = _rates(gen, imp, cands)
    out = []
    for target in far_targets:
        if not 0 < target <= 1:
            raise ValueError(f"FAR target must lie in (0, 1], got {target}")
        if target < 1.0 / imp.size:
            out.append(OperatingPoint(float(target), math.nan, math.nan, math.nan, False))
            continue
        # far is non-increasing, so the first index meeting the target is the smallest threshold
        idx = int(np.argmax(far <= target))
        out.append(OperatingPoint(float(target), float(frr[idx]), float(cands[idx]), float(far[idx])))
    return out


def roc(scores: ScoreSet) -> np.ndarray:
    """ROC points ``(far, tar)`` from a threshold sweep over all observed scores.

    Sorted by FAR then TAR, duplicates removed; starts at (0, 0) and ends at
    (1, 1).
    """
    gen, imp = _sorted_pair(scores)
    distinct = np.unique(np.concatenate([gen, imp]))
    t = np.append(distinct, _above(distinct[-1]))
    far, frr = _rates(gen, imp, t)
    pts = np.column_stack([far, 1.0 - frr])[::-1]
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
    return pts[keep]


def roc_auc(points: np.ndarray) -> float:
    """Trapezoidal area under an ROC polyline."""
    pts = np.asarray(points)
    return float(np.trapezoid(pts[:, 1], pts[:, 0]))


# --------------------------------------------------------------------------
# mislabels


@dataclass(frozen=True)
class Suspect:
    pair: Pair
    declared_label: Label
    score: float


def detect_mislabels(
    scores: ScoreSet,
    imposter_stats: DistributionStats,
    genuine_stats: DistributionStats,
    k: float = DEFAULT_MISLABEL_K,
    robust: bool = True,
) -> list[Suspect]:
    """Flag declared-imposter scores far above the imposter bulk and
    declared-genuine scores far below the genuine bulk.

    A score must also fall on the other class's side of the midpoint between
    the two centres. With ``robust`` the centres and spreads are the median and
    MAD-based deviation, which the mislabels themselves barely move; otherwise
    mean and std are used.
    """
    if robust:
        mu1, s1 = imposter_stats.median, imposter_stats.robust_std
        mu2, s2 = genuine_stats.median, genuine_stats.robust_std
    else:
        mu1, s1 = imposter_stats.mean, imposter_stats.std
        mu2, s2 = genuine_stats.mean, genuine_stats.std
    mid = (mu1 + mu2) / 2
    suspects = []
    for pairs, values, label in (
        (scores.imposter_pairs, scores.imposter_scores, Label.IMPOSTER),
        (scores.genuine_pairs, scores.genuine_scores, Label.GENUINE),
    ):
        if label is Label.IMPOSTER:
            hits = (values > mu1 + k * s1) & (values >= mid)
        else:
            hits = (values < mu2 - k * s2) & (values <= mid)
        for i in np.flatnonzero(hits):
            pair = pairs[i] if pairs else (str(i), "")
            suspects.append(Suspect(pair, label, float(values[i])))
    return suspects


# --------------------------------------------------------------------------
# full report


@dataclass(frozen=True)
class EvalReport:
    imposter_stats: DistributionStats
    genuine_stats: DistributionStats
    decidability: float
    eer_value: float
    eer_threshold: float
    operating_points: list[OperatingPoint]
    roc: np.ndarray = field(repr=False)
    min_genuine: float
    max_imposter: float
    suspected_mislabels: list[Suspect]
    thresholds: np.ndarray = field(repr=False)
    far: np.ndarray = field(repr=False)
    frr: np.ndarray = field(repr=False)
    excluded: tuple[tuple[str, str], ...] = ()
    mislabel_k: float = DEFAULT_MISLABEL_K

    @property
    def auc(self) -> float:
        return roc_auc(self.roc)


def evaluate(
    scores: ScoreSet,
    far_targets: Sequence[float] = DEFAULT_FAR_TARGETS,
    mislabel_k: float = DEFAULT_MISLABEL_K,
    thresholds: Sequence[float] | None = None,
) -> EvalReport:
    scores.require_both()
    imp = stats(scores.imposter_scores)
    gen = stats(scores.genuine_scores)
    point = eer(scores)
    t = DEFAULT_THRESHOLDS if thresholds is None else np.asarray(thresholds, dtype=np.float64)
    far, frr = far_frr_curves(scores, t)
    return EvalReport(
        imposter_stats=imp,
        genuine_stats=gen,
        decidability=decidability(imp, gen),
        eer_value=point.value,
        eer_threshold=point.threshold,
        operating_points=operating_points(scores, far_targets),
        roc=roc(scores),
        min_genuine=gen.min,
        max_imposter=imp.max,
        suspected_mislabels=detect_mislabels(scores, imp, gen, mislabel_k),
        thresholds=t,
        far=far,
        frr=frr,
        excluded=scores.excluded,
        mislabel_k=mislabel_k,
    )


# --------------------------------------------------------------------------
# score collection


def collect_scores(
    sigset: SigSet,
    base_dir: str | os.PathLike = ".",
    config=None,
    max_shift: int = 0,
    use_masks: bool = False,
    n_jobs: int = 1,
) -> ScoreSet:
    """Encode every referenced template and score every declared comparison.

    Templates whose segmentation fails are excluded together with their
    comparisons and listed in ``ScoreSet.excluded``. A missing or unreadable
    image is a hard error naming the template.
    """
    from .matcher import similarity_matrix
    from .pipeline import PipelineConfig, encode_templates

    config = config or PipelineConfig()
    probe_ids = sorted({c.probe_id for c in sigset.comparisons})
    enrolled_ids = sorted({c.enrolled_id for c in sigset.comparisons})
    probe_entries = sigset.probe_by_id()
    enrolled_entries = sigset.enrollment_by_id()
    probes, bad_p = encode_templates([probe_entries[t] for t in probe_ids], base_dir, config, n_jobs)
    enrolled, bad_e = encode_templates([enrolled_entries[t] for t in enrolled_ids], base_dir, config, n_jobs)
    excluded = tuple(sorted(bad_p + bad_e))

    labels = {(c.probe_id, c.enrolled_id): c.label for c in sigset.comparisons}
    p_keys = [t for t in probe_ids if t in probes]
    e_keys = [t for t in enrolled_ids if t in enrolled]
    values: dict[Pair, float] = {}
    if p_keys and e_keys:
        p_index = {t: i for i, t in enumerate(p_keys)}
        e_index = {t: i for i, t in enumerate(e_keys)}
        matrix, _ = similarity_matrix(
            [probes[t] for t in p_keys], [enrolled[t] for t in e_keys], max_shift, use_masks, n_jobs
        )
        for pair in labels:
            if pair[0] in p_index and pair[1] in e_index:
                values[pair] = float(matrix[p_index[pair[0]], e_index[pair[1]]])
    return ScoreSet.from_labeled(values, labels, excluded)


def write_scores(scores: ScoreSet, path: str | os.PathLike) -> None:
    """CSV of every scored comparison: ``probe_id,enrolled_id,label,score``."""
    rows = [(p, Label.GENUINE, s) for p, s in zip(scores.genuine_pairs, scores.genuine_scores)]
    rows += [(p, Label.IMPOSTER, s) for p, s in zip(scores.imposter_pairs, scores.imposter_scores)]
    rows.sort(key=lambda r: r[0])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("probe_id,enrolled_id,label,score\n")
        for (probe, enrolled), label, s in rows:
            fh.write(f"{probe},{enrolled},{label.value},{float(s)!r}\n")


def read_scores(path: str | os.PathLike) -> ScoreSet:
    from .exceptions import DataError

    values: dict[Pair, float] = {}
    labels: dict[Pair, Label] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "probe_id,enrolled_id,label,score":
            raise DataError(f"{os.fspath(path)}: unexpected score file header {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                probe, enrolled, label, s = line.split(",")
                pair = (probe, enrolled)
                labels[pair] = Label(label)
                values[pair] = float(s)
            except ValueError:
                raise DataError(f"{os.fspath(path)}:{lineno}: malformed score row {line!r}") from None
    return ScoreSet.from_labeled(values, labels)
