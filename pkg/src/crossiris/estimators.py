"""scikit-learn style wrappers around the pipeline, the matcher and the mislabel detector."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, OutlierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_codes, check_images, check_labeled_scores
from .encoder import LogGaborParams
from .evaluation import DEFAULT_MISLABEL_K, ScoreSet, detect_mislabels, stats
from .exceptions import SEGMENTATION_ERRORS
from .iso_image import DEFAULT_MARGIN_FACTOR, DEFAULT_RADIAL_RESOLUTION
from .matcher import Aggregation, DigitalIdentity, cross_match
from .pipeline import PipelineConfig, encode_image


class IrisEncoder(TransformerMixin, BaseEstimator):
    """Eye images to packed 32 x 360 iris codes.

    ``transform`` returns a ``(n_images, 1440)`` uint8 array of packed bits.
    With ``on_error="skip"``, images that fail segmentation give ``None`` from
    :meth:`transform_codes` and raise from :meth:`transform`.
    """

    def __init__(
        self,
        margin_factor=DEFAULT_MARGIN_FACTOR,
        radial_resolution=DEFAULT_RADIAL_RESOLUTION,
        center_wavelength=18.0,
        sigma_over_f0=0.55,
        pre_blur=0.0,
        on_error="raise",
    ):
        self.margin_factor = margin_factor
        self.radial_resolution = radial_resolution
        self.center_wavelength = center_wavelength
        self.sigma_over_f0 = sigma_over_f0
        self.pre_blur = pre_blur
        self.on_error = on_error

    def _config(self) -> PipelineConfig:
        if self.on_error not in ("raise", "skip"):
            raise ValueError(f"on_error must be 'raise' or 'skip', got {self.on_error!r}")
        if self.margin_factor <= 1:
            raise ValueError("margin_factor must be > 1")
        if self.radial_resolution < 64:
            raise ValueError("radial_resolution must be >= 64 for the boundary search")
        return PipelineConfig(
            margin_factor=float(self.margin_factor),
            radial_resolution=int(self.radial_resolution),
            log_gabor=LogGaborParams(float(self.center_wavelength), float(self.sigma_over_f0)),
            pre_blur=float(self.pre_blur),
        )

    def fit(self, X=None, y=None):
        self.config_ = self._config()
        self.n_features_out_ = 32 * 360 // 8
        return self

    def transform_codes(self, X, source_ids=None):
        check_is_fitted(self, "config_")
        images = check_images(X)
        ids = list(source_ids) if source_ids is not None else [str(i) for i in range(len(images))]
        out = []
        for image, sid in zip(images, ids):
            try:
                out.append(encode_image(image, self.config_, sid))
            except SEGMENTATION_ERRORS:
                if self.on_error == "raise":
                    raise
                out.append(None)
        return out

    def transform(self, X):
        codes = self.transform_codes(X)
        missing = [i for i, c in enumerate(codes) if c is None]
        if missing:
            raise ValueError(f"segmentation failed for images {missing}")
        return np.stack([c.bits for c in codes])


class IdentityMatcher(ClassifierMixin, BaseEstimator):
    """Gallery of digital identities; probes are scored by fuzzy membership.

    ``fit(codes, identity_labels)`` groups enrolled codes by label.
    ``decision_function`` returns the membership matrix (probes x ``classes_``)
    and ``predict`` the identity with the highest membership.
    """

    def __init__(self, max_shift=0, use_masks=False, aggregation="max", n_jobs=1):
        self.max_shift = max_shift
        self.use_masks = use_masks
        self.aggregation = aggregation
        self.n_jobs = n_jobs

    def fit(self, X, y):
        codes = check_codes(X)
        y = np.asarray(y)
        if len(y) != len(codes):
            raise ValueError(f"got {len(codes)} codes but {len(y)} labels")
        if self.max_shift < 0:
            raise ValueError("max_shift must be >= 0")
        agg = Aggregation(self.aggregation)
        self.classes_ = np.unique(y)
        self.identities_ = [
            DigitalIdentity(str(label), [c for c, lab in zip(codes, y) if lab == label], agg)
            for label in self.classes_
        ]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "identities_")
        return cross_match(check_codes(X), self.identities_, self.max_shift, self.use_masks, self.n_jobs)

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]


class MislabelDetector(OutlierMixin, BaseEstimator):
    """Flags labelled comparisons whose score sits on the wrong side of the classes.

    Input rows are ``(score, is_genuine)``. ``predict`` follows the outlier
    detector convention: -1 for a suspected mislabel, 1 otherwise.
    """

    def __init__(self, k=DEFAULT_MISLABEL_K, robust=True):
        self.k = k
        self.robust = robust

    def fit(self, X, y=None):
        scores, genuine = check_labeled_scores(X)
        if genuine.all() or not genuine.any():
            raise ValueError("need both genuine and imposter rows")
        self.imposter_stats_ = stats(scores[~genuine])
        self.genuine_stats_ = stats(scores[genuine])
        return self

    def predict(self, X):
        check_is_fitted(self, "imposter_stats_")
        scores, genuine = check_labeled_scores(X)
        idx = np.arange(len(scores))
        score_set = ScoreSet(
            scores[genuine],
            scores[~genuine],
            [(str(i), "") for i in idx[genuine]],
            [(str(i), "") for i in idx[~genuine]],
        )
        flagged = detect_mislabels(score_set, self.imposter_stats_, self.genuine_stats_, self.k, self.robust)
        out = np.ones(len(scores), dtype=int)
        out[[int(s.pair[0]) for s in flagged]] = -1
        return out
