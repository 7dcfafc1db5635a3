"""Input validation helpers shared by the estimator wrappers."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.utils import check_array

from .encoder import CODE_COLS, CODE_ROWS, IrisCode
from .iso_image import EyeImage


def check_codes(X, rows: int = CODE_ROWS, cols: int = CODE_COLS) -> list[IrisCode]:
    """Accept a sequence of IrisCode or a 2-D uint8 array of packed code rows.

    Packed rows carry no mask, so every bit is treated as valid.
    """
    if isinstance(X, IrisCode):
        raise TypeError("expected a sequence of codes, got a single IrisCode")
    if isinstance(X, Sequence) and X and all(isinstance(c, IrisCode) for c in X):
        return list(X)
    arr = check_array(X, dtype=np.uint8, ensure_2d=True)
    n_bytes = (rows * cols + 7) // 8
    if arr.shape[1] != n_bytes:
        raise ValueError(f"packed codes need {n_bytes} bytes per row, got {arr.shape[1]}")
    full = np.full(n_bytes, 0xFF, dtype=np.uint8)
    return [IrisCode(rows, cols, row, full, str(i)) for i, row in enumerate(arr)]


def check_images(X) -> list[EyeImage]:
    """Accept EyeImage objects, 2-D uint8 arrays, or one 3-D uint8 stack."""
    if isinstance(X, np.ndarray) and X.ndim == 3:
        return [EyeImage(x) for x in X]
    if isinstance(X, (EyeImage, np.ndarray)):
        raise TypeError("expected a sequence of images")
    return [x if isinstance(x, EyeImage) else EyeImage(np.asarray(x)) for x in X]


def check_labeled_scores(X) -> tuple[np.ndarray, np.ndarray]:
    """Two-column input: similarity score and a declared-genuine flag (1 genuine, 0 imposter)."""
    arr = check_array(X, dtype=np.float64, ensure_2d=True)
    if arr.shape[1] != 2:
        raise ValueError(f"expected columns (score, is_genuine), got {arr.shape[1]} columns")
    scores, flags = arr[:, 0], arr[:, 1]
    if scores.min() < 0 or scores.max() > 1:
        raise ValueError("scores must lie in [0, 1]")
    if not np.isin(flags, (0.0, 1.0)).all():
        raise ValueError("the genuine flag column must hold 0 or 1")
    return scores, flags.astype(bool)
