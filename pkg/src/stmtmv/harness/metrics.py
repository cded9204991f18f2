"""Pooled RMSE and mean relative-L1 accuracy over stations."""

from __future__ import annotations

import numpy as np

from ..errors import InvalidInputError


def _pairs(y, yhat):
    if len(y) != len(yhat):
        raise InvalidInputError(f"{len(y)} target vectors but {len(yhat)} prediction vectors")
    out = []
    for l, (a, b) in enumerate(zip(y, yhat)):
        a = np.asarray(a, dtype=float).ravel()
        b = np.asarray(b, dtype=float).ravel()
        if a.shape != b.shape:
            raise InvalidInputError(f"station {l}: target has {a.size} entries, prediction has {b.size}")
        out.append((a, b))
    return out


def rmse(y, yhat) -> float:
    """sqrt of the mean squared error over all N = sum_l N_l samples."""
    pairs = _pairs(y, yhat)
    n = sum(a.size for a, _ in pairs)
    if n == 0:
        raise InvalidInputError("no samples to score")
    sse = sum(float(np.sum((a - b) ** 2)) for a, b in pairs)
    return float(np.sqrt(sse / n))


def accuracy(y, yhat) -> float:
    """``1 - mean_l ||y_l - yhat_l||_1 / ||y_l||_1``; can be negative."""
    pairs = _pairs(y, yhat)
    if not pairs:
        raise InvalidInputError("no stations to score")
    rel = []
    for l, (a, b) in enumerate(pairs):
        norm = float(np.sum(np.abs(a)))
        if norm == 0:
            raise InvalidInputError(f"station {l}: target has zero L1 norm, accuracy is undefined")
        rel.append(float(np.sum(np.abs(a - b))) / norm)
    return 1.0 - float(np.mean(rel))
