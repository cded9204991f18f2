"""Comparison models: first-order chlorine decay, per-station OLS, Lasso, MRMTL.

The regression baselines use the plain linear model ``X_l w_l``; the
half-weighted late fusion belongs to the joint model only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Standardizer, StationDataset
from .errors import InvalidInputError, NumericFailureError
from .features import TimeSeriesWindow
from .solver import fista_minimize

KINDS = ("decay", "ols", "lasso", "mrmtl")
OLS_JITTER = 1e-8


@dataclass(frozen=True)
class DecayModel:
    """``dC/dt = -k C``; ``k`` in 1/hour and ``c0`` in mg/L."""

    k: float
    c0: float
    c_last: float | None = None
    t_last: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.k) and math.isfinite(self.c0)) or self.k < 0 or self.c0 < 0:
            raise InvalidInputError("decay constant and initial concentration must be finite and >= 0")


def decay_fit(series, step_minutes: float | None = None) -> DecayModel:
    """Least-squares line through ``(t, ln c_t)``; ``k`` is minus the slope, clamped at 0.

    Times are in hours, taken from the window's step (or ``step_minutes``).
    """
    if isinstance(series, TimeSeriesWindow):
        c, step = series.values, series.step
    else:
        c, step = np.asarray(series, dtype=float).ravel(), 60.0
    if step_minutes is not None:
        step = step_minutes
    if c.size < 2:
        raise InvalidInputError("decay fit needs at least two observations")
    if np.any(~np.isfinite(c)) or np.any(c <= 0):
        raise InvalidInputError("decay fit needs strictly positive concentrations")
    t = np.arange(c.size) * (step / 60.0)
    logc = np.log(c)
    tc = t - t.mean()
    slope = float(tc @ (logc - logc.mean()) / (tc @ tc))
    intercept = float(logc.mean() - slope * t.mean())
    return DecayModel(k=max(0.0, -slope), c0=math.exp(intercept), c_last=float(c[-1]), t_last=float(t[-1]))


def decay_predict(m: DecayModel, horizon_hours: float) -> float:
    """Concentration ``horizon_hours`` after the last observation.

    The curve is re-anchored at the last observed value when one is known.
    """
    if horizon_hours < 0:
        raise InvalidInputError("horizon must be non-negative")
    anchor = m.c_last if m.c_last is not None else m.c0 * math.exp(-m.k * m.t_last)
    return anchor * math.exp(-m.k * horizon_hours)


@dataclass
class BaselineModel:
    kind: str
    W: np.ndarray | None = None
    params: dict = field(default_factory=dict)
    scaler: Standardizer | None = None
    station_ids: list[str] = field(default_factory=list)
    D_s: int = 0
    trace: list[float] = field(default_factory=list)

    def predict(self, data: StationDataset, horizon_hours: float | None = None) -> list[np.ndarray]:
        if self.kind == "decay":
            if data.rc_windows is None or horizon_hours is None:
                raise InvalidInputError("decay predictions need RC history windows and a horizon")
            return [
                np.array([decay_predict(decay_fit(win, _step(win, data)), horizon_hours) for win in wins])
                for wins in data.rc_windows
            ]
        if self.W is None:
            raise InvalidInputError("model is not fitted")
        if data.D != self.W.shape[0] or data.M != self.W.shape[1]:
            raise InvalidInputError("dataset dimensions do not match the fitted model")
        z = self.scaler.transform(data, with_y=False) if self.scaler else data
        out = []
        for l in range(data.M):
            yhat = z.X(l) @ self.W[:, l]
            if self.scaler is not None:
                yhat = yhat + self.scaler.y_mean[l]
            out.append(yhat)
        return out


def _step(win, data: StationDataset):
    return None if isinstance(win, TimeSeriesWindow) else data.step_minutes


def _prepare(data: StationDataset, standardize: bool):
    scaler = Standardizer.fit(data) if standardize else None
    return scaler, (scaler.transform(data) if scaler else data)


def _ols_weights(data: StationDataset) -> np.ndarray:
    W = np.zeros((data.D, data.M))
    for l in range(data.M):
        X = data.X(l)
        A = X.T @ X + OLS_JITTER * np.eye(data.D)
        if np.linalg.cond(A) > 1e14:
            raise NumericFailureError(
                f"station {data.station_ids[l]}: normal equations are singular beyond the ridge jitter"
            )
        W[:, l] = np.linalg.solve(A, X.T @ data.y[l])
    return W


def ols_fit(data: StationDataset, standardize: bool = False) -> BaselineModel:
    """Independent least-squares fit per station."""
    scaler, z = _prepare(data, standardize)
    return BaselineModel("ols", _ols_weights(z), {}, scaler, list(data.station_ids), data.D_s)


def soft_threshold(B: np.ndarray, beta: float) -> np.ndarray:
    return np.sign(B) * np.maximum(np.abs(B) - beta, 0.0)


def _grams(data: StationDataset):
    G = np.array([data.X(l).T @ data.X(l) for l in range(data.M)])
    b = np.array([data.X(l).T @ data.y[l] for l in range(data.M)]).T
    yy = sum(float(v @ v) for v in data.y)
    return G, b, yy


def lasso_fit(
    data: StationDataset,
    alpha: float,
    standardize: bool = False,
    max_iters: int = 20000,
    tol: float = 1e-10,
    xtol: float = 1e-12,
    W0: np.ndarray | None = None,
) -> BaselineModel:
    """``0.5 sum_l ||y_l - X_l w_l||^2 + alpha ||W||_1`` via FISTA with soft thresholding."""
    if alpha < 0:
        raise InvalidInputError("alpha must be non-negative")
    scaler, z = _prepare(data, standardize)
    G, b, yy = _grams(z)

    def smooth(W):
        return 0.5 * (yy - 2.0 * float(np.sum(W * b)) + float(np.einsum("il,lij,jl->", W, G, W)))

    report = fista_minimize(
        smooth,
        lambda W: np.einsum("lij,jl->il", G, W) - b,
        lambda B, step: soft_threshold(B, alpha * step),
        lambda W: alpha * float(np.abs(W).sum()),
        np.zeros((z.D, z.M)) if W0 is None else W0,
        curvature=lambda Dl: float(np.einsum("il,lij,jl->", Dl, G, Dl)),
        max_iters=max_iters,
        tol=tol,
        xtol=xtol,
        restart=True,
    )
    return BaselineModel("lasso", report.W, {"alpha": alpha}, scaler, list(data.station_ids), data.D_s, report.trace)


def mrmtl_objective(W: np.ndarray, data: StationDataset, lam: float, theta: float) -> float:
    total = 0.0
    for l in range(data.M):
        r = data.y[l] - data.X(l) @ W[:, l]
        total += 0.5 * float(r @ r)
    dev = W - W.mean(axis=1, keepdims=True)
    return total + lam * float(np.sum(dev * dev)) + theta * float(np.sum(W * W))


def mrmtl_fit(
    data: StationDataset,
    lam: float,
    theta: float,
    standardize: bool = False,
    max_iters: int = 50000,
    tol: float = 1e-8,
    xtol: float = 1e-12,
) -> BaselineModel:
    """Mean-regularised multi-task least squares.

    ``0.5 sum ||y_l - X_l w_l||^2 + lam sum ||w_l - mean(w)||^2 + theta ||W||_F^2``,
    minimised by accelerated gradient descent with backtracking.
    """
    if lam < 0 or theta < 0:
        raise InvalidInputError("lambda and theta must be non-negative")
    scaler, z = _prepare(data, standardize)
    G, b, yy = _grams(z)
    M = z.M
    centre = np.eye(M) - np.full((M, M), 1.0 / M)

    def smooth(W):
        quad = float(np.einsum("il,lij,jl->", W, G, W))
        return 0.5 * (yy - 2.0 * float(np.sum(W * b)) + quad) + lam * float(np.sum((W @ centre) * W)) + theta * float(np.sum(W * W))

    def grad(W):
        return np.einsum("lij,jl->il", G, W) - b + 2.0 * lam * (W @ centre) + 2.0 * theta * W

    def curvature(Dl):
        return float(np.einsum("il,lij,jl->", Dl, G, Dl)) + 2.0 * lam * float(np.sum((Dl @ centre) * Dl)) + 2.0 * theta * float(np.sum(Dl * Dl))

    report = fista_minimize(
        smooth, grad, lambda B, step: B, lambda W: 0.0,
        np.zeros((z.D, M)), curvature=curvature, max_iters=max_iters, tol=tol, xtol=xtol, restart=True,
    )
    return BaselineModel("mrmtl", report.W, {"lambda": lam, "theta": theta}, scaler, list(data.station_ids), data.D_s, report.trace)
