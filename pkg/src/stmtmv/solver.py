"""Multi-task multi-view regression with group sparsity, solved by FISTA.

The model predicts station ``l`` by late fusion of two linear views,
``0.5 * (Xs_l @ ws_l + Xt_l @ wt_l)``, and fits all stations jointly by
minimising

    0.5 * sum_l ||y_l - 0.5 X_l w_l||^2
    + lam   * sum_l ||Xs_l ws_l - Xt_l wt_l||^2
    + gamma * tr(W L W^T)
    + theta * ||W||_{2,1}

where ``L`` is the Laplacian of the station coupling matrix and the
``l2,1`` norm sums the Euclidean norms of the rows of ``W``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .data import Standardizer, StationDataset
from .errors import InvalidInputError, NumericFailureError
from .pipegraph import TaskCoupling

VARIANTS = ("full", "us", "ws", "sv")


@dataclass(frozen=True)
class SolverParams:
    lam: float = 0.1
    gamma: float = 0.1
    theta: float = 0.1
    max_iters: int = 2000
    tol: float = 1e-6
    L0: float = 1.0
    eta: float = 2.0
    variant: str = "full"

    def __post_init__(self):
        if min(self.lam, self.gamma, self.theta) < 0:
            raise InvalidInputError("regularization weights must be non-negative")
        if self.eta <= 1:
            raise InvalidInputError("backtracking factor eta must exceed 1")
        if self.tol <= 0 or self.L0 <= 0 or self.max_iters < 1:
            raise InvalidInputError("tol, L0 and max_iters must be positive")
        if self.variant not in VARIANTS:
            raise InvalidInputError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")

    def effective(self) -> "SolverParams":
        """Parameters after applying the variant's switch (ws: theta=0, sv: lam=0)."""
        if self.variant == "ws":
            return replace(self, theta=0.0)
        if self.variant == "sv":
            return replace(self, lam=0.0)
        return self


@dataclass
class FitReport:
    W: np.ndarray
    trace: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    step: float = 1.0


def fista_minimize(
    smooth: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    prox: Callable[[np.ndarray, float], np.ndarray],
    penalty: Callable[[np.ndarray], float],
    W0: np.ndarray,
    *,
    curvature: Callable[[np.ndarray], float] | None = None,
    L0: float = 1.0,
    eta: float = 2.0,
    max_iters: int = 2000,
    tol: float = 1e-6,
    xtol: float | None = None,
    restart: bool = False,
) -> FitReport:
    """FISTA with backtracking on the step scalar ``L``.

    A trial point ``W = prox(V - grad(V)/L, 1/L)`` is accepted when
    ``h(W) <= h(V) + <grad(V), W - V> + L/2 ||W - V||^2``.  For a quadratic
    smooth part, pass ``curvature(D) = <D, Hess h D>``; the test is then the
    equivalent ``curvature(W - V) <= L ||W - V||^2``, which does not suffer
    from cancellation near the optimum.

    Stops after ``max_iters`` iterations or when the relative change of the
    full objective drops below ``tol`` (and, if ``xtol`` is given, the
    relative change of the iterate drops below ``xtol`` as well).  With
    ``restart`` the momentum is reset whenever the objective goes up, which
    restores linear convergence on strongly convex problems.
    """
    W_prev = np.array(W0, dtype=float)
    V = W_prev.copy()
    L = float(L0)
    t = 1.0
    F_prev = smooth(W_prev) + penalty(W_prev)
    if not math.isfinite(F_prev):
        raise NumericFailureError("objective is not finite at the starting point (iteration 0)")
    trace: list[float] = []
    converged = False

    for k in range(1, max_iters + 1):
        G = grad(V)
        hV = None if curvature is not None else smooth(V)
        while True:
            W = prox(V - G / L, 1.0 / L)
            Dlt = W - V
            dd = float(np.vdot(Dlt, Dlt))
            if curvature is not None:
                ok = curvature(Dlt) <= L * dd * (1 + 1e-12)
            else:
                ok = smooth(W) <= hV + float(np.vdot(G, Dlt)) + 0.5 * L * dd
            if ok:
                break
            L *= eta
            if not math.isfinite(L) or L > 1e300:
                raise NumericFailureError(f"line search failed to find a step at iteration {k}")

        F = smooth(W) + penalty(W)
        if not math.isfinite(F):
            raise NumericFailureError(f"objective became non-finite at iteration {k}")
        trace.append(F)

        if restart and F > F_prev:
            t = 1.0
        t_next = (1.0 + math.sqrt(1.0 + 4.0 * t * t)) / 2.0
        step = W - W_prev
        V = W + ((t - 1.0) / t_next) * step
        W_prev, t = W, t_next

        if abs(F_prev - F) <= tol * max(abs(F_prev), 1e-300) and (
            xtol is None or np.linalg.norm(step) <= xtol * max(1.0, np.linalg.norm(W))
        ):
            converged = True
            break
        F_prev = F

    return FitReport(W_prev, trace, len(trace), converged, L)


class Precomputed:
    """Per-station Gram quantities; every iteration is O((D + M) D M) afterwards."""

    def __init__(self, data: StationDataset):
        self.D_s = data.D_s
        sign = np.concatenate([np.ones(data.D_s), -np.ones(data.D_t)])
        self.G, self.b, self.yy, self.P = [], [], [], []
        for l in range(data.M):
            X = data.X(l)
            G = X.T @ X
            self.G.append(G)
            self.b.append(X.T @ data.y[l])
            self.yy.append(float(data.y[l] @ data.y[l]))
            # blocks 2XsXs, -2XsXt, -2XtXs, 2XtXt
            self.P.append(2.0 * sign[:, None] * G * sign[None, :])
        self.G = np.array(self.G)
        self.b = np.array(self.b).T  # (D, M)
        self.P = np.array(self.P)
        self.yy = np.array(self.yy)
        self._H = None
        self._H_lam = None

    def hessian_blocks(self, lam: float) -> np.ndarray:
        """Stack of 0.25 G_l + lam P_l, cached per lam."""
        if self._H is None or self._H_lam != lam:
            self._H = 0.25 * self.G + lam * self.P
            self._H_lam = lam
        return self._H


def _check_shapes(W: np.ndarray, data: StationDataset, coupling: TaskCoupling):
    if W.shape != (data.D, data.M):
        raise InvalidInputError(f"W has shape {W.shape}, expected {(data.D, data.M)}")
    if coupling.L.shape != (data.M, data.M):
        raise InvalidInputError(f"coupling is {coupling.L.shape[0]}x{coupling.L.shape[1]} for {data.M} stations")


def _coupling_for(coupling: TaskCoupling, p: SolverParams) -> TaskCoupling:
    return TaskCoupling.uniform_like(coupling) if p.variant == "us" else coupling


def l21_norm(W: np.ndarray) -> float:
    return float(np.sum(np.sqrt(np.sum(W * W, axis=1))))


def predict(X_l: np.ndarray, w_l: np.ndarray) -> np.ndarray:
    """Late-fusion prediction ``0.5 * X_l w_l``."""
    X_l = np.atleast_2d(np.asarray(X_l, dtype=float))
    w_l = np.asarray(w_l, dtype=float).ravel()
    if X_l.shape[1] != w_l.size:
        raise InvalidInputError(f"X has {X_l.shape[1]} columns but w has {w_l.size} entries")
    return 0.5 * (X_l @ w_l)


def smooth_objective(W, data: StationDataset, coupling: TaskCoupling, p: SolverParams) -> float:
    """Loss + view agreement + Laplacian terms, evaluated directly on the data."""
    W = np.asarray(W, dtype=float)
    _check_shapes(W, data, coupling)
    ds = data.D_s
    total = 0.0
    for l in range(data.M):
        ws, wt = W[:ds, l], W[ds:, l]
        fs, ft = data.Xs[l] @ ws, data.Xt[l] @ wt
        r = data.y[l] - 0.5 * (fs + ft)
        total += 0.5 * float(r @ r)
        dv = fs - ft
        total += p.lam * float(dv @ dv)
    total += p.gamma * float(np.trace(W @ coupling.L @ W.T))
    return total


def objective(W, data: StationDataset, coupling: TaskCoupling, p: SolverParams) -> float:
    return smooth_objective(W, data, coupling, p) + p.theta * l21_norm(np.asarray(W, dtype=float))


def grad_smooth(W, data: StationDataset, coupling: TaskCoupling, p: SolverParams, pre: Precomputed | None = None):
    """Column ``l``: ``0.5 X_l^T (0.5 X_l w_l - y_l) + lam P_l w_l + 2 gamma W L_l``."""
    W = np.asarray(W, dtype=float)
    _check_shapes(W, data, coupling)
    pre = pre or Precomputed(data)
    return _grad(W, pre, coupling.L, p.lam, p.gamma)


def _grad(W, pre: Precomputed, L, lam, gamma):
    H = pre.hessian_blocks(lam)
    # H_l w_l for all l at once: 0.25 G w + lam P w
    HW = np.einsum("lij,jl->il", H, W)
    return HW - 0.5 * pre.b + 2.0 * gamma * (W @ L)


def _smooth_from_grams(W, pre: Precomputed, L, lam, gamma) -> float:
    H = pre.hessian_blocks(lam)
    quad = float(np.einsum("il,lij,jl->", W, H, W))
    return 0.5 * (pre.yy.sum() - float(np.sum(W * pre.b)) + quad) + gamma * float(np.sum((W @ L) * W))


def prox_group_l21(B: np.ndarray, beta: float) -> np.ndarray:
    """Row-wise group shrinkage: each row ``b`` becomes ``max(0, 1 - beta/||b||) b``."""
    B = np.asarray(B, dtype=float)
    if beta < 0:
        raise InvalidInputError("beta must be non-negative")
    norms = np.sqrt(np.sum(B * B, axis=1, keepdims=True))
    with np.errstate(divide="ignore", invalid="ignore"):
        factor = np.where(norms > beta, 1.0 - beta / norms, 0.0)
    return factor * B


def fista_fit(
    data: StationDataset,
    coupling: TaskCoupling,
    p: SolverParams = SolverParams(),
    W0: np.ndarray | None = None,
    pre: Precomputed | None = None,
) -> FitReport:
    """Fit the joint model on ``data`` as given (no standardisation)."""
    coupling = _coupling_for(coupling, p)
    q = p.effective()
    W0 = np.zeros((data.D, data.M)) if W0 is None else np.array(W0, dtype=float)
    _check_shapes(W0, data, coupling)
    pre = pre or Precomputed(data)
    Lap = coupling.L
    lam, gamma, theta = q.lam, q.gamma, q.theta

    def curvature(Dlt):
        H = pre.hessian_blocks(lam)
        return float(np.einsum("il,lij,jl->", Dlt, H, Dlt)) + 2.0 * gamma * float(np.sum((Dlt @ Lap) * Dlt))

    return fista_minimize(
        lambda W: _smooth_from_grams(W, pre, Lap, lam, gamma),
        lambda W: _grad(W, pre, Lap, lam, gamma),
        lambda B, step: prox_group_l21(B, theta * step),
        lambda W: theta * l21_norm(W),
        W0,
        curvature=curvature,
        L0=q.L0,
        eta=q.eta,
        max_iters=q.max_iters,
        tol=q.tol,
    )


class StMTMV:
    """Estimator wrapper: standardises with training statistics, fits, predicts.

    >>> model = StMTMV(SolverParams(lam=0.1, gamma=0.1, theta=0.1)).fit(train, coupling)
    >>> preds = model.predict(test)
    """

    kind = "stmtmv"

    def __init__(self, params: SolverParams = SolverParams(), standardize: bool = True):
        self.params = params
        self.standardize = standardize
        self.W: np.ndarray | None = None
        self.scaler: Standardizer | None = None
        self.report: FitReport | None = None
        self.D_s = 0
        self.station_ids: list[str] = []

    def fit(self, data: StationDataset, coupling: TaskCoupling, W0=None) -> "StMTMV":
        self.scaler = Standardizer.fit(data) if self.standardize else None
        z = self.scaler.transform(data) if self.scaler else data
        self.report = fista_fit(z, coupling, self.params, W0=W0)
        self.W = self.report.W
        self.D_s = data.D_s
        self.station_ids = list(data.station_ids)
        return self

    def predict(self, data: StationDataset) -> list[np.ndarray]:
        if self.W is None:
            raise InvalidInputError("model is not fitted")
        if data.D != self.W.shape[0] or data.M != self.W.shape[1]:
            raise InvalidInputError("dataset dimensions do not match the fitted model")
        z = self.scaler.transform(data, with_y=False) if self.scaler else data
        out = []
        for l in range(data.M):
            yhat = predict(z.X(l), self.W[:, l])
            if self.scaler is not None:
                yhat = yhat + self.scaler.y_mean[l]
            out.append(yhat)
        return out
