"""Per-station design matrices and the train-statistics scaler."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import InvalidInputError


@dataclass
class StationDataset:
    """Spatial view, temporal view and targets for each of ``M`` stations.

    ``timestamps`` and ``rc_windows`` are optional per-station extras used
    by the chronological split and the chlorine-decay baseline.
    """

    Xs: list[np.ndarray]
    Xt: list[np.ndarray]
    y: list[np.ndarray]
    station_ids: list[str] = field(default_factory=list)
    timestamps: list[np.ndarray] | None = None
    rc_windows: list[np.ndarray] | None = None
    step_minutes: float = 60.0

    def __post_init__(self):
        self.Xs = [np.atleast_2d(np.asarray(x, dtype=float)) for x in self.Xs]
        self.Xt = [np.atleast_2d(np.asarray(x, dtype=float)) for x in self.Xt]
        self.y = [np.asarray(v, dtype=float).ravel() for v in self.y]
        if not self.station_ids:
            self.station_ids = [f"S{l + 1}" for l in range(len(self.y))]
        self.station_ids = [str(s) for s in self.station_ids]
        M = len(self.y)
        if M == 0 or len(self.Xs) != M or len(self.Xt) != M or len(self.station_ids) != M:
            raise InvalidInputError("Xs, Xt, y and station_ids must all have one entry per station")
        ds, dt = self.Xs[0].shape[1], self.Xt[0].shape[1]
        for l in range(M):
            n = self.y[l].size
            if self.Xs[l].shape != (n, ds) or self.Xt[l].shape != (n, dt):
                raise InvalidInputError(
                    f"station {self.station_ids[l]}: expected Xs ({n}, {ds}) and Xt ({n}, {dt}), "
                    f"got {self.Xs[l].shape} and {self.Xt[l].shape}"
                )
            if not (np.all(np.isfinite(self.Xs[l])) and np.all(np.isfinite(self.Xt[l])) and np.all(np.isfinite(self.y[l]))):
                raise InvalidInputError(f"station {self.station_ids[l]}: non-finite entries")

    @property
    def M(self) -> int:
        return len(self.y)

    @property
    def D_s(self) -> int:
        return self.Xs[0].shape[1]

    @property
    def D_t(self) -> int:
        return self.Xt[0].shape[1]

    @property
    def D(self) -> int:
        return self.D_s + self.D_t

    @property
    def n_samples(self) -> list[int]:
        return [v.size for v in self.y]

    def X(self, l: int) -> np.ndarray:
        return np.hstack([self.Xs[l], self.Xt[l]])

    def subset(self, index: Sequence[np.ndarray]) -> "StationDataset":
        """Row subset per station (one index array per station)."""

        def pick(arrs):
            return None if arrs is None else [a[i] for a, i in zip(arrs, index)]

        return replace(
            self,
            Xs=pick(self.Xs),
            Xt=pick(self.Xt),
            y=pick(self.y),
            timestamps=pick(self.timestamps),
            rc_windows=pick(self.rc_windows),
        )

    def stations(self, which: Sequence[int]) -> "StationDataset":
        def pick(arrs):
            return None if arrs is None else [arrs[l] for l in which]

        return replace(
            self,
            Xs=pick(self.Xs),
            Xt=pick(self.Xt),
            y=pick(self.y),
            station_ids=[self.station_ids[l] for l in which],
            timestamps=pick(self.timestamps),
            rc_windows=pick(self.rc_windows),
        )


def split_chronological(data: StationDataset, train_fraction: float, gap: int = 0):
    """Leading ``train_fraction`` of each station's rows for training, rest for test.

    Rows are assumed to be in time order.  ``gap`` drops that many trailing
    training rows so that targets of training samples do not overlap the
    test period.
    """
    if not 0 < train_fraction < 1:
        raise InvalidInputError(f"train fraction must lie in (0, 1), got {train_fraction}")
    tr, te = [], []
    for n in data.n_samples:
        cut = int(np.floor(train_fraction * n))
        if cut - gap < 1 or cut >= n:
            raise InvalidInputError(f"{n} samples are too few for a train/test split")
        tr.append(np.arange(0, cut - gap))
        te.append(np.arange(cut, n))
    return data.subset(tr), data.subset(te)


@dataclass
class Standardizer:
    """Per-station centring with column scales pooled over all stations.

    Centring per station absorbs a free intercept for every task; pooling
    the scale keeps weight vectors of different stations comparable, which
    the Laplacian coupling relies on.
    """

    x_mean: np.ndarray  # (M, D)
    y_mean: np.ndarray  # (M,)
    scale: np.ndarray  # (D,)

    @classmethod
    def fit(cls, data: StationDataset) -> "Standardizer":
        Xs = [data.X(l) for l in range(data.M)]
        x_mean = np.array([X.mean(axis=0) for X in Xs])
        y_mean = np.array([v.mean() for v in data.y])
        centred = np.vstack([X - m for X, m in zip(Xs, x_mean)])
        scale = np.sqrt(np.mean(centred**2, axis=0))
        scale[scale < 1e-12] = 1.0
        return cls(x_mean, y_mean, scale)

    def transform(self, data: StationDataset, with_y: bool = True) -> StationDataset:
        Xs, Xt, ys = [], [], []
        ds = data.D_s
        for l in range(data.M):
            Z = (data.X(l) - self.x_mean[l]) / self.scale
            Xs.append(Z[:, :ds])
            Xt.append(Z[:, ds:])
            ys.append(data.y[l] - self.y_mean[l] if with_y else data.y[l])
        return replace(data, Xs=Xs, Xt=Xt, y=ys)

    def to_dict(self) -> dict:
        return {"x_mean": self.x_mean.tolist(), "y_mean": self.y_mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["x_mean"], float), np.asarray(d["y_mean"], float), np.asarray(d["scale"], float))
