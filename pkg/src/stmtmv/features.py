"""Temporal and spatial feature extraction for monitoring stations.

Every extractor accepts either a :class:`TimeSeriesWindow` or a plain
1-D array-like and returns a numpy vector.  The view builders concatenate
extractor outputs in a fixed order that is described by
:func:`temporal_layout` / :func:`spatial_layout`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvalidInputError

SERIES_NAMES = ("rc", "turbidity", "ph", "flow", "pressure")
METEO_NUMERIC = ("temperature", "humidity", "barometer", "wind_speed")
DEFAULT_WEATHER = ("clear", "cloudy", "fog", "rain", "storm")
N_POI_CATEGORIES = 20


@dataclass(frozen=True)
class TimeSeriesWindow:
    """A uniformly sampled window of one sensor series.

    ``step`` is the sampling interval in minutes and ``span`` the nominal
    window length in hours.
    """

    values: np.ndarray
    step: float = 60.0
    span: float = 12.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size == 0:
            raise InvalidInputError("time series window is empty")
        if not np.all(np.isfinite(v)):
            raise InvalidInputError("time series window contains non-finite values")
        if self.step <= 0 or self.span <= 0:
            raise InvalidInputError("step and span must be positive")
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class MeteoSnapshot:
    temperature: float
    humidity: float
    barometer: float
    wind_speed: float
    weather: str

    def validate(self, vocab: Sequence[str]) -> None:
        if not 0.0 <= self.humidity <= 100.0:
            raise InvalidInputError(f"humidity {self.humidity} outside [0, 100]")
        if self.weather not in vocab:
            raise InvalidInputError(f"weather code {self.weather!r} not in vocabulary {list(vocab)}")


@dataclass(frozen=True)
class GeoSummary:
    road_total_length: float
    road_intersections: float
    poi_counts: tuple[float, ...]
    poi_density: float

    def validate(self, n_categories: int = N_POI_CATEGORIES) -> None:
        if len(self.poi_counts) != n_categories:
            raise InvalidInputError(
                f"expected {n_categories} POI categories, got {len(self.poi_counts)}"
            )
        vals = (self.road_total_length, self.road_intersections, self.poi_density, *self.poi_counts)
        if any(v < 0 or not np.isfinite(v) for v in vals):
            raise InvalidInputError("geo summary entries must be finite and non-negative")


@dataclass(frozen=True)
class FeatureConfig:
    acf_lags: tuple[int, ...] = (1, 2, 3)
    paa_segments: int = 4
    pla_segments: int = 4
    fft_k: int = 3
    dwt_k: int = 3
    span_hours: float = 12.0
    weather_vocab: tuple[str, ...] = DEFAULT_WEATHER
    n_poi_categories: int = N_POI_CATEGORIES
    max_missing_frac: float = 0.2

    @property
    def per_series(self) -> int:
        return 6 + len(self.acf_lags) + self.paa_segments + 2 * self.pla_segments + self.fft_k + self.dwt_k

    @property
    def temporal_dim(self) -> int:
        return len(SERIES_NAMES) * self.per_series + len(METEO_NUMERIC) + len(self.weather_vocab) + 2

    @property
    def spatial_dim(self) -> int:
        return 3 + self.n_poi_categories + 1


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    layout: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if len(self.layout) != len(self.values):
            raise InvalidInputError("layout length does not match values length")


def _as_array(w) -> np.ndarray:
    if isinstance(w, TimeSeriesWindow):
        return w.values
    v = np.asarray(w, dtype=float).ravel()
    if v.size == 0:
        raise InvalidInputError("time series window is empty")
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("time series window contains non-finite values")
    return v


def stat_features(w) -> np.ndarray:
    """Mean, variance, max, min, skewness and excess kurtosis.

    Population moments are used; skewness and kurtosis are 0 for a
    constant series.
    """
    x = _as_array(w)
    mean = x.mean()
    dev = x - mean
    m2 = np.mean(dev**2)
    if np.ptp(x) > 0 and m2 > 0:
        skew = np.mean(dev**3) / m2**1.5
        kurt = np.mean(dev**4) / m2**2 - 3.0
    else:
        m2, skew, kurt = 0.0, 0.0, 0.0
    return np.array([mean, m2, x.max(), x.min(), skew, kurt])


def autocorrelation(w, lag: int) -> float:
    x = _as_array(w)
    if not 0 <= lag < x.size:
        raise InvalidInputError(f"lag {lag} outside [0, {x.size})")
    dev = x - x.mean()
    denom = np.dot(dev, dev)
    if np.ptp(x) == 0 or denom == 0:
        return 0.0
    if lag == 0:
        return 1.0
    return float(np.dot(dev[:-lag], dev[lag:]) / denom)


def paa(w, segments: int) -> np.ndarray:
    """Piecewise aggregate approximation with equal-support segments.

    When the length is not a multiple of ``segments`` the samples on a
    boundary are split fractionally between neighbouring segments.
    """
    x = _as_array(w)
    n = x.size
    if not 1 <= segments <= n:
        raise InvalidInputError(f"segments must lie in [1, {n}], got {segments}")
    if n % segments == 0:
        return x.reshape(segments, -1).mean(axis=1)
    # sample i covers [i, i+1) on a stretched axis of length n*segments
    out = np.zeros(segments)
    width = n  # each segment spans n units, each sample spans `segments` units
    for j in range(segments):
        lo, hi = j * width, (j + 1) * width
        first, last = lo // segments, (hi - 1) // segments
        acc = 0.0
        for i in range(first, last + 1):
            overlap = min(hi, (i + 1) * segments) - max(lo, i * segments)
            acc += overlap * x[i]
        out[j] = acc / width
    return out


def pla(w, segments: int) -> np.ndarray:
    """Per-segment least-squares lines, returned as (slope, intercept) pairs."""
    x = _as_array(w)
    if segments < 1 or x.size // segments < 2:
        raise InvalidInputError(
            f"{x.size} points cannot fill {segments} segments with at least 2 points each"
        )
    out = np.empty(2 * segments)
    for j, seg in enumerate(np.array_split(x, segments)):
        t = np.arange(seg.size, dtype=float)
        tc = t - t.mean()
        sxx = np.dot(tc, tc)
        slope = np.dot(tc, seg - seg.mean()) / sxx
        if np.ptp(seg) == 0:
            slope = 0.0
        out[2 * j] = slope
        out[2 * j + 1] = seg.mean() - slope * t.mean()
    return out


def _top_magnitudes(mags: np.ndarray, k: int) -> np.ndarray:
    # stable sort keeps the input order (already the tie-break order) among equals
    order = np.argsort(-mags, kind="stable")[:k]
    out = np.zeros(k)
    out[: order.size] = mags[order]
    return out


def fft_topk(w, k: int = 3) -> np.ndarray:
    """Largest ``k`` non-DC DFT magnitudes over the half spectrum."""
    x = _as_array(w)
    if x.size < 2:
        raise InvalidInputError("FFT features need at least 2 samples")
    mags = np.abs(np.fft.rfft(x))[1:]
    # constant inputs leave round-off noise in the non-DC bins
    mags[mags < 1e-12 * max(1.0, np.abs(x).max()) * x.size] = 0.0
    return _top_magnitudes(mags, k)


def haar_details(x: np.ndarray) -> list[np.ndarray]:
    """Orthonormal Haar detail coefficients, coarsest level first."""
    a = np.asarray(x, dtype=float)
    levels = []
    while a.size > 1:
        even, odd = a[0::2], a[1::2]
        levels.append((even - odd) / np.sqrt(2.0))
        a = (even + odd) / np.sqrt(2.0)
    return levels[::-1]


def dwt_topk(w, k: int = 3) -> np.ndarray:
    """Largest ``k`` Haar detail magnitudes.

    The series is cut to its most recent ``2**j`` samples.  Ties go to the
    coarser level, then the earlier position.
    """
    x = _as_array(w)
    if x.size < 2:
        raise InvalidInputError("DWT features need at least 2 samples")
    n = 1 << (x.size.bit_length() - 1)
    details = np.concatenate(haar_details(x[-n:]))
    mags = np.abs(details)
    mags[mags < 1e-12 * max(1.0, np.abs(x).max())] = 0.0
    return _top_magnitudes(mags, k)


def series_features(w, cfg: FeatureConfig = FeatureConfig()) -> np.ndarray:
    x = _as_array(w)
    return np.concatenate(
        [
            stat_features(x),
            [autocorrelation(x, lag) if lag < x.size else 0.0 for lag in cfg.acf_lags],
            paa(x, cfg.paa_segments),
            pla(x, cfg.pla_segments),
            fft_topk(x, cfg.fft_k),
            dwt_topk(x, cfg.dwt_k),
        ]
    )


def _series_layout(prefix: str, cfg: FeatureConfig) -> list[str]:
    names = [f"{prefix}.{s}" for s in ("mean", "var", "max", "min", "skew", "kurt")]
    names += [f"{prefix}.acf{lag}" for lag in cfg.acf_lags]
    names += [f"{prefix}.paa{j}" for j in range(cfg.paa_segments)]
    for j in range(cfg.pla_segments):
        names += [f"{prefix}.pla{j}.slope", f"{prefix}.pla{j}.intercept"]
    names += [f"{prefix}.fft{j}" for j in range(cfg.fft_k)]
    names += [f"{prefix}.dwt{j}" for j in range(cfg.dwt_k)]
    return names


def temporal_layout(cfg: FeatureConfig = FeatureConfig()) -> tuple[str, ...]:
    names = []
    for s in SERIES_NAMES:
        names += _series_layout(s, cfg)
    names += [f"meteo.{m}" for m in METEO_NUMERIC]
    names += [f"weather={c}" for c in cfg.weather_vocab]
    names += ["tod.sin", "tod.cos"]
    return tuple(names)


def spatial_layout(cfg: FeatureConfig = FeatureConfig()) -> tuple[str, ...]:
    names = ["road_len", "road_intersections", "poi_density"]
    names += [f"poi_c{j + 1:02d}" for j in range(cfg.n_poi_categories)]
    names.append("neighbor_rc")
    return tuple(names)


def build_temporal_view(
    rc, turbidity, ph, flow, pressure,
    meteo: MeteoSnapshot,
    hour_of_day: float,
    cfg: FeatureConfig = FeatureConfig(),
) -> FeatureVector:
    windows = (rc, turbidity, ph, flow, pressure)
    spans = {w.span for w in windows if isinstance(w, TimeSeriesWindow)}
    if len(spans) > 1:
        raise InvalidInputError(f"windows cover different spans: {sorted(spans)}")
    if not 0 <= hour_of_day < 24:
        raise InvalidInputError(f"hour_of_day {hour_of_day} outside [0, 24)")
    meteo.validate(cfg.weather_vocab)

    onehot = np.zeros(len(cfg.weather_vocab))
    onehot[cfg.weather_vocab.index(meteo.weather)] = 1.0
    angle = 2.0 * np.pi * hour_of_day / 24.0
    values = np.concatenate(
        [series_features(w, cfg) for w in windows]
        + [
            [meteo.temperature, meteo.humidity, meteo.barometer, meteo.wind_speed],
            onehot,
            [np.sin(angle), np.cos(angle)],
        ]
    )
    return FeatureVector(values, temporal_layout(cfg))


def build_spatial_view(
    geo: GeoSummary,
    neighbor_rc: Sequence[float],
    coupling_row: Sequence[float],
    cfg: FeatureConfig = FeatureConfig(),
) -> FeatureVector:
    geo.validate(cfg.n_poi_categories)
    rc = np.asarray(neighbor_rc, dtype=float).ravel()
    wts = np.asarray(coupling_row, dtype=float).ravel()
    if rc.shape != wts.shape:
        raise InvalidInputError(
            f"{rc.size} neighbour readings but {wts.size} coupling weights"
        )
    if np.any(wts < 0):
        raise InvalidInputError("coupling weights must be non-negative")
    total = wts.sum()
    aggregate = float(np.dot(wts, rc) / total) if total > 0 else 0.0
    values = np.concatenate(
        [
            [geo.road_total_length, geo.road_intersections, geo.poi_density],
            np.asarray(geo.poi_counts, dtype=float),
            [aggregate],
        ]
    )
    return FeatureVector(values, spatial_layout(cfg))
