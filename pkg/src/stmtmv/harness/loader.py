"""CSV ingestion: station series, geo summaries and the pipe network.

Each station series is placed on a regular grid at its own sampling step.
Every hourly timestamp with a full history window becomes one sample; the
target is the chlorine reading ``horizon`` hours later.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from ..data import StationDataset
from ..errors import DataError, InvalidInputError
from ..features import (
    GeoSummary,
    MeteoSnapshot,
    TimeSeriesWindow,
    build_spatial_view,
    build_temporal_view,
)
from ..pipegraph import TaskCoupling, correlation_matrix, read_network

log = logging.getLogger(__name__)

SERIES_COLUMNS = (
    "timestamp_iso8601", "rc_mgL", "turbidity_ntu", "ph", "flow_m3h", "pressure_kPa",
    "temp_C", "humidity_pct", "baro_hPa", "wind_ms", "weather_code",
)
SENSOR_COLUMNS = ("rc_mgL", "turbidity_ntu", "ph", "flow_m3h", "pressure_kPa")
METEO_COLUMNS = ("temp_C", "humidity_pct", "baro_hPa", "wind_ms")
GEO_FIXED = ("station_id", "road_len_km", "intersections", "poi_density")
PIPE_COLUMNS = ("node_a", "node_b", "length_km", "diameter_mm", "age_years")
STATION_COLUMNS = ("station_id", "node_id")


def geo_columns(n_poi: int) -> tuple[str, ...]:
    return GEO_FIXED + tuple(f"poi_c{i:02d}" for i in range(1, n_poi + 1))


def read_table(path, required) -> list[tuple[int, dict[str, str]]]:
    """Rows as ``(line number, row)``; a missing column is a ``DataError``."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            missing = [c for c in required if c not in header]
            if missing:
                raise DataError(f"{path}: line 1: missing column {missing[0]!r}")
            return [(reader.line_num, row) for row in reader]
    except OSError as e:
        raise DataError(f"{path}: cannot read ({e.strerror})") from None


def _number(path, line, row, col, allow_missing=True) -> float:
    raw = (row.get(col) or "").strip()
    if raw == "" or raw.lower() in ("nan", "na"):
        if allow_missing:
            return np.nan
        raise DataError(f"{path}: line {line}: column {col!r} is empty")
    try:
        v = float(raw)
    except ValueError:
        raise DataError(f"{path}: line {line}: column {col!r}: cannot parse {raw!r} as a number") from None
    if not np.isfinite(v):
        raise DataError(f"{path}: line {line}: column {col!r}: non-finite value")
    return v


@dataclass
class StationSeries:
    """One station's readings on a regular grid; gaps are NaN."""

    station_id: str
    start: datetime
    step_minutes: float
    sensors: np.ndarray  # (T, 5)
    meteo: np.ndarray  # (T, 4)
    weather: list[str | None]

    def time(self, i: int) -> datetime:
        return self.start + timedelta(minutes=self.step_minutes * i)


def read_series(path, station_id: str) -> StationSeries:
    rows = read_table(path, SERIES_COLUMNS)
    if len(rows) < 2:
        raise DataError(f"{path}: need at least two rows")
    stamps, sensors, meteo, weather = [], [], [], []
    for line, row in rows:
        raw = (row["timestamp_iso8601"] or "").strip()
        try:
            ts = datetime.fromisoformat(raw.replace("Z", "+00:00"))
        except ValueError:
            raise DataError(f"{path}: line {line}: column 'timestamp_iso8601': bad timestamp {raw!r}") from None
        if stamps and ts <= stamps[-1]:
            raise DataError(f"{path}: line {line}: timestamps must be strictly increasing")
        stamps.append(ts)
        sensors.append([_number(path, line, row, c) for c in SENSOR_COLUMNS])
        meteo.append([_number(path, line, row, c) for c in METEO_COLUMNS])
        code = (row["weather_code"] or "").strip()
        weather.append(code or None)

    gaps = np.diff([t.timestamp() for t in stamps]) / 60.0
    step = float(np.min(gaps))
    offsets = np.array([(t - stamps[0]).total_seconds() / 60.0 for t in stamps]) / step
    if not np.allclose(offsets, np.round(offsets), atol=1e-6):
        raise DataError(f"{path}: timestamps are not on a regular {step:g}-minute grid")
    idx = np.round(offsets).astype(int)
    T = int(idx[-1]) + 1
    S = np.full((T, len(SENSOR_COLUMNS)), np.nan)
    Mt = np.full((T, len(METEO_COLUMNS)), np.nan)
    Wc: list[str | None] = [None] * T
    S[idx] = sensors
    Mt[idx] = meteo
    for i, code in zip(idx, weather):
        Wc[i] = code
    return StationSeries(station_id, stamps[0], step, S, Mt, Wc)


def _ffill(a: np.ndarray, backfill: bool = True) -> np.ndarray:
    """Forward fill along axis 0, then (optionally) back fill any leading gap."""
    a = a.copy()
    for j in range(a.shape[1]):
        col = a[:, j]
        ok = np.flatnonzero(~np.isnan(col))
        if ok.size == 0:
            continue
        pos = np.maximum.accumulate(np.where(~np.isnan(col), np.arange(col.size), -1))
        lead = pos < 0
        pos[lead] = ok[0]
        a[:, j] = col[pos]
        if not backfill:
            a[lead, j] = np.nan
    return a


def read_geo(path, n_poi: int) -> dict[str, GeoSummary]:
    cols = geo_columns(n_poi)
    out = {}
    for line, row in read_table(path, cols):
        sid = (row["station_id"] or "").strip()
        vals = [_number(path, line, row, c, allow_missing=False) for c in cols[1:]]
        try:
            g = GeoSummary(vals[0], vals[1], tuple(vals[3:]), vals[2])
            g.validate(n_poi)
        except InvalidInputError as e:
            raise DataError(f"{path}: line {line}: {e}") from None
        out[sid] = g
    return out


def read_pipes(pipes_path, stations_path):
    pipes = [row for _, row in read_table(pipes_path, PIPE_COLUMNS)]
    stations = {row["station_id"].strip(): row["node_id"].strip() for _, row in read_table(stations_path, STATION_COLUMNS)}
    try:
        return read_network(pipes, stations)
    except (InvalidInputError, ValueError) as e:
        raise DataError(f"{pipes_path}: {e}") from None


@dataclass
class LoadReport:
    skipped: dict[str, int] = field(default_factory=dict)

    @property
    def total_skipped(self) -> int:
        return sum(self.skipped.values())


def _hour_index(s: StationSeries, i: int) -> bool:
    t = s.time(i)
    return t.minute == 0 and t.second == 0 and t.microsecond == 0


def build_dataset(
    series: list[StationSeries],
    geo: dict[str, GeoSummary],
    coupling: TaskCoupling,
    horizon: int,
    features,
) -> tuple[StationDataset, LoadReport]:
    report = LoadReport()
    ids = [s.station_id for s in series]
    missing = [sid for sid in ids if sid not in geo]
    if missing:
        raise DataError(f"geo summary has no row for station {missing[0]!r}")

    # latest forward-filled chlorine reading per station and timestamp, for the neighbour feature
    rc_at = []
    for s in series:
        filled = _ffill(s.sensors[:, :1], backfill=False)[:, 0]
        rc_at.append({s.time(i): filled[i] for i in range(filled.size) if not np.isnan(filled[i])})

    Xs, Xt, y, stamps, windows = [], [], [], [], []
    for l, s in enumerate(series):
        n_win = int(round(features.span_hours * 60.0 / s.step_minutes))
        ahead = int(round(horizon * 60.0 / s.step_minutes))
        if n_win < 1 or ahead < 1 or abs(n_win * s.step_minutes - features.span_hours * 60.0) > 1e-6:
            raise DataError(f"station {s.station_id}: step {s.step_minutes:g} min does not divide the window")
        rows_s, rows_t, targets, ts, wins = [], [], [], [], []
        skipped = 0
        for end in range(n_win - 1, s.sensors.shape[0] - ahead):
            if not _hour_index(s, end):
                continue
            lo = end - n_win + 1
            block = s.sensors[lo : end + 1]
            met = s.meteo[lo : end + 1]
            codes = [c for c in s.weather[lo : end + 1] if c is not None]
            target = s.sensors[end + ahead, 0]
            frac = np.isnan(block).mean(axis=0).max()
            if frac > features.max_missing_frac or np.isnan(target) or np.all(np.isnan(met), axis=0).any() or not codes:
                skipped += 1
                continue
            block, met = _ffill(block), _ffill(met)
            wset = [TimeSeriesWindow(block[:, j], s.step_minutes, features.span_hours) for j in range(block.shape[1])]
            t_end = s.time(end)
            snap = MeteoSnapshot(*met[-1], weather=codes[-1])
            try:
                tv = build_temporal_view(*wset, snap, t_end.hour + t_end.minute / 60.0, features)
            except InvalidInputError as e:
                raise DataError(f"station {s.station_id} at {t_end.isoformat()}: {e}") from None
            others = [m for m in range(len(series)) if m != l]
            nb_rc = [rc_at[m].get(t_end, np.nan) for m in others]
            nb_w = [coupling.C[l, m] if not np.isnan(v) else 0.0 for m, v in zip(others, nb_rc)]
            nb_rc = [0.0 if np.isnan(v) else v for v in nb_rc]
            sv = build_spatial_view(geo[s.station_id], nb_rc, nb_w, features)
            rows_s.append(sv.values)
            rows_t.append(tv.values)
            targets.append(target)
            ts.append(t_end.timestamp())
            wins.append(wset[0])
        if skipped:
            log.warning("station %s: skipped %d windows with too much missing data", s.station_id, skipped)
        report.skipped[s.station_id] = skipped
        if not targets:
            raise DataError(f"station {s.station_id}: no usable samples at horizon {horizon} h")
        Xs.append(np.array(rows_s))
        Xt.append(np.array(rows_t))
        y.append(np.array(targets))
        stamps.append(np.array(ts))
        held = np.empty(len(wins), dtype=object)
        for i, w in enumerate(wins):
            held[i] = w
        windows.append(held)
    step = series[0].step_minutes
    data = StationDataset(Xs, Xt, y, ids, timestamps=stamps, rc_windows=windows, step_minutes=step)
    return data, report


def load_dataset(paths, cfg, horizon: int):
    """Dataset, station coupling and skip report for one forecast horizon."""
    series = [read_series(p, sid) for sid, p in paths.series.items()]
    if not series:
        raise DataError("no station series files given")
    geo = read_geo(paths.geo, cfg.features.n_poi_categories)
    net = read_pipes(paths.pipes, paths.stations)
    ids = [s.station_id for s in series]
    if len(ids) >= 2:
        try:
            coupling = correlation_matrix(net, ids, cfg.k, cfg.triplet, normalize=True)
        except InvalidInputError as e:
            raise DataError(str(e)) from None
    else:
        coupling = TaskCoupling.from_matrix(np.zeros((1, 1)), cfg.k)
    data, report = build_dataset(series, geo, coupling, horizon, cfg.features)
    return data, coupling, report
