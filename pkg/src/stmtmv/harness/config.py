"""Experiment configuration, read from a YAML key/value file."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from ..errors import ConfigError, InvalidInputError
from ..features import FeatureConfig
from ..pipegraph import DEFAULT_TRIPLET, PowerTriplet
from .synthetic import SyntheticSpec

HORIZONS = (1, 2, 3, 4)
MODELS = ("decay", "ols", "lasso", "mrmtl", "stmtmv-us", "stmtmv-ws", "stmtmv-sv", "stmtmv")
DEFAULT_GRID = (1e-3, 1e-2, 1e-1, 1.0, 10.0)


@dataclass(frozen=True)
class DataPaths:
    """``series`` maps station id to its time-series CSV."""

    series: dict[str, str]
    geo: str
    pipes: str
    stations: str

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None) -> "DataPaths":
        def resolve(p):
            p = Path(p)
            return str(p if p.is_absolute() or base is None else base / p)

        try:
            series = d["series"]
            if isinstance(series, str):
                # a directory of <station_id>.csv files
                folder = Path(resolve(series))
                series = {p.stem: str(p) for p in sorted(folder.glob("*.csv"))}
            else:
                series = {str(k): resolve(v) for k, v in dict(series).items()}
            return cls(series, resolve(d["geo"]), resolve(d["pipes"]), resolve(d["stations"]))
        except KeyError as e:
            raise ConfigError(f"data section is missing key {e.args[0]!r}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    horizons: tuple[int, ...] = HORIZONS
    train_fraction: float = 0.5
    split_mode: str = "chronological"
    gap: int = 0
    validation_fraction: float = 0.2
    models: tuple[str, ...] = MODELS
    grid: tuple[float, ...] = DEFAULT_GRID
    k: int = 3
    triplet: PowerTriplet = DEFAULT_TRIPLET
    max_iters: int = 2000
    tol: float = 1e-6
    standardize: bool = True
    synthetic: SyntheticSpec | None = None
    data: DataPaths | None = None
    features: FeatureConfig = field(default_factory=FeatureConfig)

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ConfigError("seed is mandatory and must be an integer")
        if not self.horizons or any(h not in HORIZONS for h in self.horizons):
            raise ConfigError(f"horizons must be a non-empty subset of {HORIZONS}, got {self.horizons}")
        if not 0 < self.train_fraction < 1:
            raise ConfigError(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if not 0 < self.validation_fraction < 1:
            raise ConfigError("validation_fraction must lie in (0, 1)")
        if self.split_mode != "chronological":
            raise ConfigError(f"unsupported split_mode {self.split_mode!r}; only 'chronological' is available")
        if self.gap < 0:
            raise ConfigError("gap must be non-negative")
        bad = [m for m in self.models if m not in MODELS]
        if bad or not self.models:
            raise ConfigError(f"unknown models {bad}; choose from {MODELS}")
        if not self.grid or any(not v > 0 for v in self.grid):
            raise ConfigError("grid values must be positive")
        if self.k < 1 or self.max_iters < 1 or self.tol <= 0:
            raise ConfigError("k, max_iters and tol must be positive")
        if (self.synthetic is None) == (self.data is None):
            raise ConfigError("give exactly one of a 'synthetic' or a 'data' section")

    @classmethod
    def from_dict(cls, d: dict, base: Path | None = None) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a mapping of keys to values")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        kw = dict(d)
        if "seed" not in kw:
            raise ConfigError("seed is mandatory")
        try:
            for key in ("horizons", "models", "grid"):
                if key in kw:
                    kw[key] = tuple(kw[key])
            if "triplet" in kw:
                kw["triplet"] = PowerTriplet(*kw["triplet"])
            if kw.get("synthetic") is not None:
                spec = dict(kw["synthetic"])
                for rng_key in ("length_range", "diameter_range", "age_range"):
                    if rng_key in spec:
                        spec[rng_key] = tuple(spec[rng_key])
                kw["synthetic"] = SyntheticSpec(**spec)
            if kw.get("data") is not None:
                kw["data"] = DataPaths.from_dict(kw["data"], base)
            if "features" in kw:
                feat = dict(kw["features"])
                for tup in ("acf_lags", "weather_vocab"):
                    if tup in feat:
                        feat[tup] = tuple(feat[tup])
                kw["features"] = FeatureConfig(**feat)
            return cls(**kw)
        except (TypeError, InvalidInputError) as e:
            raise ConfigError(f"invalid config: {e}") from None

    @classmethod
    def load(cls, path, seed: int | None = None) -> "ExperimentConfig":
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text())
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
        except yaml.YAMLError as e:
            raise ConfigError(f"{path}: not valid YAML ({e})") from None
        raw = raw or {}
        if seed is not None:
            raw["seed"] = seed
        return cls.from_dict(raw, base=path.parent)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["triplet"] = list(self.triplet.as_tuple())
        return json.loads(json.dumps(d, default=list))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]
