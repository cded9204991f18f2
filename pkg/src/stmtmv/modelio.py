"""JSON container for fitted models of every kind."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .baselines import KINDS, BaselineModel
from .data import Standardizer
from .errors import DataError
from .solver import SolverParams, StMTMV

FORMAT = "stmtmv-model"
VERSION = 1


def model_to_dict(model) -> dict:
    W = getattr(model, "W", None)
    if isinstance(model, StMTMV):
        params = dict(vars(model.params))
    else:
        params = dict(model.params)
    return {
        "format": FORMAT,
        "version": VERSION,
        "kind": model.kind,
        "D_s": int(model.D_s),
        "D_t": None if W is None else int(W.shape[0] - model.D_s),
        "station_ids": list(model.station_ids),
        "W": None if W is None else np.asarray(W).tolist(),
        "scaler": model.scaler.to_dict() if model.scaler is not None else None,
        "params": params,
    }


def model_from_dict(d: dict):
    if d.get("format") != FORMAT:
        raise DataError("not a model file (format tag missing)")
    if d.get("version") != VERSION:
        raise DataError(f"unsupported model file version {d.get('version')}")
    kind = d.get("kind")
    W = None if d.get("W") is None else np.asarray(d["W"], dtype=float)
    scaler = Standardizer.from_dict(d["scaler"]) if d.get("scaler") else None
    if W is not None and (W.ndim != 2 or W.shape[0] != d["D_s"] + d["D_t"]):
        raise DataError("weight matrix does not match the stored view sizes")
    if kind == "stmtmv":
        model = StMTMV(SolverParams(**d["params"]), standardize=scaler is not None)
        model.W, model.scaler = W, scaler
        model.D_s, model.station_ids = int(d["D_s"]), list(d["station_ids"])
        return model
    if kind in KINDS:
        return BaselineModel(kind, W, dict(d["params"]), scaler, list(d["station_ids"]), int(d["D_s"] or 0))
    raise DataError(f"unknown model kind {kind!r}")


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path):
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except OSError as e:
        raise DataError(f"{path}: cannot read ({e.strerror})") from None
    except json.JSONDecodeError as e:
        raise DataError(f"{path}: line {e.lineno}: not valid JSON") from None
    return model_from_dict(d)
