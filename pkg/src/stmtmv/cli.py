"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data or input error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .baselines import BaselineModel, lasso_fit, mrmtl_fit, ols_fit
from .data import StationDataset, split_chronological
from .errors import ConfigError, DataError, InvalidInputError, NumericFailureError
from .features import FeatureConfig, spatial_layout, temporal_layout
from .harness.config import ExperimentConfig
from .harness.experiment import horizon_data, run_experiment
from .harness.loader import read_pipes, read_table
from .harness.metrics import accuracy, rmse
from .harness.synthetic import SyntheticSpec, generate_synthetic
from .modelio import load_model, save_model
from .pipegraph import PowerTriplet, TaskCoupling, correlation_matrix, power_triplet_scan
from .solver import VARIANTS, SolverParams, StMTMV

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 2, 3, 4


# --- small file helpers ------------------------------------------------------

def _write_matrix(path: Path, ids, A) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["station_id", *ids])
        for sid, row in zip(ids, A):
            w.writerow([sid, *(repr(float(v)) for v in row)])


def _read_matrix(path) -> tuple[list[str], np.ndarray]:
    rows = read_table(path, ["station_id"])
    ids = [r["station_id"] for _, r in rows]
    try:
        A = np.array([[float(r[s]) for s in ids] for _, r in rows])
    except (KeyError, ValueError) as e:
        raise DataError(f"{path}: matrix must be square with station columns ({e})") from None
    return ids, A


def write_design(out: Path, data: StationDataset) -> None:
    """One CSV per station with columns s0.., t0.., y."""
    out.mkdir(parents=True, exist_ok=True)
    (out / "stations.txt").write_text("".join(f"{s}\n" for s in data.station_ids))
    header = [f"s{j}" for j in range(data.D_s)] + [f"t{j}" for j in range(data.D_t)] + ["y"]
    for l, sid in enumerate(data.station_ids):
        with (out / f"{sid}.csv").open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row, target in zip(data.X(l), data.y[l]):
                w.writerow([repr(float(v)) for v in row] + [repr(float(target))])


def read_design(folder) -> StationDataset:
    folder = Path(folder)
    try:
        ids = [s for s in (folder / "stations.txt").read_text().split() if s]
    except OSError:
        raise DataError(f"{folder}: missing stations.txt") from None
    Xs, Xt, y = [], [], []
    for sid in ids:
        path = folder / f"{sid}.csv"
        rows = read_table(path, ["y"])
        if not rows:
            raise DataError(f"{path}: no rows")
        cols = list(rows[0][1].keys())
        s_cols = [c for c in cols if c.startswith("s")]
        t_cols = [c for c in cols if c.startswith("t")]
        try:
            Xs.append(np.array([[float(r[c]) for c in s_cols] for _, r in rows]).reshape(len(rows), len(s_cols)))
            Xt.append(np.array([[float(r[c]) for c in t_cols] for _, r in rows]).reshape(len(rows), len(t_cols)))
            y.append(np.array([float(r["y"]) for _, r in rows]))
        except ValueError as e:
            raise DataError(f"{path}: {e}") from None
    return StationDataset(Xs, Xt, y, ids)


def _dataset(args, default_split: str):
    """Dataset and coupling from ``--design``/``--coupling`` or ``--config``/``--horizon``."""
    if args.design:
        data = read_design(args.design)
        if args.coupling:
            ids, C = _read_matrix(args.coupling)
            if ids != data.station_ids:
                raise DataError("coupling stations do not match the design stations")
            coupling = TaskCoupling.from_matrix(C)
        else:
            coupling = TaskCoupling.from_matrix(np.zeros((data.M, data.M)))
        return data, coupling
    if not args.config:
        raise ConfigError("give --design or --config")
    cfg = ExperimentConfig.load(args.config, seed=args.seed)
    data, coupling = horizon_data(cfg, args.horizon)
    split = args.split or default_split
    if split != "all":
        train, test = split_chronological(data, cfg.train_fraction, gap=cfg.gap)
        data = train if split == "train" else test
    return data, coupling


# --- subcommands ---------------------------------------------------------------

def cmd_synth(args) -> int:
    spec = ExperimentConfig.load(args.config, seed=args.seed).synthetic if args.config else SyntheticSpec()
    if spec is None:
        raise ConfigError("config has no synthetic section")
    inst = generate_synthetic(spec, args.seed)
    out = Path(args.out_dir)
    write_design(out / "design", inst.data)
    _write_matrix(out / "C.csv", inst.data.station_ids, inst.coupling.C)
    np.savetxt(out / "planted_W.csv", inst.W, delimiter=",", fmt="%.17g")
    with (out / "pipes.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_a", "node_b", "length_km", "diameter_mm", "age_years"])
        for s in inst.network.segments:
            w.writerow([s.a, s.b, repr(s.length), repr(s.diameter), repr(s.age)])
    with (out / "stations.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["station_id", "node_id"])
        for sid, node in inst.network.station_nodes.items():
            w.writerow([sid, node])
    print(f"wrote synthetic instance (M={spec.M}, D={spec.D}) to {out}")
    return 0


def cmd_features(args) -> int:
    cfg = ExperimentConfig.load(args.config, seed=0).features if args.config else FeatureConfig()
    if not args.describe:
        raise ConfigError("features: only --describe is supported")
    names = list(spatial_layout(cfg)) + list(temporal_layout(cfg))
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["name", "index"])
    for i, n in enumerate(names):
        w.writerow([n, i])
    return 0


def _network_and_stations(args):
    net = read_pipes(args.pipes, args.stations)
    ids = list(net.station_nodes)
    return net, ids


def cmd_correlate(args) -> int:
    net, ids = _network_and_stations(args)
    coupling = correlation_matrix(net, ids, args.k, PowerTriplet(*args.triplet), normalize=args.normalize)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_matrix(out / "C.csv", ids, coupling.C)
    _write_matrix(out / "L.csv", ids, coupling.L)
    print(f"wrote C.csv and L.csv for {len(ids)} stations to {out}")
    return 0


def cmd_scan_powers(args) -> int:
    net, ids = _network_and_stations(args)
    corr_ids, corr = _read_matrix(args.corr)
    if corr_ids != ids:
        raise DataError("correlation matrix stations do not match the station map order")
    ranked = power_triplet_scan(net, ids, corr, args.k)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "pow_d", "pow_len", "pow_age", "correlation"])
        for r, (t, score) in enumerate(ranked[: args.top] if args.top else ranked, start=1):
            w.writerow([r, t.pow_d, t.pow_len, t.pow_age, f"{score:.6f}"])
    finally:
        if args.out:
            fh.close()
    return 0


def cmd_fit(args) -> int:
    data, coupling = _dataset(args, "train")
    std = not args.raw
    if args.model == "stmtmv":
        p = SolverParams(lam=args.lam, gamma=args.gamma, theta=args.theta, variant=args.variant)
        model = StMTMV(p, standardize=std).fit(data, coupling)
    elif args.model == "ols":
        model = ols_fit(data, standardize=std)
    elif args.model == "lasso":
        model = lasso_fit(data, args.alpha, standardize=std)
    elif args.model == "mrmtl":
        model = mrmtl_fit(data, args.lam, args.theta, standardize=std)
    else:
        model = BaselineModel("decay", station_ids=list(data.station_ids))
    save_model(model, args.out)
    print(f"saved {args.model} model to {args.out}")
    return 0


def _predictions(args):
    model = load_model(args.model)
    data, _ = _dataset(args, "test")
    if model.kind == "decay":
        return data, model.predict(data, horizon_hours=args.horizon)
    return data, model.predict(data)


def cmd_predict(args) -> int:
    data, preds = _predictions(args)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["station_id", "row", "prediction"])
        for sid, p in zip(data.station_ids, preds):
            for i, v in enumerate(p):
                w.writerow([sid, i, repr(float(v))])
    finally:
        if args.out:
            fh.close()
    return 0


def cmd_eval(args) -> int:
    data, preds = _predictions(args)
    scores = {"rmse": rmse(data.y, preds), "acc": accuracy(data.y, preds)}
    print(json.dumps(scores))
    return 0


def cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config, seed=args.seed)
    table = run_experiment(cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "results.csv").write_text(table.to_csv())
    (out / "results_long.csv").write_text(table.to_long_csv())
    (out / "results.txt").write_text(table.to_text())
    # timestamps live here, not in the CSVs, so the tables are reproducible byte for byte
    meta = dict(table.meta, finished_utc=datetime.now(timezone.utc).isoformat(timespec="seconds"))
    (out / "meta.json").write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")
    print(table.to_text(), end="")
    return 0


# --- parser ----------------------------------------------------------------------

def _data_args(p):
    p.add_argument("--design", help="folder of per-station design CSVs (see `synth`)")
    p.add_argument("--coupling", help="station coupling matrix CSV (with --design)")
    p.add_argument("--config", help="experiment config (YAML)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--horizon", type=int, default=1, choices=(1, 2, 3, 4))
    p.add_argument("--split", choices=("train", "test", "all"))


def _network_args(p):
    p.add_argument("--pipes", required=True, help="pipe CSV: node_a,node_b,length_km,diameter_mm,age_years")
    p.add_argument("--stations", required=True, help="station map CSV: station_id,node_id")
    p.add_argument("--k", type=int, default=3)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stmtmv", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a planted synthetic instance")
    p.add_argument("--config")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("features", help="feature layout")
    p.add_argument("--describe", action="store_true")
    p.add_argument("--config")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("correlate", help="pipe-network coupling matrix C and Laplacian L")
    _network_args(p)
    p.add_argument("--triplet", type=int, nargs=3, default=(2, -1, -1), metavar=("D", "LEN", "AGE"))
    p.add_argument("--normalize", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("scan-powers", help="rank power triplets against an empirical correlation matrix")
    _network_args(p)
    p.add_argument("--corr", required=True, help="station correlation matrix CSV")
    p.add_argument("--top", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_scan_powers)

    p = sub.add_parser("fit", help="fit one model and save it")
    p.add_argument("--model", required=True, choices=("stmtmv", "decay", "ols", "lasso", "mrmtl"))
    _data_args(p)
    p.add_argument("--lam", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--theta", type=float, default=0.1)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--variant", choices=VARIANTS, default="full")
    p.add_argument("--raw", action="store_true", help="fit on unstandardised features")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    for name, func, helptext in (("predict", cmd_predict, "write predictions"), ("eval", cmd_eval, "print RMSE and accuracy")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--model", required=True, help="model file written by `fit`")
        _data_args(p)
        if name == "predict":
            p.add_argument("--out")
        p.set_defaults(func=func)

    p = sub.add_parser("run", help="full comparison over horizons")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_run)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailureError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, InvalidInputError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
