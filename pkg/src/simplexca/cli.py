"""Command-line experiment driver.

Subcommands
-----------
synth      draw a synthetic dataset and write it as CSV plus a truth sidecar
fit        run an initializer or solver on a dataset, write report + estimate
eval       score an estimate against ground-truth vertices (MSE, angles)
sweep      repeat synth+fit over a grid of T or SNR values, long-format CSV
objective  evaluate a convex-geometry surrogate objective for given vertices

Data goes to files, progress and warnings to standard error.  Identical
seed and configuration give byte-identical outputs; sweep trials may run
in a worker pool (SIMPLEXCA_WORKERS) without changing the results, because
every trial derives its own seed and rows are written in a fixed order.
Exit codes: 0 success, 1 user error (arguments, files, configuration),
2 solver failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import math
import os
import sys

import numpy as np

from .dimred import lift, reduce
from .errors import ConfigError
from .geometry import (
    chance_objective,
    edge_smooth_objective,
    generalized_edge_smooth,
    noiseless_svmin_objective,
    simplex_to_polyhedron,
    sisal_objective,
)
from .isa import IsaConfig, isa_fit
from .metrics import mse, sad
from .model import as_generator, load_dataset, save_dataset, snr_to_sigma, synthesize
from .pureinit import pure_pixel_init
from .report import SolverReport, save_report
from .via import ViaConfig, via_fit

METHODS = ("spa", "isa", "via")
OBJECTIVE_KINDS = ("svmin", "edge", "sisal", "chance", "genedge")


# ---------------------------------------------------------------------------
# configuration


def default_config() -> dict:
    """Resolved-configuration skeleton with solver defaults filled in."""
    via = dataclasses.asdict(ViaConfig())
    via["golden_interval"] = list(via["golden_interval"])
    return {
        "seed": 0,
        "method": "via",
        "trials": 500,
        "n": 3,
        "m": 50,
        "t": 1000,
        "snr_db": 20.0,
        "sigma": None,
        "dimred": True,
        "isa": dataclasses.asdict(IsaConfig()),
        "via": via,
    }


def _overlay(base: dict, upd: dict, prefix=""):
    for key, value in upd.items():
        if key not in base:
            raise ConfigError(f"unknown configuration key {prefix + key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"configuration key {prefix + key!r} must be a table")
            _overlay(base[key], value, prefix + key + ".")
        else:
            base[key] = value


def _parse_keyvalue(text: str) -> dict:
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, value = line.split("=", 1)
        try:
            parsed = json.loads(value.strip())
        except json.JSONDecodeError:
            parsed = value.strip()
        node = out
        parts = key.strip().split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = parsed
    return out


def isa_config(cfg: dict, seed=None) -> IsaConfig:
    kw = dict(cfg["isa"])
    if seed is not None:
        kw["seed"] = int(seed)
    return IsaConfig(**kw)


def via_config(cfg: dict) -> ViaConfig:
    kw = dict(cfg["via"])
    kw["golden_interval"] = tuple(kw["golden_interval"])
    return ViaConfig(**kw)


def validate_config(cfg: dict) -> dict:
    if cfg["method"] not in METHODS:
        raise ConfigError(f"method must be one of {METHODS}, got {cfg['method']!r}")
    for key in ("trials", "n", "m", "t"):
        if not isinstance(cfg[key], int) or cfg[key] < 1:
            raise ConfigError(f"{key} must be a positive integer")
    if cfg["n"] < 2:
        raise ConfigError("n must be at least 2")
    if cfg["seed"] is not None and not isinstance(cfg["seed"], int):
        raise ConfigError("seed must be an integer or null")
    if cfg["sigma"] is not None and not (
        isinstance(cfg["sigma"], (int, float)) and math.isfinite(cfg["sigma"]) and cfg["sigma"] >= 0
    ):
        raise ConfigError("sigma must be a finite non-negative number or null")
    if not (isinstance(cfg["snr_db"], (int, float)) and math.isfinite(cfg["snr_db"])):
        raise ConfigError("snr_db must be a finite number")
    if not isinstance(cfg["dimred"], bool):
        raise ConfigError("dimred must be true or false")
    # construct the solver configs once so bad values fail here, not mid-run
    isa_config(cfg)
    via_config(cfg)
    return cfg


def config_load(path) -> dict:
    """Read a JSON or key=value configuration file over the defaults.

    Unknown keys are errors, never silently ignored, so a typo in an option
    name cannot masquerade as a default run.
    """
    with open(os.fspath(path)) as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            upd = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"malformed JSON configuration: {exc}") from exc
    else:
        upd = _parse_keyvalue(text)
    cfg = default_config()
    _overlay(cfg, upd)
    return validate_config(cfg)


def config_write(cfg: dict, path):
    with open(os.fspath(path), "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _base_config(args) -> dict:
    cfg = config_load(args.config) if getattr(args, "config", None) else default_config()
    # command-line flags override the file
    for key in ("seed", "method", "trials", "n", "m", "t", "snr_db", "sigma"):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    if getattr(args, "no_dimred", False):
        cfg["dimred"] = False
    return validate_config(cfg)


# ---------------------------------------------------------------------------
# small file helpers


def _fmt(value) -> str:
    return "%.17g" % float(value)


def save_matrix(X, path):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    with open(os.fspath(path), "w") as fh:
        for row in X:
            fh.write(",".join(_fmt(v) for v in row))
            fh.write("\n")


def load_matrix(path):
    X = np.loadtxt(os.fspath(path), delimiter=",", ndmin=2)
    return np.asarray(X, dtype=float)


def load_vertices(path):
    """Vertex matrix from a plain CSV, a report JSON, or a dataset's sidecar."""
    path = os.fspath(path)
    with open(path) as fh:
        head = fh.readline().strip().replace(" ", "")
    if head.startswith("{"):
        from .report import load_report

        return load_report(path).a_final
    if head == "M,T":
        ds = load_dataset(path)
        if ds.A0 is None:
            raise ConfigError(f"dataset {path!r} carries no ground-truth vertices")
        return ds.A0
    return load_matrix(path)


def _note(msg: str):
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# fitting plumbing shared by `fit` and `sweep`


def _project_vertices(A, chart):
    return chart.Q.T @ (A - chart.mu[:, None])


def _floor_sigma(sigma, Y, warnings_out):
    # The solvers need sigma > 0.  For noiseless or unlabelled data use 5% of
    # the data RMS: much smaller floors make the concentration search grind
    # against its inner iteration cap, much larger ones bias the vertices.
    if sigma is not None and sigma > 0.0:
        return float(sigma)
    floor = max(1e-6, 0.05 * float(np.sqrt(np.mean(Y * Y))))
    warnings_out.append(
        "sigma %r is not positive; substituting %.3g for the fit" % (sigma, floor)
    )
    return floor


def run_fit(Y, N, sigma, method, cfg, seed=None, truth=None):
    """Reduce, initialize, and fit; returns the report with ambient a_final.

    The estimate is lifted back to the data space when the fit ran in a
    reduced chart; traces and extras stay as the solver produced them.
    """
    warnings_pre: list = []
    sigma = _floor_sigma(sigma, Y, warnings_pre)
    chart = None
    Y_fit, truth_fit = Y, truth
    if cfg["dimred"] and Y.shape[0] > N - 1:
        Y_fit, chart = reduce(Y, N)
        if truth is not None:
            truth_fit = _project_vertices(truth, chart)
    A_init, picked = pure_pixel_init(Y_fit, N)
    if method == "spa":
        report = SolverReport(
            method="spa",
            a_final=A_init,
            iterations=0,
            objective_trace=np.zeros(0),
            config={"n": N},
            seed=seed,
            extras={"chosen_indices": [int(i) for i in picked]},
        )
        if truth_fit is not None:
            report.mse_trace = np.array([mse(truth_fit, A_init)[0]])
    elif method == "isa":
        report = isa_fit(Y_fit, isa_config(cfg, seed), A_init, sigma, truth_A0=truth_fit)
    elif method == "via":
        report = via_fit(Y_fit, via_config(cfg), A_init, sigma, truth_A0=truth_fit)
    else:
        raise ConfigError(f"unknown method {method!r}")
    report.warnings = warnings_pre + list(report.warnings)
    if chart is not None:
        report.a_final = lift(report.a_final, chart)
        report.reduced_space = True
    return report


# ---------------------------------------------------------------------------
# subcommands


def cmd_synth(args) -> int:
    cfg = _base_config(args)
    if args.vertices is not None:
        A0 = load_vertices(args.vertices)
    else:
        # vertex stream is disjoint from the spawn children synthesize uses
        a_rng = as_generator(np.random.SeedSequence(cfg["seed"], spawn_key=(2,)))
        A0 = a_rng.uniform(size=(cfg["m"], cfg["n"]))
    snr_db = None
    if args.sigma is not None:
        sigma = float(args.sigma)
    elif args.snr_db is not None:
        snr_db = float(args.snr_db)
        sigma = snr_to_sigma(A0, snr_db)
    else:
        sigma = 0.0
        _note("note: no --sigma or --snr-db given, writing a noiseless dataset")
    ds = synthesize(A0, cfg["t"], sigma, seed=cfg["seed"], snr_db=snr_db)
    save_dataset(ds, args.out)
    config_write(cfg, os.fspath(args.out) + ".config.json")
    _note(
        "wrote %d observations in dimension %d (N=%d, sigma=%.6g) to %s"
        % (ds.T, ds.M, cfg["n"], sigma, args.out)
    )
    return 0


def cmd_fit(args) -> int:
    cfg = _base_config(args)
    ds = load_dataset(args.dataset)
    truth = load_vertices(args.truth) if args.truth else ds.A0
    if args.n is not None:
        N = int(args.n)
    elif truth is not None:
        N = truth.shape[1]
    else:
        N = cfg["n"]
        _note(f"note: vertex count not given, using n={N} from the configuration")
    sigma = cfg["sigma"] if cfg["sigma"] is not None else ds.sigma
    if sigma is None and args.snr_db is not None and truth is not None:
        sigma = snr_to_sigma(truth, args.snr_db)
    method = cfg["method"]
    report = run_fit(ds.Y, N, sigma, method, cfg, seed=cfg["seed"], truth=truth)
    os.makedirs(args.out, exist_ok=True)
    save_report(report, os.path.join(args.out, "report.json"))
    save_matrix(report.a_final, os.path.join(args.out, "estimate.csv"))
    config_write(cfg, os.path.join(args.out, "config.json"))
    for warning in report.warnings:
        _note("warning: " + str(warning))
    line = "%s: %d iterations" % (method, report.iterations)
    if report.objective_trace.size:
        line += ", final objective %.17g" % report.objective_trace[-1]
    if truth is not None:
        line += ", MSE %.6g" % mse(truth, report.a_final)[0]
    _note(line)
    return 0


def cmd_eval(args) -> int:
    A_hat = load_vertices(args.estimate)
    A0 = load_vertices(args.truth)
    mse_value, perm = mse(A0, A_hat)
    sad_mean, sad_angles, _ = sad(A0, A_hat)
    payload = {
        "mse": mse_value,
        "sad_mean_deg": sad_mean,
        "sad_deg": sad_angles.tolist(),
        "matched_truth_column": [int(p) for p in perm],
    }
    if args.out:
        with open(os.fspath(args.out), "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        json.dump(payload, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    return 0


def _parse_grid(spec: str):
    axis, _, values = spec.partition(":")
    axis = axis.strip().lower()
    if axis not in ("t", "snr"):
        raise ConfigError("grid axis must be 't' or 'snr', e.g. t:250,500,1000")
    if not values:
        raise ConfigError("grid needs at least one value, e.g. snr:10,20")
    out = []
    for piece in values.split(","):
        try:
            value = int(piece) if axis == "t" else float(piece)
        except ValueError as exc:
            raise ConfigError(f"bad grid value {piece!r}") from exc
        if (axis == "t" and value < 1) or not math.isfinite(value):
            raise ConfigError(f"bad grid value {piece!r}")
        out.append(value)
    return axis, out


def _sweep_trial(payload):
    """One (grid point, trial) unit of work; top level so pools can pickle it."""
    (method, axis, value, trial, trial_seed, m, n, t, snr_db, sigma, cfg) = payload
    if axis == "t":
        t = int(value)
    else:
        snr_db = float(value)
    seq = np.random.SeedSequence(trial_seed)
    a_seq, data_seq = seq.spawn(2)
    A0 = as_generator(a_seq).uniform(size=(m, n))
    if sigma is None:
        sigma = snr_to_sigma(A0, snr_db)
    ds = synthesize(A0, t, sigma, seed=as_generator(data_seq))
    try:
        report = run_fit(ds.Y, n, sigma, method, cfg, seed=trial_seed, truth=A0)
        err = mse(A0, report.a_final)[0]
        failure = ""
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        # a single bad trial should not sink the whole sweep
        err = float("nan")
        failure = f"{type(exc).__name__}: {exc}"
    return {
        "method": method,
        "axis": axis,
        "value": value,
        "trial": trial,
        "seed": trial_seed,
        "mse": err,
        "failure": failure,
    }


def _worker_count() -> int:
    raw = os.environ.get("SIMPLEXCA_WORKERS", "1")
    try:
        count = int(raw)
    except ValueError as exc:
        raise ConfigError(f"SIMPLEXCA_WORKERS must be an integer, got {raw!r}") from exc
    return max(1, count)


def cmd_sweep(args) -> int:
    cfg = _base_config(args)
    axis, values = _parse_grid(args.grid)
    method = cfg["method"]
    trials = cfg["trials"]
    payloads = []
    for gi, value in enumerate(values):
        for trial in range(trials):
            # one recorded integer reproduces the whole trial
            trial_seed = int(
                np.random.SeedSequence(cfg["seed"], spawn_key=(gi, trial)).generate_state(
                    1, np.uint64
                )[0]
            )
            payloads.append(
                (method, axis, value, trial, trial_seed, cfg["m"], cfg["n"], cfg["t"],
                 cfg["snr_db"], cfg["sigma"], cfg)
            )
    workers = _worker_count()
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_trial, payloads, chunksize=1))
    else:
        rows = []
        for payload in payloads:
            rows.append(_sweep_trial(payload))
            if payload[3] == trials - 1:
                done = [r for r in rows if r["value"] == payload[2]]
                finite = [r["mse"] for r in done if math.isfinite(r["mse"])]
                mean = float(np.mean(finite)) if finite else float("nan")
                _note("%s=%s done (%d trials, mean MSE %.6g)" % (axis, payload[2], trials, mean))
    # group statistics are recomputable from the rows; they ride along per row
    stats = {}
    for value in values:
        group = [r["mse"] for r in rows if r["value"] == value]
        finite = [g for g in group if math.isfinite(g)]
        mean = float(np.mean(finite)) if finite else float("nan")
        std = float(np.std(finite, ddof=1)) if len(finite) > 1 else 0.0
        stats[value] = (mean, std)
    for row in rows:
        if row["failure"]:
            _note("warning: %s=%s trial %d failed: %s"
                  % (axis, row["value"], row["trial"], row["failure"]))
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "sweep.csv")
    with open(csv_path, "w") as fh:
        fh.write("method,axis,value,trial,seed,mse,mean_mse,std_mse\n")
        for row in rows:
            mean, std = stats[row["value"]]
            fh.write(
                "%s,%s,%s,%d,%d,%s,%s,%s\n"
                % (row["method"], row["axis"], _fmt(row["value"]), row["trial"],
                   row["seed"], _fmt(row["mse"]), _fmt(mean), _fmt(std))
            )
    config_write(cfg, os.path.join(args.out, "config.json"))
    _note("wrote %d rows to %s" % (len(rows), csv_path))
    return 0


def cmd_objective(args) -> int:
    A = load_vertices(args.vertices)
    ds = load_dataset(args.dataset)
    Y = ds.Y
    M, N = A.shape
    if Y.shape[0] != M:
        raise ConfigError("vertices and dataset live in different dimensions")
    reduced = False
    if M > N - 1:
        # these surrogates need a full-dimensional simplex; project first
        Z, chart = reduce(Y, N)
        B = _project_vertices(A, chart)
        Y, A = Z, B
        reduced = True
    kind = args.kind
    if kind in ("chance", "genedge"):
        sigma = args.sigma if args.sigma is not None else ds.sigma
        if sigma is None or sigma <= 0.0:
            raise ConfigError(f"objective {kind!r} needs a positive --sigma")
    if kind == "svmin":
        value = noiseless_svmin_objective(A, Y)
    elif kind == "edge":
        value = edge_smooth_objective(A, Y, args.lam)
    elif kind == "sisal":
        value = sisal_objective(simplex_to_polyhedron(A), Y, args.lam)
    elif kind == "chance":
        value = chance_objective(simplex_to_polyhedron(A), Y, sigma)
    else:
        value = generalized_edge_smooth(A, Y, args.lam, sigma)
    value = float(value)
    payload = {
        "kind": kind,
        # strict JSON has no Infinity literal; encode non-finite values as text
        "value": value if math.isfinite(value) else repr(value),
        "reduced_space": reduced,
    }
    if args.out:
        with open(os.fspath(args.out), "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        json.dump(payload, sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")
    return 0


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad arguments; we reserve 2 for solver
    # failures, so route usage errors through the normal user-error path
    def error(self, message):
        raise ConfigError(message)


def _add_common(sub, config=True, seed=True):
    if config:
        sub.add_argument("--config", help="JSON or key=value configuration file")
    if seed:
        sub.add_argument("--seed", type=int, help="root seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="simplexca", description=__doc__.splitlines()[0])
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("synth", help="write a synthetic dataset")
    p.add_argument("--out", required=True, help="dataset CSV path")
    p.add_argument("--m", type=int, help="observation dimension")
    p.add_argument("--n", type=int, help="number of vertices")
    p.add_argument("--t", type=int, help="number of observations")
    p.add_argument("--vertices", help="CSV of vertices to use instead of random ones")
    noise = p.add_mutually_exclusive_group()
    noise.add_argument("--sigma", type=float, help="noise standard deviation")
    noise.add_argument("--snr-db", dest="snr_db", type=float, help="noise level as SNR in dB")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = subs.add_parser("fit", help="fit vertices to a dataset")
    p.add_argument("--dataset", required=True)
    p.add_argument("--method", choices=METHODS, help="spa, isa, or via")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n", type=int, help="number of vertices (default: from truth)")
    p.add_argument("--sigma", type=float, help="noise level if the dataset has none")
    p.add_argument("--snr-db", dest="snr_db", type=float,
                   help="derive sigma from this SNR and the truth vertices")
    p.add_argument("--truth", help="ground-truth vertices for error traces")
    p.add_argument("--no-dimred", action="store_true",
                   help="fit in the ambient space even when M > N-1")
    _add_common(p)
    p.set_defaults(func=cmd_fit)

    p = subs.add_parser("eval", help="score an estimate against the truth")
    p.add_argument("--estimate", required=True, help="estimate CSV or report JSON")
    p.add_argument("--truth", required=True, help="truth CSV or synthesized dataset")
    p.add_argument("--out", help="write the scores as JSON here instead of stdout")
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("sweep", help="trials over a grid of T or SNR values")
    p.add_argument("--grid", required=True, help="axis:values, e.g. t:250,500 or snr:10,20")
    p.add_argument("--trials", type=int, help="trials per grid point")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--m", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--t", type=int, help="observations per trial (fixed for snr grids)")
    p.add_argument("--snr-db", dest="snr_db", type=float, help="SNR in dB (fixed for t grids)")
    p.add_argument("--no-dimred", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = subs.add_parser("objective", help="evaluate a geometry objective")
    p.add_argument("--kind", required=True, choices=OBJECTIVE_KINDS)
    p.add_argument("--vertices", required=True, help="vertex matrix CSV")
    p.add_argument("--dataset", required=True)
    p.add_argument("--lam", type=float, default=1.0, help="regularization weight")
    p.add_argument("--sigma", type=float, help="noise level for chance/genedge")
    p.add_argument("--out", help="write the value as JSON here instead of stdout")
    p.set_defaults(func=cmd_objective)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"solver failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
