"""Command-line entry point: ``run``, ``sweep``, ``bound`` and ``selftest``.

Exit codes: 0 success, 2 invalid flags or parameters, 3 data errors,
4 numerical aborts.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import hashlib
import io
import itertools
import json
import logging
import statistics
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dataio import DataError, Dataset, load_csv, synthesize_classification, synthesize_regression
from .mechanism import PrivacyConfig
from .models import ModelSpec, ParamDomain, solve_optimum
from .numkit import Rng
from .trainer import BoundParams, NumericalAbort, RunRecord, StepRule, TrainConfig, bound_components, train

log = logging.getLogger("sparsedp")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

# Synthetic defaults; not taken from any published experiment.
DEFAULT_SYNTHETIC = {"n": 10_000, "nx": 64, "noise": 1.0, "cond": 1.0, "seed": 0}
DEFAULT_XI = 0.01
DEFAULT_DIAMETER = 4.0

SWEEP_COLUMNS = [
    "mode", "kappa", "p", "eps", "seed", "final_loss", "final_rel_loss", "T", "n_theta",
    "sensitivity_mode", "xi", "step", "status", "median_final_rel_loss", "error",
]

MODE_ALIASES = {"dense": "dense_laplace", "sparse": "sparsified"}
MODEL_ALIASES = {"regression": "linear_regression", "svm": "linear_svm",
                 "linear_regression": "linear_regression", "linear_svm": "linear_svm"}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------- parsing


def _parse_kv(text: str) -> dict[str, str]:
    out = {}
    for part in filter(None, (p.strip() for p in text.split(","))):
        if "=" not in part:
            raise UsageError(f"expected key=value, got {part!r}")
        k, v = part.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def parse_synthetic(text: str | None) -> dict:
    spec = dict(DEFAULT_SYNTHETIC)
    if text:
        for k, v in _parse_kv(text).items():
            if k not in spec:
                raise UsageError(f"unknown synthetic option {k!r}; known: {', '.join(spec)}")
            spec[k] = float(v) if isinstance(spec[k], float) else int(float(v))
    return spec


def parse_step(text: str) -> StepRule:
    text = text.strip()
    if text in ("theorem", "theorem_default"):
        return StepRule("theorem_default", variant="sqrt2")
    if text in ("theorem-half", "theorem_half"):
        return StepRule("theorem_default", variant="half")
    if text.startswith("c="):
        text = text[2:]
    try:
        return StepRule("c_over_sqrt_k", c=float(text))
    except ValueError:
        raise UsageError(f"bad --step {text!r}; use c=<value>, theorem or theorem-half") from None


def parse_list(text: str, kind=float) -> list:
    values = []
    for part in filter(None, (p.strip() for p in str(text).split(","))):
        if kind is int and "-" in part[1:]:
            lo, hi = part.split("-", 1)
            values.extend(range(int(lo), int(hi) + 1))
        else:
            values.append(kind(part))
    if not values:
        raise UsageError("empty list")
    return values


def read_config(path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def _add_data_flags(p):
    g = p.add_argument_group("data")
    g.add_argument("--model", default="regression", choices=sorted(MODEL_ALIASES))
    g.add_argument("--synthetic", metavar="K=V,...", help="synthetic data, e.g. n=10000,nx=64,noise=1,cond=1,seed=0")
    g.add_argument("--csv", metavar="PATH", help="load a CSV file instead of synthetic data")
    g.add_argument("--target", help="target column of --csv")
    g.add_argument("--drop", default="", help="comma-separated columns to drop")
    g.add_argument("--categorical", default="", help="comma-separated categorical columns")
    g.add_argument("--no-standardize", dest="standardize", action="store_false")


def _add_train_flags(p, sweep=False):
    g = p.add_argument_group("training")
    if not sweep:
        g.add_argument("--mode", default="sparsified", help="sparsified | dense_laplace | noiseless")
        g.add_argument("--kappa", type=int)
        g.add_argument("--eps", type=float)
        g.add_argument("--seed", type=int, default=0)
    g.add_argument("--p", default="auto", help="measurements: integer or auto(alpha)")
    g.add_argument("--xi", type=float, help=f"per-coordinate gradient clip (private default {DEFAULT_XI})")
    g.add_argument("--T", type=int, default=1000)
    g.add_argument("--step", default="c=0.1", help="c=<value>, theorem or theorem-half")
    g.add_argument("--diameter", type=float, default=DEFAULT_DIAMETER)
    g.add_argument("--sensitivity", default="paper_absolute", choices=["paper_absolute", "per_record"])
    g.add_argument("--psi", default="per_call", choices=["per_call", "per_run"])
    g.add_argument("--no-project", dest="project", action="store_false")
    g.add_argument("--bound-c", type=float, default=1.0, help="aggregate constant C for theorem step sizes")
    g.add_argument("--out", default=".", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsedp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="single training run")
    run.add_argument("--config", help="flat key = value file of flag defaults")
    _add_data_flags(run)
    _add_train_flags(run)
    run.add_argument("--debug-oracle", action="store_true",
                     help="log the mechanism noise norm (reveals non-private information)")
    run.add_argument("--timing", action="store_true", help="add a wall_time column to run.csv")

    sweep = sub.add_parser("sweep", help="cross-product of kappa, epsilon, seed and mode")
    sweep.add_argument("--config", help="flat key = value file of flag defaults")
    _add_data_flags(sweep)
    _add_train_flags(sweep, sweep=True)
    sweep.add_argument("--kappas", default="5")
    sweep.add_argument("--epsilons", default="1,10")
    sweep.add_argument("--seeds", default="0-9", help="list or ranges, e.g. 0-9 or 1,4,7")
    sweep.add_argument("--modes", default="sparsified,dense_laplace")
    sweep.add_argument("--jobs", type=int, default=1)

    bound = sub.add_parser("bound", help="evaluate the performance bound on a kappa x epsilon grid")
    bound.add_argument("--config", help="flat key = value file of flag defaults")
    bound.add_argument("--diameter", type=float, default=DEFAULT_DIAMETER)
    bound.add_argument("--xi", type=float, default=1.0)
    bound.add_argument("--n-theta", type=int, default=64)
    bound.add_argument("--T", type=int, default=1000)
    bound.add_argument("--C", type=float, default=1.0)
    bound.add_argument("--kappas", default="5")
    bound.add_argument("--epsilons", default="1,10")

    selftest = sub.add_parser("selftest", help="run quick invariant checks")
    parser.commands = {"run": run, "sweep": sweep, "bound": bound, "selftest": selftest}
    return parser


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            cfg = read_config(args.config)
        except (OSError, UsageError) as exc:
            parser.error(str(exc))
        sub = parser.commands[args.command]
        known = {a.dest for a in sub._actions}
        unknown = set(cfg) - known
        if unknown:
            parser.error(f"unknown config keys: {', '.join(sorted(unknown))}")
        defaults = {}
        for action in sub._actions:
            if action.dest in cfg:
                raw = cfg[action.dest]
                if action.nargs == 0:
                    truthy = raw.lower() in ("1", "true", "yes", "on")
                    defaults[action.dest] = (not action.default) if truthy else action.default
                else:
                    defaults[action.dest] = action.type(raw) if action.type else raw
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return parser, args


# ---------------------------------------------------------------- helpers


def load_data(args) -> tuple[ModelSpec, Dataset, dict]:
    kind = MODEL_ALIASES[args.model]
    if args.csv:
        if not args.target:
            raise UsageError("--csv needs --target")
        ds = load_csv(
            args.csv,
            args.target,
            drop_columns=[c for c in args.drop.split(",") if c],
            categorical_columns=[c for c in args.categorical.split(",") if c],
            standardize=args.standardize,
        )
        if kind == "linear_svm" and not np.all(np.isin(ds.targets, (-1.0, 1.0))):
            raise DataError("linear_svm needs targets in {-1, +1}")
        source = {"source": "csv", "path": str(args.csv), "target": args.target,
                  "dropped_rows": ds.dropped_rows, "standardized": bool(args.standardize),
                  "encoding_map": ds.encoding_map}
    else:
        syn = parse_synthetic(args.synthetic)
        rng = Rng(int(syn["seed"]))
        if kind == "linear_regression":
            ds, _ = synthesize_regression(rng, int(syn["n"]), int(syn["nx"]), syn["noise"], syn["cond"])
        else:
            ds, _ = synthesize_classification(rng, int(syn["n"]), int(syn["nx"]))
        source = {"source": "synthetic", **syn}
    return ModelSpec(kind, ds.n_features), ds, source


def _mode(text: str) -> str:
    mode = MODE_ALIASES.get(text, text)
    if mode not in ("sparsified", "dense_laplace", "noiseless"):
        raise UsageError(f"unknown mode {text!r}")
    return mode


def make_train_config(args, spec, ds, mode, kappa, eps, seed) -> TrainConfig:
    n_theta = spec.n_theta
    domain = ParamDomain.ball(n_theta, args.diameter)
    xi = args.xi if args.xi is not None else (DEFAULT_XI if mode != "noiseless" else None)
    privacy = None
    if mode != "noiseless":
        if eps is None:
            raise UsageError(f"--eps is required in {mode} mode")
        if mode == "sparsified" and kappa is None:
            raise UsageError("--kappa is required in sparsified mode")
        privacy = PrivacyConfig(
            epsilon=eps,
            xi=xi,
            kappa=kappa if kappa is not None else 1,
            p=args.p,
            sensitivity_mode=args.sensitivity,
            n_records=ds.n,
            psi_policy=args.psi,
        )
    return TrainConfig(
        T=args.T,
        domain=domain,
        theta_init=np.zeros(n_theta),
        mode=mode,
        privacy=privacy,
        xi=xi,
        sparsity=kappa if mode == "noiseless" else None,
        step=parse_step(args.step),
        master_seed=seed,
        project=args.project,
        debug_oracle=getattr(args, "debug_oracle", False),
        bound_constant=args.bound_c,
    )


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_run_csv(path, record: RunRecord, debug_oracle=False, timing=False) -> None:
    cols = ["k", "loss", "rel_loss", "grad_norm"]
    if debug_oracle:
        cols.append("noise_norm")
    if timing:
        cols.append("wall_time")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in record.rows:
            w.writerow([_fmt(row[c]) for c in cols])


def _json_default(o):
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    return str(o)


def write_meta(path, meta: dict) -> None:
    Path(path).write_text(json.dumps(meta, indent=2, sort_keys=True, default=_json_default) + "\n")


# ---------------------------------------------------------------- commands


def cmd_run(args) -> int:
    mode = _mode(args.mode)
    spec, ds, source = load_data(args)
    cfg = make_train_config(args, spec, ds, mode, args.kappa, args.eps, args.seed)
    start = time.perf_counter()
    _, record = train(spec, ds, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_run_csv(out / "run.csv", record, cfg.debug_oracle, args.timing)
    meta = dict(record.meta)
    meta.update(source)
    meta["final_rel_loss"] = record.final_rel_loss
    meta["final_loss"] = record.final_loss
    meta["wall_time_seconds"] = round(time.perf_counter() - start, 3)
    meta["version"] = __version__
    write_meta(out / "meta.json", meta)
    print(f"final relative loss {record.final_rel_loss:.6g} after T={cfg.T} ({mode}); wrote {out / 'run.csv'}")
    return EXIT_OK


@dataclass
class Cell:
    mode: str
    kappa: int
    eps: float
    seed: int


@dataclass
class CellResult:
    cell: Cell
    status: str = "ok"
    code: int = EXIT_OK
    p: int | None = None
    final_loss: float | None = None
    final_rel_loss: float | None = None
    error: str = ""
    extra: dict = field(default_factory=dict)


_WORKER: dict = {}


def _init_worker(args, spec, ds, theta_star):
    _WORKER.update(args=args, spec=spec, ds=ds, theta_star=theta_star)


def _run_cell(cell: Cell) -> CellResult:
    args, spec, ds = _WORKER["args"], _WORKER["spec"], _WORKER["ds"]
    res = CellResult(cell)
    try:
        kappa = cell.kappa if cell.mode != "dense_laplace" else None
        cfg = make_train_config(args, spec, ds, cell.mode, kappa, cell.eps, cell.seed)
        _, record = train(spec, ds, cfg, _WORKER["theta_star"])
        res.p = record.meta.get("p")
        res.final_loss = record.final_loss
        res.final_rel_loss = record.final_rel_loss
    except NumericalAbort as exc:
        res.status, res.code, res.error = "numerical_abort", EXIT_NUMERIC, str(exc)
    except (ValueError, UsageError) as exc:
        res.status, res.code, res.error = "invalid", EXIT_USAGE, str(exc)
    return res


def plan_hash(plan: dict) -> str:
    blob = json.dumps(plan, sort_keys=True, default=_json_default).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def cmd_sweep(args) -> int:
    kappas = parse_list(args.kappas, int)
    epsilons = parse_list(args.epsilons, float)
    seeds = parse_list(args.seeds, int)
    modes = [_mode(m) for m in parse_list(args.modes, str)]
    spec, ds, source = load_data(args)
    domain = ParamDomain.ball(spec.n_theta, args.diameter)
    theta_star = solve_optimum(spec, ds, domain)

    cells = [Cell(m, k, e, s) for m, k, e, s in itertools.product(modes, kappas, epsilons, seeds)]
    plan = {
        "cells": [vars(c) for c in cells],
        "flags": {k: v for k, v in vars(args).items() if k not in ("jobs", "out", "verbose", "command")},
    }
    digest = plan_hash(plan)

    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(
            max_workers=args.jobs, initializer=_init_worker, initargs=(args, spec, ds, theta_star)
        ) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        _init_worker(args, spec, ds, theta_star)
        results = [_run_cell(c) for c in cells]

    groups: dict[tuple, list[float]] = {}
    for r in results:
        if r.status == "ok":
            groups.setdefault((r.cell.mode, r.cell.kappa, r.cell.eps), []).append(r.final_rel_loss)
    medians = {k: statistics.median(v) for k, v in groups.items()}

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "sweep.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in results:
            c = r.cell
            w.writerow([_fmt(v) for v in (
                c.mode, c.kappa, r.p, c.eps, c.seed, r.final_loss, r.final_rel_loss, args.T, spec.n_theta,
                args.sensitivity if c.mode != "noiseless" else None,
                args.xi if args.xi is not None else (DEFAULT_XI if c.mode != "noiseless" else None),
                args.step, r.status, medians.get((c.mode, c.kappa, c.eps)), r.error,
            )])
    failed = [r for r in results if r.status != "ok"]
    write_meta(out / "sweep_meta.json", {
        "plan_hash": digest,
        "n_cells": len(cells),
        "n_failed": len(failed),
        "kappas": kappas, "epsilons": epsilons, "seeds": seeds, "modes": modes,
        "T": args.T, "n_theta": spec.n_theta, "sensitivity_mode": args.sensitivity,
        "version": __version__, **source,
    })
    print(f"{len(cells) - len(failed)}/{len(cells)} cells succeeded; plan {digest}; wrote {out / 'sweep.csv'}")
    if failed:
        for r in failed[:5]:
            print(f"  {r.cell}: {r.status}: {r.error}", file=sys.stderr)
        return max(r.code for r in failed)
    return EXIT_OK


def cmd_bound(args) -> int:
    kappas = parse_list(args.kappas, int)
    epsilons = parse_list(args.epsilons, float)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kappa", "eps", "bound", "rate_term", "sparsification_term", "noise_term", "error"])
    code = EXIT_OK
    for kappa, eps in itertools.product(kappas, epsilons):
        try:
            bp = BoundParams(args.diameter, args.xi, kappa, args.n_theta, eps, args.T, args.C)
            terms = bound_components(bp)
            w.writerow([kappa, repr(eps), repr(sum(terms)), *map(repr, terms), ""])
        except ValueError as exc:
            w.writerow([kappa, repr(eps), "", "", "", "", str(exc)])
            code = EXIT_USAGE
    sys.stdout.write(buf.getvalue())
    return code


def cmd_selftest(args) -> int:
    from .selftest import run_all

    return EXIT_OK if run_all() else 1


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "bound": cmd_bound, "selftest": cmd_selftest}


def main(argv=None) -> int:
    parser, args = parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"sparsedp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"sparsedp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalAbort, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"sparsedp: numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"sparsedp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
