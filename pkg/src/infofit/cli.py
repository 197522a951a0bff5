"""Command-line entry points.

Exit codes: 0 success, 1 runtime error, 2 configuration or input error.
``INFOFIT_OUT`` sets the default output directory and ``INFOFIT_THREADS``
the number of sweep workers.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from ._csvio import config_hash, read_csv, write_csv
from .config import parse_config
from .datagen import Dataset, generate_dataset
from .errors import ConfigError, InfoFitError
from .estimators import EstimatorConfig, entropy_knn, kl_knn, kl_to_gaussian, mi_ksg, mi_lnc, mi_mixed
from .optimize import (
    SpsaConfig,
    SweepSpec,
    factor_grid,
    fit_cog_params,
    run_sweep,
    spsa_minimize,
    toy_grid,
)

logger = logging.getLogger("infofit")

SELFTEST_TARGET = np.array([1.0, -2.0, 3.0, -4.0, 5.0])


class InputError(Exception):
    """Malformed user input (exit code 2)."""


def _out_dir(args, cfg) -> Path:
    out = args.out or os.environ.get("INFOFIT_OUT") or cfg.output_dir
    if not out:
        raise ConfigError("no output directory: pass --out, set INFOFIT_OUT or output_dir")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _workers(cfg) -> int:
    env = os.environ.get("INFOFIT_THREADS")
    return int(env) if env else cfg.sweep.workers


def _config(args, overrides: dict):
    """Load the config document and apply command-line overrides."""
    if args.config:
        try:
            with open(args.config) as fh:
                doc = yaml.safe_load(fh) or {}
        except (OSError, yaml.YAMLError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config document must be a mapping")
    else:
        doc = {}
    for dotted, value in overrides.items():
        if value is None:
            continue
        node = doc
        *parents, leaf = dotted.split(".")
        for p in parents:
            if not isinstance(node.get(p), dict):
                node[p] = {}
            node = node[p]
        node[leaf] = value
    return parse_config(doc), doc


def cmd_generate(args) -> int:
    cfg, doc = _config(args, {
        "seed": args.seed, "n_series": args.n_series, "schedule.n_tasks": args.n_tasks,
    })
    out = _out_dir(args, cfg)
    ds = generate_dataset(cfg.cog_params, cfg.schedule, cfg.n_series, cfg.outcome_model(), cfg.seed, cfg.step)
    ds.save(out)
    print(f"n_series={len(ds.series)} n_tasks={cfg.schedule.n_tasks} "
          f"success_rate={ds.success_rate():.4f} alpha={ds.outcome_model.alpha:.4g} "
          f"A_ref={ds.outcome_model.A_ref:.4g} -> {out}")
    return 0


def cmd_toy_sweep(args) -> int:
    cfg, doc = _config(args, {"toy.estimator": args.estimator})
    out = _out_dir(args, cfg)
    toy = cfg.toy
    grid = toy_grid(toy.grid_start, toy.grid_stop, toy.grid_step)
    spec_obj = cfg.objective_spec("mi")
    for tc in toy.configs():
        spec = SweepSpec("lambda_hat", grid, spec_obj, tc, toy.estimator)
        curve = run_sweep(spec, workers=_workers(cfg))
        name = f"toy_{tc.form}_a{tc.a:g}_lambda{tc.lambda_true:g}.csv"
        curve.write_csv(out / name, config=doc)
        print(f"{name}: argmax={curve.argopt:.2f} (true {tc.lambda_true:g}) "
              f"value_at_0={curve.value_at(0.0):.4g}")
    return 0


def cmd_sweep(args) -> int:
    cfg, doc = _config(args, {
        "objective.kind": args.kind,
        "sweep.params": args.params.split(",") if args.params else None,
    })
    out = _out_dir(args, cfg)
    data = Dataset.load(args.dataset)
    spec_obj = cfg.objective_spec()
    sw = cfg.sweep
    for name in sw.params:
        true = getattr(data.gen_params, name)
        grid = factor_grid(true, sw.lo, sw.hi, sw.n_points)
        spec = SweepSpec(name, grid, spec_obj, data.gen_params)
        curve = run_sweep(spec, data, cfg.step, workers=_workers(cfg))
        fname = f"sweep_{spec_obj.kind}_{name}.csv"
        curve.write_csv(out / fname, config=doc)
        n_err = sum(e is not None for e in curve.errors)
        print(f"{fname}: best={curve.argopt:.4g} generating={true:.4g} errors={n_err}")
    return 0


def _selftest(cfg, out, doc) -> int:
    iters = cfg.spsa.iterations if "spsa" in doc and "iterations" in (doc["spsa"] or {}) else 2000
    d = SELFTEST_TARGET.size
    sc = SpsaConfig(a=cfg.spsa.a, c=cfg.spsa.c, iterations=iters, seed=cfg.spsa.seed,
                    param_bounds=tuple((-10.0, 10.0) for _ in range(d)))
    res = spsa_minimize(lambda x: float(np.sum((x - SELFTEST_TARGET) ** 2)), None, np.zeros(d), sc)
    err = float(np.linalg.norm(res.x_best - SELFTEST_TARGET))
    res.write_csv(out / "spsa_history.csv", config=doc)
    ok = err <= 1e-2
    print(f"selftest: |x_best - target| = {err:.3g} after {iters} iterations "
          f"({res.n_evals} evaluations) {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_fit(args) -> int:
    cfg, doc = _config(args, {"spsa.iterations": args.iterations})
    out = _out_dir(args, cfg)
    if args.selftest:
        return _selftest(cfg, out, doc)
    if not args.dataset:
        raise ConfigError("fit needs --dataset (or --selftest)")
    data = Dataset.load(args.dataset)
    names = cfg.fit.params
    true = data.gen_params
    start = true
    for n in names:
        v = getattr(true, n) * cfg.fit.start_factor
        if n == "rho":
            v = min(v, 0.9)
        start = start.with_param(n, v)
    spec = cfg.objective_spec()
    bounds = {k: tuple(v) for k, v in cfg.fit.bounds.items()}
    best, res, start_val, best_val = fit_cog_params(data, start, spec, cfg.spsa, names, bounds, cfg.step)
    res.write_csv(out / "spsa_history.csv", names=[f"log_{n}" if n != "rho" else n for n in names], config=doc)
    summary = {
        "config_sha256": config_hash(doc),
        "version": __version__,
        "kind": spec.kind,
        "direction": spec.direction,
        "fitted_params": {n: getattr(best, n) for n in names},
        "start_params": {n: getattr(start, n) for n in names},
        "generating_params": {n: getattr(true, n) for n in names},
        "start_objective": start_val.to_dict(),
        "final_objective": best_val.to_dict(),
        "feasible": best_val.feasible,
        "iterations": cfg.spsa.iterations,
        "n_evals": res.n_evals,
    }
    (out / "fitted_params.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"fit: {spec.kind} start={start_val.value:.4g} final={best_val.value:.4g} "
          f"fc={best_val.constraint_fc:.3g} feasible={best_val.feasible}")
    return 0


# ------------------------------------------------------------------ estimate


def _load_table(path):
    try:
        header, rows, _ = read_csv(path)
        data = np.array(rows, dtype=float)
    except (OSError, StopIteration, ValueError) as exc:
        raise InputError(f"malformed CSV {path}: {exc}") from exc
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] != len(header):
        raise InputError(f"malformed CSV {path}: ragged or empty table")
    return header, data


def _columns(header, spec, default):
    if spec is None:
        return default
    out = []
    for tok in spec.split(","):
        tok = tok.strip()
        if tok in header:
            out.append(header.index(tok))
        elif tok.isdigit() and int(tok) < len(header):
            out.append(int(tok))
        else:
            raise InputError(f"unknown column {tok!r}")
    return out


def cmd_estimate(args) -> int:
    header, data = _load_table(args.input_csv)
    cfg = EstimatorConfig(k=args.k, seed=args.seed, units="bits" if args.bits else "nats")
    ncol = data.shape[1]
    kind = args.kind
    if kind in ("mi", "mi-lnc"):
        if ncol < 2:
            raise InputError("MI needs at least two columns")
        xc = _columns(header, args.x, [0])
        yc = _columns(header, args.y, [i for i in range(ncol) if i not in xc])
        fn = mi_ksg if kind == "mi" else mi_lnc
        est = fn(data[:, xc], data[:, yc], cfg)
    elif kind == "entropy":
        est = entropy_knn(data[:, _columns(header, args.x, list(range(ncol)))], cfg)
    elif kind == "mixed":
        lc = _columns(header, args.label, [header.index("label")] if "label" in header else [ncol - 1])
        vc = _columns(header, args.x, [i for i in range(ncol) if i not in lc])
        est = mi_mixed(data[:, vc], data[:, lc[0]], cfg)
    elif kind == "kl":
        if not args.other:
            raise InputError("--kind kl needs --other CSV for Q")
        oh, other = _load_table(args.other)
        xc = _columns(header, args.x, list(range(ncol)))
        est = kl_knn(data[:, xc], other[:, _columns(oh, args.x, list(range(other.shape[1])))], cfg)
    elif kind == "kl-gauss":
        est = kl_to_gaussian(data[:, _columns(header, args.x, [0])], args.mu, args.sigma, cfg)
    else:  # pragma: no cover - argparse restricts choices
        raise InputError(kind)
    line = f"{kind}: {est.value_nats:.6g} nats"
    if args.bits:
        line += f" ({est.value_bits:.6g} bits)"
    line += f" k={est.k} n={est.n}"
    if est.flags:
        line += f" flags={','.join(est.flags)}"
    print(line)
    return 0


# ------------------------------------------------------------------ fixtures


def write_fixtures(out: Path, seed: int = 20240101, n: int = 2000) -> list:
    """Analytic oracle fixtures regenerated from a seed."""
    rng = np.random.default_rng(seed)
    xy = rng.multivariate_normal([0.0, 0.0], [[1.0, 0.9], [0.9, 1.0]], size=n)
    u = rng.random((n, 2))
    p = rng.normal(0.0, 1.0, 2 * n)
    q = rng.normal(1.0, 1.0, 2 * n)
    v = rng.random(2 * n)
    lab = (v > np.median(v)).astype(int)
    meta = {"seed": seed, "n": n}
    files = {
        "gaussian_mi.csv": (["x", "y"], xy, "rho=0.9 bivariate normal; MI = -0.5*ln(1-rho^2) nats"),
        "independent_uniform.csv": (["x", "y"], u, "independent U(0,1) columns; MI = 0"),
        "gauss_p.csv": (["x"], p[:, None], "N(0,1)"),
        "gauss_q.csv": (["x"], q[:, None], "N(1,1); KL(p||q) = 0.5 nats"),
        "labeled_median.csv": (["value", "label"], np.column_stack([v, lab]), "label = value > median; MI = ln 2"),
    }
    written = []
    for name, (cols, arr, note) in files.items():
        rows = [[int(x) if c == "label" else float(x) for c, x in zip(cols, r)] for r in arr]
        write_csv(out / name, cols, rows, meta, [note])
        written.append(out / name)
    return written


def cmd_fixtures(args) -> int:
    out = Path(args.out or os.environ.get("INFOFIT_OUT") or "fixtures")
    out.mkdir(parents=True, exist_ok=True)
    for f in write_fixtures(out, args.seed):
        print(f)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="infofit", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, dataset=False):
        p.add_argument("--config", help="YAML/JSON experiment config")
        p.add_argument("--out", help="output directory")
        if dataset:
            p.add_argument("--dataset", help="dataset directory written by 'generate'")

    p = sub.add_parser("generate", help="generate a synthetic dataset")
    common(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-series", type=int)
    p.add_argument("--n-tasks", type=int)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("toy-sweep", help="lambda sweeps of the toy exponential model")
    common(p)
    p.add_argument("--estimator", choices=["lnc", "ksg"])
    p.set_defaults(func=cmd_toy_sweep)

    p = sub.add_parser("sweep", help="one-at-a-time landscapes on a dataset")
    common(p, dataset=True)
    p.add_argument("--kind", choices=["mi", "kl_prior", "kl_disjoint"])
    p.add_argument("--params", help="comma-separated parameter names")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="SPSA fit of all parameters")
    common(p, dataset=True)
    p.add_argument("--iterations", type=int)
    p.add_argument("--selftest", action="store_true", help="run the quadratic SPSA check instead")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("estimate", help="run an estimator on a CSV file")
    p.add_argument("input_csv")
    p.add_argument("--kind", choices=["mi", "mi-lnc", "entropy", "mixed", "kl", "kl-gauss"], default="mi")
    p.add_argument("--x", help="columns for x / values (names or indices)")
    p.add_argument("--y", help="columns for y")
    p.add_argument("--label", help="label column for --kind mixed")
    p.add_argument("--other", help="second CSV (Q) for --kind kl")
    p.add_argument("--mu", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bits", action="store_true")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("fixtures", help="write analytic oracle fixture CSVs")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=20240101)
    p.set_defaults(func=cmd_fixtures)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (InfoFitError, ValueError, ArithmeticError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
