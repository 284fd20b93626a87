"""Command-line entry point.

Exit codes: 0 success, 1 validation error, 2 numerical failure.
``MBSTS_NUM_THREADS`` sets the default worker count for parallel commands.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np
import pandas as pd

from .dtw import dtw_preselect_controls
from .exceptions import DimensionError, NumericalError, ValidationError
from .gibbs import MCMCConfig
from .io import config_hash, file_sha256, write_json, write_table
from .pipeline import RunConfig, fit_and_save, load_saved_draws, run_pipeline, write_sweep
from .simulation import COVERAGE_MODES, SimulationDesign, generate_synthetic_panel, run_coverage_study

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 1, 2
THREADS_ENV = "MBSTS_NUM_THREADS"

logger = logging.getLogger("mbsts")


def default_jobs() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValidationError(f"{THREADS_ENV} must be an integer, got {raw!r}")


def _load_config(args) -> RunConfig:
    config = RunConfig.from_json(args.config)
    return config.with_seed(args.seed) if args.seed is not None else config


def _load_design(path, **overrides) -> SimulationDesign:
    data = {}
    if path:
        p = Path(path)
        if not p.exists():
            raise ValidationError(f"design file not found: {p}")
        data = json.loads(p.read_text(encoding="utf-8"))
    known = {f.name for f in fields(SimulationDesign)}
    bad = set(data) - known
    if bad:
        raise ValidationError(f"unknown design keys {sorted(bad)}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    for key in ("Sigma", "effect_sizes"):
        if key in data:
            data[key] = tuple(tuple(row) for row in data[key])
    for key in ("initial_level", "horizons_months", "models"):
        if key in data:
            data[key] = tuple(data[key])
    return SimulationDesign(**data)


def cmd_run(args):
    result = run_pipeline(_load_config(args))
    print(result.output_dir / "manifest.json")


def cmd_fit(args):
    for gid, path in fit_and_save(_load_config(args)).items():
        print(f"{gid}\t{path}")


def cmd_effects(args):
    config = _load_config(args)
    result = run_pipeline(config, draws_cache=load_saved_draws(config), sections=("effects",))
    print(result.output_dir / "manifest_effects.json")


def cmd_ppc(args):
    config = _load_config(args)
    result = run_pipeline(config, draws_cache=load_saved_draws(config), sections=("ppc",))
    print(result.output_dir / "manifest_ppc.json")


def cmd_simulate(args):
    design = _load_design(args.design)
    seed = 0 if args.seed is None else args.seed
    effect = tuple(args.effect) if args.effect else (1.0,) * len(design.Sigma)
    data = generate_synthetic_panel(design, np.random.default_rng(seed), effect=effect)
    panel = data.panel
    df = pd.DataFrame({"date": panel.dates.strftime("%Y-%m-%d")})
    for j, name in enumerate(panel.outcome_names):
        df[name] = panel.Y[:, j]
    for j, name in enumerate(panel.covariate_names):
        df[name] = panel.X[:, j]
    for j, name in enumerate(panel.outcome_names):
        df[f"{name}_counterfactual"] = data.counterfactual[:, j]
    write_table(df, args.out)
    print(args.out)


def cmd_coverage(args):
    design = _load_design(args.design, n_datasets=args.n_datasets,
                          coverage_mode=args.coverage_mode)
    seed = 0 if args.seed is None else args.seed
    mcmc = MCMCConfig(niter=args.niter, burn_in=args.burn_in, seed=seed, store_states="last")
    report = run_coverage_study(design, mcmc, n_jobs=args.jobs or default_jobs())
    out = Path(args.out)
    files = {
        "table.csv": write_table(report.table, out / "table.csv"),
        "records.csv": write_table(report.records, out / "records.csv"),
        "failures.csv": write_table(report.failures, out / "failures.csv"),
    }
    settings = {"design": asdict(design), "niter": mcmc.niter, "burn_in": mcmc.n_burn,
                "seed": seed}
    write_json({"settings": settings, "config_hash": config_hash(settings),
                "files": {k: file_sha256(v) for k, v in sorted(files.items())}},
               out / "manifest.json")
    print(out / "table.csv")


def cmd_dtw(args):
    target_df = pd.read_csv(args.target)
    pool_df = pd.read_csv(args.pool)
    for df, name in ((target_df, "target"), (pool_df, "pool")):
        if args.date_column not in df.columns:
            raise ValidationError(f"{name} file lacks date column {args.date_column!r}")
    if args.target_column not in target_df.columns:
        raise ValidationError(f"target column {args.target_column!r} not found")
    t_dates = pd.to_datetime(target_df[args.date_column])
    p_dates = pd.to_datetime(pool_df[args.date_column])
    cut = pd.Timestamp(args.pre_end) if args.pre_end else t_dates.max() + pd.Timedelta(days=1)
    t_mask, p_mask = t_dates < cut, p_dates < cut
    target = target_df.loc[t_mask, args.target_column].to_numpy(dtype=float)
    cands = pool_df.drop(columns=[args.date_column]).loc[p_mask]
    if not np.array_equal(t_dates[t_mask].to_numpy(), p_dates[p_mask].to_numpy()):
        raise ValidationError("target and pool pre-period dates differ")
    idx, costs = dtw_preselect_controls(target, list(cands.to_numpy(dtype=float).T), args.top_n)
    ranked = pd.DataFrame({"rank": np.arange(1, len(idx) + 1), "pool_index": idx,
                           "candidate": cands.columns[idx], "dtw_cost": costs})
    if args.out:
        write_table(ranked, args.out)
        print(args.out)
    else:
        sys.stdout.write(ranked.to_csv(index=False, lineterminator="\n"))


def cmd_sweep(args):
    config = _load_config(args)
    p = Path(args.grid)
    if not p.exists():
        raise ValidationError(f"grid file not found: {p}")
    grid = json.loads(p.read_text(encoding="utf-8"))
    print(write_sweep(config, grid, args.out))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mbsts", description="Causal effects with multivariate structural time-series models.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        return p

    with_config(sub.add_parser("run", help="fit, effects and diagnostics in one go")).set_defaults(func=cmd_run)
    with_config(sub.add_parser("fit", help="fit and store posterior draws")).set_defaults(func=cmd_fit)
    with_config(sub.add_parser("effects", help="effect tables from stored draws")).set_defaults(func=cmd_effects)
    with_config(sub.add_parser("ppc", help="posterior predictive checks from stored draws")).set_defaults(func=cmd_ppc)

    p = sub.add_parser("simulate", help="write one synthetic panel as CSV")
    p.add_argument("--design", help="JSON simulation design (defaults if omitted)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--effect", type=float, nargs="+", help="multiplicative effect per series")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("coverage-study", help="Monte Carlo coverage study")
    p.add_argument("--design")
    p.add_argument("--n-datasets", type=int, default=None)
    p.add_argument("--niter", type=int, default=1000)
    p.add_argument("--burn-in", type=int, default=None)
    p.add_argument("--coverage-mode", choices=list(COVERAGE_MODES))
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None, help=f"workers (default ${THREADS_ENV} or 1)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("dtw-select", help="rank candidate controls by DTW cost")
    p.add_argument("--target", required=True, help="CSV holding the target series")
    p.add_argument("--target-column", required=True)
    p.add_argument("--pool", required=True, help="CSV with a date column and one column per candidate")
    p.add_argument("--date-column", default="date")
    p.add_argument("--pre-end", help="first post-intervention date (exclusive bound)")
    p.add_argument("--top-n", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_dtw)

    p = with_config(sub.add_parser("sweep", help="prior sensitivity sweep"))
    p.add_argument("--grid", required=True, help="JSON grid over h, k, rho, sr_multiplier")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (ValidationError, DimensionError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
