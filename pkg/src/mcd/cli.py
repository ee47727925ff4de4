"""Command-line front end: detect / simulate / scan / fdr / theorems.

Exit codes: 0 success (possibly with warnings on stderr), 2 usage or
parse problems, 3 degenerate data, 4 internal errors. All outputs are
pure functions of (inputs, config, seed), so re-running a subcommand
reproduces files byte for byte.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
import traceback

import numpy as np

from .baselines import circular_scan, pixel_pvalues, storey_fdr
from .config import (
    load_config_file,
    parse_int_list,
    parse_ladder,
    parse_override,
    sim_configs,
)
from .errors import (
    ConfigurationError,
    DegenerateDataError,
    GridParseError,
    InvalidInputError,
    McdError,
    NoSignalError,
    UndefinedMetricError,
)
from .grid import Grid, validate_trials
from .gridio import (
    read_grid_csv,
    write_array_csv,
    write_grid_csv,
    write_mask_pgm,
    write_prob_pgm,
)
from .shapes import SHAPE_KINDS
from .simulate import roc_curve, simulate_grid, theorem1_check, theorem2_check
from .stats import ModelSpec, stat_field
from .threshold import neighborhood_variability, scan_thresholds


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {text}")
    return value


def _resolve_seed(flag_value: int | None, config_value: int | None = None) -> int:
    """Precedence: explicit flag, config file, MCD_SEED env, 0."""
    if flag_value is not None:
        return flag_value
    if config_value is not None:
        return config_value
    env = os.environ.get("MCD_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigurationError(f"MCD_SEED must be an integer, got {env!r}") from None
    return 0


def _thread_cap(threads: int):
    """Cap numeric-library worker pools when threadpoolctl is available."""
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return contextlib.nullcontext()
    return threadpool_limits(limits=threads)


def _write_json(path, payload) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _build_model(args, grid: Grid, trials_uniform: int | None) -> ModelSpec:
    """Model from flags plus whatever the grid header declared."""
    trials = None
    if args.family == "binomial":
        if getattr(args, "trials_file", None):
            trials, _ = read_grid_csv(args.trials_file)
        elif getattr(args, "trials", None) is not None:
            trials = Grid(np.full(grid.shape, args.trials, dtype=np.int64))
        elif trials_uniform is not None:
            trials = Grid(np.full(grid.shape, trials_uniform, dtype=np.int64))
        else:
            raise ConfigurationError(
                "binomial input needs trial counts: a rows,cols,trials header, "
                "--trials N, or --trials-file PATH"
            )
        validate_trials(grid, trials)
    return ModelSpec(args.family, trials=trials, sigma=getattr(args, "sigma", None))


def _out(args, name: str) -> str:
    os.makedirs(args.out_dir, exist_ok=True)
    return os.path.join(args.out_dir, name)


def _write_mask(args, stem: str, mask: np.ndarray) -> None:
    write_grid_csv(_out(args, stem + ".csv"), Grid(mask.astype(np.int64)))
    write_mask_pgm(_out(args, stem + ".pgm"), mask)


# ---------------------------------------------------------------- detect

def _cmd_detect(args) -> int:
    grid, trials_uniform = read_grid_csv(args.input)
    model = _build_model(args, grid, trials_uniform)
    ladder = parse_ladder(args.ladder)
    if args.min_belt_count == "auto":
        floor = None
    else:
        try:
            floor = int(args.min_belt_count)
        except ValueError:
            raise ConfigurationError(
                f"--min-belt-count must be an integer or 'auto', got {args.min_belt_count!r}"
            ) from None
    floor = _auto_floor(floor, grid)
    stat = stat_field(grid, model, ladder)
    var = neighborhood_variability(grid, model)
    lines = [
        f"family={model.family}",
        f"ladder={args.ladder}",
        f"threshold_count={args.threshold_count}",
        f"min_belt_count={floor}",
    ]
    try:
        scan = scan_thresholds(
            stat,
            var,
            threshold_count=args.threshold_count,
            min_belt_count=floor,
        )
        mask = stat.values > scan.t_star
        lines += [
            f"t_star={scan.t_star:.17g}",
            f"k_star={scan.k_star}",
            f"peak_ratio={scan.peak_ratio:.17g}",
            f"detected_cells={int(mask.sum())}",
        ]
    except NoSignalError as exc:
        mask = np.zeros(grid.shape, dtype=bool)
        lines += ["t_star=nan", "k_star=-1", "peak_ratio=nan", "detected_cells=0",
                  f"note={exc}"]
        print(f"warning: {exc}; writing an empty mask", file=sys.stderr)
    write_array_csv(_out(args, "stat.csv"), stat.values)
    write_array_csv(_out(args, "var.csv"), var.values)
    _write_mask(args, "mask", mask)
    with open(_out(args, "detection.txt"), "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"detected {int(mask.sum())} of {mask.size} cells -> {args.out_dir}")
    return 0


def _auto_floor(floor: int | None, grid: Grid) -> int:
    from .threshold import auto_min_belt_count

    return auto_min_belt_count(grid.rows * grid.cols) if floor is None else floor


# -------------------------------------------------------------- simulate

def _cmd_simulate(args) -> int:
    values = load_config_file(args.config)
    for override in args.set or []:
        key, val = parse_override(override)
        values[key] = val
    if args.replicates is not None:
        values["replicates"] = args.replicates
    values["seed"] = _resolve_seed(args.seed, values.get("seed"))

    from .simulate import auc, run_experiment  # heavy import kept local

    report: dict[str, dict[str, dict[str, float]]] = {}
    for label, cfg in sim_configs(values):
        summary = run_experiment(cfg)
        for method, ms in summary.methods.items():
            cell = {
                "sensitivity_mean": ms.sens_mean,
                "sensitivity_std": ms.sens_std,
                "specificity_mean": ms.spec_mean,
                "specificity_std": ms.spec_std,
            }
            report.setdefault(method, {})[label] = cell
            print(
                f"{method} alt={label}: sens {ms.sens_mean:.4f} ({ms.sens_std:.4f}) "
                f"spec {ms.spec_mean:.4f} ({ms.spec_std:.4f})"
            )
            stem = f"prob_{method}_{label}"
            write_array_csv(_out(args, stem + ".csv"), ms.prob_map)
            write_prob_pgm(_out(args, stem + ".pgm"), ms.prob_map)
        if args.roc:
            grid, truth = simulate_grid(cfg, 0)
            ladder = cfg.ladder
            if ladder is None:
                from .grid import ScaleLadder

                ladder = ScaleLadder.default_two_scale()
            stat = stat_field(grid, cfg.model(), ladder)
            points = roc_curve(stat, truth, points=args.roc)
            write_array_csv(_out(args, f"roc_{label}.csv"), points)
            print(f"roc alt={label}: auc {auc(points):.4f}")
    _write_json(_out(args, "summary.json"), report)
    return 0


# ------------------------------------------------------------------ scan

def _cmd_scan(args) -> int:
    grid, trials_uniform = read_grid_csv(args.input)
    model = _build_model(args, grid, trials_uniform)
    result = circular_scan(
        grid,
        model,
        radii=parse_int_list(args.radii),
        mc_reps=args.mc_reps,
        cluster_alpha=args.cluster_alpha,
        seed=_resolve_seed(args.seed),
    )
    payload = {
        "mc_reps": result.mc_reps,
        "cluster_alpha": result.cluster_alpha,
        "clusters": [
            {
                "center": list(c.center),
                "radius": c.radius,
                "cells": c.cell_count,
                "llr": c.llr,
                "p_value": c.p_value,
            }
            for c in result.clusters
        ],
    }
    _write_json(_out(args, "scan.json"), payload)
    _write_mask(args, "scan_mask", result.mask)
    for c in result.clusters:
        print(
            f"cluster center={c.center} radius={c.radius} cells={c.cell_count} "
            f"llr={c.llr:.4f} p={c.p_value:.4f}"
        )
    print(f"significant cells: {int(result.mask.sum())} -> {args.out_dir}")
    return 0


# ------------------------------------------------------------------- fdr

def _cmd_fdr(args) -> int:
    grid, trials_uniform = read_grid_csv(args.input)
    model = _build_model(args, grid, trials_uniform)
    pvals = pixel_pvalues(grid, model, approx=args.approx)
    result = storey_fdr(pvals, alpha=args.alpha, lam=args.fdr_lambda)
    write_array_csv(_out(args, "pvalues.csv"), pvals.values)
    _write_mask(args, "fdr_mask", result.mask)
    _write_json(
        _out(args, "fdr.json"),
        {
            "alpha": result.alpha,
            "lambda": args.fdr_lambda,
            "pi0_hat": result.pi0_hat,
            "gamma": result.gamma,
            "rejected": result.rejected_count,
        },
    )
    print(f"rejected {result.rejected_count} of {grid.rows * grid.cols} cells "
          f"(pi0_hat={result.pi0_hat:.4f}, gamma={result.gamma:.6g})")
    return 0


# -------------------------------------------------------------- theorems

def _report_dict(report) -> dict:
    payload = {
        "n_noise": report.n_noise,
        "n_boundary": report.n_boundary,
        "n_signal": report.n_signal,
        "replicates": report.replicates,
        "success_fraction": report.success_rate,
    }
    if report.ave_stat is not None:
        payload["ave_stat"] = list(report.ave_stat)
    if report.ave_var_boundary is not None:
        payload.update(
            ave_var_boundary=report.ave_var_boundary,
            ave_var_rest=report.ave_var_rest,
            vtilde_boundary=report.vtilde_boundary,
            vtilde_expected=report.vtilde_expected,
        )
    return payload


def _cmd_theorems(args) -> int:
    seed = _resolve_seed(args.seed)
    kwargs = dict(dims=args.dims, shape=args.shape, seed=seed, reps=args.reps,
                  radius=args.radius)
    t1 = theorem1_check(args.delta, **kwargs)
    t2 = theorem2_check(args.delta, **kwargs)
    if args.delta == 0:
        print("note: theorem hypotheses exclude delta = 0; "
              "reported fractions are chance-level baselines")
    _write_json(
        _out(args, "theorems.json"),
        {"delta": args.delta, "theorem1": _report_dict(t1), "theorem2": _report_dict(t2)},
    )
    print(f"theorem1 ordering fraction: {t1.success_rate:.3f} "
          f"(ave T: {t1.ave_stat[0]:.3f} < {t1.ave_stat[1]:.3f} < {t1.ave_stat[2]:.3f})")
    print(f"theorem2 dominance fraction: {t2.success_rate:.3f} "
          f"(Vtilde boundary {t2.vtilde_boundary:.3f} vs expected {t2.vtilde_expected:.3f})")
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mcd",
        description="Multiresolution cluster detection on regular grids, "
        "with FDR and scan-statistic baselines.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1,
                        help="cap for numeric worker threads (default: all cores)")
    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, default=None,
                        help="RNG seed (default: config value, then $MCD_SEED, then 0)")

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("input", help="grid CSV (header rows,cols[,trials])")
    model.add_argument("--family", required=True,
                       choices=("binomial", "poisson", "normal"))
    model.add_argument("--trials", type=_positive_int, default=None,
                       help="uniform per-cell trial count (binomial)")
    model.add_argument("--trials-file", default=None,
                       help="companion CSV of per-cell trial counts (binomial)")
    model.add_argument("--sigma", type=float, default=None,
                       help="known noise scale (normal; default: robust estimate)")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", parents=[common, model],
                       help="run the multiresolution detector on a grid")
    p.add_argument("--ladder", default="square:0,square:5",
                   help="scales, e.g. square:0,square:5 or five-scale")
    p.add_argument("--threshold-count", type=_positive_int, default=100)
    p.add_argument("--min-belt-count", default="auto",
                   help="belt occupancy floor for threshold choice (int or 'auto')")
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("simulate", parents=[common, seeded],
                       help="run a simulation experiment from a manifest")
    p.add_argument("--config", required=True, help="key = value manifest file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a manifest entry (repeatable)")
    p.add_argument("--replicates", type=_positive_int, default=None)
    p.add_argument("--roc", type=_positive_int, default=None, metavar="POINTS",
                   help="also write an ROC curve from replicate 0")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("scan", parents=[common, seeded, model],
                       help="circular scan statistic with Monte Carlo p-values")
    p.add_argument("--radii", default="1-20", help="e.g. 1-20 or 2,4,8")
    p.add_argument("--mc-reps", type=_positive_int, default=99)
    p.add_argument("--cluster-alpha", type=float, default=0.05)
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("fdr", parents=[common, model],
                       help="per-cell p-values with a Storey FDR cutoff")
    p.add_argument("--alpha", type=float, required=True, help="FDR level")
    p.add_argument("--fdr-lambda", type=float, default=0.5,
                   help="null-fraction tuning parameter")
    p.add_argument("--approx", action="store_true",
                   help="normal-approximation tails instead of exact")
    p.set_defaults(func=_cmd_fdr)

    p = sub.add_parser("theorems", parents=[common, seeded],
                       help="Monte Carlo checks of the two limit theorems")
    p.add_argument("--delta", type=float, required=True, help="signal amplitude")
    p.add_argument("--reps", type=_positive_int, default=200)
    p.add_argument("--dims", type=_dims_arg, default=(100, 100), metavar="RxC")
    p.add_argument("--shape", default="disc", choices=[k for k in SHAPE_KINDS if k != "custom"])
    p.add_argument("--radius", type=float, default=None,
                   help="disc radius in cells (disc shape only)")
    p.set_defaults(func=_cmd_theorems)
    return parser


def _dims_arg(text: str):
    from .config import parse_dims

    try:
        return parse_dims(text)
    except ConfigurationError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        with _thread_cap(args.threads) if hasattr(args, "threads") else contextlib.nullcontext():
            return args.func(args)
    except GridParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DegenerateDataError, InvalidInputError, UndefinedMetricError, NoSignalError) as exc:
        print(f"error: degenerate input: {exc}", file=sys.stderr)
        return 3
    except McdError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        traceback.print_exc()
        return 4
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"internal error: {exc}", file=sys.stderr)
        traceback.print_exc()
        return 4


if __name__ == "__main__":
    sys.exit(main())
