"""Command-line interface.

Subcommands: ``fit`` (two-stage fit on a CSV file), ``simulate`` (seeded
Monte Carlo for one estimator configuration), ``tune`` (grid search
minimizing mean l2 error), ``diagnose`` (primal-dual support certificate).

Conventions: CSV input needs a header row; the last column is the response
and every earlier column a covariate.  ``fit`` takes penalty levels for the
canonical objective (1/n) sum l(r) + lambda sum w|b|; ``simulate`` and
``tune`` take benchmark-convention values (glmnet/hqreg-style reporting,
half-kernel scale) so that bundled reference tunings can be used verbatim.
Exit codes: 0 success, 2 configuration/parse error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from .errors import ConfigurationError, NumericalError
from .losses import LOSS_KINDS, SQUARED, LossSpec
from .objective import Dataset, uniform_weights
from .solver import SolverConfig, solve
from .estimators import ESTIMATOR_LABELS, fit_adaptive, make_pipeline
from .diagnostics import pdw_check
from .simulation import (
    REFERENCE_TUNING,
    Scenario,
    builtin_scenario,
    format_table,
    grid_search,
    reference_pipeline,
    replication_data,
    run_monte_carlo,
)

_INIT_OF = {"AL": "L", "ALH(LH)": "LH", "ALPH(LH)": "LH", "ALPH(LPH)": "LPH"}


def _default_threads() -> int:
    env = os.environ.get("ROBREG_THREADS", "")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigurationError(f"ROBREG_THREADS must be an integer, got {env!r}") from exc
    return 1


def load_csv(path: str) -> Dataset:
    """Read a numeric CSV with a header row; last column is the response."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ConfigurationError(f"{path}: empty file, expected a header row")
        if len(header) < 2:
            raise ConfigurationError(f"{path}: need at least one covariate and a response column")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ConfigurationError(
                    f"{path}:{lineno}: expected {len(header)} fields, found {len(row)}"
                )
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                bad = next(cell for cell in row if not _is_float(cell))
                raise ConfigurationError(f"{path}:{lineno}: non-numeric cell {bad!r}")
    if not rows:
        raise ConfigurationError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=float)
    return Dataset(arr[:, :-1], arr[:, -1])


def _is_float(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def parse_grid(text: str) -> np.ndarray:
    """Parse 'a:b:k' into k log-spaced points from a to b."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ConfigurationError(f"grid must look like a:b:k, got {text!r}")
    try:
        a, b, k = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise ConfigurationError(f"grid must look like a:b:k with numbers, got {text!r}") from exc
    if a <= 0 or b <= 0 or k < 1:
        raise ConfigurationError("grid endpoints must be positive and the count at least 1")
    if k == 1:
        return np.array([a])
    return np.geomspace(a, b, k)


def load_scenario(name_or_path: str, seed: int | None) -> Scenario:
    if name_or_path in REFERENCE_TUNING:
        return builtin_scenario(name_or_path, seed=0 if seed is None else seed)
    try:
        with open(name_or_path, encoding="utf-8") as fh:
            sc = Scenario.from_json(fh.read())
    except OSError as exc:
        raise ConfigurationError(f"cannot open scenario {name_or_path}: {exc}") from exc
    if seed is not None:
        sc = Scenario(
            n=sc.n, p=sc.p, beta_star=sc.beta_star, error_family=sc.error_family,
            heteroscedastic=sc.heteroscedastic, seed=seed,
        )
    return sc


def _fit_payload(res) -> dict:
    return {
        "beta": res.beta.tolist(),
        "support": res.support.tolist(),
        "objective": res.objective,
        "sweeps_used": res.sweeps_used,
        "kkt_residual": res.kkt_residual,
        "converged": res.converged,
        "notes": list(res.notes),
    }


def _write_text(path: str, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _dump_json(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def cmd_fit(args) -> int:
    data = load_csv(args.csv)
    spec = LossSpec(args.loss, args.alpha if args.loss != SQUARED else 1.0)
    cfg = SolverConfig(c_beta=args.c_beta)
    if args.lam is not None:
        result = fit_adaptive(
            data, spec, args.lambda_init, spec, cfg=cfg, lambda_final=args.lam
        )
    else:
        result = fit_adaptive(
            data, spec, args.lambda_init, spec, cfg=cfg, c_lambda=args.c_lambda
        )
    payload = {
        "loss": args.loss,
        "alpha": None if args.loss == SQUARED else args.alpha,
        "lambda_init": result.lambda_init,
        "lambda_adaptive": result.lambda_adaptive,
        "initial": _fit_payload(result.initial),
        "final": _fit_payload(result.final),
        "weights": [None if not np.isfinite(v) else v for v in result.weights],
        "s_bar": result.s_bar.tolist(),
        "notes": list(result.notes),
    }
    text = _dump_json(payload)
    if args.out:
        _write_text(args.out, text)
    final = result.final
    print(f"support ({final.support.size}): {final.support.tolist()}")
    print(f"l1 norm: {np.abs(final.beta).sum():.6g}")
    print(f"l2 norm: {np.linalg.norm(final.beta):.6g}")
    print(f"kkt residual: {final.kkt_residual:.3e}  converged: {final.converged}")
    if not args.out:
        sys.stdout.write(text)
    return 0


def _resolve_tuning(args, scenario_name, what):
    """Fill lambda/alpha from the bundled reference tuning when omitted."""
    lam, alpha = args.lam, args.alpha
    if lam is None or (alpha is None and what.uses_alpha):
        table = REFERENCE_TUNING.get(scenario_name, {})
        if what.label not in table:
            raise ConfigurationError(
                f"--lambda (and --alpha for robust losses) required: no reference "
                f"tuning for {what.label!r} on {scenario_name!r}"
            )
        ref_lam, ref_alpha = table[what.label]
        lam = ref_lam if lam is None else lam
        alpha = ref_alpha if alpha is None else alpha
    return lam, alpha


def _build_pipeline(args, scenario_name):
    label = args.estimator
    if label not in ESTIMATOR_LABELS:
        raise ConfigurationError(
            f"unknown estimator {label!r}; expected one of {ESTIMATOR_LABELS}"
        )
    if label in _INIT_OF:
        if args.init_lambda is not None:
            return make_pipeline(label, init_lambda=args.init_lambda, init_alpha=args.init_alpha)
        if scenario_name in REFERENCE_TUNING:
            return reference_pipeline(scenario_name, label)
        raise ConfigurationError(
            f"adaptive estimator {label!r} needs --init-lambda (and --init-alpha "
            f"for robust initial losses) unless a bundled scenario is used"
        )
    return make_pipeline(label)


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario, args.seed)
    pipeline = _build_pipeline(args, args.scenario)
    lam, alpha = _resolve_tuning(args, args.scenario, pipeline)
    report = run_monte_carlo(
        scenario, pipeline, lam, alpha if pipeline.uses_alpha else None,
        reps=args.reps, seed=scenario.seed, cfg=SolverConfig(),
        threads=args.threads, keep_details=args.per_rep_csv is not None,
    )
    table = format_table([report])
    print(table, end="")
    if args.out:
        _write_text(args.out, report.to_json() + "\n")
        _write_text(args.out + ".txt", table)
    if args.per_rep_csv:
        lines = ["rep,l2,linf,fp_pct,fn_pct"]
        for k, row in enumerate(report.details):
            vals = ",".join(repr(float(v)) for v in row)
            lines.append(f"{k},{vals}")
        _write_text(args.per_rep_csv, "\n".join(lines) + "\n")
    return 0


def cmd_tune(args) -> int:
    scenario = load_scenario(args.scenario, args.seed)
    pipeline = _build_pipeline(args, args.scenario)
    lambda_grid = parse_grid(args.grid_lambda)
    alpha_grid = parse_grid(args.grid_alpha) if args.grid_alpha else []
    if pipeline.uses_alpha and len(alpha_grid) == 0:
        raise ConfigurationError(f"estimator {pipeline.label!r} needs --grid-alpha")
    alpha_star, lambda_star, report, surface = grid_search(
        scenario, pipeline, alpha_grid, lambda_grid,
        reps=args.reps, seed=scenario.seed, cfg=SolverConfig(), threads=args.threads,
    )
    if alpha_star is None:
        print(f"selected lambda={lambda_star:.6g}")
    else:
        print(f"selected alpha={alpha_star:.6g} lambda={lambda_star:.6g}")
    print(format_table([report]), end="")
    header = "alpha,lambda,mean_l2,mean_linf,mean_fp_pct,mean_fn_pct,replications,failed"
    lines = [header]
    for row in surface:
        a = "" if row["alpha"] is None else repr(row["alpha"])
        lines.append(
            f"{a},{row['lambda']!r},{row['mean_l2']!r},{row['mean_linf']!r},"
            f"{row['mean_fp_pct']!r},{row['mean_fn_pct']!r},{row['replications']},{row['failed']}"
        )
    surface_csv = "\n".join(lines) + "\n"
    if args.out:
        _write_text(args.out, report.to_json() + "\n")
        _write_text(args.out + ".surface.csv", surface_csv)
    if args.plot:
        _plot_surface(surface, args.plot)
    return 0


def _plot_surface(surface, path):
    try:
        import matplotlib
    except ImportError as exc:
        raise ConfigurationError(
            "--plot needs matplotlib (install the 'plot' extra)"
        ) from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    alphas = sorted({row["alpha"] for row in surface}, key=lambda v: (v is None, v))
    fig, ax = plt.subplots(figsize=(6, 4))
    for a in alphas:
        rows = [r for r in surface if r["alpha"] == a]
        rows.sort(key=lambda r: r["lambda"])
        label = "all" if a is None else f"alpha={a:.4g}"
        ax.plot([r["lambda"] for r in rows], [r["mean_l2"] for r in rows],
                marker="o", label=label)
    ax.set_xscale("log")
    ax.set_xlabel("lambda")
    ax.set_ylabel("mean l2 error")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def cmd_diagnose(args) -> int:
    if args.csv:
        data = load_csv(args.csv)
    elif args.scenario:
        scenario = load_scenario(args.scenario, args.seed)
        data = replication_data(scenario, scenario.seed, args.rep)
    else:
        raise ConfigurationError("diagnose needs --csv or --scenario")

    weights = uniform_weights(data.p)
    if args.fit_json:
        try:
            with open(args.fit_json, encoding="utf-8") as fh:
                fit_obj = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read fit JSON {args.fit_json}: {exc}") from exc
        support = list(fit_obj["final"]["support"])
        ws = fit_obj.get("weights")
        if ws is not None:
            weights = np.array([np.inf if v is None else float(v) for v in ws])
    elif args.support:
        try:
            support = [int(tok) for tok in args.support.split(",") if tok.strip() != ""]
        except ValueError as exc:
            raise ConfigurationError(f"--support must be comma-separated integers") from exc
    else:
        raise ConfigurationError("diagnose needs --support or --fit-json")

    spec = LossSpec(args.loss, args.alpha if args.loss != SQUARED else 1.0)
    report = pdw_check(data, spec, args.lam, weights, support, SolverConfig())
    print(f"dual feasibility margin: {report.dual_feasibility_margin:.6g}")
    print(f"incoherence: {report.incoherence:.6g}")
    print(f"min restricted eigenvalue: {report.min_eig_SS:.6g}")
    print(f"full matches restricted: {report.full_matches_restricted}")
    text = report.to_json() + "\n"
    if args.out:
        _write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robreg",
        description="Robust high-dimensional regression: weighted/adaptive "
        "LASSO with squared, Huber, or pseudo-Huber loss.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="two-stage adaptive fit on a CSV file")
    p_fit.add_argument("csv", help="CSV with header; last column is the response")
    p_fit.add_argument("--loss", choices=LOSS_KINDS, default="pseudo-huber")
    p_fit.add_argument("--alpha", type=float, default=1.0,
                       help="robustification parameter (ignored for squared loss)")
    p_fit.add_argument("--lambda-init", type=float, required=True, dest="lambda_init",
                       help="canonical penalty level of the initial stage")
    p_fit.add_argument("--c-lambda", type=float, default=1.0, dest="c_lambda",
                       help="constant in the final-stage penalty scaling")
    p_fit.add_argument("--lambda", type=float, default=None, dest="lam",
                       help="explicit final-stage penalty (overrides --c-lambda)")
    p_fit.add_argument("--c-beta", type=float, default=np.inf, dest="c_beta",
                       help="optional l2-ball radius constraint")
    p_fit.add_argument("--out", help="write the result JSON here")
    p_fit.set_defaults(func=cmd_fit)

    def add_mc_args(p, tuning: bool):
        p.add_argument("--scenario", required=True,
                       help="builtin name (table1..table6) or scenario JSON path")
        p.add_argument("--estimator", required=True,
                       help="one of " + ", ".join(ESTIMATOR_LABELS))
        p.add_argument("--reps", type=int, default=100)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=_default_threads())
        p.add_argument("--init-lambda", type=float, default=None, dest="init_lambda",
                       help="initial-stage penalty for adaptive estimators (reported units)")
        p.add_argument("--init-alpha", type=float, default=None, dest="init_alpha",
                       help="initial-stage robustification for adaptive estimators")
        p.add_argument("--out", help="write report JSON here (.txt table alongside)")
        if not tuning:
            p.add_argument("--lambda", type=float, default=None, dest="lam",
                           help="penalty level, reported units (default: bundled tuning)")
            p.add_argument("--alpha", type=float, default=None,
                           help="robustification, reported units (default: bundled tuning)")
            p.add_argument("--per-rep-csv", dest="per_rep_csv", default=None,
                           help="write per-replication metrics CSV here")

    p_sim = sub.add_parser("simulate", help="Monte Carlo run for one configuration")
    add_mc_args(p_sim, tuning=False)
    p_sim.set_defaults(func=cmd_simulate)

    p_tune = sub.add_parser("tune", help="grid search minimizing mean l2 error")
    add_mc_args(p_tune, tuning=True)
    p_tune.add_argument("--grid-lambda", required=True, dest="grid_lambda",
                        help="log-spaced grid a:b:k (reported units)")
    p_tune.add_argument("--grid-alpha", default=None, dest="grid_alpha",
                        help="log-spaced grid a:b:k for alpha")
    p_tune.add_argument("--plot", default=None, help="write an SVG of the tuning curves")
    p_tune.set_defaults(func=cmd_tune)

    p_diag = sub.add_parser("diagnose", help="primal-dual support certificate")
    p_diag.add_argument("--csv", default=None, help="CSV data (header; response last)")
    p_diag.add_argument("--scenario", default=None,
                        help="builtin name or scenario JSON (synthetic data instead of --csv)")
    p_diag.add_argument("--rep", type=int, default=0,
                        help="replication index when using --scenario")
    p_diag.add_argument("--seed", type=int, default=None)
    p_diag.add_argument("--loss", choices=LOSS_KINDS, default="pseudo-huber")
    p_diag.add_argument("--alpha", type=float, default=1.0)
    p_diag.add_argument("--lambda", type=float, required=True, dest="lam",
                        help="canonical penalty level of the program being certified")
    p_diag.add_argument("--support", default=None,
                        help="comma-separated candidate support indices")
    p_diag.add_argument("--fit-json", default=None, dest="fit_json",
                        help="take support and weights from a fit result JSON")
    p_diag.add_argument("--out", help="write the certificate JSON here")
    p_diag.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
