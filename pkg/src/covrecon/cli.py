"""Command-line entry point ``covrecon``.

Exit codes: 0 success, 1 configuration error, 2 invariant failure,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

import numpy as np

from . import _csvio
from .cov_estimators import sample_covariance, taper_estimate
from .experiments import (
    AXES, ConfigError, ExperimentConfig, InvariantFailure, format_invariants, reports_to_csv,
    run_check_invariants, run_converge, run_reconstruct, _parse_sweep,
)
from .field_models import SampleMatrix, model_by_name, sample_field
from .planner import REGIMES, brownian_inputs, brownian_plan, plan_parameters, verify_plan

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_NUMERIC = 0, 1, 2, 3


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for name in ("seed", "replicates", "axis", "L", "M", "n"):
        v = getattr(args, name, None)
        if v is not None:
            overrides[name] = v
    if getattr(args, "sweep", None):
        try:
            overrides["sweep"] = _parse_sweep(args.sweep)
        except ValueError as exc:
            raise ConfigError(f"--sweep: {exc}") from None
    if not args.out and cfg.out:
        args.out = cfg.out
    overrides["out"] = ""
    return cfg.replace(**overrides)


def cmd_spectrum(args, cfg: ExperimentConfig) -> int:
    model = model_by_name(cfg.model)
    lam = model.eigenvalues(cfg.L)
    lines = [f"# model={model.name}, L={cfg.L}", "index,eigenvalue"]
    lines += [f"{i},{v:.17g}" for i, v in enumerate(lam, 1)]
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_sample(args, cfg: ExperimentConfig) -> int:
    samples = sample_field(model_by_name(cfg.model), cfg.space(), cfg.generator_modes, cfg.M, cfg.seed,
                           cfg.information)
    _emit(_csvio.matrix_to_text(samples.values, samples.header()), args.out)
    return EXIT_OK


def cmd_estimate(args, cfg: ExperimentConfig) -> int:
    if args.samples:
        samples = SampleMatrix.from_csv(args.samples)
    else:
        samples = sample_field(model_by_name(cfg.model), cfg.space(), cfg.generator_modes, cfg.M, cfg.seed,
                               cfg.information)
    est = sample_covariance(samples)
    tau = cfg.taper_for(est.M, est.n_h)
    if tau is not None:
        est = taper_estimate(est, tau)
    meta = {"kind": est.kind, "M": est.M, "tau": est.tau, "alpha": cfg.alpha}
    _emit(_csvio.matrix_to_text(est.matrix, meta), args.out)
    return EXIT_OK


def cmd_reconstruct(args, cfg: ExperimentConfig) -> int:
    reports = run_reconstruct(cfg)
    _emit(reports_to_csv(reports), args.out)
    if args.out:
        Path(args.out + ".json").write_text(
            "[" + ",\n ".join(r.sidecar() for r in reports) + "]\n")
    return EXIT_OK if all(r.triangle_ok for r in reports) else EXIT_INVARIANT


def cmd_converge(args, cfg: ExperimentConfig) -> int:
    result = run_converge(cfg, cfg.axis, cfg.sweep)
    _emit(result.to_csv(), args.out)
    return EXIT_OK


def cmd_plan(args, cfg: ExperimentConfig) -> int:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["eps", "regime", "L", "M", "h", "h_lo", "h_hi", "vacuous", "capped", "verified", "flags"])
    ok_all = True
    for eps in cfg.eps:
        inp = brownian_inputs(eps, alpha=cfg.alpha, beta=cfg.beta, rho1=cfg.rho1, h0=cfg.h0)
        plans = [(plan_parameters(inp, r), inp) for r in REGIMES]
        plans.append((brownian_plan(eps, cfg.beta, cfg.rho1, cfg.h0), inp))
        for plan, pin in plans:
            ok = all(v for _, v in verify_plan(plan, pin))
            ok_all &= ok
            writer.writerow([f"{eps:.17g}", plan.regime, plan.L, plan.M, f"{plan.h:.17g}",
                             f"{plan.h_lo:.17g}", f"{plan.h_hi:.17g}", int(plan.vacuous),
                             int(plan.capped), int(ok), "; ".join(plan.flags)])
    _emit(buf.getvalue(), args.out)
    return EXIT_OK if ok_all else EXIT_INVARIANT


def cmd_check_invariants(args, cfg: ExperimentConfig) -> int:
    results = run_check_invariants(cfg, corrupt_mass=args.corrupt_mass)
    _emit(format_invariants(results, cfg), args.out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT


COMMANDS = {
    "spectrum": cmd_spectrum, "sample": cmd_sample, "estimate": cmd_estimate,
    "reconstruct": cmd_reconstruct, "converge": cmd_converge, "plan": cmd_plan,
    "check-invariants": cmd_check_invariants,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="covrecon",
                                     description="Covariance reconstruction experiments for Gaussian random fields.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output path (stdout when omitted)")
        p.add_argument("--replicates", type=int)
        p.add_argument("--L", type=int, dest="L")
        p.add_argument("--M", type=int, dest="M")
        p.add_argument("--n", type=int, dest="n")
        if name == "converge":
            p.add_argument("--axis", choices=AXES)
            p.add_argument("--sweep", help="comma-separated, geometrically spaced values")
        if name == "estimate":
            p.add_argument("--samples", help="sample CSV written by the 'sample' command")
        if name == "check-invariants":
            p.add_argument("--corrupt-mass", action="store_true",
                           help="inject a wrong mass factor to exercise failure reporting")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvariantFailure as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (FloatingPointError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
