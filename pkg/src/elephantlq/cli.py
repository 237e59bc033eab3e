"""Command line entry point.

Exit codes: 0 success, 2 configuration or usage error, 3 solver
non-convergence, 4 verification failure.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys

import numpy as np

from . import __version__
from .errors import (ConditioningError, ConfigurationError, ConvergenceError, DivergenceError,
                     RangeError, ShapeError, SimulationError)
from .util import fmt, write_csv

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 2, 3, 4
COMMANDS = ("riccati", "gamma", "simulate", "verify", "export-figures")
log = logging.getLogger("elephantlq")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="elephantlq", description="Leader-follower LQ games with memory.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND", parser_class=_Parser)
    helps = {
        "riccati": "solve the value kernels and check the assumptions",
        "gamma": "solve the leader's Gamma/Lambda fixed point",
        "simulate": "closed-loop Monte Carlo under the feedback strategy",
        "verify": "run the acceptance suite",
        "export-figures": "value-kernel curves of the advertising scenario",
    }
    for name in COMMANDS:
        s = sub.add_parser(name, help=helps[name])
        s.add_argument("--config", default=None, help="config file (bundled names accepted)")
        s.add_argument("--out", default=".", help="output directory")
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--paths", type=int, default=None)
        s.add_argument("--dt", type=float, default=None)
        s.add_argument("--tol", type=float, default=None)
        s.add_argument("--max-iter", dest="max_iter", type=int, default=None)
        s.add_argument("--damping", type=float, default=None)
        s.add_argument("--theta", default=None, help="full or const:VALUE")
        s.add_argument("--star", choices=("window", "adjoint"), default=None)
        s.add_argument("--threads", type=int, default=None)
        s.add_argument("--backend", choices=("auto", "compiled", "python"), default=None,
                       help="Monte Carlo kernel (default: ELEPHANTLQ_BACKEND or auto)")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "verify":
            s.add_argument("--only", default=None, help="comma-separated criterion numbers")
    return p


def load(args):
    from .config import RunConfig, load_config
    cfg = load_config(args.config) if args.config else RunConfig()
    over = {k: getattr(args, k) for k in ("seed", "paths", "dt", "tol", "max_iter", "damping",
                                          "theta", "star", "threads")}
    try:
        cfg = cfg.with_overrides(**over)
        # an explicit --dt applies to the leader solve as well
        return dataclasses.replace(cfg, gamma_dt=None) if args.dt is not None else cfg
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from None


def _meta(path: str, command: str, cfg, extra=()) -> None:
    """``key = value`` companion file describing how ``path`` was produced."""
    lines = [("command", command), ("version", __version__), ("config", cfg.source),
             ("scenario", cfg.scenario), ("dt", fmt(cfg.dt)),
             ("theta", cfg.policy.describe()), ("star", cfg.star),
             ("memory_mode", cfg.memory_mode)]
    lines += list(extra)
    with open(path + ".meta", "w", encoding="ascii", newline="\n") as fh:
        for k, v in lines:
            fh.write(f"{k} = {v}\n")


def _out(args, name: str) -> str:
    os.makedirs(args.out, exist_ok=True)
    return os.path.join(args.out, name)


def cmd_riccati(args, cfg) -> int:
    from .riccati import check_assumptions, solve_riccati
    co = cfg.coefficients()
    ric = solve_riccati(co)
    rep = check_assumptions(co, ric)
    path = _out(args, "riccati.csv")
    ric.to_csv(path)
    _meta(path, "riccati", cfg)
    apath = _out(args, "assumptions.csv")
    rep.to_csv(apath, co.grid)
    _meta(apath, "riccati", cfg, [("tolerance", fmt(rep.tol))])
    print(f"pi1(0) = {fmt(ric.pi1.head[0].ravel()[0])}  pi2(0) = {fmt(ric.pi2.head[0].ravel()[0])}")
    for name, line, desc, res, ok in rep.summary_rows():
        print(f"{name} line {line}: max residual {res:.3e} {'ok' if ok else 'VIOLATED'}  [{desc}]")
    print(f"min eig Xi1 {np.min(ric.min_eig_xi1):.6g}, min eig Xi2 {np.min(ric.min_eig_xi2):.6g}")
    return EXIT_OK


def _report_trace(gl) -> None:
    print(f"Gamma/Lambda did not converge: {gl.message}", file=sys.stderr)
    for i, d in enumerate(gl.trace, 1):
        print(f"  sweep {i:4d}  defect {d:.6e}", file=sys.stderr)


def _residual_csv(path, gl, cfg) -> None:
    write_csv(path, ["sweep", "defect"], [(i, d) for i, d in enumerate(gl.trace, 1)])
    _meta(path, "gamma", cfg, [("converged", fmt(gl.converged)), ("message", gl.message or "-")])


def cmd_gamma(args, cfg) -> int:
    from .pipeline import solve_leader
    co = cfg.coefficients(cfg.leader_dt)
    lead = solve_leader(co, cfg.policy, cfg.tol, cfg.max_iter, cfg.damping)
    gl = lead.gl
    extra = [("gamma_dt", fmt(co.grid.dt)), ("converged", fmt(gl.converged)),
             ("sweeps", gl.iterations), ("residual", fmt(gl.residual))]
    _residual_csv(_out(args, "gamma_residuals.csv"), gl, cfg)
    if not lead.report.all_passed:
        print("warning: leader assumptions are violated; see `riccati` for the residuals",
              file=sys.stderr)
    if not gl.converged:
        _report_trace(gl)
        return EXIT_SOLVER
    gpath = _out(args, "gamma.csv")
    gl.to_csv(gpath)
    _meta(gpath, "gamma", cfg, extra)
    lpath = _out(args, "lambda.csv")
    gl.lam.to_csv(lpath)
    _meta(lpath, "gamma", cfg, extra)
    print(f"converged in {gl.iterations} sweeps, defect {gl.residual:.3e}")
    return EXIT_OK


def cmd_simulate(args, cfg) -> int:
    from .costs import evaluate_cost
    from .pipeline import solve_leader
    from .simulate import simulate_closed_loop
    co = cfg.coefficients()
    lead = solve_leader(co, cfg.policy, cfg.tol, cfg.max_iter, cfg.damping)
    if not lead.gl.converged:
        _report_trace(lead.gl)
        return EXIT_SOLVER
    gains = lead.gains()
    ens = simulate_closed_loop(co, lead.blocks, gains, n_paths=cfg.paths, seed=cfg.seed,
                               threads=cfg.threads, backend=args.backend)
    extra = [("seed", cfg.seed), ("paths", cfg.paths), ("rng", ens.seed_record)]
    spath = _out(args, "ensemble_summary.csv")
    ens.summary_csv(spath, cfg.summary_every)
    _meta(spath, "simulate", cfg, extra)
    rows = []
    for i in (1, 2):
        est = evaluate_cost(ens, co, i)
        rows.append((f"J{i}", est.value, est.std_error, est.n_paths))
        print(f"J{i} = {est.value:.10g} +/- {est.std_error:.3g}")
    cpath = _out(args, "costs.csv")
    write_csv(cpath, ["cost", "value", "std_error", "paths"], rows)
    _meta(cpath, "simulate", cfg, extra)
    return EXIT_OK


def cmd_verify(args, cfg) -> int:
    from .verify import VerifyContext, format_table, run_suite
    only = None
    if args.only:
        try:
            only = {int(x) for x in args.only.split(",")}
        except ValueError:
            raise ConfigurationError(f"--only needs comma-separated integers, got {args.only!r}")
    os.makedirs(args.out, exist_ok=True)
    ctx = VerifyContext(cfg, cfg.seed, cfg.paths, cfg.threads, args.out, args.backend)
    results = run_suite(ctx, only)
    _meta(os.path.join(args.out, "verify.csv"), "verify", cfg,
          [("seed", cfg.seed), ("paths", cfg.paths)])
    print()
    print(format_table(results))
    ok = all(r.passed for r in results)
    print(f"\n{sum(r.passed for r in results)}/{len(results)} criteria passed")
    return EXIT_OK if ok else EXIT_VERIFY


def cmd_export(args, cfg) -> int:
    from .advertising import export_figure_data
    from .riccati import solve_riccati
    if cfg.scenario != "advertising":
        raise ConfigurationError("export-figures needs an advertising scenario config")
    co = cfg.coefficients()
    ric = solve_riccati(co)
    path = _out(args, "figure_data.csv")
    export_figure_data(cfg.advertising, ric.pi1, ric.pi2, path)
    _meta(path, "export-figures", cfg)
    print(f"wrote {path}")
    return EXIT_OK


HANDLERS = {"riccati": cmd_riccati, "gamma": cmd_gamma, "simulate": cmd_simulate,
            "verify": cmd_verify, "export-figures": cmd_export}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load(args)
        return HANDLERS[args.command](args, cfg)
    except (ConfigurationError, ShapeError, RangeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, ConditioningError, DivergenceError, SimulationError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
