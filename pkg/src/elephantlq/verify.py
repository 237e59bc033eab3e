"""Acceptance suite: ten numbered criteria built on independent references.

Each criterion returns a :class:`CriterionResult` made of individual
checks ``(value, reference, std_error, pass)``.  Wall-clock limits are
reported on screen but kept out of the CSV so repeated runs write
byte-identical files.
"""
from __future__ import annotations

import contextlib
import dataclasses
import filecmp
import io
import math
import os
import tempfile
import time

import numpy as np

from .adjoint import solve_eta1, solve_eta2
from .advertising import AdvertisingScenario, build_scenario, displayed_kernels, ode_kernels
from .config import RunConfig, ToyScenario, bundled_config
from .costs import (CostEstimate, evaluate_cost, follower_closed_form_cost,
                    leader_closed_form_cost, stationarity_check)
from .feedback import follower_gains
from .gamma_lambda import ThetaPolicy, propagate_lambda, relation_defect, solve_gamma_lambda
from .grid import MatrixFunction, build_time_grid
from .leader import StackedBlocks, assemble_barred, assemble_omegas, assemble_stacked
from .memory import PathSample, duality_residual, star_nodes
from .oracles import gamma_lambda_picard, noise_free_boundary_solution, random_piecewise_linear
from .pipeline import solve_leader
from .riccati import check_assumptions, solve_riccati
from .simulate import follower_system, simulate_closed_loop
from .util import write_csv

PI1_AT_ZERO = 7385.86       # two-decimal reference values of the value kernels at t = 0
PI2_AT_ZERO = 14778.10
DISPLAY1_AT_ZERO = 996.81
DISPLAY2_AT_ZERO = 1999.94


@dataclasses.dataclass(frozen=True)
class Check:
    name: str
    value: object
    reference: object
    std_error: object = ""
    passed: bool = True


@dataclasses.dataclass
class CriterionResult:
    number: int
    title: str
    checks: list
    notes: list = dataclasses.field(default_factory=list)
    runtime: float = 0.0
    time_limit: float | None = None

    @property
    def timing_ok(self) -> bool:
        return self.time_limit is None or self.runtime < self.time_limit

    @property
    def passed(self) -> bool:
        return self.timing_ok and all(c.passed for c in self.checks)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        failed = [c.name for c in self.checks if not c.passed]
        if not self.timing_ok:
            failed.append(f"runtime {self.runtime:.1f}s >= {self.time_limit:g}s")
        extra = f" (failed: {', '.join(failed)})" if failed else ""
        return f"criterion {self.number:2d} {status}  {self.title}{extra}"


@dataclasses.dataclass
class VerifyContext:
    config: RunConfig
    seed: int
    paths: int
    threads: int = 1
    out: str | None = None
    backend: str | None = None

    @property
    def toy(self) -> ToyScenario:
        return self.config.toy if self.config.scenario == "toy" else ToyScenario()


def _rel(a, b) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


# ---------------------------------------------------------------- 1
def value_kernel_accuracy(ctx: VerifyContext) -> CriterionResult:
    s = AdvertisingScenario()
    co = build_scenario(s, 1e-3)
    ric, rt = _timed(lambda: solve_riccati(co))
    ref1, ref2 = ode_kernels(s, co.grid.head)
    pi1 = ric.pi1.head[:, 0, 0]
    pi2 = ric.pi2.head[:, 0, 0]
    e1, e2 = _rel(pi1, ref1), _rel(pi2, ref2)
    checks = [
        Check("pi1 max relative error vs integrating factor", e1, 1e-8, "", e1 <= 1e-8),
        Check("pi2 max relative error vs integrating factor", e2, 1e-8, "", e2 <= 1e-8),
        Check("pi1(0) vs two-decimal reference", pi1[0], PI1_AT_ZERO, "",
              abs(pi1[0] - PI1_AT_ZERO) <= 0.005),
        Check("pi2(0) vs integrating factor", pi2[0], ref2[0], "",
              abs(pi2[0] - ref2[0]) <= 1e-8 * ref2[0]),
    ]
    notes = [f"riccati solve {rt * 1e3:.1f} ms (limit 1 s)",
             f"pi2(0) = {pi2[0]:.4f}; the two-decimal value {PI2_AT_ZERO} is "
             f"{PI2_AT_ZERO - pi2[0]:+.4f} away from the integrating-factor solution"]
    return CriterionResult(1, "value kernels match closed forms", checks, notes, rt, 1.0)


# ---------------------------------------------------------------- 2
def terminal_exactness(ctx: VerifyContext) -> CriterionResult:
    s = AdvertisingScenario()
    co = build_scenario(s, 1e-3)
    ric = solve_riccati(co)
    N = co.grid.n_steps
    grid = build_time_grid(1.0, 0.01)
    gl = solve_gamma_lambda(synthetic_blocks(grid), np.ones((grid.n_steps + 1, 1, 1)))
    toy = ctx.toy.leader_mode()
    tco = toy.build(ctx.config.dt)
    tric = solve_riccati(tco)
    e1 = solve_eta1(tco, tric, ctx.config.u2, ctx.config.star)
    barred = assemble_barred(tco, tric.pi1, tric.xi1)
    e2 = solve_eta2(barred, tric, e1, variant=ctx.config.star)
    fco = ctx.toy.build(ctx.config.dt)
    fric = solve_riccati(fco)
    f1 = solve_eta1(fco, fric, ctx.config.u2, ctx.config.star)
    tail = lambda sol: float(np.max(np.abs(sol.eta.values[sol.grid.n_steps:])))  # noqa: E731
    checks = [
        Check("pi1(T) == m1", ric.pi1.values[N, 0, 0], s.m1, "", ric.pi1.values[N, 0, 0] == s.m1),
        Check("pi2(T) == m2", ric.pi2.values[N, 0, 0], s.m2, "", ric.pi2.values[N, 0, 0] == s.m2),
        Check("gamma(T) == 0", float(np.max(np.abs(gl.gamma.head[-1]))), 0.0, "",
              bool(np.all(gl.gamma.head[-1] == 0.0))),
        Check("follower adjoint zero on [T, 2T]", tail(f1), 0.0, "", tail(f1) == 0.0),
        Check("leader-mode follower adjoint zero on [T, 2T]", tail(e1), 0.0, "", tail(e1) == 0.0),
        Check("leader adjoint zero on [T, 2T]", tail(e2), 0.0, "", tail(e2) == 0.0),
    ]
    return CriterionResult(2, "terminal and extension values are exact", checks)


# ---------------------------------------------------------------- 3
def memory_duality(ctx: VerifyContext, pairs: int = 20) -> CriterionResult:
    rng = np.random.default_rng(np.random.SeedSequence(ctx.seed, spawn_key=(3,)))
    T = 10.0
    grids = [build_time_grid(T, 0.005), build_time_grid(T, 0.0025)]
    worst, ratios, window_gap = 0.0, [], 0.0
    for _ in range(pairs):
        fs = [random_piecewise_linear(rng, T) for _ in range(2)]
        xs = [random_piecewise_linear(rng, T) for _ in range(2)]
        res = []
        for g in grids:
            t = g.head
            head = np.stack([f(t) for f in fs], axis=1)[:, :, None]
            vals = np.concatenate([head, np.zeros((g.n_steps, 2, 1))])
            phi = MatrixFunction(g, vals)
            x = PathSample(g, np.stack([f(t) for f in xs], axis=1))
            scale = T * T * np.max(np.abs(head)) * np.max(np.abs(x.values))
            res.append(duality_residual(phi, x) / scale)
            if g is grids[0]:
                half = g.n_steps // 2
                gap = np.abs(star_nodes(head, g.dt, "window") - star_nodes(head, g.dt, "adjoint"))[half:]
                window_gap = max(window_gap, float(gap.max()) / scale)
        worst = max(worst, res[0])
        ratios.append(res[0] / res[1])
    checks = [
        Check("max scaled duality residual at dt=0.005", worst, 1e-6, "", worst <= 1e-6),
        Check("min residual ratio on halving dt", min(ratios), 4.0, "", min(ratios) >= 3.5),
        Check("max residual ratio on halving dt", max(ratios), 4.0, "", max(ratios) <= 4.5),
        Check("window vs adjoint star on [T/2, T]", window_gap, 1e-6, "", window_gap <= 1e-6),
    ]
    notes = ["scale = T^2 max|phi| max|x|"]
    return CriterionResult(3, "memory duality identity", checks, notes)


# ---------------------------------------------------------------- 4
def advertising_blocks(dt: float):
    co = build_scenario(AdvertisingScenario(), dt)
    ric = solve_riccati(co)
    barred = assemble_barred(co, ric.pi1, ric.xi1)
    return co, ric, assemble_stacked(barred, ric.pi2, ric.xi2)


def lambda_flow(ctx: VerifyContext) -> CriterionResult:
    co, ric, blocks = advertising_blocks(0.01)
    grid = co.grid
    A = blocks.A1
    a_gap = float(np.max(np.abs(A - (-0.4) * np.eye(2))))
    om = assemble_omegas(blocks, np.zeros_like(A), ric.xi3)
    diag = 0.5 * (om.omega3 + np.swapaxes(om.omega3, 1, 2))
    field = propagate_lambda(diag, A, grid, ThetaPolicy("full"))
    j_idx, o_idx = np.nonzero(np.arange(field.values.shape[1])[None, :] <= field.offsets[:, None])
    got = field.values[j_idx, o_idx]
    lag = o_idx * grid.dt
    base = field.values[j_idx + o_idx, 0]
    decay = np.exp(-0.8 * lag)[:, None, None] * base
    growth = np.exp(0.8 * lag)[:, None, None] * base
    norm = np.maximum(np.linalg.norm(decay, axis=(1, 2)), 1e-300)
    rel = float(np.max(np.linalg.norm(got - decay, axis=(1, 2)) / norm))
    rel_growth = float(np.max(np.linalg.norm(got - growth, axis=(1, 2))
                              / np.maximum(np.linalg.norm(growth, axis=(1, 2)), 1e-300)))
    checks = [
        Check("A1 == -0.4 I", a_gap, 0.0, "", a_gap <= 1e-12),
        Check("max relative error vs exp(-0.8 (s - t)) Lambda(s, s)", rel, 1e-8, "", rel <= 1e-8),
        Check("exp(+0.8 (s - t)) reading rejected", rel_growth, 1e-8, "", rel_growth > 1e-8),
    ]
    notes = [f"{len(j_idx)} (t, s) pairs on the dt=0.01 triangle; the growth-sign reading "
             f"is off by up to {rel_growth:.3g} relative"]
    return CriterionResult(4, "Lambda transport law", checks, notes)


# ---------------------------------------------------------------- 5
def synthetic_blocks(grid) -> StackedBlocks:
    """Constant 2 x 2 blocks (scalar state, stacked) used by the fixed-point checks."""
    return StackedBlocks.constant(
        grid,
        A1=[[-0.5, 0.2], [0.0, -0.3]], Abar1=[[0.2, 0.0], [0.0, 0.2]],
        B=[[0.3, -0.2], [-0.2, 0.0]], C=[[0.1, 0.2], [0.1, 0.0]],
        Cbar=[[0.05, -0.1], [-0.1, 0.0]], D=[[0.2], [0.5]], G2=[[0.6], [0.0]])


def fixed_point(ctx: VerifyContext) -> CriterionResult:
    grid = build_time_grid(1.0, 0.01)
    blocks = synthetic_blocks(grid)
    xi3 = np.ones((grid.n_steps + 1, 1, 1))
    gl = solve_gamma_lambda(blocks, xi3, ThetaPolicy("full"), tol=1e-10, max_iter=500)
    _, G, D, iters = gamma_lambda_picard(blocks, 1.0, 1.0, grid.dt / 4)
    g_err = float(np.max(np.abs(G[::4] - gl.gamma.head)))
    d_err = float(np.max(np.abs(D[::4] - gl.lam.diagonal)))
    G0 = gl.gamma.head
    sym = float(np.max(np.abs(G0 - np.swapaxes(G0, 1, 2))))
    capped = solve_gamma_lambda(blocks, xi3, ThetaPolicy("full"), tol=1e-14, max_iter=5)
    code = _cli_exit(["gamma", "--config", "unsolvable.cfg", "--max-iter", "5"])
    checks = [
        Check("converged", gl.converged, True, "", gl.converged),
        Check("re-substitution defect", gl.residual, 1e-6, "", gl.residual <= 1e-6),
        Check("gamma sup error vs fine-grid Picard", g_err, 1e-5, "", g_err <= 1e-5),
        Check("Lambda diagonal sup error vs fine-grid Picard", d_err, 1e-5, "", d_err <= 1e-5),
        Check("gamma symmetry defect", sym, 1e-10, "", sym <= 1e-10),
        Check("5-sweep cap reported as not converged", capped.converged, False, "",
              (not capped.converged) and bool(capped.message)),
        Check("unsolvable config exit code", code, 3, "", code == 3),
    ]
    notes = [f"solver {gl.iterations} sweeps; oracle {iters} Picard sweeps at dt={grid.dt / 4:g}"]
    return CriterionResult(5, "Gamma/Lambda fixed point", checks, notes)


def _cli_exit(argv) -> int:
    from .cli import main
    with tempfile.TemporaryDirectory() as tmp, contextlib.redirect_stdout(io.StringIO()), \
            contextlib.redirect_stderr(io.StringIO()):
        return main(argv + ["--out", tmp])


# ---------------------------------------------------------------- 6
def direction_set(grid, count: int, seed: int):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(6,)))
    t = grid.head
    return [np.sin((i + 1) * math.pi * t / grid.T) + rng.normal() * t / grid.T for i in range(count)]


def follower_check(ctx: VerifyContext) -> CriterionResult:
    cfg = ctx.config
    t0 = time.perf_counter()
    co = ctx.toy.build(cfg.dt)
    ric = solve_riccati(co)
    report = check_assumptions(co, ric)
    eta1 = solve_eta1(co, ric, cfg.u2, cfg.star)
    closed = follower_closed_form_cost(ric, eta1, co, cfg.u2)
    base = follower_system(co, follower_gains(co, ric), eta1, cfg.u2)
    dirs = direction_set(co.grid, cfg.directions, ctx.seed)
    rep = stationarity_check(base, dirs, cfg.eps, slice(0, co.k1), "J1", n_paths=ctx.paths,
                             seed=ctx.seed, threads=ctx.threads, backend=ctx.backend)
    est = rep.base_estimate(co.grid.dt, 1)
    rt = time.perf_counter() - t0
    z = (est.value - closed) / est.std_error if est.std_error > 0 else math.inf
    checks = [
        Check("follower assumptions hold", report.passed("A1"), True, "", report.passed("A1")),
        Check("J1 Monte Carlo vs closed form", est.value, closed, est.std_error,
              abs(est.value - closed) <= 3 * est.std_error),
    ]
    for d, eps, der, se, cur, cse, stat, conv in rep.rows():
        checks.append(Check(f"direction {d} central difference", der, 0.0, se, stat))
        checks.append(Check(f"direction {d} second difference", cur, 0.0, cse, conv))
    notes = [f"{ctx.paths} paths, z = {z:+.2f}, runtime {rt:.1f}s (limit 120 s)"]
    return CriterionResult(6, "follower best response", checks, notes, rt, 120.0)


# ---------------------------------------------------------------- 7
def leader_check(ctx: VerifyContext) -> CriterionResult:
    cfg = ctx.config
    co = ctx.toy.leader_mode().build(cfg.dt)
    lead = solve_leader(co, cfg.policy, cfg.tol, cfg.max_iter, cfg.damping)
    gains = lead.gains()
    eta1 = solve_eta1(co, lead.ric, None, cfg.star)
    eta2 = solve_eta2(lead.barred, lead.ric, eta1, variant=cfg.star)
    closed = leader_closed_form_cost(lead.ric, eta2, co.x0)
    ens = simulate_closed_loop(co, lead.blocks, gains, n_paths=ctx.paths, seed=ctx.seed,
                               threads=ctx.threads, backend=ctx.backend)
    est = evaluate_cost(ens, co, 2)
    # noise-free relation on the toy and on the synthetic blocks with a constant window
    nf = lead.blocks.noise_free()
    gl_nf = solve_gamma_lambda(nf, lead.ric.xi3, cfg.policy, tol=1e-10, max_iter=cfg.max_iter)
    x0 = np.concatenate([np.zeros(co.n), co.x0])
    phi, psi = noise_free_boundary_solution(nf, lead.ric.xi3.head[0], co.T, co.grid.head, x0)
    rel_toy = relation_defect(gl_nf, phi, psi)
    sg = build_time_grid(1.0, 0.01)
    sb = synthetic_blocks(sg).noise_free()
    gl_s = solve_gamma_lambda(sb, np.ones((sg.n_steps + 1, 1, 1)), ThetaPolicy("const", 0.3),
                              tol=1e-10, max_iter=500)
    starts = np.array([[0.0, 1.0], [1.0, 0.0], [0.5, -2.0]])
    phi_s, psi_s = noise_free_boundary_solution(sb, np.eye(1), 1.0, sg.head, starts)
    rel_syn = relation_defect(gl_s, phi_s, psi_s)
    checks = [
        Check("leader assumptions hold", lead.report.all_passed, True, "", lead.report.all_passed),
        Check("J2 Monte Carlo vs closed form", est.value, closed, est.std_error,
              abs(est.value - closed) <= 3 * est.std_error),
        Check("noise-free relation defect (toy)", rel_toy, 1e-4, "", rel_toy <= 1e-4),
        Check("noise-free relation defect (synthetic, theta const 0.3)", rel_syn, 1e-4, "",
              rel_syn <= 1e-4),
    ]
    z = (est.value - closed) / est.std_error if est.std_error > 0 else math.inf
    notes = [f"{ctx.paths} paths, z = {z:+.2f}"]
    return CriterionResult(7, "leader strategy in closed loop", checks, notes)


# ---------------------------------------------------------------- 8
def assumption_fidelity(ctx: VerifyContext) -> CriterionResult:
    co = build_scenario(AdvertisingScenario(), 1e-3)
    ric = solve_riccati(co)
    rep = check_assumptions(co, ric)
    a3 = rep.residuals["A3"][0]
    if ctx.out:
        rep.to_csv(os.path.join(ctx.out, "assumptions_advertising.csv"), co.grid)
    case2 = bundled_config("case2.cfg")
    cco = case2.coefficients()
    crep = check_assumptions(cco, solve_riccati(cco))
    worst = max(float(np.max(r)) for r in crep.residuals.values())
    checks = [
        Check("advertising flagged for A3 line 1", not rep.passed("A3"), True, "",
              not rep.passed("A3")),
        Check("advertising A3 line 1 max residual |1 - Pi1/Pibar|", float(a3.max()), 1e-8, "",
              float(a3.max()) > 1e-8),
        Check("case-2 config passes A1", crep.passed("A1"), True, "", crep.passed("A1")),
        Check("case-2 config passes A2", crep.passed("A2"), True, "", crep.passed("A2")),
        Check("case-2 config passes A3", crep.passed("A3"), True, "", crep.passed("A3")),
        Check("case-2 max residual", worst, 1e-8, "", worst <= 1e-8),
    ]
    notes = [f"advertising A3 line 1 residual at t=0: {a3[0]:.6g}, at T: {a3[-1]:.6g}"]
    for name, line, desc, res, ok in rep.summary_rows():
        if not ok:
            notes.append(f"advertising {name} line {line} ({desc}) max residual {res:.6g}")
    return CriterionResult(8, "assumption checker fidelity", checks, notes)


# ---------------------------------------------------------------- 9
def figure_export(ctx: VerifyContext) -> CriterionResult:
    from .cli import main
    with tempfile.TemporaryDirectory() as tmp:
        with contextlib.redirect_stdout(io.StringIO()):
            code = main(["export-figures", "--config", "advertising.cfg", "--out", tmp])
        path = os.path.join(tmp, "figure_data.csv")
        with open(path, encoding="ascii") as fh:
            header = fh.readline().strip().split(",")
        data = np.loadtxt(path, delimiter=",", skiprows=1)
    col = {h: data[:, i] for i, h in enumerate(header)}
    s = AdvertisingScenario()
    ref1, ref2 = ode_kernels(s, np.array([0.0]))
    d1, d2 = displayed_kernels(s, np.array([0.0]))
    mono = bool(np.all(np.diff(col["pi1"]) < 0) and np.all(np.diff(col["pi2"]) < 0))
    checks = [
        Check("exit code", code, 0, "", code == 0),
        Check("header", ",".join(header), "t,pi1,pi2,pi1_display,pi2_display", "",
              header == ["t", "pi1", "pi2", "pi1_display", "pi2_display"]),
        Check("pi1 and pi2 strictly decreasing in t", mono, True, "", mono),
        Check("t=10 pi1", col["pi1"][-1], 1000.0, "", col["pi1"][-1] == 1000.0),
        Check("t=10 pi2", col["pi2"][-1], 2000.0, "", col["pi2"][-1] == 2000.0),
        Check("t=0 pi1", col["pi1"][0], ref1[0], "", abs(col["pi1"][0] / ref1[0] - 1) <= 1e-8),
        Check("t=0 pi2", col["pi2"][0], ref2[0], "", abs(col["pi2"][0] / ref2[0] - 1) <= 1e-8),
        Check("t=0 display column 1", col["pi1_display"][0], DISPLAY1_AT_ZERO, "",
              abs(col["pi1_display"][0] - DISPLAY1_AT_ZERO) <= 0.005
              and abs(col["pi1_display"][0] - d1[0]) <= 1e-9 * abs(d1[0])),
        Check("t=0 display column 2", col["pi2_display"][0], DISPLAY2_AT_ZERO, "",
              abs(col["pi2_display"][0] - DISPLAY2_AT_ZERO) <= 0.005
              and abs(col["pi2_display"][0] - d2[0]) <= 1e-9 * abs(d2[0])),
    ]
    return CriterionResult(9, "figure data export", checks)


# ---------------------------------------------------------------- 10
DETERMINISM_RUNS = (
    (["riccati", "--config", "advertising.cfg"], ["riccati", "--config", "advertising.cfg"]),
    (["export-figures", "--config", "advertising.cfg"], ["export-figures", "--config", "advertising.cfg"]),
    (["gamma", "--config", "scalar_toy.cfg", "--dt", "0.01"],
     ["gamma", "--config", "scalar_toy.cfg", "--dt", "0.01"]),
    (["simulate", "--config", "scalar_toy.cfg", "--paths", "9000", "--threads", "1"],
     ["simulate", "--config", "scalar_toy.cfg", "--paths", "9000", "--threads", "3"]),
)


def compare_dirs(a: str, b: str) -> list[str]:
    """Names of files that differ or exist on one side only."""
    fa, fb = sorted(os.listdir(a)), sorted(os.listdir(b))
    diff = sorted(set(fa) ^ set(fb))
    _, mismatch, errors = filecmp.cmpfiles(a, b, sorted(set(fa) & set(fb)), shallow=False)
    return diff + mismatch + errors


def determinism(ctx: VerifyContext) -> CriterionResult:
    from .cli import main
    checks = []
    seed = ["--seed", str(ctx.seed)]
    for first, second in DETERMINISM_RUNS:
        with tempfile.TemporaryDirectory() as t1, tempfile.TemporaryDirectory() as t2, \
                contextlib.redirect_stdout(io.StringIO()), contextlib.redirect_stderr(io.StringIO()):
            c1 = main(first + seed + ["--out", t1])
            c2 = main(second + seed + ["--out", t2])
            bad = compare_dirs(t1, t2)
            n = len(os.listdir(t1))
        label = " ".join(first[:3])
        if first != second:
            label += " (threads 1 vs 3)"
        checks.append(Check(f"{label}: identical files", n - len(bad), n, "",
                            c1 == c2 == 0 and not bad and n > 0))
    return CriterionResult(10, "byte-identical reruns", checks)


CRITERIA = (value_kernel_accuracy, terminal_exactness, memory_duality, lambda_flow, fixed_point,
            follower_check, leader_check, assumption_fidelity, figure_export, determinism)


def run_suite(ctx: VerifyContext, only=None, echo=print) -> list[CriterionResult]:
    """Run the criteria (all, or the numbers in ``only``) and write ``verify.csv``."""
    results = []
    for i, fn in enumerate(CRITERIA, 1):
        if only and i not in only:
            continue
        res, rt = _timed(lambda: fn(ctx))
        if res.time_limit is None:
            res.runtime = rt
        results.append(res)
        if echo:
            echo(res.line())
            for note in res.notes:
                echo(f"    {note}")
    if ctx.out:
        write_results_csv(os.path.join(ctx.out, "verify.csv"), results)
    return results


def write_results_csv(path, results) -> None:
    rows = []
    for r in results:
        for c in r.checks:
            rows.append([f"{r.number}: {c.name}", c.value, c.reference, c.std_error, c.passed])
    write_csv(path, ["check", "value", "reference", "std_error", "pass"], rows)


def format_table(results) -> str:
    lines = [f"{'check':<68} {'value':>24} {'reference':>24} {'std_error':>12}  pass"]
    for r in results:
        for c in r.checks:
            v = c.value if isinstance(c.value, (bool, str)) else f"{c.value:.10g}"
            ref = c.reference if isinstance(c.reference, (bool, str)) else f"{c.reference:.10g}"
            se = c.std_error if isinstance(c.std_error, str) else f"{c.std_error:.3g}"
            lines.append(f"{(str(r.number) + ': ' + c.name)[:68]:<68} {str(v)[:24]:>24} "
                         f"{str(ref)[:24]:>24} {se:>12}  {'yes' if c.passed else 'NO'}")
    return "\n".join(lines)


__all__ = ["Check", "CriterionResult", "VerifyContext", "CRITERIA", "run_suite",
           "format_table", "synthetic_blocks", "direction_set", "CostEstimate"]
