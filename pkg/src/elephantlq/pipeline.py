"""End-to-end solves shared by the command line and the acceptance suite."""
from __future__ import annotations

import dataclasses

from .errors import ConfigurationError
from .feedback import FeedbackGains, synthesize_gains
from .gamma_lambda import GammaLambdaSolution, ThetaPolicy, solve_gamma_lambda
from .grid import GameCoefficients, TimeGrid
from .leader import BarredCoefficients, StackedBlocks, assemble_barred, assemble_stacked
from .riccati import AssumptionReport, RiccatiSolution, check_assumptions, solve_riccati

# one band array of Lambda; the iteration keeps a few of them alive
BAND_LIMIT_BYTES = 256 * 2 ** 20


def band_bytes(grid: TimeGrid, policy: ThetaPolicy, dim: int) -> int:
    offs = policy.offsets(grid)
    return (grid.n_steps + 1) * (int(offs.max(initial=0)) + 1) * dim * dim * 8


def check_band_memory(grid: TimeGrid, policy: ThetaPolicy, dim: int,
                      limit: int = BAND_LIMIT_BYTES) -> None:
    need = band_bytes(grid, policy, dim)
    if need > limit:
        raise ConfigurationError(
            f"Lambda band needs {need / 2 ** 20:.0f} MiB per copy at dt={grid.dt:g} "
            f"(limit {limit / 2 ** 20:.0f} MiB); use a coarser gamma_dt or a constant theta")


@dataclasses.dataclass(frozen=True)
class LeaderSolve:
    co: GameCoefficients
    ric: RiccatiSolution
    report: AssumptionReport
    barred: BarredCoefficients
    blocks: StackedBlocks
    gl: GammaLambdaSolution

    def gains(self) -> FeedbackGains:
        """Feedback gains; raises ``ConvergenceError`` if Gamma/Lambda did not converge."""
        return synthesize_gains(self.co, self.ric, self.blocks, self.gl)


def solve_leader(co: GameCoefficients, policy: ThetaPolicy, tol: float = 1e-8,
                 max_iter: int = 200, damping: float = 0.5) -> LeaderSolve:
    """Riccati kernels, assumption report, stacked blocks and Gamma/Lambda."""
    ric = solve_riccati(co)
    report = check_assumptions(co, ric)
    barred = assemble_barred(co, ric.pi1, ric.xi1)
    blocks = assemble_stacked(barred, ric.pi2, ric.xi2)
    check_band_memory(co.grid, policy, blocks.dim)
    gl = solve_gamma_lambda(blocks, ric.xi3, policy, tol=tol, max_iter=max_iter, damping=damping)
    return LeaderSolve(co, ric, report, barred, blocks, gl)
