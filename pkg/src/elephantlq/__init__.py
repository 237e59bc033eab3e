"""Open-loop Stackelberg strategies for linear-quadratic leader-follower
games whose dynamics and costs depend on the whole state history.

The history enters through the running integral ``M[x](t) = int_0^t x``;
the package solves the value kernels, the follower and leader adjoint
equations, the leader's Gamma/Lambda fixed point, synthesizes feedback
gains and checks them by Monte Carlo.
"""
__version__ = "0.1.0"

from .errors import (ConditioningError, ConfigurationError, ConvergenceError,  # noqa: E402
                     DivergenceError, ElephantLQError, RangeError, ShapeError, SimulationError)
from .grid import GameCoefficients, MatrixFunction, TimeGrid, build_time_grid  # noqa: E402
from .memory import (PathSample, duality_residual, memory_integral, star,  # noqa: E402
                     star_adjoint, star_window)
from .riccati import AssumptionReport, RiccatiSolution, check_assumptions, solve_riccati  # noqa: E402
from .leader import (BarredCoefficients, StackedBlocks, assemble_barred,  # noqa: E402
                     assemble_omegas, assemble_stacked)
from .gamma_lambda import (GammaLambdaSolution, ThetaPolicy, TriangleField,  # noqa: E402
                           propagate_lambda, relation_defect, solve_gamma_lambda)
from .adjoint import AdjointSolution, solve_eta1, solve_eta2  # noqa: E402
from .feedback import FeedbackGains, FollowerGains, follower_gains, synthesize_gains  # noqa: E402
from .simulate import (PathEnsemble, simulate_closed_loop, simulate_follower,  # noqa: E402
                       simulate_open_loop)
from .costs import (CostEstimate, StationarityReport, evaluate_cost,  # noqa: E402
                    follower_closed_form_cost, leader_closed_form_cost, stationarity_check)
from .advertising import AdvertisingScenario, build_scenario, export_figure_data  # noqa: E402
from .config import RunConfig, ToyScenario, load_config  # noqa: E402
from .kernels import BACKEND, available_backends  # noqa: E402

__all__ = [name for name in dir() if not name.startswith("_")]
