"""Hybrid multi-robot motion planning.

A MASAC policy searches collision-free waypoints in a 2-D arena; a
corridor-constrained minimum-snap back-end turns them into smooth
polynomial trajectories.

Modules: ``env`` (simulator), ``nn`` (MLPs and Adam), ``masac`` (training and
inference), ``qp`` (dense QP solver), ``minsnap`` (back-end), ``metrics``,
``config`` and ``cli``.  Set ``HYBRID_PLANNER_NUMBA=0`` to run the pure numpy
kernels.
"""

from ._accel import USE_NUMBA
from .env import EnvConfig, Scenario, make_scenario
from .masac import MasacConfig, desk_config, infer_waypoints, load_checkpoint, train
from .minsnap import BackendConfig, BackendError, PiecewiseTrajectory, plan_all, plan_robot
from .qp import QpProblem, QpSolution, solve_qp

__version__ = "0.1.0"

__all__ = [
    "USE_NUMBA",
    "EnvConfig",
    "Scenario",
    "make_scenario",
    "MasacConfig",
    "desk_config",
    "infer_waypoints",
    "load_checkpoint",
    "train",
    "BackendConfig",
    "BackendError",
    "PiecewiseTrajectory",
    "plan_all",
    "plan_robot",
    "QpProblem",
    "QpSolution",
    "solve_qp",
]
