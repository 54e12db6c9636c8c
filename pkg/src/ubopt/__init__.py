"""Throughput maximization for a cache-assisted UAV backscatter relay.

Library layout:

- :mod:`ubopt.scenario` - problem parameters, config I/O
- :mod:`ubopt.channel` - geometry, rate models, fading Monte-Carlo oracle
- :mod:`ubopt.energy` - harvester models and the causality ledger
- :mod:`ubopt.dts` - closed-form time-split block
- :mod:`ubopt.backscatter` - reflection-coefficient block
- :mod:`ubopt.trajectory` - convexified waypoint block
- :mod:`ubopt.convex` - log-barrier solver the waypoint block runs on
- :mod:`ubopt.driver` - alternating outer loop and benchmark schemes
- :mod:`ubopt.sweeps` / :mod:`ubopt.cli` - experiment harness
"""

from .channel import Trajectory
from .driver import Scheme, SolveReport, make_fixed_trajectory, solve
from .dts import Allocation
from .scenario import EhModel, Scenario, default_scenario, load_scenario

__all__ = [
    "Allocation",
    "EhModel",
    "Scenario",
    "Scheme",
    "SolveReport",
    "Trajectory",
    "default_scenario",
    "load_scenario",
    "make_fixed_trajectory",
    "solve",
]

__version__ = "0.1.0"
