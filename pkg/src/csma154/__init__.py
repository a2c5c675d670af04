"""Joint PHY/MAC performance model for IEEE 802.15.4 star networks.

Couples a log-normal link-loss model, a slotted CSMA/CA Markov fixed point and
an M/M/1/K queue into per-node delay, failure, reliability and throughput
predictions, with a slot-level Monte Carlo simulator as independent oracle.
"""

from .driver import ConvergedPoint, FixedPointError, Scenario, converge
from .mac_chain import ChainInputs, ChainSolution, solve_chain
from .metrics import PerformanceReport, build_report
from .mm1k import QueueState, stationary
from .params import (ConfigError, DerivedFrame, MacParams, PhyParams,
                     TrafficSpec, derive_frame, dump_config, load_config)
from .phy import LinkSample, PeEstimate, expected_pe
from .sim import SimStats, run as run_sim

__all__ = [
    "ChainInputs", "ChainSolution", "ConfigError", "ConvergedPoint",
    "DerivedFrame", "FixedPointError", "LinkSample", "MacParams",
    "PeEstimate", "PerformanceReport", "PhyParams", "QueueState", "Scenario",
    "SimStats", "TrafficSpec", "build_report", "converge", "derive_frame",
    "dump_config", "expected_pe", "load_config", "run_sim", "solve_chain",
    "stationary",
]

__version__ = "0.1.0"
