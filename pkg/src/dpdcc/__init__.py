"""
Distributed online primal-dual optimization with compressed communication.

Agents on a time-varying graph minimise a sum of nonconvex losses subject to
time-varying linear constraints, exchanging quantized differences of their
decisions instead of full-precision vectors. The package provides the
localization benchmark, the graph and compressor models, the round engine,
regret and constraint-violation metrics, and an experiment runner.
"""

from dpdcc.campaign import Campaign, preset_paper_experiment, run_campaign
from dpdcc.compress import Compressor, bit_cost, compress
from dpdcc.config import RunConfig
from dpdcc.engine import Schedule, baseline_round, compressed_round, run, simulate
from dpdcc.graph import RandomRingTopology, consensus_constants, generate_round_graph, mixing_matrix
from dpdcc.metrics import (
    RunHistory,
    checkpoint_grid,
    checkpoint_table,
    growth_exponent,
    network_ccv,
    network_regret,
)
from dpdcc.problem import BoxSet, LocalizationProblem, generate_instance

__version__ = "0.1.0"

__all__ = [
    "BoxSet",
    "Campaign",
    "Compressor",
    "LocalizationProblem",
    "RandomRingTopology",
    "RunConfig",
    "RunHistory",
    "Schedule",
    "baseline_round",
    "bit_cost",
    "checkpoint_grid",
    "checkpoint_table",
    "compress",
    "compressed_round",
    "consensus_constants",
    "generate_instance",
    "generate_round_graph",
    "growth_exponent",
    "mixing_matrix",
    "network_ccv",
    "network_regret",
    "preset_paper_experiment",
    "run",
    "run_campaign",
    "simulate",
]
