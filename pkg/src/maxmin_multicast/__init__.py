"""Max-min fair multigroup multicast beamforming under per-antenna power limits.

Typical use::

    from maxmin_multicast import ChannelSet, GroupPartition, PowerBudget, solve_algorithm1

    relaxed, feasible = solve_algorithm1(channels, groups, PowerBudget.per_antenna_limits([1, 1]))
"""
from importlib.metadata import PackageNotFoundError, version as _version

try:
    __version__ = _version("maxmin-multicast")
except PackageNotFoundError:  # running from a source tree without installation
    __version__ = "0.0.0"

from .channels import (ScenarioBudget, ScenarioSpec, balanced_partition, budget_from_snr, generate_channels,
                       randomization_seed)
from .conic import (ConicSolveStatus, PowerControlInfeasible, SolverFailure, SolverTolerances, SolveStatus,
                    solve_lp_power_control, solve_sdp, solve_sdp_min_r, solve_sdp_min_r_spc)
from .experiments import ConstraintKind, ExperimentRecord, SweepSettings, sweep_snr, sweep_users
from .instances import Instance, InstanceFormatError, load_instance, save_instance
from .model import (BudgetKind, ChannelSet, CovarianceSet, GroupPartition, PowerBudget, PrecoderSet, SinrReport,
                    ValidationError, compute_sinr, extract_rank1, per_antenna_power, per_antenna_power_relaxed)
from .oracle import OracleConfig, OracleRefused, brute_force_max_min, brute_force_power_control
from .randomization import (FeasibleSolution, RandomizationConfig, SolutionSource, assemble_candidate,
                            sample_candidates, solve_algorithm1, solve_mmpac)
from .relaxed import (BisectionConfig, RelaxedSolution, reduce_rank, sinr_upper_bound, solve_max_min_fair,
                      solve_max_min_fair_spc, verify_claim1)

__all__ = [
    "reduce_rank",
    "BisectionConfig", "BudgetKind", "ChannelSet", "ConicSolveStatus", "ConstraintKind", "CovarianceSet",
    "ExperimentRecord", "FeasibleSolution", "GroupPartition", "Instance", "InstanceFormatError", "OracleConfig",
    "OracleRefused", "PowerBudget", "PowerControlInfeasible", "PrecoderSet", "RandomizationConfig",
    "RelaxedSolution", "ScenarioBudget", "ScenarioSpec", "SinrReport", "SolutionSource", "SolveStatus",
    "SolverFailure", "SolverTolerances", "SweepSettings", "ValidationError", "assemble_candidate",
    "balanced_partition", "brute_force_max_min", "brute_force_power_control", "budget_from_snr", "compute_sinr",
    "extract_rank1", "generate_channels", "load_instance", "per_antenna_power", "per_antenna_power_relaxed",
    "randomization_seed", "sample_candidates", "save_instance", "sinr_upper_bound", "solve_algorithm1",
    "solve_lp_power_control", "solve_max_min_fair", "solve_max_min_fair_spc", "solve_mmpac", "solve_sdp",
    "solve_sdp_min_r", "solve_sdp_min_r_spc", "sweep_snr", "sweep_users", "verify_claim1",
]
