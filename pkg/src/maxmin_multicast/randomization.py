"""Gaussian randomization, per-antenna power control and the end-to-end pipeline.

Random streams
--------------
Candidates for group ``k`` come from ``numpy.random.PCG64`` seeded with
``SeedSequence(seed, spawn_key=(k,))``. Each candidate consumes ``2 * N_t``
consecutive standard normals (real and imaginary parts interleaved per
entry), so the candidate list for ``n_rand = a`` is a prefix of the list for
any larger ``n_rand`` under the same seed.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .conic import (DEFAULT_TOLERANCES, PowerControlInfeasible, SolveStatus, SolverFailure, SolverTolerances,
                    solve_lp_power_control)
from .model import (DEFAULT_RANK_TOL, ChannelSet, CovarianceSet, GroupPartition, PowerBudget, PrecoderSet,
                    ValidationError, check_dimensions, compute_sinr, extract_rank1, per_antenna_power,
                    received_gains, sinr_from_gains)
from .relaxed import DEFAULT_BISECTION, BisectionConfig, RelaxedSolution, sinr_upper_bound, solve_relaxed

RNG_ALGORITHM = "PCG64/SeedSequence(seed, spawn_key=(group,))/v1"


@dataclass(frozen=True)
class RandomizationConfig:
    n_rand: int = 50
    seed: int = 0
    eig_floor: float = 0.0

    def __post_init__(self):
        if self.n_rand < 1:
            raise ValueError("n_rand must be at least 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.eig_floor < 0:
            raise ValueError("eig_floor must be nonnegative")


class SolutionSource(enum.Enum):
    RANK1_EXACT = "rank1_exact"
    RANDOMIZED = "randomized"


@dataclass(frozen=True)
class FeasibleSolution:
    precoders: PrecoderSet
    t_achieved: float
    group_powers: np.ndarray
    antenna_utilization: np.ndarray
    source: SolutionSource
    candidate_index: Optional[int] = None
    diagnostic: Optional[str] = None
    lp_solves: int = 0


class Algorithm1Result(NamedTuple):
    relaxed: RelaxedSolution
    feasible: FeasibleSolution


@dataclass(frozen=True)
class MmpacResult:
    """Power control outcome for one direction set.

    ``powers`` are scaled so the most loaded budget row sits exactly at its
    limit, and ``t_star`` is the worst SINR they deliver. ``bisection_t`` is
    the last feasible bisection target, a lower bound on ``t_star``.
    """

    t_star: float
    powers: np.ndarray
    bisection_t: float
    iterations: int
    lp_solves: int
    nulled_users: tuple = ()
    reached_lower: bool = True


def factor_covariance(x: np.ndarray, eig_floor: float = 0.0) -> np.ndarray:
    """``F`` with ``F F^H = X`` after raising eigenvalues below ``eig_floor`` to it."""
    lam, vecs = np.linalg.eigh(x)
    return vecs * np.sqrt(np.maximum(lam, eig_floor))[None, :]


def sample_candidates(covs: CovarianceSet, cfg: RandomizationConfig) -> np.ndarray:
    """Draw ``w_k ~ CN(0, X_k)`` for every group, ``n_rand`` times.

    Returns
    -------
    np.ndarray
        Complex array of shape ``(n_rand, G, N_t)``.
    """
    G, N = covs.n_groups, covs.n_antennas
    out = np.empty((cfg.n_rand, G, N), dtype=complex)
    for k in range(G):
        f = factor_covariance(covs.matrices[k], cfg.eig_floor)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed, spawn_key=(k,))))
        raw = rng.standard_normal((cfg.n_rand, N, 2))
        z = (raw[..., 0] + 1j * raw[..., 1]) / np.sqrt(2.0)
        # row-wise products keep every candidate independent of n_rand (a batched matmul
        # may round differently for different batch sizes)
        out[:, k, :] = (z[:, None, :] * f[None, :, :]).sum(axis=2)
    return out


def assemble_candidate(directions, powers) -> PrecoderSet:
    """Scale each direction by the square root of its group power."""
    directions = directions.vectors if isinstance(directions, PrecoderSet) else np.asarray(directions)
    powers = np.asarray(powers, dtype=float)
    if powers.shape != (directions.shape[0],):
        raise ValidationError(f"need one power per group ({directions.shape[0]}), got shape {powers.shape}")
    if np.any(powers < 0):
        raise ValidationError("group powers must be nonnegative")
    return PrecoderSet(np.sqrt(powers)[:, None] * directions)


def _budget_rows(directions: np.ndarray) -> np.ndarray:
    return (np.abs(directions) ** 2).T


def _saturate(powers: np.ndarray, rows: np.ndarray, budget: PowerBudget) -> np.ndarray:
    util = budget.utilization(rows @ powers)
    peak = float(np.max(util))
    return powers / peak if peak > 0 else powers


def solve_mmpac(directions, channels: ChannelSet, groups: GroupPartition, budget: PowerBudget,
                bis: Optional[BisectionConfig] = None, tols: Optional[SolverTolerances] = None) -> MmpacResult:
    """Max-min fair group powers for fixed directions under the given budget.

    Bisects the SINR target over ``[bis.lower_init, bis.upper_init]`` (upper
    defaults to the interference-free bound), solving the power-control LP at
    every midpoint. A positive ``lower_init`` is checked first; if the LP is
    infeasible there the result has ``reached_lower=False`` and zero powers,
    and no bisection runs.

    Users with zero gain from their own group's direction make every positive
    target infeasible; they are reported in ``nulled_users`` with ``t_star=0``.
    """
    bis = bis or DEFAULT_BISECTION
    tols = tols or DEFAULT_TOLERANCES
    directions = directions.vectors if isinstance(directions, PrecoderSet) else np.asarray(directions, dtype=complex)
    check_dimensions(channels, groups, directions.shape[1], directions.shape[0])
    G = groups.n_groups
    gains = received_gains(directions, channels)
    rows = _budget_rows(directions)
    membership = groups.as_array()
    noise = channels.noise_vars

    def lp(t):
        return solve_lp_power_control(t, gains, noise, rows, budget, membership, tols)

    own = gains[np.arange(groups.n_users), membership]
    nulled = tuple(int(i) for i in np.flatnonzero(own <= 0))
    if nulled:
        return MmpacResult(0.0, np.zeros(G), 0.0, 0, 0, nulled)

    lower = float(bis.lower_init)
    upper = float(bis.upper_init) if bis.upper_init is not None else sinr_upper_bound(channels, budget)
    powers = None
    lp_solves = 0
    if lower > 0:
        sol = lp(lower)
        lp_solves += 1
        if not (sol.status.ok and sol.r_star <= 1.0 + tols.feas_tol):
            return MmpacResult(0.0, np.zeros(G), 0.0, 0, lp_solves, reached_lower=False)
        powers = sol.powers

    iterations = 0
    trace = []
    while upper - lower > bis.epsilon and iterations < bis.max_iters:
        mid = 0.5 * (lower + upper)
        sol = lp(mid)
        lp_solves += 1
        iterations += 1
        st = sol.status.status
        trace.append((mid, st, sol.r_star))
        if st is SolveStatus.OPTIMAL and sol.r_star <= 1.0 + tols.feas_tol:
            lower, powers = mid, sol.powers
        elif st in (SolveStatus.OPTIMAL, SolveStatus.INFEASIBLE):
            upper = mid
        else:
            raise SolverFailure(f"power-control LP failed at t={mid:.6g} ({st.value})", sol.status, trace)

    if powers is None or not np.any(powers > 0):
        return MmpacResult(0.0, np.zeros(G), lower, iterations, lp_solves)
    powers = _saturate(powers, rows, budget)
    t_star = float(np.min(sinr_from_gains(gains, powers, noise, membership)))
    return MmpacResult(t_star, powers, lower, iterations, lp_solves)


def _feasible_from(directions, powers, channels, groups, budget, source, index=None, diagnostic=None,
                   lp_solves=0) -> FeasibleSolution:
    precoders = assemble_candidate(directions, powers)
    t = compute_sinr(precoders, channels, groups).min_value
    util = budget.utilization(per_antenna_power(precoders))
    return FeasibleSolution(precoders, t, np.asarray(powers, dtype=float), util, source, index, diagnostic,
                            lp_solves)


def solve_algorithm1(channels: ChannelSet, groups: GroupPartition, budget: PowerBudget,
                     bis: Optional[BisectionConfig] = None, rand_cfg: Optional[RandomizationConfig] = None,
                     tols: Optional[SolverTolerances] = None, backend=None,
                     rank_tol: float = DEFAULT_RANK_TOL, rank_reduction: bool = True) -> Algorithm1Result:
    """Relaxation, then rank-one extraction or Gaussian randomization with power control.

    1. Solve the relaxed problem by bisection. With ``rank_reduction`` the
       covariances are first moved to a lower-rank point with identical
       constraint values (see :func:`reduce_rank`); ``False`` keeps the
       solver's own point.
    2. If every ``X_k`` is numerically rank one, take the principal
       eigenvectors (scaled by the root of the top eigenvalue) as directions
       and run one power-control pass on them to absorb truncation error.
    3. Otherwise draw ``n_rand`` Gaussian direction sets and keep the one whose
       power control yields the highest worst-user SINR; the first one wins ties.

    Power control for candidate ``j`` starts from the best SINR found so far:
    a candidate whose LP is infeasible at that level cannot beat it and is
    skipped after a single LP.
    """
    bis = bis or DEFAULT_BISECTION
    rand_cfg = rand_cfg or RandomizationConfig()
    tols = tols or DEFAULT_TOLERANCES
    relaxed = solve_relaxed(channels, groups, budget, bis, tols, backend, rank_tol, rank_reduction)
    G, N = groups.n_groups, channels.n_antennas

    if relaxed.t_star <= 0:
        reason = (f"users {list(relaxed.degenerate_users)} have zero channels"
                  if relaxed.degenerate_users else "relaxed optimum is zero")
        return Algorithm1Result(relaxed, _feasible_from(np.zeros((G, N)), np.zeros(G), channels, groups, budget,
                                                        SolutionSource.RANK1_EXACT, diagnostic=reason))

    upper = relaxed.t_star
    if np.all(relaxed.per_group_rank1):
        directions = extract_rank1(relaxed.covs, rank_tol)[0].vectors
        mm = solve_mmpac(directions, channels, groups, budget, bis.with_bounds(0.0, upper), tols)
        diag = f"users {list(mm.nulled_users)} nulled by rank-one directions" if mm.nulled_users else None
        return Algorithm1Result(relaxed, _feasible_from(directions, mm.powers, channels, groups, budget,
                                                        SolutionSource.RANK1_EXACT, diagnostic=diag,
                                                        lp_solves=mm.lp_solves))

    candidates = sample_candidates(relaxed.covs, rand_cfg)
    best_t, best_j, best_powers = 0.0, None, None
    lp_solves = 0
    for j, cand in enumerate(candidates):
        # a zero-width bracket checks the running best without bisecting
        cfg = bis.with_bounds(best_t, max(upper, best_t + bis.epsilon))
        mm = solve_mmpac(cand, channels, groups, budget, cfg, tols)
        lp_solves += mm.lp_solves
        if mm.t_star > best_t:
            best_t, best_j, best_powers = mm.t_star, j, mm.powers

    if best_j is None:
        return Algorithm1Result(relaxed, _feasible_from(np.zeros((G, N)), np.zeros(G), channels, groups, budget,
                                                        SolutionSource.RANDOMIZED,
                                                        diagnostic="no candidate reached a positive SINR",
                                                        lp_solves=lp_solves))
    return Algorithm1Result(relaxed, _feasible_from(candidates[best_j], best_powers, channels, groups, budget,
                                                    SolutionSource.RANDOMIZED, best_j, lp_solves=lp_solves))
