"""Relaxed max-min fair beamforming by bisection over the utilization SDP."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .conic import (DEFAULT_TOLERANCES, SolveStatus, SolverFailure, SolverTolerances, solve_sdp)
from .model import (DEFAULT_RANK_TOL, ChannelSet, CovarianceSet, GroupPartition, PowerBudget, ValidationError,
                    check_dimensions, extract_rank1, per_antenna_power_relaxed)


@dataclass(frozen=True)
class BisectionConfig:
    """Interval ``[lower_init, upper_init]`` halved until its width is at most ``epsilon``.

    ``upper_init=None`` means the analytic interference-free bound.
    """

    epsilon: float = 1e-3
    max_iters: int = 100
    lower_init: float = 0.0
    upper_init: Optional[float] = None

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.lower_init < 0:
            raise ValueError("lower_init must be nonnegative")
        if self.upper_init is not None and not self.lower_init < self.upper_init:
            raise ValueError("lower_init must be below upper_init")

    def with_bounds(self, lower: float, upper: Optional[float]) -> "BisectionConfig":
        return BisectionConfig(self.epsilon, self.max_iters, lower, upper)

    def iteration_bound(self, lower: float, upper: float) -> int:
        """``ceil(log2((U - L) / eps))``, floored at zero."""
        width = upper - lower
        if width <= self.epsilon:
            return 0
        return math.ceil(math.log2(width / self.epsilon))


DEFAULT_BISECTION = BisectionConfig()


@dataclass(frozen=True)
class BisectionStep:
    t: float
    status: SolveStatus
    r_star: float
    feasible: bool


@dataclass(frozen=True)
class RelaxedSolution:
    """Outcome of the relaxed max-min fair problem.

    ``t_star`` is the lower end of the final bracket and ``covs`` the
    covariances found at that point. ``antenna_utilization`` has one entry per
    antenna for per-antenna budgets and a single entry for a sum budget.
    """

    t_star: float
    covs: CovarianceSet
    iterations: int
    per_group_rank1: np.ndarray
    antenna_utilization: np.ndarray
    upper: float
    r_star: float
    degenerate_users: tuple = ()
    trace: tuple = field(default=(), repr=False)


def sinr_upper_bound(channels: ChannelSet, budget: PowerBudget) -> float:
    """Interference-free SINR of the best user with the whole power budget behind it.

    ``max_i P_tot * ||h_i||^2 / sigma_i^2`` with ``P_tot = sum_n P_n`` for
    per-antenna budgets.
    """
    snr = np.sum(np.abs(channels.channels) ** 2, axis=1) / channels.noise_vars
    bound = budget.total_power() * float(np.max(snr))
    if bound <= 0:
        raise ValidationError("all channels are zero; the problem is degenerate")
    return bound


def _zero_covs(n_groups: int, n_antennas: int) -> CovarianceSet:
    return CovarianceSet(np.zeros((n_groups, n_antennas, n_antennas), dtype=complex))


def _hermitian_directions(r: int) -> np.ndarray:
    """Real basis of ``r x r`` Hermitian matrices, shape ``(r*r, r, r)``."""
    out = []
    for j in range(r):
        e = np.zeros((r, r), dtype=complex)
        e[j, j] = 1.0
        out.append(e)
    for j in range(r):
        for l in range(j + 1, r):
            e = np.zeros((r, r), dtype=complex)
            e[j, l] = e[l, j] = 1.0
            out.append(e)
            e = np.zeros((r, r), dtype=complex)
            e[j, l], e[l, j] = 1j, -1j
            out.append(e)
    return np.array(out)


def reduce_rank(covs: CovarianceSet, channels: ChannelSet, groups: GroupPartition, budget: PowerBudget,
                t: float, null_tol: float = 1e-10, max_steps: Optional[int] = None) -> CovarianceSet:
    """Lower-rank covariances with exactly the same constraint values.

    Writes ``X_k = V_k V_k^H`` and looks for Hermitian ``D_k`` such that
    ``X_k(a) = V_k (I + a D_k) V_k^H`` leaves every linearized SINR row at
    target ``t`` and every budget row unchanged for all ``a``. Stepping until
    ``I + a D_k`` becomes singular removes at least one rank; the process
    repeats until no such direction is left or every ``X_k`` has rank one.

    Interior-point solvers return the maximum-rank point of the optimal set.
    With real-valued channels that point is real (the problem is invariant
    under conjugation) and usually has rank two even when a rank-one optimum
    exists; this step recovers it.
    """
    G, N = covs.n_groups, covs.n_antennas
    h = channels.channels
    membership = groups.as_array()
    weights = np.where(np.arange(G)[None, :] == membership[:, None], 1.0, -t)  # (N_u, G)
    mats = np.array(covs.matrices)
    steps = max_steps if max_steps is not None else G * N
    for _ in range(steps):
        factors = []
        for x in mats:
            lam, u = np.linalg.eigh(x)
            keep = lam > 1e-12 * max(lam[-1], 0.0) if lam[-1] > 0 else np.zeros(N, dtype=bool)
            factors.append(u[:, keep] * np.sqrt(lam[keep])[None, :])
        ranks = [f.shape[1] for f in factors]
        if max(ranks) <= 1:
            break
        blocks, cols = [], []
        for k, v in enumerate(factors):
            basis = _hermitian_directions(ranks[k])
            if basis.size == 0:
                continue
            c = v.conj().T @ h.T                                          # (r, N_u): V^H h_i
            # Tr(V D V^H Q_i) = c_i^H D c_i
            sinr = np.einsum("ji,bjl,li->ib", c.conj(), basis, c).real * weights[:, k][:, None]
            diag = np.einsum("nj,bjl,nl->nb", v, basis, v.conj()).real  # [V D V^H]_nn
            rows = diag if budget.is_per_antenna else diag.sum(axis=0, keepdims=True)
            blocks.append(np.vstack([sinr, rows]))
            cols.append((k, basis))
        m = np.hstack(blocks)
        scale = np.linalg.norm(m, axis=1, keepdims=True)
        m = m / np.where(scale > 0, scale, 1.0)
        _, sv, vt = np.linalg.svd(m)
        sv = np.concatenate([sv, np.zeros(vt.shape[0] - sv.size)])
        null = np.flatnonzero(sv <= null_tol * max(sv[0], 1.0))
        if null.size == 0:
            break
        direction = vt[null[-1]]
        deltas, offset = {}, 0
        for k, basis in cols:
            deltas[k] = np.einsum("b,bjl->jl", direction[offset:offset + len(basis)], basis)
            offset += len(basis)
        top = max(np.linalg.eigvalsh(d)[-1] for d in deltas.values())
        if top <= 0:
            deltas = {k: -d for k, d in deltas.items()}
            top = max(np.linalg.eigvalsh(d)[-1] for d in deltas.values())
        a = -1.0 / top
        for k, d in deltas.items():
            v = factors[k]
            inner = np.eye(ranks[k]) + a * d
            lam, w = np.linalg.eigh(0.5 * (inner + inner.conj().T))
            inner = (w * np.clip(lam, 0.0, None)) @ w.conj().T
            mats[k] = v @ inner @ v.conj().T
    return CovarianceSet(mats)


def solve_relaxed(channels: ChannelSet, groups: GroupPartition, budget: PowerBudget,
                  bis: Optional[BisectionConfig] = None, tols: Optional[SolverTolerances] = None,
                  backend=None, rank_tol: float = DEFAULT_RANK_TOL,
                  rank_reduction: bool = True) -> RelaxedSolution:
    """Bisection on the SINR target for either budget kind.

    A midpoint ``t`` is feasible when the utilization SDP returns
    ``r* <= 1 + feas_tol``. An infeasible SDP (target out of reach at any
    power) counts as an infeasible midpoint. With ``rank_reduction`` the
    retained covariances go through :func:`reduce_rank` before the rank test.
    """
    bis = bis or DEFAULT_BISECTION
    tols = tols or DEFAULT_TOLERANCES
    check_dimensions(channels, groups)
    budget.check_antennas(channels.n_antennas)
    G, N = groups.n_groups, channels.n_antennas

    norms = np.linalg.norm(channels.channels, axis=1)
    degenerate = tuple(int(i) for i in np.flatnonzero(norms == 0))
    if degenerate:
        covs = _zero_covs(G, N)
        return RelaxedSolution(0.0, covs, 0, np.ones(G, dtype=bool),
                               budget.utilization(per_antenna_power_relaxed(covs)), 0.0, 0.0, degenerate)

    lower = float(bis.lower_init)
    upper = float(bis.upper_init) if bis.upper_init is not None else sinr_upper_bound(channels, budget)
    covs, r_kept = None, 0.0
    trace = []
    iterations = 0
    while upper - lower > bis.epsilon and iterations < bis.max_iters:
        mid = 0.5 * (lower + upper)
        sol = solve_sdp(mid, channels, groups, budget, tols, backend)
        iterations += 1
        st = sol.status.status
        feasible = st is SolveStatus.OPTIMAL and sol.r_star <= 1.0 + tols.feas_tol
        trace.append(BisectionStep(mid, st, sol.r_star, feasible))
        if feasible:
            lower, covs, r_kept = mid, sol.covs, sol.r_star
        elif st in (SolveStatus.OPTIMAL, SolveStatus.INFEASIBLE):
            upper = mid
        else:
            raise SolverFailure(f"SDP backend failed at t={mid:.6g} ({st.value})", sol.status, trace)

    if covs is None:
        if lower == 0.0:
            covs = _zero_covs(G, N)
        else:
            sol = solve_sdp(lower, channels, groups, budget, tols, backend)
            if not sol.status.ok:
                raise SolverFailure(f"SDP backend failed at the lower bound t={lower:.6g}", sol.status, trace)
            covs, r_kept = sol.covs, sol.r_star

    if rank_reduction and lower > 0:
        covs = reduce_rank(covs, channels, groups, budget, lower)
    _, rank1 = extract_rank1(covs, rank_tol)
    util = budget.utilization(per_antenna_power_relaxed(covs))
    return RelaxedSolution(lower, covs, iterations, rank1, util, upper, r_kept, (), tuple(trace))


def solve_max_min_fair(channels: ChannelSet, groups: GroupPartition, budget: PowerBudget,
                       bis: Optional[BisectionConfig] = None, tols: Optional[SolverTolerances] = None,
                       backend=None) -> RelaxedSolution:
    """Relaxed max-min fair precoding under per-antenna power limits."""
    if not budget.is_per_antenna:
        raise ValidationError("solve_max_min_fair needs a per-antenna budget; use solve_max_min_fair_spc")
    return solve_relaxed(channels, groups, budget, bis, tols, backend)


def solve_max_min_fair_spc(channels: ChannelSet, groups: GroupPartition, total: float,
                           bis: Optional[BisectionConfig] = None, tols: Optional[SolverTolerances] = None,
                           backend=None) -> RelaxedSolution:
    """Relaxed max-min fair precoding under a single sum-power limit."""
    return solve_relaxed(channels, groups, PowerBudget.sum_power(total), bis, tols, backend)


class RoundTripResiduals(NamedTuple):
    lhs_residual: float
    rhs_residual: float


def verify_claim1(channels: ChannelSet, groups: GroupPartition, budget: PowerBudget, t_probe: float,
                  tols: Optional[SolverTolerances] = None, bis: Optional[BisectionConfig] = None,
                  backend=None) -> RoundTripResiduals:
    """Round-trip residuals between the max-min and min-utilization problems.

    * ``lhs = |Q(F(p), p) - 1|``: the fair optimum, fed back as a target,
      needs exactly the whole budget.
    * ``rhs = |F(Q(t, p) * p) - t| / t``: scaling the budget by the utilization
      needed for ``t`` gives back ``t`` as the fair optimum.
    """
    if t_probe <= 0:
        raise ValidationError("t_probe must be positive")
    tols = tols or DEFAULT_TOLERANCES
    fair = solve_relaxed(channels, groups, budget, bis, tols, backend)
    back = solve_sdp(fair.t_star, channels, groups, budget, tols, backend)
    if not back.status.ok:
        raise SolverFailure(f"SDP failed at the fair optimum t={fair.t_star:.6g}", back.status)
    lhs = abs(back.r_star - 1.0)

    need = solve_sdp(t_probe, channels, groups, budget, tols, backend)
    if not need.status.ok:
        raise SolverFailure(f"SDP failed at the probe t={t_probe:.6g} ({need.status.status.value})", need.status)
    refit = solve_relaxed(channels, groups, budget.scaled(need.r_star), bis, tols, backend)
    rhs = abs(refit.t_star - t_probe) / t_probe
    return RoundTripResiduals(lhs, rhs)
