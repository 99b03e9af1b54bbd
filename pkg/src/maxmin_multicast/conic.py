"""Convex subproblems solved once per bisection step.

Two shapes are needed:

* the relaxed per-antenna utilization minimization, a semidefinite program in
  the covariances ``X_k`` for a *fixed* SINR target ``t``;
* the power-control linear program over group powers ``p_k`` for fixed
  candidate directions.

The SINR fractions are linearized as
``Tr(Q_i X_k) - t * sum_{l != k} Tr(Q_i X_l) >= t * sigma_i^2``,
which is linear in the unknowns because ``t`` is a parameter of each call.

The default SDP backend talks to Clarabel directly. Each complex Hermitian
``X = A + iB`` is carried by the real entries of ``A`` (upper triangle) and
``B`` (strict upper triangle) and constrained through the real embedding
``[[A, -B], [B, A]] >= 0``.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .model import (BudgetKind, ChannelSet, CovarianceSet, GroupPartition, PowerBudget, ValidationError,
                    check_dimensions)


class SolveStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    NUMERICAL_FAILURE = "numerical_failure"
    ITERATION_LIMIT = "iteration_limit"


@dataclass(frozen=True)
class ConicSolveStatus:
    status: SolveStatus
    objective: Optional[float] = None
    primal_residual: float = float("nan")
    dual_residual: float = float("nan")

    def __post_init__(self):
        if (self.status is SolveStatus.OPTIMAL) != (self.objective is not None):
            raise ValueError("objective must be present exactly when the status is optimal")

    @property
    def ok(self) -> bool:
        return self.status is SolveStatus.OPTIMAL


@dataclass(frozen=True)
class SolverTolerances:
    feas_tol: float = 1e-7
    opt_gap_tol: float = 1e-7
    max_iters: int = 200

    def __post_init__(self):
        if self.feas_tol <= 0 or self.opt_gap_tol <= 0 or self.max_iters <= 0:
            raise ValueError("solver tolerances and iteration limit must be positive")


DEFAULT_TOLERANCES = SolverTolerances()


class SdpSolution(NamedTuple):
    status: ConicSolveStatus
    r_star: float
    covs: Optional[CovarianceSet]


class LpSolution(NamedTuple):
    status: ConicSolveStatus
    r_star: float
    powers: Optional[np.ndarray]


class PowerControlInfeasible(Exception):
    """Some user gets zero gain from its own group's direction, so no power level serves it."""

    def __init__(self, users):
        self.users = tuple(int(u) for u in users)
        super().__init__(f"users {list(self.users)} receive zero gain from their own group's direction")


class SolverFailure(RuntimeError):
    def __init__(self, message, status: ConicSolveStatus, trace=()):
        super().__init__(message)
        self.status = status
        self.trace = list(trace)


# --------------------------------------------------------------------------
# problem data shared by every backend
# --------------------------------------------------------------------------

def budget_diag_weights(budget: PowerBudget, n_antennas: int) -> np.ndarray:
    """Rows ``D`` such that the utilization constraints read ``sum_k D @ diag(X_k) <= r``."""
    budget.check_antennas(n_antennas)
    if budget.kind is BudgetKind.PER_ANTENNA:
        return np.diag(1.0 / budget.per_antenna)
    return np.full((1, n_antennas), 1.0 / budget.total)


@dataclass(frozen=True)
class UtilizationSdp:
    """``min r`` s.t. linearized SINR rows at target ``t`` and ``D @ diag(sum_k X_k) <= r``."""

    t: float
    channels: ChannelSet
    groups: GroupPartition
    diag_weights: np.ndarray

    @property
    def n_groups(self) -> int:
        return self.groups.n_groups

    @property
    def n_antennas(self) -> int:
        return self.channels.n_antennas


class ClarabelSdpBackend:
    """Interior-point SDP backend built on Clarabel's native interface.

    Solves the equivalent budget-normalized program

        max tau  s.t.  Tr(Q_i X_k) - t sum_{l != k} Tr(Q_i X_l) >= tau t sigma_i^2,
                       D diag(sum_k X_k) <= 1,  X_k >= 0,

    and maps back through ``r* = 1 / tau*`` and ``X = X_tau / tau*``. The
    feasible set is compact and always strictly feasible, so the solver stays
    well conditioned far above the attainable SINR, where the direct
    ``min r`` form has an unbounded optimal power and tends to stall.
    ``tau* <= 0`` means no finite power reaches ``t``.

    Stateless apart from immutable per-size caches, so one instance may serve
    concurrent solves.
    """

    name = "clarabel"

    def solve(self, problem: UtilizationSdp, tols: SolverTolerances) -> SdpSolution:
        import clarabel

        N, G = problem.n_antennas, problem.n_groups
        if problem.t == 0:
            zero = CovarianceSet(np.zeros((G, N, N), dtype=complex))
            return SdpSolution(ConicSolveStatus(SolveStatus.OPTIMAL, 0.0, 0.0, 0.0), 0.0, zero)
        basis, cone_cols = _hermitian_basis(N)
        nv = basis.shape[0]
        nx = G * nv + 1
        itau = nx - 1

        h = problem.channels.channels
        # tr_coef[i, v] = Tr(Q_i E_v) = h_i^H E_v h_i
        tr_coef = np.real(np.einsum("ia,vab,ib->iv", h.conj(), basis, h))
        diag_coef = np.real(np.einsum("vnn->vn", basis))  # (nv, N)
        t = float(problem.t)
        membership = problem.groups.as_array()
        sigma2 = problem.channels.noise_vars

        n_users = len(membership)
        D = problem.diag_weights
        n_lin = n_users + D.shape[0]
        A_lin = np.zeros((n_lin, nx))
        b_lin = np.zeros(n_lin)
        # SINR rows: signal - t * interference - tau * t * sigma^2 >= 0
        for i, k in enumerate(membership):
            row = A_lin[i]
            for l in range(G):
                row[l * nv:(l + 1) * nv] = -tr_coef[i] if l == k else t * tr_coef[i]
            row[itau] = t * sigma2[i]
            row /= np.max(np.abs(row))
        # utilization rows: D diag(sum_k X_k) <= 1
        util = diag_coef @ D.T  # (nv, m)
        for j in range(D.shape[0]):
            for l in range(G):
                A_lin[n_users + j, l * nv:(l + 1) * nv] = util[:, j]
            b_lin[n_users + j] = 1.0
        # PSD blocks: s = svec(embed(X_k)) = -A x
        A_psd = sp.block_diag([sp.csc_matrix(-cone_cols.T)] * G, format="csc")
        A_psd = sp.hstack([A_psd, sp.csc_matrix((A_psd.shape[0], 1))], format="csc")
        A = sp.vstack([sp.csc_matrix(A_lin), A_psd], format="csc")
        b = np.concatenate([b_lin, np.zeros(A_psd.shape[0])])
        q = np.zeros(nx)
        q[itau] = -1.0
        cones = [clarabel.NonnegativeConeT(n_lin)] + [clarabel.PSDTriangleConeT(2 * N)] * G

        for overrides in _CLARABEL_RETRIES:
            settings = clarabel.DefaultSettings()
            settings.verbose = False
            settings.tol_feas = tols.feas_tol
            settings.tol_gap_abs = tols.opt_gap_tol
            settings.tol_gap_rel = tols.opt_gap_tol
            settings.max_iter = tols.max_iters
            settings.max_threads = 1
            for key, value in overrides.items():
                setattr(settings, key, value)
            sol = clarabel.DefaultSolver(sp.csc_matrix((nx, nx)), q, A, b, cones, settings).solve()
            status = _clarabel_status(sol.status)
            if status not in (SolveStatus.NUMERICAL_FAILURE, SolveStatus.ITERATION_LIMIT):
                break

        if status is not SolveStatus.OPTIMAL:
            return SdpSolution(ConicSolveStatus(status, None, sol.r_prim, sol.r_dual), float("nan"), None)
        tau = float(np.asarray(sol.x)[itau])
        if tau <= tols.feas_tol:
            # no finite power reaches t
            return SdpSolution(ConicSolveStatus(SolveStatus.INFEASIBLE, None, sol.r_prim, sol.r_dual),
                               float("inf"), None)
        # decode from the cone slacks, which the interior-point iterates keep inside the PSD cone
        slack = np.asarray(sol.s)[n_lin:].reshape(G, -1)
        mats = np.array([_complex_from_embedding(_unsvec(sk, 2 * N)) for sk in slack]) / tau
        # The dual objective bounds tau* from above, so 1/tau_dual never overstates the
        # power needed. At high SNR the solver can stop with a relative gap near 1e-5;
        # judging feasibility by the primal value alone would then reject reachable
        # targets and let the relaxed bound fall below an achievable SINR.
        tau_dual = -float(sol.obj_val_dual)
        r_star = 1.0 / max(tau, tau_dual) if math.isfinite(tau_dual) else 1.0 / tau
        covs = CovarianceSet(mats)
        return SdpSolution(ConicSolveStatus(status, r_star, sol.r_prim, sol.r_dual), r_star, covs)


# Settings tried in order when a solve stalls. Clarabel occasionally reports
# insufficient progress on one target while its floating-point neighbours
# solve cleanly; tighter iterative refinement or shorter steps get through.
_CLARABEL_RETRIES = (
    {},
    {"iterative_refinement_reltol": 1e-14, "iterative_refinement_max_iter": 50},
    {"max_step_fraction": 0.95},
)


def _clarabel_status(status) -> SolveStatus:
    name = str(status)
    if name in ("Solved", "AlmostSolved"):
        return SolveStatus.OPTIMAL
    if name in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        return SolveStatus.INFEASIBLE
    if name in ("DualInfeasible", "AlmostDualInfeasible"):
        return SolveStatus.UNBOUNDED
    if name in ("MaxIterations", "MaxTime"):
        return SolveStatus.ITERATION_LIMIT
    return SolveStatus.NUMERICAL_FAILURE


@functools.lru_cache(maxsize=None)
def _hermitian_basis(n: int):
    """Real basis ``E_v`` of ``n x n`` Hermitian matrices and the svec of their real embeddings.

    Order: diagonal and upper real parts first (row-major over ``a <= b``),
    then imaginary parts for ``a < b``.
    """
    mats = []
    for a in range(n):
        for b in range(a, n):
            e = np.zeros((n, n), dtype=complex)
            e[a, b] = e[b, a] = 1.0
            mats.append(e)
    for a in range(n):
        for b in range(a + 1, n):
            e = np.zeros((n, n), dtype=complex)
            e[a, b] = 1j
            e[b, a] = -1j
            mats.append(e)
    basis = np.array(mats)
    cols = np.array([_svec(_real_embedding(e)) for e in basis])
    basis.setflags(write=False)
    cols.setflags(write=False)
    return basis, cols


def _real_embedding(x: np.ndarray) -> np.ndarray:
    return np.block([[x.real, -x.imag], [x.imag, x.real]])


def _unsvec(v: np.ndarray, n: int) -> np.ndarray:
    m = np.zeros((n, n))
    idx = 0
    for j in range(n):
        for i in range(j + 1):
            m[i, j] = m[j, i] = v[idx] if i == j else v[idx] / np.sqrt(2.0)
            idx += 1
    return m


def _complex_from_embedding(m: np.ndarray) -> np.ndarray:
    # nearest point of the embedding's structure; PSD-preserving
    n = m.shape[0] // 2
    re = 0.5 * (m[:n, :n] + m[n:, n:])
    im = 0.5 * (m[n:, :n] - m[:n, n:])
    return re + 1j * im


def _svec(m: np.ndarray) -> np.ndarray:
    # upper triangle stacked by columns, off-diagonals scaled by sqrt(2)
    n = m.shape[0]
    out = []
    for j in range(n):
        for i in range(j + 1):
            out.append(m[i, j] if i == j else np.sqrt(2.0) * m[i, j])
    return np.array(out)


class CvxpySdpBackend:
    """Reference backend through cvxpy's modeling layer (SCS or CVXOPT).

    Slower than :class:`ClarabelSdpBackend`; kept as an independently built
    cross-check of the same program.
    """

    def __init__(self, solver: str = "CVXOPT"):
        self.solver = solver
        self.name = f"cvxpy-{solver.lower()}"

    def solve(self, problem: UtilizationSdp, tols: SolverTolerances) -> SdpSolution:
        import cvxpy as cp

        N, G = problem.n_antennas, problem.n_groups
        X = [cp.Variable((N, N), hermitian=True) for _ in range(G)]
        r = cp.Variable()
        cons = [x >> 0 for x in X]
        h = problem.channels.channels
        for i, k in enumerate(problem.groups.membership):
            Q = np.outer(h[i], h[i].conj())
            sig = cp.real(cp.trace(Q @ X[k]))
            intf = sum((cp.real(cp.trace(Q @ X[l])) for l in range(G) if l != k), start=0)
            cons.append(sig - problem.t * intf >= problem.t * problem.channels.noise_vars[i])
        diag = cp.real(cp.diag(sum(X)))
        cons.append(problem.diag_weights @ diag <= r)
        prob = cp.Problem(cp.Minimize(r), cons)
        try:
            prob.solve(solver=self.solver)
        except cp.error.SolverError:
            return SdpSolution(ConicSolveStatus(SolveStatus.NUMERICAL_FAILURE), float("nan"), None)
        if prob.status in ("optimal", "optimal_inaccurate"):
            mats = np.array([x.value for x in X])
            return SdpSolution(ConicSolveStatus(SolveStatus.OPTIMAL, float(r.value)), float(r.value),
                               CovarianceSet(mats, herm_tol=1e-6, psd_tol=1e-6))
        if prob.status in ("infeasible", "infeasible_inaccurate"):
            return SdpSolution(ConicSolveStatus(SolveStatus.INFEASIBLE), float("inf"), None)
        return SdpSolution(ConicSolveStatus(SolveStatus.NUMERICAL_FAILURE), float("nan"), None)


DEFAULT_SDP_BACKEND = ClarabelSdpBackend()


def _solve_utilization_sdp(t, channels, groups, budget, tols, backend):
    if t < 0 or not np.isfinite(t):
        raise ValidationError(f"SINR target must be a finite nonnegative number, got {t}")
    check_dimensions(channels, groups)
    problem = UtilizationSdp(float(t), channels, groups, budget_diag_weights(budget, channels.n_antennas))
    return (backend or DEFAULT_SDP_BACKEND).solve(problem, tols or DEFAULT_TOLERANCES)


def solve_sdp_min_r(t: float, channels: ChannelSet, groups: GroupPartition, budget: PowerBudget,
                    tols: Optional[SolverTolerances] = None, backend=None) -> SdpSolution:
    """Minimize the worst per-antenna utilization ``max_n [sum_k X_k]_nn / P_n`` at SINR target ``t``.

    ``r_star > 1`` means the target is out of reach within the budget. An
    ``INFEASIBLE`` status means no power level reaches ``t`` at all
    (interference-limited target); ``r_star`` is then ``inf``.
    """
    if budget.kind is not BudgetKind.PER_ANTENNA:
        raise ValidationError("solve_sdp_min_r needs a per-antenna budget; use solve_sdp_min_r_spc")
    return _solve_utilization_sdp(t, channels, groups, budget, tols, backend)


def solve_sdp_min_r_spc(t: float, channels: ChannelSet, groups: GroupPartition, total: float,
                        tols: Optional[SolverTolerances] = None, backend=None) -> SdpSolution:
    """Sum-power variant: minimize ``sum_k Tr(X_k) / P_tot`` at SINR target ``t``."""
    return _solve_utilization_sdp(t, channels, groups, PowerBudget.sum_power(total), tols, backend)


def solve_sdp(t, channels, groups, budget: PowerBudget, tols=None, backend=None) -> SdpSolution:
    """Dispatch on the budget kind."""
    return _solve_utilization_sdp(t, channels, groups, budget, tols, backend)


# --------------------------------------------------------------------------
# power-control LP
# --------------------------------------------------------------------------

_HIGHS_STATUS = {
    0: SolveStatus.OPTIMAL,
    1: SolveStatus.ITERATION_LIMIT,
    2: SolveStatus.INFEASIBLE,
    3: SolveStatus.UNBOUNDED,
    4: SolveStatus.NUMERICAL_FAILURE,
}


def solve_lp_power_control(t: float, gains: np.ndarray, noise_vars: np.ndarray, budget_rows: np.ndarray,
                           budget: PowerBudget, membership, tols: Optional[SolverTolerances] = None) -> LpSolution:
    """Minimize the worst utilization over group powers for fixed directions.

    Parameters
    ----------
    t : float
        Common SINR target.
    gains : (N_u, G) array
        ``|w_k^H h_i|^2`` for the candidate directions.
    noise_vars : (N_u,) array
    budget_rows : (N_t, G) array
        ``[w_k w_k^H]_nn``, the power each unit of ``p_k`` puts on antenna ``n``.
    budget : PowerBudget
        Per-antenna limits use one row per antenna; a sum budget collapses
        ``budget_rows`` into its column sums.
    membership : sequence of int
        Group of each user.

    Raises
    ------
    PowerControlInfeasible
        If ``t > 0`` and some user has zero gain from its own group's direction.
    """
    tols = tols or DEFAULT_TOLERANCES
    gains = np.asarray(gains, dtype=float)
    budget_rows = np.asarray(budget_rows, dtype=float)
    noise_vars = np.asarray(noise_vars, dtype=float)
    membership = np.asarray(membership, dtype=int)
    n_users, G = gains.shape
    if t < 0 or not np.isfinite(t):
        raise ValidationError(f"SINR target must be a finite nonnegative number, got {t}")
    if np.any(gains < 0) or np.any(budget_rows < 0):
        raise ValidationError("gains and budget rows must be nonnegative")
    if membership.shape != (n_users,) or noise_vars.shape != (n_users,):
        raise ValidationError("membership and noise_vars must have one entry per user")
    if budget_rows.shape[1] != G:
        raise ValidationError(f"budget_rows must have {G} columns")
    budget.check_antennas(budget_rows.shape[0])

    if budget.is_per_antenna:
        util_rows = budget_rows / budget.per_antenna[:, None]
    else:
        util_rows = budget_rows.sum(axis=0, keepdims=True) / budget.total

    if t == 0:
        return LpSolution(ConicSolveStatus(SolveStatus.OPTIMAL, 0.0, 0.0, 0.0), 0.0, np.zeros(G))

    users = np.arange(n_users)
    own = gains[users, membership]
    nulled = np.flatnonzero(own <= 0)
    if nulled.size:
        raise PowerControlInfeasible(nulled)

    # variables [p_1..p_G, r]
    a_sinr = np.zeros((n_users, G + 1))
    a_sinr[:, :G] = t * gains
    a_sinr[users, membership] = -own
    b_sinr = -t * noise_vars
    norm = np.max(np.abs(a_sinr), axis=1)
    a_sinr /= norm[:, None]
    b_sinr = b_sinr / norm
    a_util = np.hstack([util_rows, -np.ones((util_rows.shape[0], 1))])
    A = np.vstack([a_sinr, a_util])
    b = np.concatenate([b_sinr, np.zeros(util_rows.shape[0])])
    c = np.zeros(G + 1)
    c[G] = 1.0
    res = linprog(c, A_ub=A, b_ub=b, bounds=[(0, None)] * (G + 1), method="highs",
                  options={"primal_feasibility_tolerance": max(tols.feas_tol, 1e-10),
                           "dual_feasibility_tolerance": max(tols.opt_gap_tol, 1e-10),
                           "maxiter": max(tols.max_iters, 10 * (G + n_users))})
    status = _HIGHS_STATUS.get(res.status, SolveStatus.NUMERICAL_FAILURE)
    if status is not SolveStatus.OPTIMAL:
        r_star = float("inf") if status is SolveStatus.INFEASIBLE else float("nan")
        return LpSolution(ConicSolveStatus(status), r_star, None)
    powers = np.clip(res.x[:G], 0.0, None)
    r_star = float(np.max(util_rows @ powers))
    slack = A @ res.x - b
    return LpSolution(ConicSolveStatus(status, r_star, float(max(np.max(slack), 0.0)), 0.0), r_star, powers)
