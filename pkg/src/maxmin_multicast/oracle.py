"""Brute-force references for desk-sized instances.

Nothing here touches the conic solvers. Every point the oracles score is
built to be feasible: directions and power fractions come from a grid, and
the overall power scale is the largest one the budget allows, so the score
of a point is simply the worst SINR it delivers.

Parameterization
----------------
A unit direction in ``C^N`` modulo its global phase is described by ``N - 1``
magnitude angles ``theta`` (hyperspherical coordinates, each in
``[0, pi/2]``) and ``N - 1`` relative phases ``phi`` in ``[0, 2 pi)``. Power
fractions across ``G`` groups use the same hyperspherical trick with ``G - 1``
angles (squared coordinates sum to one). With ``m`` grid intervals per
dimension the angle grid is ``(pi/2) j / m`` for ``j = 0..m`` and the phase
grid is ``2 pi j / m`` for ``j = 0..m-1``, so doubling ``m`` only adds points.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import minimize

from .model import (ChannelSet, GroupPartition, PowerBudget, PrecoderSet, ValidationError, check_dimensions,
                    compute_sinr, per_antenna_power, received_gains, sinr_from_gains)


class OracleRefused(ValueError):
    """The instance is beyond what exhaustive enumeration should attempt."""


@dataclass(frozen=True)
class OracleConfig:
    """Grid and refinement settings.

    Parameters
    ----------
    grid_points_per_dim
        Intervals per angular dimension. When the full product would exceed
        ``max_grid_evals`` the resolution is lowered uniformly to fit.
    max_total_dims
        Largest accepted real parameter count ``2 N_t G - G``.
    random_restarts
        Extra local refinements (Nelder-Mead) after the grid pass. Half of the
        budget restarts from the best distinct grid points, the rest from
        seeded uniform points. Zero disables refinement entirely.
    power_points
        Intervals per power dimension of :func:`brute_force_power_control`.
    """

    grid_points_per_dim: int = 64
    max_total_dims: int = 6
    random_restarts: int = 8
    power_points: int = 400
    max_grid_evals: int = 2_000_000
    seed: int = 0

    def __post_init__(self):
        if self.grid_points_per_dim < 1 or self.power_points < 1:
            raise ValueError("grid resolutions must be positive")
        if self.random_restarts < 0:
            raise ValueError("random_restarts must be nonnegative")
        if self.max_grid_evals < 1:
            raise ValueError("max_grid_evals must be positive")


class OracleResult(NamedTuple):
    t_hat: float
    precoders: PrecoderSet


class PowerOracleResult(NamedTuple):
    t_hat: float
    powers: np.ndarray


def parameter_dimension(n_antennas: int, n_groups: int) -> int:
    """Real degrees of freedom of ``G`` precoders once each global phase is removed."""
    return 2 * n_antennas * n_groups - n_groups


def _sphere(angles: np.ndarray) -> np.ndarray:
    """Nonnegative unit vectors from hyperspherical angles, batched on the leading axis."""
    m, d = angles.shape
    out = np.ones((m, d + 1))
    sin_prod = np.ones(m)
    for j in range(d):
        out[:, j] = sin_prod * np.abs(np.cos(angles[:, j]))
        sin_prod = sin_prod * np.abs(np.sin(angles[:, j]))
    out[:, d] = sin_prod
    return out


class _Layout:
    """Maps flat parameter vectors to directions and power fractions."""

    def __init__(self, n_antennas: int, n_groups: int):
        self.N, self.G = n_antennas, n_groups
        self.per_group = 2 * (n_antennas - 1)
        self.dim = n_groups * self.per_group + (n_groups - 1)

    def kinds(self) -> list:
        """``"angle"`` or ``"phase"`` for each coordinate."""
        group = ["angle"] * (self.N - 1) + ["phase"] * (self.N - 1)
        return group * self.G + ["angle"] * (self.G - 1)

    def decode(self, params: np.ndarray):
        m = params.shape[0]
        w = np.empty((m, self.G, self.N), dtype=complex)
        for k in range(self.G):
            block = params[:, k * self.per_group:(k + 1) * self.per_group]
            mags = _sphere(block[:, :self.N - 1])
            phases = np.concatenate([np.zeros((m, 1)), block[:, self.N - 1:]], axis=1)
            w[:, k, :] = mags * np.exp(1j * phases)
        fractions = _sphere(params[:, self.G * self.per_group:]) ** 2
        return w, fractions


def _score(w: np.ndarray, q: np.ndarray, channels: ChannelSet, membership: np.ndarray, budget: PowerBudget):
    """Worst SINR and saturating scale for a batch of (directions, fractions)."""
    h = channels.channels
    gains = np.abs(np.einsum("mkn,un->muk", w.conj(), h)) ** 2
    load = np.einsum("mk,mkn->mn", q, np.abs(w) ** 2)
    if budget.is_per_antenna:
        peak = np.max(load / budget.per_antenna[None, :], axis=1)
    else:
        peak = load.sum(axis=1) / budget.total
    scale = np.where(peak > 0, 1.0 / np.where(peak > 0, peak, 1.0), 0.0)
    rx = gains * (scale[:, None] * q)[:, None, :]
    users = np.arange(h.shape[0])
    signal = rx[:, users, membership]
    interference = rx.sum(axis=2) - signal
    sinr = signal / (interference + channels.noise_vars[None, :])
    return sinr.min(axis=1), scale


def _grid_axes(kinds: list, m: int) -> list:
    axes = []
    for kind in kinds:
        if kind == "angle":
            axes.append(0.5 * np.pi * np.arange(m + 1) / m)
        else:
            axes.append(2.0 * np.pi * np.arange(m) / m)
    return axes


def _effective_resolution(kinds: list, m: int, cap: int) -> int:
    def size(r):
        return int(np.prod([r + 1 if k == "angle" else r for k in kinds], dtype=float)) if kinds else 1

    while m > 1 and size(m) > cap:
        m -= 1
    return m


def _finalize(w: np.ndarray, q: np.ndarray, scale: float, channels: ChannelSet, groups: GroupPartition,
              budget: PowerBudget) -> OracleResult:
    vectors = np.sqrt(scale * q)[:, None] * w
    pwr = per_antenna_power(PrecoderSet(vectors))
    limits = budget.per_antenna if budget.is_per_antenna else np.array([budget.total])
    used = pwr if budget.is_per_antenna else np.array([pwr.sum()])
    over = np.max(used / limits)
    if over > 1.0:
        vectors = vectors / np.sqrt(over)
    precoders = PrecoderSet(vectors)
    return OracleResult(compute_sinr(precoders, channels, groups).min_value, precoders)


def brute_force_max_min(channels: ChannelSet, groups: GroupPartition, budget: PowerBudget,
                        cfg: OracleConfig = OracleConfig()) -> OracleResult:
    """Best worst-user SINR over a grid of precoders, optionally polished locally.

    Raises
    ------
    OracleRefused
        When ``2 N_t G - G`` exceeds ``cfg.max_total_dims``. The check runs
        before anything is enumerated.
    """
    dims = parameter_dimension(channels.n_antennas, groups.n_groups)
    if dims > cfg.max_total_dims:
        raise OracleRefused(f"{dims} real parameters exceed the oracle guard of {cfg.max_total_dims}")
    check_dimensions(channels, groups)
    budget.check_antennas(channels.n_antennas)
    layout = _Layout(channels.n_antennas, groups.n_groups)
    membership = groups.as_array()
    kinds = layout.kinds()

    if layout.dim == 0:
        w, q = layout.decode(np.zeros((1, 0)))
        _, scale = _score(w, q, channels, membership, budget)
        return _finalize(w[0], q[0], float(scale[0]), channels, groups, budget)

    m = _effective_resolution(kinds, cfg.grid_points_per_dim, cfg.max_grid_evals)
    axes = _grid_axes(kinds, m)
    shape = tuple(len(a) for a in axes)
    total = int(np.prod(shape))
    chunk = 1 << 16
    keep = max(1, cfg.random_restarts)
    best_vals = np.full(0, -np.inf)
    best_idx = np.zeros(0, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        digits = np.unravel_index(idx, shape)
        params = np.stack([axes[j][digits[j]] for j in range(len(axes))], axis=1)
        w, q = layout.decode(params)
        vals, _ = _score(w, q, channels, membership, budget)
        # stable merge keeps the lowest flat index on ties
        merged_v = np.concatenate([best_vals, vals])
        merged_i = np.concatenate([best_idx, idx])
        order = np.lexsort((merged_i, -merged_v))[:keep]
        best_vals, best_idx = merged_v[order], merged_i[order]

    def params_of(flat):
        digits = np.unravel_index(np.asarray([flat]), shape)
        return np.array([axes[j][digits[j][0]] for j in range(len(axes))])

    best_x = params_of(best_idx[0])
    best_t = float(best_vals[0])

    if cfg.random_restarts > 0:
        def objective(x):
            w, q = layout.decode(x[None, :])
            return -float(_score(w, q, channels, membership, budget)[0][0])

        rng = np.random.Generator(np.random.PCG64(cfg.seed))
        n_grid = (cfg.random_restarts + 1) // 2
        starts = [params_of(i) for i in best_idx[:n_grid]]
        hi = np.array([0.5 * np.pi if k == "angle" else 2.0 * np.pi for k in kinds])
        starts += [rng.uniform(0.0, hi) for _ in range(cfg.random_restarts - n_grid)]
        step = np.pi / (2.0 * m)
        for x0 in starts:
            x, fx = x0, objective(x0)
            # restarting from the last vertex with a fresh simplex escapes early collapse
            for size in (step, step / 4, step / 16):
                simplex = np.vstack([x] + [x + size * e for e in np.eye(layout.dim)])
                res = minimize(objective, x, method="Nelder-Mead",
                               options={"initial_simplex": simplex, "xatol": 1e-11, "fatol": 1e-13,
                                        "maxiter": 2000 * layout.dim})
                if res.fun < fx:
                    x, fx = res.x, float(res.fun)
            if -fx > best_t:
                best_t, best_x = -fx, x

    w, q = layout.decode(best_x[None, :])
    _, scale = _score(w, q, channels, membership, budget)
    return _finalize(w[0], q[0], float(scale[0]), channels, groups, budget)


def brute_force_power_control(candidates, channels: ChannelSet, groups: GroupPartition, budget: PowerBudget,
                              cfg: OracleConfig = OracleConfig()) -> PowerOracleResult:
    """Exhaustive power search for fixed directions and at most two groups.

    Each group's power ranges over ``[0, p_k_max]``, where ``p_k_max`` is the
    most it could use alone, on a grid of ``cfg.power_points + 1`` values.
    Every grid point is then scaled up until the budget binds (scaling up
    only raises SINRs), and the best worst-user SINR is returned.
    """
    w = candidates.vectors if isinstance(candidates, PrecoderSet) else np.asarray(candidates, dtype=complex)
    if w.ndim != 2:
        raise ValidationError(f"candidates must be a (G, N_t) array, got shape {w.shape}")
    G = w.shape[0]
    if G > 2:
        raise OracleRefused(f"power grid oracle handles at most two groups, got {G}")
    check_dimensions(channels, groups, w.shape[1], G)
    budget.check_antennas(w.shape[1])
    rows = (np.abs(w) ** 2).T
    gains = received_gains(w, channels)
    membership = groups.as_array()

    alone = np.array([np.max(budget.utilization(rows[:, k])) for k in range(G)])
    p_max = np.where(alone > 0, 1.0 / np.where(alone > 0, alone, 1.0), 0.0)
    n = cfg.power_points
    axis = np.arange(n + 1) / n
    if G == 1:
        grid = (axis * p_max[0])[:, None]
    else:
        a, b = np.meshgrid(axis * p_max[0], axis * p_max[1], indexing="ij")
        grid = np.stack([a.ravel(), b.ravel()], axis=1)

    if budget.is_per_antenna:
        util = (grid @ rows.T) / budget.per_antenna[None, :]
    else:
        util = (grid @ rows.T).sum(axis=1, keepdims=True) / budget.total
    peak = util.max(axis=1)
    ok = peak > 0
    scaled = grid[ok] / peak[ok, None]
    if scaled.shape[0] == 0:
        return PowerOracleResult(0.0, np.zeros(G))

    rx = gains[None, :, :] * scaled[:, None, :]
    users = np.arange(groups.n_users)
    signal = rx[:, users, membership]
    sinr = signal / (rx.sum(axis=2) - signal + channels.noise_vars[None, :])
    worst = sinr.min(axis=1)
    j = int(np.argmax(worst))
    powers = scaled[j]
    t_hat = float(np.min(sinr_from_gains(gains, powers, channels.noise_vars, membership)))
    return PowerOracleResult(t_hat, powers)
