"""Domain types and pure evaluation functions.

Conventions
-----------
* ``channels[i]`` holds ``h_i``; user ``i`` receives ``y_i = h_i^H x + n_i``.
* Group indices are 0-based in the Python API.
* All containers copy their inputs and mark the arrays read-only.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

HERM_TOL = 1e-8
PSD_TOL = 1e-8
DEFAULT_RANK_TOL = 1e-4


class ValidationError(ValueError):
    """Raised when an input violates a structural or numerical invariant."""


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class ChannelSet:
    """Per-user channel vectors ``h_i`` (rows) and noise variances."""

    channels: np.ndarray
    noise_vars: np.ndarray

    def __post_init__(self):
        h = _frozen(self.channels, complex)
        s = _frozen(self.noise_vars, float)
        if h.ndim != 2 or h.shape[0] == 0 or h.shape[1] == 0:
            raise ValidationError(f"channels must be a nonempty (n_users, n_antennas) array, got shape {h.shape}")
        if s.shape != (h.shape[0],):
            raise ValidationError(f"noise_vars must have length {h.shape[0]}, got shape {s.shape}")
        if not np.all(np.isfinite(h)) or not np.all(np.isfinite(s)):
            raise ValidationError("channels and noise_vars must be finite")
        if np.any(s <= 0):
            raise ValidationError("every noise variance must be strictly positive")
        if not np.any(np.abs(h) > 0):
            raise ValidationError("at least one channel vector must be nonzero")
        object.__setattr__(self, "channels", h)
        object.__setattr__(self, "noise_vars", s)

    @property
    def n_users(self) -> int:
        return self.channels.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.channels.shape[1]

    def gram(self, i: int) -> np.ndarray:
        """``Q_i = h_i h_i^H``."""
        h = self.channels[i]
        return np.outer(h, h.conj())


@dataclass(frozen=True)
class GroupPartition:
    """Assignment of every user to exactly one of ``n_groups`` multicast groups."""

    n_groups: int
    membership: tuple

    def __post_init__(self):
        members = tuple(int(g) for g in self.membership)
        if self.n_groups < 1:
            raise ValidationError("n_groups must be positive")
        if not members:
            raise ValidationError("membership must list at least one user")
        bad = [g for g in members if not 0 <= g < self.n_groups]
        if bad:
            raise ValidationError(f"group indices out of range [0, {self.n_groups}): {bad}")
        empty = sorted(set(range(self.n_groups)) - set(members))
        if empty:
            raise ValidationError(f"groups {empty} have no users")
        object.__setattr__(self, "membership", members)

    @property
    def n_users(self) -> int:
        return len(self.membership)

    def users_of(self, k: int) -> list:
        return [i for i, g in enumerate(self.membership) if g == k]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.membership, dtype=int)


@dataclass(frozen=True)
class PrecoderSet:
    """One beamforming vector per group, stacked as rows of a ``(G, N_t)`` array."""

    vectors: np.ndarray

    def __post_init__(self):
        w = _frozen(self.vectors, complex)
        if w.ndim != 2:
            raise ValidationError(f"precoders must be a (G, n_antennas) array, got shape {w.shape}")
        object.__setattr__(self, "vectors", w)

    @property
    def n_groups(self) -> int:
        return self.vectors.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.vectors.shape[1]

    def total_power(self) -> float:
        return float(np.sum(np.abs(self.vectors) ** 2))


@dataclass(frozen=True)
class CovarianceSet:
    """Relaxed precoder covariances ``X_k``, stacked as a ``(G, N_t, N_t)`` array.

    Inputs are symmetrized as ``(X + X^H)/2`` after the Hermitian check, so
    small solver asymmetries never leak into downstream computations.
    """

    matrices: np.ndarray
    herm_tol: float = HERM_TOL
    psd_tol: float = PSD_TOL

    def __post_init__(self):
        x = np.array(self.matrices, dtype=complex, copy=True)
        if x.ndim != 3 or x.shape[1] != x.shape[2]:
            raise ValidationError(f"covariances must be a (G, N, N) array, got shape {x.shape}")
        for k, xk in enumerate(x):
            scale = max(1.0, abs(np.trace(xk).real))
            asym = np.max(np.abs(xk - xk.conj().T)) if xk.size else 0.0
            if asym > self.herm_tol * scale:
                raise ValidationError(f"X_{k} is not Hermitian (max asymmetry {asym:.3g})")
            xk = 0.5 * (xk + xk.conj().T)
            lam_min = np.linalg.eigvalsh(xk)[0]
            if lam_min < -self.psd_tol * scale:
                raise ValidationError(f"X_{k} is not PSD (min eigenvalue {lam_min:.3g})")
            x[k] = xk
        x.setflags(write=False)
        object.__setattr__(self, "matrices", x)

    @classmethod
    def from_precoders(cls, precoders: PrecoderSet) -> "CovarianceSet":
        w = precoders.vectors
        return cls(np.einsum("ka,kb->kab", w, w.conj()))

    @property
    def n_groups(self) -> int:
        return self.matrices.shape[0]

    @property
    def n_antennas(self) -> int:
        return self.matrices.shape[1]


class BudgetKind(enum.Enum):
    PER_ANTENNA = "per_antenna"
    SUM_POWER = "sum_power"


@dataclass(frozen=True)
class PowerBudget:
    """Either ``N_t`` per-antenna limits ``P_n`` or a single sum-power limit."""

    kind: BudgetKind
    per_antenna: Optional[np.ndarray] = None
    total: Optional[float] = None

    def __post_init__(self):
        if self.kind is BudgetKind.PER_ANTENNA:
            if self.per_antenna is None or self.total is not None:
                raise ValidationError("per-antenna budget needs per_antenna values and no total")
            p = _frozen(self.per_antenna, float)
            if p.ndim != 1 or p.size == 0 or np.any(~np.isfinite(p)) or np.any(p <= 0):
                raise ValidationError("per-antenna limits must be a nonempty vector of positive reals")
            object.__setattr__(self, "per_antenna", p)
        elif self.kind is BudgetKind.SUM_POWER:
            if self.total is None or self.per_antenna is not None:
                raise ValidationError("sum-power budget needs total and no per_antenna values")
            total = float(self.total)
            if not np.isfinite(total) or total <= 0:
                raise ValidationError("total power must be a positive real")
            object.__setattr__(self, "total", total)
        else:
            raise ValidationError(f"unknown budget kind {self.kind!r}")

    @classmethod
    def per_antenna_limits(cls, limits: Sequence[float]) -> "PowerBudget":
        return cls(BudgetKind.PER_ANTENNA, per_antenna=np.asarray(limits, dtype=float))

    @classmethod
    def sum_power(cls, total: float) -> "PowerBudget":
        return cls(BudgetKind.SUM_POWER, total=total)

    @property
    def is_per_antenna(self) -> bool:
        return self.kind is BudgetKind.PER_ANTENNA

    def total_power(self) -> float:
        if self.is_per_antenna:
            return float(np.sum(self.per_antenna))
        return float(self.total)

    def scaled(self, factor: float) -> "PowerBudget":
        if self.is_per_antenna:
            return PowerBudget.per_antenna_limits(self.per_antenna * factor)
        return PowerBudget.sum_power(self.total * factor)

    def check_antennas(self, n_antennas: int) -> None:
        if self.is_per_antenna and self.per_antenna.size != n_antennas:
            raise ValidationError(
                f"budget has {self.per_antenna.size} per-antenna limits but the array has {n_antennas} antennas"
            )

    def utilization(self, antenna_powers: np.ndarray) -> np.ndarray:
        """Fraction of each budget in use: ``P_n' / P_n`` or ``sum(P') / P_tot``."""
        antenna_powers = np.asarray(antenna_powers, dtype=float)
        if self.is_per_antenna:
            return antenna_powers / self.per_antenna
        return np.array([antenna_powers.sum() / self.total])


@dataclass(frozen=True)
class SinrReport:
    per_user: np.ndarray
    min_value: float = field(init=False)
    argmin_user: int = field(init=False)

    def __post_init__(self):
        v = _frozen(self.per_user, float)
        object.__setattr__(self, "per_user", v)
        # np.argmin returns the lowest index on ties
        object.__setattr__(self, "argmin_user", int(np.argmin(v)))
        object.__setattr__(self, "min_value", float(v[self.argmin_user]))


def check_dimensions(channels: ChannelSet, groups: GroupPartition, n_antennas: Optional[int] = None,
                     n_groups: Optional[int] = None) -> None:
    if groups.n_users != channels.n_users:
        raise ValidationError(f"partition covers {groups.n_users} users but there are {channels.n_users} channels")
    if n_antennas is not None and n_antennas != channels.n_antennas:
        raise ValidationError(f"expected {channels.n_antennas} antennas, got {n_antennas}")
    if n_groups is not None and n_groups != groups.n_groups:
        raise ValidationError(f"expected {groups.n_groups} groups, got {n_groups}")


def received_gains(vectors: np.ndarray, channels: ChannelSet) -> np.ndarray:
    """``|w_k^H h_i|^2`` as an ``(N_u, G)`` array."""
    return np.abs(channels.channels @ np.asarray(vectors).conj().T) ** 2


def sinr_from_gains(gains: np.ndarray, powers: np.ndarray, noise_vars: np.ndarray,
                    membership: np.ndarray) -> np.ndarray:
    """Per-user SINR for received gain matrix ``gains`` scaled by group ``powers``."""
    rx = gains * np.asarray(powers)[None, :]
    users = np.arange(gains.shape[0])
    signal = rx[users, membership]
    interference = rx.sum(axis=1) - signal
    return signal / (interference + noise_vars)


def compute_sinr(precoders: PrecoderSet, channels: ChannelSet, groups: GroupPartition) -> SinrReport:
    """SINR of every user under the given precoders.

    User ``i`` in group ``k`` sees ``|w_k^H h_i|^2 / (sum_{l != k} |w_l^H h_i|^2 + sigma_i^2)``.
    """
    check_dimensions(channels, groups, precoders.n_antennas, precoders.n_groups)
    gains = received_gains(precoders.vectors, channels)
    sinr = sinr_from_gains(gains, np.ones(precoders.n_groups), channels.noise_vars, groups.as_array())
    return SinrReport(sinr)


def per_antenna_power(precoders: PrecoderSet) -> np.ndarray:
    """Power radiated by each antenna, ``sum_k |w_k[n]|^2``."""
    return np.sum(np.abs(precoders.vectors) ** 2, axis=0)


def per_antenna_power_relaxed(covs: CovarianceSet) -> np.ndarray:
    """Diagonal of ``sum_k X_k``."""
    return np.real(np.einsum("knn->n", covs.matrices))


def extract_rank1(covs: CovarianceSet, rank_tol: float = DEFAULT_RANK_TOL):
    """Principal rank-one factor of every covariance.

    Returns
    -------
    precoders : PrecoderSet
        ``sqrt(lambda_max) * u_max`` per group, with the phase of ``u_max`` fixed
        so that its first nonzero entry is real and nonnegative.
    is_rank1 : np.ndarray of bool
        ``lambda_2 / lambda_1 <= rank_tol`` per group. Zero matrices count as rank one.
    """
    G, N = covs.n_groups, covs.n_antennas
    vectors = np.zeros((G, N), dtype=complex)
    is_rank1 = np.ones(G, dtype=bool)
    for k, xk in enumerate(covs.matrices):
        lam, vecs = np.linalg.eigh(xk)
        lam_max = lam[-1]
        if lam_max <= 0:
            continue
        if N > 1:
            # eigh sorts ascending; on an exact tie the lower-index vector of the pair is kept
            top = N - 1
            if lam[-2] == lam_max:
                top = int(np.flatnonzero(lam == lam_max)[0])
            is_rank1[k] = max(lam[-2], 0.0) / lam_max <= rank_tol
        else:
            top = 0
        u = vecs[:, top]
        nz = np.flatnonzero(np.abs(u) > 1e-12 * np.max(np.abs(u)))
        u = u * np.exp(-1j * np.angle(u[nz[0]]))
        vectors[k] = np.sqrt(lam_max) * u
    return PrecoderSet(vectors), is_rank1
