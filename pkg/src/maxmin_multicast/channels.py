"""Seeded Rayleigh-fading scenarios for Monte Carlo runs.

Trial ``j`` of a scenario with seed ``s`` draws its channel entries from
``PCG64(SeedSequence(s, spawn_key=(0, j)))``: ``N_u * N_t`` complex entries
in row-major order, real and imaginary parts interleaved, each part with
variance 1/2.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .model import ChannelSet, GroupPartition, PowerBudget, ValidationError

CHANNEL_STREAM = 0
RANDOMIZATION_STREAM = 1


class ScenarioBudget(enum.Enum):
    PER_ANTENNA_EQUAL_SPLIT = "pac"
    SUM_POWER = "spc"


@dataclass(frozen=True)
class ScenarioSpec:
    n_antennas: int = 5
    n_users: int = 4
    n_groups: int = 2
    snr_db: float = 10.0
    budget_kind: ScenarioBudget = ScenarioBudget.PER_ANTENNA_EQUAL_SPLIT
    seed: int = 0
    n_trials: int = 100

    def __post_init__(self):
        if min(self.n_antennas, self.n_users, self.n_groups, self.n_trials) < 1:
            raise ValidationError("antenna, user, group and trial counts must be positive")
        if self.n_groups > self.n_users:
            raise ValidationError("cannot have more groups than users")
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError("seed must be an unsigned 64-bit integer")

    @property
    def rho(self) -> float:
        return self.n_users / self.n_groups


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def generate_channels(spec: ScenarioSpec, trial: int) -> ChannelSet:
    """i.i.d. ``CN(0, 1)`` channels and unit noise for one trial."""
    if not 0 <= trial < spec.n_trials:
        raise ValidationError(f"trial {trial} outside [0, {spec.n_trials})")
    raw = _stream(spec.seed, CHANNEL_STREAM, trial).standard_normal((spec.n_users, spec.n_antennas, 2))
    h = (raw[..., 0] + 1j * raw[..., 1]) / np.sqrt(2.0)
    return ChannelSet(h, np.ones(spec.n_users))


def randomization_seed(spec: ScenarioSpec, trial: int) -> int:
    """Seed for the Gaussian randomization of one trial, shared by both budget kinds."""
    state = np.random.SeedSequence(spec.seed, spawn_key=(RANDOMIZATION_STREAM, trial)).generate_state(1, np.uint64)
    return int(state[0])


def balanced_partition(spec: ScenarioSpec) -> GroupPartition:
    """Contiguous equal-size blocks: users ``0..N_u/G-1`` in group 0, and so on."""
    if spec.n_users % spec.n_groups:
        raise ValidationError(
            f"{spec.n_users} users do not split evenly into {spec.n_groups} groups; "
            "pass an explicit partition in an instance file instead"
        )
    size = spec.n_users // spec.n_groups
    return GroupPartition(spec.n_groups, tuple(i // size for i in range(spec.n_users)))


def budget_from_snr(spec: ScenarioSpec) -> PowerBudget:
    """``P_tot = 10^(snr_db/10)`` over unit noise, split equally across antennas for PAC."""
    total = 10.0 ** (spec.snr_db / 10.0)
    if spec.budget_kind is ScenarioBudget.PER_ANTENNA_EQUAL_SPLIT:
        return PowerBudget.per_antenna_limits(np.full(spec.n_antennas, total / spec.n_antennas))
    return PowerBudget.sum_power(total)
