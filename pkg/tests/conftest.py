import numpy as np
import pytest
from hypothesis import settings

from maxmin_multicast import ChannelSet, GroupPartition, PowerBudget

settings.register_profile("repo", deadline=None, max_examples=30, derandomize=True, print_blob=True)
settings.load_profile("repo")


def complex_normal(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_instance(seed, n_antennas=3, n_users=4, n_groups=2, snr_db=10.0, real=False):
    """Seeded Rayleigh instance with contiguous groups and an equal per-antenna split."""
    rng = np.random.default_rng(seed)
    h = rng.standard_normal((n_users, n_antennas)) if real else complex_normal(rng, n_users, n_antennas)
    membership = tuple(i * n_groups // n_users for i in range(n_users))
    total = 10.0 ** (snr_db / 10.0)
    return (ChannelSet(h, np.ones(n_users)), GroupPartition(n_groups, membership),
            PowerBudget.per_antenna_limits(np.full(n_antennas, total / n_antennas)))


@pytest.fixture
def ortho():
    return (ChannelSet([[1, 0], [0, 1]], [1, 1]), GroupPartition(2, (0, 1)),
            PowerBudget.per_antenna_limits([1.0, 1.0]))
