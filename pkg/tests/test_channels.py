import numpy as np
import pytest

from maxmin_multicast import ScenarioBudget, ScenarioSpec, ValidationError, balanced_partition, budget_from_snr
from maxmin_multicast import generate_channels, randomization_seed

# first channel entry for seed 0, trial 0; frozen so a change of generator or layout is caught
GOLDEN_RE, GOLDEN_IM = 0.555720004835074, -0.6505049735768947


def pooled(seed, trials=100):
    spec = ScenarioSpec(10, 100, 1, seed=seed, n_trials=trials)
    return np.concatenate([generate_channels(spec, j).channels.ravel() for j in range(trials)])


class TestChannels:
    def test_moments(self):
        h = pooled(5)
        assert h.size >= 100_000
        for part in (h.real, h.imag):
            assert abs(part.mean()) <= 0.01
            assert 0.49 <= part.var() <= 0.51
        assert 0.98 <= np.mean(np.abs(h) ** 2) <= 1.02

    def test_deterministic_and_unit_noise(self):
        spec = ScenarioSpec(seed=3)
        a, b = generate_channels(spec, 7), generate_channels(spec, 7)
        assert np.array_equal(a.channels, b.channels)
        assert a.noise_vars.tolist() == [1.0] * 4

    def test_trials_differ(self):
        spec = ScenarioSpec(seed=3)
        assert not np.array_equal(generate_channels(spec, 0).channels, generate_channels(spec, 1).channels)
        assert randomization_seed(spec, 0) != randomization_seed(spec, 1)

    def test_documented_stream(self):
        # the first entry follows from PCG64(SeedSequence(0, spawn_key=(0, 0))) and must not drift
        spec = ScenarioSpec(2, 1, 1, seed=0, n_trials=1)
        raw = np.random.Generator(np.random.PCG64(np.random.SeedSequence(0, spawn_key=(0, 0)))).standard_normal(4)
        expected = (raw[0::2] + 1j * raw[1::2]) / np.sqrt(2)
        np.testing.assert_array_equal(generate_channels(spec, 0).channels[0], expected)
        assert generate_channels(spec, 0).channels[0, 0] == pytest.approx(complex(GOLDEN_RE, GOLDEN_IM), abs=1e-15)

    def test_trial_range(self):
        with pytest.raises(ValidationError):
            generate_channels(ScenarioSpec(n_trials=3), 3)


class TestPartitionAndBudget:
    def test_partitions(self):
        assert balanced_partition(ScenarioSpec(n_users=4, n_groups=2)).membership == (0, 0, 1, 1)
        assert balanced_partition(ScenarioSpec(n_users=3, n_groups=3)).membership == (0, 1, 2)
        with pytest.raises(ValidationError, match="explicit partition"):
            balanced_partition(ScenarioSpec(n_users=4, n_groups=3))

    def test_budgets(self):
        assert np.allclose(budget_from_snr(ScenarioSpec(snr_db=0.0)).per_antenna, 0.2)
        assert budget_from_snr(ScenarioSpec(snr_db=10.0, budget_kind=ScenarioBudget.SUM_POWER)).total == \
            pytest.approx(10.0)
        assert np.allclose(budget_from_snr(ScenarioSpec(n_antennas=2, snr_db=3.0103)).per_antenna, 1.0, atol=1e-4)

    def test_spec_validation(self):
        with pytest.raises(ValidationError):
            ScenarioSpec(n_users=2, n_groups=3)
        with pytest.raises(ValidationError):
            ScenarioSpec(seed=-1)
