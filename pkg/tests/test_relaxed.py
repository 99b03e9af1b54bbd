import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from maxmin_multicast import (BisectionConfig, ChannelSet, CovarianceSet, GroupPartition, PrecoderSet, PowerBudget, SolverFailure,
                              compute_sinr, extract_rank1, sinr_upper_bound, solve_max_min_fair,
                              solve_max_min_fair_spc, verify_claim1)
from maxmin_multicast.conic import ConicSolveStatus, SdpSolution, SolveStatus
from maxmin_multicast.oracle import brute_force_max_min
from maxmin_multicast.relaxed import reduce_rank, solve_relaxed
from conftest import random_instance

EPS = BisectionConfig().epsilon
ONE = (ChannelSet([[1.0]], [1.0]), GroupPartition(1, (0,)))


class TestUpperBound:
    def test_examples(self):
        assert sinr_upper_bound(ONE[0], PowerBudget.per_antenna_limits([4])) == 4.0
        assert sinr_upper_bound(ChannelSet([[1, 0], [2, 0]], [1, 1]), PowerBudget.per_antenna_limits([1, 1])) == 8.0

    def test_all_zero_channels_rejected(self):
        with pytest.raises(ValueError):
            ChannelSet([[0, 0], [0, 0]], [1, 1])


class TestMaxMinFair:
    def test_scalar(self):
        assert solve_max_min_fair(*ONE, PowerBudget.per_antenna_limits([4])).t_star == pytest.approx(4, abs=EPS)

    def test_orthogonal_unicast(self, ortho):
        assert solve_max_min_fair(*ortho).t_star == pytest.approx(1, abs=EPS)

    def test_real_two_user_multicast_against_oracle(self):
        ch = ChannelSet([[1.0, 0.3], [-0.4, 0.9]], [1, 1])
        g = GroupPartition(1, (0, 0))
        b = PowerBudget.per_antenna_limits([1.0, 1.0])
        rel = solve_max_min_fair(ch, g, b)
        assert rel.t_star == pytest.approx(brute_force_max_min(ch, g, b).t_hat, rel=0.05)

    def test_sum_power_examples(self):
        g = GroupPartition(1, (0,))
        assert solve_max_min_fair_spc(ChannelSet([[1, 1]], [1]), g, 2.0).t_star == pytest.approx(4, abs=EPS)
        single = ChannelSet([[1, 0]], [1])
        assert solve_max_min_fair_spc(single, g, 2.0).t_star == pytest.approx(2, abs=EPS)
        assert solve_max_min_fair(single, g, PowerBudget.per_antenna_limits([1, 1])).t_star == pytest.approx(1, abs=EPS)

    def test_sum_budget_rejected_by_per_antenna_entry_point(self):
        with pytest.raises(ValueError):
            solve_max_min_fair(*ONE, PowerBudget.sum_power(1.0))

    @pytest.mark.parametrize("seed", range(8))
    def test_equal_split_below_sum_power(self, seed):
        ch, g, b = random_instance(seed, n_antennas=4)
        pac = solve_max_min_fair(ch, g, b).t_star
        spc = solve_max_min_fair_spc(ch, g, b.total_power()).t_star
        assert pac <= spc + EPS

    def test_zero_channel_user_reported(self):
        ch = ChannelSet([[1, 0], [0, 0]], [1, 1])
        sol = solve_max_min_fair(ch, GroupPartition(1, (0, 0)), PowerBudget.per_antenna_limits([1, 1]))
        assert sol.t_star == 0.0 and sol.degenerate_users == (1,) and sol.iterations == 0

    def test_backend_failure_aborts_with_trace(self, ortho):
        class Flaky:
            calls = 0

            def solve(self, problem, tols):
                Flaky.calls += 1
                if Flaky.calls < 3:
                    from maxmin_multicast.conic import DEFAULT_SDP_BACKEND
                    return DEFAULT_SDP_BACKEND.solve(problem, tols)
                return SdpSolution(ConicSolveStatus(SolveStatus.NUMERICAL_FAILURE), math.nan, None)

        with pytest.raises(SolverFailure) as info:
            solve_max_min_fair(*ortho, backend=Flaky())
        assert len(info.value.trace) == 3
        assert info.value.trace[-1].status is SolveStatus.NUMERICAL_FAILURE


class TestInvariants:
    @pytest.mark.parametrize("seed", range(10))
    def test_iterations_bound_and_feasibility(self, seed):
        ch, g, b = random_instance(seed, n_antennas=4, snr_db=5.0 * (seed % 4))
        bis = BisectionConfig()
        sol = solve_relaxed(ch, g, b, bis)
        upper = sinr_upper_bound(ch, b)
        assert sol.iterations <= bis.iteration_bound(0.0, upper)
        assert sol.t_star <= upper
        assert np.all(sol.antenna_utilization <= 1 + 1e-7)
        for i, k in enumerate(g.membership):
            tr = [np.trace(ch.gram(i) @ x).real for x in sol.covs.matrices]
            assert tr[k] - sol.t_star * (sum(tr) - tr[k]) >= sol.t_star * ch.noise_vars[i] * (1 - 1e-6)

    @given(st.integers(0, 10_000), st.floats(1.0, 3.0))
    def test_monotone_in_budget(self, seed, factor):
        ch, g, b = random_instance(seed, n_antennas=3, n_users=3, n_groups=3)
        rng = np.random.default_rng(seed)
        bigger = PowerBudget.per_antenna_limits(b.per_antenna * rng.uniform(1.0, factor, 3))
        assert solve_max_min_fair(ch, g, bigger).t_star >= solve_max_min_fair(ch, g, b).t_star - EPS

    @pytest.mark.parametrize("seed", range(10))
    def test_unicast_rank_one_is_tight(self, seed):
        ch, g, b = random_instance(seed, n_antennas=5, n_users=4, n_groups=4)
        sol = solve_max_min_fair(ch, g, b)
        precoders, _ = extract_rank1(sol.covs)
        assert compute_sinr(precoders, ch, g).min_value >= (1 - 1e-3) * sol.t_star


class TestRoundTrip:
    def test_scalar(self):
        res = verify_claim1(*ONE, PowerBudget.per_antenna_limits([4]), 1.0)
        assert res.lhs_residual <= 2 * EPS and res.rhs_residual <= 2 * EPS

    @pytest.mark.parametrize("seed", range(3))
    def test_seeded_instances(self, seed):
        ch, g, b = random_instance(seed, n_antennas=3)
        res = verify_claim1(ch, g, b, 1.0)
        assert res.lhs_residual <= 1e-2 and res.rhs_residual <= 1e-2

    def test_probe_near_upper_bound(self):
        ch, g, b = random_instance(11, n_antennas=3)
        probe = 0.9 * sinr_upper_bound(ch, b)
        res = verify_claim1(ch, g, b, probe)
        assert res.rhs_residual <= 1e-2

    def test_coarse_bisection_fails(self):
        ch, g, b = random_instance(0, n_antennas=3)
        res = verify_claim1(ch, g, b, 1.0, bis=BisectionConfig(epsilon=10.0))
        assert max(res) > 1e-2

    def test_positive_probe_required(self):
        with pytest.raises(ValueError):
            verify_claim1(*ONE, PowerBudget.per_antenna_limits([4]), 0.0)


class TestBisectionConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            BisectionConfig(epsilon=0)
        with pytest.raises(ValueError):
            BisectionConfig(lower_init=2.0, upper_init=1.0)

    def test_iteration_bound(self):
        assert BisectionConfig(epsilon=1.0).iteration_bound(0.0, 8.0) == 3
        assert BisectionConfig(epsilon=1.0).iteration_bound(0.0, 9.0) == 4
        assert BisectionConfig(epsilon=1.0).iteration_bound(0.0, 0.5) == 0


def _constraint_values(covs, channels, groups, t):
    """Linearized SINR rows at target ``t`` followed by per-antenna loads."""
    h = channels.channels
    gains = np.einsum("in,knm,im->ik", h.conj(), covs.matrices, h).real
    own = gains[np.arange(channels.n_users), list(groups.membership)]
    rows = own - t * (gains.sum(axis=1) - own)
    loads = np.einsum("knn->n", covs.matrices).real
    return np.concatenate([rows, loads])


class TestRankReduction:
    REAL = (ChannelSet([[0.8, -0.3], [0.2, 1.1]], [1, 1]), GroupPartition(1, (0, 0)),
            PowerBudget.per_antenna_limits([1.0, 1.0]))

    def test_real_multicast_solver_point_has_rank_two(self):
        sol = solve_relaxed(*self.REAL, rank_reduction=False)
        assert sol.per_group_rank1 == (False,)

    def test_real_multicast_reduced_to_rank_one(self):
        plain = solve_relaxed(*self.REAL, rank_reduction=False)
        reduced = solve_relaxed(*self.REAL)
        assert reduced.t_star == plain.t_star
        assert reduced.per_group_rank1 == (True,)
        np.testing.assert_allclose(reduced.antenna_utilization, plain.antenna_utilization, rtol=1e-9)

    @given(st.integers(0, 10_000), st.sampled_from([(1, 3), (2, 3), (2, 4)]))
    def test_constraint_values_preserved(self, seed, shape):
        g, n_u = shape
        channels, groups, budget = random_instance(seed, n_antennas=3, n_users=n_u, n_groups=g, real=True)
        plain = solve_relaxed(channels, groups, budget, rank_reduction=False)
        reduced = reduce_rank(plain.covs, channels, groups, budget, plain.t_star)
        before = _constraint_values(plain.covs, channels, groups, plain.t_star)
        after = _constraint_values(reduced, channels, groups, plain.t_star)
        np.testing.assert_allclose(after, before, atol=1e-8 * np.abs(before).max())
        for x_old, x_new in zip(plain.covs.matrices, reduced.matrices):
            assert np.linalg.eigvalsh(x_new)[0] >= -1e-9 * np.trace(x_old).real
            assert np.linalg.matrix_rank(x_new, tol=1e-7 * np.trace(x_old).real) <= \
                np.linalg.matrix_rank(x_old, tol=1e-12 * np.trace(x_old).real)

    def test_rank_one_input_unchanged(self, ortho):
        w = np.array([[1.0, 0.5j], [0.2, -1.0]])
        covs = CovarianceSet.from_precoders(PrecoderSet(w))
        out = reduce_rank(covs, *ortho, 0.5)
        np.testing.assert_array_equal(out.matrices, covs.matrices)
