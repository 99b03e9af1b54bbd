import numpy as np
import pytest
from hypothesis import given, strategies as st

from maxmin_multicast import (ChannelSet, ConicSolveStatus, GroupPartition, PowerBudget, PowerControlInfeasible,
                              SolveStatus, solve_lp_power_control, solve_sdp, solve_sdp_min_r, solve_sdp_min_r_spc)
from maxmin_multicast.conic import DEFAULT_TOLERANCES, CvxpySdpBackend
from maxmin_multicast.model import received_gains
from conftest import complex_normal, random_instance

FEAS = DEFAULT_TOLERANCES.feas_tol
ONE = (ChannelSet([[1.0]], [1.0]), GroupPartition(1, (0,)))


def lin_sinr_slack(covs, channels, groups, t):
    """``Tr(Q_i X_k) - t sum_{l != k} Tr(Q_i X_l) - t sigma_i^2`` for every user."""
    out = []
    for i, k in enumerate(groups.membership):
        q = channels.gram(i)
        tr = [np.trace(q @ x).real for x in covs.matrices]
        out.append(tr[k] - t * (sum(tr) - tr[k]) - t * channels.noise_vars[i])
    return np.array(out)


class TestSdpExamples:
    def test_scalar_full_budget(self):
        sol = solve_sdp_min_r(4.0, *ONE, PowerBudget.per_antenna_limits([4.0]))
        assert sol.status.ok
        assert sol.r_star == pytest.approx(1.0, rel=1e-6)
        assert sol.covs.matrices[0, 0, 0].real == pytest.approx(4.0, rel=1e-6)

    def test_scalar_quarter_budget(self):
        sol = solve_sdp_min_r(1.0, *ONE, PowerBudget.per_antenna_limits([4.0]))
        assert sol.r_star == pytest.approx(0.25, rel=1e-6)

    def test_orthogonal_unicast(self, ortho):
        sol = solve_sdp_min_r(1.0, *ortho)
        assert sol.r_star == pytest.approx(1.0, rel=1e-6)
        np.testing.assert_allclose(sol.covs.matrices[0], [[1, 0], [0, 0]], atol=1e-6)
        np.testing.assert_allclose(sol.covs.matrices[1], [[0, 0], [0, 1]], atol=1e-6)

    def test_sum_power_matched_filter(self):
        sol = solve_sdp_min_r_spc(4.0, ChannelSet([[1, 1]], [1]), GroupPartition(1, (0,)), 2.0)
        assert sol.r_star == pytest.approx(1.0, rel=1e-6)

    def test_single_antenna_budget_kinds_agree(self):
        a = solve_sdp_min_r(3.0, *ONE, PowerBudget.per_antenna_limits([5.0]))
        b = solve_sdp_min_r_spc(3.0, *ONE, 5.0)
        assert a.r_star == pytest.approx(b.r_star, rel=1e-6)

    @pytest.mark.parametrize("seed", range(5))
    def test_sum_power_relaxes_equal_split(self, seed):
        ch, g, pac = random_instance(seed, n_antennas=4, n_users=3, n_groups=3)
        spc = solve_sdp_min_r_spc(2.0, ch, g, pac.total_power())
        per = solve_sdp_min_r(2.0, ch, g, pac)
        assert spc.r_star <= per.r_star * (1 + 1e-6)

    def test_budget_kind_checked(self):
        with pytest.raises(ValueError):
            solve_sdp_min_r(1.0, *ONE, PowerBudget.sum_power(1.0))

    def test_interference_limited_target_is_infeasible(self):
        # two users on one antenna in different groups: SINR >= 1 for both is impossible
        ch = ChannelSet([[1.0], [1.0]], [1.0, 1.0])
        sol = solve_sdp(1.5, ch, GroupPartition(2, (0, 1)), PowerBudget.per_antenna_limits([1.0]))
        assert sol.status.status is SolveStatus.INFEASIBLE and sol.r_star == np.inf

    def test_zero_target(self, ortho):
        sol = solve_sdp(0.0, *ortho)
        assert sol.status.ok and sol.r_star == 0.0


class TestStalledSolve:
    def test_midpoint_that_stalls_without_refinement(self):
        from maxmin_multicast.channels import ScenarioSpec, balanced_partition, budget_from_snr, generate_channels
        spec = ScenarioSpec(5, 4, 2, 20.0, seed=0, n_trials=100)
        channels, groups, budget = generate_channels(spec, 69), balanced_partition(spec), budget_from_snr(spec)
        t = 71.84452786779752
        sol = solve_sdp(t, channels, groups, budget)
        neighbour = solve_sdp(np.nextafter(t, 0.0), channels, groups, budget)
        assert sol.status.status is SolveStatus.OPTIMAL
        assert sol.r_star == pytest.approx(neighbour.r_star, rel=1e-8)

    def test_reachable_target_not_rejected_when_solver_stops_early(self):
        # At this target the interior-point run ends "almost solved" with a relative
        # gap near 1e-5; the primal value alone gives r* = 1.0000069 although
        # rank-one precoders with every antenna within budget reach a higher SINR.
        from maxmin_multicast.channels import ScenarioSpec, balanced_partition, budget_from_snr, generate_channels
        spec = ScenarioSpec(5, 4, 2, 20.0, seed=0, n_trials=100)
        channels, groups, budget = generate_channels(spec, 21), balanced_partition(spec), budget_from_snr(spec)
        sol = solve_sdp(79.44275905252591, channels, groups, budget)
        assert sol.r_star <= 1.0 + FEAS


class TestSdpProperties:
    @pytest.mark.parametrize("seed", range(6))
    def test_solution_is_feasible(self, seed):
        ch, g, b = random_instance(seed)
        t = 1.5
        sol = solve_sdp(t, ch, g, b)
        assert sol.status.ok
        slack = lin_sinr_slack(sol.covs, ch, g, t)
        assert np.all(slack >= -1e-6 * t)
        util = np.diag(np.sum(sol.covs.matrices, axis=0)).real / b.per_antenna
        assert np.max(util) <= sol.r_star * (1 + 1e-6)
        for x in sol.covs.matrices:
            assert np.linalg.eigvalsh(x)[0] >= -1e-8 * max(1.0, np.trace(x).real)

    @given(st.integers(0, 10_000), st.floats(0.05, 3.0), st.floats(0.05, 3.0))
    def test_monotone_in_target(self, seed, t1, t2):
        ch, g, b = random_instance(seed)
        lo, hi = sorted((t1, t2))
        r_lo, r_hi = solve_sdp(lo, ch, g, b).r_star, solve_sdp(hi, ch, g, b).r_star
        assert r_lo <= r_hi + FEAS * max(1.0, r_hi)

    @pytest.mark.parametrize("seed", range(5))
    def test_budget_scaling(self, seed):
        ch, g, b = random_instance(seed)
        r1 = solve_sdp(2.0, ch, g, b).r_star
        r2 = solve_sdp(2.0, ch, g, b.scaled(2.0)).r_star
        assert r2 == pytest.approx(r1 / 2, rel=1e-6)

    @pytest.mark.parametrize("seed", range(3))
    @pytest.mark.parametrize("kind", ["pac", "spc"])
    def test_matches_independent_backend(self, seed, kind):
        pytest.importorskip("cvxpy")
        ch, g, b = random_instance(seed)
        if kind == "spc":
            b = PowerBudget.sum_power(b.total_power())
        ours = solve_sdp(1.0, ch, g, b)
        ref = solve_sdp(1.0, ch, g, b, backend=CvxpySdpBackend("CVXOPT"))
        assert ref.status.ok
        assert ours.r_star == pytest.approx(ref.r_star, rel=1e-5)


class TestStatus:
    def test_objective_iff_optimal(self):
        with pytest.raises(ValueError):
            ConicSolveStatus(SolveStatus.OPTIMAL)
        with pytest.raises(ValueError):
            ConicSolveStatus(SolveStatus.INFEASIBLE, 1.0)
        assert ConicSolveStatus(SolveStatus.OPTIMAL, 0.5).ok


def grid_lp_oracle(t, gains, noise, rows, limits, membership, n=20001):
    """``min_p max_n util`` over power ratios, each scaled to the least power meeting every SINR row."""
    best = np.inf
    users = np.arange(len(noise))
    for a in np.linspace(0.0, np.pi / 2, n):
        p = np.array([np.cos(a), np.sin(a)])
        rx = gains * p[None, :]
        signal = rx[users, membership]
        margin = signal - t * (rx.sum(axis=1) - signal)
        if np.any(margin <= 0):
            continue
        c = np.max(t * noise / margin)
        best = min(best, c * np.max(rows @ p / limits))
    return best


class TestPowerControlLp:
    def test_scalar(self):
        sol = solve_lp_power_control(2.0, [[1.0]], [1.0], [[1.0]], PowerBudget.per_antenna_limits([4.0]), [0])
        assert sol.powers[0] == pytest.approx(2.0, rel=1e-7)
        assert sol.r_star == pytest.approx(0.5, rel=1e-7)

    def test_decoupled_groups(self):
        sol = solve_lp_power_control(1.0, np.eye(2), [1, 1], np.eye(2), PowerBudget.per_antenna_limits([1, 1]),
                                     [0, 1])
        np.testing.assert_allclose(sol.powers, [1, 1], rtol=1e-7)
        assert sol.r_star == pytest.approx(1.0, rel=1e-7)

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_grid_oracle(self, seed):
        rng = np.random.default_rng(100 + seed)
        h = complex_normal(rng, 4, 5)
        w = complex_normal(rng, 2, 5)
        w /= np.linalg.norm(w, axis=1, keepdims=True)
        gains = received_gains(w, ChannelSet(h, np.ones(4)))
        rows = (np.abs(w) ** 2).T
        limits = np.full(5, 2.0)
        membership = np.array([0, 0, 1, 1])
        t = 0.3
        sol = solve_lp_power_control(t, gains, np.ones(4), rows, PowerBudget.per_antenna_limits(limits), membership)
        ref = grid_lp_oracle(t, gains, np.ones(4), rows, limits, membership)
        if np.isfinite(ref):
            assert sol.r_star == pytest.approx(ref, rel=1e-2)
            assert sol.r_star <= ref * (1 + 1e-6)
        else:
            assert sol.status.status is SolveStatus.INFEASIBLE

    def test_null_direction_prescan(self):
        with pytest.raises(PowerControlInfeasible) as info:
            solve_lp_power_control(1.0, [[1.0, 0.2], [0.0, 1.0]], [1, 1], np.eye(2),
                                   PowerBudget.per_antenna_limits([1, 1]), [0, 0])
        assert info.value.users == (1,)

    def test_sum_power_rows_collapse(self):
        sol = solve_lp_power_control(1.0, np.eye(2), [1, 1], np.eye(2), PowerBudget.sum_power(4.0), [0, 1])
        assert sol.r_star == pytest.approx(0.5, rel=1e-7)

    @given(st.integers(0, 10_000), st.floats(0.01, 2.0), st.floats(0.01, 2.0))
    def test_properties(self, seed, t1, t2):
        rng = np.random.default_rng(seed)
        gains = rng.uniform(0.05, 2.0, (3, 2))
        rows = rng.uniform(0.0, 1.0, (4, 2))
        rows[0] += 0.1
        membership = np.array([0, 1, 1])
        budget = PowerBudget.per_antenna_limits(rng.uniform(0.5, 2.0, 4))
        lo, hi = sorted((t1, t2))
        a = solve_lp_power_control(lo, gains, np.ones(3), rows, budget, membership)
        b = solve_lp_power_control(hi, gains, np.ones(3), rows, budget, membership)
        assert a.r_star <= b.r_star + FEAS * max(1.0, abs(b.r_star)) or not np.isfinite(b.r_star)
        for t, sol in ((lo, a), (hi, b)):
            if not sol.status.ok:
                continue
            assert np.all(sol.powers >= 0)
            rx = gains * sol.powers
            signal = rx[np.arange(3), membership]
            slack = signal - t * (rx.sum(axis=1) - signal + 1.0)
            assert np.all(slack >= -FEAS * max(1.0, np.max(signal)))
