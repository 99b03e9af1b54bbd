"""Built-in sanity suite: closed-form cases plus round trips on seeded instances."""
from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from .channels import ScenarioSpec, balanced_partition, budget_from_snr, generate_channels
from .conic import solve_lp_power_control
from .model import ChannelSet, GroupPartition, PowerBudget
from .oracle import brute_force_max_min
from .randomization import RandomizationConfig, assemble_candidate, sample_candidates, solve_mmpac
from .relaxed import BisectionConfig, sinr_upper_bound, solve_relaxed, verify_claim1
from .model import CovarianceSet

ROUND_TRIP_TOL = 1e-2


class CheckResult(NamedTuple):
    name: str
    passed: bool
    detail: str


class SelftestReport(NamedTuple):
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> str:
        lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.detail}" for c in self.checks]
        n_ok = sum(c.passed for c in self.checks)
        lines.append(f"{n_ok}/{len(self.checks)} checks passed")
        return "\n".join(lines)


def _pac(*limits):
    return PowerBudget.per_antenna_limits(list(limits))


def _close(name: str, got: float, want: float, tol: float) -> CheckResult:
    return CheckResult(name, abs(got - want) <= tol, f"got {got:.6f}, expected {want:g} +/- {tol:g}")


def _scalar_cases(bis: BisectionConfig) -> list:
    eps = bis.epsilon
    one = ChannelSet([[1.0]], [1.0])
    g1 = GroupPartition(1, (0,))
    ortho = ChannelSet([[1, 0], [0, 1]], [1, 1])
    g2 = GroupPartition(2, (0, 1))
    out = [
        _close("relaxed scalar", solve_relaxed(one, g1, _pac(4), bis).t_star, 4.0, eps),
        _close("relaxed orthogonal unicast", solve_relaxed(ortho, g2, _pac(1, 1), bis).t_star, 1.0, eps),
        _close("sum-power matched filter",
               solve_relaxed(ChannelSet([[1, 1]], [1]), g1, PowerBudget.sum_power(2.0), bis).t_star, 4.0, eps),
    ]
    single = ChannelSet([[1, 0]], [1])
    spc = solve_relaxed(single, g1, PowerBudget.sum_power(2.0), bis).t_star
    pac = solve_relaxed(single, g1, _pac(1, 1), bis).t_star
    out.append(CheckResult("per-antenna limit binds", abs(spc - 2) <= eps and abs(pac - 1) <= eps,
                           f"sum-power {spc:.6f}, per-antenna {pac:.6f}"))
    bounds = (sinr_upper_bound(one, _pac(4)), sinr_upper_bound(ChannelSet([[1, 0], [2, 0]], [1, 1]), _pac(1, 1)))
    out.append(CheckResult("upper bound", bounds == (4.0, 8.0), f"got {bounds[0]:g} and {bounds[1]:g}"))
    return out


def _power_control_cases(bis: BisectionConfig) -> list:
    lp = solve_lp_power_control(2.0, np.array([[1.0]]), np.array([1.0]), np.array([[1.0]]), _pac(4),
                                np.array([0]))
    out = [CheckResult("power LP scalar", abs(lp.powers[0] - 2) < 1e-6 and abs(lp.r_star - 0.5) < 1e-6,
                       f"p={lp.powers[0]:.6f}, r={lp.r_star:.6f}")]
    w = np.array([[0.6, 0.8j]])
    h = ChannelSet([[1.0, 0.5]], [1.0])
    budget = _pac(1.0, 2.0)
    p_limit = min(1.0 / 0.36, 2.0 / 0.64)
    closed = p_limit * abs(np.vdot(w[0], h.channels[0])) ** 2
    mm = solve_mmpac(w, h, GroupPartition(1, (0,)), budget, bis)
    out.append(CheckResult("power control closed form", abs(mm.t_star - closed) <= 1e-6 * closed,
                           f"got {mm.t_star:.6f}, expected {closed:.6f}"))
    vec = assemble_candidate(np.array([[1.0, 0.0]]), [4.0]).vectors[0]
    out.append(CheckResult("candidate assembly", np.allclose(vec, [2, 0]), f"w = {np.round(vec.real, 6).tolist()}"))
    return out


def _plumbing_cases() -> list:
    spec = ScenarioSpec(5, 4, 2, 0.0)
    part = balanced_partition(spec).membership
    limits = budget_from_snr(spec).per_antenna
    covs = CovarianceSet(np.array([np.eye(2), np.diag([1.0, 0.0])], dtype=complex))
    a = sample_candidates(covs, RandomizationConfig(n_rand=8, seed=7))
    b = sample_candidates(covs, RandomizationConfig(n_rand=8, seed=7))
    oracle = brute_force_max_min(ChannelSet([[1.0]], [1.0]), GroupPartition(1, (0,)), _pac(4)).t_hat
    return [
        CheckResult("balanced partition", part == (0, 0, 1, 1), f"membership {list(part)}"),
        CheckResult("equal split budget", bool(np.allclose(limits, 0.2)), f"limits {np.round(limits, 6).tolist()}"),
        CheckResult("sampling determinism", bool(np.array_equal(a, b)), "same seed, same candidates"),
        _close("oracle scalar", oracle, 4.0, 1e-9),
    ]


def _round_trips(bis: BisectionConfig, n_instances: int, seed: int) -> CheckResult:
    spec = ScenarioSpec(3, 4, 2, 10.0, seed=seed, n_trials=n_instances)
    groups, budget = balanced_partition(spec), budget_from_snr(spec)
    worst = 0.0
    failures = 0
    for trial in range(n_instances):
        res = verify_claim1(generate_channels(spec, trial), groups, budget, 1.0, bis=bis)
        r = max(res.lhs_residual, res.rhs_residual)
        worst = max(worst, r)
        failures += r > ROUND_TRIP_TOL
    return CheckResult(f"round trips on {n_instances} instances", failures == 0,
                       f"worst residual {worst:.2e}, {failures} above {ROUND_TRIP_TOL:g}")


def run_selftest(epsilon: float = 1e-3, n_instances: int = 20, seed: int = 0) -> SelftestReport:
    """Run every check. ``epsilon`` feeds all bisections, so a coarse value should fail."""
    bis = BisectionConfig(epsilon=epsilon)
    groups: list[Callable[[], list]] = [
        lambda: _scalar_cases(bis),
        lambda: _power_control_cases(bis),
        _plumbing_cases,
        lambda: [_round_trips(bis, n_instances, seed)],
    ]
    checks = []
    for make in groups:
        checks.extend(make())
    return SelftestReport(tuple(checks))
