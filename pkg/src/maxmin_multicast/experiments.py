"""Monte Carlo sweeps over SNR and users per group.

Every trial solves the same channel draw under both budget kinds, and every
sweep point reuses the trial's draw, so curve comparisons are paired. Trials
can run in a process pool (size capped by ``MAXMIN_THREADS``); results are
always ordered by (trial, point, budget kind), so the CSV does not depend on
scheduling.
"""
from __future__ import annotations

import csv
import enum
import io
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from .channels import (ScenarioBudget, ScenarioSpec, balanced_partition, budget_from_snr, generate_channels,
                       randomization_seed)
from .model import PowerBudget, ValidationError
from .randomization import FeasibleSolution, RandomizationConfig, solve_algorithm1
from .relaxed import BisectionConfig, RelaxedSolution, sinr_upper_bound

THREADS_ENV = "MAXMIN_THREADS"
DEFAULT_SNR_GRID = (0.0, 5.0, 10.0, 15.0, 20.0)
DEFAULT_RHO_GRID = (1.0, 2.0, 4.0)


class ConstraintKind(enum.Enum):
    PAC = "pac"
    SPC = "spc"

    @property
    def scenario_budget(self) -> ScenarioBudget:
        return ScenarioBudget.PER_ANTENNA_EQUAL_SPLIT if self is ConstraintKind.PAC else ScenarioBudget.SUM_POWER


def parse_constraint(value: str) -> tuple:
    """``"pac"``, ``"spc"`` or ``"both"`` to a tuple of kinds."""
    if value == "both":
        return (ConstraintKind.PAC, ConstraintKind.SPC)
    try:
        return (ConstraintKind(value),)
    except ValueError:
        raise ValidationError(f"constraint must be pac, spc or both, got {value!r}") from None


@dataclass(frozen=True)
class ExperimentRecord:
    """One solved trial. ``wall_time_ms`` is ``None`` unless timing was requested."""

    trial: int
    snr_db: float
    rho: float
    constraint_kind: ConstraintKind
    t_relaxed: float
    t_achieved: float
    gap_ratio: float
    wall_time_ms: Optional[float]
    iterations: int


CSV_COLUMNS = tuple(f.name for f in fields(ExperimentRecord))


@dataclass(frozen=True)
class SweepSettings:
    n_antennas: int = 5
    n_users: int = 4
    n_groups: int = 2
    snr_db: float = 10.0
    n_trials: int = 100
    seed: int = 0
    n_rand: int = 50
    epsilon: float = 1e-3
    kinds: tuple = (ConstraintKind.PAC, ConstraintKind.SPC)
    timing: bool = False
    workers: Optional[int] = None

    def as_config(self) -> dict:
        """Provenance block for reports."""
        return {
            "n_antennas": self.n_antennas, "n_users": self.n_users, "n_groups": self.n_groups,
            "snr_db": self.snr_db, "n_trials": self.n_trials, "seed": self.seed, "n_rand": self.n_rand,
            "epsilon": self.epsilon, "constraint": [k.value for k in self.kinds],
        }


def gap_ratio(t_achieved: float, t_relaxed: float) -> float:
    """``t_achieved / t_relaxed``, taken as 1 when the relaxed optimum is zero."""
    return t_achieved / t_relaxed if t_relaxed > 0 else 1.0


class TrialOutcome(NamedTuple):
    """A record together with the full solutions behind it."""

    record: ExperimentRecord
    relaxed: RelaxedSolution
    feasible: FeasibleSolution
    budget: PowerBudget
    sinr_bound: float


def solve_trial(spec: ScenarioSpec, trial: int, n_rand: int = 50, epsilon: float = 1e-3,
                timing: bool = False) -> TrialOutcome:
    """Generate trial ``trial`` of ``spec`` and run the full pipeline on it."""
    channels = generate_channels(spec, trial)
    groups = balanced_partition(spec)
    budget = budget_from_snr(spec)
    rand_cfg = RandomizationConfig(n_rand=n_rand, seed=randomization_seed(spec, trial))
    start = time.perf_counter()
    relaxed, feasible = solve_algorithm1(channels, groups, budget, BisectionConfig(epsilon=epsilon), rand_cfg)
    elapsed = (time.perf_counter() - start) * 1e3 if timing else None
    kind = ConstraintKind.PAC if spec.budget_kind is ScenarioBudget.PER_ANTENNA_EQUAL_SPLIT else ConstraintKind.SPC
    record = ExperimentRecord(trial, float(spec.snr_db), spec.rho, kind, relaxed.t_star, feasible.t_achieved,
                              gap_ratio(feasible.t_achieved, relaxed.t_star), elapsed, relaxed.iterations)
    return TrialOutcome(record, relaxed, feasible, budget, sinr_upper_bound(channels, budget))


def run_trial(spec: ScenarioSpec, trial: int, n_rand: int = 50, epsilon: float = 1e-3,
              timing: bool = False) -> ExperimentRecord:
    return solve_trial(spec, trial, n_rand, epsilon, timing).record


def _run_task(task):
    spec, trial, n_rand, epsilon, timing, detailed = task
    out = solve_trial(spec, trial, n_rand, epsilon, timing)
    return out if detailed else out.record


def worker_count(requested: Optional[int] = None) -> int:
    """Pool size: ``requested`` if given, else ``MAXMIN_THREADS``, else the CPU count."""
    if requested is None:
        env = os.environ.get(THREADS_ENV)
        if env:
            try:
                requested = int(env)
            except ValueError:
                raise ValidationError(f"{THREADS_ENV} must be an integer, got {env!r}") from None
        else:
            requested = os.cpu_count() or 1
    return max(1, requested)


def _execute(tasks: list, workers: Optional[int]) -> list:
    n = min(worker_count(workers), len(tasks))
    if n <= 1:
        return [_run_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=n) as pool:
        # map preserves submission order whatever the completion order
        return list(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * n))))


def _tasks(specs: Sequence[ScenarioSpec], settings: SweepSettings, detailed: bool) -> list:
    tasks = []
    for trial in range(settings.n_trials):
        for spec in specs:
            for kind in settings.kinds:
                s = replace(spec, budget_kind=kind.scenario_budget)
                tasks.append((s, trial, settings.n_rand, settings.epsilon, settings.timing, detailed))
    return tasks


def sweep_snr(snr_list: Iterable[float] = DEFAULT_SNR_GRID, settings: SweepSettings = SweepSettings(),
              detailed: bool = False) -> list:
    """Records for every (trial, SNR point, budget kind), in that order.

    With ``detailed=True`` the list holds :class:`TrialOutcome` values instead.
    """
    specs = [ScenarioSpec(settings.n_antennas, settings.n_users, settings.n_groups, float(snr),
                          seed=settings.seed, n_trials=settings.n_trials) for snr in snr_list]
    if not specs:
        raise ValidationError("the SNR list is empty")
    return _execute(_tasks(specs, settings, detailed), settings.workers)


def sweep_users(rho_list: Iterable[float] = DEFAULT_RHO_GRID, settings: SweepSettings = SweepSettings(),
                detailed: bool = False) -> list:
    """Records for every (trial, rho point, budget kind) with ``N_u = rho * G``."""
    specs = []
    for rho in rho_list:
        n_users = rho * settings.n_groups
        if n_users != int(n_users) or n_users < settings.n_groups:
            raise ValidationError(f"rho={rho} with {settings.n_groups} groups does not give a whole number of users")
        specs.append(ScenarioSpec(settings.n_antennas, int(n_users), settings.n_groups, settings.snr_db,
                                  seed=settings.seed, n_trials=settings.n_trials))
    if not specs:
        raise ValidationError("the rho list is empty")
    return _execute(_tasks(specs, settings, detailed), settings.workers)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, float):
        return repr(value)
    return str(value)


def records_to_csv(records: Sequence[ExperimentRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in records:
        writer.writerow([_cell(getattr(rec, name)) for name in CSV_COLUMNS])
    return buf.getvalue()


def write_csv(records: Sequence[ExperimentRecord], path) -> None:
    Path(path).write_text(records_to_csv(records))


def read_csv(path) -> list:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(ExperimentRecord(
                trial=int(row["trial"]), snr_db=float(row["snr_db"]), rho=float(row["rho"]),
                constraint_kind=ConstraintKind(row["constraint_kind"]), t_relaxed=float(row["t_relaxed"]),
                t_achieved=float(row["t_achieved"]), gap_ratio=float(row["gap_ratio"]),
                wall_time_ms=float(row["wall_time_ms"]) if row["wall_time_ms"] else None,
                iterations=int(row["iterations"])))
    return out


class PointSummary(NamedTuple):
    point: float
    kind: ConstraintKind
    n: int
    mean_t_relaxed: float
    mean_t_achieved: float
    mean_gap: float


def summarize(records: Sequence[ExperimentRecord], axis: str) -> list:
    """Per-point means, sorted by point then budget kind. ``axis`` is ``"snr_db"`` or ``"rho"``."""
    if axis not in ("snr_db", "rho"):
        raise ValueError("axis must be 'snr_db' or 'rho'")
    cells: dict = {}
    for rec in records:
        cells.setdefault((getattr(rec, axis), rec.constraint_kind), []).append(rec)
    order = {k: j for j, k in enumerate(ConstraintKind)}
    out = []
    for (point, kind) in sorted(cells, key=lambda pk: (pk[0], order[pk[1]])):
        recs = cells[(point, kind)]
        out.append(PointSummary(point, kind, len(recs),
                                float(np.mean([r.t_relaxed for r in recs])),
                                float(np.mean([r.t_achieved for r in recs])),
                                float(np.mean([r.gap_ratio for r in recs]))))
    return out


_PLOT_HEAD = '''"""Plot {title} from {csv_name}. Generated file; needs matplotlib."""
import csv
import math
from collections import defaultdict
from pathlib import Path

import matplotlib.pyplot as plt

HERE = Path(__file__).resolve().parent
rows = list(csv.DictReader(open(HERE / "{csv_name}", newline="")))
cells = defaultdict(list)
for r in rows:
    cells[(float(r["{axis}"]), r["constraint_kind"])].append(r)


def mean(key, kind):
    pts = sorted(p for p, k in cells if k == kind)
    return pts, [sum(float(r[key]) for r in cells[(p, kind)]) / len(cells[(p, kind)]) for p in pts]


def db(values):
    return [10 * math.log10(v) if v > 0 else float("nan") for v in values]

'''

_PLOT_SNR = '''fig, ax = plt.subplots()
for kind, style in (("spc", "o"), ("pac", "s")):
    x, ach = mean("t_achieved", kind)
    if not x:
        continue
    _, rel = mean("t_relaxed", kind)
    ax.plot(x, db(ach), marker=style, label=f"{kind.upper()} achieved")
    ax.plot(x, db(rel), marker=style, linestyle="--", label=f"{kind.upper()} relaxed bound")
ax.set_xlabel("total transmit power over noise (dB)")
ax.set_ylabel("mean minimum SINR (dB)")
ax.grid(True)
ax.legend()
fig.savefig(HERE / "{stem}.png", dpi=150)
'''

_PLOT_USERS = '''fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4))
for kind, style in (("spc", "o"), ("pac", "s")):
    x, gap = mean("gap_ratio", kind)
    if not x:
        continue
    _, ach = mean("t_achieved", kind)
    left.plot(x, gap, marker=style, label=kind.upper())
    right.plot(x, db(ach), marker=style, label=kind.upper())
left.set_xlabel("users per group")
left.set_ylabel("mean achieved / relaxed")
right.set_xlabel("users per group")
right.set_ylabel("mean minimum SINR (dB)")
for a in (left, right):
    a.grid(True)
    a.legend()
fig.tight_layout()
fig.savefig(HERE / "{stem}.png", dpi=150)
'''


def plot_script(csv_path, axis: str) -> str:
    """Source of a standalone matplotlib script that plots the CSV at ``csv_path``."""
    csv_path = Path(csv_path)
    body = _PLOT_SNR if axis == "snr_db" else _PLOT_USERS
    title = "minimum SINR versus SNR" if axis == "snr_db" else "relaxation gap versus users per group"
    return (_PLOT_HEAD.format(title=title, csv_name=csv_path.name, axis=axis)
            + body.replace("{stem}", csv_path.stem))


def write_plot_script(csv_path, axis: str) -> Path:
    """Write ``<csv stem>_plot.py`` next to the CSV and return its path."""
    csv_path = Path(csv_path)
    target = csv_path.with_name(csv_path.stem + "_plot.py")
    target.write_text(plot_script(csv_path, axis))
    return target
