import numpy as np
import pytest

from maxmin_multicast.experiments import (ConstraintKind, ExperimentRecord, SweepSettings, gap_ratio,
                                          parse_constraint, plot_script, read_csv, records_to_csv, summarize,
                                          sweep_snr, sweep_users, worker_count, write_csv)
from maxmin_multicast.model import ValidationError

SMALL = SweepSettings(n_trials=3, n_rand=8, workers=1)


@pytest.fixture(scope="module")
def small_sweep():
    return sweep_snr([0.0, 10.0], SMALL)


def test_record_order(small_sweep):
    keys = [(r.trial, r.snr_db, r.constraint_kind.value) for r in small_sweep]
    assert keys == [(t, s, k) for t in range(3) for s in (0.0, 10.0) for k in ("pac", "spc")]


def test_records_consistent(small_sweep):
    for r in small_sweep:
        assert r.gap_ratio == pytest.approx(r.t_achieved / r.t_relaxed)
        assert r.wall_time_ms is None and r.rho == 2.0 and r.iterations > 0


def test_csv_round_trip(tmp_path, small_sweep):
    write_csv(small_sweep, tmp_path / "a.csv")
    assert read_csv(tmp_path / "a.csv") == small_sweep


def test_pool_matches_serial(small_sweep):
    pooled = sweep_snr([0.0, 10.0], SweepSettings(n_trials=3, n_rand=8, workers=2))
    assert records_to_csv(pooled) == records_to_csv(small_sweep)


def test_timing_column():
    recs = sweep_snr([5.0], SweepSettings(n_trials=1, n_rand=4, workers=1, timing=True,
                                          kinds=(ConstraintKind.PAC,)))
    assert recs[0].wall_time_ms > 0


def test_users_sweep_shapes():
    recs = sweep_users([1, 2], SweepSettings(n_trials=1, n_rand=4, workers=1, kinds=(ConstraintKind.SPC,)))
    assert [r.rho for r in recs] == [1.0, 2.0]
    with pytest.raises(ValidationError):
        sweep_users([0.5], SMALL)


def test_summary(small_sweep):
    s = summarize(small_sweep, "snr_db")
    assert [(p.point, p.kind.value, p.n) for p in s] == [(0.0, "pac", 3), (0.0, "spc", 3),
                                                           (10.0, "pac", 3), (10.0, "spc", 3)]
    pac0 = [r.t_achieved for r in small_sweep if r.snr_db == 0.0 and r.constraint_kind is ConstraintKind.PAC]
    assert s[0].mean_t_achieved == pytest.approx(np.mean(pac0))


def test_helpers(monkeypatch):
    assert gap_ratio(0.0, 0.0) == 1.0
    assert parse_constraint("both") == (ConstraintKind.PAC, ConstraintKind.SPC)
    with pytest.raises(ValidationError):
        parse_constraint("xyz")
    monkeypatch.setenv("MAXMIN_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("MAXMIN_THREADS", "many")
    with pytest.raises(ValidationError):
        worker_count()


@pytest.mark.parametrize("axis", ["snr_db", "rho"])
def test_plot_script_compiles(tmp_path, axis):
    compile(plot_script(tmp_path / "x.csv", axis), "plot", "exec")
