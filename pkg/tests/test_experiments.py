import math
from dataclasses import replace

import numpy as np
import pytest

from seqreadout.config import ExperimentConfig
from seqreadout.experiments import (
    StateBank,
    _excited_time,
    run_calibrate,
    run_readout,
    run_release_study,
    run_wigner,
    selfcheck,
    simulate_preparation,
    streams,
    sweep_overlap,
)

SMALL = ExperimentConfig(alpha0=2.1, truncation=40, n_runs=4000, husimi_grid=101, n_tau_bins=8,
                         hist_bins=60, sweep_husimi_grid=101, sweep_n_runs=20000, sweep_bins=40)
IDEAL = replace(SMALL, include_thermal=False, include_pulse_error=False, include_t1=False)


class TestExcitedTime:
    cfg = replace(SMALL, t_int=100e-9, t_load=10e-9, n_tau_bins=4)

    def test_binning(self):
        tau = np.array([5e-9, 20e-9, 60e-9, 109e-9, 200e-9, 20e-9])
        excited = np.array([True, True, True, True, True, False])
        t_e, decayed = _excited_time(self.cfg, excited, tau)
        np.testing.assert_allclose(t_e, [0, 12.5e-9, 62.5e-9, 87.5e-9, 100e-9, 0])
        np.testing.assert_array_equal(decayed, [True, True, True, True, False, False])


class TestPreparation:
    def test_event_rates(self):
        cfg = replace(SMALL, include_t1=True)
        p = cfg.device
        n = 200_000
        runs = simulate_preparation(cfg, "e", n, np.random.default_rng(3), StateBank(cfg))
        sem = lambda q: 3 * math.sqrt(q * (1 - q) / n)
        assert abs(runs.thermal.mean() - p.thermal_excitation) < sem(p.thermal_excitation)
        q_fail = 1 - p.pi_pulse_fidelity
        assert abs(runs.pulse_failed.mean() - q_fail) < sem(q_fail)
        excited = (1 - p.thermal_excitation) * p.pi_pulse_fidelity + p.thermal_excitation * q_fail
        q_dec = excited * -math.expm1(-(cfg.t_load + cfg.t_int) / p.t1)
        assert abs(runs.decayed.mean() - q_dec) < sem(q_dec)

    def test_causes(self):
        runs = simulate_preparation(SMALL, "e", 50_000, np.random.default_rng(4), StateBank(SMALL))
        assert set(np.unique(runs.cause)) <= {"separation", "t1_decay", "pulse", "thermal"}
        np.testing.assert_array_equal(runs.cause == "pulse", runs.pulse_failed & ~runs.thermal)
        np.testing.assert_array_equal(runs.cause == "thermal", runs.thermal & ~runs.pulse_failed)

    def test_ideal_has_no_events(self):
        runs = simulate_preparation(IDEAL, "e", 2000, np.random.default_rng(5), StateBank(IDEAL))
        assert np.all(runs.cause == "separation")
        assert not runs.decayed.any()

    def test_streams_independent_of_count(self):
        a = streams(9, 4)[1].random(3)
        b = streams(9, 2)[1].random(3)
        np.testing.assert_array_equal(a, b)


class TestReadout:
    def test_single_run_perfect(self):
        cfg = replace(IDEAL, alpha0=5.8, truncation=150, n_runs=1, husimi_grid=201)
        rep = run_readout(cfg).report
        assert rep.fidelity == 1.0

    def test_deterministic(self):
        a = run_readout(SMALL).report.to_text()
        assert a == run_readout(SMALL).report.to_text()
        assert a != run_readout(replace(SMALL, seed=SMALL.seed + 1)).report.to_text()

    def test_report_contents(self):
        res = run_readout(SMALL)
        d = res.report.to_dict()
        assert d["fidelity"] == pytest.approx(1 - (d["error_g"] + d["error_e"]) / 2)
        assert 0 <= d["qndness"] <= 1
        budget_e = sum(v for k, v in d.items() if k.startswith("budget.e."))
        assert budget_e == pytest.approx(d["error_e"], abs=1e-12)
        assert res.hist["g"].same_binning(res.hist["e"])

    def test_trace_path(self):
        cfg = replace(SMALL, measurement_path="trace", n_runs=3000)
        res = run_readout(cfg)
        direct = run_readout(replace(cfg, measurement_path="direct"))
        assert res.chain is not None
        assert abs(res.report.fidelity - direct.report.fidelity) < 0.05


class TestSweep:
    def test_zero_time_column_and_layout(self):
        m = sweep_overlap(IDEAL, [2.1], [0.0, 100e-9])
        assert m.shape == (1, 2)
        assert m[0, 0] > 0.95
        assert m[0, 1] < m[0, 0]

    def test_threads_do_not_change_result(self):
        cfg = replace(IDEAL, sweep_n_runs=3000)
        a = sweep_overlap(cfg, [1.0, 2.1], [0.0, 60e-9], threads=1)
        b = sweep_overlap(cfg, [1.0, 2.1], [0.0, 60e-9], threads=2)
        np.testing.assert_array_equal(a, b)

    def test_auto_truncation(self):
        # 4.0^2 * 3 > 40, so the cell must raise the dimension itself
        assert sweep_overlap(replace(IDEAL, sweep_n_runs=2000), [4.0], [0.0]).shape == (1, 1)

    def test_empty(self):
        with pytest.raises(ValueError):
            sweep_overlap(SMALL, [], [0.0])


class TestReleaseStudy:
    def test_rows(self):
        t = run_release_study(SMALL, [10e-9, 28e-9], [0.0, 2 * math.pi * 7.2e6])
        assert len(t) == 4
        assert all(r["remaining_fraction"] + r["internal_loss"] + r["emitted"] <= 1 + 1e-9 for r in t)

    def test_idle_pump(self):
        cfg = replace(SMALL, device=SMALL.device.with_(kappa_r=0.0))
        t = run_release_study(cfg, [5e-9, 28e-9, 60e-9], [0.0])
        assert [r["remaining_fraction"] for r in t] == pytest.approx([1.0, 1.0, 1.0], abs=1e-12)
        # with internal loss the idle mode still decays over the window
        t = run_release_study(SMALL, [28e-9], [0.0])
        assert t[0]["remaining_fraction"] == pytest.approx(
            math.exp(-SMALL.device.kappa_r * 8 * 28e-9), rel=1e-6)


class TestWigner:
    def test_zero_time_gaussians(self):
        cfg = replace(SMALL, wigner_points=41, wigner_t_int=(0.0,))
        maps = run_wigner(cfg)
        assert set(maps) == {("g", 0.0, "direct"), ("e", 0.0, "direct")}
        step = 16 / 40
        for m in maps.values():
            assert abs(m.peak() - 2.1) <= step
            assert m.values.max() == pytest.approx(2 / math.pi, abs=0.05)

    def test_rotation_and_protocol(self):
        cfg = replace(SMALL, wigner_points=21, wigner_t_int=(0.0,), wigner_mode="both",
                      wigner_rotation_e=math.pi / 2, wigner_shots=2000)
        maps = run_wigner(cfg)
        assert len(maps) == 4
        assert maps[("e", 0.0, "direct")].rotation_applied == pytest.approx(math.pi / 2)
        assert abs(maps[("e", 0.0, "direct")].peak() - 2.1j) <= 16 / 20 * math.sqrt(2)
        # the protocol map of e is sign-corrected
        assert maps[("e", 0.0, "protocol")].values.max() > 0.4


def test_calibrate_recovers_device():
    rep, curve, series = run_calibrate(ExperimentConfig())
    p = ExperimentConfig().device
    assert rep["photon.nbar"] == pytest.approx(5.8**2, rel=0.02)
    assert rep["photon.kappa_r_per_s"] == pytest.approx(p.kappa_r, rel=0.02)
    assert rep["dispersive.chi_rad_per_s"] == pytest.approx(p.chi, rel=0.01)
    assert rep["thermal.temperature_k"] == pytest.approx(0.044, abs=0.002)
    assert curve.times.size == 401 and series.nbar.size == 10


def test_selfcheck_passes():
    checks = selfcheck()
    assert len(checks) == 7
    assert all(ok for _, ok, _ in checks), [c for c in checks if not c[1]]
