import math

import numpy as np
import pytest

from gatedspad.errors import DomainError, ModelError
from gatedspad.gating import DetectorRates, GateSchedule, trigger_probabilities
from gatedspad.pmf import brute_force_pmf, dft_cf_pmf, tv_distance
from gatedspad.simulation import (
    ExperimentConfig,
    draw_count_arrival_level,
    draw_count_gate_level,
    draw_pilot_tallies,
    empirical_pmf,
    pmf_compare_rows,
    run_ser_experiment,
    simulate_gate_hits,
    stream,
    wilson_halfwidth,
    wilson_interval,
)
from gatedspad.waveform import GaussianPulse, Rectangular


def test_streams_are_reproducible_and_distinct():
    a = stream(7, 0, 1).random(5)
    np.testing.assert_array_equal(a, stream(7, 0, 1).random(5))
    assert not np.array_equal(a, stream(7, 1, 0).random(5))
    assert not np.array_equal(a, stream(8, 0, 1).random(5))


def test_gate_level_degenerate_vectors():
    rng = stream(1, 0)
    assert np.all(draw_count_gate_level(np.zeros(10), rng, 100) == 0)
    assert np.all(draw_count_gate_level(np.ones(10), rng, 100) == 10)
    assert draw_count_gate_level(np.ones(4), rng) == 4


def test_gate_level_matches_exact_pmf():
    counts = draw_count_gate_level([0.1, 0.9], stream(2, 0), 10**6)
    emp = empirical_pmf(counts, 10**6, 2)
    assert tv_distance(emp, [0.09, 0.82, 0.09]) <= 0.005


def test_gate_level_chunking_is_seamless(monkeypatch):
    import gatedspad.simulation as sim

    p = np.linspace(0.01, 0.99, 50)
    whole = draw_count_gate_level(p, stream(3, 0), 1000)
    monkeypatch.setattr(sim, "_CHUNK_ELEMS", 50 * 7)
    pieces = draw_count_gate_level(p, stream(3, 0), 1000)
    np.testing.assert_array_equal(whole, pieces)


def test_empirical_pmf():
    np.testing.assert_array_equal(empirical_pmf(lambda n: np.full(n, 3), 10, 5),
                                  [0, 0, 0, 1, 0, 0])
    with pytest.raises(ModelError):
        empirical_pmf(np.array([0, 6]), 2, 5)
    with pytest.raises(DomainError):
        empirical_pmf(np.array([0]), 0, 5)


def test_arrival_level_silent_detector():
    s = GateSchedule.from_cycle(2.0, 8.0, 20)
    counts = draw_count_arrival_level(GaussianPulse(0.0, s.T_s), s, DetectorRates(0.1), stream(4, 0),
                                      1000)
    assert np.all(counts == 0)


def test_arrival_level_rectangular_matches_constant_rate_law():
    s = GateSchedule.from_cycle(2.0, 8.0, 50)
    d = DetectorRates(0.1, 0.5, 4.4e-5)
    hits = simulate_gate_hits(Rectangular(3.0, s.T_s), s, d, stream(5, 0), 20_000)
    assert hits.max() <= 1
    p = -math.expm1(-(0.1 * 3.5 + 4.4e-5) * 2.0)
    n = hits.size
    assert abs(hits.mean() - p) <= 5 * math.sqrt(p * (1 - p) / n)


def test_arrival_level_zero_dead_time_counts_every_arrival():
    # without dead time every in-gate photoelectron registers: Poisson per gate
    s = GateSchedule(tau_g=2.0, tau_d=0.0, n_gates=10)
    d = DetectorRates(1.0, 0.0, 0.0)
    hits = simulate_gate_hits(Rectangular(1.5, s.T_s), s, d, stream(6, 0), 20_000)
    assert hits.max() > 1
    mean, var = hits.mean(), hits.var()
    assert mean == pytest.approx(3.0, abs=0.03)
    assert var == pytest.approx(3.0, abs=0.1)


def test_arrival_level_dead_time_shorter_than_gate():
    # tau_d < tau_g allows a second registration inside one gate
    s = GateSchedule(tau_g=4.0, tau_d=1.0, n_gates=5)
    d = DetectorRates(1.0, 0.0, 0.0)
    hits = simulate_gate_hits(Rectangular(2.0, s.T_s), s, d, stream(7, 0), 5000)
    assert hits.max() >= 2
    assert hits.max() <= 4  # at most ceil(tau_g / tau_d) registrations


def test_adjacent_gates_uncorrelated(schedule100):
    d = DetectorRates(0.1, 0.1, 4.4e-5)
    hits = simulate_gate_hits(GaussianPulse(8.0, schedule100.T_s), schedule100, d, stream(8, 0),
                              50_000).astype(float)
    a, b = hits[:, 40:60], hits[:, 41:61]
    r = [np.corrcoef(a[:, i], b[:, i])[0, 1] for i in range(a.shape[1])]
    assert np.max(np.abs(r)) <= 5 / math.sqrt(hits.shape[0])


def test_arrival_and_gate_level_agree_quick(schedule100, table1_rates):
    w = GaussianPulse(2.0, schedule100.T_s)
    n = 100_000
    arr = empirical_pmf(draw_count_arrival_level(w, schedule100, table1_rates, stream(9, 0), n),
                        n, 100)
    exact = brute_force_pmf(trigger_probabilities(w, schedule100, table1_rates))
    assert tv_distance(arr, exact) <= 0.015


class LyingPulse(GaussianPulse):
    def max_rate(self, a, b):
        return 0.5 * super().max_rate(a, b)


def test_thinning_bound_violation_detected(schedule100):
    with pytest.raises(ModelError):
        simulate_gate_hits(LyingPulse(5.0, schedule100.T_s), schedule100, DetectorRates(0.1),
                           stream(10, 0), 100)


def test_wilson_against_statsmodels():
    sm = pytest.importorskip("statsmodels.stats.proportion")
    for k, n in ((0, 100), (7, 1000), (500, 1000), (100_000, 100_000)):
        lo, hi = sm.proportion_confint(k, n, alpha=0.05, method="wilson")
        assert wilson_interval(k, n) == pytest.approx((lo, hi), abs=1e-12)
        assert wilson_halfwidth(k, n) > 0


def test_pilot_tallies_bounded():
    t = draw_pilot_tallies(np.linspace(0, 1, 9), 300, stream(11, 0))
    assert t[0] == 0 and t[-1] == 300 and np.all((t >= 0) & (t <= 300))


def small_cfg(**kw):
    base = dict(
        schedule=GateSchedule.from_cycle(2.0, 8.0, 100),
        rates=DetectorRates(0.1, 0.1, 4.4e-5),
        n_symbols=5_000,
        pilot_k=500,
        sweep=(2.0, 6.0, 12.0),
        seed=42,
    )
    base.update(kw)
    return ExperimentConfig(**base)


def test_ser_experiment_deterministic_across_workers():
    cfg = small_cfg()
    one = run_ser_experiment(cfg, workers=1)
    assert one == run_ser_experiment(cfg, workers=1)
    assert one == run_ser_experiment(cfg, workers=2)
    assert [r.sweep_value for r in one] == [2.0, 6.0, 12.0]
    assert all(0 <= r.ser_proposed <= 1 and r.ci95_proposed > 0 for r in one)


def test_zero_intensity_limit_is_guessing():
    cfg = small_cfg(sweep=(0.0,), n_symbols=20_000, rates=DetectorRates(0.1, 0.0, 4.4e-5))
    (r,) = run_ser_experiment(cfg)
    # indistinguishable symbols: everything decided as symbol 0
    assert r.ser_proposed == pytest.approx(0.75, abs=0.02)
    assert r.ser_conventional == pytest.approx(0.75, abs=0.02)


def test_background_axis_uses_fixed_intensity():
    cfg = small_cfg(axis="background", sweep=(0.01, 1.0), lambda_s=5.0)
    lam, rates = cfg.point(1.0)
    assert lam == 5.0 and rates.lambda_b == 1.0 and rates.p_de == 0.1
    res = run_ser_experiment(cfg)
    assert res[0].ser_proposed <= res[1].ser_proposed


def test_mean_p_baseline_runs():
    res = run_ser_experiment(small_cfg(conventional_model="mean_p", sweep=(4.0,)))
    assert 0 <= res[0].ser_conventional <= 1


@pytest.mark.parametrize("kw", [dict(axis="sideways"), dict(conventional_model="other"),
                                dict(sweep=()), dict(n_symbols=0), dict(sweep=(-1.0,)),
                                dict(coeffs=(0.0, 0.7, 0.5, 1.0))])
def test_experiment_config_validation(kw):
    with pytest.raises(DomainError):
        small_cfg(**kw)


def test_ser_trends_low_intensity():
    """Both detectors improve with intensity below the saturation optimum."""
    cfg = small_cfg(schedule=GateSchedule.from_cycle(2.0, 8.0, 400), sweep=(1.0, 2.0, 3.0),
                    n_symbols=40_000, pilot_k=1000)
    res = run_ser_experiment(cfg)
    for prev, cur in zip(res, res[1:]):
        tol = 2 * (prev.ci95_proposed + cur.ci95_proposed)
        assert cur.ser_proposed <= prev.ser_proposed + tol
    for r in res:
        assert r.ser_proposed <= r.ser_conventional + 2 * (r.ci95_proposed + r.ci95_conventional)


def test_pmf_compare_rows_layout():
    s = GateSchedule.from_cycle(2.0, 8.0, 1)
    rows = pmf_compare_rows(s, DetectorRates(0.1), [0.5, 3.0], n_draws=20_000, seed=3)
    assert len(rows) == 4
    assert [r[1] for r in rows] == [0, 1, 0, 1]
    for lam in (0.5, 3.0):
        sel = [r for r in rows if r[0] == lam]
        assert sum(r[2] for r in sel) == pytest.approx(1.0)
        assert abs(sel[1][2] - sel[1][4]) <= 0.02
    p = trigger_probabilities(GaussianPulse(3.0, s.T_s), s, DetectorRates(0.1))
    assert rows[3][2] == pytest.approx(dft_cf_pmf(p)[1])
