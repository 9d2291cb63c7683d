import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gatedspad.errors import DomainError
from gatedspad.gating import (
    DetectorRates,
    GateSchedule,
    expected_gate_photoelectrons,
    trigger_probabilities,
    trigger_probability_constant,
)
from gatedspad.waveform import GaussianPulse, Rectangular

# mpmath quad of the lambda_s = 1, T_s = 800 pulse over the gate, 30 digits
P_PEAK_GATE_REF = 0.38035285780234260126498036863
P_FIRST_GATE_REF = 0.00542471977413741680229605391329


def test_schedule_derived_quantities():
    s = GateSchedule.from_cycle(2.0, 8.0, 100)
    assert (s.tau_g, s.tau_d, s.tau_cyc, s.N, s.T_s) == (2.0, 6.0, 8.0, 100, 800.0)
    alt = GateSchedule(tau_g=2.0, tau_d=8.0, n_gates=100)
    assert alt.tau_cyc == 10.0 and alt.T_s == 1000.0


@pytest.mark.parametrize(
    "n,expected", [(1, (0.0, 2.0)), (3, (16.0, 18.0)), (100, (792.0, 794.0))]
)
def test_gate_window(n, expected):
    s = GateSchedule.from_cycle(2.0, 8.0, 100)
    assert s.gate_window(n) == expected
    assert s.gate_window(n)[1] <= s.T_s


@pytest.mark.parametrize("n", [0, 101, -1])
def test_gate_window_out_of_range(n):
    with pytest.raises(DomainError):
        GateSchedule.from_cycle(2.0, 8.0, 100).gate_window(n)


def test_windows_are_disjoint():
    starts, ends = GateSchedule.from_cycle(2.0, 8.0, 50).windows()
    assert np.all(starts[1:] >= ends[:-1])
    assert starts[0] == 0.0 and ends[-1] <= 400.0


@pytest.mark.parametrize("kw", [dict(tau_g=0, tau_d=1, n_gates=1),
                                dict(tau_g=1, tau_d=-1, n_gates=1),
                                dict(tau_g=1, tau_d=1, n_gates=0)])
def test_schedule_validation(kw):
    with pytest.raises(DomainError):
        GateSchedule(**kw)


def test_detector_rates_validation():
    with pytest.raises(DomainError):
        DetectorRates(1.5)
    with pytest.raises(DomainError):
        DetectorRates(0.1, lambda_b=-1)
    with pytest.raises(DomainError):
        DetectorRates(0.1, pde_per_gate=[0.1, 1.2])


def test_constant_trigger_probability():
    assert trigger_probability_constant(0.0, 2.0) == 0.0
    assert trigger_probability_constant(math.log(2) / 2.0, 2.0) == pytest.approx(0.5, abs=1e-15)
    vals = [trigger_probability_constant(r, 2.0) for r in (0.1, 1, 10, 100, 1e3)]
    assert np.all(np.diff(vals) > 0) or vals[-1] == 1.0
    assert vals[-1] == pytest.approx(1.0)
    with pytest.raises(DomainError):
        trigger_probability_constant(-1.0, 2.0)


def test_rectangular_reduces_to_constant_rate():
    s = GateSchedule.from_cycle(2.0, 8.0, 20)
    d = DetectorRates(0.1, lambda_b=0.3, lambda_d=4.4e-5)
    p = trigger_probabilities(Rectangular(4.0, s.T_s), s, d)
    expected = trigger_probability_constant(0.1 * (4.0 + 0.3) + 4.4e-5, 2.0)
    np.testing.assert_allclose(p, expected, rtol=1e-13)


def test_gaussian_centre_gates_beat_edges():
    s = GateSchedule.from_cycle(2.0, 8.0, 100)
    p = trigger_probabilities(GaussianPulse(1.0, s.T_s), s, DetectorRates(0.1))
    assert p[49] > p[0] and p[50] > p[0]
    assert p[0] == pytest.approx(P_FIRST_GATE_REF, rel=1e-12)


def test_peak_gate_value_against_quadrature_oracle():
    # 200 gates of 2 ns every 4 ns: gate 100 spans (396, 398)
    s = GateSchedule(tau_g=2.0, tau_d=2.0, n_gates=200)
    assert s.gate_window(100) == (396.0, 398.0)
    p = trigger_probabilities(GaussianPulse(1.0, s.T_s), s, DetectorRates(0.1))
    assert p[99] == pytest.approx(P_PEAK_GATE_REF, rel=1e-12)


def test_zero_signal_gives_zero_probabilities():
    s = GateSchedule.from_cycle(2.0, 8.0, 10)
    p = trigger_probabilities(GaussianPulse(0.0, s.T_s), s, DetectorRates(0.1))
    assert np.all(p == 0.0)


def test_dark_rate_not_scaled_by_pde():
    s = GateSchedule.from_cycle(2.0, 8.0, 5)
    mean = expected_gate_photoelectrons(Rectangular(0.0, s.T_s), s, DetectorRates(0.5, 0.0, 0.01))
    np.testing.assert_allclose(mean, 0.02)


def test_per_gate_pde_override():
    s = GateSchedule.from_cycle(2.0, 8.0, 3)
    d = DetectorRates(0.1, pde_per_gate=[0.0, 0.1, 0.2])
    p = trigger_probabilities(Rectangular(1.0, s.T_s), s, d)
    np.testing.assert_allclose(p, -np.expm1(-np.array([0.0, 0.2, 0.4])))
    with pytest.raises(DomainError):
        trigger_probabilities(Rectangular(1.0, 40.0), GateSchedule.from_cycle(2, 8, 5), d)


def test_domain_mismatch():
    s = GateSchedule.from_cycle(2.0, 8.0, 100)
    with pytest.raises(DomainError):
        trigger_probabilities(GaussianPulse(1.0, 900.0), s, DetectorRates(0.1))


@given(st.floats(0.0, 15.0), st.floats(0.0, 15.0))
def test_monotone_in_intensity(a, b):
    lo, hi = sorted((a, b))
    s = GateSchedule.from_cycle(2.0, 8.0, 50)
    d = DetectorRates(0.1, 0.05, 4.4e-5)
    p_lo = trigger_probabilities(GaussianPulse(lo, s.T_s), s, d)
    p_hi = trigger_probabilities(GaussianPulse(hi, s.T_s), s, d)
    assert np.all(p_hi >= p_lo)
    assert np.all((p_lo >= 0) & (p_hi <= 1))
