import math
from dataclasses import replace

import numpy as np
import pytest

from arrayheal.phasor import Phasor, extract_phasor, SampledWindow, wrap_phase
from arrayheal.simulation import (
    MU0, ArrayScenario, CalibrationSweep, DriftSchedule, Excitation, GeometryModel,
    PiecewiseLinear, ScenarioError, UnitDrift, apply_drift, demodulate_segment,
    paper_twin_scenario, synthesize, theoretical_field,
)


def small_scenario(noise=0.0, drift=None, amplitude=None, seed=3, n=4, train_s=2.0):
    ids = tuple(f"U{k}" for k in range(n))
    geometry = GeometryModel(ids, tuple(0.05 + 0.001 * k for k in range(n)),
                             tuple(2 * math.pi * k / n for k in range(n)),
                             tuple(1.0 - 0.001 * k for k in range(n)))
    return ArrayScenario(
        geometry=geometry,
        excitation=Excitation(amplitude or PiecewiseLinear.constant(5.0), 50.0, 0.3),
        drift=drift or DriftSchedule(tuple(UnitDrift(eps=1e-3 * k, delta=-1e-3 * k) for k in range(n))),
        noise_v=(noise,) * n,
        gains=tuple(2.0e4 + 500 * k for k in range(n)),
        electronics_phase=tuple(1e-3 * (k - 1) for k in range(n)),
        sweep=CalibrationSweep((1.0, 2.0, 3.0), 0.5),
        train_s=train_s, test_s=2.0, sample_rate=5000.0, seed=seed,
    )


def test_line_current_field_value():
    g = GeometryModel(("a", "b", "c"), (0.05,) * 3, (0.0, 1.0, 2.0), (1.0,) * 3)
    b = theoretical_field(g, 0, Phasor(10.0, 0.2))
    assert MU0 == pytest.approx(4e-7 * math.pi, rel=1e-9)
    assert b.amplitude == pytest.approx(4.0e-5, rel=1e-9)
    assert b.phase == pytest.approx(0.2)


def test_zero_current_and_symmetric_array():
    g = GeometryModel(("a", "b", "c"), (0.07,) * 3, (0.0, 2.0, 4.0), (0.99,) * 3)
    assert theoretical_field(g, 1, Phasor(0.0, 0.0)).amplitude == 0.0
    amps = {theoretical_field(g, k, Phasor(3.0, 0.0)).amplitude for k in range(3)}
    assert len(amps) == 1


def test_apply_drift_examples():
    drift = DriftSchedule((UnitDrift(eps=0.002, delta=0.01),
                           UnitDrift(d_eps=PiecewiseLinear.constant(0.01)),
                           UnitDrift()))
    b = Phasor(2e-5, 0.5)
    d0 = apply_drift(b, 0, 1.0, drift)
    assert d0.amplitude == pytest.approx(1.002 * 2e-5)
    assert d0.phase == pytest.approx(0.51)
    assert apply_drift(b, 1, 1.0, drift).amplitude == pytest.approx(1.01 * 2e-5)


def test_paper_twin_drift_signs():
    s = paper_twin_scenario()
    t_end = s.duration
    d_eps = [float(u.d_eps(t_end)) for u in s.drift.units]
    d_delta = [float(u.d_delta(t_end)) for u in s.drift.units]
    assert d_eps[0] < 0 and d_eps[1] < 0 and d_eps[2] > 0
    assert d_delta[0] < 0 and d_delta[1] < 0 and d_delta[2] == 0
    assert all(v == 0 for v in d_eps[3:] + d_delta[3:])
    # drift only inside the test record
    t_train_end = s.segment_bounds()["train"][1]
    assert all(float(u.d_eps(t_train_end)) == 0 for u in s.drift.units)
    # percent-level amplitude, sub-radian phase
    assert 0.01 <= max(abs(v) for v in d_eps) <= 0.1
    assert 0.05 <= max(abs(v) for v in d_delta) < 1.0


def test_noiseless_unit_recovers_scaled_current():
    s = small_scenario()
    syn = synthesize(s)
    seg = syn.segments["train"]
    t, unit_z, ref_z = demodulate_segment(seg, 50.0, 0.1)
    for k in range(s.geometry.n_units):
        expect_amp = s.gains[k] * s.geometry.tesla_per_ampere(k) * (1 + s.drift[k].eps) * 5.0
        assert np.allclose(np.abs(unit_z[:, k]), expect_amp, rtol=1e-10)
        offset = wrap_phase(np.angle(ref_z) - np.angle(unit_z[:, k]))
        assert np.allclose(offset, s.electronics_phase[k] - s.drift[k].delta, atol=1e-10)


def test_noiseless_units_are_linearly_related():
    s = small_scenario()
    seg = synthesize(s).segments["test"]
    _, unit_z, _ = demodulate_segment(seg, 50.0, 0.1)
    # undo each unit's known gain and phase and all units agree
    b = np.column_stack([
        unit_z[:, k] / (s.gains[k] * (1 + s.drift[k].eps))
        * np.exp(1j * (s.electronics_phase[k] - s.drift[k].delta))
        * s.geometry.amperes_per_tesla(k)
        for k in range(4)])
    assert np.allclose(b, b[:, :1], rtol=1e-10)


def test_synthesis_is_deterministic():
    s = small_scenario(noise=1e-3)
    a, b = synthesize(s), synthesize(s)
    for name in a.segments:
        assert np.array_equal(a.segments[name].units, b.segments[name].units)
    c = synthesize(s.with_seed(4))
    assert not np.array_equal(a.segments["test"].units, c.segments["test"].units)


def test_drift_touches_only_targeted_unit():
    base = small_scenario(noise=1e-3)
    units = list(base.drift.units)
    units[2] = replace(units[2], d_eps=PiecewiseLinear((4.0, 5.0), (0.0, 0.05)))
    drifted = replace(base, drift=DriftSchedule(tuple(units)))
    a, b = synthesize(base), synthesize(drifted)
    for name in a.segments:
        ua, ub = a.segments[name].units, b.segments[name].units
        for k in (0, 1, 3):
            assert np.array_equal(ua[k], ub[k])
    assert not np.array_equal(a.segments["test"].units[2], b.segments["test"].units[2])


def test_noise_is_independent_across_units():
    s = replace(small_scenario(noise=1.0), gains=(1e-30,) * 4)
    units = synthesize(s).segments["test"].units
    corr = np.corrcoef(units)
    assert np.all(np.abs(corr[np.triu_indices(4, 1)]) < 0.05)


def test_triangular_amplitude_is_tracked_by_every_unit():
    # slope of 1.875 A/s keeps ramp leakage in the lock-in below 0.1%
    tri = PiecewiseLinear((0.0, 4.0, 8.0), (3.0, 10.5, 3.0), 8.0)
    s = small_scenario(amplitude=tri, train_s=8.0)
    seg = synthesize(s).segments["train"]
    t, unit_z, _ = demodulate_segment(seg, 50.0, 0.1)
    # window average of the excitation profile is the oracle
    mid = t + 0.05
    oracle = tri(mid)
    for k in range(4):
        scale = s.gains[k] * s.geometry.tesla_per_ampere(k) * (1 + s.drift[k].eps)
        assert np.allclose(np.abs(unit_z[:, k]) / scale, oracle, rtol=2e-3, atol=2e-3)


def test_invalid_scenarios():
    with pytest.raises(ScenarioError):
        GeometryModel(("a", "b"), (0.05, 0.05), (0, 1), (1, 1))
    with pytest.raises(ScenarioError):
        GeometryModel(("a", "b", "c"), (0.05, 0.0, 0.05), (0, 1, 2), (1, 1, 1))
    units = (UnitDrift(d_eps=PiecewiseLinear((0.0, 1.0), (0.0, -1.5))),) + (UnitDrift(),) * 3
    with pytest.raises(ScenarioError):
        small_scenario(drift=DriftSchedule(units))


def test_periodic_profile_folds_time():
    p = PiecewiseLinear((0.0, 5.0, 10.0), (0.0, 1.0, 0.0), 10.0)
    assert p(2.5) == pytest.approx(0.5)
    assert p(12.5) == pytest.approx(0.5)
    assert p(17.5) == pytest.approx(0.5)


def test_extract_phasor_on_synthesized_window():
    s = small_scenario()
    seg = synthesize(s).segments["calibration"]
    w = SampledWindow(seg.reference[:2500], seg.sample_rate, seg.start_time)
    assert extract_phasor(w, 50.0).amplitude == pytest.approx(1.0, rel=1e-12)
