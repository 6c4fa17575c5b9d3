"""Drive signal values, antiderivative, and symmetry classification."""

import numpy as np
import pytest

from hmdimer.drive import (
    DriveParams,
    canonical_phase,
    classify_symmetries,
    drive_antiderivative,
    drive_value,
)


def _drive(amplitude=24.0, ratio=0.25, frequency=10.0, phase=0.0):
    return DriveParams(amplitude, ratio, frequency, phase)


def test_value_matches_closed_form():
    rng = np.random.default_rng(11)
    for _ in range(20):
        d = _drive(rng.uniform(0, 40), rng.uniform(0, 1), rng.uniform(1, 20),
                   rng.uniform(-3, 3))
        t = rng.uniform(-5, 5, size=16)
        expected = -d.amplitude * (np.sin(d.frequency * t)
                                   + d.ratio * np.sin(2 * d.frequency * t + d.phase))
        np.testing.assert_allclose(drive_value(t, d), expected, atol=1e-13)


def test_value_at_origin():
    assert drive_value(0.0, _drive(phase=0.0)) == pytest.approx(0.0, abs=1e-15)
    # at t = 0 only the second harmonic's phase offset contributes
    assert drive_value(0.0, _drive(phase=np.pi / 2)) == pytest.approx(-6.0)


def test_periodicity():
    d = _drive(phase=0.7)
    t = np.linspace(-3.0, 3.0, 41)
    np.testing.assert_allclose(drive_value(t + d.period, d), drive_value(t, d),
                               atol=1e-12 * d.amplitude)


def test_antiderivative_differentiates_to_value():
    d = _drive(phase=-1.2)
    t = np.linspace(0.0, d.period, 37)
    h = 1e-6
    fd = (drive_antiderivative(t + h, d) - drive_antiderivative(t - h, d)) / (2 * h)
    np.testing.assert_allclose(fd, drive_value(t, d), atol=1e-6 * d.amplitude)


def test_antiderivative_has_zero_mean():
    # the accumulated phase must not drift from period to period
    d = _drive(phase=2.1)
    ts = np.arange(4096) * (d.period / 4096)
    mean = np.mean(drive_antiderivative(ts, d))
    assert abs(mean) <= 1e-10 * d.amplitude


def test_antiderivative_periodic():
    d = _drive(phase=0.4)
    t = np.linspace(0.0, 2.0, 11)
    np.testing.assert_allclose(drive_antiderivative(t + d.period, d),
                               drive_antiderivative(t, d), atol=1e-11 * d.amplitude)


def test_phase_canonicalization():
    d = _drive(phase=3 * np.pi)
    assert d.phase == pytest.approx(-np.pi)
    assert -np.pi <= d.phase < np.pi
    # canonicalizing twice changes nothing
    assert canonical_phase(d.phase) == d.phase
    assert canonical_phase(0.3) == pytest.approx(0.3)
    assert canonical_phase(np.pi) == pytest.approx(-np.pi)


def test_canonical_phase_preserves_signal():
    raw, canon = _drive(phase=0.9 + 4 * np.pi), _drive(phase=0.9)
    t = np.linspace(0.0, 1.0, 17)
    np.testing.assert_allclose(drive_value(t, raw), drive_value(t, canon),
                               atol=1e-11)


def test_frequency_must_be_positive():
    with pytest.raises(ValueError):
        DriveParams(24.0, 0.25, 0.0, 0.0)
    with pytest.raises(ValueError):
        DriveParams(24.0, 0.25, -10.0, 0.0)


def test_derived_properties():
    d = _drive()
    assert d.period == pytest.approx(2 * np.pi / 10.0)
    assert d.a_over_omega == pytest.approx(2.4)


def test_single_harmonic_has_all_symmetries():
    rep = classify_symmetries(_drive(ratio=0.0, phase=0.9))
    assert rep.shift_symmetric
    assert rep.antisymmetric
    assert rep.time_reversal_symmetric


def test_zero_amplitude_has_all_symmetries():
    rep = classify_symmetries(_drive(amplitude=0.0, phase=0.3))
    assert rep.shift_symmetric and rep.antisymmetric
    assert rep.time_reversal_symmetric


def test_phase_zero_is_antisymmetric_only():
    rep = classify_symmetries(_drive(phase=0.0))
    assert not rep.shift_symmetric
    assert rep.antisymmetric
    assert not rep.time_reversal_symmetric


def test_phase_pi_is_antisymmetric():
    rep = classify_symmetries(_drive(phase=np.pi))
    assert rep.antisymmetric
    assert not rep.time_reversal_symmetric


def test_phase_half_pi_is_time_reversal_symmetric():
    d = _drive(phase=np.pi / 2)
    rep = classify_symmetries(d)
    assert not rep.shift_symmetric
    assert not rep.antisymmetric
    assert rep.time_reversal_symmetric
    assert rep.symmetry_point is not None
    # reported reflection point actually reflects the signal
    t = np.linspace(0.0, d.period, 29)
    np.testing.assert_allclose(drive_value(rep.symmetry_point + t, d),
                               drive_value(rep.symmetry_point - t, d),
                               atol=1e-9 * d.amplitude)


def test_minus_half_pi_is_time_reversal_symmetric():
    rep = classify_symmetries(_drive(phase=-np.pi / 2))
    assert rep.time_reversal_symmetric
    assert not rep.antisymmetric


def test_generic_phase_has_no_symmetry():
    rep = classify_symmetries(_drive(phase=0.3))
    assert not rep.shift_symmetric
    assert not rep.antisymmetric
    assert not rep.time_reversal_symmetric
    assert rep.symmetry_point is None


def test_classification_is_stable_across_phases():
    # no phase should trigger an inconsistent-classification error
    for phi in np.linspace(-np.pi, np.pi, 61):
        rep = classify_symmetries(_drive(phase=phi))
        assert isinstance(rep.antisymmetric, bool)
        assert isinstance(rep.shift_symmetric, bool)
        assert isinstance(rep.time_reversal_symmetric, bool)
