import math

import numpy as np
import pytest
from dataclasses import replace

from nvsinglet.nv_orientation import (
    NvEnsembleSpec,
    angular_terms,
    detuning_profile,
    electron_polarization,
    ensemble_average_rate,
    optical_initial_state,
    window_fraction,
    window_intervals,
)
from nvsinglet.transfer import C13, H1, reference_drive
from nvsinglet.units import TWO_PI

B = 0.36
SPEC = NvEnsembleSpec()
DRIVE = reference_drive()

# Closed forms evaluated with mpmath (40 digits), rad/s.
DELTA_PRIME_MP = {0: -27510701576.519641674, 80: -772869638.14220317217, 85: -194314704.76751669276}
DELTA_90_MP = 650208947.93667214082


def test_aligned_axis():
    t = angular_terms(0.0, SPEC, B)
    assert t.D_theta == pytest.approx(SPEC.zfs_D, rel=1e-15)
    assert t.G1 == 0.0
    assert t.G2 == pytest.approx(SPEC.strain_E, rel=1e-12)


def test_perpendicular_axis():
    t = angular_terms(math.pi / 2, SPEC, B)
    assert t.D_theta == pytest.approx((3 * SPEC.strain_E - SPEC.zfs_D) / 2, rel=1e-14)
    assert t.D_theta / TWO_PI == pytest.approx(-1.405e9, rel=1e-12)
    assert t.delta_theta == pytest.approx(DELTA_90_MP, rel=1e-12)
    assert 0 <= t.delta_theta <= TWO_PI * 140e6


def test_shift_range_on_full_sphere():
    theta = np.linspace(0, math.pi, 20001)
    t = angular_terms(theta, SPEC, B)
    assert t.delta_theta.min() >= 0
    assert t.delta_theta.max() <= TWO_PI * 140e6
    assert t.D_theta.min() == pytest.approx((3 * SPEC.strain_E - SPEC.zfs_D) / 2, rel=1e-12)
    assert t.D_theta.max() == pytest.approx(SPEC.zfs_D, rel=1e-12)


def test_splitting_symmetric_about_equator():
    theta = np.linspace(0, math.pi / 2, 301)
    a = angular_terms(theta, SPEC, B).D_theta
    b = angular_terms(math.pi - theta, SPEC, B).D_theta
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-9 * SPEC.zfs_D)


def test_singular_shift_rejected():
    with pytest.raises(ValueError, match="singular"):
        angular_terms(0.0, SPEC, SPEC.zfs_D / SPEC.gamma_e)


@pytest.mark.parametrize("deg", [0, 80, 85])
def test_detuning_against_oracle(deg):
    _, dp = detuning_profile(math.radians(deg), DRIVE, SPEC, B)
    assert dp == pytest.approx(DELTA_PRIME_MP[deg], rel=1e-10)


def test_detuning_anchor():
    eps, dp = detuning_profile(math.pi / 2, DRIVE, SPEC, B)
    assert dp == 0.0
    assert eps == DRIVE.detuning0
    _, a = detuning_profile(math.radians(80), DRIVE, SPEC, B)
    _, b = detuning_profile(math.radians(100), DRIVE, SPEC, B)
    assert a == pytest.approx(b, rel=1e-9)


@pytest.mark.parametrize("theta, phi", [(0, 0), (0.3, 1.1), (math.pi / 2, 2.0), (2.5, 5.9)])
def test_initial_state_normalized(theta, phi):
    psi = optical_initial_state(theta, phi)
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-12)
    assert abs(psi[1]) ** 2 == pytest.approx(math.cos(theta) ** 2, abs=1e-15)


def test_initial_state_examples():
    np.testing.assert_allclose(np.abs(optical_initial_state(0, 0)) ** 2, [0, 1, 0], atol=1e-15)
    pops = np.abs(optical_initial_state(math.pi / 2, 0.7)) ** 2
    assert pops[1] < 1e-30 and pops[0] == pytest.approx(pops[2])
    assert abs(optical_initial_state(math.pi / 4, 0)[1]) ** 2 == pytest.approx(0.5)


def test_electron_polarization_step():
    assert electron_polarization(math.pi / 2, SPEC) == 0.125
    assert electron_polarization(0.0, SPEC) == 0.0
    geo = replace(SPEC, window="angle")
    assert electron_polarization(math.radians(85), geo) == 0.125
    assert electron_polarization(math.radians(79), geo) == 0.0


def _brute_force_fraction(threshold, n=2_000_001):
    u = (np.arange(n) + 0.5) / n * 2 - 1
    _, dp = detuning_profile(np.arccos(u), DRIVE, SPEC, B)
    return np.mean(np.abs(dp) < threshold)


def test_window_fraction_against_counting():
    frac = window_fraction(SPEC, B, DRIVE)
    assert frac == pytest.approx(_brute_force_fraction(SPEC.threshold), abs=2e-6)
    assert frac == pytest.approx(0.05, abs=0.02)


def test_window_fraction_limits_and_monotone():
    assert window_fraction(SPEC, B, DRIVE, threshold=math.inf) == 1.0
    assert window_fraction(SPEC, B, DRIVE, threshold=TWO_PI * 1e12) == pytest.approx(1.0, abs=1e-12)
    thresholds = TWO_PI * np.geomspace(1e5, 1e10, 30)
    fr = [window_fraction(SPEC, B, DRIVE, threshold=t) for t in thresholds]
    assert np.all(np.diff(fr) >= 0)


def test_geometric_cap():
    geo = replace(SPEC, window="angle")
    expected = (math.cos(math.radians(80)) - math.cos(math.radians(100))) / 2
    assert window_fraction(geo, B, DRIVE) == pytest.approx(expected, abs=1e-12)


def test_window_is_single_band_around_equator():
    (lo, hi), = window_intervals(SPEC, B, DRIVE)
    assert lo == pytest.approx(-hi, abs=1e-12)


def test_average_null_pumping():
    assert ensemble_average_rate(H1, 15e-9, replace(SPEC, Pe0=0.0), DRIVE, B, 1e4) == 0.0


def test_average_of_constant_integrand():
    # With tau_c tiny the rate is ~linear in the spectral difference; use the
    # angle window and a drive far above the orientation spread instead.
    from nvsinglet.spectral import spectral_density
    geo = replace(SPEC, window="angle", theta_window=(math.pi / 2 - 1e-9, math.pi / 2 + 1e-9))
    w_e = float(np.hypot(DRIVE.detuning0, DRIVE.rabi))
    w_i = H1.larmor(B)
    w = 3.0 * (spectral_density(abs(w_e - w_i), 15e-9) - spectral_density(w_e + w_i, 15e-9))
    assert ensemble_average_rate(H1, 15e-9, geo, DRIVE, B, 3.0) == pytest.approx(w * 0.125, rel=1e-9)


def test_average_empty_window(monkeypatch):
    import nvsinglet.nv_orientation as nvo
    monkeypatch.setattr(nvo, "window_intervals", lambda *a: [])
    with pytest.raises(ValueError, match="empty"):
        nvo.ensemble_average_rate(H1, 15e-9, SPEC, DRIVE, B, 1.0)


@pytest.mark.parametrize("species", [H1, C13])
@pytest.mark.parametrize("tau_c", [1e-9, 15e-9, 1e-6])
def test_quadrature_converged(species, tau_c):
    a = ensemble_average_rate(species, tau_c, SPEC, DRIVE, B, 1.0, nodes=2048)
    b = ensemble_average_rate(species, tau_c, SPEC, DRIVE, B, 1.0, nodes=4096)
    assert abs(a - b) <= 1e-6 * abs(b)


def test_average_rate_linear_in_rate_constant():
    a = ensemble_average_rate(H1, 15e-9, SPEC, DRIVE, B, 1.0)
    assert ensemble_average_rate(H1, 15e-9, SPEC, DRIVE, B, 2.5) == pytest.approx(2.5 * a, rel=1e-14)
