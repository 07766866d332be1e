import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from nvsinglet.buildup import PolarizationPair
from nvsinglet.pair_dynamics import (
    PairHamiltonianSpec,
    PairPopulations,
    RampProtocol,
    adiabatic_map,
    eigenlevels,
    high_field_populations,
    landau_zener_estimate,
    level_diagram,
    pair_hamiltonian,
    propagate_ramp,
    ramp_field,
    singlet_order_closed_form,
    singlet_order_from_populations,
    sudden_leakage,
    time_at_field,
)
from nvsinglet.units import TWO_PI

SPEC = PairHamiltonianSpec()
G = 220.0
UD = PairPopulations(np.array([0.0, 1.0, 0.0, 0.0]), "product")


def test_zero_field_spectrum():
    ev = np.linalg.eigvalsh(pair_hamiltonian(SPEC.at(0.0)))
    np.testing.assert_allclose(ev, [-3 * G / 4, G / 4, G / 4, G / 4], rtol=1e-12)


def test_high_field_matrix_elements():
    H = pair_hamiltonian(SPEC.at(0.36))
    assert H[1, 2] == pytest.approx(G / 2)
    split = (H[2, 2] - H[1, 1]).real
    assert split == pytest.approx((42.577e6 - 10.708e6) * 0.36, rel=1e-12)
    assert split / 1e6 == pytest.approx(11.47, abs=0.01)
    assert split > 1e4 * G


def test_decoupled_spins():
    spec = PairHamiltonianSpec(g=0.0, B=0.1)
    H = pair_hamiltonian(spec)
    assert np.allclose(H, np.diag(np.diag(H)))
    gc, gh = spec.gamma_C * 0.1 / TWO_PI, spec.gamma_H * 0.1 / TWO_PI
    np.testing.assert_allclose(np.diag(H).real, [(gc + gh) / 2, (gc - gh) / 2, (gh - gc) / 2, -(gc + gh) / 2])


@pytest.mark.parametrize("B", [0.0, 1e-7, 7e-6, 1e-4, 0.36, 2.0])
def test_hermitian_and_block_structure(B):
    H = pair_hamiltonian(SPEC.at(B))
    assert np.allclose(H, H.conj().T)
    mask = np.ones((4, 4), bool)
    mask[0, 0] = mask[3, 3] = True
    mask[1:3, 1:3] = False
    mask[0, 0] = mask[3, 3] = False
    assert np.all(H[mask] == 0)


@pytest.mark.parametrize("B", [0.0, 3e-7, 6.9e-6, 5e-5, 0.01, 0.36])
def test_closed_form_levels_match_numerical_diagonalization(B):
    spec = SPEC.at(B)
    H = pair_hamiltonian(spec)
    lv = eigenlevels(spec)
    np.testing.assert_allclose(np.sort(lv.energies), np.linalg.eigvalsh(H), rtol=0, atol=1e-6)
    for k in range(4):
        v = lv.vectors[:, k]
        np.testing.assert_allclose(H @ v, lv.energies[k] * v, atol=1e-6)


def test_intermediate_mixing_angle():
    B = TWO_PI * G / (SPEC.gamma_H - SPEC.gamma_C)  # Zeeman difference == g
    H = pair_hamiltonian(SPEC.at(B))[1:3, 1:3].real
    _, vecs = np.linalg.eigh(H)
    lower = vecs[:, 0] * np.sign(vecs[0, 0])
    half = math.atan(G / G) / 2
    np.testing.assert_allclose(lower, [math.cos(half), -math.sin(half)], atol=1e-12)
    np.testing.assert_allclose(np.abs(eigenlevels(SPEC.at(B)).vectors[1:3, 0]), np.abs(lower), atol=1e-12)


def test_limits_of_eigenvectors():
    low = eigenlevels(SPEC.at(1e-9))
    np.testing.assert_allclose(low.singlet_character, [1, 0, 0, 0], atol=1e-6)
    high = eigenlevels(SPEC.at(0.36))
    np.testing.assert_allclose(np.abs(high.vectors), np.eye(4)[:, [1, 2, 0, 3]], atol=1e-4)


def test_level_continuity_on_log_sweep():
    B = np.geomspace(1e-7, 1.0, 2000)
    rows = level_diagram(B, SPEC)
    E = rows[:, 1:5]
    jumps = np.abs(np.diff(E, axis=0))
    for k in range(4):
        gaps = np.min(np.abs(E[:-1, [j for j in range(4) if j != k]] - E[:-1, [k]]), axis=1)
        # inter-block crossings make gaps vanish; only compare within the zero-quantum block
        if k < 2:
            zq_gap = np.abs(E[:-1, 1] - E[:-1, 0])
            assert np.all(jumps[:, k] < zq_gap)
        assert np.all(np.isfinite(gaps))


def test_high_field_populations():
    np.testing.assert_allclose(high_field_populations(PolarizationPair(0, 0)).values, [0.25] * 4)
    np.testing.assert_allclose(high_field_populations(PolarizationPair(1, 1)).values, [1, 0, 0, 0])
    n = high_field_populations(PolarizationPair(0, 0.006)).values
    assert (n[0] + n[2]) - (n[1] + n[3]) == pytest.approx(0.006, rel=1e-12)


def test_population_validation():
    with pytest.raises(ValueError):
        PairPopulations(np.array([0.5, 0.5, 0.5, 0.0]), "product")
    with pytest.raises(ValueError):
        PairPopulations(np.array([0.25] * 4), "zeeman")


def test_adiabatic_map_conventions():
    uni = PairPopulations(np.full(4, 0.25), "product")
    for conv in ("eq8_consistent", "eq6_as_printed"):
        np.testing.assert_allclose(adiabatic_map(uni, conv).values, 0.25)
    pops = high_field_populations(PolarizationPair(0.3, -0.2))
    a = adiabatic_map(pops, "eq8_consistent").as_dict()
    b = adiabatic_map(pops, "eq6_as_printed").as_dict()
    assert a["T+1"] == b["T+1"] == pops.as_dict()["uu"]
    assert a["T-1"] == b["T-1"] == pops.as_dict()["dd"]
    assert a["S0"] == b["T0"] == pops.as_dict()["ud"]
    with pytest.raises(ValueError):
        adiabatic_map(a_st := adiabatic_map(pops), "eq8_consistent")  # noqa: F841
    with pytest.raises(ValueError):
        adiabatic_map(pops, "other")


def test_singlet_order_examples():
    uni = PairPopulations(np.full(4, 0.25), "singlet_triplet")
    assert singlet_order_from_populations(uni) == 0.0
    assert singlet_order_from_populations(PairPopulations(np.array([1.0, 0, 0, 0]), "singlet_triplet")) == 1.0
    op = adiabatic_map(high_field_populations(PolarizationPair(0, 0.006)))
    assert op.as_dict()["S0"] < np.mean([op.as_dict()[k] for k in ("T0", "T+1", "T-1")])
    assert singlet_order_from_populations(op) == pytest.approx(-0.002, abs=1e-15)
    with pytest.raises(ValueError):
        singlet_order_from_populations(high_field_populations(PolarizationPair(0, 0)))


def test_closed_form_examples():
    assert singlet_order_closed_form(PolarizationPair(0, 0)) == 0
    assert singlet_order_closed_form(PolarizationPair(0, 0.006)) == pytest.approx(-0.002)
    for p in (0.01, 0.3, 1.0):
        assert singlet_order_closed_form(PolarizationPair(p, p)) == pytest.approx(-p * p / 3)


unit = st.floats(-1, 1)


@settings(max_examples=500)
@given(unit, unit)
def test_population_path_equals_closed_form(pc, ph):
    p = PolarizationPair(pc, ph)
    st_pops = adiabatic_map(high_field_populations(p), "eq8_consistent")
    assert singlet_order_from_populations(st_pops) == pytest.approx(singlet_order_closed_form(p), abs=1e-12)


def test_printed_assignment_flips_the_difference_term():
    p = PolarizationPair(0.1, 0.4)
    got = singlet_order_from_populations(adiabatic_map(high_field_populations(p), "eq6_as_printed"))
    assert got == pytest.approx((p.p_H - p.p_C - p.p_C * p.p_H) / 3, abs=1e-15)


@pytest.mark.parametrize("shape", ["linear", "exponential", "tanh"])
def test_ramp_endpoints_and_monotone(shape):
    pr = RampProtocol(shape=shape)
    assert ramp_field(0.0, pr) == pytest.approx(pr.B_high, rel=1e-14)
    assert ramp_field(pr.t2, pr) == pytest.approx(pr.B_low, rel=1e-9)
    t = np.linspace(0, pr.t2, 1001)
    assert np.all(np.diff(ramp_field(t, pr)) < 0)
    for B in (0.1, 1e-3, 1e-5):
        assert ramp_field(time_at_field(B, pr), pr) == pytest.approx(B, rel=1e-9)


def test_ramp_linear_midpoint_and_range():
    pr = RampProtocol()
    assert ramp_field(pr.t2 / 2, pr) == pytest.approx((pr.B_high + pr.B_low) / 2)
    with pytest.raises(ValueError):
        ramp_field(-1e-3, pr)
    with pytest.raises(ValueError):
        ramp_field(pr.t2 * 1.01, pr)
    with pytest.raises(ValueError):
        RampProtocol(B_high=1e-6, B_low=0.36)


def _expm_oracle(protocol, spec, B0, steps):
    """Piecewise-constant propagation of the full 4x4 Hamiltonian (midpoint rule).

    Starts at field ``B0`` from the instantaneous eigenvectors there.
    """
    t0 = time_at_field(B0, protocol)
    ts = np.linspace(t0, protocol.t2, steps + 1)
    U = eigenlevels(spec.at(B0)).vectors.astype(complex)
    for a, b in zip(ts[:-1], ts[1:]):
        H = pair_hamiltonian(spec.at(ramp_field(0.5 * (a + b), protocol)))
        U = expm(-1j * TWO_PI * H * (b - a)) @ U
    lv = eigenlevels(spec.at(protocol.B_low))
    return np.abs(lv.vectors.T @ U) ** 2  # rows: final S0, T0, T+1, T-1; cols: initial branch


@pytest.mark.parametrize("shape, steps", [("linear", 20000), ("exponential", 40000)])
def test_ramp_against_expm_oracle(shape, steps):
    # Full 4x4 Hamiltonian, no block reduction, no ODE solver.
    pr = RampProtocol(t2=3e-3, shape=shape)
    r = propagate_ramp(UD, pr, SPEC, start_field_factor=1000)
    B0 = TWO_PI * 1000 * G / (SPEC.gamma_H - SPEC.gamma_C)
    P = _expm_oracle(pr, SPEC, B0, steps)
    # column 0 is the branch that starts as ud at high field
    assert r.leakage == pytest.approx(P[1, 0], abs=2e-5)
    np.testing.assert_allclose(r.populations.values, P[:, 0], atol=2e-5)


def test_ramp_conserves_population():
    for shape in ("linear", "exponential", "tanh"):
        r = propagate_ramp(UD, RampProtocol(shape=shape), SPEC)
        assert r.norm_error < 1e-9
        assert r.populations.values.sum() == pytest.approx(1.0, abs=1e-12)


def test_linear_leakage_decreases_with_duration():
    leaks = [propagate_ramp(UD, RampProtocol(t2=t2), SPEC).leakage for t2 in (3e-3, 3e-2, 0.3)]
    assert leaks[0] > leaks[1] > leaks[2]


def test_slow_near_anticrossing_is_adiabatic():
    # Log-linear ramp spends most of its time near the anti-crossing.
    r = propagate_ramp(UD, RampProtocol(shape="exponential"), SPEC)
    assert r.leakage < 1e-3
    assert r.populations.as_dict()["S0"] > 1 - 1e-3


def test_sudden_limit_matches_projection():
    pr = RampProtocol(t2=1e-12)
    r = propagate_ramp(UD, pr, SPEC)
    assert r.leakage == pytest.approx(sudden_leakage(pr, SPEC), abs=1e-9)
    # projection of the bare product state, up to the tiny high-field mixing
    delta = (SPEC.gamma_H - SPEC.gamma_C) * pr.B_low / TWO_PI
    assert sudden_leakage(pr, SPEC) == pytest.approx(math.sin(math.atan2(G, delta) / 2) ** 2, abs=2e-5)
    assert sudden_leakage(pr, SPEC) == pytest.approx(0.42830914758989763, rel=1e-9)


def test_sudden_limit_at_vanishing_low_field():
    pr = RampProtocol(B_low=1e-12, t2=1e-12)
    assert sudden_leakage(pr, SPEC) == pytest.approx(0.5, abs=2e-5)


def test_decoupled_pair_maps_identically():
    spec = PairHamiltonianSpec(g=0.0)
    r = propagate_ramp(UD, RampProtocol(t2=3e-3), spec)
    assert r.leakage == 0.0
    np.testing.assert_allclose(r.populations.values, [1, 0, 0, 0], atol=1e-12)


def test_start_field_does_not_matter():
    pr = RampProtocol(shape="exponential", t2=0.03)
    a = propagate_ramp(UD, pr, SPEC, start_field_factor=100).leakage
    b = propagate_ramp(UD, pr, SPEC, start_field_factor=400).leakage
    assert a == pytest.approx(b, abs=2e-6)


def test_amplitude_input():
    psi = np.array([0, 1, 0, 0], dtype=complex)
    r1 = propagate_ramp(psi, RampProtocol(t2=3e-3), SPEC)
    r2 = propagate_ramp(UD, RampProtocol(t2=3e-3), SPEC)
    np.testing.assert_allclose(r1.populations.values, r2.populations.values, atol=1e-12)


def test_landau_zener_formula():
    pr = RampProtocol(t2=0.3)
    sweep = TWO_PI * (SPEC.gamma_H - SPEC.gamma_C) / TWO_PI * (pr.B_high - pr.B_low) / pr.t2
    expected = math.exp(-TWO_PI * (math.pi * G) ** 2 / sweep)
    assert landau_zener_estimate(pr, SPEC) == pytest.approx(expected, rel=1e-12)
