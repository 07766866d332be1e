"""The scalar-coupled 13C-1H pair during the field ramp.

Product basis order is (uu, ud, du, dd) with the carbon spin first. The
singlet-triplet basis is (S0, T0, T+1, T-1). Energies are in Hz.

The Hamiltonian conserves the total z-projection, so only the zero-quantum
block {ud, du} evolves non-trivially during a field ramp; T+1 = uu and
T-1 = dd are eigenstates at every field.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .buildup import PolarizationPair
from .units import GAMMA_C_HZ_PER_T, GAMMA_H_HZ_PER_T, TWO_PI, angular

Basis = Literal["product", "singlet_triplet"]
Convention = Literal["eq6_as_printed", "eq8_consistent"]
Shape = Literal["linear", "exponential", "tanh"]

PRODUCT_LABELS = ("uu", "ud", "du", "dd")
ST_LABELS = ("S0", "T0", "T+1", "T-1")
CONVENTIONS = ("eq6_as_printed", "eq8_consistent")
SHAPES = ("linear", "exponential", "tanh")

_TANH_STEEPNESS = 3.0
# Largest non-adiabatic coupling / gap accepted at the integration start.
ADIABATIC_START_LIMIT = 1e-2


class NumericalError(RuntimeError):
    """Integrator failure during ramp propagation."""


@dataclass(frozen=True)
class PairHamiltonianSpec:
    g: float = 220.0  # Hz
    gamma_C: float = angular(GAMMA_C_HZ_PER_T)  # rad/(s T)
    gamma_H: float = angular(GAMMA_H_HZ_PER_T)
    B: float = 0.0

    def __post_init__(self):
        if not self.g >= 0:
            raise ValueError("g must be non-negative")
        if not (self.gamma_C > 0 and self.gamma_H > 0):
            raise ValueError("gyromagnetic ratios must be positive")
        if not self.B >= 0:
            raise ValueError("B must be non-negative")

    def at(self, B: float) -> "PairHamiltonianSpec":
        return PairHamiltonianSpec(self.g, self.gamma_C, self.gamma_H, B)

    def zeeman_difference(self, B=None):
        """(gamma_H - gamma_C) B / 2pi in Hz: the zero-quantum diagonal splitting."""
        B = self.B if B is None else B
        return (self.gamma_H - self.gamma_C) * np.asarray(B, dtype=float) / TWO_PI

    def regime(self) -> str:
        ratio = min(self.gamma_C, self.gamma_H) * self.B / TWO_PI / self.g if self.g > 0 else math.inf
        if ratio >= 100:
            return "high"
        if ratio <= 0.01:
            return "low"
        return "intermediate"


_SX = np.array([[0, 1], [1, 0]], dtype=complex) / 2
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex) / 2
_SZ = np.array([[1, 0], [0, -1]], dtype=complex) / 2
_I2 = np.eye(2)


def pair_hamiltonian(spec: PairHamiltonianSpec) -> np.ndarray:
    """4x4 Hamiltonian in Hz, product basis."""
    coupling = sum(np.kron(s, s) for s in (_SX, _SY, _SZ))
    zeeman = (spec.gamma_C * np.kron(_SZ, _I2) + spec.gamma_H * np.kron(_I2, _SZ)) * spec.B / TWO_PI
    return spec.g * coupling + zeeman


def _mixing_angle(g, delta):
    # Angle of the zero-quantum eigenvectors: 0 at high field, pi/2 at zero field.
    return np.arctan2(g, delta)


def _zq_vectors(beta):
    """Lower and upper zero-quantum eigenvectors in the (ud, du) basis."""
    c, s = np.cos(beta / 2), np.sin(beta / 2)
    return np.array([c, -s]), np.array([s, c])


@dataclass(frozen=True)
class Eigenlevels:
    """Energies (Hz) and eigenvectors (columns, product basis) labeled S0, T0, T+1, T-1.

    Labels follow each level continuously from zero field: the lower
    zero-quantum branch is singlet-correlated for g > 0.
    """

    labels: tuple[str, ...]
    energies: np.ndarray
    vectors: np.ndarray

    @property
    def singlet_character(self) -> np.ndarray:
        s0 = np.array([0, 1, -1, 0]) / math.sqrt(2)
        return np.abs(s0 @ self.vectors) ** 2


def eigenlevels(spec: PairHamiltonianSpec) -> Eigenlevels:
    g = spec.g
    delta = float(spec.zeeman_difference())
    rho = math.hypot(delta, g)
    lower, upper = _zq_vectors(_mixing_angle(g, delta))
    sum_z = (spec.gamma_C + spec.gamma_H) * spec.B / TWO_PI / 2
    energies = np.array([-g / 4 - rho / 2, -g / 4 + rho / 2, g / 4 + sum_z, g / 4 - sum_z])
    vecs = np.zeros((4, 4))
    vecs[1:3, 0] = lower
    vecs[1:3, 1] = upper
    vecs[0, 2] = 1.0
    vecs[3, 3] = 1.0
    return Eigenlevels(ST_LABELS, energies, vecs)


@dataclass(frozen=True)
class PairPopulations:
    values: np.ndarray
    basis: Basis

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (4,):
            raise ValueError("populations need exactly four entries")
        if self.basis not in ("product", "singlet_triplet"):
            raise ValueError(f"unknown basis {self.basis!r}")
        if np.any(v < -1e-12) or np.any(v > 1 + 1e-12):
            raise ValueError(f"populations out of [0, 1]: {v}")
        if abs(v.sum() - 1) > 1e-12:
            raise ValueError(f"populations sum to {v.sum()!r}, not 1")
        object.__setattr__(self, "values", v)

    @property
    def labels(self):
        return PRODUCT_LABELS if self.basis == "product" else ST_LABELS

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.labels, map(float, self.values)))


def high_field_populations(p: PolarizationPair) -> PairPopulations:
    pc, ph = p.p_C, p.p_H
    vals = 0.25 * np.array([(1 + pc) * (1 + ph), (1 + pc) * (1 - ph), (1 - pc) * (1 + ph), (1 - pc) * (1 - ph)])
    return PairPopulations(vals, "product")


def adiabatic_map(pops: PairPopulations, convention: Convention = "eq8_consistent") -> PairPopulations:
    """Relabel high-field product populations onto the low-field eigenstates.

    ``eq8_consistent`` sends ud -> S0 and du -> T0 (the lower zero-quantum
    branch is ud when the Zeeman term enters with a positive sign);
    ``eq6_as_printed`` swaps the two.
    """
    if pops.basis != "product":
        raise ValueError("adiabatic_map expects product-basis populations")
    uu, ud, du, dd = pops.values
    if convention == "eq8_consistent":
        s0, t0 = ud, du
    elif convention == "eq6_as_printed":
        s0, t0 = du, ud
    else:
        raise ValueError(f"unknown convention {convention!r}; expected one of {CONVENTIONS}")
    return PairPopulations(np.array([s0, t0, uu, dd]), "singlet_triplet")


def singlet_order_from_populations(pops: PairPopulations) -> float:
    """Singlet population minus the mean of the three triplet populations."""
    if pops.basis != "singlet_triplet":
        raise ValueError("singlet order needs singlet-triplet populations")
    s0, t0, tp, tm = pops.values
    return float(s0 - (t0 + tp + tm) / 3)


def singlet_order_closed_form(p: PolarizationPair) -> float:
    return (p.p_C - p.p_H - p.p_C * p.p_H) / 3


@dataclass(frozen=True)
class RampProtocol:
    B_high: float = 0.36
    B_low: float = 1e-6
    t2: float = 0.3
    shape: Shape = "linear"

    def __post_init__(self):
        if not self.B_high > self.B_low > 0:
            raise ValueError("need B_high > B_low > 0")
        if not self.t2 > 0:
            raise ValueError("t2 must be positive")
        if self.shape not in SHAPES:
            raise ValueError(f"unknown ramp shape {self.shape!r}; expected one of {SHAPES}")


def _tanh_profile(s):
    k = _TANH_STEEPNESS
    return (np.tanh(k * (1 - 2 * s)) + math.tanh(k)) / (2 * math.tanh(k))


def ramp_field(t, protocol: RampProtocol):
    """Field (T) at time ``t`` in ``[0, t2]``; decreasing from B_high to B_low."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0) or np.any(t_arr > protocol.t2):
        raise ValueError(f"t must lie in [0, {protocol.t2}]")
    s = t_arr / protocol.t2
    hi, lo = protocol.B_high, protocol.B_low
    if protocol.shape == "linear":
        B = hi + (lo - hi) * s
    elif protocol.shape == "exponential":
        B = hi * (lo / hi) ** s
    else:
        B = lo + (hi - lo) * _tanh_profile(s)
    if B.ndim == 0:
        return float(B)
    return B


def ramp_rate(t, protocol: RampProtocol) -> float:
    """dB/dt in T/s."""
    s = t / protocol.t2
    hi, lo = protocol.B_high, protocol.B_low
    if protocol.shape == "linear":
        return (lo - hi) / protocol.t2
    if protocol.shape == "exponential":
        return ramp_field(t, protocol) * math.log(lo / hi) / protocol.t2
    k = _TANH_STEEPNESS
    return (hi - lo) * (-2 * k / math.cosh(k * (1 - 2 * s)) ** 2) / (2 * math.tanh(k)) / protocol.t2


def time_at_field(B: float, protocol: RampProtocol) -> float:
    """Inverse of ramp_field; clamps to the ramp ends."""
    if B >= protocol.B_high:
        return 0.0
    if B <= protocol.B_low:
        return protocol.t2
    if protocol.shape == "linear":
        return protocol.t2 * (protocol.B_high - B) / (protocol.B_high - protocol.B_low)
    if protocol.shape == "exponential":
        return protocol.t2 * math.log(B / protocol.B_high) / math.log(protocol.B_low / protocol.B_high)
    return brentq(lambda t: ramp_field(t, protocol) - B, 0.0, protocol.t2, xtol=1e-15 * protocol.t2)


def landau_zener_estimate(protocol: RampProtocol, spec: PairHamiltonianSpec) -> float:
    """Diabatic probability exp(-2 pi V^2 / |d(gap)/dt|), angular units.

    V = pi g is half the zero-field splitting; the sweep rate is taken where
    the Zeeman difference equals g.
    """
    if spec.g == 0:
        return 1.0
    dgamma = spec.gamma_H - spec.gamma_C
    B_x = TWO_PI * spec.g / dgamma
    t_x = time_at_field(B_x, protocol)
    sweep = abs(dgamma * ramp_rate(t_x, protocol))  # rad/s^2
    V = math.pi * spec.g
    return math.exp(-TWO_PI * V**2 / sweep)


def _target_is_lower(spec: PairHamiltonianSpec) -> bool:
    # ud is the lower high-field branch when the Zeeman difference is positive.
    return spec.gamma_H >= spec.gamma_C


@dataclass
class RampResult:
    populations: PairPopulations  # low-field eigenbasis, labeled S0/T0/T+1/T-1
    leakage: float
    norm_error: float
    t_start: float
    B_start: float
    adiabaticity_start: float
    landau_zener: float
    transfer_matrix: np.ndarray = field(repr=False)  # |<branch k | U | diabat j>|^2


def sudden_leakage(protocol: RampProtocol, spec: PairHamiltonianSpec) -> float:
    """Leakage for an instantaneous jump from B_high to B_low.

    The prepared state is the B_high eigenstate on the ud branch.
    """
    beta_hi = _mixing_angle(spec.g, float(spec.zeeman_difference(protocol.B_high)))
    beta_lo = _mixing_angle(spec.g, float(spec.zeeman_difference(protocol.B_low)))
    return float(np.sin((beta_lo - beta_hi) / 2) ** 2)


def _adiabaticity(spec, B, dBdt):
    # |d(beta)/dt| / 2 over the angular gap; << 1 means adiabatic.
    delta = float(spec.zeeman_difference(B))
    rho = math.hypot(delta, spec.g)
    if rho == 0:
        return math.inf
    ddelta = (spec.gamma_H - spec.gamma_C) * dBdt / TWO_PI
    return abs(spec.g * ddelta) / rho**2 / 2 / (TWO_PI * rho)


def propagate_ramp(initial, protocol: RampProtocol, spec: PairHamiltonianSpec | None = None,
                   start_field_factor: float = 100.0, rtol: float = 1e-11,
                   atol: float = 1e-13) -> RampResult:
    """Integrate the zero-quantum block through the field ramp.

    Parameters
    ----------
    initial : PairPopulations or array_like
        Product-basis populations (incoherent) or a 4-component amplitude
        vector in the product basis.
    start_field_factor : float
        Integration starts where the Zeeman difference equals this multiple
        of g; above it the populations are frozen by the adiabatic theorem.

    Returns
    -------
    RampResult
        Final populations in the instantaneous eigenbasis at ``B_low`` and
        the probability that a high-field product state ends up in the
        branch it does not adiabatically connect to.
    """
    spec = PairHamiltonianSpec() if spec is None else spec
    dgamma = spec.gamma_H - spec.gamma_C
    B_start = min(protocol.B_high, TWO_PI * start_field_factor * spec.g / abs(dgamma)) if spec.g > 0 \
        else protocol.B_high
    t_start = time_at_field(B_start, protocol)
    B_start = ramp_field(t_start, protocol)
    if _adiabaticity(spec, B_start, ramp_rate(t_start, protocol)) > ADIABATIC_START_LIMIT:
        # Too fast for the adiabatic theorem to cover the skipped part.
        t_start, B_start = 0.0, protocol.B_high

    g_ang = TWO_PI * spec.g

    def rhs(t, y):
        d = TWO_PI * float(spec.zeeman_difference(ramp_field(min(t, protocol.t2), protocol)))
        U = y.reshape(2, 2)
        # Trace (-g/4) dropped: a common phase of the block.
        H = np.array([[-d / 2, g_ang / 2], [g_ang / 2, d / 2]])
        return (-1j * H @ U).ravel()

    # Above B_start each product state has followed its adiabatic branch, so
    # the columns start as the instantaneous eigenvectors (ud -> its branch).
    lo0, up0 = _zq_vectors(_mixing_angle(spec.g, float(spec.zeeman_difference(B_start))))
    if _target_is_lower(spec):
        U0 = np.column_stack([lo0, up0]).astype(complex).ravel()
    else:
        U0 = np.column_stack([up0, lo0]).astype(complex).ravel()
    if t_start < protocol.t2 and spec.g > 0:
        sol = solve_ivp(rhs, (t_start, protocol.t2), U0, method="DOP853", rtol=rtol, atol=atol)
        if not sol.success:
            span = protocol.t2 - t_start
            stiffness = TWO_PI * math.hypot(float(spec.zeeman_difference(B_start)), spec.g) * span
            raise NumericalError(f"ramp integration failed ({sol.message}); "
                                 f"phase accumulated over the span ~ {stiffness:.3g} rad")
        U = sol.y[:, -1].reshape(2, 2)
    else:
        U = U0.reshape(2, 2)

    norm_error = float(np.max(np.abs(np.sum(np.abs(U) ** 2, axis=0) - 1)))

    beta_low = _mixing_angle(spec.g, float(spec.zeeman_difference(protocol.B_low)))
    lower, upper = _zq_vectors(beta_low)
    branches = np.vstack([lower, upper])  # rows: (S-correlated, T0-correlated)
    amp = branches @ U  # <branch k | U | diabat j>
    T = np.abs(amp) ** 2
    target_lower = _target_is_lower(spec)
    leakage = float(T[1, 0] if target_lower else T[0, 0])

    if isinstance(initial, PairPopulations):
        if initial.basis != "product":
            raise ValueError("propagate_ramp expects product-basis populations")
        uu, ud, du, dd = initial.values
        zq = T @ np.array([ud, du])
    else:
        psi = np.asarray(initial, dtype=complex)
        if psi.shape != (4,):
            raise ValueError("amplitude state needs four components")
        psi = psi / np.linalg.norm(psi)
        uu, dd = abs(psi[0]) ** 2, abs(psi[3]) ** 2
        zq = np.abs(amp @ psi[1:3]) ** 2
    vals = np.array([zq[0], zq[1], uu, dd])
    vals = vals / vals.sum()
    pops = PairPopulations(vals, "singlet_triplet")

    adi = _adiabaticity(spec, B_start, ramp_rate(t_start, protocol))
    return RampResult(pops, leakage, norm_error, t_start, B_start, adi,
                      landau_zener_estimate(protocol, spec), T)


def level_diagram(B_grid: Sequence[float], spec: PairHamiltonianSpec | None = None) -> np.ndarray:
    """Rows of (B, E_S0, E_T0, E_T+1, E_T-1, sc_S0, sc_T0, sc_T+1, sc_T-1)."""
    spec = PairHamiltonianSpec() if spec is None else spec
    rows = []
    for B in B_grid:
        lv = eigenlevels(spec.at(float(B)))
        rows.append([float(B), *lv.energies, *lv.singlet_character])
    return np.array(rows)
