"""Randomly oriented NV ensemble in a strong field.

Each NV axis makes an angle ``theta`` with the field. The orientation sets
the effective zero-field splitting, a second-order field shift, the optically
pumped initial state and the detuning from the microwave drive. Averages over
the ensemble use the uniform sphere measure; the integrands are azimuthally
symmetric so only ``u = cos(theta)`` is integrated, with Gauss-Legendre nodes
placed inside each sub-interval of the resonance window.
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np
from scipy.optimize import brentq

from .spectral import spectral_density
from .transfer import DriveSpec, NuclearSpecies, dressed_electron_frequency, reference_drive
from .units import GAMMA_E_HZ_PER_T, TWO_PI, angular

WindowKind = Literal["detuning", "angle"]

DEFAULT_NODES = 256
_SCAN_POINTS = 4001


@dataclass(frozen=True)
class NvEnsembleSpec:
    zfs_D: float = TWO_PI * 2.87e9
    strain_E: float = TWO_PI * 20e6
    gamma_e: float = angular(GAMMA_E_HZ_PER_T)
    Pe0: float = 0.125
    window: WindowKind = "detuning"
    threshold: float = TWO_PI * 10e6  # |delta'| bound, rad/s
    theta_window: tuple[float, float] = (math.radians(80.0), math.radians(100.0))

    def __post_init__(self):
        if not self.zfs_D > 0:
            raise ValueError("zfs_D must be positive")
        if not 0 <= self.Pe0 <= 1:
            raise ValueError("Pe0 must lie in [0, 1]")
        if self.window not in ("detuning", "angle"):
            raise ValueError(f"unknown window kind {self.window!r}")
        if not self.threshold > 0:
            raise ValueError("threshold must be positive")
        lo, hi = self.theta_window
        if not 0 <= lo < hi <= math.pi:
            raise ValueError("theta_window must satisfy 0 <= lo < hi <= pi")


@dataclass(frozen=True)
class AngularTerms:
    D_theta: np.ndarray
    G1: np.ndarray
    G2: np.ndarray
    delta_theta: np.ndarray


def angular_terms(theta, spec: NvEnsembleSpec, B: float) -> AngularTerms:
    """Orientation-dependent splitting, couplings and second-order shift."""
    theta = np.asarray(theta, dtype=float)
    D, E = spec.zfs_D, spec.strain_E
    c2 = np.cos(2 * theta)
    D_theta = (D * (1 + 3 * c2) + 3 * E * (1 - c2)) / 4
    G1 = (D - E) * np.sin(theta) * np.cos(theta) / math.sqrt(2)
    G2 = (D + 3 * E + (E - D) * c2) / 4
    wz = spec.gamma_e * B
    if not wz > 0:
        raise ValueError("B must be positive")
    gap = wz**2 - D_theta**2
    if np.any(np.abs(gap) <= 1e-9 * wz**2):
        raise ValueError(
            f"second-order shift is singular: electron Zeeman {wz:.6g} rad/s "
            "matches |D(theta)|; use a stronger field"
        )
    delta = wz * np.abs(G1) ** 2 / gap + np.abs(G2) ** 2 / (2 * wz)
    return AngularTerms(D_theta, G1, G2, delta)


def transition_frequency(theta, spec: NvEnsembleSpec, B: float):
    """|0> <-> |-1> transition, ``gamma_e*B + delta(theta) - D(theta)``."""
    t = angular_terms(theta, spec, B)
    return spec.gamma_e * B + t.delta_theta - t.D_theta


def detuning_profile(theta, drive: DriveSpec, spec: NvEnsembleSpec, B: float):
    """(epsilon(theta), delta'(theta)) with the drive resonant at 90 degrees."""
    w = transition_frequency(theta, spec, B)
    w90 = transition_frequency(math.pi / 2, spec, B)
    delta_prime = w - w90
    return drive.detuning0 + delta_prime, delta_prime


def optical_initial_state(theta, phi) -> np.ndarray:
    """Optically pumped state as amplitudes over (|+1>, |0>, |-1>)."""
    s = math.sin(theta) / math.sqrt(2)
    return np.array([s * np.exp(1j * phi), math.cos(theta), -s * np.exp(-1j * phi)], dtype=complex)


def _in_window(theta, spec, drive, B):
    theta = np.asarray(theta, dtype=float)
    if spec.window == "angle":
        lo, hi = spec.theta_window
        return (theta >= lo) & (theta <= hi)
    _, dp = detuning_profile(theta, drive, spec, B)
    return np.abs(dp) < spec.threshold


def electron_polarization(theta, spec: NvEnsembleSpec, drive: DriveSpec | None = None,
                          B: float = 0.36):
    """Initial NV polarization: ``Pe0`` inside the resonance window, else 0."""
    if drive is None:
        drive = reference_drive()
    inside = _in_window(theta, spec, drive, B)
    out = np.where(inside, spec.Pe0, 0.0)
    return float(out) if out.ndim == 0 else out


def window_intervals(spec: NvEnsembleSpec, B: float, drive: DriveSpec) -> list[tuple[float, float]]:
    """Sub-intervals of ``u = cos(theta)`` inside the window, ascending."""
    if spec.window == "angle":
        lo, hi = spec.theta_window
        return [(math.cos(hi), math.cos(lo))]

    def excess(u):
        _, dp = detuning_profile(np.arccos(np.clip(u, -1, 1)), drive, spec, B)
        return np.abs(dp) - spec.threshold

    u = np.linspace(-1.0, 1.0, _SCAN_POINTS)
    f = excess(u)
    inside = f < 0
    intervals = []
    start = -1.0 if inside[0] else None
    for k in range(1, len(u)):
        if inside[k] == inside[k - 1]:
            continue
        edge = brentq(lambda x: float(excess(x)), u[k - 1], u[k], xtol=1e-15, rtol=1e-15)
        if inside[k]:
            start = edge
        else:
            intervals.append((start, edge))
            start = None
    if start is not None:
        intervals.append((start, 1.0))
    return intervals


@lru_cache(maxsize=16)
def _legendre(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def _nodes(intervals, n):
    """Gauss-Legendre nodes/weights in u over ``(a, b, cusp_a, cusp_b)`` pieces.

    A piece flagged with a square-root cusp at an end is mapped through
    ``u = end +/- (b - a) t**2`` so the integrand becomes smooth in ``t``.
    """
    x, w = _legendre(n)
    t, wt = 0.5 * (x + 1), 0.5 * w
    us, ws = [], []
    for piece in intervals:
        a, b, left, right = piece if len(piece) == 4 else (*piece, False, False)
        if left and right:
            m = 0.5 * (a + b)
            pieces = [(a, m, True, False), (m, b, False, True)]
        else:
            pieces = [(a, b, left, right)]
        for a, b, left, right in pieces:
            h = b - a
            if left:
                us.append(a + h * t**2)
                ws.append(2 * h * t * wt)
            elif right:
                us.append(b - h * t**2)
                ws.append(2 * h * t * wt)
            else:
                us.append(a + h * t)
                ws.append(h * wt)
    if not us:
        return np.empty(0), np.empty(0)
    return np.concatenate(us), np.concatenate(ws)


def _split_at_matching(intervals, spec, drive, B, omega_i):
    """Split window pieces where the dressed electron frequency equals ``omega_i``."""

    def mismatch(u):
        eps, _ = detuning_profile(np.arccos(np.clip(u, -1, 1)), drive, spec, B)
        return dressed_electron_frequency(drive, eps) - omega_i

    out = []
    for a, b in intervals:
        u = np.linspace(a, b, 2001)
        f = mismatch(u)
        cuts = [a]
        for k in range(1, len(u)):
            if f[k] == 0 or np.sign(f[k]) == np.sign(f[k - 1]):
                continue
            cuts.append(brentq(lambda x: float(mismatch(x)), u[k - 1], u[k], xtol=1e-15, rtol=1e-15))
        cuts.append(b)
        for k in range(len(cuts) - 1):
            out.append((cuts[k], cuts[k + 1], k > 0, k < len(cuts) - 2))
    return out


def window_fraction(spec: NvEnsembleSpec, B: float, drive: DriveSpec, threshold: float | None = None,
                    nodes: int = DEFAULT_NODES) -> float:
    """Fraction of the uniform sphere inside the resonance window."""
    if threshold is not None:
        if not threshold > 0:
            raise ValueError("threshold must be positive")
        if math.isinf(threshold):
            return 1.0
        spec = replace(spec, window="detuning", threshold=threshold)
    _, w = _nodes(window_intervals(spec, B, drive), nodes)
    return float(w.sum() / 2.0)


def ensemble_average_rate(species: NuclearSpecies, tau_c: float, spec: NvEnsembleSpec,
                          drive: DriveSpec, B: float, c0_rate: float,
                          nodes: int = DEFAULT_NODES) -> float:
    """Solid-angle average of ``W_i(theta) * P_e(theta)`` over the window.

    The orientation enters through ``eps(theta) = eps0 + delta'(theta)``,
    which moves the dressed electron frequency. Where that frequency crosses
    the nuclear Larmor frequency the matching density has a square-root cusp;
    the quadrature is split there.
    """
    intervals = window_intervals(spec, B, drive)
    if not intervals:
        raise ValueError("resonance window is empty; no orientations to average over")
    w_i = float(species.larmor(B))
    u, w = _nodes(_split_at_matching(intervals, spec, drive, B, w_i), nodes)
    theta = np.arccos(u)
    eps, _ = detuning_profile(theta, drive, spec, B)
    w_e = dressed_electron_frequency(drive, eps)
    rate = c0_rate * (spectral_density(np.abs(w_e - w_i), tau_c) - spectral_density(w_e + w_i, tau_c))
    # Pe is constant on the window by construction of the step model.
    return float(np.dot(w, rate * spec.Pe0) / w.sum())

