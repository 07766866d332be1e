"""Steady-state nuclear polarization transfer and transfer rates.

The dressed electron frequency of the driven NV is ``sqrt(eps**2 + rabi**2)``.
Nuclear spin ``i`` is polarized through the matching (``omega_E - omega_i``)
and mismatch (``omega_E + omega_i``) spectral densities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .spectral import spectral_density
from .units import GAMMA_C_HZ_PER_T, GAMMA_H_HZ_PER_T, TWO_PI, angular

Mode = Literal["as_written", "corrected"]
MODES = ("as_written", "corrected")


@dataclass(frozen=True)
class DriveSpec:
    """Continuous microwave drive, angular units (rad/s)."""

    rabi: float
    detuning0: float

    def __post_init__(self):
        if not (math.isfinite(self.rabi) and self.rabi > 0):
            raise ValueError(f"rabi must be positive, got {self.rabi}")
        if not math.isfinite(self.detuning0):
            raise ValueError("detuning0 must be finite")

    @property
    def c0_drive(self) -> float:
        """Drive ratio ``2 * cot(phi) = 2 * eps / rabi``."""
        return drive_ratio(self.detuning0, self.rabi)

    def with_detuning(self, detuning: float) -> "DriveSpec":
        return replace(self, detuning0=detuning)


def drive_ratio(detuning, rabi):
    # |eps| keeps the denominator of the steady state positive when an
    # orientation pushes the effective detuning through zero.
    return 2.0 * np.abs(detuning) / rabi


@dataclass(frozen=True)
class NuclearSpecies:
    label: str
    gamma: float  # rad/(s T)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma for {self.label} must be positive")

    def larmor(self, B):
        return self.gamma * np.asarray(B, dtype=float)


H1 = NuclearSpecies("H1", angular(GAMMA_H_HZ_PER_T))
C13 = NuclearSpecies("C13", angular(GAMMA_C_HZ_PER_T))


@dataclass(frozen=True)
class TransferFrequencies:
    omega_E: float
    omega_0: float
    omega_2: float


def dressed_electron_frequency(drive: DriveSpec, detuning=None):
    """``sqrt(eps**2 + rabi**2)``; ``detuning`` overrides ``drive.detuning0``."""
    eps = drive.detuning0 if detuning is None else detuning
    return np.hypot(eps, drive.rabi)


def transfer_frequencies(species: NuclearSpecies, B: float, drive: DriveSpec) -> TransferFrequencies:
    if not B > 0:
        raise ValueError("B must be positive")
    w_e = float(dressed_electron_frequency(drive))
    w_i = float(species.larmor(B))
    return TransferFrequencies(w_e, w_e - w_i, w_e + w_i)


def steady_state_polarization(j0, j2, j_mid, c0, mode: Mode = "corrected"):
    """Steady-state polarization transferred to one nuclear species.

    ``mode="as_written"`` keeps the doubled matching term in the
    denominator, ``"corrected"`` uses the mismatch term instead.
    """
    j0, j2, j_mid, c0 = (np.asarray(x, dtype=float) for x in (j0, j2, j_mid, c0))
    for name, arr in (("j0", j0), ("j2", j2), ("j_mid", j_mid), ("c0", c0)):
        if np.any(np.isnan(arr)):
            raise ValueError(f"{name} is NaN")
    if np.any(c0 < 0):
        raise ValueError("c0 must be non-negative")
    if mode == "corrected":
        last = j2
    elif mode == "as_written":
        last = j0
    else:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    out = -(j0 - j2) / (j0 + c0 * j_mid + last)
    return float(out) if out.ndim == 0 else out


def spectral_difference(omega_e, omega_i, tau_c):
    """J(|omega_E - omega_i|) - J(omega_E + omega_i), broadcasting."""
    omega_e = np.asarray(omega_e, dtype=float)
    return spectral_density(np.abs(omega_e - omega_i), tau_c) - spectral_density(omega_e + omega_i, tau_c)


def species_polarization(species: NuclearSpecies, B: float, drive: DriveSpec, tau_c,
                         mode: Mode = "corrected", detuning=None):
    """Steady-state polarization of ``species`` vs ``tau_c`` (broadcasts).

    ``detuning`` (rad/s, may be an array) replaces the drive detuning, which
    shifts both the dressed frequency and the drive ratio.
    """
    if not B > 0:
        raise ValueError("B must be positive")
    eps = drive.detuning0 if detuning is None else np.asarray(detuning, dtype=float)
    w_e = dressed_electron_frequency(drive, eps)
    w_i = float(species.larmor(B))
    j0 = spectral_density(np.abs(w_e - w_i), tau_c)
    j2 = spectral_density(w_e + w_i, tau_c)
    jm = spectral_density(w_i, tau_c)
    return steady_state_polarization(j0, j2, jm, drive_ratio(eps, drive.rabi), mode)


def transfer_rate(j0, j2, c0_rate):
    """Polarization transfer rate ``c0_rate * (j0 - j2)`` in 1/s."""
    out = c0_rate * (np.asarray(j0, dtype=float) - np.asarray(j2, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def reference_drive() -> DriveSpec:
    """Rabi frequency and detuning both (2pi) 8*sqrt(2) MHz."""
    w = TWO_PI * 8 * math.sqrt(2) * 1e6
    return DriveSpec(rabi=w, detuning0=w)
