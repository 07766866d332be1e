"""Electron-nuclear cross-relaxation spectral density.

All frequencies are angular (rad/s). The density is evaluated in the
dimensionless variable ``xi = omega * tau_c``.
"""
from __future__ import annotations

import numpy as np

# Beyond this the cubic term overflows long before the result leaves 0.
XI_ASYMPTOTIC = 1e12

_SQRT_I = np.exp(1j * np.pi / 4)


def _check(name: str, value) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return arr


def spectral_density_xi(xi):
    """Spectral density as a function of ``xi = omega * tau_c``.

    Uses the principal square root, ``sqrt(i*xi) = exp(i*pi/4) * sqrt(xi)``.
    """
    xi = _check("xi", xi)
    if np.any(xi < 0):
        raise ValueError("xi must be non-negative")
    big = xi > XI_ASYMPTOTIC
    s = _SQRT_I * np.sqrt(np.where(big, 0.0, xi))
    val = ((1 + s / 4) / (1 + s + 4 * s**2 / 9 + s**3 / 9)).real
    val = np.where(big, 0.0, val)
    return float(val) if val.ndim == 0 else val


def spectral_density(omega, tau_c):
    """J(omega) for correlation time ``tau_c``.

    Parameters
    ----------
    omega : float or array
        Angular frequency in rad/s, ``>= 0``.
    tau_c : float or array
        Correlation time in s, ``> 0``.
    """
    omega = _check("omega", omega)
    tau_c = _check("tau_c", tau_c)
    if np.any(omega < 0):
        raise ValueError("omega must be non-negative")
    if np.any(tau_c <= 0):
        raise ValueError("tau_c must be strictly positive")
    return spectral_density_xi(omega * tau_c)


def spectral_density_pair(omega_0, omega_2, tau_c):
    """(J(omega_0), J(omega_2)) at a common correlation time."""
    return spectral_density(omega_0, tau_c), spectral_density(omega_2, tau_c)
