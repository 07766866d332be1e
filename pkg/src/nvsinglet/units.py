"""Physical constants and unit helpers.

Frequencies inside the package are angular (rad/s). Config files carry
cyclic values (Hz, Hz/T) and are converted once on load.
"""
import math

TWO_PI = 2 * math.pi

# Gyromagnetic ratios / 2pi, Hz/T (standard tables).
GAMMA_H_HZ_PER_T = 42.577e6
GAMMA_C_HZ_PER_T = 10.708e6
GAMMA_E_HZ_PER_T = 28.024e9

NS = 1e-9
MHZ = 1e6
GHZ = 1e9


def angular(f_hz):
    """Cyclic Hz -> rad/s."""
    return TWO_PI * f_hz


def cyclic(omega):
    """rad/s -> cyclic Hz."""
    return omega / TWO_PI
