"""Bulk nuclear polarization of the flowing solvent.

Polarization diffusion is neglected: each species accumulates
``(N_e / N_i) * W_eff * t1`` during its residence time in the gel.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .nv_orientation import NvEnsembleSpec, ensemble_average_rate
from .transfer import DriveSpec, NuclearSpecies

# Published N_e/N used to anchor the default NV yield per nanodiamond.
PUBLISHED_NE_RATIO = 1.6e-6
SPHERE_PACKING_LIMIT = 0.74


class LinearModelWarning(UserWarning):
    """Linear build-up model pushed past |p| = 1."""


def _geometric_ratio(nd_diameter, nd_volume_fraction, pair_density):
    nd_volume = 4.0 / 3.0 * math.pi * (nd_diameter / 2) ** 3
    return nd_volume_fraction / nd_volume / pair_density


@dataclass(frozen=True)
class FlowGeometry:
    channel_diameter: float = 1e-3
    gel_length: float = 1e-3
    nd_diameter: float = 10e-9
    nd_volume_fraction: float = 0.12
    nv_yield_per_nd: float = PUBLISHED_NE_RATIO / _geometric_ratio(10e-9, 0.12, 13e27)
    pair_density: float = 13e27  # 1/m^3
    flow_rate: float = 1e-3
    residence_time: float | None = None  # defaults to gel_length / flow_rate

    def __post_init__(self):
        for name in ("channel_diameter", "gel_length", "nd_diameter", "nd_volume_fraction",
                     "nv_yield_per_nd", "pair_density", "flow_rate"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"{name} must be positive and finite, got {v}")
        if self.nd_volume_fraction >= SPHERE_PACKING_LIMIT:
            raise ValueError("nd_volume_fraction exceeds the close-packing bound 0.74")
        if self.residence_time is not None and not self.residence_time >= 0:
            raise ValueError("residence_time must be non-negative")

    @property
    def t1(self) -> float:
        if self.residence_time is not None:
            return self.residence_time
        return self.gel_length / self.flow_rate

    @property
    def geometric_ratio(self) -> float:
        """N_e/N assuming one NV per nanodiamond."""
        return _geometric_ratio(self.nd_diameter, self.nd_volume_fraction, self.pair_density)


@dataclass(frozen=True)
class PolarizationPair:
    p_C: float
    p_H: float

    def __post_init__(self):
        for name in ("p_C", "p_H"):
            v = getattr(self, name)
            if not -1 <= v <= 1:
                raise ValueError(f"{name} must lie in [-1, 1], got {v}")


def nv_to_nuclear_ratio(geom: FlowGeometry) -> float:
    """Number of NV spins per target nuclear spin in the polarizing region."""
    return geom.geometric_ratio * geom.nv_yield_per_nd


def bulk_polarization(w_eff: float, ratio: float, t1: float) -> float:
    if t1 < 0:
        raise ValueError("t1 must be non-negative")
    p = w_eff * ratio * t1
    if abs(p) > 1:
        warnings.warn(f"linear build-up gives |p| = {abs(p):.3g} > 1; clamped", LinearModelWarning,
                      stacklevel=2)
        p = math.copysign(1.0, p)
    return p


@dataclass(frozen=True)
class BuildupModel:
    """Everything the build-up needs besides tau_c and the rate constant."""

    hydrogen: NuclearSpecies
    carbon: NuclearSpecies
    nv: NvEnsembleSpec
    drive: DriveSpec
    geometry: FlowGeometry
    B: float = 0.36

    def averaged_rate(self, species: NuclearSpecies, tau_c: float, c0_rate: float) -> float:
        return ensemble_average_rate(species, tau_c, self.nv, self.drive, self.B, c0_rate)

    def polarizations(self, tau_c: float, c0_rate: float) -> PolarizationPair:
        ratio = nv_to_nuclear_ratio(self.geometry)
        t1 = self.geometry.t1
        p_H = bulk_polarization(self.averaged_rate(self.hydrogen, tau_c, c0_rate), ratio, t1)
        p_C = bulk_polarization(self.averaged_rate(self.carbon, tau_c, c0_rate), ratio, t1)
        return PolarizationPair(p_C=p_C, p_H=p_H)


def polarization_sweep(tau_c_grid, model: BuildupModel, c0_rate: float, threads: int = 1) -> np.ndarray:
    """Rows of ``(tau_c, p_H, p_C)``, in grid order."""
    grid = np.asarray(tau_c_grid, dtype=float)
    if grid.size == 0:
        raise ValueError("tau_c grid is empty")

    def row(tc):
        p = model.polarizations(float(tc), c0_rate)
        return (float(tc), p.p_H, p.p_C)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, grid))
    else:
        rows = [row(tc) for tc in grid]
    return np.array(rows)


def calibrate_c0(target_pH: float, tau_c: float, model: BuildupModel) -> float:
    """Rate constant for which the bulk 1H polarization equals ``target_pH``."""
    unit = model.averaged_rate(model.hydrogen, tau_c, 1.0)
    denom = unit * nv_to_nuclear_ratio(model.geometry) * model.geometry.t1
    if denom == 0:
        raise ValueError("averaged spectral difference vanishes; no rate constant reaches the target")
    c0 = target_pH / denom
    if c0 < 0:
        raise ValueError(f"target {target_pH} needs a negative rate constant")
    return c0
