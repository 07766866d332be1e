"""Run configuration: JSON file <-> validated model objects.

Config files use cyclic units (Hz, Hz/T) and SI lengths; everything is
converted to angular frequencies once, here. Omitted keys take the published
operating point. Unknown keys are rejected.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .buildup import BuildupModel, FlowGeometry, PUBLISHED_NE_RATIO, _geometric_ratio
from .nv_orientation import NvEnsembleSpec
from .pair_dynamics import CONVENTIONS, SHAPES, PairHamiltonianSpec, RampProtocol
from .transfer import MODES, DriveSpec, NuclearSpecies
from .units import GAMMA_C_HZ_PER_T, GAMMA_E_HZ_PER_T, GAMMA_H_HZ_PER_T, angular


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


PUBLISHED = "published operating point"
TABLE = "standard constant table"
DERIVED = "derived"
CHOICE = "tool default"

_RABI_HZ = 8 * math.sqrt(2) * 1e6

# section -> key -> (default, kind, origin)
# kind: "pos" > 0, "nonneg" >= 0, "frac" in [0, 1], "real", "str:<a|b>", "grid", "list", "opt_pos"
SCHEMA: dict[str, dict[str, tuple[Any, str, str]]] = {
    "sample": {
        "g_hz": (220.0, "pos", PUBLISHED),
        "gamma_h_hz_per_t": (GAMMA_H_HZ_PER_T, "pos", TABLE),
        "gamma_c_hz_per_t": (GAMMA_C_HZ_PER_T, "pos", TABLE),
        "pair_density_per_nm3": (13.0, "pos", PUBLISHED),
        "mixture_ratio": (10.0, "pos", PUBLISHED),
    },
    "nv": {
        "zfs_hz": (2.87e9, "pos", PUBLISHED),
        "strain_hz": (20e6, "nonneg", PUBLISHED),
        "gamma_e_hz_per_t": (GAMMA_E_HZ_PER_T, "pos", TABLE),
        "pe0": (0.125, "frac", PUBLISHED),
        "window": ("detuning", "str:detuning|angle", PUBLISHED),
        "threshold_hz": (10e6, "pos", PUBLISHED),
        "theta_window_deg": ([80.0, 100.0], "pair", PUBLISHED),
    },
    "drive": {
        "rabi_hz": (_RABI_HZ, "pos", PUBLISHED),
        "detuning_hz": (_RABI_HZ, "real", PUBLISHED),
        "field_t": (0.36, "pos", PUBLISHED),
    },
    "geometry": {
        "channel_diameter_m": (1e-3, "pos", PUBLISHED),
        "gel_length_m": (1e-3, "pos", PUBLISHED),
        "nd_diameter_m": (10e-9, "pos", PUBLISHED),
        "nd_volume_fraction": (0.12, "pos", PUBLISHED),
        "nv_yield_per_nd": (PUBLISHED_NE_RATIO / _geometric_ratio(10e-9, 0.12, 13e27), "pos",
                            DERIVED + ": reproduces N_e/N = 1.6e-6"),
        "flow_rate_m_per_s": (1e-3, "pos", PUBLISHED),
        "residence_time_s": (None, "opt_nonneg", DERIVED + ": gel_length / flow_rate = 1 s"),
    },
    "ramp": {
        "b_high_t": (0.36, "pos", PUBLISHED),
        "b_low_t": (1e-6, "pos", PUBLISHED),
        "t2_s": (0.3, "pos", PUBLISHED),
        "shape": ("linear", "str:" + "|".join(SHAPES), CHOICE),
        "start_field_factor": (100.0, "pos", CHOICE),
    },
    "calibration": {
        "c0_rate_per_s": (None, "opt_nonneg", "set by the calibrate command"),
        "target_p_h": (0.006, "real", PUBLISHED),
        "tau_c_s": (15e-9, "pos", PUBLISHED),
        "ne_ratio": (PUBLISHED_NE_RATIO, "pos", PUBLISHED),
    },
    "sweeps": {
        "tau_c_s": ({"start": 1e-10, "stop": 1e-5, "num": 101}, "loggrid", CHOICE),
        "delta_prime_hz": ({"start": -10e6, "stop": 10e6, "num": 41}, "lingrid", CHOICE),
        "omega_hz": ({"start": 1e4, "stop": 1e10, "num": 241}, "loggrid", CHOICE),
        "field_t": ({"start": 1e-7, "stop": 1.0, "num": 281}, "loggrid", CHOICE),
        "spectral_tau_c_s": ([1e-9, 1e-8, 1e-7, 1e-6], "list", PUBLISHED),
        "audit_t2_s": ([0.0, 3e-3, 3e-2, 0.3], "list", CHOICE),
    },
    "pipeline": {
        "tau_c_s": (15e-9, "pos", PUBLISHED),
    },
    "flags": {
        "mode": ("corrected", "str:" + "|".join(MODES), CHOICE),
        "convention": ("eq8_consistent", "str:" + "|".join(CONVENTIONS), CHOICE),
    },
}


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _check_value(path: str, value, kind: str):
    if kind.startswith("str:"):
        allowed = kind[4:].split("|")
        if value not in allowed:
            raise ConfigError(path, f"must be one of {allowed}, got {value!r}")
        return value
    if kind in ("opt_pos", "opt_nonneg"):
        if value is None:
            return None
        kind = kind[4:]
    if kind == "pair":
        if not (isinstance(value, list) and len(value) == 2 and all(_is_number(x) for x in value)):
            raise ConfigError(path, "must be a two-element numeric list")
        lo, hi = map(float, value)
        if not 0 <= lo < hi <= 180:
            raise ConfigError(path, "must satisfy 0 <= lo < hi <= 180")
        return [lo, hi]
    if kind == "list":
        if not (isinstance(value, list) and value and all(_is_number(x) and x >= 0 for x in value)):
            raise ConfigError(path, "must be a non-empty list of non-negative numbers")
        return [float(x) for x in value]
    if kind in ("loggrid", "lingrid"):
        if not isinstance(value, dict):
            raise ConfigError(path, "must be an object with start, stop, num")
        extra = set(value) - {"start", "stop", "num"}
        if extra:
            raise ConfigError(f"{path}.{sorted(extra)[0]}", "unknown key")
        out = {}
        for k in ("start", "stop", "num"):
            if k not in value:
                raise ConfigError(f"{path}.{k}", "missing")
            if not _is_number(value[k]) or not math.isfinite(value[k]):
                raise ConfigError(f"{path}.{k}", "must be a finite number")
            out[k] = value[k]
        if not (isinstance(out["num"], int) and out["num"] >= 1):
            raise ConfigError(f"{path}.num", "must be a positive integer")
        if kind == "loggrid" and not (out["start"] > 0 and out["stop"] > 0):
            raise ConfigError(path, "log grid bounds must be positive")
        out["start"], out["stop"] = float(out["start"]), float(out["stop"])
        return out
    if not _is_number(value) or not math.isfinite(value):
        raise ConfigError(path, f"must be a finite number, got {value!r}")
    value = float(value)
    if kind == "pos" and not value > 0:
        raise ConfigError(path, f"must be positive, got {value}")
    if kind == "nonneg" and not value >= 0:
        raise ConfigError(path, f"must be non-negative, got {value}")
    if kind == "frac" and not 0 <= value <= 1:
        raise ConfigError(path, f"must lie in [0, 1], got {value}")
    return value


def grid(spec: dict, log: bool) -> np.ndarray:
    if log:
        return np.geomspace(spec["start"], spec["stop"], spec["num"])
    return np.linspace(spec["start"], spec["stop"], spec["num"])


@dataclass
class RunConfig:
    """Validated configuration; ``raw`` holds the file-unit values."""

    raw: dict[str, dict[str, Any]]

    def __getitem__(self, section):
        return self.raw[section]

    # model objects

    @property
    def B(self) -> float:
        return self.raw["drive"]["field_t"]

    @property
    def hydrogen(self) -> NuclearSpecies:
        return NuclearSpecies("H1", angular(self.raw["sample"]["gamma_h_hz_per_t"]))

    @property
    def carbon(self) -> NuclearSpecies:
        return NuclearSpecies("C13", angular(self.raw["sample"]["gamma_c_hz_per_t"]))

    @property
    def drive(self) -> DriveSpec:
        d = self.raw["drive"]
        return DriveSpec(rabi=angular(d["rabi_hz"]), detuning0=angular(d["detuning_hz"]))

    @property
    def nv(self) -> NvEnsembleSpec:
        n = self.raw["nv"]
        lo, hi = n["theta_window_deg"]
        return NvEnsembleSpec(
            zfs_D=angular(n["zfs_hz"]), strain_E=angular(n["strain_hz"]),
            gamma_e=angular(n["gamma_e_hz_per_t"]), Pe0=n["pe0"], window=n["window"],
            threshold=angular(n["threshold_hz"]), theta_window=(math.radians(lo), math.radians(hi)),
        )

    @property
    def geometry(self) -> FlowGeometry:
        g = self.raw["geometry"]
        return FlowGeometry(
            channel_diameter=g["channel_diameter_m"], gel_length=g["gel_length_m"],
            nd_diameter=g["nd_diameter_m"], nd_volume_fraction=g["nd_volume_fraction"],
            nv_yield_per_nd=g["nv_yield_per_nd"],
            pair_density=self.raw["sample"]["pair_density_per_nm3"] * 1e27,
            flow_rate=g["flow_rate_m_per_s"], residence_time=g["residence_time_s"],
        )

    @property
    def buildup_model(self) -> BuildupModel:
        return BuildupModel(self.hydrogen, self.carbon, self.nv, self.drive, self.geometry, self.B)

    @property
    def pair(self) -> PairHamiltonianSpec:
        s = self.raw["sample"]
        return PairHamiltonianSpec(g=s["g_hz"], gamma_C=angular(s["gamma_c_hz_per_t"]),
                                   gamma_H=angular(s["gamma_h_hz_per_t"]))

    @property
    def ramp(self) -> RampProtocol:
        r = self.raw["ramp"]
        return RampProtocol(B_high=r["b_high_t"], B_low=r["b_low_t"], t2=r["t2_s"], shape=r["shape"])

    @property
    def c0_rate(self) -> float | None:
        return self.raw["calibration"]["c0_rate_per_s"]

    @property
    def mode(self) -> str:
        return self.raw["flags"]["mode"]

    @property
    def convention(self) -> str:
        return self.raw["flags"]["convention"]

    def with_flags(self, mode=None, convention=None) -> "RunConfig":
        raw = copy.deepcopy(self.raw)
        if mode is not None:
            raw["flags"]["mode"] = _check_value("flags.mode", mode, SCHEMA["flags"]["mode"][1])
        if convention is not None:
            raw["flags"]["convention"] = _check_value("flags.convention", convention,
                                                      SCHEMA["flags"]["convention"][1])
        return RunConfig(raw)

    def updated(self, section: str, key: str, value) -> "RunConfig":
        raw = copy.deepcopy(self.raw)
        raw[section][key] = _check_value(f"{section}.{key}", value, SCHEMA[section][key][1])
        return validate(raw)

    # serialization

    def to_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, indent=2) + "\n"

    def sha256(self) -> str:
        return hashlib.sha256(json.dumps(self.raw, sort_keys=True).encode()).hexdigest()

    def audit_lines(self) -> list[str]:
        """``section.key = value  [origin]`` for every parameter."""
        lines = []
        for section, keys in SCHEMA.items():
            for key, (default, _, origin) in keys.items():
                value = self.raw[section][key]
                tag = origin if value == default else "user override"
                lines.append(f"{section}.{key} = {json.dumps(value, sort_keys=True)}  [{tag}]")
        return lines


def defaults() -> dict[str, dict[str, Any]]:
    return {s: {k: copy.deepcopy(v[0]) for k, v in keys.items()} for s, keys in SCHEMA.items()}


def validate(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("", "top level must be a JSON object")
    raw = defaults()
    for section, body in data.items():
        if section not in SCHEMA:
            raise ConfigError(section, "unknown key")
        if not isinstance(body, dict):
            raise ConfigError(section, "must be an object")
        for key, value in body.items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"{section}.{key}", "unknown key")
            raw[section][key] = _check_value(f"{section}.{key}", value, SCHEMA[section][key][1])
    cfg = RunConfig(raw)
    # Cross-field checks go through the model constructors.
    for name in ("drive", "nv", "geometry", "pair", "ramp"):
        try:
            getattr(cfg, name)
        except ValueError as exc:
            raise ConfigError(name, str(exc)) from None
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    """Read and validate a JSON config; ``None`` or an empty file gives the defaults."""
    if path is None:
        return validate({})
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        return validate({})
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"cannot parse {path}: {exc}") from None
    return validate(data)
