"""Figure-data emitters, the end-to-end pipeline and the ramp audit.

Each ``cmd_*`` returns the text it would write, so outputs can be compared
byte-for-byte. CSV floats use 17 significant digits.
"""
from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from . import __version__
from .buildup import calibrate_c0, nv_to_nuclear_ratio, polarization_sweep
from .config import RunConfig, grid
from .nv_orientation import ensemble_average_rate, window_fraction
from .pair_dynamics import (
    PairPopulations,
    RampProtocol,
    adiabatic_map,
    high_field_populations,
    landau_zener_estimate,
    level_diagram,
    propagate_ramp,
    singlet_order_closed_form,
    singlet_order_from_populations,
    sudden_leakage,
)
from .spectral import spectral_density
from .transfer import dressed_electron_frequency, species_polarization
from .units import TWO_PI


class CalibrationMissing(ValueError):
    """A command needs a calibrated rate constant that the config lacks."""


def _fmt(x) -> str:
    return format(float(x), ".17g")


def header(command: str, cfg: RunConfig) -> list[str]:
    lines = [
        f"nvsinglet {__version__} {command}",
        f"config_sha256: {cfg.sha256()}",
        f"mode: {cfg.mode}",
        f"convention: {cfg.convention}",
    ]
    lines += cfg.audit_lines()
    return lines


def to_csv(command: str, cfg: RunConfig, columns: list[str], rows) -> str:
    out = [f"# {line}" for line in header(command, cfg)]
    out.append(",".join(columns))
    for row in rows:
        out.append(",".join(_fmt(v) for v in row))
    return "\n".join(out) + "\n"


def to_json(command: str, cfg: RunConfig, payload: dict) -> str:
    doc = {"header": header(command, cfg), **payload}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _map(fn, items, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _tau_label(tc: float) -> str:
    return f"J_tau_{tc * 1e9:g}ns"


def marker_frequencies(cfg: RunConfig) -> dict[str, float]:
    """Matching and mismatch frequencies (rad/s) for both species."""
    w_e = float(dressed_electron_frequency(cfg.drive))
    w_h = float(cfg.hydrogen.larmor(cfg.B))
    w_c = float(cfg.carbon.larmor(cfg.B))
    return {
        "omega_0H": abs(w_e - w_h),
        "omega_0C": abs(w_e - w_c),
        "omega_2C": w_e + w_c,
        "omega_2H": w_e + w_h,
    }


def cmd_fig_spectral(cfg: RunConfig, threads: int = 1) -> dict[str, str]:
    taus = cfg["sweeps"]["spectral_tau_c_s"]
    omega = np.concatenate([[0.0], TWO_PI * grid(cfg["sweeps"]["omega_hz"], log=True)])
    cols = _map(lambda tc: spectral_density(omega, tc), taus, threads)
    rows = np.column_stack([omega, *cols])
    curves = to_csv("fig-spectral", cfg, ["omega_rad_s", *map(_tau_label, taus)], rows)
    marks = marker_frequencies(cfg)
    mrows = [[w, *(spectral_density(w, tc) for tc in taus)] for w in marks.values()]
    body = to_csv("fig-spectral-markers", cfg, ["omega_rad_s", *map(_tau_label, taus)], mrows)
    # Marker names go in a leading comment so the numeric table stays uniform.
    names = "# markers: " + " ".join(marks) + "\n"
    return {"spectral.csv": curves, "spectral_markers.csv": names + body}


def cmd_fig_transfer(cfg: RunConfig, threads: int = 1) -> dict[str, str]:
    taus = grid(cfg["sweeps"]["tau_c_s"], log=True)
    ph = species_polarization(cfg.hydrogen, cfg.B, cfg.drive, taus, cfg.mode)
    pc = species_polarization(cfg.carbon, cfg.B, cfg.drive, taus, cfg.mode)
    rows = np.column_stack([taus, ph, pc, np.abs(ph), np.abs(pc)])
    return {"transfer.csv": to_csv("fig-transfer", cfg, ["tau_c_s", "Ps_H", "Ps_C", "abs_Ps_H", "abs_Ps_C"], rows)}


def contour_grid(cfg: RunConfig, threads: int = 1):
    """(tau_c, delta', P_s^H, P_s^C) arrays of shape (n_tau, n_delta)."""
    taus = grid(cfg["sweeps"]["tau_c_s"], log=True)
    dps = TWO_PI * grid(cfg["sweeps"]["delta_prime_hz"], log=False)
    eps = cfg.drive.detuning0 + dps

    def row(tc):
        return (species_polarization(cfg.hydrogen, cfg.B, cfg.drive, tc, cfg.mode, detuning=eps),
                species_polarization(cfg.carbon, cfg.B, cfg.drive, tc, cfg.mode, detuning=eps))

    out = _map(row, taus, threads)
    ph = np.array([r[0] for r in out])
    pc = np.array([r[1] for r in out])
    return taus, dps, ph, pc


def cmd_fig_contour(cfg: RunConfig, threads: int = 1) -> dict[str, str]:
    taus, dps, ph, pc = contour_grid(cfg, threads)
    T, D = np.meshgrid(taus, dps, indexing="ij")
    rows = np.column_stack([T.ravel(), D.ravel(), ph.ravel(), pc.ravel()])
    return {"contour.csv": to_csv("fig-contour", cfg, ["tau_c_s", "delta_prime_rad_s", "Ps_H", "Ps_C"], rows)}


def _require_c0(cfg: RunConfig) -> float:
    if cfg.c0_rate is None:
        raise CalibrationMissing("calibration.c0_rate_per_s is not set; run the calibrate command first")
    return cfg.c0_rate


def cmd_fig_buildup(cfg: RunConfig, threads: int = 1) -> dict[str, str]:
    c0 = _require_c0(cfg)
    taus = grid(cfg["sweeps"]["tau_c_s"], log=True)
    rows = polarization_sweep(taus, cfg.buildup_model, c0, threads=threads)
    return {"buildup.csv": to_csv("fig-buildup", cfg, ["tau_c_s", "p_H", "p_C"], rows)}


def cmd_fig_levels(cfg: RunConfig, threads: int = 1) -> dict[str, str]:
    B = np.concatenate([[0.0], grid(cfg["sweeps"]["field_t"], log=True)])
    rows = level_diagram(B, cfg.pair)
    cols = ["B_T", "E_S0_hz", "E_T0_hz", "E_Tp1_hz", "E_Tm1_hz",
            "singlet_S0", "singlet_T0", "singlet_Tp1", "singlet_Tm1"]
    return {"levels.csv": to_csv("fig-levels", cfg, cols, rows)}


def pipeline_report(cfg: RunConfig) -> dict:
    """Build-up -> high-field populations -> adiabatic map -> singlet order."""
    c0 = _require_c0(cfg)
    tau_c = cfg["pipeline"]["tau_c_s"]
    model = cfg.buildup_model
    p = model.polarizations(tau_c, c0)
    hf = high_field_populations(p)
    st = adiabatic_map(hf, cfg.convention)
    p_s = singlet_order_from_populations(st)
    ramp = propagate_ramp(hf, cfg.ramp, cfg.pair, cfg["ramp"]["start_field_factor"])
    p_s_ramp = singlet_order_from_populations(ramp.populations)
    return {
        "tau_c_s": tau_c,
        "c0_rate_per_s": c0,
        "ne_ratio": nv_to_nuclear_ratio(model.geometry),
        "t1_s": model.geometry.t1,
        "w_eff_H_per_s": model.averaged_rate(model.hydrogen, tau_c, c0),
        "w_eff_C_per_s": model.averaged_rate(model.carbon, tau_c, c0),
        "p_H": p.p_H,
        "p_C": p.p_C,
        "p_S": p_s,
        "p_S_closed_form": singlet_order_closed_form(p),
        "p_S_over_p_H": p_s / p.p_H if p.p_H != 0 else None,
        "high_field_populations": hf.as_dict(),
        "low_field_populations": st.as_dict(),
        "ramp": {
            "shape": cfg.ramp.shape,
            "t2_s": cfg.ramp.t2,
            "leakage": ramp.leakage,
            "landau_zener": ramp.landau_zener,
            "p_S_after_ramp": p_s_ramp,
            "low_field_populations": ramp.populations.as_dict(),
        },
    }


def cmd_pipeline(cfg: RunConfig, threads: int = 1) -> dict[str, str]:
    return {"pipeline.json": to_json("pipeline", cfg, {"report": pipeline_report(cfg)})}


def audit_ramps(cfg: RunConfig, threads: int = 1) -> list[dict]:
    base = cfg.ramp
    spec = cfg.pair
    factor = cfg["ramp"]["start_field_factor"]
    hf = high_field_populations_uniform()

    def scenario(t2):
        if t2 == 0:
            proto = replace(base, t2=1.0)  # shape irrelevant in the sudden limit
            return {"t2_s": 0.0, "leakage": sudden_leakage(proto, spec), "landau_zener": 1.0,
                    "norm_error": 0.0, "status": "sudden"}
        proto = RampProtocol(base.B_high, base.B_low, t2, base.shape)
        try:
            r = propagate_ramp(hf, proto, spec, factor)
        except Exception as exc:  # reported per scenario
            return {"t2_s": t2, "status": f"failed: {exc}"}
        return {"t2_s": t2, "leakage": r.leakage, "landau_zener": landau_zener_estimate(proto, spec),
                "norm_error": r.norm_error, "B_start_t": r.B_start,
                "adiabaticity_start": r.adiabaticity_start, "status": "ok"}

    return _map(scenario, cfg["sweeps"]["audit_t2_s"], threads)


def high_field_populations_uniform() -> PairPopulations:
    return PairPopulations(np.full(4, 0.25), "product")


def cmd_adiabatic_audit(cfg: RunConfig, threads: int = 1) -> dict[str, str]:
    r = cfg["ramp"]
    payload = {
        "protocol": {"b_high_t": r["b_high_t"], "b_low_t": r["b_low_t"], "shape": r["shape"],
                     "start_field_factor": r["start_field_factor"]},
        "sudden_limit_leakage": sudden_leakage(cfg.ramp, cfg.pair),
        "scenarios": audit_ramps(cfg, threads),
    }
    return {"adiabatic_audit.json": to_json("adiabatic-audit", cfg, payload)}


def calibrate(cfg: RunConfig) -> tuple[RunConfig, dict]:
    """Set the NV yield from the N_e/N target, then the rate constant from the 1H target."""
    cal = cfg["calibration"]
    geom = cfg.geometry
    yield_ = cal["ne_ratio"] / geom.geometric_ratio
    cfg = cfg.updated("geometry", "nv_yield_per_nd", yield_)
    c0 = calibrate_c0(cal["target_p_h"], cal["tau_c_s"], cfg.buildup_model)
    cfg = cfg.updated("calibration", "c0_rate_per_s", c0)
    info = {
        "geometric_ne_ratio_one_nv_per_nd": geom.geometric_ratio,
        "nv_yield_per_nd": yield_,
        "ne_ratio": nv_to_nuclear_ratio(cfg.geometry),
        "c0_rate_per_s": c0,
        "window_fraction": window_fraction(cfg.nv, cfg.B, cfg.drive),
        "w_eff_H_unit_rate": ensemble_average_rate(cfg.hydrogen, cal["tau_c_s"], cfg.nv, cfg.drive, cfg.B, 1.0),
    }
    return cfg, info


def cmd_calibrate(cfg: RunConfig, threads: int = 1) -> dict[str, str]:
    new, info = calibrate(cfg)
    return {"config.calibrated.json": new.to_json(),
            "calibration.json": to_json("calibrate", new, {"calibration": info})}


COMMANDS = {
    "fig-spectral": cmd_fig_spectral,
    "fig-transfer": cmd_fig_transfer,
    "fig-contour": cmd_fig_contour,
    "fig-buildup": cmd_fig_buildup,
    "fig-levels": cmd_fig_levels,
    "pipeline": cmd_pipeline,
    "adiabatic-audit": cmd_adiabatic_audit,
    "calibrate": cmd_calibrate,
}
