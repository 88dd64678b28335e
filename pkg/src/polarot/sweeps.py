"""Scripted experiment sweeps and the calibration line fit.

Both sweep runners share the same per-point pipeline: build the source
state, fold analyzer offsets into the local rotations, simulate (or emit
exact expectations for) the named-basis coincidence settings, estimate
the joint observables, and convert them back to rotation angles with the
offsets removed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import __version__
from .channels import apply_local, apply_noise, offset_correct, rotation_unitary
from .config import ExperimentConfig, config_hash
from .measure import (AnalyzerSetting, estimate_observables, exact_table,
                      extract_thetas, rotation_from_observables, simulate_counts)
from .states import bell_state, ket, separable_state

__all__ = ["SweepResult", "configured_state", "fit_line", "zero_crossing",
           "run_molarity_sweep", "run_theta_sweep", "write_sweep", "read_xy_csv"]

_NAMED_PAIRS = (("Z", "Z"), ("X", "Z"), ("Z", "X"))


@dataclass
class SweepResult:
    variable: str
    columns: tuple
    rows: np.ndarray
    provenance: dict


def _wls(x, y, sigma):
    w = 1.0 / np.asarray(sigma, dtype=float) ** 2
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = w.sum()
    sx, sy = (w * x).sum(), (w * y).sum()
    sxx, sxy = (w * x * x).sum(), (w * x * y).sum()
    det = s * sxx - sx * sx
    if det <= 0:
        raise ValueError("degenerate abscissa: line fit is underdetermined")
    slope = (s * sxy - sx * sy) / det
    intercept = (sxx * sy - sx * sxy) / det
    cov = np.array([[s, -sx], [-sx, sxx]]) / det  # [[var_slope, cov], [cov, var_int]]
    return slope, intercept, cov


def fit_line(points) -> dict:
    """Weighted least-squares straight line through (x, y, sigma) points.

    Points may be (x, y) pairs, in which case the parameter uncertainties
    are scaled to the residual scatter; with explicit sigmas they are
    absolute. R^2 is 1 - SS_res/SS_tot (weighted), defined as 1 when both
    sums vanish (constant data fitted exactly).
    """
    pts = [tuple(p) for p in points]
    if len(pts) < 3:
        raise ValueError(f"need at least 3 points to fit a line, got {len(pts)}")
    x = np.array([p[0] for p in pts], dtype=float)
    y = np.array([p[1] for p in pts], dtype=float)
    has_sigma = len(pts[0]) > 2
    sigma = np.array([p[2] for p in pts], dtype=float) if has_sigma else np.ones_like(x)
    if has_sigma and (sigma <= 0).any():
        raise ValueError("point sigmas must be positive")
    if np.allclose(x, x[0]):
        raise ValueError("degenerate abscissa: all x values are equal")
    slope, intercept, cov = _wls(x, y, sigma)
    w = 1.0 / sigma ** 2
    resid = y - (slope * x + intercept)
    ss_res = float((w * resid ** 2).sum())
    ybar = float((w * y).sum() / w.sum())
    ss_tot = float((w * (y - ybar) ** 2).sum())
    if not has_sigma:
        dof = len(pts) - 2
        cov = cov * (ss_res / dof if dof > 0 else 0.0)
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return {
        "slope": float(slope),
        "intercept": float(intercept),
        "slope_sigma": float(math.sqrt(max(cov[0, 0], 0.0))),
        "intercept_sigma": float(math.sqrt(max(cov[1, 1], 0.0))),
        "r_squared": float(r_squared),
    }


def zero_crossing(x, y, sigma) -> tuple[float, float]:
    """Root of the weighted line fit, x0 = -intercept/slope, with its
    standard error from the full parameter covariance."""
    slope, intercept, cov = _wls(x, y, sigma)
    if slope == 0.0:
        raise ValueError("zero slope: the fitted line has no root")
    x0 = -intercept / slope
    grad = np.array([intercept / slope ** 2, -1.0 / slope])  # d x0 / d(slope, intercept)
    var = float(grad @ cov @ grad)
    return float(x0), math.sqrt(max(var, 0.0))


def _named_settings():
    return [(AnalyzerSetting.from_basis(a), AnalyzerSetting.from_basis(b))
            for a, b in _NAMED_PAIRS]


def _point_seed(seed: int, *key) -> int:
    return int(np.random.SeedSequence(entropy=seed, spawn_key=key).generate_state(1)[0])


def configured_state(cfg: ExperimentConfig, kind: str | None = None,
                     theta_a: float | None = None, theta_b: float | None = None):
    """The two-photon state after the configured source, noise and both
    arm rotations. Analyzer-frame offsets ride on top of the physical
    rotations; the state-exchanging wave plate contributes only in
    cancellation (psi_minus) runs. kind/theta overrides replace the
    configured source state or arm angles (radians)."""
    kind = cfg.state_kind if kind is None else kind
    if kind == "separable":
        rho = separable_state(ket(cfg.ket_a), ket(cfg.ket_b))
    else:
        rho = bell_state(kind)
    rho = apply_noise(rho, cfg.noise)
    theta_a_eff = (cfg.arm_a.theta() if theta_a is None else theta_a) + cfg.pbs_a
    if kind == "psi_minus":
        theta_a_eff += cfg.hwp
    theta_b_eff = (cfg.arm_b.theta() if theta_b is None else theta_b) + cfg.pbs_b
    return apply_local(rho, rotation_unitary(theta_a_eff), rotation_unitary(theta_b_eff))


def _observables_at(cfg, kind, theta_a, theta_b, exact, seed_key):
    rho = configured_state(cfg, kind, theta_a, theta_b)
    settings = _named_settings()
    if exact:
        table = exact_table(rho, settings, cfg.pair_flux, cfg.duration,
                            cfg.arm_a.transmission, cfg.arm_b.transmission,
                            cfg.noise.accidental_fraction)
    else:
        table = simulate_counts(rho, settings, cfg.pair_flux, cfg.duration,
                                cfg.arm_a.transmission, cfg.arm_b.transmission,
                                cfg.noise.accidental_fraction,
                                seed=_point_seed(cfg.seed, *seed_key))
    return estimate_observables(table)


def _provenance(cfg: ExperimentConfig, exact: bool) -> dict:
    return {
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "version": __version__,
        "exact": int(exact),
    }


def run_molarity_sweep(cfg: ExperimentConfig, exact: bool = False) -> SweepResult:
    """Sweep the arm-B solution molarity at a fixed arm-A rotation and
    extract the offset-corrected effective rotation of the configured
    Bell state per point."""
    if cfg.sweep_variable != "molarity_b":
        raise ValueError(f"molarity sweep needs sweep variable 'molarity_b', "
                         f"got {cfg.sweep_variable!r}")
    if cfg.state_kind not in ("psi_plus", "psi_minus"):
        raise ValueError("molarity sweeps are defined for the psi_plus or "
                         "psi_minus source state")
    if cfg.arm_b.solution is None:
        raise ValueError("molarity sweeps need a solution-type arm_b")
    which = "plus" if cfg.state_kind == "psi_plus" else "minus"
    theta_a = cfg.arm_a.theta()
    slope = cfg.arm_b.solution.slope_deg_per_molar
    rows = []
    for i, molarity in enumerate(sorted(cfg.sweep_values)):
        if molarity < 0:
            raise ValueError(f"negative molarity {molarity}")
        theta_b = math.radians(slope * molarity)
        obs = _observables_at(cfg, cfg.state_kind, theta_a, theta_b, exact, (i,))
        theta_exp, sig = rotation_from_observables(obs.m_zz, obs.m_xz,
                                                   obs.sigma_zz, obs.sigma_xz)
        theta = offset_correct(theta_exp, which, cfg.pbs_a, cfg.pbs_b, cfg.hwp)
        rows.append((molarity, math.degrees(theta), math.degrees(sig),
                     obs.m_zz, obs.m_xz, obs.sigma_zz, obs.sigma_xz))
    return SweepResult(
        variable="molarity_b",
        columns=("molarity", "theta_deg", "sigma_deg",
                 "m_zz", "m_xz", "sigma_zz", "sigma_xz"),
        rows=np.array(rows),
        provenance=_provenance(cfg, exact),
    )


def run_theta_sweep(cfg: ExperimentConfig, exact: bool = False) -> SweepResult:
    """Sweep the arm-B rotation angle with both Bell branches at a fixed
    arm-A rotation; reports per point the joint observables of both
    branches, the offset-corrected effective rotations, and the
    jointly extracted local angles."""
    if cfg.sweep_variable != "theta_b":
        raise ValueError(f"theta sweep needs sweep variable 'theta_b', "
                         f"got {cfg.sweep_variable!r}")
    theta_a = cfg.arm_a.theta()
    rows = []
    for i, theta_b_deg in enumerate(sorted(cfg.sweep_values)):
        theta_b = math.radians(theta_b_deg)
        obs_p = _observables_at(cfg, "psi_plus", theta_a, theta_b, exact, (i, 0))
        obs_m = _observables_at(cfg, "psi_minus", theta_a, theta_b, exact, (i, 1))
        th_p_exp, sig_p = rotation_from_observables(obs_p.m_zz, obs_p.m_xz,
                                                    obs_p.sigma_zz, obs_p.sigma_xz)
        th_m_exp, sig_m = rotation_from_observables(obs_m.m_zz, obs_m.m_xz,
                                                    obs_m.sigma_zz, obs_m.sigma_xz)
        th_p = offset_correct(th_p_exp, "plus", cfg.pbs_a, cfg.pbs_b, cfg.hwp)
        th_m = offset_correct(th_m_exp, "minus", cfg.pbs_a, cfg.pbs_b, cfg.hwp)
        th_a_hat, th_b_hat = extract_thetas(obs_p, obs_m)
        rows.append((theta_b_deg,
                     obs_p.m_zz, obs_p.m_xz, obs_m.m_zz, obs_m.m_xz,
                     obs_p.sigma_zz, obs_p.sigma_xz, obs_m.sigma_zz, obs_m.sigma_xz,
                     math.degrees(th_p), math.degrees(sig_p),
                     math.degrees(th_m), math.degrees(sig_m),
                     math.degrees(th_a_hat), math.degrees(th_b_hat)))
    return SweepResult(
        variable="theta_b",
        columns=("theta_b_deg",
                 "m_zz_plus", "m_xz_plus", "m_zz_minus", "m_xz_minus",
                 "sigma_zz_plus", "sigma_xz_plus", "sigma_zz_minus", "sigma_xz_minus",
                 "theta_plus_deg", "sigma_plus_deg",
                 "theta_minus_deg", "sigma_minus_deg",
                 "theta_a_hat_deg", "theta_b_hat_deg"),
        rows=np.array(rows),
        provenance=_provenance(cfg, exact),
    )


def write_sweep(result: SweepResult, path) -> None:
    """Write a sweep result as CSV with '#'-prefixed provenance lines.
    Angle columns (named *_deg) carry six decimal places."""
    with open(path, "w", encoding="utf-8") as fh:
        for key in sorted(result.provenance):
            fh.write(f"# {key}={result.provenance[key]}\n")
        fh.write("# variable=" + result.variable + "\n")
        fh.write(",".join(result.columns) + "\n")
        for row in result.rows:
            cells = []
            for name, value in zip(result.columns, row):
                fmt = "{:.6f}" if name.endswith("_deg") else "{:.10g}"
                cells.append(fmt.format(value))
            fh.write(",".join(cells) + "\n")


def read_xy_csv(path):
    """Read generic (x, y[, sigma]) rows from comma-separated text,
    skipping blank, '#'-comment and non-numeric header lines. Intended for
    ingesting externally published sweep data for comparison plots."""
    xs, ys, sigmas = [], [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = [p.strip() for p in line.split(",")]
            try:
                values = [float(p) for p in parts[:3] if p != ""]
            except ValueError:
                continue
            if len(values) < 2:
                continue
            xs.append(values[0])
            ys.append(values[1])
            sigmas.append(values[2] if len(values) > 2 else math.nan)
    return np.array(xs), np.array(ys), np.array(sigmas)
