"""Command-line front end.

Subcommands: simulate, observables, extract, scan, tomo, chsh, sweep,
fisher, verify. Exit codes: 0 success, 1 usage error, 2 data or
validation error, 3 non-convergence. The POLAROT_OUT environment variable
sets the directory against which relative output paths are resolved.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .channels import apply_noise, rotation_unitary
from .config import load_config
from .measure import (AnalyzerSetting, JointObservables, chsh_from_counts,
                      estimate_observables, exact_table, extract_thetas,
                      read_table, scan_theta_a, simulate_counts, write_table)
from .metrology import qfi, variance_scaling
from .states import bell_state, save_state
from .sweeps import (configured_state, run_molarity_sweep, run_theta_sweep,
                     write_sweep)
from .tomography import (bootstrap_sigmas, mle_reconstruct, read_tomo_counts,
                         reconstruction_report)

OUT_ENV = "POLAROT_OUT"


def _resolve_out(path_str: str) -> Path:
    path = Path(path_str)
    base = os.environ.get(OUT_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _load_config_with_override(args):
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        from dataclasses import replace
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _settings_from_config(cfg):
    return [(AnalyzerSetting.from_id(a), AnalyzerSetting.from_id(b))
            for a, b in cfg.setting_pairs]


def _cmd_simulate(args) -> int:
    cfg = _load_config_with_override(args)
    rho = configured_state(cfg)
    settings = _settings_from_config(cfg)
    if args.exact:
        table = exact_table(rho, settings, cfg.pair_flux, cfg.duration,
                            cfg.arm_a.transmission, cfg.arm_b.transmission,
                            cfg.noise.accidental_fraction)
    else:
        table = simulate_counts(rho, settings, cfg.pair_flux, cfg.duration,
                                cfg.arm_a.transmission, cfg.arm_b.transmission,
                                cfg.noise.accidental_fraction, seed=cfg.seed)
    out = _resolve_out(args.out)
    write_table(table, out)
    print(f"wrote {len(settings)} settings to {out}")
    return 0


def _write_observables(path: Path, obs: JointObservables) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("observable,value,sigma\n")
        for name in ("m_zz", "m_xz", "m_zx"):
            value = getattr(obs, name)
            sigma = getattr(obs, "sigma_" + name[2:])
            fh.write(f"{name},{value:.17g},{sigma:.17g}\n")


def _read_observables(path) -> JointObservables:
    values = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("observable,"):
                continue
            name, value, sigma = line.split(",")
            values[name] = (float(value), float(sigma))
    missing = sorted({"m_zz", "m_xz", "m_zx"} - set(values))
    if missing:
        raise ValueError(f"observables file {path} is missing rows: {missing}")
    return JointObservables(
        m_zz=values["m_zz"][0], m_xz=values["m_xz"][0], m_zx=values["m_zx"][0],
        sigma_zz=values["m_zz"][1], sigma_xz=values["m_xz"][1],
        sigma_zx=values["m_zx"][1])


def _cmd_observables(args) -> int:
    table = read_table(args.table)
    obs = estimate_observables(table)
    for name in ("m_zz", "m_xz", "m_zx"):
        sigma = getattr(obs, "sigma_" + name[2:])
        print(f"{name} = {getattr(obs, name):+.9f} +- {sigma:.9f}")
    if args.out:
        _write_observables(_resolve_out(args.out), obs)
    return 0


def _cmd_extract(args) -> int:
    obs_plus = _read_observables(args.plus)
    obs_minus = _read_observables(args.minus)
    theta_a, theta_b = extract_thetas(obs_plus, obs_minus,
                                      modulus_floor=args.modulus_floor)
    print(f"{math.degrees(theta_a):.6f}, {math.degrees(theta_b):.6f}")
    if args.out:
        with open(_resolve_out(args.out), "w", encoding="utf-8") as fh:
            fh.write("theta_a_deg,theta_b_deg\n")
            fh.write(f"{math.degrees(theta_a):.6f},{math.degrees(theta_b):.6f}\n")
    return 0


def _cmd_scan(args) -> int:
    cfg = _load_config_with_override(args)
    lo, hi = (math.radians(v) for v in args.range_deg)
    resolution = math.radians(args.resolution_deg)
    settings = [(AnalyzerSetting.from_basis("Z"), AnalyzerSetting.from_basis("Z")),
                (AnalyzerSetting.from_basis("X"), AnalyzerSetting.from_basis("Z")),
                (AnalyzerSetting.from_basis("Z"), AnalyzerSetting.from_basis("X"))]
    calls = [0]

    def probe(theta_b: float):
        rho = configured_state(cfg, kind="psi_minus", theta_b=theta_b)
        if args.exact:
            table = exact_table(rho, settings, cfg.pair_flux, cfg.duration,
                                cfg.arm_a.transmission, cfg.arm_b.transmission,
                                cfg.noise.accidental_fraction)
        else:
            calls[0] += 1
            seed = int(np.random.SeedSequence(
                entropy=cfg.seed, spawn_key=(calls[0],)).generate_state(1)[0])
            table = simulate_counts(rho, settings, cfg.pair_flux, cfg.duration,
                                    cfg.arm_a.transmission, cfg.arm_b.transmission,
                                    cfg.noise.accidental_fraction, seed=seed)
        return estimate_observables(table)

    theta_a = scan_theta_a(probe, (lo, hi), resolution,
                           noise_floor=args.noise_floor)
    print(f"{math.degrees(theta_a):.6f}")
    return 0


def _cmd_tomo(args) -> int:
    counts, _ = read_tomo_counts(args.counts)
    result = mle_reconstruct(counts, max_iter=args.max_iter,
                             grad_tol=args.grad_tol)
    print(f"log_likelihood = {result.log_likelihood:.6f}")
    print(f"converged = {result.converged} (iterations {result.n_iter}, "
          f"max gradient {result.grad_max:.3g})")
    if args.out_state:
        save_state(_resolve_out(args.out_state), result.rho)
    if args.reference:
        reference = bell_state(args.reference)
        report = reconstruction_report(result.rho, reference)
        sigmas = {}
        if args.bootstrap > 0:
            sigmas = bootstrap_sigmas(result.rho, counts, reference,
                                      n_resamples=args.bootstrap, seed=args.seed or 0)
        lines = []
        for key, value in report.items():
            if key in sigmas:
                lines.append(f"{key} = {value:.6f} +- {sigmas[key]:.6f}")
            else:
                lines.append(f"{key} = {value:.6f}")
        print("\n".join(lines))
        if args.out:
            with open(_resolve_out(args.out), "w", encoding="utf-8") as fh:
                fh.write("\n".join(lines) + "\n")
    if not result.converged:
        return 3
    return 0


def _cmd_chsh(args) -> int:
    table = read_table(args.table)
    s, sigma = chsh_from_counts(table)
    significance = (s - 2.0) / sigma if sigma > 0 else math.inf
    print(f"S = {s:.6f} +- {sigma:.6f}")
    print(f"violation significance = {significance:.2f} sigma")
    return 0


def _cmd_sweep(args) -> int:
    cfg = _load_config_with_override(args)
    if cfg.sweep_variable == "molarity_b":
        result = run_molarity_sweep(cfg, exact=args.exact)
    elif cfg.sweep_variable == "theta_b":
        result = run_theta_sweep(cfg, exact=args.exact)
    else:
        raise ValueError("config does not define a sweep")
    out = _resolve_out(args.out)
    write_sweep(result, out)
    print(f"wrote {len(result.rows)} sweep points to {out}")
    return 0


def _cmd_fisher(args) -> int:
    n_values = [int(v) for v in args.n_values.split(",")]
    rows = []
    if args.trials > 0:
        scaling = variance_scaling(n_values, args.trials, args.counts_per_trial,
                                   args.seed or 0, theta=math.radians(args.theta_deg))
        for n, bound, var_sim in scaling:
            rows.append((n, qfi(n), bound, var_sim))
        header = "n,qfi,var_entangled_bound,var_separable_sim"
    else:
        for n in n_values:
            rows.append((n, qfi(n), 1.0 / (4.0 * n * n)))
        header = "n,qfi,var_entangled_bound"
    lines = [header] + [",".join(f"{v:.10g}" for v in row) for row in rows]
    print("\n".join(lines))
    if args.out:
        with open(_resolve_out(args.out), "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    return 0


def _verify_checks():
    from .states import (PAULI_X, PAULI_Y, PAULI_Z, ID2, fidelity,
                         maximally_mixed, validate_state)
    from .channels import apply_local
    from .measure import chsh_s, exact_observables, separable_expectations
    from .tomography import predicted_counts, tomography_settings

    def pauli_algebra():
        paulis = (PAULI_X, PAULI_Y, PAULI_Z)
        eps = np.zeros((3, 3, 3))
        for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
            eps[i, j, k], eps[j, i, k] = 1.0, -1.0
        worst = 0.0
        for j in range(3):
            for k in range(3):
                prod = paulis[j] @ paulis[k]
                expect = (j == k) * ID2 + 1j * sum(
                    eps[j, k, l] * paulis[l] for l in range(3))
                worst = max(worst, np.abs(prod - expect).max())
        return worst <= 1e-14, f"max deviation {worst:.2e}"

    def rotation_group():
        rng = np.random.default_rng(1)
        worst = 0.0
        for _ in range(100):
            t1, t2 = rng.uniform(-np.pi, np.pi, 2)
            dev = np.abs(rotation_unitary(t1) @ rotation_unitary(t2)
                         - rotation_unitary(t1 + t2)).max()
            worst = max(worst, dev)
        return worst <= 1e-12, f"max deviation {worst:.2e}"

    def bell_equivalence():
        rng = np.random.default_rng(2)
        worst = 0.0
        for _ in range(100):
            ta, tb = rng.uniform(-np.pi, np.pi, 2)
            for kind, sign in (("psi_plus", 1.0), ("psi_minus", -1.0)):
                rho = bell_state(kind)
                lhs = apply_local(rho, rotation_unitary(ta), rotation_unitary(tb))
                rhs = apply_local(rho, rotation_unitary(ta + sign * tb),
                                  np.eye(2, dtype=complex))
                worst = max(worst, np.abs(lhs - rhs).max())
        return worst <= 1e-12, f"max deviation {worst:.2e}"

    def closed_forms():
        rng = np.random.default_rng(3)
        worst = 0.0
        for _ in range(200):
            ta, tb = rng.uniform(-np.pi, np.pi, 2)
            for kind, sign in (("psi_plus", 1.0), ("psi_minus", -1.0)):
                rho = apply_local(bell_state(kind), rotation_unitary(ta),
                                  rotation_unitary(tb))
                obs = exact_observables(rho)
                tpm = ta + sign * tb
                worst = max(worst, abs(obs.m_zz + math.cos(2 * tpm)),
                            abs(obs.m_xz + math.sin(2 * tpm)),
                            abs(obs.m_xz - sign * obs.m_zx))
        return worst <= 1e-12, f"max deviation {worst:.2e}"

    def separable_contrast():
        worst = 0.0
        for ta in np.linspace(-np.pi / 2, np.pi / 2, 19):
            swing = [separable_expectations(ta, tb).m_zz
                     for tb in np.linspace(-np.pi, np.pi, 73)]
            worst = max(worst, abs(max(map(abs, swing)) - abs(math.cos(2 * ta))))
        return worst <= 1e-12, f"amplitude deviation {worst:.2e}"

    def extraction_round_trip():
        worst = 0.0
        for ta in np.radians(np.linspace(-44, 44, 12)):
            for tb in np.radians(np.linspace(-44, 44, 12)):
                obs_p = JointObservables(-math.cos(2 * (ta + tb)),
                                         -math.sin(2 * (ta + tb)), 0.0)
                obs_m = JointObservables(-math.cos(2 * (ta - tb)),
                                         -math.sin(2 * (ta - tb)), 0.0)
                ta_hat, tb_hat = extract_thetas(obs_p, obs_m)
                worst = max(worst, abs(ta_hat - ta), abs(tb_hat - tb))
        return worst <= 1e-9, f"max angle error {worst:.2e} rad"

    def chsh_analytic():
        angles = [math.radians(v) for v in (0.0, 45.0, 22.5, 67.5)]
        s_bell = chsh_s(bell_state("psi_plus"), *angles)
        s_mixed = chsh_s(maximally_mixed(), *angles)
        ok = abs(s_bell - 2 * math.sqrt(2)) <= 1e-9 and abs(s_mixed) <= 1e-12
        return ok, f"S = {s_bell:.9f}, mixed {s_mixed:.1e}"

    def tomography_rank():
        rank = np.linalg.matrix_rank(tomography_settings().design_matrix())
        return rank == 16, f"design rank {rank}"

    def mle_self_consistency():
        counts = predicted_counts(bell_state("psi_plus"), flux_norm=1e6)
        result = mle_reconstruct(counts)
        fid = fidelity(result.rho, bell_state("psi_plus"))
        return fid >= 0.9999, f"fidelity {fid:.6f}"

    def qfi_closed_form():
        worst = max(abs(qfi(n) - 4.0 * n * n) for n in range(1, 9))
        return worst <= 1e-10, f"max deviation {worst:.2e}"

    def noise_physicality():
        from .channels import NoiseSpec
        for p in np.linspace(0.0, 1.0, 11):
            rho = apply_noise(bell_state("psi_minus"), NoiseSpec(visibility=float(p)))
            validate_state(rho)
        return True, "trace-preserving and PSD for the full mixing range"

    return [
        ("pauli-algebra", pauli_algebra),
        ("rotation-group", rotation_group),
        ("bell-nonlocal-equivalence", bell_equivalence),
        ("joint-observable-closed-forms", closed_forms),
        ("separable-contrast-amplitude", separable_contrast),
        ("extraction-round-trip", extraction_round_trip),
        ("chsh-analytic", chsh_analytic),
        ("tomography-design-rank", tomography_rank),
        ("mle-exact-self-consistency", mle_self_consistency),
        ("qfi-closed-form", qfi_closed_form),
        ("noise-physicality", noise_physicality),
    ]


def _cmd_verify(args) -> int:
    failures = 0
    for name, check in _verify_checks():
        try:
            ok, detail = check()
        except Exception as exc:  # a crashed check is a failed check
            ok, detail = False, f"raised {exc!r}"
        status = "ok" if ok else "FAIL"
        print(f"{status}: {name} ({detail})")
        failures += not ok
    return 0 if failures == 0 else 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polarot",
        description="simulate and analyze optical-rotation measurements "
                    "with polarization-entangled photon pairs")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=False, seed=False, exact=False, out=None):
        if config:
            p.add_argument("--config", required=True, help="experiment config file")
        if seed:
            p.add_argument("--seed", type=int, default=None,
                           help="override the config seed")
        if exact:
            p.add_argument("--exact", action="store_true",
                           help="emit exact Born-rule expectations instead of sampling")
        if out is not None:
            p.add_argument("--out", default=out[0], required=out[1],
                           help="output file path")
        p.add_argument("--format", choices=["csv"], default="csv",
                       help="output format (csv only)")

    p = sub.add_parser("simulate", help="simulate a coincidence table from a config")
    add_common(p, config=True, seed=True, exact=True, out=("counts.csv", False))
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("observables", help="estimate joint observables from a table")
    p.add_argument("--table", required=True, help="coincidence table file")
    add_common(p, out=(None, False))
    p.set_defaults(func=_cmd_observables)

    p = sub.add_parser("extract", help="extract both rotation angles from "
                                       "plus- and minus-branch observables")
    p.add_argument("--plus", required=True, help="observables file, addition branch")
    p.add_argument("--minus", required=True, help="observables file, cancellation branch")
    p.add_argument("--modulus-floor", type=float, default=1e-6)
    add_common(p, out=(None, False))
    p.set_defaults(func=_cmd_extract)

    p = sub.add_parser("scan", help="wide-range search for the arm-A rotation")
    add_common(p, config=True, seed=True, exact=True)
    p.add_argument("--range-deg", nargs=2, type=float, default=[-90.0, 90.0],
                   metavar=("LO", "HI"), help="search window in degrees")
    p.add_argument("--resolution-deg", type=float, default=5.0)
    p.add_argument("--noise-floor", type=float, default=1e-3)
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("tomo", help="maximum-likelihood state reconstruction")
    p.add_argument("--counts", required=True, help="tomography counts file")
    p.add_argument("--reference", default=None,
                   help="Bell-state label for the comparison report")
    p.add_argument("--out-state", default=None, help="write the reconstructed matrix here")
    p.add_argument("--bootstrap", type=int, default=0,
                   help="number of parametric-bootstrap resamples (0 = off)")
    p.add_argument("--max-iter", type=int, default=5000)
    p.add_argument("--grad-tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=None)
    add_common(p, out=(None, False))
    p.set_defaults(func=_cmd_tomo)

    p = sub.add_parser("chsh", help="CHSH statistic from a coincidence table")
    p.add_argument("--table", required=True)
    add_common(p)
    p.set_defaults(func=_cmd_chsh)

    p = sub.add_parser("sweep", help="run the molarity or theta sweep from a config")
    add_common(p, config=True, seed=True, exact=True, out=("sweep.csv", False))
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("fisher", help="Fisher-information scaling table")
    p.add_argument("--n-values", default="1,2,4,8,16",
                   help="comma-separated photon numbers")
    p.add_argument("--trials", type=int, default=0,
                   help="Monte Carlo trials for the separable baseline (0 = bounds only)")
    p.add_argument("--counts-per-trial", type=int, default=1)
    p.add_argument("--theta-deg", type=float, default=30.0)
    p.add_argument("--seed", type=int, default=None)
    add_common(p, out=(None, False))
    p.set_defaults(func=_cmd_fisher)

    p = sub.add_parser("verify", help="run the analytic invariant suite")
    add_common(p)
    p.set_defaults(func=_cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
