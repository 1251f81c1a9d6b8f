"""Command-line front end: ``pmhhdr {sweep,fit,predict,power,oracle-check}``.

Exit codes: 0 success, 1 configuration or input error, 2 numerical failure,
3 oracle check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
from importlib import metadata
from pathlib import Path

import numpy as np
import scipy

from .checks import default_oracle_check
from .config import ConfigError, ExperimentConfig, load_config
from .model import SpinSystemError, make_system
from .power import (
    HhdrScheme, PmScheme, PowerConfig, XyScheme, field_ratio, peak_power_ratio, power_for_scheme,
    power_ratio, power_table, write_power_csv,
)
from .spectroscopy.analytic import predict_pm_resonances
from .spectroscopy.fitting import fit_dips
from .spectroscopy.io import read_spectrum_csv, write_report_json, write_spectrum_csv
from .spectroscopy.sweep import SweepError, compile_point, run_sweep

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 1, 2, 3

log = logging.getLogger("pmhhdr")


def _versions() -> dict:
    try:
        pkg = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"artifact": pkg, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__}


def _spectrum_json(spec, path: Path) -> Path:
    plan = spec.plan
    doc = {"protocol": plan.protocol_tag, "swept": plan.swept_parameter, "shots": spec.shots,
           "seed": spec.seed, "sigma": spec.sigma, "larmor_khz": spec.larmor_khz, "b_z": spec.b_z,
           "fixed_params": plan.fixed_params, "x": spec.x.tolist(), "signal": spec.signal.tolist()}
    path.write_text(json.dumps(doc, indent=1) + "\n")
    return path


def _fit_kwargs(cfg: ExperimentConfig) -> dict:
    f = cfg.fit
    return {"max_dips": f.get("max_dips", 5), "model": f.get("model", "lorentzian"),
            "tol": f.get("tol", 1e-6), "max_iter": f.get("max_iter", 500)}


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    out_dir = Path(args.out_dir)
    fmt = args.format or cfg.output.get("format", "csv")
    plan = cfg.plan
    spectrum = run_sweep(cfg.system, plan, cfg.noise, args.threads)
    report = fit_dips(spectrum, **_fit_kwargs(cfg)) if len(spectrum) >= 10 else None

    # single writer, after every worker has finished
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    stem = Path(cfg.output.get("spectrum", "spectrum")).stem
    if fmt == "csv":
        written.append(write_spectrum_csv(spectrum, out_dir / f"{stem}.csv"))
    else:
        written.append(_spectrum_json(spectrum, out_dir / f"{stem}.json"))
    if report is not None:
        written.append(write_report_json(report, out_dir / cfg.output.get("report", "report.json")))
    if args.dump_program and plan.grid:
        path = out_dir / "program.txt"
        path.write_text(compile_point(plan, plan.grid[0]).dump() + "\n")
        written.append(path)
    manifest = {"command": "sweep", "config_path": str(args.config), "config": cfg.raw,
                "seed": cfg.noise.seed, "threads": args.threads, "format": fmt,
                "versions": _versions(), "files": [p.name for p in written]}
    mpath = out_dir / cfg.output.get("manifest", "manifest.json")
    mpath.write_text(json.dumps(manifest, indent=2, default=str) + "\n")

    print(f"wrote {len(written) + 1} files to {out_dir}")
    if report is not None:
        for d in report.dips:
            a = "ambiguous" if d.ambiguous else f"A_par={d.a_par:.2f} kHz"
            print(f"dip {d.center:.3f} {plan.x_unit} width={d.width:.3f} depth={d.depth:.3f} {a}")
        for p in report.pairs:
            print(f"sideband pair {p.lower.center:.3f}/{p.upper.center:.3f} kHz -> A_par={p.a_par:.2f} kHz")
    return EXIT_OK


def cmd_fit(args) -> int:
    try:
        spectrum = read_spectrum_csv(args.spectrum)
    except (OSError, ValueError) as exc:
        raise ConfigError("spectrum", str(exc)) from exc
    report = fit_dips(spectrum, max_dips=args.max_dips, model=args.model)
    text = json.dumps(report.to_dict(), indent=2, default=float)
    if args.out_dir:
        out = Path(args.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_report_json(report, out / "report.json")
    print(text)
    return EXIT_OK


def cmd_predict(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        system = cfg.system
        omega = args.omega if args.omega is not None else cfg.plan.fixed_params.get("omega_prime")
    else:
        if args.bz is None or args.apar is None:
            raise ConfigError("predict", "give --config or both --bz and --apar")
        try:
            system = make_system(args.bz, args.apar)
        except SpinSystemError as exc:
            raise ConfigError("bz", str(exc)) from exc
        omega = args.omega
    if omega is None:
        raise ConfigError("omega", "Omega' is required")
    for r in predict_pm_resonances(system, omega):
        flag = "  (lower sideband degenerate)" if r.lower_degenerate else ""
        print(f"{r.label}: target {r.target:.3f} kHz  nu- {r.nu_minus:.3f} kHz  nu+ {r.nu_plus:.3f} kHz{flag}")
    return EXIT_OK


def _scheme(name: str, args):
    def need(value, flag):
        if value is None:
            raise ConfigError(flag, f"required for scheme {name}")
        return value

    if name == "hhdr":
        return HhdrScheme(need(args.omega, "omega"))
    if name == "pm":
        return PmScheme(need(args.omega_prime, "omega-prime"))
    return XyScheme(need(args.omega_pulse, "omega-pulse"), args.n_pulses, need(args.tau, "tau"))


def cmd_power(args) -> int:
    cfg_power = PowerConfig(args.efficiency) if args.efficiency is not None else None
    if args.config:
        cfg = load_config(args.config)
        cfg_power = cfg_power or cfg.power
        b_min, b_max, b_step = cfg.power_range
        rows = power_table(np.arange(b_min, b_max + 0.5 * b_step, b_step), cfg_power)
        path = Path(args.out_dir or ".") / cfg.output.get("power_table", "power.csv")
        path.parent.mkdir(parents=True, exist_ok=True)
        write_power_csv(rows, path)
        print(f"wrote {len(rows)} rows to {path}")
    cfg_power = cfg_power or PowerConfig()
    try:
        schemes = [_scheme(name, args) for name in (args.scheme or [])]
        results = [power_for_scheme(cfg_power, s) for s in schemes]
    except ValueError as exc:
        raise ConfigError("power", str(exc)) from exc
    for r in results:
        print(f"{r.scheme}: rabi {r.rabi_khz:.6g} kHz  peak {r.peak_mw:.6g} mW  "
              f"average {r.avg_mw:.6g} mW  duty {r.duty:.4g}")
    if len(schemes) >= 2:
        ref = schemes[0]
        for other, r in zip(schemes[1:], results[1:]):
            print(f"{r.scheme}/{results[0].scheme}: field {field_ratio(other, ref):.6g}  "
                  f"power {power_ratio(other, ref):.6g}  peak power {peak_power_ratio(other, ref):.6g}")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    res = default_oracle_check(points=args.points, carrier=args.carrier)
    status = "PASS" if res.passed else "FAIL"
    print(f"oracle-check {status}: {len(res.x)} points, carrier {res.carrier} MHz, "
          f"rms {res.rms:.4%}, max {res.max_abs:.4%} (tolerance {res.tolerance:.0%} rms)")
    return EXIT_OK if res.passed else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmhhdr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="run the configured sweep, fit it and write outputs")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default="out")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--dump-program", action="store_true", help="write the program of the first grid point")
    p.add_argument("--format", choices=("csv", "json"))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="fit dips in a spectrum CSV")
    p.add_argument("spectrum")
    p.add_argument("--max-dips", type=int, default=5)
    p.add_argument("--model", choices=("lorentzian", "gaussian"), default="lorentzian")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="PM-HHDR resonance positions")
    p.add_argument("--config")
    p.add_argument("--bz", type=float)
    p.add_argument("--apar", type=float, nargs="+")
    p.add_argument("--omega", type=float, help="per-tone Rabi frequency Omega' (kHz)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("power", help="microwave power per scheme and power versus field table")
    p.add_argument("--scheme", action="append", choices=("hhdr", "pm", "xy"))
    p.add_argument("--omega", type=float)
    p.add_argument("--omega-prime", type=float)
    p.add_argument("--omega-pulse", type=float)
    p.add_argument("--n-pulses", type=int, default=32)
    p.add_argument("--tau", type=float)
    p.add_argument("--efficiency", type=float)
    p.add_argument("--config")
    p.add_argument("--out-dir")
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("oracle-check", help="rotating frame vs lab-frame oracle")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--carrier", type=float, default=60.0)
    p.set_defaults(func=cmd_oracle_check)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SweepError as exc:
        print(f"numerical failure at {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FloatingPointError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
