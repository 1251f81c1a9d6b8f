"""Spectrum CSV and dip-report JSON serialization."""

from __future__ import annotations

import json
import shlex
from pathlib import Path

import numpy as np

from .fitting import DipReport
from .sweep import SWEPT_PARAMETER, Spectrum, SweepPlan


def _fmt(value) -> str:
    return repr(float(value)) if isinstance(value, (float, np.floating)) else str(value)


def write_spectrum_csv(spec: Spectrum, path: str | Path) -> Path:
    """Two ``#`` header lines followed by ``x,signal`` rows.

    The second header carries what ``read_spectrum_csv`` needs to rebuild the
    plan: Larmor frequency, field, resolution settings and fixed parameters.
    """
    plan = spec.plan
    meta = {"larmor_khz": spec.larmor_khz, "b_z": spec.b_z, "sigma": spec.sigma,
            "resolution_floor": plan.resolution_floor, "emulate_resolution": plan.emulate_resolution}
    meta.update({f"fixed.{k}": v for k, v in sorted(plan.fixed_params.items())})
    lines = [
        f"# protocol={plan.protocol_tag} swept={plan.swept_parameter} shots={spec.shots} seed={spec.seed}",
        "# " + " ".join(f"{k}={_fmt(v)}" for k, v in meta.items()),
        "x,signal",
    ]
    lines += [f"{x!r},{y!r}" for x, y in zip(spec.x.tolist(), spec.signal.tolist())]
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def _parse_value(text: str):
    if text in ("None", "none"):
        return None
    if text in ("True", "False"):
        return text == "True"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _parse_header(line: str) -> dict:
    return {k: _parse_value(v) for k, _, v in
            (tok.partition("=") for tok in shlex.split(line.lstrip("#").strip()))}


def read_spectrum_csv(path: str | Path) -> Spectrum:
    """Inverse of ``write_spectrum_csv``.  Plain ``x,signal`` files need the first header line."""
    text = Path(path).read_text().splitlines()
    headers = [ln for ln in text if ln.startswith("#")]
    if not headers:
        raise ValueError(f"{path}: missing '# protocol=... swept=...' header")
    head = _parse_header(headers[0])
    extra = _parse_header(headers[1]) if len(headers) > 1 else {}
    tag = head.get("protocol")
    if tag not in SWEPT_PARAMETER:
        raise ValueError(f"{path}: unknown protocol {tag!r}")
    rows = [ln for ln in text if ln and not ln.startswith("#") and not ln.startswith("x,")]
    data = np.array([[float(v) for v in ln.split(",")] for ln in rows]).reshape(-1, 2)
    fixed = {k[len("fixed."):]: v for k, v in extra.items() if k.startswith("fixed.")}
    plan = SweepPlan(tag, head.get("swept", SWEPT_PARAMETER[tag]), tuple(data[:, 0]), fixed,
                     resolution_floor=float(extra.get("resolution_floor", 2.0)),
                     emulate_resolution=bool(extra.get("emulate_resolution", False)))
    return Spectrum(data[:, 0], data[:, 1], plan, shots=int(head.get("shots", 1)),
                    seed=int(head.get("seed", 0)), sigma=float(extra.get("sigma", 0.0)),
                    larmor_khz=extra.get("larmor_khz"), b_z=extra.get("b_z"))


def write_report_json(report: DipReport, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report.to_dict(), indent=2, default=float) + "\n")
    return path
