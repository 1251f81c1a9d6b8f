"""
INI experiment configuration.

Sections: ``[system]``, ``[protocol]``, ``[sweep]``, ``[noise]``, ``[fit]``,
``[power]`` and ``[output]``.  Every key is checked against a schema before
any computation starts; unknown sections or keys are errors.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import PhysicalConstants, SpinSystemError, SpinSystemSpec, make_system
from .power import DEFAULT_EFFICIENCY, PowerConfig
from .spectroscopy.fitting import MODELS
from .spectroscopy.sweep import SWEPT_PARAMETER, AmplitudeNoise, SweepPlan


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _strings(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _ranges(text: str) -> list[tuple[float, float]]:
    out = []
    for part in _strings(text):
        start, sep, stop = part.partition(":")
        if not sep:
            raise ValueError(f"range {part!r} is not start:stop")
        out.append((float(start), float(stop)))
    return out


SCHEMA = {
    "system": {"b_z": float, "a_par": _floats, "a_perp": _floats, "labels": _strings,
               "bath": _strings, "d_mhz": float, "gamma_e": float, "gamma_n": float},
    "protocol": {"tag": str, "omega_prime": float, "omega_minus": float, "start_high": _bool,
                 "t_f": float, "n_pulses": int, "omega_pi": float, "harmonic": int,
                 "readout": str, "electron_state": str, "nuclear_state": str,
                 "dephasing_rate": float},
    "sweep": {"ranges": _ranges, "step": float, "resolution_floor": float,
              "emulate_resolution": _bool},
    "noise": {"sigma": float, "shots": int, "seed": int},
    "fit": {"max_dips": int, "model": str, "tol": float, "max_iter": int},
    "power": {"efficiency": float, "b_min": float, "b_max": float, "b_step": float},
    "output": {"spectrum": str, "report": str, "manifest": str, "power_table": str, "format": str},
}
REQUIRED = {"system": {"b_z"}, "protocol": {"tag"}, "sweep": {"ranges", "step"}}


@dataclass
class ExperimentConfig:
    system: SpinSystemSpec
    plan: SweepPlan
    noise: AmplitudeNoise
    fit: dict = field(default_factory=dict)
    power: PowerConfig = field(default_factory=PowerConfig)
    power_range: tuple[float, float, float] = (200.0, 3000.0, 200.0)
    output: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)


def parse_sections(text: str, source: str = "<config>") -> dict[str, dict]:
    """Typed values per section, rejecting unknown sections and keys."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError("config", str(exc).splitlines()[0]) from exc
    out: dict[str, dict] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(section, "unknown section")
        typed = {}
        for key, value in parser.items(section):
            conv = SCHEMA[section].get(key)
            if conv is None:
                raise ConfigError(f"{section}.{key}", "unknown key")
            try:
                typed[key] = conv(value)
            except ValueError as exc:
                raise ConfigError(f"{section}.{key}", f"cannot parse {value!r} ({exc})") from exc
        out[section] = typed
    for section, keys in REQUIRED.items():
        missing = keys - set(out.get(section, {}))
        if missing:
            raise ConfigError(f"{section}.{sorted(missing)[0]}", "required key missing")
    return out


def _system(sec: dict) -> SpinSystemSpec:
    defaults = PhysicalConstants()
    try:
        constants = PhysicalConstants(sec.get("d_mhz", defaults.D), sec.get("gamma_e", defaults.gamma_e),
                                      sec.get("gamma_n", defaults.gamma_n))
    except SpinSystemError as exc:
        raise ConfigError("system.constants", str(exc)) from exc
    a_par = sec.get("a_par", [])
    a_perp = sec.get("a_perp", [0.0])
    if len(a_perp) == 1:
        a_perp = a_perp * len(a_par)
    if len(a_perp) != len(a_par):
        raise ConfigError("system.a_perp", f"expected 1 or {len(a_par)} values, got {len(a_perp)}")
    labels = sec.get("labels")
    if labels is not None and len(labels) != len(a_par):
        raise ConfigError("system.labels", f"expected {len(a_par)} labels, got {len(labels)}")
    if labels is None:
        labels = [f"C{j + 1}" for j in range(len(a_par))]
    bath = sec.get("bath", [])
    if set(bath) - set(labels):
        raise ConfigError("system.bath", f"unknown label(s) {sorted(set(bath) - set(labels))}")
    if sec["b_z"] <= 0:
        raise ConfigError("system.b_z", f"must be > 0, got {sec['b_z']}")
    try:
        return make_system(sec["b_z"], a_par, a_perp, labels=labels,
                           bath=[lab in bath for lab in labels], constants=constants)
    except SpinSystemError as exc:
        raise ConfigError("system", str(exc)) from exc


def _grid(sec: dict) -> np.ndarray:
    step = sec["step"]
    if step <= 0:
        raise ConfigError("sweep.step", f"must be > 0, got {step}")
    parts = []
    for start, stop in sec["ranges"]:
        if stop < start:
            raise ConfigError("sweep.ranges", f"range {start}:{stop} is reversed")
        n = int(np.floor((stop - start) / step + 1e-3)) + 1
        parts.append(start + step * np.arange(n))
    return np.concatenate(parts) if parts else np.array([])


def build_config(sections: dict[str, dict]) -> ExperimentConfig:
    system = _system(sections["system"])
    proto = dict(sections["protocol"])
    tag = proto.pop("tag")
    if tag not in SWEPT_PARAMETER:
        raise ConfigError("protocol.tag", f"unknown protocol {tag!r}; choose from {sorted(SWEPT_PARAMETER)}")
    sweep = sections["sweep"]
    try:
        plan = SweepPlan(tag, SWEPT_PARAMETER[tag], tuple(_grid(sweep)), proto,
                         resolution_floor=sweep.get("resolution_floor", 2.0),
                         emulate_resolution=sweep.get("emulate_resolution", False))
    except ValueError as exc:
        raise ConfigError("sweep" if "grid" in str(exc) or "floor" in str(exc) else "protocol", str(exc)) from exc
    for key in ("t_f", "omega_prime", "omega_pi", "omega_minus"):
        if key in proto and proto[key] < 0:
            raise ConfigError(f"protocol.{key}", f"must be >= 0, got {proto[key]}")
    n = sections.get("noise", {})
    try:
        noise = AmplitudeNoise(n.get("sigma", 0.0), n.get("shots", 1), n.get("seed", 0))
    except ValueError as exc:
        raise ConfigError("noise", str(exc)) from exc
    fit = dict(sections.get("fit", {}))
    if fit.get("model", "lorentzian") not in MODELS:
        raise ConfigError("fit.model", f"choose from {MODELS}")
    p = sections.get("power", {})
    try:
        power = PowerConfig(p.get("efficiency", DEFAULT_EFFICIENCY))
    except ValueError as exc:
        raise ConfigError("power.efficiency", str(exc)) from exc
    out = dict(sections.get("output", {}))
    if out.get("format", "csv") not in ("csv", "json"):
        raise ConfigError("output.format", "choose csv or json")
    return ExperimentConfig(system, plan, noise, fit, power,
                            (p.get("b_min", 200.0), p.get("b_max", 3000.0), p.get("b_step", 200.0)),
                            out, sections)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from exc
    return build_config(parse_sections(text, str(path)))
