"""
Peak and average microwave power for XY-N, HHDR and PM-HHDR.

Power follows from the Rabi frequency through a radiation efficiency
(kHz of Rabi frequency per sqrt(mW)): P = (Omega / efficiency)^2.  The
efficiency is hardware specific; the default is a placeholder, so absolute
numbers are only indicative while ratios between schemes are exact.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .model import PhysicalConstants

# Placeholder radiation efficiency in kHz/sqrt(mW); override from config.
DEFAULT_EFFICIENCY = 100.0

# PM tone amplitude relative to the Larmor frequency at 1840 G (104 kHz / 1970.3 kHz).
PM_FRACTION = 104.0 / (1840.0 * PhysicalConstants().gamma_n)
XY_TO_PM_FIELD = 250.0


@dataclass(frozen=True)
class PowerConfig:
    radiation_efficiency: float = DEFAULT_EFFICIENCY

    def __post_init__(self):
        if not self.radiation_efficiency > 0:
            raise ValueError(f"radiation_efficiency must be > 0, got {self.radiation_efficiency}")


@dataclass(frozen=True)
class HhdrScheme:
    omega: float

    @property
    def drive_khz(self) -> float:
        return self.omega

    @property
    def peak_rabi(self) -> float:
        return self.omega

    @property
    def duty(self) -> float:
        return 1.0


@dataclass(frozen=True)
class PmScheme:
    """Two equal tones of Rabi frequency ``omega_prime``; the envelope toggles between 2 Omega' and 0."""

    omega_prime: float

    @property
    def drive_khz(self) -> float:
        return self.omega_prime

    @property
    def peak_rabi(self) -> float:
        return 2.0 * self.omega_prime

    @property
    def duty(self) -> float:
        return 0.5


@dataclass(frozen=True)
class XyScheme:
    omega_pulse: float
    n_pulses: int
    tau: float
    t_pi: float | None = None

    @property
    def drive_khz(self) -> float:
        return self.omega_pulse

    @property
    def peak_rabi(self) -> float:
        return self.omega_pulse

    @property
    def pulse_length(self) -> float:
        return 500.0 / self.omega_pulse if self.t_pi is None else self.t_pi

    @property
    def total_time(self) -> float:
        return 2.0 * self.tau * self.n_pulses

    @property
    def duty(self) -> float:
        on = self.n_pulses * self.pulse_length
        if on > self.total_time * (1 + 1e-12):
            raise ValueError(f"pulses ({on:.4g} us) do not fit in the sequence ({self.total_time:.4g} us)")
        return on / self.total_time


Scheme = Union[HhdrScheme, PmScheme, XyScheme]


@dataclass(frozen=True)
class PowerResult:
    scheme: str
    rabi_khz: float
    peak_mw: float
    avg_mw: float
    duty: float


def _name(scheme: Scheme) -> str:
    return {HhdrScheme: "hhdr", PmScheme: "pm_hhdr", XyScheme: "xy_n"}[type(scheme)]


def _validate(scheme: Scheme) -> None:
    for name, value in vars(scheme).items():
        if value is not None and not value > 0:
            raise ValueError(f"{_name(scheme)}: {name} must be > 0, got {value}")


def power_for_scheme(cfg: PowerConfig, scheme: Scheme) -> PowerResult:
    _validate(scheme)
    peak = (scheme.peak_rabi / cfg.radiation_efficiency) ** 2
    duty = scheme.duty
    return PowerResult(_name(scheme), scheme.peak_rabi, peak, peak * duty, duty)


def field_ratio(a: Scheme, b: Scheme) -> float:
    """Ratio of the per-tone driving amplitudes (Omega, Omega', Omega_pulse)."""
    return a.drive_khz / b.drive_khz


def power_ratio(a: Scheme, b: Scheme) -> float:
    """Square of ``field_ratio``; efficiency independent."""
    return field_ratio(a, b) ** 2


def peak_power_ratio(a: Scheme, b: Scheme) -> float:
    return (a.peak_rabi / b.peak_rabi) ** 2


def schemes_at_field(b_z: float, constants: PhysicalConstants | None = None,
                     n_pulses: int = 32) -> list[Scheme]:
    """Representative drive settings at ``b_z`` (G) scaled from the 1840 G operating point.

    HHDR drives at the Larmor frequency, PM-HHDR at a fixed fraction of it and
    XY-N pulses are 250x the PM tone, with tau on the first harmonic.
    """
    constants = constants or PhysicalConstants()
    larmor = constants.gamma_n * b_z
    omega_prime = PM_FRACTION * larmor
    tau = 1.0 / (4.0 * larmor * 1e-3)
    return [HhdrScheme(larmor), PmScheme(omega_prime), XyScheme(XY_TO_PM_FIELD * omega_prime, n_pulses, tau)]


def power_table(b_values, cfg: PowerConfig | None = None,
                constants: PhysicalConstants | None = None) -> list[dict]:
    cfg = cfg or PowerConfig()
    rows = []
    for b in np.atleast_1d(np.asarray(b_values, float)):
        if not b > 0:
            raise ValueError(f"B_z must be > 0, got {b}")
        for scheme in schemes_at_field(float(b), constants):
            r = power_for_scheme(cfg, scheme)
            rows.append({"scheme": r.scheme, "b_z": float(b), "rabi_khz": r.rabi_khz,
                         "peak_mw": r.peak_mw, "avg_mw": r.avg_mw})
    return rows


def write_power_csv(rows: list[dict], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["scheme", "b_z", "rabi_khz", "peak_mw", "avg_mw"])
        writer.writeheader()
        writer.writerows(rows)
    return path


def summary_ratios(omega_hhdr: float = 1970.0, omega_prime: float = 104.0) -> dict:
    hh, pm = HhdrScheme(omega_hhdr), PmScheme(omega_prime)
    xy = XyScheme(XY_TO_PM_FIELD * omega_prime, 32, 1.0)
    return {
        "field_hhdr_over_pm": field_ratio(hh, pm),
        "field_xy_over_pm": field_ratio(xy, pm),
        "power_xy_over_pm": power_ratio(xy, pm),
        "peak_field_hhdr_over_pm": hh.peak_rabi / pm.peak_rabi,
        "peak_power_hhdr_over_pm": peak_power_ratio(hh, pm),
        "log10_power_xy_over_pm": math.log10(power_ratio(xy, pm)),
    }
