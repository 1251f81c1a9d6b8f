"""
Parameter sweeps with optional Monte Carlo drive-amplitude noise.

Every grid point is an independent work item.  Shot ``j`` at grid index
``i`` draws its amplitude error from ``SeedSequence([seed, i, j])``, so a
spectrum depends only on the seed and never on thread scheduling.  The same
standard-normal draws are reused for every noise level, which keeps
line-width-versus-noise curves smooth.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..model import SpinSystemSpec
from ..propagator import (
    DensityState, apply_dephasing, batched_final_rho, initial_state, measure_dressed_population,
)
from ..sequences import FinitePulse, PmParams, compile_hhdr, compile_pm_hhdr, compile_xyn

logger = logging.getLogger(__name__)

SWEPT_PARAMETER = {"pm_hhdr": "nu", "hhdr": "omega", "xy_n": "tau"}
X_UNITS = {"nu": "kHz", "omega": "kHz", "tau": "us"}

_COMMON_KEYS = {"readout", "electron_state", "nuclear_state", "dephasing_rate"}
_PROTOCOL_KEYS = {
    "pm_hhdr": {"omega_prime", "t_f", "omega_minus", "start_high"},
    "hhdr": {"t_f"},
    "xy_n": {"n_pulses", "omega_pi", "harmonic"},
}
_REQUIRED_KEYS = {"pm_hhdr": {"omega_prime", "t_f"}, "hhdr": {"t_f"}, "xy_n": {"n_pulses"}}


class SweepError(RuntimeError):
    def __init__(self, message: str, index: int | None = None, x: float | None = None):
        super().__init__(message)
        self.index = index
        self.x = x


@dataclass(frozen=True)
class SweepPlan:
    protocol_tag: str
    swept_parameter: str
    grid: tuple[float, ...]
    fixed_params: dict = field(default_factory=dict)
    resolution_floor: float = 2.0
    emulate_resolution: bool = False

    def __post_init__(self):
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))
        expected = SWEPT_PARAMETER.get(self.protocol_tag)
        if expected is None:
            raise ValueError(f"unknown protocol {self.protocol_tag!r}")
        if self.swept_parameter != expected:
            raise ValueError(f"protocol {self.protocol_tag} sweeps {expected!r}, "
                             f"not {self.swept_parameter!r}")
        unknown = set(self.fixed_params) - _PROTOCOL_KEYS[self.protocol_tag] - _COMMON_KEYS
        if unknown:
            raise ValueError(f"unknown fixed parameter(s) for {self.protocol_tag}: {sorted(unknown)}")
        missing = _REQUIRED_KEYS[self.protocol_tag] - set(self.fixed_params)
        if missing:
            raise ValueError(f"missing fixed parameter(s) for {self.protocol_tag}: {sorted(missing)}")
        steps = np.diff(self.grid)
        if np.any(steps <= 0):
            raise ValueError("sweep grid must be strictly increasing")
        if self.emulate_resolution and steps.size and steps.min() < self.resolution_floor * (1 - 1e-9):
            raise ValueError(f"grid step {steps.min():.4g} is below the resolution floor "
                             f"{self.resolution_floor:.4g}")

    @property
    def x_unit(self) -> str:
        return X_UNITS[self.swept_parameter]

    @property
    def step(self) -> float:
        return float(np.min(np.diff(self.grid))) if len(self.grid) > 1 else 0.0

    @classmethod
    def from_range(cls, protocol_tag: str, start: float, stop: float, step: float,
                   fixed_params: dict | None = None, **kw) -> "SweepPlan":
        """Grid start, start+step, ... up to and including ``stop`` (within step/1000)."""
        n = int(np.floor((stop - start) / step + 1e-3)) + 1
        grid = start + step * np.arange(max(n, 0))
        return cls(protocol_tag, SWEPT_PARAMETER[protocol_tag], tuple(grid), dict(fixed_params or {}), **kw)


@dataclass(frozen=True)
class AmplitudeNoise:
    """Relative Gaussian error on the drive amplitude, redrawn every shot."""

    sigma: float = 0.0
    shots: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")


@dataclass(frozen=True)
class Spectrum:
    x: np.ndarray
    signal: np.ndarray
    plan: SweepPlan
    shots: int = 1
    seed: int = 0
    sigma: float = 0.0
    larmor_khz: float | None = None
    b_z: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "signal", np.asarray(self.signal, dtype=float))
        if self.x.shape != self.signal.shape:
            raise ValueError("one signal value per grid point is required")

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.x.tolist(), self.signal.tolist()))

    def __len__(self) -> int:
        return len(self.x)


def shot_factors(noise: AmplitudeNoise | None, index: int) -> np.ndarray:
    """Amplitude factors (1 + delta) for every shot at grid index ``index``."""
    if noise is None:
        return np.ones(1)
    z = np.array([np.random.default_rng(np.random.SeedSequence([noise.seed, index, j])).standard_normal()
                  for j in range(noise.shots)])
    return np.abs(1.0 + noise.sigma * z)


def compile_point(plan: SweepPlan, x: float, factor: float = 1.0):
    """Program for one grid value with the drive amplitude scaled by ``factor``."""
    fp = plan.fixed_params
    if plan.protocol_tag == "pm_hhdr":
        om_minus = fp.get("omega_minus")
        return compile_pm_hhdr(PmParams(
            omega_prime=fp["omega_prime"] * factor, nu=x, t_f=fp["t_f"],
            omega_minus=None if om_minus is None else om_minus * factor,
            start_high=fp.get("start_high", True)))
    if plan.protocol_tag == "hhdr":
        return compile_hhdr(x * factor, fp["t_f"])
    omega_pi = fp.get("omega_pi")
    model = "ideal" if omega_pi is None else FinitePulse(omega_pi)
    return compile_xyn(int(fp["n_pulses"]), x, model, pulse_scale=factor)


def _default_electron(plan: SweepPlan) -> str:
    # XY-N starts from |0> after an ideal pi/2, which is |+> in this basis
    return plan.fixed_params.get("electron_state", "plus")


def run_sweep(sys: SpinSystemSpec, plan: SweepPlan, noise: AmplitudeNoise | None = None,
              threads: int = 1) -> Spectrum:
    """Compile, propagate and read out every grid point, averaging over noise shots."""
    fp = plan.fixed_params
    rho0 = initial_state(sys, _default_electron(plan), fp.get("nuclear_state", "mixed")).rho
    readout = fp.get("readout", "plus_x")
    dephasing = float(fp.get("dephasing_rate", 0.0))
    noisy = noise is not None and noise.sigma > 0

    def point(i: int) -> float:
        x = plan.grid[i]
        try:
            factors = shot_factors(noise, i) if noisy else np.ones(1)
            programs = [compile_point(plan, x, f) for f in factors]
            rhos = batched_final_rho(rho0, programs, sys)
            if dephasing > 0:
                rhos = np.stack([apply_dephasing(DensityState(r), dephasing, p.total_duration).rho
                                 for r, p in zip(rhos, programs)])
            values = measure_dressed_population(rhos, readout)
            if not np.all(np.isfinite(values)):
                raise FloatingPointError("non-finite signal")
            return float(np.mean(values))
        except Exception as exc:
            raise SweepError(f"grid point {i} ({plan.swept_parameter}={x:.9g}): {exc}", i, x) from exc

    n = len(plan.grid)
    if threads > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            signal = list(pool.map(point, range(n)))
    else:
        signal = [point(i) for i in range(n)]
    logger.debug("swept %d points of %s", n, plan.protocol_tag)
    return Spectrum(
        x=np.array(plan.grid), signal=np.array(signal), plan=plan,
        shots=noise.shots if noise is not None else 1,
        seed=noise.seed if noise is not None else 0,
        sigma=noise.sigma if noise is not None else 0.0,
        larmor_khz=sys.larmor_khz, b_z=sys.b_z,
    )
