"""Rotating-frame engine versus the lab-frame fine-step oracle."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import SpinSystemSpec, make_system
from .propagator import LabDrive, initial_state, lab_frame_oracle, measure_dressed_population
from .spectroscopy.analytic import hh_target
from .spectroscopy.sweep import SweepPlan, compile_point, run_sweep


@dataclass(frozen=True)
class OracleComparison:
    x: np.ndarray
    rotating: np.ndarray
    lab: np.ndarray
    carrier: float
    tolerance: float

    @property
    def rms(self) -> float:
        return float(np.sqrt(np.mean((self.rotating - self.lab) ** 2)))

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.rotating - self.lab)))

    @property
    def passed(self) -> bool:
        return self.rms < self.tolerance


def internal_frequencies_mhz(sys: SpinSystemSpec, plan: SweepPlan) -> float:
    """Largest frequency other than the carrier: Rabi drive, Larmor or hyperfine (MHz)."""
    top = max(plan.grid) if plan.protocol_tag == "hhdr" else 2 * plan.fixed_params.get("omega_prime", 0)
    hyper = max((max(abs(n.hyperfine.a_par), n.hyperfine.a_perp) for n in sys.nuclei), default=0.0)
    return 1e-3 * max(top, sys.larmor_khz, hyper)


def oracle_comparison(sys: SpinSystemSpec, plan: SweepPlan, carrier: float,
                      steps_per_cycle: int = 50, tolerance: float = 0.01) -> OracleComparison:
    """Signal at every grid point from both engines (plus_x readout, electron starting in |+>)."""
    if plan.protocol_tag == "xy_n" and plan.fixed_params.get("omega_pi") is None:
        raise ValueError("the lab-frame oracle needs finite pulses (set omega_pi)")
    rotating = run_sweep(sys, plan).signal
    state = initial_state(sys, "plus", plan.fixed_params.get("nuclear_state", "mixed"))
    dt = 1.0 / (steps_per_cycle * carrier)
    lab = []
    for x in plan.grid:
        program = compile_point(plan, x)
        drive = LabDrive.from_program(program, carrier)
        rho = lab_frame_oracle(sys, drive, program.total_duration, dt, state)
        lab.append(measure_dressed_population(rho, "plus_x"))
    return OracleComparison(np.array(plan.grid), rotating, np.array(lab), carrier, tolerance)


def default_oracle_check(points: int = 100, carrier: float = 60.0, t_f: float = 10.0,
                         a_par: float = -11.3, a_perp: float = 100.0, b_z: float = 1840.0,
                         span: float = 200.0) -> OracleComparison:
    """HHDR Omega sweep across the k=1 Hartmann-Hahn dip."""
    sys = make_system(b_z, [a_par], [a_perp])
    center = hh_target(sys.larmor_khz, a_par)
    grid = np.linspace(center - span, center + span, points)
    plan = SweepPlan("hhdr", "omega", tuple(grid), {"t_f": t_f})
    ratio = carrier / internal_frequencies_mhz(sys, plan)
    if ratio < 25:
        raise ValueError(f"carrier {carrier} MHz is only {ratio:.1f}x the largest internal frequency")
    return oracle_comparison(sys, plan, carrier)
