"""Sweeps, analytic resonance models, dip fitting and noise studies."""

from .analytic import (
    PmResonance, a_par_from_hh_dip, a_par_from_pm_dip, a_par_from_xy_dip, analytic_pm_signal,
    bessel_j1, hh_target, pm_flip_flop_rate, predict_pm_resonances, xy_resonance_tau,
)
from .fitting import Dip, DipReport, SidebandPair, dominant_dip, fit_dips, pair_sidebands
from .io import read_spectrum_csv, write_report_json, write_spectrum_csv
from .noise import LinewidthPoint, linewidth_vs_noise
from .sweep import AmplitudeNoise, Spectrum, SweepError, SweepPlan, run_sweep

__all__ = [
    "AmplitudeNoise", "Dip", "DipReport", "LinewidthPoint", "PmResonance", "SidebandPair", "Spectrum",
    "SweepError", "SweepPlan", "a_par_from_hh_dip", "a_par_from_pm_dip", "a_par_from_xy_dip",
    "analytic_pm_signal", "bessel_j1", "dominant_dip", "fit_dips", "hh_target", "linewidth_vs_noise",
    "pair_sidebands", "pm_flip_flop_rate", "predict_pm_resonances", "read_spectrum_csv", "run_sweep",
    "write_report_json", "write_spectrum_csv", "xy_resonance_tau",
]
