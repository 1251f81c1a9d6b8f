"""Closed-form resonance conditions, the Bessel signal law and J1."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..model import KHZ, SpinSystemSpec

BESSEL_MAX_ARG = 100.0
_SERIES_LIMIT = 12.0


def _j1_series(x: float) -> float:
    half = 0.5 * x
    term = half
    terms = [term]
    m = 0
    while True:
        term *= -(half * half) / ((m + 1) * (m + 2))
        m += 1
        terms.append(term)
        if abs(term) < 1e-18 and m > 3:
            return math.fsum(terms)


def _j1_asymptotic(x: float) -> float:
    # Hankel expansion, truncated at the smallest term
    mu = 4.0
    chi = x - 0.75 * math.pi
    p = q = 0.0
    coef = 1.0
    prev = math.inf
    k = 0
    while True:
        t = coef / x**k
        if abs(t) > prev or abs(t) < 1e-17:
            break
        prev = abs(t)
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2 == 0:
            p += sign * t
        else:
            q += sign * t
        coef *= (mu - (2 * k + 1) ** 2) / ((k + 1) * 8.0)
        k += 1
    return math.sqrt(2.0 / (math.pi * x)) * (p * math.cos(chi) - q * math.sin(chi))


def bessel_j1(x: float) -> float:
    """Bessel function of the first kind, order one, for |x| <= 100 (abs. error < 1e-10)."""
    x = float(x)
    ax = abs(x)
    if not ax <= BESSEL_MAX_ARG:
        raise ValueError(f"bessel_j1 argument {x} outside [-{BESSEL_MAX_ARG}, {BESSEL_MAX_ARG}]")
    val = _j1_series(ax) if ax <= _SERIES_LIMIT else _j1_asymptotic(ax)
    return -val if x < 0 else val


def sideband_argument(omega_prime: float, nu: float) -> float:
    """4 Omega' / (pi nu): first-harmonic depth of the triangular phase of the toggled drive."""
    return 4.0 * omega_prime / (math.pi * nu)


def pm_flip_flop_rate(a_perp: float, omega_prime: float, nu: float) -> float:
    """Oscillation frequency (kHz) of the on-resonance PM-HHDR signal, A_perp J1(.)/2."""
    return 0.5 * a_perp * bessel_j1(sideband_argument(omega_prime, nu))


def analytic_pm_signal(a_perp: float, omega_prime: float, nu: float, t_f: float) -> float:
    """On-resonance signal cos^2(2 pi A_perp J1(4 Omega'/(pi nu)) t_f / 4).

    ``a_perp``, ``omega_prime``, ``nu`` in kHz; ``t_f`` in us.  This is the
    dressed-state population for a nucleus starting in the resonant state.
    """
    coupling = a_perp * bessel_j1(sideband_argument(omega_prime, nu))
    return math.cos(2 * math.pi * coupling * KHZ * t_f / 4.0) ** 2


def hh_target(larmor_khz: float, a_par: float) -> float:
    """|gamma_n B_z - A_par/2| in kHz: the mean nuclear precession frequency under spin locking."""
    return abs(larmor_khz - 0.5 * a_par)


@dataclass(frozen=True)
class PmResonance:
    label: str
    target: float
    nu_minus: float
    nu_plus: float

    @property
    def lower_degenerate(self) -> bool:
        return self.nu_minus <= 0


def predict_pm_resonances(sys: SpinSystemSpec, omega_prime: float) -> list[PmResonance]:
    """Both sidebands |Omega' +- nu| = |gamma_n B_z - A_par/2| for every nucleus.

    nu_minus = target - Omega' is flagged through ``lower_degenerate`` when it
    is not positive.
    """
    out = []
    for nucleus in sys.nuclei:
        target = hh_target(sys.larmor_khz, nucleus.hyperfine.a_par)
        out.append(PmResonance(nucleus.label, target, target - omega_prime, target + omega_prime))
    return out


def xy_resonance_tau(larmor_khz: float, a_par: float, harmonic: int = 1) -> float:
    """Interval tau (us) of tau-pi-2tau-pi-tau at which the k-th harmonic meets a nucleus.

    The filter passes (2k-1)/(4 tau); the nucleus precesses at the mean of its
    m_s=0 and m_s=+1 frequencies, |gamma_n B_z - A_par/2|.
    """
    if harmonic < 1:
        raise ValueError("harmonic must be >= 1")
    return (2 * harmonic - 1) / (4.0 * hh_target(larmor_khz, a_par) * KHZ)


def a_par_from_pm_dip(center: float, larmor_khz: float, omega_prime: float) -> float:
    """Invert the PM resonance condition; dips below the Larmor frequency are lower sidebands."""
    shift = omega_prime if center < larmor_khz else -omega_prime
    return 2.0 * (larmor_khz - (center + shift))


def a_par_from_hh_dip(center: float, larmor_khz: float) -> float:
    return 2.0 * (larmor_khz - center)


def a_par_from_xy_dip(tau_center: float, larmor_khz: float, harmonic: int | None = None) -> float:
    """Invert ``xy_resonance_tau``; the harmonic is inferred from the bare Larmor frequency if omitted."""
    if harmonic is None:
        harmonic = int(round((4.0 * tau_center * larmor_khz * KHZ + 1) / 2))
    mean_freq = (2 * harmonic - 1) / (4.0 * tau_center) / KHZ
    return 2.0 * (larmor_khz - mean_freq)


bessel_j1_vec = np.vectorize(bessel_j1, otypes=[float])
