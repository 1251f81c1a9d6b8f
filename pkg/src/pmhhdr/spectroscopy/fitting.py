"""
Dip detection, sum-of-lineshape fitting and coupling extraction.

Detection: local minima lying more than 3 * noise below the median signal
whose prominence also exceeds max(3 * noise, 10% of the spectrum's depth
range, 1e-4).  The noise is the median absolute deviation of first
differences.  The relative floor
keeps the sinc^2 side lobes of Fourier-limited dips from being reported.

Refinement: Powell's derivative-free search over a baseline plus one
(center, FWHM, depth) triple per dip, repeated until the RMS residual
changes by less than ``tol`` or ``max_iter`` iterations are spent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.signal import find_peaks, peak_widths

from .analytic import a_par_from_hh_dip, a_par_from_pm_dip, a_par_from_xy_dip
from .sweep import Spectrum

MODELS = ("lorentzian", "gaussian")
NOISE_FACTOR = 3.0
REL_FLOOR = 0.1
ABS_FLOOR = 1e-4


def lorentzian_dip(x, center, fwhm, depth):
    return depth / (1.0 + (2.0 * (x - center) / fwhm) ** 2)


def gaussian_dip(x, center, fwhm, depth):
    return depth * np.exp(-4.0 * math.log(2.0) * ((x - center) / fwhm) ** 2)


_SHAPES = {"lorentzian": lorentzian_dip, "gaussian": gaussian_dip}


def dip_model(x, baseline, dips, model="lorentzian"):
    """baseline - sum of dips, each dip a (center, fwhm, depth) triple."""
    shape = _SHAPES[model]
    y = np.full_like(np.asarray(x, dtype=float), baseline)
    for c, w, d in dips:
        y -= shape(x, c, w, d)
    return y


@dataclass
class Dip:
    center: float
    width: float
    depth: float
    a_par: float | None = None
    center_err: float = float("nan")
    width_err: float = float("nan")
    sideband: str | None = None
    ambiguous: bool = False


@dataclass
class DipReport:
    dips: list[Dip] = field(default_factory=list)
    fit_residual: float = 0.0
    model: str = "lorentzian"
    converged: bool = True
    iterations: int = 0
    baseline: float = 1.0
    x_unit: str = "kHz"
    pairs: list = field(default_factory=list)

    def a_par_values(self, paired: bool = False) -> list[float]:
        if paired:
            return sorted(p.a_par for p in self.pairs)
        return [d.a_par for d in self.dips if d.a_par is not None]

    def to_dict(self) -> dict:
        key = "center_khz" if self.x_unit == "kHz" else "center_us"
        wkey = "width_khz" if self.x_unit == "kHz" else "width_us"
        dips = []
        for d in self.dips:
            item = {key: d.center, wkey: d.width, "depth": d.depth, "a_par_khz": d.a_par,
                    "center_err": d.center_err, "width_err": d.width_err,
                    "sideband": d.sideband, "ambiguous": d.ambiguous}
            dips.append(item)
        return {"model": self.model, "residual": self.fit_residual, "converged": self.converged,
                "iterations": self.iterations, "baseline": self.baseline, "x_unit": self.x_unit,
                "dips": dips,
                "pairs": [{"a_par_khz": p.a_par, "omega_eff_khz": p.omega_eff,
                           "lower_center_khz": p.lower.center, "upper_center_khz": p.upper.center}
                          for p in self.pairs]}


def robust_noise(y: np.ndarray) -> float:
    """White-noise std estimate from the MAD of first differences."""
    if len(y) < 3:
        return 0.0
    d = np.diff(y)
    return float(1.4826 * np.median(np.abs(d - np.median(d))) / math.sqrt(2.0))


def detect_dips(x: np.ndarray, y: np.ndarray, max_dips: int) -> list[tuple[float, float, float]]:
    """Seed (center, fwhm, depth) triples for the ``max_dips`` most prominent dips."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    noise = robust_noise(y)
    # the median sits on the noise mean while dips cover a minority of the grid
    level = float(np.median(y))
    baseline = float(np.percentile(y, 90))
    span = baseline - float(y.min())
    prominence = max(NOISE_FACTOR * noise, REL_FLOOR * span, ABS_FLOOR)
    peaks, props = find_peaks(-y, prominence=prominence)
    keep = y[peaks] < level - NOISE_FACTOR * noise
    peaks, prom = peaks[keep], props["prominences"][keep]
    if not len(peaks):
        return []
    order = np.argsort(prom)[::-1][:max_dips]
    peaks = np.sort(peaks[order])
    widths_idx = peak_widths(-y, peaks, rel_height=0.5)[0]
    step = float(np.median(np.diff(x)))
    seeds = []
    for p, wi in zip(peaks, widths_idx):
        seeds.append((float(x[p]), max(float(wi) * step, step), max(baseline - float(y[p]), ABS_FLOOR)))
    return seeds


def _unpack(theta, n):
    b = theta[0]
    dips = [(theta[1 + 3 * i], math.exp(theta[2 + 3 * i]), theta[3 + 3 * i]) for i in range(n)]
    return b, dips


def _jacobian_errors(u, y, b, dips, model, scale):
    """1-sigma errors of (center, fwhm) in physical units from the residual Jacobian."""
    p = [b] + [v for dip in dips for v in dip]
    p = np.array(p, float)

    def resid(q):
        qd = [(q[1 + 3 * i], q[2 + 3 * i], q[3 + 3 * i]) for i in range(len(dips))]
        return dip_model(u, q[0], qd, model) - y

    r0 = resid(p)
    jac = np.empty((len(y), len(p)))
    for k in range(len(p)):
        h = 1e-6 * max(abs(p[k]), 1e-3)
        dp = np.zeros_like(p)
        dp[k] = h
        jac[:, k] = (resid(p + dp) - resid(p - dp)) / (2 * h)
    dof = len(y) - len(p)
    if dof <= 0:
        return [(float("nan"), float("nan"))] * len(dips)
    s2 = float(r0 @ r0) / dof
    cov = s2 * np.linalg.pinv(jac.T @ jac)
    err = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    return [(err[1 + 3 * i] * scale, err[2 + 3 * i] * scale) for i in range(len(dips))]


def fit_lineshape(x, y, seeds, model="lorentzian", tol=1e-6, max_iter=500):
    """Refine seeded dips; returns (baseline, dips, errors, rms, converged, iterations)."""
    if model not in _SHAPES:
        raise ValueError(f"unknown model {model!r}; choose from {MODELS}")
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    x0, scale = float(x[0]), float(x[-1] - x[0])
    u = (x - x0) / scale
    step = float(np.min(np.diff(u)))
    n = len(seeds)
    theta = [float(np.percentile(y, 90))]
    lo, hi = [0.0], [1.5]
    direc = [1e-3]
    for c, w, d in seeds:
        wn = max(w / scale, step / 2)
        theta += [(c - x0) / scale, math.log(wn), d]
        lo += [0.0, math.log(step / 8), 0.0]
        hi += [1.0, math.log(4.0), 1.0]
        direc += [0.05 * wn, 0.05, 0.05 * max(d, 1e-3)]
    theta = np.clip(np.array(theta), lo, hi)
    lo, hi = np.array(lo), np.array(hi)

    def sse(t):
        b, dips = _unpack(t, n)
        r = dip_model(u, b, dips, model) - y
        return float(r @ r)

    def objective(t):
        # quadratic wall keeps the line searches local and inside the valid box
        excess = np.maximum(lo - t, 0.0) + np.maximum(t - hi, 0.0)
        return sse(np.clip(t, lo, hi)) + 1e3 * float(excess @ excess)

    def rms(t):
        return math.sqrt(sse(t) / len(y))

    used = 0
    converged = False
    prev = rms(theta)
    while used < max_iter:
        res = minimize(objective, theta, method="Powell",
                       options={"maxiter": min(50, max_iter - used), "xtol": 1e-10, "ftol": 1e-14,
                                "direc": np.diag(direc)})
        res.x = np.clip(res.x, lo, hi)
        used += max(int(res.nit), 1)
        theta = res.x
        cur = rms(theta)
        if abs(prev - cur) < tol:
            converged = True
            break
        prev = cur

    b, dips_u = _unpack(theta, n)
    errs = _jacobian_errors(u, y, b, dips_u, model, scale)
    dips = [(x0 + c * scale, w * scale, d) for c, w, d in dips_u]
    return b, dips, errs, rms(theta), converged, used


def _assign(spec: Spectrum, center: float) -> tuple[float | None, str | None, bool]:
    plan = spec.plan
    larmor = spec.larmor_khz
    if larmor is None:
        return None, None, False
    fp = plan.fixed_params
    if plan.protocol_tag == "pm_hhdr":
        step = plan.step or 0.0
        if abs(center - larmor) <= step:
            return None, None, True
        side = "lower" if center < larmor else "upper"
        return a_par_from_pm_dip(center, larmor, fp["omega_prime"]), side, False
    if plan.protocol_tag == "hhdr":
        return a_par_from_hh_dip(center, larmor), None, False
    harmonic = fp.get("harmonic")
    return a_par_from_xy_dip(center, larmor, None if harmonic is None else int(harmonic)), None, False


def _windows(x: np.ndarray) -> list[slice]:
    """Contiguous runs of the grid; a gap wider than 5 median steps starts a new run."""
    if len(x) < 2:
        return [slice(0, len(x))]
    d = np.diff(x)
    cuts = np.flatnonzero(d > 5.0 * np.median(d)) + 1
    edges = [0, *cuts.tolist(), len(x)]
    return [slice(a, b) for a, b in zip(edges[:-1], edges[1:])]


def fit_dips(spec: Spectrum, max_dips: int = 5, model: str = "lorentzian",
             tol: float = 1e-6, max_iter: int = 500) -> DipReport:
    """Detect, fit and convert dips to A_par values.

    Each contiguous window of the grid (for example one PM sideband) is fitted
    on its own with up to ``max_dips`` dips.  For PM sweeps covering both
    sidebands the report also carries the matched pairs.
    """
    if len(spec) < 10:
        raise ValueError(f"fit_dips needs at least 10 points, got {len(spec)}")
    unit = spec.plan.x_unit
    out: list[Dip] = []
    sq, npts, used, converged, baselines = 0.0, 0, 0, True, []
    for win in _windows(spec.x):
        x, y = spec.x[win], spec.signal[win]
        seeds = detect_dips(x, y, max_dips) if len(x) >= 5 else []
        if not seeds:
            sq += float(np.sum((y - np.median(y)) ** 2))
            npts += len(y)
            baselines.append(float(np.median(y)))
            continue
        b, dips, errs, rms, ok, it = fit_lineshape(x, y, seeds, model, tol, max_iter)
        sq += rms**2 * len(y)
        npts += len(y)
        used += it
        converged &= ok
        baselines.append(b)
        for (c, w, d), (ce, we) in zip(dips, errs):
            a_par, side, ambiguous = _assign(spec, c)
            out.append(Dip(c, w, d, a_par, ce, we, side, ambiguous))
    out.sort(key=lambda dip: dip.center)
    report = DipReport(out, math.sqrt(sq / max(npts, 1)), model, converged, used,
                       float(np.mean(baselines)) if baselines else 1.0, unit)
    if spec.plan.protocol_tag == "pm_hhdr" and spec.larmor_khz is not None:
        lower = [d for d in out if d.sideband == "lower"]
        upper = [d for d in out if d.sideband == "upper"]
        report.pairs = pair_sidebands(lower, upper, spec.larmor_khz)
    return report


@dataclass(frozen=True)
class SidebandPair:
    lower: Dip
    upper: Dip
    a_par: float
    omega_eff: float


def pair_sidebands(lower: DipReport | list[Dip], upper: DipReport | list[Dip], larmor_khz: float,
                   max_gap: float | None = None) -> list[SidebandPair]:
    """Match lower and upper PM sidebands of the same nucleus.

    A drive-induced shift of the effective Rabi frequency moves the two
    sidebands of every line in opposite directions, so the midpoint
    (nu_lower + nu_upper)/2 is free of it to first order.  Dips are matched in
    order of their single-sideband A_par estimates; pairs whose estimates
    differ by more than ``max_gap`` kHz are dropped.
    """
    lo = [d for d in (lower.dips if isinstance(lower, DipReport) else lower) if d.a_par is not None]
    up = [d for d in (upper.dips if isinstance(upper, DipReport) else upper) if d.a_par is not None]
    lo.sort(key=lambda d: d.a_par)
    up.sort(key=lambda d: d.a_par)
    if len(lo) != len(up) or not lo:
        return []
    pairs = []
    for dl, du in zip(lo, up):
        if max_gap is not None and abs(dl.a_par - du.a_par) > max_gap:
            continue
        mid = 0.5 * (dl.center + du.center)
        pairs.append(SidebandPair(dl, du, 2.0 * (larmor_khz - mid), 0.5 * (du.center - dl.center)))
    return pairs


def dominant_dip(report: DipReport) -> Dip | None:
    return max(report.dips, key=lambda d: d.depth, default=None)


__all__ = ["Dip", "DipReport", "SidebandPair", "pair_sidebands", "detect_dips", "dip_model", "dominant_dip", "fit_dips",
           "fit_lineshape", "gaussian_dip", "lorentzian_dip", "robust_noise"]
