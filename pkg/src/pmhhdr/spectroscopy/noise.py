"""Line width of the dominant dip as a function of relative drive-amplitude noise."""

from __future__ import annotations

from dataclasses import dataclass

from ..model import SpinSystemSpec
from .fitting import dominant_dip, fit_dips
from .sweep import AmplitudeNoise, SweepPlan, run_sweep


@dataclass(frozen=True)
class LinewidthPoint:
    sigma: float
    width: float
    width_err: float
    center: float
    ok: bool
    message: str = ""


def linewidth_vs_noise(sys: SpinSystemSpec, base_plan: SweepPlan, sigma_grid, shots: int = 32,
                       seed: int = 0, threads: int = 1, model: str = "lorentzian") -> list[LinewidthPoint]:
    """Sweep once per sigma and fit the deepest dip.

    All sigma values share the seed, so each shot sees the same standard
    normal draw scaled by a different sigma.  Failed fits are returned with
    ``ok=False`` instead of raising.
    """
    sigmas = [float(s) for s in sigma_grid]
    if len(sigmas) < 2:
        raise ValueError("linewidth_vs_noise needs at least two sigma values")
    out = []
    for sigma in sigmas:
        noise = AmplitudeNoise(sigma, shots if sigma > 0 else 1, seed)
        spec = run_sweep(sys, base_plan, noise, threads)
        try:
            dip = dominant_dip(fit_dips(spec, max_dips=1, model=model))
        except (ValueError, FloatingPointError) as exc:
            out.append(LinewidthPoint(sigma, float("nan"), float("nan"), float("nan"), False, str(exc)))
            continue
        if dip is None:
            out.append(LinewidthPoint(sigma, float("nan"), float("nan"), float("nan"), False, "no dip found"))
        else:
            out.append(LinewidthPoint(sigma, dip.width, dip.width_err, dip.center, True))
    return out
