import math

import numpy as np
import pytest
import scipy.special

from pmhhdr.model import make_system
from pmhhdr.spectroscopy.analytic import (
    a_par_from_hh_dip, a_par_from_pm_dip, a_par_from_xy_dip, analytic_pm_signal, bessel_j1, bessel_j1_vec,
    hh_target, pm_flip_flop_rate, predict_pm_resonances, sideband_argument, xy_resonance_tau,
)


def series_j1(x, terms=30):
    return sum((-1) ** m / (math.factorial(m) * math.factorial(m + 1)) * (x / 2) ** (2 * m + 1)
               for m in range(terms))


def test_j1_zero():
    assert bessel_j1(0.0) == 0.0


def test_j1_one_against_series():
    assert bessel_j1(1.0) == pytest.approx(series_j1(1.0), abs=1e-15)
    assert bessel_j1(1.0) == pytest.approx(0.4400505857, abs=1e-9)


def test_j1_odd(rng):
    for x in rng.uniform(0, 100, 100):
        assert bessel_j1(-x) == -bessel_j1(x)


def test_j1_against_scipy():
    xs = np.concatenate([np.linspace(-100, 100, 4001), [11.999, 12.0, 12.001, 99.999, 100.0]])
    assert np.max(np.abs(bessel_j1_vec(xs) - scipy.special.j1(xs))) < 1e-10


@pytest.mark.parametrize("x", [100.0001, -101.0, math.inf, math.nan])
def test_j1_domain(x):
    with pytest.raises(ValueError):
        bessel_j1(x)


def test_predict_c1():
    sys = make_system(1840.0, [-11.3])
    (r,) = predict_pm_resonances(sys, 104.0)
    target = 1840.0 * 1.07084 + 11.3 / 2
    assert r.target == pytest.approx(target, rel=1e-15)
    assert r.target == pytest.approx(1975.9, abs=0.1)
    assert r.nu_minus == pytest.approx(1871.9, abs=0.1)
    assert r.nu_plus == pytest.approx(2079.9, abs=0.1)
    assert not r.lower_degenerate


def test_predict_degenerate_limit():
    sys = make_system(1840.0, [0.0])
    (r,) = predict_pm_resonances(sys, 0.0)
    assert r.nu_minus == r.nu_plus == sys.larmor_khz
    (r,) = predict_pm_resonances(sys, 3000.0)
    assert r.lower_degenerate


def test_predict_slopes_exact():
    sys = make_system(1840.0, [17.2])
    a = predict_pm_resonances(sys, 60.0)[0]
    b = predict_pm_resonances(sys, 130.0)[0]
    assert (b.nu_minus - a.nu_minus) / 70.0 == pytest.approx(-1.0, abs=1e-12)
    assert (b.nu_plus - a.nu_plus) / 70.0 == pytest.approx(1.0, abs=1e-12)


def test_signal_law_limits():
    assert analytic_pm_signal(0.0, 104.0, 1872.0, 1e4) == 1.0
    rate = pm_flip_flop_rate(50.0, 104.0, 1872.0)
    half_period = 1.0 / (2 * rate * 1e-3)
    assert analytic_pm_signal(50.0, 104.0, 1872.0, half_period) == pytest.approx(0.0, abs=1e-20)
    assert analytic_pm_signal(50.0, 104.0, 1872.0, 2 * half_period) == pytest.approx(1.0, abs=1e-12)


def test_signal_law_small_argument_monotone():
    nu = 1872.0
    rates = [pm_flip_flop_rate(10.0, w, nu) for w in np.linspace(1.0, 300.0, 50)]
    assert np.all(np.diff(rates) > 0)
    x = sideband_argument(1.0, nu)
    assert bessel_j1(x) == pytest.approx(x / 2, rel=1e-6)


def test_inversions_roundtrip():
    larmor = 1970.3456
    for a in (-11.3, 0.0, 38.0):
        t = hh_target(larmor, a)
        assert a_par_from_hh_dip(t, larmor) == pytest.approx(a, abs=1e-9)
        assert a_par_from_pm_dip(t - 104.0, larmor, 104.0) == pytest.approx(a, abs=1e-9)
        assert a_par_from_pm_dip(t + 104.0, larmor, 104.0) == pytest.approx(a, abs=1e-9)
        for k in (1, 40):
            tau = xy_resonance_tau(larmor, a, k)
            assert a_par_from_xy_dip(tau, larmor, k) == pytest.approx(a, abs=1e-9)
            assert a_par_from_xy_dip(tau, larmor) == pytest.approx(a, abs=1e-9)
    with pytest.raises(ValueError):
        xy_resonance_tau(larmor, 0.0, 0)
