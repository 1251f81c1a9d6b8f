import math

import numpy as np
import pytest

from pmhhdr.model import make_system
from pmhhdr.propagator import final_state, initial_state, measure_dressed_population
from pmhhdr.sequences import (
    XY8_PHASES, Block, ControlProgram, DriveSegment, FinitePulse, PmParams, PulseSegment,
    compile_hhdr, compile_pm_hhdr, compile_xyn,
)
from pmhhdr.spectroscopy import SweepPlan, fit_dips, run_sweep, xy_resonance_tau
from pmhhdr.spectroscopy.analytic import bessel_j1


def signal(sys, program, electron="plus"):
    return measure_dressed_population(final_state(initial_state(sys, electron), program, sys))


def test_hhdr_single_segment():
    p = compile_hhdr(1970.0, 8.0)
    assert p.n_segments == 1
    assert p.total_duration == 8.0
    assert p.segments[0].amplitude == 1970.0


def test_hhdr_zero_time_signal_one(c1_system):
    assert signal(c1_system, compile_hhdr(1970.0, 0.0)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("omega,t_f", [(0.0, 1.0), (-5.0, 1.0), (10.0, -1.0)])
def test_hhdr_rejects(omega, t_f):
    with pytest.raises(ValueError):
        compile_hhdr(omega, t_f)


def test_pm_half_period_count():
    p = PmParams(104.0, 1872.0, 300.0)
    # floor(2 nu t_f) with nu in kHz and t_f in us
    assert p.n_half_periods == math.floor(2 * 1872.0 * 300.0 * 1e-3) == 1123
    prog = compile_pm_hhdr(p)
    assert prog.n_segments == 1123
    assert prog.metadata["realized_t_f"] == pytest.approx(1123 * 500.0 / 1872.0, rel=1e-15)
    assert prog.total_duration == pytest.approx(prog.metadata["realized_t_f"], rel=1e-12)
    assert 300.0 - prog.total_duration < p.half_period


def test_pm_alternation():
    prog = compile_pm_hhdr(PmParams(104.0, 1000.0, 3.0))
    amps = [s.amplitude for s in prog.segments]
    assert amps == [208.0, 0.0, 208.0, 0.0, 208.0, 0.0]
    prog = compile_pm_hhdr(PmParams(104.0, 1000.0, 3.0, start_high=False))
    assert [s.amplitude for s in prog.segments][:2] == [0.0, 208.0]


def test_pm_unequal_tones():
    segs = compile_pm_hhdr(PmParams(100.0, 1000.0, 1.0, omega_minus=140.0)).segments
    assert segs[0].amplitude == 240.0
    assert segs[1].amplitude == pytest.approx(40.0) and segs[1].phase == pytest.approx(np.pi)


def test_pm_zero_amplitude_leaves_signal_one():
    sys = make_system(1840.0, [0.0], [0.0])
    prog = compile_pm_hhdr(PmParams(0.0, 1872.0, 50.0))
    assert all(s.amplitude == 0 for s in prog.segments)
    assert signal(sys, prog) == pytest.approx(1.0, abs=1e-10)


def test_pm_rejects_tiny_half_period():
    with pytest.raises(ValueError):
        compile_pm_hhdr(PmParams(104.0, 5.1e6, 1.0))
    with pytest.raises(ValueError):
        PmParams(104.0, 0.0, 1.0)


def test_square_wave_first_harmonic():
    # amplitude toggling {2W, 0} is W + (4W/pi) sum_odd sin(...)/n; the phase it accumulates is a
    # triangle wave whose first harmonic in the dressed frame has Bessel weight J1(4W/(pi nu))
    w, nu = 104.0, 1872.0
    t = np.linspace(0, 1 / nu, 20001)[:-1]
    envelope = np.where((t * nu) % 1 < 0.5, 2 * w, 0.0)
    c1 = 2 * np.mean(envelope * np.cos(2 * np.pi * nu * t - np.pi / 2))
    assert c1 == pytest.approx(4 * w / np.pi, rel=1e-3)
    x = 4 * w / (np.pi * nu)
    series = sum((-1) ** m / (math.factorial(m) * math.factorial(m + 1)) * (x / 2) ** (2 * m + 1)
                 for m in range(30))
    assert bessel_j1(x) == pytest.approx(series, abs=1e-14)


def test_xy_structure():
    prog = compile_xyn(32, 1.0)
    pulses = [s for s in prog.segments if isinstance(s, PulseSegment)]
    assert len(pulses) == 32
    assert [p.phase for p in pulses[:8]] == list(XY8_PHASES)
    assert prog.total_duration == pytest.approx(64.0, rel=1e-15)
    free = [s.duration for s in prog.segments if isinstance(s, DriveSegment)]
    assert free[0] == 1.0 and free[1] == 2.0


def test_xy_finite_pulse_timing():
    fp = FinitePulse(26000.0)
    prog = compile_xyn(8, 0.2, fp)
    assert prog.total_duration == pytest.approx(8 * 0.4, rel=1e-12)
    drive = [s for s in prog.segments if s.amplitude > 0]
    assert len(drive) == 8 and all(s.duration == pytest.approx(fp.t_pi) for s in drive)
    with pytest.raises(ValueError):
        compile_xyn(8, 0.5 * fp.t_pi * 0.9, fp)


@pytest.mark.parametrize("n", [-8, 3, 12])
def test_xy_rejects_bad_count(n):
    with pytest.raises(ValueError):
        compile_xyn(n, 1.0)


def test_xy_zero_pulses_free_evolution(c1_system):
    prog = compile_xyn(0, 1.0)
    assert prog.n_segments == 1 and prog.total_duration == 2.0
    sys = make_system(1840.0, [0.0], [0.0])
    assert signal(sys, prog) == pytest.approx(1.0, abs=1e-12)


def test_xy_reversal_symmetric(c1_system):
    prog = compile_xyn(32, 0.13)
    rev = prog.reversed()
    for tau in (0.125, 0.1268, 0.13):
        p = compile_xyn(32, tau)
        assert signal(c1_system, p) == pytest.approx(signal(c1_system, p.reversed()), abs=1e-9)
    assert rev.total_duration == pytest.approx(prog.total_duration)


def test_xy_ideal_vs_finite_dip_positions():
    sys = make_system(1840.0, [-11.3], [20.0])
    tau0 = xy_resonance_tau(sys.larmor_khz, -11.3, 40)
    grid = np.linspace(tau0 * (1 - 0.003), tau0 * (1 + 0.003), 121)
    out = []
    for fixed in ({"n_pulses": 32, "harmonic": 40}, {"n_pulses": 32, "harmonic": 40, "omega_pi": 250 * 104.0}):
        rep = fit_dips(run_sweep(sys, SweepPlan("xy_n", "tau", tuple(grid), fixed)), max_dips=1)
        out.append(rep.dips[0].a_par)
    assert out[0] == pytest.approx(out[1], abs=0.2)
    assert out[0] == pytest.approx(-11.3, abs=1.0)


def test_total_duration_bookkeeping():
    prog = compile_pm_hhdr(PmParams(77.0, 1234.567, 123.4))
    parts = math.fsum(s.duration for s in prog.segments)
    assert abs(parts - prog.total_duration) <= 1e-9 * prog.total_duration


def test_pm_fast_modulation_matches_average_drive():
    sys = make_system(1840.0, [-11.3], [20.0])
    omega = 104.0
    for t_f in (5.0, 20.0):
        pm = compile_pm_hhdr(PmParams(omega, 50 * omega, t_f))
        hh = compile_hhdr(omega, pm.total_duration)
        assert signal(sys, pm) == pytest.approx(signal(sys, hh), abs=0.02)


def test_program_dump_format():
    text = compile_pm_hhdr(PmParams(104.0, 1000.0, 2.0)).dump().splitlines()
    assert text[0].startswith("# protocol=pm_hhdr segments=4")
    assert text[1].split() == ["0", "0.5", "208", "0"]
    assert len(text) == 5


def test_empty_blocks_dropped():
    prog = ControlProgram((Block((), 3), Block((DriveSegment(1.0),), 0)), "hhdr")
    assert prog.blocks == () and prog.total_duration == 0
