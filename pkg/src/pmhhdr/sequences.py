"""
Control-program compilers for HHDR spin locking, phase-modulated HHDR and XY-N.

Programs are system independent: they list drive segments (rotating-frame
amplitude, phase, detuning, duration) and instantaneous pulses.  Repeated
structure is kept as ``Block(segments, repeats)`` so the propagator can build
one block propagator and raise it to a power instead of stepping through
every modulation period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Union

import numpy as np

# Shortest allowed PM half-period (us).
MIN_HALF_PERIOD = 1e-4

XY8_PHASES = (0.0, 0.5 * np.pi, 0.0, 0.5 * np.pi, 0.5 * np.pi, 0.0, 0.5 * np.pi, 0.0)
XY8_LABELS = ("X", "Y", "X", "Y", "Y", "X", "Y", "X")


@dataclass(frozen=True)
class DriveSegment:
    """Constant rotating-frame drive. ``amplitude`` and ``detuning`` in kHz."""

    duration: float
    amplitude: float = 0.0
    phase: float = 0.0
    detuning: float = 0.0

    def __post_init__(self):
        if not self.duration >= 0:
            raise ValueError(f"segment duration must be >= 0, got {self.duration}")
        if not self.amplitude >= 0:
            raise ValueError(f"drive amplitude must be >= 0, got {self.amplitude}")


@dataclass(frozen=True)
class PulseSegment:
    """Instantaneous electron rotation by ``angle`` about cos(phase) x + sin(phase) y."""

    angle: float = np.pi
    phase: float = 0.0

    @property
    def duration(self) -> float:
        return 0.0


ProgramSegment = Union[DriveSegment, PulseSegment]


@dataclass(frozen=True)
class Block:
    segments: tuple[ProgramSegment, ...]
    repeats: int = 1

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        if self.repeats < 0:
            raise ValueError("repeats must be >= 0")

    @property
    def duration(self) -> float:
        return self.repeats * math.fsum(s.duration for s in self.segments)


@dataclass(frozen=True)
class ControlProgram:
    blocks: tuple[Block, ...]
    protocol_tag: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(b for b in self.blocks if b.repeats > 0 and b.segments))

    @property
    def total_duration(self) -> float:
        return math.fsum(b.duration for b in self.blocks)

    @property
    def n_segments(self) -> int:
        return sum(len(b.segments) * b.repeats for b in self.blocks)

    def iter_segments(self) -> Iterator[ProgramSegment]:
        for block in self.blocks:
            for _ in range(block.repeats):
                yield from block.segments

    @property
    def segments(self) -> list[ProgramSegment]:
        return list(self.iter_segments())

    def reversed(self) -> "ControlProgram":
        blocks = tuple(Block(tuple(reversed(b.segments)), b.repeats) for b in reversed(self.blocks))
        return ControlProgram(blocks, self.protocol_tag, dict(self.metadata, reversed=True))

    def dump(self) -> str:
        """One line per segment: index, duration (us), amplitude (kHz), phase (rad)."""
        lines = [f"# protocol={self.protocol_tag} segments={self.n_segments} "
                 f"total_duration_us={self.total_duration:.9g}"]
        for i, seg in enumerate(self.iter_segments()):
            if isinstance(seg, PulseSegment):
                lines.append(f"{i} 0 pulse(angle={seg.angle:.6g}) {seg.phase:.6g}")
            else:
                lines.append(f"{i} {seg.duration:.9g} {seg.amplitude:.9g} {seg.phase:.6g}")
        return "\n".join(lines)


def compile_hhdr(omega: float, t_f: float) -> ControlProgram:
    """Constant spin-locking drive of Rabi frequency ``omega`` (kHz) for ``t_f`` us."""
    if omega <= 0:
        raise ValueError(f"omega must be > 0, got {omega}")
    if t_f < 0:
        raise ValueError(f"t_f must be >= 0, got {t_f}")
    seg = DriveSegment(duration=float(t_f), amplitude=float(omega))
    return ControlProgram((Block((seg,), 1),), "hhdr", {"omega": omega, "t_f": t_f})


@dataclass(frozen=True)
class PmParams:
    """Phase-modulation parameters.

    ``omega_prime`` is the per-tone Rabi frequency (kHz), ``nu`` the
    modulation frequency (kHz), ``t_f`` the requested interrogation time (us).
    ``omega_minus`` defaults to ``omega_prime`` (equal tones).
    """

    omega_prime: float
    nu: float
    t_f: float
    omega_minus: float | None = None
    start_high: bool = True

    def __post_init__(self):
        if self.omega_prime < 0:
            raise ValueError(f"omega_prime must be >= 0, got {self.omega_prime}")
        if self.omega_minus is not None and self.omega_minus < 0:
            raise ValueError(f"omega_minus must be >= 0, got {self.omega_minus}")
        if self.nu <= 0:
            raise ValueError(f"nu must be > 0, got {self.nu}")
        if self.t_f < 0:
            raise ValueError(f"t_f must be >= 0, got {self.t_f}")

    @property
    def omega_plus(self) -> float:
        return self.omega_prime

    @property
    def omega_second(self) -> float:
        return self.omega_prime if self.omega_minus is None else self.omega_minus

    @property
    def half_period(self) -> float:
        return 500.0 / self.nu

    @property
    def n_half_periods(self) -> int:
        # tolerance guards against t_f being an exact multiple that rounds down
        return int(math.floor(self.t_f / self.half_period + 1e-9))

    @property
    def realized_t_f(self) -> float:
        return self.n_half_periods * self.half_period


def compile_pm_hhdr(p: PmParams) -> ControlProgram:
    """Square-wave phase toggling realised as amplitude toggling.

    Phases aligned give amplitude Omega_+ + Omega_-, opposed give
    |Omega_+ - Omega_-|; each lasts 1/(2 nu).  The realised duration is
    floor(2 nu t_f) half-periods and is echoed in ``metadata["realized_t_f"]``.
    """
    h = p.half_period
    if h < MIN_HALF_PERIOD:
        raise ValueError(f"modulation half-period {h:.3g} us is below {MIN_HALF_PERIOD} us")
    a, b = p.omega_plus, p.omega_second
    high = DriveSegment(h, a + b, 0.0)
    low = DriveSegment(h, abs(a - b), 0.0 if a >= b else np.pi)
    first, second = (high, low) if p.start_high else (low, high)
    n = p.n_half_periods
    blocks = [Block((first, second), n // 2)]
    if n % 2:
        blocks.append(Block((first,), 1))
    if n == 0:
        blocks = [Block((DriveSegment(0.0, a + b, 0.0),), 1)]
    meta = {
        "omega_prime": p.omega_prime, "omega_minus": p.omega_second, "nu": p.nu,
        "t_f": p.t_f, "realized_t_f": p.realized_t_f, "n_half_periods": n,
        "start_high": p.start_high,
    }
    return ControlProgram(tuple(blocks), "pm_hhdr", meta)


@dataclass(frozen=True)
class FinitePulse:
    """Square pi pulses of Rabi frequency ``omega_pi`` (kHz)."""

    omega_pi: float

    @property
    def t_pi(self) -> float:
        return 500.0 / self.omega_pi


def compile_xyn(n_pulses: int, tau: float, pulse_model: str | FinitePulse = "ideal",
                pulse_scale: float = 1.0) -> ControlProgram:
    """XY-N as repeated XY-8 units of tau - pi - 2tau - ... - pi - tau.

    Finite pulses are centred on the ideal pulse instants, so free intervals
    shrink by the pulse length.  ``pulse_scale`` scales the pulse area
    (amplitude noise).
    """
    if n_pulses < 0 or n_pulses % 8:
        raise ValueError(f"n_pulses must be a non-negative multiple of 8, got {n_pulses}")
    if tau <= 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    meta = {"n_pulses": n_pulses, "tau": tau, "pulse_scale": pulse_scale}
    if n_pulses == 0:
        meta["pulse_model"] = "none"
        return ControlProgram((Block((DriveSegment(2 * tau),), 1),), "xy_n", meta)

    if isinstance(pulse_model, FinitePulse):
        t_pi = pulse_model.t_pi
        if t_pi > 2 * tau:
            raise ValueError(f"pi pulse of {t_pi:.4g} us does not fit in 2*tau = {2 * tau:.4g} us")
        amp = pulse_model.omega_pi * pulse_scale
        pulses = [DriveSegment(t_pi, amp, ph) for ph in XY8_PHASES]
        meta.update(pulse_model="finite", omega_pi=pulse_model.omega_pi, t_pi=t_pi)
    elif pulse_model == "ideal":
        t_pi = 0.0
        pulses = [PulseSegment(np.pi * pulse_scale, ph) for ph in XY8_PHASES]
        meta["pulse_model"] = "ideal"
    else:
        raise ValueError(f"unknown pulse model {pulse_model!r}")

    edge = DriveSegment(tau - t_pi / 2)
    inner = DriveSegment(2 * tau - t_pi)
    unit: list[ProgramSegment] = [edge]
    for i, pulse in enumerate(pulses):
        unit.append(pulse)
        unit.append(inner if i < len(pulses) - 1 else edge)
    return ControlProgram((Block(tuple(unit), n_pulses // 8),), "xy_n", meta)
