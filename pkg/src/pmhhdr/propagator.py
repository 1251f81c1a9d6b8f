"""
Time evolution of density matrices under piecewise-constant Hamiltonians.

Propagators are computed from the Hermitian eigendecomposition
U = V exp(-2j*pi*E*t) V^dag.  Repeated program blocks are handled by raising
the block propagator to a power, so a PM-HHDR program with ~10^3 modulation
half-periods costs two eigendecompositions and a handful of matrix products.

The lab-frame oracle integrates the full drive (no rotating-wave
approximation) with midpoint-sampled piecewise-constant steps and a carrier
reduced from GHz to tens of MHz.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .model import (
    KHZ, PROJ_0, PROJ_1, SIGMA_X, SIGMA_Y, HamiltonianTerm, SpinSystemSpec, _nuclear_part,
    build_rotating_frame_hamiltonian, build_static_hamiltonian,
)
from .sequences import Block, ControlProgram, DriveSegment, PulseSegment

BASIS_DOC = "electron-major: |e> (x) |n_1 ... n_k>, e in {0, +1}, nuclear |up>=0 first"

PLUS = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2)
MINUS = np.array([1.0, -1.0], dtype=complex) / np.sqrt(2)
# columns are |+>, |->
DRESSED_BASIS = np.column_stack([PLUS, MINUS])


class PropagationError(RuntimeError):
    pass


@dataclass(frozen=True)
class DensityState:
    rho: np.ndarray
    basis_doc: str = BASIS_DOC

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        object.__setattr__(self, "rho", rho)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise ValueError(f"density matrix must be square, got {rho.shape}")

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def check(self, trace_tol: float = 1e-9, herm_tol: float = 1e-10, eig_tol: float = 1e-9) -> None:
        rho = self.rho
        tr = np.trace(rho)
        if abs(tr - 1) > trace_tol:
            raise ValueError(f"trace(rho) = {tr} deviates from 1")
        if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
            raise ValueError("rho is not Hermitian")
        if np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() < -eig_tol:
            raise ValueError("rho has negative eigenvalues")


@dataclass(frozen=True)
class Segment:
    """Either a Hamiltonian held for ``duration`` us or an instantaneous unitary."""

    hamiltonian: HamiltonianTerm | None = None
    duration: float = 0.0
    unitary: np.ndarray | None = None

    def __post_init__(self):
        if (self.hamiltonian is None) == (self.unitary is None):
            raise ValueError("a segment holds exactly one of hamiltonian or unitary")
        if not self.duration >= 0:
            raise ValueError(f"duration must be >= 0, got {self.duration}")
        if self.unitary is not None:
            if self.duration != 0:
                raise ValueError("instantaneous segments have zero duration")
            u = np.asarray(self.unitary, dtype=complex)
            err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
            if err > 1e-10:
                raise ValueError(f"instantaneous_unitary is not unitary (err {err:.2e})")


def hermitian_expm(h: np.ndarray, t: float | np.ndarray) -> np.ndarray:
    """exp(-2j*pi*h*t) for Hermitian h (MHz) and time t (us); batched over leading axes."""
    evals, evecs = np.linalg.eigh(h)
    phases = np.exp(-2j * np.pi * evals * np.asarray(t)[..., None])
    return (evecs * phases[..., None, :]) @ np.swapaxes(evecs.conj(), -1, -2)


def segment_unitary(seg: Segment) -> np.ndarray:
    if seg.unitary is not None:
        return np.asarray(seg.unitary, dtype=complex)
    return hermitian_expm(seg.hamiltonian.matrix, seg.duration)


def propagate_segment(state: DensityState, seg: Segment) -> DensityState:
    u = segment_unitary(seg)
    return DensityState(u @ state.rho @ u.conj().T, state.basis_doc)


# ----------------------------------------------------------------------------
# states and measurement
# ----------------------------------------------------------------------------

_ELECTRON_KETS = {
    "zero": np.array([1, 0], dtype=complex),
    "one": np.array([0, 1], dtype=complex),
    "plus": PLUS,
    "minus": MINUS,
}


def initial_state(sys: SpinSystemSpec, electron: str = "plus",
                  nuclear: str | Sequence[str] = "mixed") -> DensityState:
    """Product state: pure electron ket times per-nucleus 'mixed', 'up' or 'down'."""
    try:
        ket = _ELECTRON_KETS[electron]
    except KeyError:
        raise ValueError(f"unknown electron state {electron!r}") from None
    if isinstance(nuclear, str):
        nuclear = [nuclear] * sys.n_nuclei
    if len(nuclear) != sys.n_nuclei:
        raise ValueError(f"need {sys.n_nuclei} nuclear states, got {len(nuclear)}")
    single = {"mixed": np.eye(2) / 2, "up": np.diag([1.0, 0.0]), "down": np.diag([0.0, 1.0])}
    rho_n = np.eye(1, dtype=complex)
    for name in nuclear:
        if name not in single:
            raise ValueError(f"unknown nuclear state {name!r}")
        rho_n = np.kron(rho_n, single[name])
    return DensityState(np.kron(np.outer(ket, ket.conj()), rho_n))


def readout_projector(dim: int, axis: str = "plus_x") -> np.ndarray:
    if axis == "plus_x":
        p = np.outer(PLUS, PLUS.conj())
    elif axis == "zero_one":
        p = PROJ_0
    else:
        raise ValueError(f"unknown readout axis {axis!r}")
    return np.kron(p, np.eye(dim // 2))


def measure_dressed_population(state: DensityState | np.ndarray, axis: str = "plus_x") -> float:
    """Tr(P rho) for P = |+><+| (x) 1 ('plus_x') or |0><0| (x) 1 ('zero_one')."""
    rho = state.rho if isinstance(state, DensityState) else np.asarray(state)
    p = readout_projector(rho.shape[-1], axis)
    return np.real(np.einsum("ij,...ji->...", p, rho))


def apply_dephasing(state: DensityState, rate: float, duration: float) -> DensityState:
    """Damp electron coherences in the dressed |+>,|-> basis by exp(-2 pi rate t).

    ``rate`` in kHz, ``duration`` in us.
    """
    if rate < 0:
        raise ValueError(f"dephasing rate must be >= 0, got {rate}")
    factor = math.exp(-2 * math.pi * rate * KHZ * duration) if np.isfinite(rate) else 0.0
    nd = state.dim // 2
    w = np.kron(DRESSED_BASIS, np.eye(nd))
    rho_d = w.conj().T @ state.rho @ w
    rho_d[:nd, nd:] *= factor
    rho_d[nd:, :nd] *= factor
    return DensityState(w @ rho_d @ w.conj().T, state.basis_doc)


# ----------------------------------------------------------------------------
# programs
# ----------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _operators(sys: SpinSystemSpec):
    nd = sys.nuclear_dim
    eye = np.eye(nd)
    h_nuc = _nuclear_part(sys)
    return (h_nuc, np.kron(SIGMA_X, eye), np.kron(SIGMA_Y, eye), np.kron(PROJ_1, eye))


def rotating_hamiltonians(sys: SpinSystemSpec, amplitude, phase, detuning=0.0) -> np.ndarray:
    """Stack of rotating-frame Hamiltonians (MHz) for arrays of drive parameters (kHz, rad)."""
    h_nuc, sx, sy, p1 = _operators(sys)
    amp, ph, det = np.broadcast_arrays(np.asarray(amplitude, float), np.asarray(phase, float),
                                       np.asarray(detuning, float))
    cx = (0.5 * KHZ * amp * np.cos(ph))[..., None, None]
    cy = (0.5 * KHZ * amp * np.sin(ph))[..., None, None]
    cz = (KHZ * det)[..., None, None]
    return h_nuc + cx * sx + cy * sy + cz * p1


def pulse_unitary(sys: SpinSystemSpec, angle, phase) -> np.ndarray:
    """exp(-i angle/2 (cos(phase) sx + sin(phase) sy)) (x) 1, batched over arrays."""
    angle, phase = np.broadcast_arrays(np.asarray(angle, float), np.asarray(phase, float))
    c = np.cos(angle / 2)[..., None, None]
    s = np.sin(angle / 2)[..., None, None]
    n_op = (np.cos(phase)[..., None, None] * SIGMA_X + np.sin(phase)[..., None, None] * SIGMA_Y)
    u_e = c * np.eye(2) - 1j * s * n_op
    return np.kron(u_e, np.eye(sys.nuclear_dim)) if u_e.ndim == 2 else \
        np.einsum("...ab,nm->...anbm", u_e, np.eye(sys.nuclear_dim)).reshape(
            u_e.shape[:-2] + (sys.dim, sys.dim))


def realize_segment(seg, sys: SpinSystemSpec) -> Segment:
    """Turn a program segment into a propagator Segment for ``sys``."""
    if isinstance(seg, PulseSegment):
        return Segment(unitary=pulse_unitary(sys, seg.angle, seg.phase))
    if isinstance(seg, DriveSegment):
        h = build_rotating_frame_hamiltonian(sys, seg.amplitude, seg.phase, seg.detuning)
        return Segment(hamiltonian=h, duration=seg.duration)
    if isinstance(seg, Segment):
        return seg
    raise TypeError(f"cannot realize segment of type {type(seg).__name__}")


class _UnitaryCache:
    """Per-system cache so identical segments share one propagator."""

    def __init__(self, sys: SpinSystemSpec):
        self.sys = sys
        self._cache: dict = {}

    def __call__(self, seg) -> np.ndarray:
        try:
            return self._cache[seg]
        except KeyError:
            u = segment_unitary(realize_segment(seg, self.sys))
            self._cache[seg] = u
            return u
        except TypeError:  # unhashable Segment
            return segment_unitary(realize_segment(seg, self.sys))

    def block(self, block: Block) -> np.ndarray:
        u = np.eye(self.sys.dim, dtype=complex)
        for seg in block.segments:
            u = self(seg) @ u
        return u


def program_unitary(program: ControlProgram, sys: SpinSystemSpec) -> np.ndarray:
    cache = _UnitaryCache(sys)
    u = np.eye(sys.dim, dtype=complex)
    for block in program.blocks:
        ub = cache.block(block)
        u = np.linalg.matrix_power(ub, block.repeats) @ u
    return u


def propagate_program(state: DensityState, program: ControlProgram, sys: SpinSystemSpec,
                      sample_times: Sequence[float] | None = None) -> list[tuple[float, DensityState]]:
    """Evolve ``state`` through ``program``; return (time, state) at the requested samples.

    Each sample is taken at the first segment boundary at or after the
    requested time (the reported time is that boundary).  The default is a
    single sample at the end of the program.
    """
    total = program.total_duration
    if sample_times is None:
        sample_times = [total]
    samples = sorted(float(t) for t in sample_times)
    eps = 1e-12 * max(1.0, total)
    if samples and (samples[0] < -eps or samples[-1] > total + eps):
        raise PropagationError(
            f"sample times must lie in [0, {total:.9g}] us, got {samples[0]:.9g}..{samples[-1]:.9g}")

    cache = _UnitaryCache(sys)
    rho = state.rho
    t = 0.0
    out: list[tuple[float, DensityState]] = []
    queue = list(samples)

    def emit():
        while queue and queue[0] <= t + eps:
            queue.pop(0)
            out.append((t, DensityState(rho, state.basis_doc)))

    emit()
    for block in program.blocks:
        if not queue:
            break
        period = math.fsum(s.duration for s in block.segments)
        ub = cache.block(block)
        rep = 0
        while rep < block.repeats:
            if not queue:
                break
            # jump over whole repetitions that finish before the next sample
            if period > 0:
                skip = int(math.floor((queue[0] - t - eps) / period))
                skip = max(0, min(skip, block.repeats - rep))
            else:
                skip = block.repeats - rep if queue[0] > t + eps else 0
            if skip:
                u = np.linalg.matrix_power(ub, skip)
                rho = u @ rho @ u.conj().T
                t += skip * period
                rep += skip
                emit()
                continue
            for seg in block.segments:
                u = cache(seg)
                rho = u @ rho @ u.conj().T
                t += seg.duration
                emit()
            rep += 1
    t = total
    emit()
    return out


def final_state(state: DensityState, program: ControlProgram, sys: SpinSystemSpec) -> DensityState:
    u = program_unitary(program, sys)
    return DensityState(u @ state.rho @ u.conj().T, state.basis_doc)


def _structure(program: ControlProgram):
    return tuple(
        (b.repeats, tuple((type(s).__name__, s.duration) for s in b.segments)) for b in program.blocks
    )


def batched_final_rho(rho0: np.ndarray, programs: Sequence[ControlProgram],
                      sys: SpinSystemSpec) -> np.ndarray:
    """Final density matrices for many programs sharing one block structure.

    Programs that differ only in drive amplitudes, phases or pulse angles
    (Monte Carlo shots at one grid point) are evolved with stacked
    eigendecompositions.  Mixed structures fall back to one-by-one evolution.
    """
    programs = list(programs)
    if not programs:
        return np.empty((0,) + rho0.shape, dtype=complex)
    ref = _structure(programs[0])
    if any(_structure(p) != ref for p in programs[1:]):
        return np.stack([final_state(DensityState(rho0), p, sys).rho for p in programs])

    n = len(programs)
    u_total = np.broadcast_to(np.eye(sys.dim, dtype=complex), (n, sys.dim, sys.dim)).copy()
    for bi, block in enumerate(programs[0].blocks):
        ub = np.broadcast_to(np.eye(sys.dim, dtype=complex), (n, sys.dim, sys.dim)).copy()
        for si, seg0 in enumerate(block.segments):
            segs = [p.blocks[bi].segments[si] for p in programs]
            if isinstance(seg0, PulseSegment):
                u = pulse_unitary(sys, [s.angle for s in segs], [s.phase for s in segs])
            else:
                h = rotating_hamiltonians(sys, [s.amplitude for s in segs], [s.phase for s in segs],
                                          [s.detuning for s in segs])
                u = hermitian_expm(h, seg0.duration)
            ub = u @ ub
        u_total = np.linalg.matrix_power(ub, block.repeats) @ u_total
    return u_total @ rho0 @ np.swapaxes(u_total.conj(), -1, -2)


# ----------------------------------------------------------------------------
# lab-frame oracle
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class LabDrive:
    """Lab-frame drive c(t) * sigma_x (x) 1 on top of a reduced electron splitting.

    ``coefficient`` maps times (us) to c(t) in MHz.  ``carrier`` (MHz) is the
    reduced transition frequency standing in for |D - gamma_e B_z|.
    ``period`` is set when c(t) is strictly periodic, enabling one-period
    propagator reuse.  ``max_rabi`` (MHz) is the largest drive amplitude.
    """

    carrier: float
    coefficient: Callable[[np.ndarray], np.ndarray]
    max_rabi: float
    period: float | None = None

    @classmethod
    def from_program(cls, program: ControlProgram, carrier: float) -> "LabDrive":
        """Single tone A(t) cos(2 pi f t - phi(t)); its rotating-wave limit is ``program``."""
        segs = program.segments
        if any(isinstance(s, PulseSegment) for s in segs):
            raise ValueError("instantaneous pulses have no lab-frame drive representation")
        bounds = np.cumsum([s.duration for s in segs])
        amps = np.array([s.amplitude for s in segs] + [0.0]) * KHZ
        phases = np.array([s.phase for s in segs] + [0.0])
        if any(s.detuning for s in segs):
            raise ValueError("detuned segments are not supported by the lab-frame drive")

        def coefficient(t):
            idx = np.searchsorted(bounds, t, side="right")
            return amps[idx] * np.cos(2 * np.pi * carrier * t - phases[idx])

        constant = len({(s.amplitude, s.phase) for s in segs}) <= 1
        return cls(carrier, coefficient, float(amps.max(initial=0.0)),
                   period=1.0 / carrier if constant else None)

    @classmethod
    def two_tone_pm(cls, omega_plus: float, omega_minus: float, nu: float, carrier: float,
                    start_high: bool = True) -> "LabDrive":
        """Omega_+ cos(2 pi f t) + Omega_- cos(2 pi f t - phi(t)), phi toggling 0/pi at ``nu``.

        Amplitudes and ``nu`` in kHz.
        """
        half = 500.0 / nu
        a, b = omega_plus * KHZ, omega_minus * KHZ

        def coefficient(t):
            k = np.floor(np.asarray(t) / half).astype(np.int64)
            phi = np.where((k % 2 == 0) == start_high, 0.0, np.pi)
            w = 2 * np.pi * carrier * t
            return a * np.cos(w) + b * np.cos(w - phi)

        return cls(carrier, coefficient, a + b, period=None)


def _step_product(h_static: np.ndarray, x_op: np.ndarray, coeff: np.ndarray, dt: float,
                  chunk: int = 4096) -> np.ndarray:
    d = h_static.shape[0]
    u = np.eye(d, dtype=complex)
    for start in range(0, len(coeff), chunk):
        c = coeff[start:start + chunk]
        steps = hermitian_expm(h_static + c[:, None, None] * x_op, dt)
        for us in steps:
            u = us @ u
    return u


def lab_frame_oracle(sys: SpinSystemSpec, lab_drive: LabDrive, t_end: float, dt: float,
                     state: DensityState | None = None, frame: str = "rotating") -> DensityState:
    """Fine-step lab-frame evolution without the rotating-wave approximation.

    ``dt`` must satisfy dt <= 1 / (50 * carrier).  The result is returned in
    the frame rotating at the carrier (``frame="rotating"``) so it can be
    compared directly with the rotating-frame engine, or as-is (``"lab"``).
    """
    f = lab_drive.carrier
    if f <= 0:
        raise ValueError("carrier must be > 0")
    if dt <= 0 or dt > 1.0 / (50.0 * f) * (1 + 1e-12):
        raise ValueError(f"dt = {dt:.3g} us exceeds the limit 1/(50*carrier) = {1 / (50 * f):.3g} us")
    if t_end < 0:
        raise ValueError("t_end must be >= 0")
    if state is None:
        state = initial_state(sys)

    h_static = build_static_hamiltonian(sys, electron_splitting_mhz=f).matrix
    x_op = np.kron(SIGMA_X, np.eye(sys.nuclear_dim))
    u = np.eye(sys.dim, dtype=complex)
    t0 = 0.0
    period = lab_drive.period
    if period is not None and t_end >= period:
        m = int(math.ceil(period / dt - 1e-9))
        step = period / m
        mid = (np.arange(m) + 0.5) * step
        u_period = _step_product(h_static, x_op, lab_drive.coefficient(mid), step)
        n_per = int(math.floor(t_end / period + 1e-9))
        u = np.linalg.matrix_power(u_period, n_per)
        t0 = n_per * period
    remaining = t_end - t0
    if remaining > 1e-12:
        n = int(math.ceil(remaining / dt - 1e-9))
        step = remaining / n
        mid = t0 + (np.arange(n) + 0.5) * step
        u = _step_product(h_static, x_op, lab_drive.coefficient(mid), step) @ u

    rho = u @ state.rho @ u.conj().T
    if frame == "rotating":
        r = np.kron(np.diag([1.0, np.exp(-2j * np.pi * f * t_end)]), np.eye(sys.nuclear_dim))
        rho = r.conj().T @ rho @ r
    elif frame != "lab":
        raise ValueError(f"unknown frame {frame!r}")
    return DensityState(rho, state.basis_doc)


__all__ = [
    "DensityState", "Segment", "LabDrive", "PropagationError", "apply_dephasing",
    "batched_final_rho", "final_state", "hermitian_expm", "initial_state", "lab_frame_oracle",
    "measure_dressed_population", "program_unitary", "propagate_program", "propagate_segment",
    "pulse_unitary", "realize_segment", "rotating_hamiltonians", "segment_unitary",
]
