"""
Spin-system description and Hamiltonian construction.

Units used throughout the package:

- Hamiltonian matrices are ordinary frequencies in MHz.
- User-facing drive amplitudes, detunings and hyperfine components are in kHz.
- Time is in microseconds, magnetic field in Gauss.

The propagator applies the factor 2*pi exactly once, so ``exp(-2j*pi*H*t)``
with H in MHz and t in us is dimensionless.

Basis ordering is electron-major: index = e * 2**k + n, where e in {0, 1}
labels |m_s=0>, |m_s=+1> and n enumerates the nuclear product basis with the
first nucleus as the most significant bit (|up> = 0, |down> = 1).

Sign conventions (m_s=+1 branch): the electron energies are {0, D - gamma_e*B_z}
and the electron "S_z" acting on the two-level subspace is the projector
|1><1|, so the hyperfine term only acts in m_s=+1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

KHZ = 1e-3  # kHz -> MHz

MAX_NUCLEI = 5

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)
PROJ_0 = np.array([[1, 0], [0, 0]], dtype=complex)
PROJ_1 = np.array([[0, 0], [0, 1]], dtype=complex)

SPIN_X = SIGMA_X / 2
SPIN_Y = SIGMA_Y / 2
SPIN_Z = SIGMA_Z / 2


class SpinSystemError(ValueError):
    pass


@dataclass(frozen=True)
class PhysicalConstants:
    """Zero-field splitting (MHz) and gyromagnetic ratios.

    ``gamma_e`` is a positive magnitude in MHz/G, ``gamma_n`` is the 13C ratio
    in kHz/G.
    """

    D: float = 2870.0
    gamma_e: float = 2.802495
    gamma_n: float = 1.07084

    def __post_init__(self):
        for name in ("D", "gamma_e", "gamma_n"):
            value = getattr(self, name)
            if not np.isfinite(value) or value <= 0:
                raise SpinSystemError(f"{name} must be strictly positive, got {value}")
        if self.D < 1000.0:
            raise SpinSystemError(f"D must be >= 1000 MHz, got {self.D}")


@dataclass(frozen=True)
class HyperfineVector:
    """Secular hyperfine components (kHz) of one nucleus."""

    a_zx: float = 0.0
    a_zy: float = 0.0
    a_zz: float = 0.0

    @property
    def a_par(self) -> float:
        return self.a_zz

    @property
    def a_perp(self) -> float:
        return math.hypot(self.a_zx, self.a_zy)


@dataclass(frozen=True)
class NuclearSpinSpec:
    label: str
    hyperfine: HyperfineVector = field(default_factory=HyperfineVector)
    is_bath_proxy: bool = False


@dataclass(frozen=True)
class SpinSystemSpec:
    b_z: float
    nuclei: tuple[NuclearSpinSpec, ...] = ()
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)

    def __post_init__(self):
        object.__setattr__(self, "nuclei", tuple(self.nuclei))
        if not np.isfinite(self.b_z) or self.b_z <= 0:
            raise SpinSystemError(f"b_z must be > 0 Gauss, got {self.b_z}")
        if len(self.nuclei) > MAX_NUCLEI:
            raise SpinSystemError(
                f"{len(self.nuclei)} nuclei requested; at most {MAX_NUCLEI} are supported "
                f"(Hilbert dimension limit {2 * 2**MAX_NUCLEI})"
            )
        labels = [n.label for n in self.nuclei]
        if len(set(labels)) != len(labels):
            raise SpinSystemError(f"nuclear labels must be unique, got {labels}")

    @property
    def n_nuclei(self) -> int:
        return len(self.nuclei)

    @property
    def dim(self) -> int:
        return 2 * 2**self.n_nuclei

    @property
    def nuclear_dim(self) -> int:
        return 2**self.n_nuclei

    @property
    def larmor_khz(self) -> float:
        """Bare 13C Larmor frequency gamma_n * B_z in kHz."""
        return self.constants.gamma_n * self.b_z

    @property
    def electron_splitting_mhz(self) -> float:
        """E(m_s=+1) - E(m_s=0) = D - gamma_e * B_z, in MHz (may be negative)."""
        return self.constants.D - self.constants.gamma_e * self.b_z


@dataclass(frozen=True)
class HamiltonianTerm:
    matrix: np.ndarray
    frame_tag: str = "rotating"

    def __post_init__(self):
        if self.frame_tag not in ("lab", "rotating"):
            raise ValueError(f"unknown frame_tag {self.frame_tag!r}")
        check_hermitian(self.matrix)


def check_hermitian(matrix: np.ndarray, rtol: float = 1e-12) -> None:
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"Hamiltonian must be square, got shape {matrix.shape}")
    scale = np.max(np.abs(matrix)) if matrix.size else 0.0
    err = np.max(np.abs(matrix - matrix.conj().T)) if matrix.size else 0.0
    if err > rtol * max(scale, 1e-300) and err > 0:
        raise ValueError(f"Hamiltonian is not Hermitian (max|H - H^dag| = {err:.3e})")


def embed_nuclear(op: np.ndarray, index: int, n_nuclei: int) -> np.ndarray:
    """Single-nucleus operator ``op`` acting on nucleus ``index`` of ``n_nuclei``."""
    out = np.eye(1, dtype=complex)
    for j in range(n_nuclei):
        out = np.kron(out, op if j == index else IDENTITY_2)
    return out


def _nuclear_part(sys: SpinSystemSpec) -> np.ndarray:
    """Nuclear Zeeman plus hyperfine, in MHz, on the joint space."""
    k = sys.n_nuclei
    nd = sys.nuclear_dim
    zeeman = np.zeros((nd, nd), dtype=complex)
    hyperfine = np.zeros((nd, nd), dtype=complex)
    larmor = sys.larmor_khz * KHZ
    for j, nucleus in enumerate(sys.nuclei):
        hf = nucleus.hyperfine
        zeeman -= larmor * embed_nuclear(SPIN_Z, j, k)
        a_dot_i = hf.a_zx * SPIN_X + hf.a_zy * SPIN_Y + hf.a_zz * SPIN_Z
        hyperfine += KHZ * embed_nuclear(a_dot_i, j, k)
    return np.kron(IDENTITY_2, zeeman) + np.kron(PROJ_1, hyperfine)


def build_static_hamiltonian(sys: SpinSystemSpec,
                             electron_splitting_mhz: float | None = None) -> HamiltonianTerm:
    """Lab-frame static Hamiltonian on the 2 * 2**k space.

    ``electron_splitting_mhz`` overrides D - gamma_e*B_z; the lab-frame
    oracle uses it to stand in a reduced carrier for the GHz transition.
    """
    split = sys.electron_splitting_mhz if electron_splitting_mhz is None else electron_splitting_mhz
    electron = split * np.kron(PROJ_1, np.eye(sys.nuclear_dim))
    return HamiltonianTerm(electron + _nuclear_part(sys), frame_tag="lab")


def electron_drive_operator(phase: float) -> np.ndarray:
    """cos(phase) sigma_x + sin(phase) sigma_y on the electron two-level space."""
    return np.cos(phase) * SIGMA_X + np.sin(phase) * SIGMA_Y


def build_rotating_frame_hamiltonian(sys: SpinSystemSpec, drive_amplitude: float,
                                     drive_phase: float = 0.0,
                                     detuning: float = 0.0) -> HamiltonianTerm:
    """Rotating-wave Hamiltonian for a drive of Rabi frequency ``drive_amplitude`` (kHz).

    Electron part is (Omega/2)(cos(phi) sigma_x + sin(phi) sigma_y) + detuning*|1><1|,
    so an on-resonance population oscillates as sin^2(pi * Omega * t).
    """
    if drive_amplitude < 0:
        raise ValueError(f"drive_amplitude must be >= 0, got {drive_amplitude}")
    electron = (0.5 * drive_amplitude * KHZ) * electron_drive_operator(drive_phase)
    electron = electron + detuning * KHZ * PROJ_1
    matrix = np.kron(electron, np.eye(sys.nuclear_dim)) + _nuclear_part(sys)
    return HamiltonianTerm(matrix, frame_tag="rotating")


def make_system(b_z: float, a_par: Sequence[float] = (), a_perp: Sequence[float] | float = 0.0,
                labels: Sequence[str] | None = None, bath: Sequence[bool] | None = None,
                constants: PhysicalConstants | None = None) -> SpinSystemSpec:
    """Convenience builder: one nucleus per ``a_par`` entry with A_perp along x."""
    a_par = list(a_par)
    if np.isscalar(a_perp):
        a_perp = [float(a_perp)] * len(a_par)
    if labels is None:
        labels = [f"C{j + 1}" for j in range(len(a_par))]
    if bath is None:
        bath = [False] * len(a_par)
    nuclei = tuple(
        NuclearSpinSpec(lab, HyperfineVector(a_zx=ap, a_zz=apar), is_bath_proxy=b)
        for lab, apar, ap, b in zip(labels, a_par, a_perp, bath)
    )
    return SpinSystemSpec(b_z=b_z, nuclei=nuclei, constants=constants or PhysicalConstants())
