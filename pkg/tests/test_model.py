import math

import numpy as np
import pytest
import scipy.linalg

from pmhhdr.model import (
    KHZ, MAX_NUCLEI, PROJ_1, SPIN_Z, HamiltonianTerm, HyperfineVector, NuclearSpinSpec,
    PhysicalConstants, SpinSystemError, SpinSystemSpec, build_rotating_frame_hamiltonian,
    build_static_hamiltonian, make_system,
)


def test_default_constants():
    c = PhysicalConstants()
    assert (c.D, c.gamma_e, c.gamma_n) == (2870.0, 2.802495, 1.07084)


@pytest.mark.parametrize("kw", [{"D": 0.0}, {"gamma_e": -1.0}, {"gamma_n": 0.0}, {"D": 999.0},
                                {"D": float("nan")}])
def test_constants_rejected(kw):
    with pytest.raises(SpinSystemError):
        PhysicalConstants(**kw)


def test_larmor_at_1840():
    sys = make_system(1840.0)
    assert sys.larmor_khz == pytest.approx(1970.3, abs=0.5)
    assert sys.larmor_khz == pytest.approx(1840.0 * 1.07084, rel=1e-15)


def test_hyperfine_components():
    hv = HyperfineVector(a_zx=3.0, a_zy=4.0, a_zz=-11.3)
    assert hv.a_par == -11.3
    assert hv.a_perp == 5.0
    tiny = HyperfineVector(a_zx=1e-200, a_zy=1e-200)
    assert tiny.a_perp == pytest.approx(math.sqrt(2) * 1e-200, rel=1e-15)


def test_system_validation():
    with pytest.raises(SpinSystemError):
        make_system(0.0)
    with pytest.raises(SpinSystemError):
        make_system(-5.0)
    with pytest.raises(SpinSystemError):
        make_system(1840.0, [1.0, 2.0], labels=["C1", "C1"])
    with pytest.raises(SpinSystemError, match=str(MAX_NUCLEI)):
        make_system(1840.0, [1.0] * (MAX_NUCLEI + 1))
    sys = make_system(1840.0, [1.0] * MAX_NUCLEI)
    assert sys.dim == 2 ** (MAX_NUCLEI + 1)


def test_bare_electron_splitting():
    sys = make_system(1840.0)
    h = build_static_hamiltonian(sys).matrix
    assert h.shape == (2, 2)
    expected = 2870.0 - 2.802495 * 1840.0
    assert expected == pytest.approx(-2286.6, abs=0.05)
    assert np.allclose(h, np.diag([0.0, expected]))


def test_decoupled_nucleus_block_separable():
    sys = make_system(1840.0, [0.0], [0.0])
    h = build_static_hamiltonian(sys).matrix
    sz_iz = np.kron(PROJ_1, SPIN_Z)
    assert np.max(np.abs(h @ sz_iz - sz_iz @ h)) == 0.0
    e = 2870.0 - 2.802495 * 1840.0
    zeeman = -sys.larmor_khz * KHZ * SPIN_Z
    assert np.allclose(h, np.kron(np.diag([0.0, e]), np.eye(2)) + np.kron(np.eye(2), zeeman), atol=1e-12)


def test_nuclear_splitting_per_branch():
    sys = make_system(1840.0, [-11.3])
    h = build_static_hamiltonian(sys).matrix
    ms0 = np.linalg.eigvalsh(h[:2, :2])
    ms1 = np.linalg.eigvalsh(h[2:, 2:])
    assert (ms0[1] - ms0[0]) / KHZ == pytest.approx(sys.larmor_khz, abs=1e-6)
    # the hyperfine field adds to -gamma_n B_z: |gamma_n B_z - A_par| in the m_s=+1 branch
    assert (ms1[1] - ms1[0]) / KHZ == pytest.approx(abs(sys.larmor_khz - (-11.3)), abs=1e-6)


def test_rotating_frame_zero_drive_is_nuclear_only():
    sys = make_system(1840.0, [-11.3], [20.0])
    h = build_rotating_frame_hamiltonian(sys, 0.0).matrix
    static = build_static_hamiltonian(sys).matrix
    electron = np.kron(np.diag([0.0, 2870.0 - 2.802495 * 1840.0]), np.eye(2))
    assert np.allclose(h, static - electron, atol=1e-12)


def test_dressed_states_at_larmor_drive():
    sys = make_system(1840.0)
    h = build_rotating_frame_hamiltonian(sys, 1970.0).matrix
    w, v = np.linalg.eigh(h)
    assert np.allclose(w, [-0.985, 0.985])
    plus = np.array([1, 1]) / np.sqrt(2)
    assert abs(abs(v[:, 1] @ plus) - 1) < 1e-12


def test_phase_pi_flips_sigma_x():
    sys = make_system(1840.0)
    h0 = build_rotating_frame_hamiltonian(sys, 100.0, 0.0).matrix
    hpi = build_rotating_frame_hamiltonian(sys, 100.0, np.pi).matrix
    assert np.allclose(hpi, -h0, atol=1e-15)


def test_negative_amplitude_rejected():
    with pytest.raises(ValueError):
        build_rotating_frame_hamiltonian(make_system(1840.0), -1.0)


def test_non_hermitian_rejected():
    with pytest.raises(ValueError):
        HamiltonianTerm(np.array([[0, 1], [0, 0]], dtype=complex), "lab")


def test_zero_hyperfine_factorizes():
    sys = make_system(1840.0, [0.0, 0.0], [0.0, 0.0])
    h = build_rotating_frame_hamiltonian(sys, 150.0, 0.3, 2.0).matrix
    he = build_rotating_frame_hamiltonian(make_system(1840.0), 150.0, 0.3, 2.0).matrix
    hn = build_rotating_frame_hamiltonian(make_system(1840.0, [0.0], [0.0]), 0.0).matrix[:2, :2]
    for t in (0.0, 1.7, 1000.0):
        u = scipy.linalg.expm(-2j * np.pi * h * t)
        ue = scipy.linalg.expm(-2j * np.pi * he * t)
        un = scipy.linalg.expm(-2j * np.pi * hn * t)
        assert np.max(np.abs(u - np.kron(ue, np.kron(un, un)))) < 1e-10


def test_nuclear_spec_manual_build():
    nuc = NuclearSpinSpec("C4", HyperfineVector(a_zx=10.0, a_zz=38.0), is_bath_proxy=False)
    sys = SpinSystemSpec(b_z=1840.0, nuclei=(nuc,))
    assert sys.n_nuclei == 1 and sys.dim == 4 and sys.nuclear_dim == 2
