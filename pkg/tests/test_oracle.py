import math

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.stats import norm as gauss

from nanorod.grid import build_grid
from nanorod.model import ModelParams
from nanorod.observables import prob_left
from nanorod.oracle import (DensityMatrix, FockSpec, build_operators, classical_trajectory_oracle,
                            hermite_functions, left_projector, oracle_evolve,
                            oracle_initial_state, wigner_transform)
from nanorod.state import init_coherent_excited, norm

SET1 = ModelParams(0.6, 0.4, -1.0, 0.5)


def test_spec_validation():
    with pytest.raises(ValueError):
        FockSpec(7)
    assert FockSpec(10).dim == 20


def test_canonical_commutator():
    R, P, _ = build_operators(FockSpec(40))
    comm = R @ P - P @ R
    k = 38
    assert np.abs(comm[:k, :k] - 1j * np.eye(k)).max() < 1e-12


def test_harmonic_spectrum():
    _, _, H = build_operators(FockSpec(30), ModelParams(0.0, 0.0, 1.0, 0.0))
    ev = np.linalg.eigvalsh(H)
    expected = np.repeat(np.arange(28) + 0.5, 2)
    assert np.abs(ev[:56] - expected).max() < 1e-8


def test_hamiltonian_hermitian():
    _, _, H = build_operators(FockSpec(40), SET1)
    assert np.abs(H - H.conj().T).max() <= 1e-12


def test_hermite_functions_orthonormal():
    x = np.linspace(-15, 15, 6001)
    phi = hermite_functions(20, x)
    gram = phi @ phi.T * (x[1] - x[0])
    assert np.abs(gram - np.eye(20)).max() < 1e-10


def test_left_projector():
    Pl = left_projector(40)
    assert np.abs(Pl - Pl.T).max() < 1e-13
    assert np.all(np.linalg.eigvalsh(Pl) > -1e-12) and np.all(np.linalg.eigvalsh(Pl) < 1 + 1e-12)
    # parity: even and odd levels split evenly
    assert np.diag(Pl) == pytest.approx(np.full(40, 0.5), abs=1e-12)


def test_initial_ground_state():
    rho = oracle_initial_state(0.0, 0.0, 1 / math.sqrt(2), FockSpec(20))
    assert abs(rho.rho[0, 0] - 1) < 1e-12
    assert rho.trace() == pytest.approx(1.0, abs=1e-12)
    assert rho.hermiticity_defect() <= 1e-12
    assert rho.min_eigenvalue() >= -1e-10


def test_initial_moments():
    spec = FockSpec(60)
    rho = oracle_initial_state(-1.6, 0.3, 0.6071, spec)
    R, P, _ = build_operators(spec)
    Rj = np.kron(np.eye(2), R)
    Pj = np.kron(np.eye(2), P)
    meanR = np.vdot(Rj, rho.rho).real
    assert meanR == pytest.approx(-1.6, abs=1e-6)
    assert np.vdot(Pj.conj().T, rho.rho).real == pytest.approx(0.3, abs=1e-6)
    varR = np.trace(Rj @ Rj @ rho.rho).real - meanR**2
    assert varR == pytest.approx(0.6071**2, abs=1e-5)
    assert np.abs(rho.spin_block(1, 1)).max() == 0 and np.abs(rho.spin_block(0, 1)).max() == 0


def test_initial_capture_check():
    with pytest.raises(ValueError, match="increase n_levels"):
        oracle_initial_state(-7.0, 0.0, 0.6071, FockSpec(10))


def test_initial_prob_left():
    spec = FockSpec(60)
    s = oracle_evolve(oracle_initial_state(-1.6, 0.0, 0.6071, spec), SET1, None, 0.0)
    # agreement is limited by the 1e-6 capture tolerance of the truncated basis
    assert s.prob_left[0] == pytest.approx(gauss.cdf(1.6 / 0.6071), abs=1e-5)


def test_decoupled_rabi():
    spec = FockSpec(40)
    p = ModelParams(0.6, 0.0, -1.0, 0.5)
    s = oracle_evolve(oracle_initial_state(-1.6, 0.0, 0.6071, spec), p, None, 3.0, observe_dt=0.25)
    t = np.asarray(s.t)
    assert np.abs(np.asarray(s.sigma_z) - np.cos(1.2 * t)).max() < 1e-6


def test_frozen_spin():
    spec = FockSpec(30)
    s = oracle_evolve(oracle_initial_state(-1.0, 0.0, 0.6071, spec), ModelParams(0, 0, -1, 0.5),
                      None, 1.0, observe_dt=0.5)
    assert np.abs(np.asarray(s.sigma_z) - 1).max() < 1e-9


def test_density_and_vector_agree_with_expm():
    spec = FockSpec(16)
    rho0 = oracle_initial_state(-0.5, 0.2, 0.7, spec)
    p = ModelParams(0.6, 0.4, -1.0, 0.5)
    a = oracle_evolve(rho0, p, None, 0.6, observe_dt=0.2, method="density", keep_states=True)
    b = oracle_evolve(rho0, p, None, 0.6, observe_dt=0.2, method="vector", keep_states=True)
    _, _, H = build_operators(spec, p)
    U = expm(-1j * 0.6 * H)
    exact = U @ rho0.rho @ U.conj().T
    for s in (a, b):
        final = s.extras["states"][-1]
        assert np.abs(final - exact).max() < 1e-9
        assert DensityMatrix(final, spec).purity() == pytest.approx(1.0, abs=1e-8)


def test_purity_preserved():
    spec = FockSpec(24)
    s = oracle_evolve(oracle_initial_state(-1.0, 0.0, 0.6071, spec), SET1, None, 1.0,
                      observe_dt=0.5, method="density", keep_states=True)
    for rho in s.extras["states"]:
        d = DensityMatrix(rho, spec)
        assert d.purity() == pytest.approx(1.0, abs=1e-8)
        assert d.hermiticity_defect() <= 1e-12
        assert d.trace() == pytest.approx(1.0, abs=1e-10)


def test_oracle_validation():
    rho0 = oracle_initial_state(0.0, 0.0, 0.7, FockSpec(12))
    with pytest.raises(ValueError):
        oracle_evolve(rho0, ModelParams(0.6, 0.4, -1.0, -0.1), None, 1.0)
    with pytest.raises(ValueError):
        oracle_evolve(rho0, SET1, None, 1.0, method="eig")
    s = oracle_evolve(rho0, SET1, None, 0.3, observe_dt=0.1)
    assert s.source == "oracle-fock" and len(s) == 4


def test_wigner_ground_state():
    spec = FockSpec(12)
    g = build_grid(-4, 4, -4, 4, 41, 41)
    rho = oracle_initial_state(0.0, 0.0, 1 / math.sqrt(2), spec)
    W = wigner_transform(rho, g)
    R, P = g.mesh()
    assert np.abs(W.data[0, 0] - np.exp(-R**2 - P**2) / math.pi).max() < 1e-4
    assert np.abs(W.data[1]).max() < 1e-15


def test_wigner_matches_initial_field():
    spec = FockSpec(60)
    g = build_grid(-6, 6, -6, 6, 49, 49)
    W = wigner_transform(oracle_initial_state(-1.6, 0.0, 0.6071, spec), g)
    ref = init_coherent_excited(g, -1.6, deltaR=0.6071)
    assert np.abs(W.data - ref.data).max() < 1e-4
    assert norm(W) == pytest.approx(1.0, abs=1e-4)
    assert prob_left(W) == pytest.approx(prob_left(ref), abs=1e-4)


def test_wigner_needs_spec():
    with pytest.raises(ValueError):
        wigner_transform(np.eye(20), build_grid(-1, 1, -1, 1, 8, 8))


def test_trajectory_symmetric_harmonic():
    p = ModelParams(0.6, 0.0, 1.0, 0.0)
    s = classical_trajectory_oracle(0.0, 0.0, 0.7, p, 20_000, 0.01, 2.0, observe_dt=0.5)
    se = np.asarray(s.extras["prob_left_stderr"])
    assert np.all(np.abs(np.asarray(s.prob_left) - 0.5) <= 4 * se)
    assert s.source == "oracle-trajectory"


def test_trajectory_frozen():
    p = ModelParams(0.6, 0.0, -1.0, 0.5)
    s = classical_trajectory_oracle(-1.6, 0.0, 0.6071, p, 100_000, 0.01, 0.0)
    assert len(s) == 1
    se = s.extras["prob_left_stderr"][0]
    assert abs(s.prob_left[0] - gauss.cdf(1.6 / 0.6071)) <= 4 * se


def test_trajectory_rabi_and_energy():
    p = ModelParams(0.6, 0.0, -1.0, 0.5)
    s = classical_trajectory_oracle(-1.6, 0.0, 0.6071, p, 10_000, 0.005, 2.0, observe_dt=0.5)
    t = np.asarray(s.t)
    assert np.abs(np.asarray(s.sigma_z) - np.cos(1.2 * t)).max() < 1e-9
    assert np.ptp(s.energy) < 1e-8


def test_trajectory_validation():
    with pytest.raises(ValueError):
        classical_trajectory_oracle(-1.6, 0, 0.6, SET1, 10_000, 0.01, 1.0)
    with pytest.raises(ValueError):
        classical_trajectory_oracle(-1.6, 0, 0.6, ModelParams(0.6, 0, -1, 0.5), 100, 0.01, 1.0)


def test_trajectory_seeded():
    p = ModelParams(0.6, 0.0, -1.0, 0.5)
    a = classical_trajectory_oracle(-1.6, 0, 0.6071, p, 10_000, 0.01, 0.2, seed=3)
    b = classical_trajectory_oracle(-1.6, 0, 0.6071, p, 10_000, 0.01, 0.2, seed=3)
    assert a.identical(b)
