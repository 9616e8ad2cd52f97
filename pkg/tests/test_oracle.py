import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_hermitian, random_model, random_observable
from declab import closedform, oracle
from declab.core import (
    BALANCED,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    UP,
    DensityMatrix,
    ModelSpec,
    RelevantObservable,
    build_hamiltonian,
    make_spin_factor,
)
from declab.errors import (
    EmptySubsystem,
    InvalidBasis,
    ModelMismatch,
    NonHermitianResult,
    NotDiagonal,
    TooManySites,
)

S2 = 2 ** -0.5


def fixed_model():
    a = (make_spin_factor(0.6, 0.8j), make_spin_factor(1, 1))
    b = (make_spin_factor(1, 2), make_spin_factor(0.3 + 0.1j, -0.5), make_spin_factor(2j, 1))
    return ModelSpec(a, b, (0.3, -0.7, 1.1))


class TestProductState:
    def test_all_up(self):
        st0 = oracle.product_state(ModelSpec((UP,), (UP,), (1.0,)))
        assert np.array_equal(st0.amplitudes, [1, 0, 0, 0])

    def test_balanced_system(self):
        st0 = oracle.product_state(ModelSpec((BALANCED,), (UP,), (1.0,)))
        assert np.allclose(st0.amplitudes, [S2, 0, S2, 0], atol=1e-15)

    def test_amplitude_of_configuration(self):
        a = make_spin_factor(0.6, 0.8j)
        b1, b2 = make_spin_factor(1, 2), make_spin_factor(3, 1j)
        st0 = oracle.product_state(ModelSpec((a,), (b1, b2), (1.0, 1.0)))
        # |up, up, down> = bits 0,0,1
        assert abs(st0.amplitudes[0b001] - a.up_amp * b1.up_amp * b2.down_amp) < 1e-15

    def test_size_cap(self):
        m = ModelSpec((UP,), (UP,) * 24, np.ones(24))
        with pytest.raises(TooManySites):
            oracle.product_state(m)


class TestEvolution:
    def test_t_zero(self):
        m = fixed_model()
        st0 = oracle.product_state(m)
        assert np.array_equal(oracle.evolve_dense(st0, build_hamiltonian(m), 0.0).amplitudes, st0.amplitudes)

    def test_eigenstate_only_gets_phase(self):
        m = ModelSpec((UP, UP), (make_spin_factor(0, 1),), (0.7,))
        st0 = oracle.product_state(m)
        st1 = oracle.evolve_dense(st0, build_hamiltonian(m), 3.0)
        obs = RelevantObservable({0: SIGMA_Z, 2: SIGMA_Z})
        assert oracle.expectation_dense(st1, obs) == pytest.approx(oracle.expectation_dense(st0, obs))
        assert abs(abs(np.vdot(st0.amplitudes, st1.amplitudes)) - 1) < 1e-15

    def test_matches_traditional_closed_form(self):
        m = ModelSpec((BALANCED,), (BALANCED,), (2.0,))
        st1 = oracle.evolve_dense(oracle.product_state(m), build_hamiltonian(m), np.pi / 4)
        val = oracle.expectation_dense(st1, RelevantObservable({0: SIGMA_X}))
        cf = closedform.expectation_traditional(BALANCED, SIGMA_X, [BALANCED], [2.0], np.pi / 4)
        assert abs(val - cf.total[0]) < 1e-14
        assert abs(val) < 1e-15  # cos(pi/2)

    def test_mismatch(self):
        m = fixed_model()
        other = ModelSpec((UP,), (UP,), (1.0,))
        with pytest.raises(ModelMismatch):
            oracle.evolve_dense(oracle.product_state(m), build_hamiltonian(other), 1.0)

    def test_phase_vector_matches_energies(self, rng):
        m = random_model(rng, 3, 5)
        H = build_hamiltonian(m)
        for t in (0.3, 2.9):
            assert np.max(np.abs(oracle._phase_vector(H, t) - np.exp(-1j * H.energies() * t))) < 1e-14

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.floats(-50, 50))
    def test_norm_preserved(self, seed, t):
        m = random_model(np.random.default_rng(seed), 2, 4)
        s1 = oracle.evolve_dense(oracle.product_state(m), build_hamiltonian(m), t)
        assert abs(np.linalg.norm(s1.amplitudes) - 1) < 1e-12


class TestReducedDensity:
    def test_product_state_rank_one(self):
        m = fixed_model()
        rho = oracle.reduced_density(oracle.product_state(m), [1]).entries
        v = m.factors[1].vector()
        assert np.allclose(rho, np.outer(v, v.conj()), atol=1e-15)

    def test_bell_state(self):
        st0 = oracle.DenseState(2, np.array([S2, 0, 0, S2]))
        assert np.allclose(oracle.reduced_density(st0, [0]).entries, np.eye(2) / 2, atol=1e-15)

    def test_empty_keep(self):
        with pytest.raises(EmptySubsystem):
            oracle.reduced_density(oracle.product_state(fixed_model()), [])

    def test_central_spin_offdiagonal(self, rng):
        m = random_model(rng, 1, 6)
        a, b = m.a_side[0].up_amp, m.a_side[0].down_amp
        H = build_hamiltonian(m)
        for t in (0.7, 5.0, 12.0):
            rho = oracle.reduced_density(oracle.evolve_dense(oracle.product_state(m), H, t), [0]).entries
            r = closedform.coherence_factor_r(m.b_side, m.g, t)
            assert abs(rho[0, 1] - a * np.conj(b) * np.conj(r)) < 1e-14

    def test_frozen_reduced_state(self):
        m = fixed_model()
        st1 = oracle.evolve_dense(oracle.product_state(m), build_hamiltonian(m), 1.3)
        rho = oracle.reduced_density(st1, [0]).entries
        assert abs(rho[0, 0] - 0.36) < 1e-14
        assert abs(rho[0, 1] - (-0.19552668 + 0.00587995j)) < 1e-8


class TestExpectation:
    def test_identity(self):
        assert oracle.expectation_dense(oracle.product_state(fixed_model()), RelevantObservable()) == pytest.approx(1.0)

    def test_sigma_z(self):
        m = fixed_model()
        assert oracle.expectation_dense(oracle.product_state(m), RelevantObservable({0: SIGMA_Z})) == pytest.approx(
            0.36 - 0.64
        )

    def test_product_of_single_site(self):
        m = fixed_model()
        st0 = oracle.product_state(m)
        both = oracle.expectation_dense(st0, RelevantObservable({0: SIGMA_Z, 2: SIGMA_Z}))
        one = oracle.expectation_dense(st0, RelevantObservable({0: SIGMA_Z}))
        two = oracle.expectation_dense(st0, RelevantObservable({2: SIGMA_Z}))
        assert abs(both - one * two) < 1e-15

    def test_non_hermitian_result(self):
        st0 = oracle.product_state(ModelSpec((BALANCED,), (UP,), (1.0,)))
        obs = RelevantObservable({0: SIGMA_X})
        object.__setattr__(obs, "factors", {0: np.array([[0, 1], [0, 0]], dtype=complex) * 1j})
        with pytest.raises(NonHermitianResult):
            oracle.expectation_dense(st0, obs)

    def test_frozen_series(self):
        m = fixed_model()
        ts = [0.0, 0.5, 1.3, 4.0]
        s = oracle.expectation_series_dense(m, RelevantObservable({0: SIGMA_X, 1: SIGMA_Y}), ts)
        assert np.allclose(s.total, [0.0, -0.34314378523280015, -0.5119236680201741, -0.19531606762236803], atol=1e-13)
        s = oracle.expectation_series_dense(m, RelevantObservable({2: SIGMA_X, 4: SIGMA_Z}), ts)
        assert np.allclose(s.total, [0.48, 0.46928075739014524, 0.4106192491229464, 0.06302550827010112], atol=1e-13)
        assert s.consistency_error() < 1e-13

    @pytest.mark.parametrize("seed", range(10))
    def test_system_observable_equivalence(self, seed):
        rng = np.random.default_rng(seed)
        m = random_model(rng, 2, 5)
        t = rng.uniform(0, 10)
        sites = sorted(rng.choice(m.num_sites, size=rng.integers(1, 4), replace=False).tolist())
        obs = random_observable(rng, sites)
        st1 = oracle.evolve_dense(oracle.product_state(m), build_hamiltonian(m), t)
        full = oracle.expectation_dense(st1, obs)
        rho = oracle.reduced_density(st1, sites).entries
        local = np.trace(rho @ oracle._local_operator(obs, sites)).real
        assert abs(full - local) < 1e-12


class TestSplitAndCoarseGraining:
    def test_diagonal_in_eigenbasis(self, rng):
        rho = np.diag([0.2, 0.8])
        d, nd = oracle.split_expectation(rho, random_hermitian(rng))
        assert nd == 0

    def test_hand_computation(self):
        d, nd = oracle.split_expectation(0.5 * (np.eye(2) + SIGMA_X), SIGMA_X)
        assert d == 0 and nd == pytest.approx(1.0)

    def test_completeness_in_rotated_basis(self, rng):
        x = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        rho = x @ x.conj().T
        rho /= np.trace(rho)
        O = rng.standard_normal((4, 4))
        O = O + O.T
        U, _ = np.linalg.qr(rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4)))
        d, nd = oracle.split_expectation(DensityMatrix(rho), O, U)
        assert abs(d + nd - np.trace(rho @ O).real) < 1e-12

    def test_non_unitary_basis(self):
        with pytest.raises(InvalidBasis):
            oracle.split_expectation(np.eye(2) / 2, SIGMA_Z, [[1, 1], [0, 1]])

    def test_coarse_grained(self):
        cg = oracle.coarse_grained_state(np.diag([0.3, 0.7]), 4)
        assert cg.dim == 8
        back = oracle.partial_trace(cg.entries, [2, 4], [0])
        assert np.allclose(back, np.diag([0.3, 0.7]), atol=1e-15)
        assert np.trace(cg.entries @ np.kron(SIGMA_Z, np.eye(4))).real == pytest.approx(-0.4)

    def test_coarse_grained_purity(self):
        assert oracle.purity(oracle.coarse_grained_state(np.diag([1.0, 0.0]), 2)) == pytest.approx(0.5)

    def test_not_diagonal(self):
        with pytest.raises(NotDiagonal):
            oracle.coarse_grained_state(0.5 * (np.eye(2) + SIGMA_X), 2)

    def test_purity_values(self):
        assert oracle.purity(np.diag([1.0, 0.0])) == 1.0
        assert oracle.purity(np.eye(2) / 2) == 0.5

    def test_purity_decohered_central_spin(self):
        a = make_spin_factor(0.6, 0.8)
        m = ModelSpec((a,), (BALANCED,) * 14, np.linspace(0.5, 1.5, 14))
        st1 = oracle.evolve_dense(oracle.product_state(m), build_hamiltonian(m), 7.0)
        assert abs(oracle.purity(oracle.reduced_density(st1, [0])) - (0.36**2 + 0.64**2)) < 1e-3
