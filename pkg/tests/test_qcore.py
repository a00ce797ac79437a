import numpy as np
import pytest

from qrc import qcore
from qrc.exceptions import DimensionError, DomainError, InvariantError, ParameterError, ValidationError
from qrc.qcore import Axis, Topology

from oracles import X, Z, ising_kron, partial_trace_first_loops, pauli_ptm_reference, single, taylor_expm


@pytest.fixture
def rng():
    return np.random.default_rng(42)


class TestHamiltonian:
    """Ising Hamiltonian construction."""

    def test_single_qubit_is_field_only(self):
        H = qcore.build_hamiltonian(1, 1.0, 0.5, rng=np.random.default_rng(0))
        np.testing.assert_allclose(H.matrix, 0.5 * np.diag([1, -1]))
        np.testing.assert_allclose(H.spectrum[0], [-0.5, 0.5])

    def test_commuting_fields(self):
        H = qcore.build_hamiltonian(2, 0.0, 1.0, rng=np.random.default_rng(0))
        np.testing.assert_allclose(H.matrix, np.diag([2, 0, 0, -2]))

    def test_three_qubit_draw_matches_kron_oracle(self):
        H = qcore.build_hamiltonian(3, 1.0, 0.5, Topology.FULL, np.random.default_rng(42))
        iu = np.triu_indices(3, 1)
        assert np.all(np.abs(H.couplings[iu]) <= 0.5)
        assert H.reconstruction_error() <= 1e-12
        np.testing.assert_allclose(H.matrix, ising_kron(H.couplings, 0.5), atol=1e-12)

    def test_nearest_neighbour_topology(self):
        H = qcore.build_hamiltonian(5, 1.0, 0.5, "1dnn", np.random.default_rng(3))
        mask = np.zeros((5, 5), dtype=bool)
        for i in range(4):
            mask[i, i + 1] = mask[i + 1, i] = True
        assert np.all(H.couplings[~mask] == 0)
        assert np.all(H.couplings[mask] != 0)
        np.testing.assert_allclose(H.matrix, ising_kron(H.couplings, 0.5), atol=1e-12)

    def test_deterministic_given_stream(self):
        a = qcore.build_hamiltonian(4, 1.0, 0.5, rng=np.random.default_rng(7))
        b = qcore.build_hamiltonian(4, 1.0, 0.5, rng=np.random.default_rng(7))
        np.testing.assert_array_equal(a.matrix, b.matrix)

    def test_qubit_limit(self):
        with pytest.raises(DimensionError):
            qcore.build_hamiltonian(13, 1.0, 0.5, rng=np.random.default_rng(0))
        with pytest.raises(DimensionError):
            qcore.build_hamiltonian(4, 1.0, 0.5, rng=np.random.default_rng(0), max_qubits=3)

    def test_negative_J_rejected(self):
        with pytest.raises(ParameterError):
            qcore.build_hamiltonian(2, -1.0, 0.5)


class TestPropagator:
    def test_zero_time_is_identity(self, rng):
        H = qcore.build_hamiltonian(3, 1.0, 0.5, rng=rng)
        np.testing.assert_allclose(qcore.propagator(H, 0.0).matrix, np.eye(8), atol=1e-12)

    def test_diagonal_single_qubit(self):
        H = qcore.build_hamiltonian(1, 1.0, 0.3)
        t = 1.7
        np.testing.assert_allclose(qcore.propagator(H, t).matrix,
                                   np.diag([np.exp(-0.3j * t), np.exp(0.3j * t)]), atol=1e-12)

    def test_semigroup(self, rng):
        H = qcore.build_hamiltonian(2, 1.0, 0.5, rng=rng)
        U = qcore.propagator(H, 0.7).matrix
        small = qcore.propagator(H, 0.1).matrix
        np.testing.assert_allclose(U, np.linalg.matrix_power(small, 7), atol=1e-8)

    def test_matches_taylor_series(self, rng):
        H = qcore.build_hamiltonian(4, 1.0, 0.5, rng=rng)
        np.testing.assert_allclose(qcore.propagator(H, 2.3).matrix, taylor_expm(-2.3j * H.matrix), atol=1e-10)

    def test_unitary_for_long_times(self, rng):
        H = qcore.build_hamiltonian(5, 1.0, 0.5, rng=rng)
        assert qcore.unitarity_error(qcore.propagator(H, 128.0).matrix) <= 1e-9

    def test_reuse_at_other_step(self, rng):
        H = qcore.build_hamiltonian(3, 1.0, 0.5, rng=rng)
        P = qcore.propagator(H, 0.5)
        np.testing.assert_allclose(P.at(1.5).matrix, qcore.propagator(H, 1.5).matrix, atol=1e-13)

    def test_negative_dt(self, rng):
        H = qcore.build_hamiltonian(2, 1.0, 0.5, rng=rng)
        with pytest.raises(DomainError):
            qcore.propagator(H, -1.0)


class TestStateMaps:
    def test_evolve_identity(self, rng):
        rho = qcore.random_density_matrix(3, rng)
        np.testing.assert_allclose(qcore.evolve(rho, np.eye(8)), rho, atol=1e-15)

    def test_evolve_pure_stays_pure(self, rng):
        H = qcore.build_hamiltonian(3, 1.0, 0.5, rng=rng)
        rho = qcore.basis_state(3, 5)
        out = qcore.evolve(rho, qcore.propagator(H, 1.3))
        assert abs(qcore.purity(out) - 1) <= 1e-10

    def test_evolve_against_series_oracle(self):
        H = qcore.build_hamiltonian(2, 1.0, 0.5, rng=np.random.default_rng(42))
        rho = qcore.basis_state(2, 0)
        out = qcore.evolve(rho, qcore.propagator(H, 1.0))
        U = taylor_expm(-1j * H.matrix)
        ref = U @ rho @ U.conj().T
        assert abs(np.trace(out) - 1) <= 1e-10
        assert abs(qcore.expect_z(out, 0) - np.trace(single(Z, 0, 2) @ ref).real) <= 1e-8

    def test_evolve_preserves_spectrum(self, rng):
        H = qcore.build_hamiltonian(3, 1.0, 0.5, rng=rng)
        rho = qcore.random_density_matrix(3, rng)
        out = qcore.evolve(rho, qcore.propagator(H, 0.9))
        np.testing.assert_allclose(np.linalg.eigvalsh(out), np.linalg.eigvalsh(rho), atol=1e-10)

    def test_evolve_dimension_mismatch(self, rng):
        with pytest.raises(DimensionError):
            qcore.evolve(qcore.maximally_mixed(2), np.eye(8))

    def test_inject_zero_sets_up(self, rng):
        out = qcore.inject_input(qcore.random_density_matrix(3, rng), 0.0)
        assert qcore.expect_z(out, 0) == 1.0

    def test_inject_half_is_plus_state(self, rng):
        out = qcore.inject_input(qcore.random_density_matrix(2, rng), 0.5)
        assert abs(qcore.expect_z(out, 0)) <= 1e-12
        assert abs(np.trace(single(X, 0, 2) @ out).real - 1) <= 1e-12

    def test_inject_idempotent(self, rng):
        rho = qcore.random_density_matrix(3, rng)
        once = qcore.inject_input(rho, 0.3)
        np.testing.assert_allclose(qcore.inject_input(once, 0.3), once, atol=1e-12)

    def test_inject_signal_is_one_minus_s(self, rng):
        rho = qcore.random_density_matrix(3, rng)
        for s in (0.0, 0.2, 0.77, 1.0):
            assert abs(qcore.signal(qcore.inject_input(rho, s), 0) - (1 - s)) <= 1e-12

    @pytest.mark.parametrize("s", [-0.1, 1.01, np.nan])
    def test_inject_domain(self, s):
        with pytest.raises(DomainError):
            qcore.inject_input(qcore.maximally_mixed(2), s)

    def test_inject_single_qubit(self):
        out = qcore.inject_input(qcore.maximally_mixed(1), 0.25)
        np.testing.assert_allclose(out, qcore.input_state(0.25))

    def test_partial_trace_product(self, rng):
        a = qcore.random_density_matrix(1, rng)
        b = qcore.random_density_matrix(2, rng)
        np.testing.assert_allclose(qcore.partial_trace_first(np.kron(a, b)), b, atol=1e-12)

    def test_partial_trace_bell(self):
        psi = np.array([1, 0, 0, 1]) / np.sqrt(2)
        np.testing.assert_allclose(qcore.partial_trace_first(np.outer(psi, psi)), np.eye(2) / 2, atol=1e-12)

    def test_partial_trace_index_oracle(self, rng):
        rho = qcore.random_density_matrix(3, rng)
        out = qcore.partial_trace_first(rho)
        np.testing.assert_allclose(out, partial_trace_first_loops(rho), atol=1e-14)
        qcore.check_density_matrix(out)

    def test_partial_trace_needs_two_qubits(self):
        with pytest.raises(DimensionError):
            qcore.partial_trace_first(qcore.maximally_mixed(1))


class TestObservables:
    def test_all_up(self):
        rho = qcore.basis_state(3, 0)
        for i in range(3):
            assert qcore.expect_z(rho, i) == 1.0
            assert qcore.signal(rho, i) == 1.0

    def test_mixed(self):
        rho = qcore.maximally_mixed(4)
        np.testing.assert_allclose(qcore.expect_z_all(rho), 0.0, atol=1e-15)
        assert qcore.signal(rho, 2) == 0.5

    def test_vector_matches_single(self, rng):
        rho = qcore.random_density_matrix(4, rng)
        np.testing.assert_allclose(qcore.expect_z_all(rho), [qcore.expect_z(rho, i) for i in range(4)])

    def test_against_kron_operator(self, rng):
        rho = qcore.random_density_matrix(3, rng)
        for i in range(3):
            assert abs(qcore.expect_z(rho, i) - np.trace(single(Z, i, 3) @ rho).real) <= 1e-12

    def test_index_range(self):
        with pytest.raises(DimensionError):
            qcore.expect_z(qcore.maximally_mixed(2), 2)

    def test_purity_values(self):
        assert abs(qcore.purity(qcore.basis_state(3, 1)) - 1) <= 1e-12
        assert abs(qcore.purity(qcore.maximally_mixed(5)) - 1 / 32) <= 1e-12


class TestDephasing:
    plus = np.full((2, 2), 0.5, dtype=complex)

    def test_zero_rate(self, rng):
        rho = qcore.random_density_matrix(2, rng)
        np.testing.assert_array_equal(qcore.dephase(rho, 0.0, 0.1), rho)

    def test_diagonal_fixed_point(self, rng):
        rho = np.diag(rng.dirichlet(np.ones(8))).astype(complex)
        np.testing.assert_allclose(qcore.dephase(rho, 0.3, 0.2, Axis.Z), rho, atol=1e-12)

    def test_plus_state_coherence_decay(self):
        out = qcore.dephase(self.plus, 0.5, 1.0, "z")
        assert abs(out[0, 1].real - 0.5 * np.exp(-1)) <= 1e-6

    def test_plus_state_purity(self):
        out = qcore.dephase(self.plus, 0.25, 2.0)
        assert abs(qcore.purity(out) - 0.5 * (1 + np.exp(-2))) <= 1e-8

    def test_matches_kraus_form(self, rng):
        """Product of single-qubit channels (1-p) rho + p P rho P."""
        n, gamma, dt = 3, 0.4, 0.3
        p = (1 - np.exp(-2 * gamma * dt)) / 2
        rho = qcore.random_density_matrix(n, rng)
        for axis, P in (("z", Z), ("x", X)):
            ref = rho.copy()
            for i in range(n):
                Pi = single(P, i, n)
                ref = (1 - p) * ref + p * Pi @ ref @ Pi
            np.testing.assert_allclose(qcore.dephase(rho, gamma, dt, axis), ref, atol=1e-12)

    def test_x_axis_fixed_point(self):
        plus3 = np.full((8, 8), 1 / 8, dtype=complex)
        np.testing.assert_allclose(qcore.dephase(plus3, 1.0, 1.0, Axis.X), plus3, atol=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            qcore.dephase(self.plus, -1.0, 0.1)
        with pytest.raises(DomainError):
            qcore.dephase(self.plus, 1.0, 0.0)


class TestCustomUnitary:
    cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])

    def _zout(self, s1, s2):
        rho = np.kron(qcore.input_state(s1), qcore.input_state(s2))
        return qcore.expect_z(qcore.apply_unitary(rho, self.cnot), 1)

    def test_corner(self):
        assert self._zout(0, 0) == pytest.approx(1.0, abs=1e-15)

    def test_half_kills_output(self):
        for s2 in (0.0, 0.3, 1.0):
            assert abs(self._zout(0.5, s2)) <= 1e-12

    def test_product_identity_grid(self):
        grid = (0.0, 0.25, 0.5, 0.75, 1.0)
        for s1 in grid:
            for s2 in grid:
                assert abs(self._zout(s1, s2) - (1 - 2 * s1) * (1 - 2 * s2)) <= 1e-12

    def test_rejects_non_unitary(self):
        with pytest.raises(ValidationError):
            qcore.apply_unitary(qcore.maximally_mixed(2), 1.01 * np.eye(4))


class TestOperatorSpace:
    def test_orthogonal_two_qubits(self, rng):
        H = qcore.build_hamiltonian(2, 1.0, 0.5, rng=rng)
        T = qcore.pauli_transfer_matrix(qcore.propagator(H, 1.0).matrix)
        assert T.shape == (16, 16)
        np.testing.assert_allclose(T @ T.T, np.eye(16), atol=1e-8)

    def test_matches_reference_up_to_ordering(self, rng):
        H = qcore.build_hamiltonian(2, 1.0, 0.5, rng=rng)
        U = qcore.propagator(H, 0.8).matrix
        T = qcore.pauli_transfer_matrix(U)
        ref = pauli_ptm_reference(U)
        # sorted entries agree regardless of basis order
        np.testing.assert_allclose(np.sort(T.ravel()), np.sort(ref.ravel()), atol=1e-12)
        labels = qcore.pauli_labels(2)
        assert labels[:2] == ["ZI", "IZ"] and sorted(labels) == sorted(set(labels))


class TestInvariantChecks:
    def test_names(self):
        rho = qcore.maximally_mixed(2)
        with pytest.raises(InvariantError) as e:
            qcore.check_density_matrix(rho * 1.1)
        assert e.value.invariant == "trace"
        bad = rho.copy()
        bad[0, 1] = 0.1
        with pytest.raises(InvariantError) as e:
            qcore.check_density_matrix(bad)
        assert e.value.invariant == "hermiticity"
        neg = np.diag([1.2, -0.2, 0, 0]).astype(complex)
        with pytest.raises(InvariantError) as e:
            qcore.check_density_matrix(neg)
        assert e.value.invariant == "positivity"
