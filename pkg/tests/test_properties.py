"""Randomised invariants checked with hypothesis."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from qrc import qcore, tasks
from qrc import reservoir as rsv
from qrc.readout import capacity_single

seeds = st.integers(0, 2**32 - 1)
unit = st.floats(0.0, 1.0)
n_qubits = st.integers(1, 4)


def _system(n, seed, noise=None):
    H = qcore.build_hamiltonian(n, 1.0, 0.5, rng=np.random.default_rng(seed))
    return rsv.ReservoirSystem(H, 1.0, 3, noise)


class TestChannel:
    @settings(max_examples=40, deadline=None)
    @given(n_qubits, seeds, unit, st.floats(0.0, 0.5))
    def test_step_preserves_density_matrices(self, n, seed, s, gamma):
        system = _system(n, seed, rsv.NoiseSpec(gamma))
        rho = qcore.random_density_matrix(n, np.random.default_rng(seed))
        out, sig = rsv.step(rsv.ReservoirState(rho), s, system)
        qcore.check_density_matrix(out.rho)
        assert np.all((sig > -1e-12) & (sig < 1 + 1e-12))

    @settings(max_examples=40, deadline=None)
    @given(n_qubits, seeds, unit, unit)
    def test_step_is_linear_in_state(self, n, seed, s, a):
        system = _system(n, seed, rsv.NoiseSpec(0.1))
        rng = np.random.default_rng(seed)
        r1, r2 = qcore.random_density_matrix(n, rng), qcore.random_density_matrix(n, rng)
        mix = rsv.step(rsv.ReservoirState(a * r1 + (1 - a) * r2), s, system)[0].rho
        sep = a * rsv.step(rsv.ReservoirState(r1), s, system)[0].rho \
            + (1 - a) * rsv.step(rsv.ReservoirState(r2), s, system)[0].rho
        np.testing.assert_allclose(mix, sep, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(n_qubits, seeds, st.floats(0.0, 5.0), st.sampled_from(["z", "x"]))
    def test_dephasing_never_raises_purity(self, n, seed, gamma, axis):
        rho = qcore.random_density_matrix(n, np.random.default_rng(seed))
        assert qcore.purity(qcore.dephase(rho, gamma, 0.3, axis)) <= qcore.purity(rho) + 1e-12

    @settings(max_examples=30, deadline=None)
    @given(n_qubits, seeds, unit)
    def test_engines_agree(self, n, seed, s):
        system = _system(n, seed)
        rho = qcore.random_density_matrix(n, np.random.default_rng(seed + 1))
        a = rsv.step(rsv.ReservoirState(rho), s, system, engine="fast")[1]
        b = rsv.step(rsv.ReservoirState(rho), s, system, engine="reference")[1]
        np.testing.assert_allclose(a, b, atol=1e-12)


class TestMetrics:
    @settings(max_examples=60, deadline=None)
    @given(seeds, st.floats(0.1, 10.0), st.floats(-5.0, 5.0), st.booleans())
    def test_capacity_affine_invariance(self, seed, scale, shift, flip):
        rng = np.random.default_rng(seed)
        y, t = rng.normal(size=100), rng.normal(size=100)
        a = -scale if flip else scale
        assert abs(capacity_single(a * y + shift, t) - capacity_single(y, t)) <= 1e-10

    @settings(max_examples=30, deadline=None)
    @given(seeds, st.integers(1, 200))
    def test_parity_equals_memory_at_delay_zero(self, seed, length):
        s = tasks.binary_stream(length, np.random.default_rng(seed))
        np.testing.assert_array_equal(tasks.pc_target(s, 0), tasks.stm_target(s, 0))

    @settings(max_examples=30, deadline=None)
    @given(seeds, st.integers(0, 20))
    def test_parity_recursion(self, seed, delay):
        s = tasks.binary_stream(100, np.random.default_rng(seed))
        # parity over d+1 symbols = parity over d symbols xor the oldest one
        lhs = tasks.pc_target(s, delay + 1)
        rhs = (tasks.pc_target(s, delay) + tasks.stm_target(s, delay + 1)) % 2
        np.testing.assert_array_equal(lhs, rhs)
