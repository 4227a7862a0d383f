"""Index-twiddling kernels checked against full-matrix linear algebra."""

import numpy as np
import pytest

from steanesim import kernels
from steanesim.states import gate_matrix

I2 = np.eye(2, dtype=complex)
PAULI = {"X": gate_matrix("X"), "Y": gate_matrix("Y"), "Z": gate_matrix("Z")}


def full_1q(n, q, u):
    """n-qubit matrix of a one-qubit gate; qubit 0 is the low index bit."""
    out = np.array([[1.0]], dtype=complex)
    for k in range(n - 1, -1, -1):
        out = np.kron(out, u if k == q else I2)
    return out


def full_cnot(n, control, target):
    dim = 2**n
    out = np.zeros((dim, dim), dtype=complex)
    for idx in range(dim):
        j = idx ^ (1 << target) if (idx >> control) & 1 else idx
        out[j, idx] = 1.0
    return out


def rand_vec(rng, n):
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return v.astype(np.complex128)


def rand_mat(rng, n):
    dim = 2**n
    m = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = m @ m.conj().T
    return (m / np.trace(m).real).astype(np.complex128)


class TestVectorKernels:
    def test_apply_1q_matches_full_matrix(self, rng):
        u = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        for q in range(3):
            v = rand_vec(rng, 3)
            out = kernels.vec_apply_1q(v.copy(), 3, q, u)
            np.testing.assert_allclose(out, full_1q(3, q, u) @ v, atol=1e-13)

    def test_specialized_gates_match_generic(self, rng):
        v = rand_vec(rng, 3)
        np.testing.assert_allclose(
            kernels.vec_apply_h(v.copy(), 3, 1),
            kernels.vec_apply_1q(v.copy(), 3, 1, gate_matrix("H")), atol=1e-13)
        np.testing.assert_allclose(
            kernels.vec_apply_phase(v.copy(), 3, 2, 1j),
            kernels.vec_apply_1q(v.copy(), 3, 2, gate_matrix("P")), atol=1e-13)
        for w in ("X", "Y", "Z"):
            np.testing.assert_allclose(
                kernels.vec_apply_pauli(v.copy(), 3, 0, w),
                kernels.vec_apply_1q(v.copy(), 3, 0, PAULI[w]), atol=1e-13)

    def test_apply_cnot_matches_permutation(self, rng):
        for control, target in ((0, 2), (2, 0), (1, 2)):
            v = rand_vec(rng, 3)
            out = kernels.vec_apply_cnot(v.copy(), 3, control, target)
            np.testing.assert_allclose(out, full_cnot(3, control, target) @ v,
                                       atol=0)

    def test_prob_one(self, rng):
        v = rand_vec(rng, 3)
        expected = sum(abs(v[i]) ** 2 for i in range(8) if (i >> 1) & 1)
        assert float(kernels.vec_prob_one(v, 3, 1)) == pytest.approx(expected)

    def test_collapse_removes_qubit(self, rng):
        v = rand_vec(rng, 3)
        out = kernels.vec_collapse(v.copy(), 3, 1, 1)
        expected = np.array([v[sel | 2] for sel in (0, 1, 4, 5)])
        np.testing.assert_allclose(out, expected, atol=0)

    def test_project_keep_zeroes_other_slice(self, rng):
        v = rand_vec(rng, 2)
        out = kernels.vec_project_keep(v.copy(), 2, 0, 0)
        np.testing.assert_allclose(out, [v[0], 0, v[2], 0], atol=0)

    def test_measure_x_split(self, rng):
        v = rand_vec(rng, 3)
        plus, minus = kernels.vec_measure_x_split(v.copy(), 3, 2)
        np.testing.assert_allclose(plus, v[:4] + v[4:], atol=0)
        np.testing.assert_allclose(minus, v[:4] - v[4:], atol=0)
        # the halved split weights recover the total weight
        total = (np.vdot(plus, plus).real + np.vdot(minus, minus).real) / 2
        assert total == pytest.approx(np.vdot(v, v).real)

    def test_join_puts_second_factor_high(self, rng):
        a = rand_vec(rng, 2)
        b = rand_vec(rng, 1)
        np.testing.assert_allclose(kernels.vec_join(a, 2, b, 1),
                                   np.kron(b, a), atol=0)


class TestDensityKernels:
    def test_apply_1q_is_conjugation(self, rng):
        u = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        m = rand_mat(rng, 2)
        for q in range(2):
            big = full_1q(2, q, u)
            np.testing.assert_allclose(kernels.dm_apply_1q(m.copy(), 2, q, u),
                                       big @ m @ big.conj().T, atol=1e-13)

    def test_diag_and_pauli_match_generic(self, rng):
        m = rand_mat(rng, 2)
        np.testing.assert_allclose(
            kernels.dm_apply_diag(m.copy(), 2, 1, -1j),
            kernels.dm_apply_1q(m.copy(), 2, 1, gate_matrix("Pdag")),
            atol=1e-14)
        for w in ("X", "Y", "Z"):
            np.testing.assert_allclose(
                kernels.dm_apply_pauli(m.copy(), 2, 0, w),
                kernels.dm_apply_1q(m.copy(), 2, 0, PAULI[w]), atol=1e-14)

    def test_apply_cnot_is_conjugation(self, rng):
        m = rand_mat(rng, 3)
        big = full_cnot(3, 2, 0)
        np.testing.assert_allclose(kernels.dm_apply_cnot(m.copy(), 3, 2, 0),
                                   big @ m @ big.conj().T, atol=0)

    def test_pauli_channel_is_kraus_sum(self, rng):
        m = rand_mat(rng, 2)
        probs = np.array([0.85, 0.05, 0.04, 0.06])
        expected = sum(
            p * (full_1q(2, 1, u) @ m @ full_1q(2, 1, u).conj().T)
            for p, u in zip(probs, (I2, PAULI["X"], PAULI["Y"], PAULI["Z"])))
        np.testing.assert_allclose(
            kernels.dm_pauli_channel(m.copy(), 2, 1, probs), expected,
            atol=1e-14)

    def test_trace_and_measure_weights(self, rng):
        m = rand_mat(rng, 3)
        assert float(kernels.dm_trace(m).real) == pytest.approx(1.0)
        w0, w1 = kernels.dm_measure_weights(m, 3, 1)
        expected1 = sum(m[i, i].real for i in range(8) if (i >> 1) & 1)
        assert float(w1) == pytest.approx(expected1)
        assert float(w0 + w1) == pytest.approx(1.0)

    def test_collapse_matches_project_then_trace(self, rng):
        m = rand_mat(rng, 3)
        collapsed = kernels.dm_collapse(m.copy(), 3, 1, 0)
        kept = kernels.dm_project_keep(m.copy(), 3, 1, 0)
        reduced = kernels.dm_ptrace_qubit(kept, 3, 1)
        np.testing.assert_allclose(collapsed, reduced, atol=1e-14)

    def test_ptrace_matches_einsum(self, rng):
        m = rand_mat(rng, 3)
        t = m.reshape(2, 2, 2, 2, 2, 2)  # (q2, q1, q0) x (q2', q1', q0')
        expected = np.einsum("abcaef->bcef", t).reshape(4, 4)
        np.testing.assert_allclose(kernels.dm_ptrace_qubit(m.copy(), 3, 2),
                                   expected, atol=1e-14)

    def test_join_and_from_vec(self, rng):
        a = rand_mat(rng, 1)
        b = rand_mat(rng, 2)
        np.testing.assert_allclose(kernels.dm_join(a, 1, b, 2),
                                   np.kron(b, a), atol=0)
        v = rand_vec(rng, 2)
        np.testing.assert_allclose(kernels.dm_from_vec(v),
                                   np.outer(v, v.conj()), atol=0)


class TestTeleportStep:
    """The shrink-as-you-go step against a literal CNOT/channel/measure chain."""

    def literal(self, arr, m, target_probs, control_probs):
        paulis = (I2, PAULI["X"], PAULI["Y"], PAULI["Z"])
        state = arr.copy()
        big = full_cnot(m, 7, 0)
        state = big @ state @ big.conj().T
        state = sum(p * (full_1q(m, 0, u) @ state @ full_1q(m, 0, u).conj().T)
                    for p, u in zip(target_probs, paulis))
        outs = []
        for bit in (0, 1):
            kept = kernels.dm_project_keep(state.copy(), m, 0, bit)
            red = kernels.dm_ptrace_qubit(kept, m, 0)
            red = sum(
                p * (full_1q(m - 1, 6, u) @ red @ full_1q(m - 1, 6, u).conj().T)
                for p, u in zip(control_probs, paulis))
            outs.append(red)
        return outs

    def test_dm_step_matches_literal(self, rng):
        m = 8
        arr = rand_mat(rng, m)
        target = np.array([0.9, 0.04, 0.03, 0.03])
        control = np.array([0.95, 0.02, 0.02, 0.01])
        out0, out1 = kernels.dm_teleport_step(arr, m, target, control)
        exp0, exp1 = self.literal(arr, m, target, control)
        np.testing.assert_allclose(out0, exp0, atol=1e-13)
        np.testing.assert_allclose(out1, exp1, atol=1e-13)
        # weights of the two outcomes exhaust the input trace
        total = kernels.dm_trace(out0).real + kernels.dm_trace(out1).real
        assert float(total) == pytest.approx(1.0, abs=1e-12)

    def test_vec_step_matches_literal(self, rng):
        m = 8
        v = rand_vec(rng, m)
        out0, out1 = kernels.vec_teleport_step(v, m)
        w = full_cnot(m, 7, 0) @ v
        for bit, out in ((0, out0), (1, out1)):
            expected = np.array([w[(rest << 1) | bit]
                                 for rest in range(2 ** (m - 1))])
            np.testing.assert_allclose(out, expected, atol=0)

    def test_vec_step_consistent_with_dm_step(self, rng):
        m = 8
        v = rand_vec(rng, m)
        ident = np.array([1.0, 0.0, 0.0, 0.0])
        d0, d1 = kernels.dm_teleport_step(np.outer(v, v.conj()), m, ident, ident)
        p0, p1 = kernels.vec_teleport_step(v, m)
        np.testing.assert_allclose(d0, np.outer(p0, p0.conj()), atol=1e-13)
        np.testing.assert_allclose(d1, np.outer(p1, p1.conj()), atol=1e-13)
