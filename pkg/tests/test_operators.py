import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ptrlab.operators import (RootOfUnityExponent, conjugated_observable, controlled_power, eigen_exponents,
                              fourier, is_close, number_operator, omega, pauli_x, pauli_z, qubit_pauli,
                              random_unitary, x_eigenstate)
from ptrlab.register import apply_operator, basis_state, make_register, to_matrix

import oracles

d_st = st.integers(2, 8)


@given(d_st)
def test_weyl_commutation(d):
    Z, X = pauli_z(d).matrix, pauli_x(d).matrix
    assert np.allclose(Z @ X, omega(d) * X @ Z, atol=1e-12)


@given(d_st)
def test_orders_are_d(d):
    for op in (pauli_z(d), pauli_x(d)):
        assert np.allclose(np.linalg.matrix_power(op.matrix, d), np.eye(d), atol=1e-10)
        assert not np.allclose(np.linalg.matrix_power(op.matrix, d - 1), np.eye(d))


@given(d_st)
def test_fourier_fourth_power_and_square(d):
    F = fourier(d).matrix
    assert np.allclose(np.linalg.matrix_power(F, 4), np.eye(d), atol=1e-10)
    # F^2 is the parity map |k> -> |-k>
    parity = np.zeros((d, d))
    for k in range(d):
        parity[(-k) % d, k] = 1
    assert np.allclose(F @ F, parity, atol=1e-10)


@given(d_st)
def test_fourier_diagonalizes_shift(d):
    F, Z, X = fourier(d).matrix, pauli_z(d).matrix, pauli_x(d).matrix
    assert np.allclose(F.conj().T @ Z @ F, X, atol=1e-10)
    assert np.allclose(F @ Z @ F.conj().T, X.conj().T, atol=1e-10)


def test_shift_action_explicit():
    X = pauli_x(3).matrix
    for k in range(3):
        assert X[(k + 1) % 3, k] == 1


@given(d_st, st.data())
def test_x_eigenstates(d, data):
    k = data.draw(st.integers(0, d - 1))
    v = x_eigenstate(d, k).amplitudes
    assert np.allclose(pauli_x(d).matrix @ v, omega(d) ** k * v, atol=1e-12)
    assert np.allclose(v, oracles.x_eigvec(d, k), atol=1e-12)
    # F† maps |k> to the k-th X eigenstate
    assert np.allclose(fourier(d).matrix.conj().T[:, k], v, atol=1e-12)


def test_x_eigenstate_index_checked():
    with pytest.raises(ValueError):
        x_eigenstate(3, 3)


def test_dimension_checked():
    with pytest.raises(ValueError):
        pauli_z(1)


class TestExponent:
    def test_arithmetic_mod_d(self):
        a = RootOfUnityExponent(2, 3)
        assert int(a + 2) == 1
        assert int(-a) == 1
        assert RootOfUnityExponent(-1, 4).k == 3

    @given(d_st, st.integers(-50, 50))
    def test_eigenvalue_round_trip(self, d, k):
        e = RootOfUnityExponent(k, d)
        assert RootOfUnityExponent.from_eigenvalue(e.value, d) == e

    def test_rejects_non_roots(self):
        with pytest.raises(ValueError):
            RootOfUnityExponent.from_eigenvalue(np.exp(0.3j), 3)
        with pytest.raises(ValueError):
            RootOfUnityExponent.from_eigenvalue(0.5, 3)

    def test_mixed_dimension_rejected(self):
        with pytest.raises(ValueError):
            RootOfUnityExponent(1, 3) + RootOfUnityExponent(1, 4)


class TestNumberOperator:
    def test_popcount_diagonal(self):
        reg = make_register([("s", 3), ("z0", 2), ("z1", 2), ("z2", 2)])
        N = to_matrix(number_operator(reg), reg)
        for i in range(reg.total_dim):
            assert N[i, i] == sum(oracles.digits_of(i, reg.dims)[1:])

    def test_equals_sum_of_qubit_z(self):
        reg = make_register([("z0", 2), ("z1", 2)])
        zsum = sum((np.eye(4) + to_matrix(qubit_pauli("z", reg, lab), reg)) / 2 for lab in reg.labels)
        # (1 + z)/2 counts |0>; the ancilla convention counts |1> as excited
        assert np.allclose(to_matrix(number_operator(reg), reg), 2 * np.eye(4) - zsum)

    def test_no_qubits(self):
        reg = make_register([("s", 3)])
        with pytest.raises(ValueError):
            number_operator(reg)


class TestControlledPower:
    def test_block_structure(self):
        reg = make_register([("a", 3), ("c", 3)])
        gate = controlled_power(reg, "a", "c", {0: 0, 1: 1, 2: -1})
        for m in range(3):
            for t in range(3):
                out = apply_operator(basis_state(reg, (m, t)), gate)
                shift = {0: 0, 1: 1, 2: -1}[m]
                assert out.amplitudes[reg.flat_index((m, (t + shift) % 3))] == pytest.approx(1)

    def test_callable_map(self):
        reg = make_register([("a", 2), ("c", 4)])
        gate = controlled_power(reg, "a", "c", lambda m: 3 * m)
        assert gate.unitary
        out = apply_operator(basis_state(reg, (1, 0)), gate)
        assert out.amplitudes[reg.flat_index((1, 3))] == pytest.approx(1)

    def test_missing_digit(self):
        reg = make_register([("a", 3), ("c", 3)])
        with pytest.raises(ValueError):
            controlled_power(reg, "a", "c", {0: 1})

    def test_custom_base(self):
        reg = make_register([("a", 2), ("c", 3)])
        gate = controlled_power(reg, "a", "c", {0: 0, 1: 1}, base=pauli_z(3, "c"))
        assert np.allclose(gate.matrix[3:, 3:], pauli_z(3).matrix)


class TestRandomUnitary:
    def test_seeded(self):
        assert is_close(random_unitary(3, 5), random_unitary(3, 5))
        assert not is_close(random_unitary(3, 5), random_unitary(3, 6))

    @settings(max_examples=40, deadline=None)
    @given(st.integers(2, 6), st.integers(0, 2 ** 32 - 1))
    def test_conjugation_preserves_spectrum(self, d, seed):
        U = random_unitary(d, seed)
        assert U.unitary
        O = conjugated_observable(U, d)
        assert eigen_exponents(O) == list(range(d))

    def test_haar_first_moment(self):
        # E|U_00|^2 = 1/d for Haar unitaries
        d, n = 3, 4000
        vals = [abs(random_unitary(d, s).matrix[0, 0]) ** 2 for s in range(n)]
        assert abs(np.mean(vals) - 1 / d) < 4 * np.std(vals) / np.sqrt(n)
