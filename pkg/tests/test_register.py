import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ptrlab import register as R
from ptrlab.operators import fourier, pauli_x, pauli_z, random_unitary
from ptrlab.register import (DensityMatrix, OperatorSpec, PureState, Role, apply_operator, basis_state,
                             collapse, discard, expectation, fidelity, make_register, marginal,
                             partial_trace, tensor, to_density, to_matrix)

import oracles

dims_st = st.lists(st.integers(2, 4), min_size=1, max_size=4)


def _register(dims):
    return make_register([(f"q{i}", d) for i, d in enumerate(dims)])


def _random_pure(reg, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=reg.total_dim) + 1j * rng.normal(size=reg.total_dim)
    return PureState(reg, v / np.linalg.norm(v))


def _random_mixed(reg, seed, rank=3):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(reg.total_dim, rank)) + 1j * rng.normal(size=(reg.total_dim, rank))
    rho = a @ a.conj().T
    return DensityMatrix(reg, rho / np.trace(rho))


class TestRegister:
    def test_duplicate_labels_rejected(self):
        with pytest.raises(ValueError):
            make_register([("a", 2), ("a", 3)])

    def test_default_roles(self):
        reg = make_register([("s", 3), ("z0", 2)])
        assert reg.with_role(Role.ANCILLA_QUBIT) == ("z0",)
        assert reg.with_role(Role.SPIN) == ("s",)

    def test_subsystem_zero_is_most_significant(self):
        reg = make_register([("a", 3), ("b", 2)])
        assert reg.flat_index((1, 0)) == 2
        assert reg.flat_index((0, 1)) == 1
        assert reg.digits(5) == (2, 1)

    @given(dims_st, st.data())
    def test_mixed_radix_round_trip(self, dims, data):
        reg = _register(dims)
        flat = data.draw(st.integers(0, reg.total_dim - 1))
        assert reg.flat_index(reg.digits(flat)) == flat
        assert reg.digits(flat) == oracles.digits_of(flat, dims)

    def test_out_of_range_digit(self):
        reg = make_register([("a", 2)])
        with pytest.raises(ValueError):
            reg.flat_index((2,))

    def test_without_and_subset(self):
        reg = make_register([("a", 2), ("b", 3), ("c", 2)])
        assert reg.without(["b"]).labels == ("a", "c")
        assert reg.subset(["c", "a"]).labels == ("a", "c")


class TestStates:
    def test_unnormalized_rejected(self):
        reg = make_register([("a", 2)])
        with pytest.raises(ValueError):
            PureState(reg, np.array([1.0, 1.0]))

    def test_non_psd_rejected(self):
        reg = make_register([("a", 2)])
        with pytest.raises(ValueError):
            DensityMatrix(reg, np.array([[1.5, 0], [0, -0.5]]))

    def test_non_hermitian_rejected(self):
        reg = make_register([("a", 2)])
        with pytest.raises(ValueError):
            DensityMatrix(reg, np.array([[0.5, 0.1], [0.0, 0.5]]))

    def test_basis_state(self):
        reg = make_register([("a", 3), ("b", 2)])
        psi = basis_state(reg, (2, 1))
        assert psi.amplitudes[5] == 1

    def test_tensor_order(self):
        a = basis_state(make_register([("a", 2)]), (1,))
        b = basis_state(make_register([("b", 3)]), (2,))
        ab = tensor(a, b)
        assert ab.register.labels == ("a", "b")
        assert ab.amplitudes[5] == 1

    def test_tensor_mixed(self):
        a = to_density(basis_state(make_register([("a", 2)]), (0,)))
        b = basis_state(make_register([("b", 2)]), (1,))
        assert isinstance(tensor(a, b), DensityMatrix)


class TestOperators:
    def test_non_unitary_cannot_be_applied(self):
        reg = make_register([("a", 2)])
        op = OperatorSpec(("a",), (2,), np.array([[1, 0], [0, 0]]))
        with pytest.raises(ValueError):
            apply_operator(basis_state(reg, (0,)), op)

    def test_unknown_target(self):
        reg = make_register([("a", 2)])
        with pytest.raises(KeyError):
            apply_operator(basis_state(reg, (0,)), pauli_x(2, "zz"))

    def test_dimension_mismatch(self):
        reg = make_register([("a", 2)])
        with pytest.raises(ValueError):
            apply_operator(basis_state(reg, (0,)), pauli_x(3, "a"))

    def test_to_matrix_matches_oracle(self):
        reg = make_register([("a", 2), ("b", 3), ("c", 2)])
        op = R.kron(pauli_x(3, "b"), pauli_z(2, "a") @ pauli_x(2, "a"))
        want = oracles.full_operator(reg.dims, [1, 0], op.matrix)
        assert np.allclose(to_matrix(op, reg), want, atol=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(dims_st, st.integers(0, 2 ** 32 - 1), st.data())
    def test_unitaries_preserve_norm(self, dims, seed, data):
        reg = _register(dims)
        i = data.draw(st.integers(0, len(dims) - 1))
        U = random_unitary(dims[i], seed, f"q{i}")
        psi = _random_pure(reg, seed)
        out = apply_operator(psi, U)
        assert abs(np.linalg.norm(out.amplitudes) - 1) < 1e-12
        want = oracles.full_operator(list(dims), [i], U.matrix) @ psi.amplitudes
        assert np.allclose(out.amplitudes, want, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.lists(st.integers(2, 4), min_size=2, max_size=4), st.integers(0, 2 ** 32 - 1))
    def test_disjoint_operators_commute(self, dims, seed):
        reg = _register(dims)
        A = random_unitary(dims[0], seed, "q0")
        B = random_unitary(dims[-1], seed + 1, f"q{len(dims) - 1}")
        psi = _random_pure(reg, seed)
        ab = apply_operator(apply_operator(psi, A), B)
        ba = apply_operator(apply_operator(psi, B), A)
        assert np.allclose(ab.amplitudes, ba.amplitudes, atol=1e-12)

    def test_density_conjugation(self):
        reg = make_register([("a", 3), ("b", 2)])
        rho = _random_mixed(reg, 1)
        U = random_unitary(3, 7, "a")
        M = oracles.full_operator(reg.dims, [0], U.matrix)
        assert np.allclose(apply_operator(rho, U).matrix, M @ rho.matrix @ M.conj().T, atol=1e-12)

    def test_expectation_real_for_hermitian(self):
        reg = make_register([("a", 2)])
        psi = PureState(reg, np.array([1, 1]) / np.sqrt(2))
        assert expectation(psi, OperatorSpec(("a",), (2,), np.array([[0, 1], [1, 0]]))) == pytest.approx(1)

    def test_powers(self):
        X = pauli_x(3)
        assert np.allclose((X ** 3).matrix, np.eye(3))
        assert np.allclose((X ** -1).matrix, X.matrix.conj().T)


class TestPartialTrace:
    def test_matches_oracle(self):
        reg = make_register([("a", 2), ("b", 3), ("c", 2)])
        rho = _random_mixed(reg, 3)
        for keep in (["a"], ["b"], ["a", "c"], ["b", "c"]):
            axes = [reg.index(k) for k in keep]
            want = oracles.partial_trace(rho.matrix, reg.dims, axes)
            assert np.allclose(partial_trace(rho, keep).matrix, want, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(dims_st, st.integers(0, 2 ** 32 - 1))
    def test_keep_all_is_identity_and_trace_one(self, dims, seed):
        reg = _register(dims)
        psi = _random_pure(reg, seed)
        full = partial_trace(psi, reg.labels)
        assert np.allclose(full.matrix, np.outer(psi.amplitudes, psi.amplitudes.conj()), atol=1e-12)
        red = partial_trace(psi, [reg.labels[0]])
        assert abs(np.trace(red.matrix) - 1) < 1e-12

    def test_empty_keep_rejected(self):
        reg = make_register([("a", 2)])
        with pytest.raises(ValueError):
            partial_trace(basis_state(reg, (0,)), [])


class TestMeasurementHelpers:
    def test_marginal_and_collapse(self):
        reg = make_register([("a", 2), ("b", 2)])
        psi = PureState(reg, np.array([np.sqrt(0.2), 0, 0, np.sqrt(0.8)]))
        assert np.allclose(marginal(psi, ["a"]), [0.2, 0.8])
        p, post = collapse(psi, {"b": 1})
        assert p == pytest.approx(0.8)
        assert fidelity(post, basis_state(reg, (1, 1))) == pytest.approx(1)

    def test_discard_definite(self):
        reg = make_register([("a", 2), ("b", 3)])
        psi = tensor(PureState(make_register([("a", 2)]), np.array([0.6, 0.8])),
                     basis_state(make_register([("b", 3)]), (2,)))
        out = discard(psi, ["b"])
        assert out.register.labels == ("a",)
        assert np.allclose(out.amplitudes, [0.6, 0.8])

    def test_discard_entangled_rejected(self):
        reg = make_register([("a", 2), ("b", 2)])
        psi = PureState(reg, np.array([1, 0, 0, 1]) / np.sqrt(2))
        with pytest.raises(ValueError):
            discard(psi, ["b"])

    def test_fidelity_mixed(self):
        reg = make_register([("a", 2)])
        rho = DensityMatrix(reg, np.eye(2) / 2)
        assert fidelity(rho, basis_state(reg, (0,))) == pytest.approx(0.5)

    def test_fourier_unitary(self):
        assert fourier(5).unitary
