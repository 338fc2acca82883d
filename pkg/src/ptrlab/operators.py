"""Generalized Pauli operators, Fourier transform and controlled counters."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence, Union

import numpy as np

from .register import OperatorSpec, PureState, Register, Role, TOL, make_register


def omega(d: int) -> complex:
    return np.exp(2j * np.pi / d)


def _check_dim(d: int):
    if int(d) != d or d < 2:
        raise ValueError(f"dimension must be an integer >= 2, got {d}")


@dataclass(frozen=True)
class RootOfUnityExponent:
    """Exponent ``k`` of an eigenvalue ``omega**k``, kept modulo ``d``."""
    k: int
    d: int

    def __post_init__(self):
        _check_dim(self.d)
        object.__setattr__(self, "k", int(self.k) % self.d)

    @property
    def value(self) -> complex:
        return omega(self.d) ** self.k

    def __add__(self, other):
        if isinstance(other, RootOfUnityExponent):
            if other.d != self.d:
                raise ValueError("exponents of different dimension")
            other = other.k
        return RootOfUnityExponent(self.k + int(other), self.d)

    def __neg__(self):
        return RootOfUnityExponent(-self.k, self.d)

    def __int__(self):
        return self.k

    @classmethod
    def from_eigenvalue(cls, z: complex, d: int) -> "RootOfUnityExponent":
        if abs(abs(z) - 1) > 1e-8:
            raise ValueError(f"{z} is not on the unit circle")
        k = int(round(np.angle(z) * d / (2 * np.pi)))
        if abs(omega(d) ** k - z) > 1e-8:
            raise ValueError(f"{z} is not a {d}th root of unity")
        return cls(k, d)


def pauli_z(d: int, target: str = "q") -> OperatorSpec:
    """Clock matrix diag(1, w, ..., w^(d-1))."""
    _check_dim(d)
    return OperatorSpec((target,), (d,), np.diag(omega(d) ** np.arange(d)), "Z")


def pauli_x(d: int, target: str = "q") -> OperatorSpec:
    """Cyclic shift |k> -> |k+1 mod d>."""
    _check_dim(d)
    return OperatorSpec((target,), (d,), np.roll(np.eye(d), 1, axis=0), "X")


def fourier(d: int, target: str = "q") -> OperatorSpec:
    """F with entries F[k', k] = w^(k k') / sqrt(d)."""
    _check_dim(d)
    k = np.arange(d)
    return OperatorSpec((target,), (d,), omega(d) ** np.outer(k, k) / np.sqrt(d), "F")


def x_eigenstate(d: int, k: int, label: str = "q", role: Role = Role.POINTER) -> PureState:
    """Eigenvector of the shift with eigenvalue w^k: (1/sqrt d) sum_k' w^(-k k') |k'>."""
    _check_dim(d)
    if not 0 <= k < d:
        raise ValueError(f"eigenstate index {k} out of range [0, {d})")
    amps = omega(d) ** (-k * np.arange(d)) / np.sqrt(d)
    return PureState(make_register([(label, d, role)]), amps)


_QUBIT = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def qubit_pauli(which: str, register: Register, label: str) -> OperatorSpec:
    if which not in _QUBIT:
        raise ValueError(f"unknown qubit Pauli {which!r}")
    if register.dim_of(label) != 2:
        raise ValueError(f"{label!r} is not a qubit")
    return OperatorSpec((label,), (2,), _QUBIT[which], f"{which}_{label}")


def number_operator(register: Register, labels: Sequence[str] | None = None) -> OperatorSpec:
    """Total excitation number sum_k (1 + z_k)/2 over the given qubits.

    Defaults to every ancilla qubit in the register.
    """
    labels = register.with_role(Role.ANCILLA_QUBIT) if labels is None else tuple(labels)
    if not labels:
        raise ValueError("no ancilla qubits to count")
    for lab in labels:
        if register.dim_of(lab) != 2:
            raise ValueError(f"{lab!r} is not a qubit")
    n = len(labels)
    # qubit 0 is the most significant bit, so popcount of the flat index works
    counts = np.array([bin(i).count("1") for i in range(2 ** n)], dtype=float)
    return OperatorSpec(labels, (2,) * n, np.diag(counts), "N")


ExponentMap = Union[Mapping[int, int], Callable[[int], int]]


def controlled_power(register: Register, control: str, target: str,
                     exponent_map: ExponentMap,
                     base: OperatorSpec | None = None) -> OperatorSpec:
    """Block-diagonal gate applying base**exponent_map(m) to ``target`` on control digit m.

    ``base`` defaults to the shift X on the target. Exponents are reduced
    modulo the target dimension when the base is the shift.
    """
    dc, dt = register.dim_of(control), register.dim_of(target)
    if base is None:
        base = pauli_x(dt, target)
    if base.dims != (dt,):
        raise ValueError(f"base operator dims {base.dims} do not match target dim {dt}")
    if not base.unitary:
        raise ValueError("base operator must be unitary")
    lookup = exponent_map if callable(exponent_map) else exponent_map.__getitem__
    mat = np.zeros((dc * dt, dc * dt), dtype=complex)
    for m in range(dc):
        try:
            e = int(lookup(m))
        except (KeyError, IndexError):
            raise ValueError(f"exponent map has no entry for control digit {m}") from None
        if base.name == "X":
            e %= dt
        block = np.linalg.matrix_power(base.matrix if e >= 0 else base.matrix.conj().T, abs(e))
        mat[m * dt:(m + 1) * dt, m * dt:(m + 1) * dt] = block
    return OperatorSpec((control, target), (dc, dt), mat, f"C-{base.name or 'U'}")


def conjugated_observable(U: OperatorSpec, d: int) -> OperatorSpec:
    """U Z U† on the subsystem U acts on."""
    if U.dims != (d,):
        raise ValueError(f"expected a {d}x{d} single-subsystem unitary")
    if not U.unitary:
        raise ValueError("conjugating operator is not unitary")
    z = pauli_z(d, U.targets[0])
    return OperatorSpec(U.targets, U.dims, U.matrix @ z.matrix @ U.matrix.conj().T, "O")


def random_unitary(d: int, seed: int, target: str = "q") -> OperatorSpec:
    """Haar-random unitary: QR of a seeded Ginibre matrix with R-diagonal phases removed."""
    _check_dim(d)
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diagonal(r) / np.abs(np.diagonal(r))
    return OperatorSpec((target,), (d,), q * ph, "U")


def eigen_exponents(op: OperatorSpec) -> list[int]:
    """Sorted eigenvalue exponents of a unitary whose spectrum is roots of unity."""
    d = op.dims[0] if len(op.dims) == 1 else None
    vals = np.linalg.eigvals(op.matrix)
    if d is None:
        raise ValueError("exponent readout needs a single-subsystem operator")
    return sorted(RootOfUnityExponent.from_eigenvalue(v, d).k for v in vals)


def is_close(a: OperatorSpec | np.ndarray, b: OperatorSpec | np.ndarray, tol: float = TOL) -> bool:
    ma = a.matrix if isinstance(a, OperatorSpec) else np.asarray(a)
    mb = b.matrix if isinstance(b, OperatorSpec) else np.asarray(b)
    return ma.shape == mb.shape and float(np.max(np.abs(ma - mb))) < tol
