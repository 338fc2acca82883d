"""Mixed-dimension registers and dense state/operator algebra.

Subsystem 0 is the most significant mixed-radix digit, so a register
``[("s", 3), ("a0", 2), ("a1", 2), ("a2", 2)]`` lays out kets as
``|k>_s |n0 n1 n2>_a`` read left to right.

All states and operators are immutable; every operation returns a new value.
"""
from __future__ import annotations

import string
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, Sequence, Union

import numpy as np

TOL = 1e-10


class Role(str, Enum):
    SPIN = "spin"
    ANCILLA_QUBIT = "ancilla_qubit"
    COUNTER = "counter"
    PATH = "path"
    POINTER = "pointer"


@dataclass(frozen=True)
class Subsystem:
    label: str
    dim: int
    role: Role


@dataclass(frozen=True)
class Register:
    subsystems: tuple[Subsystem, ...]

    def __post_init__(self):
        if not self.subsystems:
            raise ValueError("register needs at least one subsystem")
        seen = set()
        for sub in self.subsystems:
            if sub.dim < 2:
                raise ValueError(f"subsystem {sub.label!r}: dimension {sub.dim} < 2")
            if sub.label in seen:
                raise ValueError(f"duplicate label {sub.label!r}")
            seen.add(sub.label)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.subsystems)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    def __len__(self):
        return len(self.subsystems)

    def __contains__(self, label):
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown subsystem {label!r}") from None

    def dim_of(self, label: str) -> int:
        return self.subsystems[self.index(label)].dim

    def with_role(self, role: Role) -> tuple[str, ...]:
        return tuple(s.label for s in self.subsystems if s.role == role)

    def flat_index(self, digits: Sequence[int]) -> int:
        if len(digits) != len(self):
            raise ValueError(f"expected {len(self)} digits, got {len(digits)}")
        for d, dim, lab in zip(digits, self.dims, self.labels):
            if not 0 <= d < dim:
                raise ValueError(f"digit {d} out of range for {lab!r} (dim {dim})")
        return int(np.ravel_multi_index(tuple(digits), self.dims))

    def digits(self, flat: int) -> tuple[int, ...]:
        if not 0 <= flat < self.total_dim:
            raise ValueError(f"flat index {flat} out of range")
        return tuple(int(x) for x in np.unravel_index(flat, self.dims))

    def concat(self, other: "Register") -> "Register":
        clash = set(self.labels) & set(other.labels)
        if clash:
            raise ValueError(f"label collision: {sorted(clash)}")
        return Register(self.subsystems + other.subsystems)

    def without(self, labels: Iterable[str]) -> "Register":
        drop = set(labels)
        for lab in drop:
            self.index(lab)
        return Register(tuple(s for s in self.subsystems if s.label not in drop))

    def subset(self, labels: Iterable[str]) -> "Register":
        keep = set(labels)
        for lab in keep:
            self.index(lab)
        return Register(tuple(s for s in self.subsystems if s.label in keep))


def make_register(spec: Iterable[tuple]) -> Register:
    """Build a register from ``(label, dim[, role])`` tuples.

    The role defaults to ``ancilla_qubit`` for dimension 2 and ``spin``
    otherwise.
    """
    subs = []
    for entry in spec:
        label, dim = entry[0], int(entry[1])
        if len(entry) > 2:
            role = Role(entry[2])
        else:
            role = Role.ANCILLA_QUBIT if dim == 2 else Role.SPIN
        subs.append(Subsystem(str(label), dim, role))
    return Register(tuple(subs))


@dataclass(frozen=True)
class BasisIndex:
    register: Register
    digits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "digits", tuple(int(d) for d in self.digits))
        self.register.flat_index(self.digits)

    @property
    def flat(self) -> int:
        return self.register.flat_index(self.digits)


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=complex)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class PureState:
    register: Register
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes).reshape(-1)
        amps.setflags(write=False)
        if amps.shape != (self.register.total_dim,):
            raise ValueError(
                f"amplitude vector of length {amps.size} does not match "
                f"register dimension {self.register.total_dim}")
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > TOL:
            raise ValueError(f"state not normalized (norm {norm:.12g})")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.register.dims)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    register: Register
    matrix: np.ndarray

    def __post_init__(self):
        mat = _frozen(self.matrix)
        n = self.register.total_dim
        if mat.shape != (n, n):
            raise ValueError(f"density matrix shape {mat.shape} does not match dimension {n}")
        if np.max(np.abs(mat - mat.conj().T)) > TOL:
            raise ValueError("density matrix not Hermitian")
        tr = np.trace(mat)
        if abs(tr - 1.0) > TOL:
            raise ValueError(f"density matrix trace {tr.real:.12g} != 1")
        lo = np.linalg.eigvalsh(mat).min()
        if lo < -TOL:
            raise ValueError(f"density matrix has negative eigenvalue {lo:.3g}")
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def _trusted(cls, register: Register, matrix: np.ndarray) -> "DensityMatrix":
        # output of a map known to preserve validity; skips the eigenvalue check
        out = object.__new__(cls)
        object.__setattr__(out, "register", register)
        object.__setattr__(out, "matrix", _frozen(matrix))
        return out

    @property
    def tensor(self) -> np.ndarray:
        return self.matrix.reshape(self.register.dims * 2)


State = Union[PureState, DensityMatrix]


@dataclass(frozen=True, eq=False)
class OperatorSpec:
    """A matrix acting on an ordered tuple of named subsystems.

    ``unitary`` and ``hermitian`` are measured from the matrix, not asserted
    by the caller.
    """
    targets: tuple[str, ...]
    dims: tuple[int, ...]
    matrix: np.ndarray
    name: str = ""
    unitary: bool = field(init=False)
    hermitian: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if len(self.targets) != len(self.dims):
            raise ValueError("targets and dims differ in length")
        if len(set(self.targets)) != len(self.targets):
            raise ValueError(f"repeated target in {self.targets}")
        mat = _frozen(self.matrix)
        side = int(np.prod(self.dims))
        if mat.shape != (side, side):
            raise ValueError(f"matrix shape {mat.shape} does not match target dims {self.dims}")
        object.__setattr__(self, "matrix", mat)
        eye = np.eye(side)
        object.__setattr__(self, "unitary", bool(np.max(np.abs(mat.conj().T @ mat - eye)) < TOL))
        object.__setattr__(self, "hermitian", bool(np.max(np.abs(mat - mat.conj().T)) < TOL))

    def on(self, *targets: str) -> "OperatorSpec":
        """Same matrix, retargeted to other subsystem labels."""
        return OperatorSpec(targets, self.dims, self.matrix, self.name)

    @property
    def dag(self) -> "OperatorSpec":
        name = f"{self.name}†" if self.name else ""
        return OperatorSpec(self.targets, self.dims, self.matrix.conj().T, name)

    def __matmul__(self, other: "OperatorSpec") -> "OperatorSpec":
        if self.targets != other.targets:
            raise ValueError("operator product needs identical target tuples")
        return OperatorSpec(self.targets, self.dims, self.matrix @ other.matrix)

    def __pow__(self, n: int) -> "OperatorSpec":
        if n < 0:
            return self.dag ** (-n)
        return OperatorSpec(self.targets, self.dims, np.linalg.matrix_power(self.matrix, n))

    def __mul__(self, c) -> "OperatorSpec":
        return OperatorSpec(self.targets, self.dims, c * self.matrix, self.name)

    __rmul__ = __mul__


def kron(*ops: OperatorSpec) -> OperatorSpec:
    """Tensor product of operators on disjoint targets."""
    targets, dims = [], []
    mat = np.ones((1, 1), dtype=complex)
    for op in ops:
        targets.extend(op.targets)
        dims.extend(op.dims)
        mat = np.kron(mat, op.matrix)
    name = "".join(op.name for op in ops)
    return OperatorSpec(tuple(targets), tuple(dims), mat, name)


def identity(register: Register, labels: Sequence[str] | None = None) -> OperatorSpec:
    labels = register.labels if labels is None else tuple(labels)
    dims = tuple(register.dim_of(lab) for lab in labels)
    return OperatorSpec(labels, dims, np.eye(int(np.prod(dims))), "I")


def _check_targets(register: Register, op: OperatorSpec) -> list[int]:
    axes = []
    for lab, dim in zip(op.targets, op.dims):
        ax = register.index(lab)
        if register.dims[ax] != dim:
            raise ValueError(
                f"operator expects dim {dim} on {lab!r}, register has {register.dims[ax]}")
        axes.append(ax)
    return axes


def _contract(tensor: np.ndarray, matrix: np.ndarray, axes: Sequence[int],
              dims: Sequence[int]) -> np.ndarray:
    k = len(axes)
    m = matrix.reshape(tuple(dims) * 2)
    out = np.tensordot(m, tensor, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def apply_operator(state: State, op: OperatorSpec) -> State:
    """Apply a unitary to a pure state (U|psi>) or a density matrix (U rho U†)."""
    if not op.unitary:
        raise ValueError(f"operator {op.name or op.targets} is not unitary")
    reg = state.register
    if isinstance(state, PureState):
        return PureState(reg, act(state, op))
    axes = _check_targets(reg, op)
    nsub = len(reg)
    t = _contract(state.tensor, op.matrix, axes, op.dims)
    t = _contract(t, op.matrix.conj(), [a + nsub for a in axes], op.dims)
    n = reg.total_dim
    return DensityMatrix._trusted(reg, t.reshape(n, n))


def apply_sequence(state: State, ops: Iterable[OperatorSpec]) -> State:
    for op in ops:
        state = apply_operator(state, op)
    return state


def expectation(state: State, op: OperatorSpec | Sequence[OperatorSpec]):
    """<psi|O|psi> or Tr(rho O); real-valued for Hermitian operators.

    ``op`` may be a list of factors whose product is the observable.
    """
    if isinstance(state, PureState):
        val = complex(np.vdot(state.amplitudes, act(state, op)))
    else:
        val = complex(np.trace(act(state, op)))
    if isinstance(op, OperatorSpec) and op.hermitian:
        assert abs(val.imag) < TOL, f"Hermitian expectation has imaginary part {val.imag}"
        return val.real
    return val


def weight(state: State, op: OperatorSpec) -> float:
    """Squared norm ||O psi||^2, or Tr(O rho O†)."""
    if isinstance(state, PureState):
        v = act(state, op)
        return float(np.vdot(v, v).real)
    reg = state.register
    axes = _check_targets(reg, op)
    nsub = len(reg)
    t = _contract(state.tensor, op.matrix, axes, op.dims)
    t = _contract(t, op.matrix.conj(), [a + nsub for a in axes], op.dims)
    n = reg.total_dim
    return float(np.trace(t.reshape(n, n)).real)


def act_array(register: Register, arr: np.ndarray,
              ops: OperatorSpec | Sequence[OperatorSpec]) -> np.ndarray:
    """Raw product action on a flat vector or a square matrix over ``register``.

    A list is applied right to left, like the written product. Matrices are
    acted on from the left only (O rho, not O rho O†).
    """
    ops = [ops] if isinstance(ops, OperatorSpec) else list(ops)
    n = register.total_dim
    pure = arr.ndim == 1
    out = arr.reshape(register.dims if pure else register.dims + (n,))
    for op in reversed(ops):
        out = _contract(out, op.matrix, _check_targets(register, op), op.dims)
    return out.reshape(arr.shape)


def act(state: State, ops: OperatorSpec | Sequence[OperatorSpec]) -> np.ndarray:
    """O|psi> or O rho without renormalization or a unitarity check."""
    arr = state.amplitudes if isinstance(state, PureState) else state.matrix
    return act_array(state.register, arr, ops)


def eigen_residual(state: PureState, ops: OperatorSpec | Sequence[OperatorSpec],
                   eigenvalue: complex = 1.0) -> float:
    """max |O psi - lambda psi|; zero when psi is an eigenvector with eigenvalue lambda."""
    return float(np.max(np.abs(act(state, ops) - eigenvalue * state.amplitudes)))


def basis_state(register: Register, digits: BasisIndex | Sequence[int]) -> PureState:
    if isinstance(digits, BasisIndex):
        digits = digits.digits
    amps = np.zeros(register.total_dim, dtype=complex)
    amps[register.flat_index(tuple(digits))] = 1.0
    return PureState(register, amps)


def tensor(a: State, b: State) -> State:
    """Product state on the concatenated register; mixed if either factor is."""
    reg = a.register.concat(b.register)
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(reg, np.kron(a.amplitudes, b.amplitudes))
    return DensityMatrix._trusted(reg, np.kron(to_density(a).matrix, to_density(b).matrix))


def to_density(state: State) -> DensityMatrix:
    if isinstance(state, DensityMatrix):
        return state
    v = state.amplitudes
    return DensityMatrix._trusted(state.register, np.outer(v, v.conj()))


def inner(a: PureState, b: PureState) -> complex:
    if a.register != b.register:
        raise ValueError("states live on different registers")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: State, b: State) -> float:
    """Overlap fidelity; at least one argument must be pure."""
    if a.register != b.register:
        raise ValueError("states live on different registers")
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        raise TypeError("fidelity between two mixed states is not supported")
    if isinstance(a, DensityMatrix):
        a, b = b, a
    if isinstance(b, PureState):
        return abs(inner(a, b)) ** 2
    v = a.amplitudes
    return float(np.vdot(v, b.matrix @ v).real)


def partial_trace(rho: State, keep: Iterable[str]) -> DensityMatrix:
    """Reduced density matrix on ``keep`` (kept in register order)."""
    keep = list(keep)
    if not keep:
        raise ValueError("keep set is empty")
    reg = rho.register
    for lab in keep:
        reg.index(lab)
    kept = reg.subset(keep)
    nsub = len(reg)
    if nsub > 26:
        raise ValueError("too many subsystems for partial trace")
    letters = string.ascii_letters
    row = list(letters[:nsub])
    col = list(letters[26:26 + nsub])
    for i, lab in enumerate(reg.labels):
        if lab not in keep:
            col[i] = row[i]
    out = [row[i] for i, lab in enumerate(reg.labels) if lab in keep]
    out += [col[i] for i, lab in enumerate(reg.labels) if lab in keep]
    spec = "".join(row) + "".join(col) + "->" + "".join(out)
    t = np.einsum(spec, to_density(rho).tensor)
    n = kept.total_dim
    return DensityMatrix(kept, t.reshape(n, n))


def marginal(state: State, labels: Sequence[str]) -> np.ndarray:
    """Born probabilities of a joint standard-basis readout on ``labels``.

    Returns an array shaped by the target dimensions, in the order given.
    """
    reg = state.register
    axes = [reg.index(lab) for lab in labels]
    if isinstance(state, PureState):
        p = np.abs(state.tensor) ** 2
    else:
        p = np.real(np.diagonal(state.matrix)).reshape(reg.dims)
    rest = tuple(i for i in range(len(reg)) if i not in axes)
    p = p.sum(axis=rest)
    # sum leaves remaining axes in register order; reorder to requested
    order = sorted(range(len(axes)), key=lambda i: axes[i])
    p = np.transpose(p, np.argsort(order))
    return np.clip(p, 0.0, None)


def collapse(state: State, outcome: Mapping[str, int]) -> tuple[float, State]:
    """Project onto a standard-basis outcome on some subsystems.

    Returns ``(probability, post_state)`` with the post state renormalized on
    the full register. Raises if the outcome has zero probability.
    """
    reg = state.register
    idx: list = [slice(None)] * len(reg)
    for lab, val in outcome.items():
        ax = reg.index(lab)
        if not 0 <= val < reg.dims[ax]:
            raise ValueError(f"outcome {val} out of range for {lab!r}")
        idx[ax] = val
    mask = np.zeros(reg.dims, dtype=bool)
    mask[tuple(idx)] = True
    mask = mask.reshape(-1)
    if isinstance(state, PureState):
        amps = np.where(mask, state.amplitudes, 0)
        p = float(np.vdot(amps, amps).real)
        if p <= 0:
            raise ValueError(f"outcome {dict(outcome)} has zero probability")
        return p, PureState(reg, amps / np.sqrt(p))
    m = state.matrix * np.outer(mask, mask)
    p = float(np.trace(m).real)
    if p <= 0:
        raise ValueError(f"outcome {dict(outcome)} has zero probability")
    return p, DensityMatrix._trusted(reg, m / p)


def discard(state: State, labels: Iterable[str]) -> State:
    """Drop subsystems that sit in a definite basis state.

    Pure states stay pure: the kept factor is read off the slice where the
    dropped subsystems carry their weight. Raises if the dropped part is not
    a single basis state.
    """
    labels = list(labels)
    reg = state.register
    probs = marginal(state, labels)
    hit = np.argwhere(probs > 1 - 1e-8)
    if len(hit) != 1:
        raise ValueError(f"subsystems {labels} are not in a definite basis state")
    digits = dict(zip(labels, (int(x) for x in hit[0])))
    new_reg = reg.without(labels)
    idx = tuple(digits.get(lab, slice(None)) for lab in reg.labels)
    if isinstance(state, PureState):
        amps = state.tensor[idx].reshape(-1)
        return PureState(new_reg, amps / np.linalg.norm(amps))
    n = new_reg.total_dim
    block = state.tensor[idx + idx].reshape(n, n)
    return DensityMatrix._trusted(new_reg, block / np.trace(block).real)


def to_matrix(op: OperatorSpec, register: Register) -> np.ndarray:
    """Full register matrix of ``op`` (identity on non-targets)."""
    axes = _check_targets(register, op)
    n = register.total_dim
    eye = np.eye(n, dtype=complex).reshape(register.dims + (n,))
    out = _contract(eye, op.matrix, axes, op.dims)
    return out.reshape(n, n)
