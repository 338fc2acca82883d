"""Premeasurement of a d-state spin by an array of d ancilla qubits.

The spin ``s`` is followed by qubits ``a0 .. a{d-1}``; qubit k sits on path
k and is flipped when the spin travels that path. The single-excitation
states of the array span the pointer, with ``|k>_p = x_k |0...0>``.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .operators import (controlled_power, fourier, number_operator, omega,
                        pauli_x, pauli_z, qubit_pauli)
from .register import (TOL, DensityMatrix, OperatorSpec, PureState, Register, Role,
                       State, act_array, apply_sequence, kron, make_register, marginal)

D_MAX = 10


def _check_d(d: int, d_max: int = D_MAX):
    if int(d) != d or not 2 <= d <= d_max:
        raise ValueError(f"d out of range [2, {d_max}]")


def ancilla_labels(d: int) -> tuple[str, ...]:
    return tuple(f"a{k}" for k in range(d))


def spin_ancilla_register(d: int, d_max: int = D_MAX) -> Register:
    _check_d(d, d_max)
    return make_register([("s", d, Role.SPIN)] + [(a, 2, Role.ANCILLA_QUBIT) for a in ancilla_labels(d)])


def spin_pointer_register(d: int, pointer: str = "p", role: Role = Role.POINTER) -> Register:
    return make_register([("s", d, Role.SPIN), (pointer, d, role)])


class Stage(str, Enum):
    T1_PREPARED = "t1_prepared"
    T2_SEPARATED = "t2_separated"
    T3_ENTANGLED = "t3_entangled"
    T4_RECOMBINED = "t4_recombined"


@dataclass(frozen=True)
class PipelineStage:
    tag: Stage
    state: State


@dataclass(frozen=True, eq=False)
class CoherenceGram:
    """Pairwise overlaps of the path wavepackets at recombination.

    All-ones is a perfectly coherent recombination, the identity a fully
    decohered one.
    """
    gamma: np.ndarray

    def __post_init__(self):
        g = np.array(self.gamma, dtype=complex)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] < 2:
            raise ValueError(f"Gram matrix must be square with side >= 2, got shape {g.shape}")
        if np.max(np.abs(g - g.conj().T)) > TOL:
            raise ValueError("Gram matrix not Hermitian")
        if np.max(np.abs(np.diagonal(g) - 1)) > TOL:
            raise ValueError("Gram matrix diagonal must be all ones")
        if np.linalg.eigvalsh(g).min() < -TOL:
            raise ValueError("Gram matrix not positive semidefinite")
        g.setflags(write=False)
        object.__setattr__(self, "gamma", g)

    @property
    def d(self) -> int:
        return self.gamma.shape[0]

    @property
    def coherent(self) -> bool:
        return bool(np.max(np.abs(self.gamma - 1)) < TOL)

    @classmethod
    def ones(cls, d: int) -> "CoherenceGram":
        return cls(np.ones((d, d)))

    @classmethod
    def identity(cls, d: int) -> "CoherenceGram":
        return cls(np.eye(d))

    @classmethod
    def uniform(cls, d: int, overlap: complex) -> "CoherenceGram":
        g = np.full((d, d), overlap, dtype=complex)
        g[np.tril_indices(d, -1)] = np.conj(overlap)
        np.fill_diagonal(g, 1)
        return cls(g)


def prepare_initial(d: int, d_max: int = D_MAX) -> PureState:
    """Equal superposition of spin states with the ancilla array in vacuum."""
    reg = spin_ancilla_register(d, d_max)
    amps = np.zeros(reg.total_dim, dtype=complex)
    for k in range(d):
        amps[reg.flat_index((k,) + (0,) * d)] = 1 / np.sqrt(d)
    return PureState(reg, amps)


def separate(state: PureState) -> PureState:
    # path separation only labels branches by spin index; no amplitude change
    return state


def entangling_gates(register: Register) -> list[OperatorSpec]:
    """Spin-controlled flips: spin value k flips qubit a_k."""
    d = register.dim_of("s")
    return [controlled_power(register, "s", a, {m: int(m == k) for m in range(d)},
                             base=qubit_pauli("x", register, a))
            for k, a in enumerate(ancilla_labels(d))]


def entangle(state: PureState) -> PureState:
    reg = state.register
    anc = reg.with_role(Role.ANCILLA_QUBIT)
    vac = marginal(state, anc)[(0,) * len(anc)]
    if abs(vac - 1) > TOL:
        raise ValueError(f"ancilla not in vacuum (vacuum weight {vac:.12g})")
    return apply_sequence(state, entangling_gates(reg))


def bell_state(d: int, d_max: int = D_MAX) -> PureState:
    """(1/sqrt d) sum_k |k>_s x_k|0...0>_a built directly."""
    reg = spin_ancilla_register(d, d_max)
    amps = np.zeros(reg.total_dim, dtype=complex)
    for k in range(d):
        amps[reg.flat_index((k,) + tuple(int(j == k) for j in range(d)))] = 1 / np.sqrt(d)
    return PureState(reg, amps)


def compressed_bell_state(d: int, pointer: str = "p", role: Role = Role.POINTER) -> PureState:
    reg = spin_pointer_register(d, pointer, role)
    return PureState(reg, np.eye(d).reshape(-1) / np.sqrt(d))


def dephase(state: State, gamma: CoherenceGram, label: str = "s") -> State:
    """Damp coherences between branches j, k of ``label`` by gamma[j, k].

    A Schur-product channel; stays pure only for an all-ones Gram matrix.
    """
    reg = state.register
    ax = reg.index(label)
    if reg.dims[ax] != gamma.d:
        raise ValueError(f"Gram matrix side {gamma.d} does not match dim of {label!r}")
    if gamma.coherent and isinstance(state, PureState):
        return state
    rho = state.matrix if isinstance(state, DensityMatrix) else np.outer(state.amplitudes, state.amplitudes.conj())
    branch = np.indices(reg.dims)[ax].reshape(-1)
    return DensityMatrix._trusted(reg, rho * gamma.gamma[np.ix_(branch, branch)])


def recombine(state: PureState, gamma: CoherenceGram | None = None) -> State:
    reg = state.register
    if gamma is None:
        gamma = CoherenceGram.ones(reg.dim_of("s"))
    return dephase(state, gamma, "s")


def run_pipeline(d: int, gamma: CoherenceGram | None = None, d_max: int = D_MAX) -> list[PipelineStage]:
    t1 = prepare_initial(d, d_max)
    t2 = separate(t1)
    t3 = entangle(t2)
    t4 = recombine(t3, gamma)
    return [PipelineStage(Stage.T1_PREPARED, t1), PipelineStage(Stage.T2_SEPARATED, t2),
            PipelineStage(Stage.T3_ENTANGLED, t3), PipelineStage(Stage.T4_RECOMBINED, t4)]


@dataclass(frozen=True, eq=False)
class PointerEmbedding:
    """Compression map from the 2^d ancilla space onto the d-dim pointer.

    ``isometry`` is d x 2^d with orthonormal rows; row k is the basis state
    with only qubit k excited.
    """
    d: int
    isometry: np.ndarray
    labels: tuple[str, ...]

    def __post_init__(self):
        w = np.array(self.isometry, dtype=complex)
        w.setflags(write=False)
        object.__setattr__(self, "isometry", w)

    @property
    def projector(self) -> np.ndarray:
        return self.isometry.conj().T @ self.isometry

    def _ancilla_axes(self, register: Register) -> list[int]:
        axes = [register.index(a) for a in self.labels]
        if axes != list(range(axes[0], axes[0] + self.d)):
            raise ValueError("ancilla qubits must be contiguous and in order")
        return axes

    def compress(self, state: State, pointer: str = "p", tol: float = TOL) -> State:
        """Rewrite the ancilla array as a single pointer subsystem."""
        reg = state.register
        axes = self._ancilla_axes(reg)
        lo, hi = axes[0], axes[-1] + 1
        before = int(np.prod(reg.dims[:lo]))
        after = int(np.prod(reg.dims[hi:]))
        new_reg = Register(reg.subsystems[:lo]
                           + make_register([(pointer, self.d, Role.POINTER)]).subsystems
                           + reg.subsystems[hi:])
        w = self.isometry
        if isinstance(state, PureState):
            t = state.amplitudes.reshape(before, 2 ** self.d, after)
            out = np.einsum("pa,bac->bpc", w, t).reshape(-1)
            leak = 1 - np.vdot(out, out).real
            if leak > tol:
                raise ValueError(f"state leaks {leak:.3g} outside the single-excitation subspace")
            return PureState(new_reg, out)
        t = state.matrix.reshape(before, 2 ** self.d, after, before, 2 ** self.d, after)
        out = np.einsum("pa,bacxyz,qy->bpcxqz", w, t, w.conj())
        n = new_reg.total_dim
        out = out.reshape(n, n)
        leak = 1 - np.trace(out).real
        if leak > tol:
            raise ValueError(f"state leaks {leak:.3g} outside the single-excitation subspace")
        return DensityMatrix(new_reg, out)

    def expand(self, state: State, pointer: str = "p") -> State:
        """Inverse of :meth:`compress`."""
        reg = state.register
        ax = reg.index(pointer)
        if reg.dims[ax] != self.d:
            raise ValueError(f"pointer {pointer!r} has dim {reg.dims[ax]}, expected {self.d}")
        before = int(np.prod(reg.dims[:ax]))
        after = int(np.prod(reg.dims[ax + 1:]))
        anc = make_register([(a, 2, Role.ANCILLA_QUBIT) for a in self.labels])
        new_reg = Register(reg.subsystems[:ax] + anc.subsystems + reg.subsystems[ax + 1:])
        v = self.isometry.conj().T
        if isinstance(state, PureState):
            t = state.amplitudes.reshape(before, self.d, after)
            return PureState(new_reg, np.einsum("ap,bpc->bac", v, t).reshape(-1))
        t = state.matrix.reshape(before, self.d, after, before, self.d, after)
        out = np.einsum("ap,bpcxqz,yq->bacxyz", v, t, v.conj())
        n = new_reg.total_dim
        return DensityMatrix(new_reg, out.reshape(n, n))


def pointer_embedding(d: int, labels: Sequence[str] | None = None) -> PointerEmbedding:
    labels = ancilla_labels(d) if labels is None else tuple(labels)
    if len(labels) != d:
        raise ValueError(f"need {d} ancilla labels, got {len(labels)}")
    w = np.zeros((d, 2 ** d))
    for k in range(d):
        w[k, 1 << (d - 1 - k)] = 1.0
    return PointerEmbedding(d, w, labels)


def pointer_observable(embedding: PointerEmbedding, base: OperatorSpec) -> OperatorSpec:
    """Lift a d x d pointer operator onto the ancilla array, zero outside N = 1."""
    if base.dims != (embedding.d,):
        raise ValueError(f"base operator dims {base.dims} do not match pointer dim {embedding.d}")
    w = embedding.isometry
    return OperatorSpec(embedding.labels, (2,) * embedding.d, w.conj().T @ base.matrix @ w,
                        f"{base.name}_p")


def pointer_unitary(embedding: PointerEmbedding, base: OperatorSpec) -> OperatorSpec:
    """Lift a pointer unitary as a gate: acts as identity outside N = 1."""
    lifted = pointer_observable(embedding, base)
    pad = np.eye(2 ** embedding.d) - embedding.projector
    return OperatorSpec(lifted.targets, lifted.dims, lifted.matrix + pad, lifted.name)


def _pointer_side(register: Register, base: OperatorSpec) -> OperatorSpec:
    anc = register.with_role(Role.ANCILLA_QUBIT)
    if anc:
        return pointer_observable(pointer_embedding(len(anc), anc), base)
    for role in (Role.POINTER, Role.PATH):
        labs = register.with_role(role)
        if labs:
            return base.on(labs[0])
    raise ValueError("register has no pointer, path or ancilla subsystems")


def pointer_operator(register: Register, base: OperatorSpec) -> OperatorSpec:
    """``base`` acting on whatever carries the pointer in this register."""
    return _pointer_side(register, base)


def projection_factors(register: Register) -> list[OperatorSpec]:
    d = register.dim_of("s")
    return [pauli_z(d, "s").dag, _pointer_side(register, pauli_z(d))]


def superposition_factors(register: Register) -> list[OperatorSpec]:
    d = register.dim_of("s")
    return [pauli_x(d, "s"), _pointer_side(register, pauli_x(d))]


def projection_observable(register: Register) -> OperatorSpec:
    """Z_s† Z_p on the spin and the pointer (lifted onto ancillas when present)."""
    return kron(*projection_factors(register))


def superposition_observable(register: Register) -> OperatorSpec:
    """X_s X_p on the spin and the pointer (lifted onto ancillas when present)."""
    return kron(*superposition_factors(register))


def singleness_observable(register: Register) -> OperatorSpec:
    """Ancilla excitation number, or the path occupation sum_k P_k."""
    if register.with_role(Role.ANCILLA_QUBIT):
        return number_operator(register)
    return path_number(register)


def spectral_projector(op: OperatorSpec, d: int, exponent: int) -> OperatorSpec:
    """Projector onto the w^exponent eigenspace of an operator with O^d = identity.

    For operators lifted with zero padding, O^d is the projector onto the
    padded subspace and the result lies inside it.
    """
    w = omega(d)
    acc = np.zeros_like(op.matrix)
    power = np.eye(op.matrix.shape[0], dtype=complex)
    for n in range(1, d + 1):
        power = power @ op.matrix
        acc = acc + w ** (-n * exponent) * power
    return OperatorSpec(op.targets, op.dims, acc / d, f"P{exponent}")


def exponent_weight(state: State, factors: Sequence[OperatorSpec], d: int, exponent: int = 0) -> float:
    """Probability of reading ``exponent`` for the product observable of ``factors``.

    Same value as the weight of :func:`spectral_projector`, but applies the
    factors to the state instead of forming their full product matrix.
    """
    w = omega(d)
    reg = state.register
    pure = isinstance(state, PureState)
    cur = state.amplitudes if pure else state.matrix
    acc = np.zeros_like(cur) if pure else 0j
    for n in range(1, d + 1):
        cur = act_array(reg, cur, factors)
        acc = acc + w ** (-n * exponent) * (cur if pure else np.trace(cur))
    if pure:
        return float(np.vdot(acc, acc).real) / d ** 2
    return float(acc.real) / d


def joint_fixed_space_dimension(ops: Sequence[OperatorSpec], tol: float = 1e-8) -> int:
    """Dimension of the common +1 eigenspace of ``ops`` (all on the same targets)."""
    targets = ops[0].targets
    for op in ops:
        if op.targets != targets:
            raise ValueError("operators must share targets")
    n = ops[0].matrix.shape[0]
    stacked = np.vstack([op.matrix - np.eye(n) for op in ops])
    sv = np.linalg.svd(stacked, compute_uv=False)
    return n - int(np.sum(sv > tol))


def x_basis_form(d: int) -> PureState:
    """(1/sqrt d) sum_k |-k>_sX |k>_pX on the spin-pointer register."""
    f_dag = fourier(d).matrix.conj().T
    amps = np.zeros(d * d, dtype=complex)
    for k in range(d):
        amps += np.kron(f_dag[:, (-k) % d], f_dag[:, k])
    return PureState(spin_pointer_register(d), amps / np.sqrt(d))


def w_state(d: int, k: int) -> PureState:
    """Single-excitation superposition (1/sqrt d) sum_l w^(k l) |e_l> on the ancilla array.

    This is the pointer X eigenstate with exponent -k.
    """
    reg = make_register([(a, 2, Role.ANCILLA_QUBIT) for a in ancilla_labels(d)])
    amps = np.zeros(2 ** d, dtype=complex)
    w = omega(d)
    for l in range(d):
        amps[1 << (d - 1 - l)] = w ** (k * l) / np.sqrt(d)
    return PureState(reg, amps)


def xx_exponent_distribution(gamma: CoherenceGram) -> np.ndarray:
    """Exact X_s X_p exponent probabilities of the Bell state decohered by ``gamma``.

    Uses Tr(rho (X_s X_p)^n) = (1/d) sum_k gamma[k-n, k].
    """
    d = gamma.d
    k = np.arange(d)
    moments = np.array([gamma.gamma[(k - n) % d, k].sum() / d for n in range(d)])
    w = omega(d)
    probs = np.array([sum(w ** (-n * e) * moments[n] for n in range(d)) / d for e in range(d)])
    return probs.real


def path_projectors(register: Register, path: str = "path") -> list[OperatorSpec]:
    d = register.dim_of(path)
    out = []
    for k in range(d):
        m = np.zeros((d, d))
        m[k, k] = 1
        out.append(OperatorSpec((path,), (d,), m, f"P{k}"))
    return out


def _carrier(register: Register) -> str:
    labs = register.with_role(Role.PATH) + register.with_role(Role.POINTER)
    if not labs:
        raise ValueError("register has no path or pointer subsystem")
    return labs[0]


def path_number(register: Register, path: str | None = None) -> OperatorSpec:
    path = path or _carrier(register)
    projs = path_projectors(register, path)
    return OperatorSpec((path,), projs[0].dims, sum(p.matrix for p in projs), "N")


def path_pointer_z(register: Register, path: str | None = None) -> OperatorSpec:
    path = path or _carrier(register)
    projs = path_projectors(register, path)
    w = omega(len(projs))
    return OperatorSpec((path,), projs[0].dims, sum(w ** k * p.matrix for k, p in enumerate(projs)), "Z_p")


@dataclass(frozen=True)
class WhichPathState:
    register: Register
    state: State

    @property
    def d(self) -> int:
        return self.register.dim_of("s")

    def projectors(self) -> list[OperatorSpec]:
        return path_projectors(self.register)

    def number_operator(self) -> OperatorSpec:
        return path_number(self.register)

    def pointer_z(self) -> OperatorSpec:
        return path_pointer_z(self.register)


def which_path_model(d: int, gamma: CoherenceGram | None = None, d_max: int = D_MAX) -> WhichPathState:
    """Spin entangled with a discrete path qudit, decohered by ``gamma``."""
    _check_d(d, d_max)
    gamma = CoherenceGram.ones(d) if gamma is None else gamma
    psi = compressed_bell_state(d, "path", Role.PATH)
    return WhichPathState(psi.register, dephase(psi, gamma, "s"))
