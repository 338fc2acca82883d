"""Destructive readouts and counter-based nondestructive measurements.

The three nondestructive circuits share one pattern: couple the spin and
pointer onto a fresh counter qudit ``c`` with controlled shifts, read the
counter in its standard basis, and keep the rest of the register. The
counter index is the exponent of the measured observable.

Counter conventions (index added to the counter per control value):

* N:    +1 from every excited qubit.
* Z†Z:  +l from qubit l (pointer index), then -m from spin value m.
* XX:   Fourier on spin and pointer first, then +l from the pointer and
        +m from the spin; the Fouriers are undone after readout. In the
        rotated frame the coherent state has m = -l, so the sum is 0.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .operators import controlled_power, conjugated_observable, fourier, pauli_x, pauli_z
from .premeasurement import (PointerEmbedding, pointer_embedding, pointer_observable,
                             pointer_unitary, w_state)
from .register import (TOL, DensityMatrix, OperatorSpec, PureState, Register, Role, State,
                       apply_operator, apply_sequence, basis_state, collapse, discard, kron,
                       make_register, marginal, tensor, weight)

Seed = Union[int, np.random.SeedSequence]

LEAK_TOL = 1e-8


class LeakageError(ValueError):
    """Input has weight outside the single-excitation pointer subspace."""


def rng_for(seed: Seed) -> tuple[np.random.Generator, tuple[int, ...]]:
    """Generator plus a printable seed path (root entropy then spawn key)."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed), (int(seed.entropy), *seed.spawn_key)
    seed = int(seed)
    return np.random.default_rng(seed), (seed,)


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    observable: str
    outcome: int
    probability: float
    post_state: State
    seed_path: tuple[int, ...] = ()
    distribution: tuple[float, ...] = ()
    readout: tuple[int, ...] = field(default=())


# counter bookkeeping


def attach_counter(state: State, dim: int | None = None, label: str = "c") -> State:
    """Append a counter qudit in |0>; dimension defaults to the spin/pointer dimension."""
    reg = state.register
    if dim is None:
        dim = reg.dim_of("s") if "s" in reg else len(reg.with_role(Role.ANCILLA_QUBIT))
    counter = basis_state(make_register([(label, dim, Role.COUNTER)]), (0,))
    return tensor(state, counter)


def counter_label(register: Register) -> str:
    labs = register.with_role(Role.COUNTER)
    if len(labs) != 1:
        raise ValueError(f"expected exactly one counter subsystem, found {len(labs)}")
    return labs[0]


def _require_fresh_counter(state: State) -> str:
    c = counter_label(state.register)
    p0 = marginal(state, [c])[0]
    if abs(p0 - 1) > TOL:
        raise ValueError(f"counter not initialized to |0> (weight {p0:.12g})")
    return c


def reset_counter(state: State) -> State:
    """Swap the (definite) counter for a freshly prepared |0>."""
    reg = state.register
    c = counter_label(reg)
    dim = reg.dim_of(c)
    return attach_counter(discard(state, [c]), dim, c)


# circuit construction


def _pointer_controls(register: Register) -> list[tuple[str, dict]]:
    """(control label, digit -> pointer index) pairs that imprint the pointer index."""
    anc = register.with_role(Role.ANCILLA_QUBIT)
    if anc:
        return [(a, {0: 0, 1: l}) for l, a in enumerate(anc)]
    for role in (Role.POINTER, Role.PATH):
        labs = register.with_role(role)
        if labs:
            d = register.dim_of(labs[0])
            return [(labs[0], {m: m for m in range(d)})]
    raise ValueError("register has no pointer carrier")


def _embedding(register: Register) -> PointerEmbedding | None:
    anc = register.with_role(Role.ANCILLA_QUBIT)
    return pointer_embedding(len(anc), anc) if anc else None


def n_circuit(register: Register) -> list[OperatorSpec]:
    c = counter_label(register)
    anc = register.with_role(Role.ANCILLA_QUBIT)
    if anc:
        return [controlled_power(register, a, c, {0: 0, 1: 1}) for a in anc]
    # path occupation: every path state counts once
    (p, digits), = _pointer_controls(register)
    return [controlled_power(register, p, c, {m: 1 for m in digits})]


def _check_counter_dim(register: Register, c: str):
    d = register.dim_of("s")
    if register.dim_of(c) != d:
        raise ValueError(f"exponent readout needs a counter of dim {d}, got {register.dim_of(c)}")


def zz_circuit(register: Register) -> list[OperatorSpec]:
    c = counter_label(register)
    _check_counter_dim(register, c)
    gates = [controlled_power(register, lab, c, m) for lab, m in _pointer_controls(register)]
    gates.append(controlled_power(register, "s", c, lambda m: -m))
    return gates


def xx_rotations(register: Register) -> list[OperatorSpec]:
    d = register.dim_of("s")
    emb = _embedding(register)
    if emb is not None:
        pointer_f = pointer_unitary(emb, fourier(d))
    else:
        pointer_f = fourier(d).on(_pointer_controls(register)[0][0])
    return [fourier(d, "s"), pointer_f]


def xx_circuit(register: Register) -> tuple[list[OperatorSpec], list[OperatorSpec]]:
    """(gates before readout, gates after readout)."""
    c = counter_label(register)
    _check_counter_dim(register, c)
    rot = xx_rotations(register)
    gates = [controlled_power(register, lab, c, m) for lab, m in _pointer_controls(register)]
    gates.append(controlled_power(register, "s", c, lambda m: m))
    return rot + gates, [op.dag for op in rot]


def circuit_ops(register: Register, kind: str) -> tuple[list[OperatorSpec], list[OperatorSpec]]:
    if kind == "N":
        return n_circuit(register), []
    if kind == "ZZ":
        return zz_circuit(register), []
    if kind == "XX":
        return xx_circuit(register)
    raise ValueError(f"unknown circuit {kind!r}")


def excluded_weight(state: State) -> float:
    """Weight outside the single-excitation subspace of the ancilla array."""
    emb = _embedding(state.register)
    if emb is None:
        return 0.0
    outside = np.eye(2 ** emb.d) - emb.projector
    return weight(state, OperatorSpec(emb.labels, (2,) * emb.d, outside))


def _prepare_run(state: State, kind: str):
    c = _require_fresh_counter(state)
    if kind in ("ZZ", "XX"):
        leak = excluded_weight(state)
        if leak > LEAK_TOL:
            raise LeakageError(f"input leaks {leak:.3g} outside the pointer subspace")
    before, after = circuit_ops(state.register, kind)
    return c, apply_sequence(state, before), after


def counter_distribution(state: State, kind: str) -> np.ndarray:
    """Exact counter readout probabilities of one circuit, no sampling."""
    c, coupled, _ = _prepare_run(state, kind)
    return marginal(coupled, [c])


def _run(state: State, kind: str, seed: Seed) -> MeasurementRecord:
    c, coupled, after = _prepare_run(state, kind)
    probs = marginal(coupled, [c])
    rng, path = rng_for(seed)
    outcome = int(rng.choice(len(probs), p=probs / probs.sum()))
    p, post = collapse(coupled, {c: outcome})
    post = apply_sequence(post, after)
    return MeasurementRecord(kind, outcome, p, post, path, tuple(float(x) for x in probs))


def nondestructive_N(state: State, seed: Seed) -> MeasurementRecord:
    """Excitation count read mod the counter dimension."""
    return _run(state, "N", seed)


def nondestructive_ZZ(state: State, seed: Seed) -> MeasurementRecord:
    """Exponent of Z_s† Z_p: (pointer index - spin index) mod d."""
    return _run(state, "ZZ", seed)


def nondestructive_XX(state: State, seed: Seed) -> MeasurementRecord:
    """Exponent of X_s X_p."""
    return _run(state, "XX", seed)


CIRCUITS = {"N": nondestructive_N, "ZZ": nondestructive_ZZ, "XX": nondestructive_XX}


def sample_counts(state: State, kind: str, shots: int, seed: Seed) -> np.ndarray:
    """Counter histogram (raw counts) over ``shots`` fresh copies of ``state``."""
    probs = counter_distribution(state, kind)
    rng, _ = rng_for(seed)
    draws = rng.choice(len(probs), size=shots, p=probs / probs.sum())
    return np.bincount(draws, minlength=len(probs))


def sequential_suite(state: State, order: Sequence[str] = ("N", "ZZ", "XX"),
                     seed: Seed = 0) -> list[MeasurementRecord]:
    """Run the three circuits in ``order``, re-preparing the counter between runs."""
    if sorted(order) != ["N", "XX", "ZZ"]:
        raise ValueError(f"order must be a permutation of N, ZZ, XX, got {order}")
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(int(seed))
    records = []
    for kind, child in zip(order, root.spawn(len(order))):
        rec = CIRCUITS[kind](state, child)
        records.append(rec)
        state = reset_counter(rec.post_state)
    return records


def all_orders() -> list[tuple[str, ...]]:
    return list(itertools.permutations(("N", "ZZ", "XX")))


# destructive readouts


def measure_destructive(state: State, targets: Sequence[str], seed: Seed) -> MeasurementRecord:
    """Joint standard-basis readout of ``targets``; the outcome is the flat index."""
    targets = list(targets)
    if not targets:
        raise ValueError("no targets to measure")
    probs = marginal(state, targets)
    flat = probs.reshape(-1)
    rng, path = rng_for(seed)
    idx = int(rng.choice(flat.size, p=flat / flat.sum()))
    digits = tuple(int(x) for x in np.unravel_index(idx, probs.shape))
    p, post = collapse(state, dict(zip(targets, digits)))
    name = "Z(" + ",".join(targets) + ")"
    return MeasurementRecord(name, idx, p, post, path, tuple(float(x) for x in flat), digits)


def measure_N_local(state: State, seed: Seed) -> MeasurementRecord:
    """Read every z_k and sum the excitations."""
    anc = state.register.with_role(Role.ANCILLA_QUBIT)
    if not anc:
        raise ValueError("no ancilla qubits in register")
    rec = measure_destructive(state, anc, seed)
    counts = np.array([bin(i).count("1") for i in range(2 ** len(anc))])
    dist = np.bincount(counts, weights=np.array(rec.distribution), minlength=len(anc) + 1)
    n = int(sum(rec.readout))
    return MeasurementRecord("N", n, float(dist[n]), rec.post_state, rec.seed_path,
                             tuple(float(x) for x in dist), rec.readout)


def spin_x_conditionals(state: PureState) -> list[tuple[float, PureState | None]]:
    """For each spin X-readout index k: (probability, conditional ancilla state)."""
    reg = state.register
    d = reg.dim_of("s")
    if reg.index("s") != 0:
        raise ValueError("spin must be the leading subsystem")
    rotated = apply_operator(state, fourier(d, "s")).tensor
    anc_reg = reg.without(["s"])
    out = []
    for k in range(d):
        rest = rotated[k].reshape(-1)
        p = float(np.vdot(rest, rest).real)
        out.append((p, PureState(anc_reg, rest / np.sqrt(p)) if p > TOL else None))
    return out


def measure_spin_X_then_project(state: PureState, seed: Seed) -> tuple[int, PureState]:
    """Read the spin in its X basis and return the conditional ancilla state.

    Checks the conditional state against the single-excitation W state with
    matching phases (up to a global phase).
    """
    d = state.register.dim_of("s")
    rotated = apply_operator(state, fourier(d, "s"))
    rec = measure_destructive(rotated, ["s"], seed)
    k = rec.outcome
    rest = rec.post_state.tensor[k].reshape(-1)
    expected = w_state(d, k)
    anc_reg = state.register.without(["s"])
    if anc_reg != expected.register:
        raise ValueError("spin X readout expects a spin plus ancilla array register")
    pointer = PureState(anc_reg, rest / np.linalg.norm(rest))
    overlap = abs(np.vdot(expected.amplitudes, pointer.amplitudes))
    if abs(overlap - 1) > TOL:
        raise ValueError(f"conditional pointer state is not the W state (|overlap| = {overlap:.12g})")
    return k, pointer


# basis choice


@dataclass(frozen=True, eq=False)
class BasisChoice:
    """A pointer basis rotation U_p paired with the spin rotation V_s = conj(U_p)."""
    U_p: OperatorSpec
    V_s: OperatorSpec

    def __post_init__(self):
        if not self.U_p.unitary:
            raise ValueError("U_p is not unitary")
        if np.max(np.abs(self.V_s.matrix - self.U_p.matrix.conj())) > TOL:
            raise ValueError("V_s must be the complex conjugate of U_p")

    @property
    def d(self) -> int:
        return self.U_p.dims[0]

    def pointer_observable(self) -> OperatorSpec:
        return conjugated_observable(self.U_p.on("p"), self.d)

    def spin_observable(self) -> OperatorSpec:
        return conjugated_observable(self.V_s.on("s"), self.d)

    def _lift(self, register: Register, op: OperatorSpec, gate: bool) -> OperatorSpec:
        emb = _embedding(register)
        if emb is not None:
            return (pointer_unitary if gate else pointer_observable)(emb, op)
        return op.on(_pointer_controls(register)[0][0])

    def correlation_factors(self, register: Register) -> list[OperatorSpec]:
        return [self.spin_observable().dag, self._lift(register, self.pointer_observable(), False)]

    def correlation(self, register: Register) -> OperatorSpec:
        """Õ_s† O_p on the spin and the register's pointer."""
        return kron(*self.correlation_factors(register))

    def transform(self, state: State) -> State:
        """Apply V_s to the spin and U_p to the pointer."""
        reg = state.register
        return apply_sequence(state, [self.V_s.on("s"), self._lift(reg, self.U_p, True)])

    def readout_rotations(self, register: Register) -> list[OperatorSpec]:
        """Rotations taking the chosen eigenbases to the standard basis before readout."""
        return [self.V_s.on("s").dag, self._lift(register, self.U_p.dag, True)]


def basis_choice(U_p: OperatorSpec) -> BasisChoice:
    if len(U_p.dims) != 1:
        raise ValueError("U_p must act on a single d-dimensional subsystem")
    if not U_p.unitary:
        raise ValueError("U_p is not unitary")
    V_s = OperatorSpec(U_p.targets, U_p.dims, U_p.matrix.conj(), "V")
    return BasisChoice(U_p, V_s)


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    residual: float
    passed: bool


def verify_appendix(d: int, tol: float = TOL) -> list[IdentityCheck]:
    """Fourier-basis recovery from the general basis-choice prescription."""
    F = fourier(d)
    Z, X = pauli_z(d), pauli_x(d)
    Fd = F.dag
    checks = []

    def add(name, a, b):
        r = float(np.max(np.abs(np.asarray(a) - np.asarray(b))))
        checks.append(IdentityCheck(name, r, r < tol))

    add("shift_from_fourier", (Fd @ Z @ F).matrix, X.matrix)
    choice = basis_choice(Fd)
    add("pair_is_fourier", choice.V_s.matrix, F.matrix)
    add("spin_observable_is_shift_dagger", choice.spin_observable().matrix, X.matrix.conj().T)
    corr = np.kron(choice.spin_observable().matrix.conj().T, choice.pointer_observable().matrix)
    add("correlation_is_xx", corr, np.kron(X.matrix, X.matrix))
    return checks
