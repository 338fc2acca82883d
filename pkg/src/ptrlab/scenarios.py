"""Named experiments, their JSON config, and verification reports."""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np

from . import circuits as C
from . import premeasurement as P
from .operators import eigen_exponents, pauli_z, random_unitary
from .register import (TOL, PureState, apply_operator, eigen_residual, expectation, fidelity,
                       marginal, partial_trace, weight)

SCHEMA_VERSION = 1
REPORT_SCHEMA = "ptrlab.report/1"
D_RANGE = (2, P.D_MAX)

# Every report entry cites one of these.
ANCHORS = frozenset(
    [f"Eq. {i}" for i in range(1, 23)]
    + [f"Eq. A{i}" for i in range(1, 5)]
    + ["Table I", "Table II", "Fig. 2", "Fig. 3a", "Fig. 3b", "§3", "§4.1", "§4.2", "§5"]
)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    d: int = 3
    seed: int = 0
    shots: int = 10000
    gamma_spec: Any = "ones"
    counter_dim: str = "d"
    output_path: str | None = None
    schema_version: int = SCHEMA_VERSION

    def gamma(self) -> P.CoherenceGram:
        if self.gamma_spec == "ones":
            return P.CoherenceGram.ones(self.d)
        if self.gamma_spec == "identity":
            return P.CoherenceGram.identity(self.d)
        return P.CoherenceGram(np.array(self.gamma_spec, dtype=complex))

    def counter(self) -> int:
        return self.d + 1 if self.counter_dim == "d_plus_1" else self.d

    def to_json(self) -> dict:
        out = asdict(self)
        out.pop("output_path")
        return out


@dataclass
class Entry:
    name: str
    anchor: str
    expected: Any
    observed: Any
    tolerance: float | None
    passed: bool
    skipped: bool = False

    def __post_init__(self):
        if self.anchor not in ANCHORS:
            raise ValueError(f"unregistered anchor {self.anchor!r}")


@dataclass
class Report:
    config: ScenarioConfig
    entries: list[Entry] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    @property
    def seed(self) -> int:
        return self.config.seed


# config parsing


def _gamma_errors(spec, d: int) -> list[str]:
    if spec in ("ones", "identity"):
        return []
    if isinstance(spec, str):
        return [f"gamma_spec: unknown value {spec!r} (expected 'ones', 'identity' or a matrix)"]
    try:
        g = np.array(spec, dtype=complex)
    except (TypeError, ValueError):
        return ["gamma_spec: not a numeric matrix"]
    if g.shape != (d, d):
        return [f"gamma_spec: expected a {d}x{d} matrix, got shape {g.shape}"]
    try:
        P.CoherenceGram(g)
    except ValueError as exc:
        return [f"gamma_spec: invalid Gram matrix: {exc}"]
    return []


def _int_field(doc, key, lo, hi, errors) -> int | None:
    if key not in doc:
        return None
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, int):
        errors.append(f"{key}: expected an integer, got {val!r}")
        return None
    if not lo <= val <= (hi if hi is not None else val):
        span = f"[{lo}, {hi}]" if hi is not None else f">= {lo}"
        errors.append(f"{key}: {key} out of range {span}")
        return None
    return val


def parse_config(text: str | bytes) -> ScenarioConfig:
    """Validate a JSON scenario document and fill defaults."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return config_from_dict(doc)


def config_from_dict(doc: dict) -> ScenarioConfig:
    errors: list[str] = []
    known = set(ScenarioConfig.__dataclass_fields__)
    for key in sorted(set(doc) - known):
        errors.append(f"{key}: unknown field")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        errors.append(f"schema_version: unsupported version {version!r}")
    d = _int_field(doc, "d", *D_RANGE, errors)
    seed = _int_field(doc, "seed", 0, None, errors)
    shots = _int_field(doc, "shots", 0, None, errors)
    scenario = doc.get("scenario")
    if scenario is None:
        errors.append("scenario: required field missing")
    elif scenario not in SCENARIOS:
        errors.append(f"scenario: unknown scenario {scenario!r}")
    counter_dim = doc.get("counter_dim", "d")
    if counter_dim not in ("d", "d_plus_1"):
        errors.append(f"counter_dim: expected 'd' or 'd_plus_1', got {counter_dim!r}")
    out = doc.get("output_path")
    if out is not None and not isinstance(out, str):
        errors.append("output_path: expected a string")
    gamma_spec = doc.get("gamma_spec", "ones")
    if d is not None or "d" not in doc:
        errors += _gamma_errors(gamma_spec, d if d is not None else 3)
    if errors:
        raise ConfigError("; ".join(errors))
    kwargs = {k: v for k, v in dict(d=d, seed=seed, shots=shots).items() if v is not None}
    return ScenarioConfig(scenario=scenario, gamma_spec=gamma_spec, counter_dim=counter_dim,
                          output_path=out, **kwargs)


# check helpers


class _Checks:
    def __init__(self, shots: int):
        self.entries: list[Entry] = []
        self.shots = shots

    def close(self, name, anchor, expected, observed, tol=TOL):
        expected, observed = float(expected), float(observed)
        self.entries.append(Entry(name, anchor, expected, observed, tol,
                                  abs(observed - expected) <= tol))

    def below(self, name, anchor, observed, bound):
        observed = float(observed)
        self.entries.append(Entry(name, anchor, f"< {bound:g}", observed, bound, observed < bound))

    def equal(self, name, anchor, expected, observed):
        self.entries.append(Entry(name, anchor, expected, observed, None, expected == observed))

    def distribution(self, name, anchor, expected, observed, tol=TOL):
        expected = [float(x) for x in expected]
        observed = [float(x) for x in observed]
        ok = len(expected) == len(observed) and max(
            abs(a - b) for a, b in zip(expected, observed)) <= tol
        self.entries.append(Entry(name, anchor, expected, observed, tol, ok))

    def histogram(self, name, anchor, probs, sampler: Callable[[int], np.ndarray]):
        """Raw counts within 3 sigma (binomial) of shots * p in every bin."""
        probs = [float(p) for p in probs]
        if self.shots == 0:
            self.entries.append(Entry(name, anchor, probs, None, 3.0, True, skipped=True))
            return
        counts = [int(c) for c in sampler(self.shots)]
        self.entries.append(Entry(name, anchor, probs, counts, 3.0,
                                  within_3_sigma(counts, probs, self.shots)))

    def failure(self, name, anchor, exc: Exception):
        self.entries.append(Entry(name, anchor, "no error", f"{type(exc).__name__}: {exc}",
                                  None, False))


def within_3_sigma(counts, probs, shots: int) -> bool:
    for c, p in zip(counts, probs):
        p = min(max(p, 0.0), 1.0)
        mean = shots * p
        sigma = math.sqrt(shots * p * (1 - p))
        if sigma < 1e-9:
            if abs(c - mean) > 1e-6 * max(shots, 1):
                return False
        elif abs(c - mean) > 3 * sigma:
            return False
    return True


def _exp0_weight(state, factors, d):
    return P.exponent_weight(state, factors, d, 0)


def _seed(config: ScenarioConfig, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(config.seed, spawn_key=key)


# scenarios


def _table2_suite(cfg: ScenarioConfig, ck: _Checks):
    d = cfg.d
    psi = P.bell_state(d)
    reg = psi.register
    ck.close("singleness <N> = 1", "Eq. 7", 1.0, expectation(psi, P.singleness_observable(reg)))
    ck.close("projection Z_s†Z_p exponent 0 weight", "Eq. 12", 1.0,
             _exp0_weight(psi, P.projection_factors(reg), d))
    ck.close("superposition X_sX_p exponent 0 weight", "Eq. 13", 1.0,
             _exp0_weight(psi, P.superposition_factors(reg), d))


def _pipeline(cfg: ScenarioConfig, ck: _Checks):
    d = cfg.d
    stages = P.run_pipeline(d, cfg.gamma())
    t1, t3, t4 = stages[0].state, stages[2].state, stages[3].state
    reg = t1.register
    amp_err = max(abs(t1.amplitudes[reg.flat_index((k,) + (0,) * d)] - 1 / math.sqrt(d))
                  for k in range(d))
    ck.close("t1 amplitudes 1/sqrt(d) on vacuum ancilla", "Eq. 1", 0.0, amp_err)
    ck.close("t1 <N> = 0", "Eq. 1", 0.0, expectation(t1, P.singleness_observable(reg)))
    ck.close("t3 equals direct Bell construction", "Eq. 6", 0.0,
             np.max(np.abs(t3.amplitudes - P.bell_state(d).amplitudes)), 1e-12)
    emb = P.pointer_embedding(d)
    ck.below("t3 weight outside N = 1", "Table I", C.excluded_weight(t3), 1e-20)
    compressed = emb.compress(t3)
    ck.close("compressed t3 equals spin-pointer Bell form", "Eq. 5", 0.0,
             np.max(np.abs(compressed.amplitudes - P.compressed_bell_state(d).amplitudes)))
    if isinstance(t4, PureState):
        ck.close("t4 coherent recombination is pure spin-ancilla entanglement", "Eq. 4", 1.0,
                 fidelity(t4, P.bell_state(d)))
    else:
        ck.close("t4 Tr(rho N) = 1", "Eq. 19", 1.0, expectation(t4, P.singleness_observable(reg)))
        ck.close("t4 Z_s†Z_p exponent 0 weight", "Eq. 19", 1.0,
                 _exp0_weight(t4, P.projection_factors(reg), d))
    spin = partial_trace(t3, ["s"])
    ck.close("t3 reduced spin state maximally mixed", "Eq. 6", 0.0,
             np.max(np.abs(spin.matrix - np.eye(d) / d)))


def _nondestructive_suite(cfg: ScenarioConfig, ck: _Checks):
    d = cfg.d
    psi = P.bell_state(d)
    anchors = {"N": "Fig. 2", "ZZ": "Fig. 3a", "XX": "Fig. 3b"}
    expected_outcome = {"N": 1, "ZZ": 0, "XX": 0}
    for i, kind in enumerate(("N", "ZZ", "XX")):
        dim = cfg.counter() if kind == "N" else d
        state = C.attach_counter(psi, dim)
        probs = C.counter_distribution(state, kind)
        want = np.zeros(dim)
        want[expected_outcome[kind]] = 1
        ck.distribution(f"{kind} counter readout distribution", anchors[kind], want, probs)
        rec = C.CIRCUITS[kind](state, _seed(cfg, 0, i))
        post = C.reset_counter(rec.post_state)
        ck.close(f"{kind} post-state fidelity", "§3", 1.0, fidelity(post, state))
        ck.histogram(f"{kind} sampled counter counts", anchors[kind], want,
                     lambda n, s=state, k=kind, j=i: C.sample_counts(s, k, n, _seed(cfg, 1, j)))
    start = C.attach_counter(psi, d)
    for j, order in enumerate(C.all_orders()):
        recs = C.sequential_suite(start, order, _seed(cfg, 2, j))
        got = {r.observable: r.outcome for r in recs}
        final = C.reset_counter(recs[-1].post_state)
        ck.equal(f"order {'-'.join(order)} outcomes (N, ZZ, XX)", "§3", [1, 0, 0],
                 [got["N"], got["ZZ"], got["XX"]])
        ck.close(f"order {'-'.join(order)} final-state fidelity", "§3", 1.0, fidelity(final, start))


def _w_state(cfg: ScenarioConfig, ck: _Checks):
    d = cfg.d
    psi = P.bell_state(d)
    conds = C.spin_x_conditionals(psi)
    for k, (p, ptr) in enumerate(conds):
        ck.close(f"spin X outcome {k} probability", "Eq. 15", 1 / d, p)
        overlap = abs(np.vdot(P.w_state(d, k).amplitudes, ptr.amplitudes))
        ck.close(f"conditional pointer for k={k} is the W state", "Eq. 15", 1.0, overlap)

    def sample(n):
        rotated = apply_operator(psi, C.fourier(d, "s"))
        rng, _ = C.rng_for(_seed(cfg, 3))
        return np.bincount(rng.choice(d, size=n, p=marginal(rotated, ["s"])), minlength=d)

    ck.histogram("sampled spin X outcomes", "Eq. 15", [1 / d] * d, sample)


def _basis_sweep(cfg: ScenarioConfig, ck: _Checks, n_unitaries: int = 20):
    d = cfg.d
    psi = P.bell_state(d)
    reg = psi.register
    inv, eig, spec = 0.0, 0.0, 0.0
    z_spec = list(range(d))
    for i in range(n_unitaries):
        U = random_unitary(d, _seed(cfg, 4, i), "p")
        choice = C.basis_choice(U)
        inv = max(inv, np.max(np.abs(choice.transform(psi).amplitudes - psi.amplitudes)))
        eig = max(eig, eigen_residual(psi, choice.correlation_factors(reg)))
        spec = max(spec, 0.0 if eigen_exponents(choice.pointer_observable()) == z_spec else 1.0)
    ck.close(f"V_s U_p |Psi> = |Psi> over {n_unitaries} Haar unitaries", "Eq. 16", 0.0, inv)
    ck.close("O_p spectrum equals Z spectrum", "Eq. 17", 0.0, spec)
    ck.close("|Psi> is exponent-0 eigenstate of Õ_s†O_p", "Eq. 18", 0.0, eig)


def _coherence_sweep(cfg: ScenarioConfig, ck: _Checks):
    d = cfg.d
    gamma = cfg.gamma()
    psi = P.bell_state(d)
    if d > 5:
        # dense spin-ancilla density matrices get large; work on the pointer subspace
        psi = P.pointer_embedding(d).compress(psi)
    rho = P.recombine(psi, gamma)
    reg = rho.register
    ck.close("Tr(rho N) = 1", "§4.1", 1.0, expectation(rho, P.singleness_observable(reg)))
    ck.close("Z_s†Z_p exponent 0 weight", "§4.1", 1.0, _exp0_weight(rho, P.projection_factors(reg), d))
    xx_moment = expectation(rho, P.superposition_factors(reg))
    k = np.arange(d)
    ck.close("Re Tr(rho X_sX_p)", "Eq. 19", gamma.gamma[(k - 1) % d, k].sum().real / d,
             np.real(xx_moment))
    state = C.attach_counter(rho, d)
    want = P.xx_exponent_distribution(gamma)
    ck.distribution("XX circuit exponent distribution", "§4.1", want, C.counter_distribution(state, "XX"))
    zz_want = np.eye(d)[0]
    ck.distribution("ZZ circuit exponent distribution", "§4.1", zz_want, C.counter_distribution(state, "ZZ"))
    ck.histogram("sampled XX exponents", "§4.1", want,
                 lambda n: C.sample_counts(state, "XX", n, _seed(cfg, 5, 0)))
    ck.histogram("sampled ZZ exponents", "§4.1", zz_want,
                 lambda n: C.sample_counts(state, "ZZ", n, _seed(cfg, 5, 1)))


def _which_path(cfg: ScenarioConfig, ck: _Checks):
    d = cfg.d
    gamma = cfg.gamma()
    wp = P.which_path_model(d, gamma)
    reg, state = wp.register, wp.state
    ck.close("<N> = sum_k <P_k> = 1", "Eq. 21", 1.0, expectation(state, wp.number_operator()))
    zz = P.projection_observable(reg)
    ck.close("Z_s†Z_p exponent 0 weight", "Eq. 22", 1.0, _exp0_weight(state, [zz], d))
    xx = P.superposition_observable(reg)
    ck.close("X_sX_p exponent 0 weight", "§5", float(P.xx_exponent_distribution(gamma)[0]),
             _exp0_weight(state, [xx], d))
    ck.equal("joint exponent-0 eigenspace dimension", "§5", 1, P.joint_fixed_space_dimension([zz, xx]))
    counted = C.attach_counter(state, d)
    ck.distribution("ZZ circuit on path register", "Eq. 22", np.eye(d)[0],
                    C.counter_distribution(counted, "ZZ"))


def _appendix_check(cfg: ScenarioConfig, ck: _Checks):
    for i, chk in enumerate(C.verify_appendix(cfg.d), start=1):
        ck.close(chk.name, f"Eq. A{i}", 0.0, chk.residual)


def _uniqueness(cfg: ScenarioConfig, ck: _Checks):
    d = cfg.d
    reg = P.spin_pointer_register(d)
    ops = [P.projection_observable(reg), P.superposition_observable(reg)]
    ck.equal("joint exponent-0 eigenspace dimension", "§3", 1, P.joint_fixed_space_dimension(ops))
    ck.close("Bell state equals X-basis form", "Eq. 14", 0.0,
             np.max(np.abs(P.compressed_bell_state(d).amplitudes - P.x_basis_form(d).amplitudes)))


SCENARIOS: dict[str, tuple[Callable[[ScenarioConfig, _Checks], None], str, str]] = {
    "table2_suite": (_table2_suite, "Table II", "singleness, projection and superposition eigenvalues"),
    "pipeline": (_pipeline, "Eq. 6", "four-stage premeasurement and pointer subspace"),
    "nondestructive_suite": (_nondestructive_suite, "§3", "counter circuits for N, Z†Z, XX in every order"),
    "w_state": (_w_state, "Eq. 15", "spin X readout projects the pointer onto a W state"),
    "basis_sweep": (_basis_sweep, "Eq. 16", "invariance under paired pointer/spin rotations"),
    "coherence_sweep": (_coherence_sweep, "§4.1", "imperfect recombination: collapse vs superposition"),
    "which_path": (_which_path, "§5", "ancilla-free spin-path pointer"),
    "appendix_check": (_appendix_check, "Eq. A4", "Fourier basis from the general prescription"),
    "uniqueness": (_uniqueness, "§3", "Bell state is the unique joint eigenstate"),
}


def run_scenario(config: ScenarioConfig) -> Report:
    fn, anchor, _ = SCENARIOS[config.scenario]
    ck = _Checks(config.shots)
    t0 = time.perf_counter()
    try:
        fn(config, ck)
    except Exception as exc:  # rendered as a failed entry, not a crash
        ck.failure(f"{config.scenario} raised", anchor, exc)
    return Report(config, ck.entries, time.perf_counter() - t0)


# rendering


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def report_dict(report: Report, timing: bool = False) -> dict:
    out = {
        "schema": REPORT_SCHEMA,
        "config": report.config.to_json(),
        "seed": report.seed,
        "passed": report.passed,
        "entries": [{k: _jsonable(v) for k, v in asdict(e).items()} for e in report.entries],
    }
    cfg = out["config"]
    if not isinstance(cfg["gamma_spec"], str):
        cfg["gamma_spec"] = [[_jsonable(complex(v)) if complex(v).imag else float(complex(v).real)
                              for v in row] for row in cfg["gamma_spec"]]
    if timing:
        out["wall_time_s"] = report.wall_time
    return out


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.12g}"
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _table(report: Report, timing: bool) -> str:
    header = ("check", "anchor", "expected", "observed", "tol", "status")
    rows = []
    for e in report.entries:
        status = "SKIP" if e.skipped else ("PASS" if e.passed else "FAIL")
        rows.append((e.name, e.anchor, _fmt(e.expected), _fmt(e.observed), _fmt(e.tolerance), status))
    widths = [max(len(r[i]) for r in rows + [header]) for i in range(len(header))]
    line = lambda r: "  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip()
    cfg = report.config
    lines = [f"scenario {cfg.scenario}  d={cfg.d}  seed={cfg.seed}  shots={cfg.shots}",
             line(header), line(tuple("-" * w for w in widths))]
    lines += [line(r) for r in rows]
    lines.append(f"overall: {'PASS' if report.passed else 'FAIL'}")
    if timing:
        lines.append(f"wall time: {report.wall_time:.3f} s")
    return "\n".join(lines) + "\n"


def emit_report(report: Report, fmt: str = "json", path: str | None = None,
                timing: bool = False) -> bytes:
    """Render a report; writes to ``path`` when given.

    JSON omits wall time unless ``timing`` is set, so output is
    byte-identical for a given config and seed.
    """
    if fmt == "json":
        data = (json.dumps(report_dict(report, timing), indent=2, ensure_ascii=False) + "\n").encode("utf-8")
    elif fmt == "table":
        data = _table(report, timing).encode("utf-8")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    if path is not None:
        with open(path, "wb") as fh:
            fh.write(data)
    return data
