"""Virtual distillation (VD) and its reset-based, qubit-efficient variant (REQUEST).

Both estimators are Hadamard tests: the ancilla (qubit 0) is put in |+>, a
controlled cyclic derangement of the copies and a controlled observable are
applied, and the ancilla is measured after a final H. With ``sigma`` the
observable, ``2 prob0 - 1 = Tr[X rho^M]``; with ``sigma`` the identity,
``2 prob0' - 1 = Tr[rho^M]``.

Register layout for REQUEST (2N+1 qubits): ancilla 0, register A = 1..N,
register B = N+1..2N. VD uses M registers after the ancilla.

``scope="full"`` makes every step noisy, with the controlled blocks compiled to
native gates. ``scope="prep_only"`` keeps noise only inside the copy
preparations: controlled blocks, resets and readout are ideal and registers
not being prepared do not idle.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .circuits import (
    CSWAP,
    CTRL_PAULI,
    Circuit,
    Gate,
    Layer,
    Reset,
    to_native,
)
from .linalg import (
    PauliProduct,
    matrix_power,
    partial_trace,
    pauli_expectation,
    spectral_decompose,
    statevector_expectation,
    zero_state,
)
from .noise import GLOBAL, NoiseModel
from .simulate import (
    apply_layer,
    apply_single_qubit_channels,
    apply_superop,
    layers_superop,
    prob_zero,
    sample_binomial_estimate,
    simulate_density,
    simulate_statevector,
)

VD, REQUEST, ORACLE = "vd", "request", "oracle"
METHODS = (VD, REQUEST, ORACLE)
FULL, PREP_ONLY = "full", "prep_only"
SCOPES = (FULL, PREP_ONLY)
OBSERVABLE, IDENTITY = "observable", "identity"

SINGULAR_TOL = 1e-12
TRACE_FLOOR = 1e-300


class SingularDenominatorError(ZeroDivisionError):
    pass


class DegenerateSpectrumError(ValueError):
    pass


@dataclass(frozen=True)
class MitigationPlan:
    """What to mitigate and how. ``measured`` picks the copy carrying the
    controlled observable: the last prepared one (default) or the first."""

    prep: Circuit
    observable: PauliProduct
    copies: int
    method: str = REQUEST
    noise: NoiseModel = field(default_factory=NoiseModel)
    scope: str = FULL
    measured: str = "last"

    def __post_init__(self):
        if self.copies < 1:
            raise ValueError("copy count must be at least 1")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.scope not in SCOPES:
            raise ValueError(f"scope must be one of {SCOPES}")
        if self.observable.num_qubits != self.prep.width:
            raise ValueError("observable width does not match the preparation circuit")
        if self.measured not in ("last", "first"):
            raise ValueError("measured copy must be 'last' or 'first'")

    @property
    def n(self) -> int:
        return self.prep.width

    @property
    def ideal_controls(self) -> bool:
        return self.scope == PREP_ONLY or self.noise.is_noiseless

    @property
    def readout_error(self) -> float:
        return 0.0 if self.ideal_controls else self.noise.readout_error


@dataclass
class MitigationResult:
    copies: int
    method: str
    mitigated: float
    exact: float
    psi1_value: float
    oracle: float
    prob0: float | None = None
    prob0_id: float | None = None
    degenerate: bool = False
    shots: int | None = None

    @property
    def abs_err_exact(self) -> float:
        return abs(self.mitigated - self.exact)

    @property
    def abs_err_psi1(self) -> float:
        return abs(self.mitigated - self.psi1_value)


# ----------------------------------------------------------------- oracle

def trace_ratio_oracle(rho: np.ndarray, x: PauliProduct, m: int) -> float:
    """``Tr[X rho^M] / Tr[rho^M]`` evaluated directly."""
    rho_m = matrix_power(rho, m)
    den = float(np.real(np.trace(rho_m)))
    if abs(den) < TRACE_FLOOR:
        raise SingularDenominatorError(f"Tr[rho^{m}] = {den:.3e} is numerically zero")
    return float(np.real(np.trace(x.matrix() @ rho_m))) / den


def estimate_mitigated(prob0: float, prob0_id: float) -> float:
    for p in (prob0, prob0_id):
        if not -1e-12 <= p <= 1 + 1e-12:
            raise ValueError(f"probability {p} outside [0, 1]")
    den = 2 * prob0_id - 1
    if abs(den) < SINGULAR_TOL:
        raise SingularDenominatorError("prob0' = 1/2 leaves the estimator undefined")
    return (2 * prob0 - 1) / den


def noise_floor(rho: np.ndarray, x: PauliProduct, ideal: np.ndarray) -> float:
    """Distance between the dominant eigenvector's expectation and the ideal one."""
    spec = spectral_decompose(rho)
    if spec.degenerate_top:
        raise DegenerateSpectrumError("largest eigenvalue is degenerate; dominant eigenvector undefined")
    return abs(statevector_expectation(x, spec.leading) - statevector_expectation(x, ideal))


# --------------------------------------------------------------- builders

def _replicate(prep: Circuit, offsets: Sequence[int], quiet: frozenset[int] = frozenset()) -> list[Layer]:
    """Prep layers run in parallel on registers starting at ``offsets``."""
    shifted = [prep.shifted(off, off + prep.width).layers for off in offsets]
    out = []
    for t, layer in enumerate(prep.layers):
        ops = [op for sh in shifted for op in sh[t].ops]
        q = set(quiet) | {off + x for off in offsets for x in layer.quiet}
        out.append(Layer(tuple(ops), layer.noiseless, frozenset(q)))
    return out


def _controlled_block(gates: Iterable[Gate], ideal: bool, native: bool) -> list[Layer]:
    layers = [Layer((g,), noiseless=ideal) for g in gates]
    if native:
        layers = list(to_native(Circuit(1 + max(q for l in layers for q in l.active), layers)).layers)
    return layers


def _sigma_gates(x: PauliProduct, offset: int) -> list[Gate]:
    return [CTRL_PAULI(0, offset + q, x.letters[q]) for q in x.support]


@dataclass(frozen=True)
class Segment:
    kind: str  # "h", "prep1", "cswap", "reset", "prep", "ctrl", "h_final"
    layers: tuple[Layer, ...]
    copy: int = 0
    index: int = 0


def _h_layer(ideal: bool) -> Layer:
    return Layer((Gate("H", (0,)),), noiseless=ideal)


def _resolve_native(plan: MitigationPlan, native: bool | None) -> bool:
    return (not plan.ideal_controls) if native is None else native


def request_segments(plan: MitigationPlan, sigma: str = OBSERVABLE, native: bool | None = None,
                     suppress_idle: bool = False, copies: int | None = None) -> list[Segment]:
    """REQUEST circuit as labelled segments (concatenate their layers for the circuit).

    ``suppress_idle`` switches off idling on the ancilla and register A while
    copies 3..M are prepared, which turns the 2N+1-qubit run into the
    equivalent of full VD.
    """
    m = plan.copies if copies is None else copies
    if m < 2:
        raise ValueError("REQUEST needs at least two copies")
    n = plan.n
    native = _resolve_native(plan, native)
    ideal = plan.ideal_controls
    a0, b0 = 1, n + 1
    reg_a = frozenset(range(a0, a0 + n))
    segs = [Segment("h", (_h_layer(ideal),))]
    quiet1 = frozenset({0}) if plan.scope == PREP_ONLY else frozenset()
    segs.append(Segment("prep1", tuple(_replicate(plan.prep, [a0, b0], quiet1)), copy=2))
    for i in range(2, m + 1):
        if i > 2:
            segs.append(Segment("reset", (Layer((Reset(range(b0, b0 + n)),), noiseless=ideal),), copy=i))
            quiet = frozenset({0}) | reg_a if (plan.scope == PREP_ONLY or suppress_idle) else frozenset()
            segs.append(Segment("prep", tuple(_replicate(plan.prep, [b0], quiet)), copy=i))
        for j in range(n):
            segs.append(Segment("cswap", tuple(_controlled_block([CSWAP(0, a0 + j, b0 + j)], ideal, native)),
                                copy=i, index=j))
    if sigma == OBSERVABLE:
        offset = b0 if plan.measured == "last" else a0
        segs.append(Segment("ctrl", tuple(_controlled_block(_sigma_gates(plan.observable, offset), ideal, native))))
    elif sigma != IDENTITY:
        raise ValueError(f"sigma must be {OBSERVABLE!r} or {IDENTITY!r}")
    segs.append(Segment("h_final", (_h_layer(ideal),)))
    return segs


def _registers_request(n: int) -> tuple[tuple[int, ...], ...]:
    return ((0,), tuple(range(1, n + 1)), tuple(range(n + 1, 2 * n + 1)))


def build_request_circuit(plan: MitigationPlan, sigma: str = OBSERVABLE, native: bool | None = None,
                          suppress_idle: bool = False) -> Circuit:
    segs = request_segments(plan, sigma, native, suppress_idle)
    layers = [l for s in segs for l in s.layers]
    return Circuit(2 * plan.n + 1, layers, f"request-M{plan.copies}-{sigma}",
                   registers=_registers_request(plan.n))


def build_vd_circuit(plan: MitigationPlan, sigma: str = OBSERVABLE, native: bool | None = None) -> Circuit:
    """Ancilla plus M registers; CSWAP chain between registers i and i+1, i ascending."""
    m, n = plan.copies, plan.n
    if m < 2:
        raise ValueError("VD needs at least two copies")
    native = _resolve_native(plan, native)
    ideal = plan.ideal_controls
    offsets = [1 + r * n for r in range(m)]
    layers = [_h_layer(ideal)]
    quiet = frozenset({0}) if plan.scope == PREP_ONLY else frozenset()
    layers += _replicate(plan.prep, offsets, quiet)
    swaps = [CSWAP(0, offsets[r] + j, offsets[r + 1] + j) for r in range(m - 1) for j in range(n)]
    layers += _controlled_block(swaps, ideal, native)
    if sigma == OBSERVABLE:
        offset = offsets[-1] if plan.measured == "last" else offsets[0]
        layers += _controlled_block(_sigma_gates(plan.observable, offset), ideal, native)
    elif sigma != IDENTITY:
        raise ValueError(f"sigma must be {OBSERVABLE!r} or {IDENTITY!r}")
    layers.append(_h_layer(ideal))
    registers = ((0,),) + tuple(tuple(range(o, o + n)) for o in offsets)
    return Circuit(m * n + 1, layers, f"vd-M{m}-{sigma}", registers=registers)


# ------------------------------------------------------ structured engine

def _restrict(layer: Layer, qubits: Sequence[int]) -> Layer:
    pos = {q: i for i, q in enumerate(qubits)}
    ops = []
    for op in layer.ops:
        inside = [q in pos for q in op.qubits]
        if all(inside):
            mapped = tuple(pos[q] for q in op.qubits)
            ops.append(Reset(mapped) if isinstance(op, Reset) else replace(op, qubits=mapped))
        elif any(inside):
            raise ValueError(f"operation {op} straddles the subsystem {list(qubits)}")
    quiet = frozenset(pos[q] for q in layer.quiet if q in pos)
    return Layer(tuple(ops), layer.noiseless, quiet)


def _run_on(rho: np.ndarray, layers: Iterable[Layer], qubits: Sequence[int], noise: NoiseModel) -> np.ndarray:
    for layer in layers:
        rho = apply_layer(rho, _restrict(layer, qubits), noise)
    return rho


@lru_cache(maxsize=256)
def _block_superop(layers: tuple[Layer, ...], support: tuple[int, ...], noise: NoiseModel) -> np.ndarray:
    return layers_superop([_restrict(l, support) for l in layers], len(support), noise)


def _idle_power(noise: NoiseModel, count: int) -> np.ndarray | None:
    s = noise.idle_superop()
    if s is None or count == 0:
        return None
    return np.linalg.matrix_power(s, count)


def _engine_supported(plan: MitigationPlan) -> bool:
    return not (plan.noise.mode == GLOBAL and not plan.ideal_controls)


def request_probabilities(plan: MitigationPlan, copies: Iterable[int], suppress_idle: bool = False,
                          native: bool | None = None) -> dict[int, tuple[float, float]]:
    """``{M: (prob0, prob0')}`` for every M in ``copies`` (all >= 2) from one sweep.

    Circuits for successive M share their prefix, so the state after the
    controlled swaps with copy M is reused for M+1. During copy preparation the
    state is a product over (ancilla + A) and B, and each controlled swap is
    applied as one fused superoperator on its three qubits. Results equal a
    direct simulation of :func:`build_request_circuit`.
    """
    wanted = sorted(set(int(m) for m in copies))
    if not wanted:
        return {}
    if wanted[0] < 2:
        raise ValueError("circuit estimators need M >= 2")
    if plan.noise.crosstalk > 0:
        raise NotImplementedError("cross-talk noise is not supported")
    if not _engine_supported(plan):
        return {m: _direct_probabilities(replace(plan, copies=m), suppress_idle, native) for m in wanted}

    n, noise = plan.n, plan.noise
    m_max = wanted[-1]
    anc, reg_a, reg_b = [0], list(range(1, n + 1)), list(range(n + 1, 2 * n + 1))
    width = 2 * n + 1
    segs = request_segments(plan, OBSERVABLE, native, suppress_idle, copies=m_max)
    tail = {
        OBSERVABLE: [s for s in segs if s.kind in ("ctrl", "h_final")],
        IDENTITY: [s for s in segs if s.kind == "h_final"],
    }
    keep_sigma = sorted({0} | {q for s in tail[OBSERVABLE] for l in s.layers for q in l.active})

    head = [l for s in segs if s.kind in ("h", "prep1") for l in s.layers]
    state = np.kron(np.kron(_run_on(zero_state(1), head, anc, noise),
                            _run_on(zero_state(n), head, reg_a, noise)),
                    _run_on(zero_state(n), head, reg_b, noise))
    fresh_b: dict[tuple, np.ndarray] = {}
    out: dict[int, tuple[float, float]] = {}
    by_copy: dict[int, list[Segment]] = {}
    for s in segs:
        if s.copy:
            by_copy.setdefault(s.copy, []).append(s)

    for i in range(2, m_max + 1):
        if i > 2:
            pre = [l for s in by_copy[i] if s.kind in ("reset", "prep") for l in s.layers]
            reduced = _run_on(partial_trace(state, anc + reg_a), pre, anc + reg_a, noise)
            key = tuple(pre)
            if key not in fresh_b:
                fresh_b[key] = _run_on(zero_state(n), pre, reg_b, noise)
            state = np.kron(reduced, fresh_b[key])
        for s in by_copy[i]:
            if s.kind != "cswap":
                continue
            support = (0, reg_a[s.index], reg_b[s.index])
            state = apply_superop(state, _block_superop(s.layers, support, noise), support)
            noisy_steps = sum(1 for l in s.layers if not l.noiseless)
            idle = _idle_power(noise, noisy_steps) if not noise.is_noiseless else None
            if idle is not None:
                state = apply_single_qubit_channels(state, idle, (q for q in range(width) if q not in support))
        if i not in wanted:
            continue
        probs = []
        for tail_segs, kq in ((tail[OBSERVABLE], keep_sigma), (tail[IDENTITY], [0])):
            red = partial_trace(state, kq)
            red = _run_on(red, [l for s in tail_segs for l in s.layers], kq, noise)
            probs.append(prob_zero(red, 0, plan.readout_error))
        out[i] = (probs[0], probs[1])
    return out


def _direct_probabilities(plan: MitigationPlan, suppress_idle: bool = False,
                          native: bool | None = None) -> tuple[float, float]:
    probs = []
    for sigma in (OBSERVABLE, IDENTITY):
        c = build_request_circuit(plan, sigma, native, suppress_idle)
        rho = simulate_density(c, plan.noise)
        probs.append(prob_zero(rho, 0, plan.readout_error))
    return probs[0], probs[1]


def simulate_vd_equivalent(plan: MitigationPlan, sigma: str = OBSERVABLE) -> np.ndarray:
    """Final (2N+1)-qubit state of the reduced-width circuit that reproduces noisy VD.

    Valid when there is no cross-talk and copy preparation is as deep as a
    controlled-swap block.
    """
    if plan.noise.crosstalk > 0:
        raise NotImplementedError("VD equivalence does not hold with cross-talk noise")
    c = build_request_circuit(plan, sigma, suppress_idle=True)
    return simulate_density(c, plan.noise)


def circuit_probabilities(plan: MitigationPlan, copies: Iterable[int]) -> dict[int, tuple[float, float]]:
    """Ancilla zero-probabilities for the plan's circuit method over several M."""
    if plan.method == REQUEST:
        return request_probabilities(plan, copies)
    if plan.method == VD:
        return request_probabilities(plan, copies, suppress_idle=True)
    raise ValueError("oracle plans have no circuit")


# ------------------------------------------------------------------- runs

def noisy_copy(plan: MitigationPlan) -> np.ndarray:
    """Single noisy copy of the prepared state."""
    return simulate_density(plan.prep, plan.noise)


def run_mitigation_sweep(plan: MitigationPlan, copies: Iterable[int], shots: int | None = None,
                         seed=None, rho: np.ndarray | None = None,
                         exact: float | None = None) -> list[MitigationResult]:
    """Mitigate for every M in ``copies``; ``shots=None`` reads probabilities exactly."""
    copies = sorted(set(int(m) for m in copies))
    if not copies or copies[0] < 1:
        raise ValueError("copy counts must be positive")
    x = plan.observable
    rho = noisy_copy(plan) if rho is None else rho
    if exact is None:
        exact = statevector_expectation(x, simulate_statevector(plan.prep))
    spec = spectral_decompose(rho)
    psi1 = statevector_expectation(x, spec.leading)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    circuit_ms = [m for m in copies if m >= 2] if plan.method != ORACLE else []
    probs = circuit_probabilities(plan, circuit_ms) if circuit_ms else {}
    results = []
    for m in copies:
        oracle = trace_ratio_oracle(rho, x, m)
        p0 = p0_id = None
        if m == 1:
            value = pauli_expectation(x, rho)
            if shots is not None:
                value = 2 * sample_binomial_estimate((1 + value) / 2, shots, rng).estimate - 1
        elif plan.method == ORACLE:
            value = oracle
        else:
            p0, p0_id = probs[m]
            if shots is not None:
                p0 = sample_binomial_estimate(p0, shots, rng).estimate
                p0_id = sample_binomial_estimate(p0_id, shots, rng).estimate
            value = estimate_mitigated(p0, p0_id)
        results.append(MitigationResult(m, plan.method, value, exact, psi1, oracle, p0, p0_id,
                                        spec.degenerate_top, shots))
    return results


def run_mitigation(plan: MitigationPlan, shots: int | None = None, seed=None) -> MitigationResult:
    return run_mitigation_sweep(plan, [plan.copies], shots, seed)[0]
