"""Near-Clifford proxies of native-gate circuits and copy-count selection with them.

A proxy keeps the circuit's structure and only moves rotation angles onto
Clifford values: every RY and XX becomes Clifford, and RZ gates are snapped one
at a time until a target number of non-Clifford RZ remain. Since the proxy's
ideal expectation value is computable, running the mitigation on noisy proxies
shows which copy count works best on circuits of this kind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .circuits import Circuit, Gate, gate_matrix, is_clifford, to_native
from .distill import (
    FULL,
    REQUEST,
    MitigationPlan,
    SingularDenominatorError,
    run_mitigation_sweep,
)
from .linalg import PauliProduct, statevector_expectation
from .noise import NoiseModel
from .simulate import simulate_statevector

# Clifford grid spacing of each rotation kind
CLIFFORD_STEP = {"RZ": math.pi / 2, "RY": math.pi / 2, "XX": math.pi / 4}
# global phase that makes a rotation comparable to its Clifford target
_PHASE_FACTOR = {"RZ": 0.5, "RY": 0.5, "XX": 1.0}
TIE_TOL = 1e-12


class NoUsableProxiesError(RuntimeError):
    """Every proxy hit a singular estimator denominator."""


@dataclass(frozen=True)
class SubstitutionParams:
    sigma_width: float = 0.5
    n_nonclifford: int = 28
    samples_per_circuit: int = 10

    def __post_init__(self):
        if not self.sigma_width > 0:
            raise ValueError("sigma_width must be positive")
        if self.n_nonclifford < 0:
            raise ValueError("n_nonclifford must be non-negative")
        if self.samples_per_circuit < 1:
            raise ValueError("need at least one proxy per circuit")


@dataclass(frozen=True)
class WeightTable:
    """Distances and weights of one gate to its four Clifford neighbours."""

    kind: str
    angle: float
    distances: tuple[float, float, float, float]
    weights: tuple[float, float, float, float]

    @property
    def probabilities(self) -> np.ndarray:
        w = np.asarray(self.weights)
        return w / w.sum()

    def clifford_angle(self, k: int) -> float:
        return k * CLIFFORD_STEP[self.kind]


def clifford_distance(g: Gate, k: int) -> float:
    """Phase-aligned Frobenius distance from ``g`` to the k-th Clifford rotation of its kind."""
    u = gate_matrix(g)
    target = gate_matrix(g.with_angle(k * CLIFFORD_STEP[g.kind]))
    diff = np.exp(1j * _PHASE_FACTOR[g.kind] * g.angle) * u - np.exp(1j * k * math.pi / 4) * target
    return float(np.linalg.norm(diff) / np.linalg.norm(u))


def substitution_weights(g: Gate, params: SubstitutionParams = SubstitutionParams()) -> WeightTable:
    if g.kind not in CLIFFORD_STEP:
        raise ValueError(f"no Clifford substitution for {g.kind}")
    if is_clifford(g):
        raise ValueError(f"{g.kind}({g.angle}) is already Clifford")
    d = tuple(clifford_distance(g, k) for k in range(4))
    w = tuple(math.exp(-(x / params.sigma_width) ** 2) for x in d)
    if sum(w) == 0.0:
        # far from every Clifford point at a tiny width: fall back to the nearest one
        best = int(np.argmin(d))
        w = tuple(1.0 if k == best else 0.0 for k in range(4))
    return WeightTable(g.kind, g.angle, d, w)


def _positions(c: Circuit, kinds: Iterable[str]) -> list[tuple[int, int]]:
    kinds = set(kinds)
    return [(li, oi) for li, layer in enumerate(c.layers) for oi, op in enumerate(layer.ops)
            if isinstance(op, Gate) and op.kind in kinds and not is_clifford(op)]


def _set_angles(c: Circuit, new: dict[tuple[int, int], float]) -> Circuit:
    layers = list(c.layers)
    for li in sorted({li for li, _ in new}):
        ops = list(layers[li].ops)
        for (l2, oi), a in new.items():
            if l2 == li:
                ops[oi] = ops[oi].with_angle(a)
        layers[li] = replace(layers[li], ops=tuple(ops))
    return replace(c, layers=tuple(layers))


def project_to_near_clifford(c: Circuit, params: SubstitutionParams = SubstitutionParams(),
                             seed=None) -> Circuit:
    """Random near-Clifford proxy of a native-gate circuit.

    Only angles change. Afterwards no RY or XX is non-Clifford and exactly
    ``min(n_nonclifford, initial non-Clifford RZ count)`` RZ gates are non-Clifford.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    new: dict[tuple[int, int], float] = {}
    for li, oi in _positions(c, ("RY", "XX")):
        table = substitution_weights(c.layers[li].ops[oi], params)
        k = int(rng.choice(4, p=table.probabilities))
        new[(li, oi)] = table.clifford_angle(k)

    rz = _positions(c, ("RZ",))
    tables = [substitution_weights(c.layers[li].ops[oi], params) for li, oi in rz]
    alive = list(range(len(rz)))
    while len(alive) > params.n_nonclifford:
        w = np.array([tables[j].weights for j in alive], dtype=float)
        if w.sum() == 0.0:
            w = np.ones_like(w)
        flat = int(rng.choice(w.size, p=(w / w.sum()).ravel()))
        j, k = alive[flat // 4], flat % 4
        new[rz[j]] = tables[j].clifford_angle(k)
        alive.remove(j)
    return _set_angles(c, new)


@dataclass(frozen=True)
class MOptEstimate:
    m_opt: int
    copies: tuple[int, ...]
    errors: tuple[float, ...]  # summed over usable proxies, one per M
    per_proxy: tuple[tuple[float, ...], ...]
    skipped: int = 0

    @property
    def mean_errors(self) -> tuple[float, ...]:
        k = len(self.per_proxy)
        return tuple(e / k for e in self.errors)


def argmin_smallest(values: Sequence[float], keys: Sequence[int], tol: float = TIE_TOL) -> int:
    """Key of the minimum value; the smallest key wins among near-ties."""
    lo = min(values)
    return min(k for k, v in zip(keys, values) if v <= lo + tol)


def proxy_circuits(prep: Circuit, params: SubstitutionParams, seed=None) -> list[Circuit]:
    rng = np.random.default_rng(seed)
    native = to_native(prep)
    return [project_to_near_clifford(native, params, rng) for _ in range(params.samples_per_circuit)]


def mitigation_errors(prep: Circuit, x: PauliProduct, noise: NoiseModel, copies: Sequence[int],
                      method: str = REQUEST, scope: str = FULL) -> list[float]:
    """|mitigated - exact| for each M in ``copies``, exact values from the ideal statevector."""
    plan = MitigationPlan(prep, x, max(copies), method, noise, scope)
    exact = statevector_expectation(x, simulate_statevector(prep))
    results = run_mitigation_sweep(plan, copies, exact=exact)
    return [r.abs_err_exact for r in results]


def estimate_m_opt(prep: Circuit, x: PauliProduct, noise: NoiseModel, copies: Iterable[int] = range(1, 9),
                   params: SubstitutionParams = SubstitutionParams(), seed=None,
                   scope: str = FULL, method: str = REQUEST) -> MOptEstimate:
    """Copy count minimizing the summed mitigation error over near-Clifford proxies of ``prep``."""
    copies = tuple(sorted(set(int(m) for m in copies)))
    if not copies:
        raise ValueError("copy range is empty")
    if copies[0] < 1:
        raise ValueError("copy counts must be positive")
    rows, skipped = [], 0
    for proxy in proxy_circuits(prep, params, seed):
        try:
            rows.append(tuple(mitigation_errors(proxy, x, noise, copies, method, scope)))
        except SingularDenominatorError:
            skipped += 1
    if not rows:
        raise NoUsableProxiesError("all near-Clifford proxies gave a singular estimator")
    totals = tuple(float(v) for v in np.sum(rows, axis=0))
    return MOptEstimate(argmin_smallest(totals, copies), copies, totals, tuple(rows), skipped)
