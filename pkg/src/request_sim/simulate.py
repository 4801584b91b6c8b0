"""Circuit execution: noisy density matrices, noiseless statevectors, shot sampling."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np

from .circuits import Circuit, Gate, Layer, Reset, gate_matrix
from .linalg import check_density, num_qubits, partial_trace, zero_state
from .noise import (
    GLOBAL,
    LOCAL,
    NoiseModel,
    apply_global_depolarizing,
    apply_reset,
    apply_superop,
)


class SimulationError(RuntimeError):
    pass


@lru_cache(maxsize=4096)
def _gate_superop(gate: Gate, noise: NoiseModel | None) -> np.ndarray:
    u = gate_matrix(gate)
    s = np.kron(u, u.conj())
    if noise is not None:
        ch = noise.gate_channel(len(gate.qubits))
        if ch is not None:
            s = ch.superop() @ s
    return s


@lru_cache(maxsize=64)
def _diagonal_mask(n: int, qubits: tuple[int, ...], diag: tuple[complex, ...]) -> np.ndarray:
    f = np.asarray(diag).reshape(2, 2)
    mask = np.ones([2] * (2 * n), dtype=complex)
    for q in qubits:
        shape = [1] * (2 * n)
        shape[q] = shape[n + q] = 2
        mask = mask * f.reshape(shape)
    return mask.reshape(2**n, 2**n)


def apply_single_qubit_channels(rho: np.ndarray, superop: np.ndarray,
                                qubits: Iterable[int]) -> np.ndarray:
    """Apply the same one-qubit superoperator to several qubits."""
    qubits = tuple(sorted(qubits))
    if not qubits:
        return rho
    if np.count_nonzero(superop - np.diag(np.diag(superop))) == 0:
        n = num_qubits(rho.shape[0])
        key = tuple(complex(x) for x in np.diag(superop))
        return rho * _diagonal_mask(n, qubits, key)
    for q in qubits:
        rho = apply_superop(rho, superop, [q])
    return rho


def apply_layer(rho: np.ndarray, layer: Layer, noise: NoiseModel,
                registers: tuple[tuple[int, ...], ...] | None = None,
                suppressed: frozenset[int] = frozenset()) -> np.ndarray:
    n = num_qubits(rho.shape[0])
    noisy = not (layer.noiseless or noise.is_noiseless)
    for op in layer.ops:
        if isinstance(op, Reset):
            rho = apply_reset(rho, op.qubits, noise.reset_error if noisy else 0.0)
        else:
            gate_noise = noise if noisy and noise.mode == LOCAL else None
            rho = apply_superop(rho, _gate_superop(op, gate_noise), op.qubits)
    if not noisy:
        return rho
    if noise.mode == LOCAL:
        idle = noise.idle_superop()
        if idle is not None:
            skip = layer.active | layer.quiet | suppressed
            rho = apply_single_qubit_channels(rho, idle, (q for q in range(n) if q not in skip))
    elif noise.mode == GLOBAL and noise.global_rate > 0:
        for reg in registers or (tuple(range(n)),):
            qs = [q for q in reg if q not in layer.quiet and q not in suppressed]
            if qs:
                rho = apply_global_depolarizing(rho, noise.global_rate, qs)
    return rho


def simulate_density(c: Circuit, noise: NoiseModel | None = None,
                     initial: np.ndarray | None = None, check: bool = False,
                     suppressed: Iterable[int] = ()) -> np.ndarray:
    """Run ``c`` on a density matrix, interleaving the channels of ``noise``.

    ``suppressed`` switches off idling noise on the listed qubits for the whole run.
    With ``check=True`` the density-matrix invariants are verified after each layer.
    """
    noise = noise or NoiseModel.noiseless()
    if noise.crosstalk > 0:
        raise NotImplementedError("cross-talk noise is not supported")
    rho = zero_state(c.width) if initial is None else np.array(initial, dtype=complex)
    if rho.shape != (2**c.width,) * 2:
        raise ValueError(f"initial state shape {rho.shape} does not match width {c.width}")
    suppressed = frozenset(suppressed)
    for i, layer in enumerate(c.layers):
        rho = apply_layer(rho, layer, noise, c.registers, suppressed)
        if check:
            try:
                check_density(rho)
            except ValueError as exc:
                raise SimulationError(f"invalid state after layer {i}: {exc}") from exc
    return rho


def simulate_statevector(c: Circuit, initial: np.ndarray | None = None) -> np.ndarray:
    if c.has_resets():
        raise SimulationError("statevector simulation cannot apply resets")
    n = c.width
    psi = np.zeros(2**n, dtype=complex)
    if initial is None:
        psi[0] = 1.0
    else:
        psi[:] = initial
    t = psi.reshape([2] * n)
    for g in c.gates():
        k = len(g.qubits)
        u = gate_matrix(g).reshape([2] * (2 * k))
        t = np.tensordot(u, t, axes=(list(range(k, 2 * k)), list(g.qubits)))
        t = np.moveaxis(t, list(range(k)), list(g.qubits))
    return np.ascontiguousarray(t).reshape(2**n)


def layers_superop(layers: Iterable[Layer], width: int, noise: NoiseModel) -> np.ndarray:
    """Superoperator (ket-bra index convention) of a whole layer sequence on ``width`` qubits."""
    layers = tuple(layers)
    d = 2**width
    out = np.zeros((d * d, d * d), dtype=complex)
    for a in range(d):
        for b in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[a, b] = 1.0
            for layer in layers:
                e = apply_layer(e, layer, noise)
            out[:, a * d + b] = e.reshape(-1)
    return out


def prob_zero(rho: np.ndarray, qubit: int, readout_error: float = 0.0) -> float:
    r = partial_trace(rho, [qubit])
    p0 = float(np.real(r[0, 0]))
    return (1 - readout_error) * p0 + readout_error * (1 - p0)


@dataclass(frozen=True)
class ShotEstimate:
    estimate: float
    shots: int
    seed: int | None
    zeros: int


def sample_binomial_estimate(p: float, shots: int, seed=None) -> ShotEstimate:
    """Fraction of 0 outcomes in ``shots`` draws of a Bernoulli(p) measurement."""
    if not 0.0 <= p <= 1.0:
        if -1e-12 <= p < 0.0 or 1.0 < p <= 1 + 1e-12:
            p = min(max(p, 0.0), 1.0)
        else:
            raise ValueError(f"probability must be in [0, 1], got {p}")
    if shots < 1:
        raise ValueError("need at least one shot")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    zeros = int(rng.binomial(int(shots), p))
    return ShotEstimate(zeros / shots, int(shots), seed if isinstance(seed, int) else None, zeros)
