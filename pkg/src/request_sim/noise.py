"""Noise channels and the configurable noise model.

Channels are stored as Kraus lists and applied through their superoperator,
``S = sum_k K ⊗ conj(K)`` acting on the (ket, bra) index pair of the targets.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from .linalg import PAULI_MATRICES, num_qubits, tensor_product

COMPLETENESS_TOL = 1e-9

LOCAL = "local"
GLOBAL = "global"
NOISELESS = "noiseless"
MODES = (LOCAL, GLOBAL, NOISELESS)


@dataclass(frozen=True)
class KrausChannel:
    operators: tuple[np.ndarray, ...]

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.operators)
        if not ops:
            raise ValueError("channel needs at least one Kraus operator")
        d = ops[0].shape[0]
        total = sum(k.conj().T @ k for k in ops)
        if np.max(np.abs(total - np.eye(d))) > COMPLETENESS_TOL:
            raise ValueError("Kraus operators are not trace preserving")
        object.__setattr__(self, "operators", ops)

    @property
    def arity(self) -> int:
        return num_qubits(self.operators[0].shape[0])

    def superop(self) -> np.ndarray:
        return sum(np.kron(k, k.conj()) for k in self.operators)


def identity_channel(n: int = 1) -> KrausChannel:
    return KrausChannel((np.eye(2**n),))


def depolarizing(q: float, n: int = 1) -> KrausChannel:
    """``rho -> (1-q) rho + q Tr_targets(rho) ⊗ I/2^n``."""
    _check_prob(q, "depolarizing rate")
    d2 = 4**n
    paulis = _pauli_basis(n)
    w0 = math.sqrt(1 - q + q / d2)
    wk = math.sqrt(q / d2)
    return KrausChannel((w0 * paulis[0],) + tuple(wk * p for p in paulis[1:]))


def dephasing(q: float) -> KrausChannel:
    """``rho -> (1-q) rho + q Z rho Z``."""
    _check_prob(q, "dephasing rate")
    return KrausChannel((math.sqrt(1 - q) * PAULI_MATRICES["I"], math.sqrt(q) * PAULI_MATRICES["Z"]))


def bit_flip(q: float) -> KrausChannel:
    _check_prob(q, "bit-flip rate")
    return KrausChannel((math.sqrt(1 - q) * PAULI_MATRICES["I"], math.sqrt(q) * PAULI_MATRICES["X"]))


def amplitude_damping(gamma: float) -> KrausChannel:
    _check_prob(gamma, "damping rate")
    k0 = np.array([[1, 0], [0, math.sqrt(1 - gamma)]])
    k1 = np.array([[0, math.sqrt(gamma)], [0, 0]])
    return KrausChannel((k0, k1))


@lru_cache(maxsize=None)
def _pauli_basis(n: int) -> tuple[np.ndarray, ...]:
    import itertools
    letters = "IXYZ"
    return tuple(tensor_product(*(PAULI_MATRICES[c] for c in word))
                 for word in itertools.product(letters, repeat=n))


def _check_prob(x: float, what: str) -> None:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{what} must be in [0, 1], got {x}")


# ----------------------------------------------------------- application

def apply_superop(rho: np.ndarray, superop: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Apply a ``4**k x 4**k`` superoperator on qubits ``targets`` of ``rho``."""
    d = rho.shape[0]
    n = num_qubits(d)
    k = len(targets)
    if superop.shape != (4**k, 4**k):
        raise ValueError(f"superoperator shape {superop.shape} does not match {k} targets")
    if any(not 0 <= q < n for q in targets):
        raise IndexError(f"targets {list(targets)} out of range for {n} qubits")
    axes = list(targets) + [n + q for q in targets]
    t = rho.reshape([2] * (2 * n))
    s = superop.reshape([2] * (4 * k))
    t = np.tensordot(s, t, axes=(list(range(2 * k, 4 * k)), axes))
    t = np.moveaxis(t, list(range(2 * k)), axes)
    return np.ascontiguousarray(t).reshape(d, d)


def apply_unitary(rho: np.ndarray, u: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    d = rho.shape[0]
    n = num_qubits(d)
    k = len(targets)
    ut = u.reshape([2] * (2 * k))
    t = rho.reshape([2] * (2 * n))
    t = np.tensordot(ut, t, axes=(list(range(k, 2 * k)), list(targets)))
    t = np.moveaxis(t, list(range(k)), list(targets))
    bra = [n + q for q in targets]
    t = np.tensordot(t, ut.conj(), axes=(bra, list(range(k, 2 * k))))
    t = np.moveaxis(t, list(range(2 * n - k, 2 * n)), bra)
    return np.ascontiguousarray(t).reshape(d, d)


def apply_kraus(rho: np.ndarray, ch: KrausChannel, targets: Sequence[int]) -> np.ndarray:
    if len(targets) != ch.arity:
        raise ValueError(f"{ch.arity}-qubit channel given {len(targets)} targets")
    return apply_superop(rho, ch.superop(), targets)


def apply_global_depolarizing(rho: np.ndarray, delta: float,
                              qubits: Sequence[int] | None = None) -> np.ndarray:
    """``(1-delta) rho + delta I/2^N``, or the same jointly on a subset of qubits."""
    _check_prob(delta, "global depolarizing rate")
    n = num_qubits(rho.shape[0])
    if qubits is None or len(qubits) == n:
        return (1 - delta) * rho + delta * np.eye(rho.shape[0]) / rho.shape[0]
    from .linalg import partial_trace
    qubits = sorted(qubits)
    rest = [q for q in range(n) if q not in qubits]
    reduced = partial_trace(rho, rest)
    mixed = np.kron(reduced, np.eye(2 ** len(qubits)) / 2 ** len(qubits))
    # kron puts `rest` first; permute back to natural order
    perm = rest + qubits
    inv = list(np.argsort(perm))
    t = mixed.reshape([2] * (2 * n)).transpose(inv + [n + i for i in inv])
    return (1 - delta) * rho + delta * t.reshape(rho.shape)


def reset_state(r: float = 0.0) -> np.ndarray:
    _check_prob(r, "reset error")
    return np.diag([1 - r, r]).astype(complex)


def apply_reset(rho: np.ndarray, qubits: Iterable[int], r: float = 0.0) -> np.ndarray:
    """Trace out ``qubits`` and re-prepare each as ``(1-r)|0><0| + r|1><1|``."""
    s = reset_state(r)
    # reset superop: |a><b| -> delta_ab * s
    sup = np.zeros((4, 4), dtype=complex)
    for a in range(2):
        sup[:, 2 * a + a] = s.reshape(4)
    for q in qubits:
        rho = apply_superop(rho, sup, [q])
    return rho


# ------------------------------------------------------------ noise model

@dataclass(frozen=True)
class NoiseModel:
    """Per-gate, idling, reset and readout error parameters.

    ``local``: depolarizing after each gate (``p1`` one-qubit, ``p2`` for gates on
    two or more qubits) plus an idling channel on every qubit left untouched by
    a layer. ``global``: depolarizing with rate ``global_rate`` on each register
    after every layer. ``noiseless``: nothing.
    """

    mode: str = LOCAL
    p1: float = 1e-3
    p2: float = 5e-3
    idle_dephasing: float = 8e-5
    idle_depolarizing: float = 0.0
    idle_damping: float = 0.0
    reset_error: float = 0.0
    readout_error: float = 0.0
    global_rate: float = 0.0
    crosstalk: float = 0.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"noise mode must be one of {MODES}, got {self.mode!r}")
        for name in ("p1", "p2", "idle_dephasing", "idle_depolarizing", "idle_damping",
                     "reset_error", "readout_error", "global_rate", "crosstalk"):
            _check_prob(getattr(self, name), name)

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls(mode=NOISELESS)

    @classmethod
    def global_depolarizing(cls, delta: float) -> "NoiseModel":
        return cls(mode=GLOBAL, global_rate=delta)

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseModel":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown noise parameters: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def is_noiseless(self) -> bool:
        return self.mode == NOISELESS

    def gate_channel(self, arity: int) -> KrausChannel | None:
        if self.mode != LOCAL:
            return None
        q = self.p1 if arity == 1 else self.p2
        return depolarizing(q, arity) if q > 0 else None

    def idle_superop(self) -> np.ndarray | None:
        """Single-qubit idling superoperator for one layer, or ``None`` if trivial."""
        return _idle_superop(self)


@lru_cache(maxsize=256)
def _idle_superop(noise: NoiseModel) -> np.ndarray | None:
    if noise.mode != LOCAL:
        return None
    s = np.eye(4, dtype=complex)
    if noise.idle_damping > 0:
        s = amplitude_damping(noise.idle_damping).superop() @ s
    if noise.idle_depolarizing > 0:
        s = depolarizing(noise.idle_depolarizing).superop() @ s
    if noise.idle_dephasing > 0:
        s = dephasing(noise.idle_dephasing).superop() @ s
    return None if np.array_equal(s, np.eye(4)) else s


def geometric_mean_rate(rates: Sequence[float]) -> float:
    """Constant per-layer rate with the same total survival as ``rates``."""
    rates = np.asarray(rates, dtype=float)
    if np.any((rates < 0) | (rates > 1)):
        raise ValueError("rates must be in [0, 1]")
    if np.any(rates == 1):
        return 1.0
    return float(1 - np.exp(np.mean(np.log1p(-rates))))


def idling_channels_for_layer(layer, width: int, noise: NoiseModel,
                              suppressed: Iterable[int] = ()) -> dict[int, np.ndarray]:
    """Map idle qubit -> idling superoperator for one layer.

    Qubits touched by a gate or reset get their gate-class channel elsewhere;
    qubits in ``layer.quiet`` or ``suppressed`` get nothing.
    """
    if layer.noiseless:
        return {}
    s = noise.idle_superop()
    if s is None:
        return {}
    skip = layer.active | layer.quiet | frozenset(suppressed)
    return {q: s for q in range(width) if q not in skip}
