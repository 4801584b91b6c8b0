"""Dense linear algebra for qubit operators.

Qubit 0 is the most significant bit of a computational-basis index, so in a
Kronecker product ``a ⊗ b`` the qubits of ``a`` come first.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce

import numpy as np

MAX_QUBITS = 14

HERMITIAN_TOL = 1e-9
DEGENERACY_TOL = 1e-12

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def num_qubits(dim: int) -> int:
    n = int(dim).bit_length() - 1
    if dim < 1 or 1 << n != dim:
        raise ValueError(f"dimension {dim} is not a power of two")
    return n


def _check_square(a: np.ndarray, name: str = "matrix") -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square, got shape {a.shape}")


def tensor_product(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of square operators, leftmost factor = lowest qubit indices."""
    if not ops:
        raise ValueError("need at least one operator")
    for op in ops:
        _check_square(np.asarray(op))
    total = sum(num_qubits(np.asarray(op).shape[0]) for op in ops)
    if total > MAX_QUBITS:
        raise ValueError(f"product would act on {total} qubits (max {MAX_QUBITS})")
    return reduce(np.kron, (np.asarray(op, dtype=complex) for op in ops))


def partial_trace(rho: np.ndarray, keep) -> np.ndarray:
    """Reduced density matrix on the qubits in ``keep`` (kept in ascending order)."""
    rho = np.asarray(rho)
    _check_square(rho, "rho")
    n = num_qubits(rho.shape[0])
    keep = sorted(set(int(q) for q in keep))
    for q in keep:
        if not 0 <= q < n:
            raise IndexError(f"qubit {q} out of range for {n}-qubit state")
    drop = [q for q in range(n) if q not in keep]
    t = rho.reshape([2] * (2 * n))
    # trace pairs from the highest index down so remaining axis numbers stay valid
    nk = n
    for q in sorted(drop, reverse=True):
        t = np.trace(t, axis1=q, axis2=q + nk)
        nk -= 1
    d = 1 << len(keep)
    return t.reshape(d, d)


def is_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(a - a.conj().T), initial=0.0) <= tol)


def matrix_power(rho: np.ndarray, m: int, method: str = "multiply") -> np.ndarray:
    """``rho**m`` for Hermitian ``rho``.

    ``method="multiply"`` uses repeated squaring, ``method="eig"`` goes through the
    eigenbasis. The two routes are independent and are cross-checked in tests.
    """
    rho = np.asarray(rho, dtype=complex)
    _check_square(rho, "rho")
    if int(m) != m or m < 1:
        raise ValueError(f"power must be a positive integer, got {m}")
    m = int(m)
    if not is_hermitian(rho):
        raise ValueError("matrix_power expects a Hermitian matrix")
    if method == "eig":
        vals, vecs = np.linalg.eigh(rho)
        out = (vecs * vals**m) @ vecs.conj().T
    elif method == "multiply":
        out = np.linalg.matrix_power(rho, m)
    else:
        raise ValueError(f"unknown method {method!r}")
    return 0.5 * (out + out.conj().T)


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns, same order
    degenerate_top: bool = False

    @property
    def leading(self) -> np.ndarray:
        return self.eigenvectors[:, 0]

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def spectral_decompose(rho: np.ndarray) -> SpectralDecomposition:
    rho = np.asarray(rho, dtype=complex)
    _check_square(rho, "rho")
    if not is_hermitian(rho):
        raise ValueError("spectral_decompose expects a Hermitian matrix")
    vals, vecs = np.linalg.eigh(0.5 * (rho + rho.conj().T))
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    degenerate = len(vals) > 1 and abs(vals[0] - vals[1]) <= DEGENERACY_TOL
    return SpectralDecomposition(vals, vecs, degenerate)


@dataclass(frozen=True)
class PauliProduct:
    """Tensor product of single-qubit Paulis, e.g. ``PauliProduct("ZIII")``."""

    letters: str

    def __post_init__(self):
        if not self.letters or any(c not in PAULI_MATRICES for c in self.letters):
            raise ValueError(f"invalid Pauli string {self.letters!r}")

    @classmethod
    def single(cls, letter: str, qubit: int, n: int) -> "PauliProduct":
        chars = ["I"] * n
        chars[qubit] = letter
        return cls("".join(chars))

    @property
    def num_qubits(self) -> int:
        return len(self.letters)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(i for i, c in enumerate(self.letters) if c != "I")

    def matrix(self) -> np.ndarray:
        return tensor_product(*(PAULI_MATRICES[c] for c in self.letters))

    def __str__(self) -> str:
        return self.letters


def pauli_expectation(x: PauliProduct, rho: np.ndarray) -> float:
    rho = np.asarray(rho)
    if rho.shape != (2**x.num_qubits,) * 2:
        raise ValueError(f"{x.num_qubits}-qubit observable vs state of shape {rho.shape}")
    val = np.trace(x.matrix() @ rho)
    if abs(val.imag) > 1e-9:
        raise ValueError(f"expectation has imaginary part {val.imag:.3e}; state not Hermitian?")
    return float(val.real)


def statevector_expectation(x: PauliProduct, psi: np.ndarray) -> float:
    psi = np.asarray(psi)
    return float(np.real(np.vdot(psi, x.matrix() @ psi)))


def density_from_statevector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def zero_state(n: int) -> np.ndarray:
    rho = np.zeros((2**n, 2**n), dtype=complex)
    rho[0, 0] = 1.0
    return rho


def check_density(rho: np.ndarray, atol: float = 1e-8) -> None:
    """Raise ``ValueError`` unless ``rho`` is unit-trace, Hermitian and PSD."""
    rho = np.asarray(rho)
    _check_square(rho, "rho")
    tr = np.trace(rho)
    if abs(tr - 1) > atol:
        raise ValueError(f"trace {tr} != 1")
    if not is_hermitian(rho):
        raise ValueError("density matrix is not Hermitian")
    lo = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if lo < -atol:
        raise ValueError(f"density matrix has negative eigenvalue {lo:.3e}")


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    d = 2**n
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))
