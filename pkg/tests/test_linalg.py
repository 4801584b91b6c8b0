import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from request_sim.linalg import (
    MAX_QUBITS,
    PAULI_MATRICES,
    PauliProduct,
    check_density,
    matrix_power,
    partial_trace,
    pauli_expectation,
    random_density,
    spectral_decompose,
    tensor_product,
)

I2, X, Z = PAULI_MATRICES["I"], PAULI_MATRICES["X"], PAULI_MATRICES["Z"]
seeds = st.integers(0, 2**32 - 1)


def test_tensor_identity():
    assert np.allclose(tensor_product(I2, I2), np.eye(4))


def test_tensor_z_first_is_msb():
    assert np.allclose(tensor_product(Z, I2), np.diag([1, 1, -1, -1]))


@given(seeds)
def test_tensor_mixed_product(seed):
    rng = np.random.default_rng(seed)
    a, b, c, d = (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)) for _ in range(4))
    lhs = tensor_product(a, b) @ tensor_product(c, d)
    assert np.allclose(lhs, tensor_product(a @ c, b @ d), atol=1e-12)


def test_tensor_overflow():
    with pytest.raises(ValueError):
        tensor_product(*([I2] * (MAX_QUBITS + 1)))


def test_partial_trace_basis_and_bell():
    zz = np.zeros((4, 4)); zz[0, 0] = 1
    assert np.allclose(partial_trace(zz, [0]), np.diag([1, 0]))
    assert np.allclose(partial_trace(zz, [1]), np.diag([1, 0]))
    bell = np.zeros(4); bell[[0, 3]] = 1 / np.sqrt(2)
    rho = np.outer(bell, bell)
    assert np.allclose(partial_trace(rho, [0]), np.eye(2) / 2)
    assert np.allclose(partial_trace(rho, [1]), np.eye(2) / 2)


@given(seeds)
def test_partial_trace_product(seed):
    rng = np.random.default_rng(seed)
    ra, rb = random_density(2, rng), random_density(1, rng)
    rho = np.kron(ra, rb)
    assert np.allclose(partial_trace(rho, [0, 1]), ra, atol=1e-12)
    assert np.allclose(partial_trace(rho, [2]), rb, atol=1e-12)
    check_density(partial_trace(rho, [0, 2]))


def test_partial_trace_out_of_range():
    with pytest.raises(IndexError):
        partial_trace(np.eye(4) / 4, [2])


def test_matrix_power_examples():
    assert np.allclose(matrix_power(np.eye(4), 5), np.eye(4))
    assert np.allclose(matrix_power(np.diag([0.75, 0.25]), 2), np.diag([0.5625, 0.0625]))
    with pytest.raises(ValueError):
        matrix_power(np.eye(2), 0)
    with pytest.raises(ValueError):
        matrix_power(np.array([[0, 1], [0, 0]]), 2)


@settings(max_examples=40)
@given(seeds, st.integers(1, 16))
def test_matrix_power_routes_agree(seed, m):
    rho = random_density(2, np.random.default_rng(seed))
    a = matrix_power(rho, m, "multiply")
    b = matrix_power(rho, m, "eig")
    assert np.max(np.abs(a - b)) <= 1e-10


def test_spectral_examples():
    s = spectral_decompose(np.diag([0.25, 0.75]))
    assert np.allclose(s.eigenvalues, [0.75, 0.25])
    plus = np.full((2, 2), 0.5)
    s = spectral_decompose(plus)
    assert np.allclose(s.eigenvalues, [1, 0], atol=1e-12)
    v = s.leading * np.exp(-1j * np.angle(s.leading[0]))
    assert np.allclose(v, [1 / np.sqrt(2)] * 2)
    assert not s.degenerate_top
    assert spectral_decompose(np.eye(2) / 2).degenerate_top
    with pytest.raises(ValueError):
        spectral_decompose(np.array([[0, 1], [0, 0]]))


@settings(max_examples=30)
@given(seeds, st.integers(1, 5))
def test_spectral_reconstruction(seed, n):
    rho = random_density(n, np.random.default_rng(seed))
    s = spectral_decompose(rho)
    assert np.max(np.abs(s.reconstruct() - rho)) <= 1e-8
    assert abs(s.eigenvalues.sum() - 1) <= 1e-9
    assert np.all(s.eigenvalues >= -1e-9)
    assert np.all(np.diff(s.eigenvalues) <= 1e-15)
    v = s.eigenvectors
    assert np.allclose(v.conj().T @ v, np.eye(2**n), atol=1e-9)


def test_pauli_product_properties():
    for word in ("XYZ", "IZ", "Y"):
        m = PauliProduct(word).matrix()
        assert np.allclose(m, m.conj().T)
        assert np.allclose(m @ m, np.eye(len(m)))
    assert PauliProduct.single("Z", 1, 3).letters == "IZI"
    assert PauliProduct("IZIX").support == (1, 3)
    with pytest.raises(ValueError):
        PauliProduct("ZQ")


def test_pauli_expectation_examples():
    z = PauliProduct("Z")
    assert pauli_expectation(z, np.diag([1, 0])) == 1
    assert pauli_expectation(z, np.eye(2) / 2) == 0
    assert abs(pauli_expectation(PauliProduct("ZI"), np.diag([0.4, 0.1, 0.3, 0.2]))) < 1e-15
    with pytest.raises(ValueError):
        pauli_expectation(PauliProduct("ZZ"), np.eye(2) / 2)


def test_check_density_rejects():
    with pytest.raises(ValueError):
        check_density(np.diag([0.6, 0.6]))
    with pytest.raises(ValueError):
        check_density(np.diag([1.2, -0.2]))
