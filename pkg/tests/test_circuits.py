import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from request_sim.circuits import (
    CLIFFORD_TOL,
    CNOT,
    CSWAP,
    CTRL_PAULI,
    NATIVE_KINDS,
    RY,
    RZ,
    TOFFOLI,
    XX,
    Circuit,
    Gate,
    Layer,
    Reset,
    circuit_unitary,
    decompose_cswap,
    decompose_to_native,
    dumps,
    embed,
    gate_matrix,
    generate_rqc,
    is_clifford,
    loads,
    phase_distance,
    schedule,
    to_native,
)
from request_sim.linalg import PAULI_MATRICES

angles = st.floats(-10, 10, allow_nan=False)


def fredkin():
    f = np.eye(8)
    f[[5, 6]] = f[[6, 5]]
    return f


def test_gate_matrix_examples():
    assert np.allclose(gate_matrix(RZ(0, 0)), np.eye(2))
    assert np.allclose(gate_matrix(RZ(0, math.pi / 2)), np.diag([np.exp(-1j * math.pi / 4), np.exp(1j * math.pi / 4)]))
    xx = np.kron(PAULI_MATRICES["X"], PAULI_MATRICES["X"])
    # eigenbasis route for exp(-i d XX)
    vals, vecs = np.linalg.eigh(xx)
    expected = (vecs * np.exp(-1j * math.pi / 2 * vals)) @ vecs.conj().T
    assert np.allclose(gate_matrix(XX(0, 1, math.pi / 2)), expected)
    assert np.allclose(expected, -1j * xx)


@settings(max_examples=30)
@given(st.sampled_from(["RZ", "RY", "XX"]), angles)
def test_rotations_unitary(kind, a):
    g = Gate(kind, (0,) if kind != "XX" else (0, 1), a)
    u = gate_matrix(g)
    assert np.allclose(u.conj().T @ u, np.eye(len(u)), atol=1e-10)


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("RZ", (0, 1), 0.1)
    with pytest.raises(ValueError):
        CSWAP(0, 1, 1)
    with pytest.raises(ValueError):
        RZ(0, float("inf"))
    with pytest.raises(ValueError):
        Gate("FOO", (0,))


def test_cswap_decomposition():
    seq = decompose_cswap(0, 1, 2)
    assert [g.kind for g in seq] == ["CNOT", "TOFFOLI", "CNOT"]
    assert seq[0].qubits == (2, 1) and seq[1].qubits == (0, 1, 2)
    u = circuit_unitary(seq, 3)
    assert np.max(np.abs(u - fredkin())) <= 1e-10
    assert np.max(np.abs(gate_matrix(CSWAP(0, 1, 2)) - fredkin())) <= 1e-10
    # control |0>: identity on targets; control |1>: |01> -> |10>
    assert np.allclose(u[:4, :4], np.eye(4))
    assert u[6, 5] == 1
    with pytest.raises(ValueError):
        decompose_cswap(0, 0, 1)


def _native_matches(g: Gate, width: int) -> float:
    seq = decompose_to_native(g)
    assert all(s.kind in NATIVE_KINDS for s in seq)
    return phase_distance(embed(gate_matrix(g), g.qubits, width), circuit_unitary(seq, width))


@pytest.mark.parametrize("g", [Gate("H", (0,)), Gate("X", (0,)), Gate("Z", (0,)), CNOT(0, 1), CNOT(1, 0),
                               TOFFOLI(0, 1, 2), TOFFOLI(2, 0, 1), CSWAP(0, 1, 2), CSWAP(1, 2, 0),
                               CTRL_PAULI(0, 1, "X"), CTRL_PAULI(1, 0, "Y"), CTRL_PAULI(0, 2, "Z")])
def test_native_decompositions(g):
    assert _native_matches(g, 3) <= 1e-8


def test_native_passthrough_and_counts():
    g = RZ(0, 0.3)
    assert decompose_to_native(g) == [g]
    kinds = [s.kind for s in decompose_to_native(CSWAP(0, 1, 2))]
    assert kinds.count("XX") == 8
    assert [s.kind for s in decompose_to_native(TOFFOLI(0, 1, 2))].count("XX") == 6
    assert [s.kind for s in decompose_to_native(CNOT(0, 1))].count("XX") == 1


@settings(max_examples=30)
@given(angles, angles, angles, angles)
def test_to_native_preserves_unitary(a, b, c, d):
    circ = Circuit(3, schedule([RZ(0, a), CSWAP(0, 1, 2), RY(2, b), XX(1, 2, c), CTRL_PAULI(2, 0, "Y"), RZ(1, d)]))
    nat = to_native(circ)
    assert all(g.kind in NATIVE_KINDS for g in nat.gates())
    assert phase_distance(circuit_unitary(circ.gates(), 3), circuit_unitary(nat.gates(), 3)) <= 1e-8


def test_is_clifford():
    assert is_clifford(RZ(0, math.pi / 2))
    assert not is_clifford(RZ(0, math.pi / 4))
    assert is_clifford(XX(0, 1, math.pi / 4))
    assert not is_clifford(XX(0, 1, 0.3))
    assert is_clifford(CNOT(0, 1)) and is_clifford(Gate("H", (0,)))
    assert not is_clifford(TOFFOLI(0, 1, 2)) and not is_clifford(CSWAP(0, 1, 2))


@given(angles, st.integers(-3, 3), st.sampled_from(["RZ", "RY", "XX"]))
def test_is_clifford_2pi_invariant(a, k, kind):
    q = (0,) if kind != "XX" else (0, 1)
    step = math.pi / 4 if kind == "XX" else math.pi / 2
    # shifting by 2 pi k moves the angle by rounding error, so skip the tolerance edge
    assume(abs(abs(math.remainder(a, step)) - CLIFFORD_TOL) > 1e-12)
    assert is_clifford(Gate(kind, q, a)) == is_clifford(Gate(kind, q, a + 2 * math.pi * k))


def test_rqc_counts():
    c = generate_rqc(4, 1, seed=1)
    assert c.count("XX") == 3
    assert c.count("RZ") + c.count("RY") == 18
    c5 = generate_rqc(4, 5, seed=1)
    assert c5.count("XX") == 15
    assert c5.count("RZ") + c5.count("RY") == 90
    assert generate_rqc(4, 5, seed=9) == generate_rqc(4, 5, seed=9)
    assert generate_rqc(4, 5, seed=9) != generate_rqc(4, 5, seed=10)
    with pytest.raises(ValueError):
        generate_rqc(1, 3, seed=0)


def test_rqc_structure():
    c = generate_rqc(5, 2, seed=4)
    assert all(g.kind in NATIVE_KINDS for g in c.gates())
    for layer in c.layers:
        qs = [q for op in layer.ops for q in op.qubits]
        assert len(qs) == len(set(qs))
    pairs = [g.qubits for g in c.gates() if g.kind == "XX"]
    assert pairs == [(0, 1), (2, 3), (1, 2), (3, 4)] * 2
    assert all(0 <= g.angle < 2 * math.pi for g in c.gates())


def test_layer_rejects_overlap():
    with pytest.raises(ValueError):
        Layer((RZ(0, 1.0), XX(0, 1, 1.0)))
    with pytest.raises(ValueError):
        Circuit(2, [Layer((RZ(2, 1.0),))])


def test_text_round_trip(tmp_path):
    c = generate_rqc(3, 2, seed=11)
    assert loads(dumps(c)) == c
    extra = Circuit(3, [Layer((Reset((1, 2)),)), Layer((CSWAP(0, 1, 2),), noiseless=True, quiet=frozenset({0})),
                        Layer((CTRL_PAULI(0, 1, "Y"), RZ(2, 0.1 + 1e-17)))], label="x", registers=((0,), (1, 2)))
    back = loads(dumps(extra))
    assert back == extra
    assert back.count("RESET") == 2


def test_loads_rejects_garbage():
    with pytest.raises(ValueError):
        loads("# width 2\nGATE FOO 0\nBARRIER\n")
