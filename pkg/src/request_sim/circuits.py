"""Gate set, layered circuits, native trapped-ion decompositions and RQC generation.

Native gates are ``RZ(a) = exp(-i a Z / 2)``, ``RY(b) = exp(-i b Y / 2)`` and
``XX(d) = exp(-i d X⊗X)``. A circuit is a list of layers; every gate in a layer
acts on its own qubits, and qubits untouched by a layer are idle for that step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .linalg import PAULI_MATRICES

NATIVE_KINDS = frozenset({"RZ", "RY", "XX"})
ROTATION_KINDS = NATIVE_KINDS
ARITY = {
    "RZ": 1, "RY": 1, "H": 1, "X": 1, "Z": 1,
    "XX": 2, "CNOT": 2, "CTRL_PAULI": 2,
    "TOFFOLI": 3, "CSWAP": 3,
}
CLIFFORD_TOL = 1e-9


@dataclass(frozen=True)
class Gate:
    """A gate on ordered qubits.

    For controlled kinds the control(s) come first: ``CNOT(c, t)``,
    ``TOFFOLI(c1, c2, t)``, ``CSWAP(c, a, b)``, ``CTRL_PAULI(c, t)`` with the
    Pauli letter in ``pauli``.
    """

    kind: str
    qubits: tuple[int, ...]
    angle: float = 0.0
    pauli: str = ""

    def __post_init__(self):
        if self.kind not in ARITY:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if len(self.qubits) != ARITY[self.kind]:
            raise ValueError(f"{self.kind} acts on {ARITY[self.kind]} qubits, got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"repeated operand in {self.kind}{self.qubits}")
        if min(self.qubits) < 0:
            raise ValueError("negative qubit index")
        if not math.isfinite(self.angle):
            raise ValueError("gate angle must be finite")
        if self.kind == "CTRL_PAULI" and self.pauli not in ("X", "Y", "Z"):
            raise ValueError("CTRL_PAULI needs pauli in {X, Y, Z}")

    @property
    def control(self) -> int | None:
        return self.qubits[0] if self.kind in ("CNOT", "TOFFOLI", "CSWAP", "CTRL_PAULI") else None

    def with_angle(self, angle: float) -> "Gate":
        return replace(self, angle=float(angle))


def RZ(q, a): return Gate("RZ", (q,), float(a))
def RY(q, b): return Gate("RY", (q,), float(b))
def XX(q0, q1, d): return Gate("XX", (q0, q1), float(d))
def CNOT(c, t): return Gate("CNOT", (c, t))
def TOFFOLI(c1, c2, t): return Gate("TOFFOLI", (c1, c2, t))
def CSWAP(c, a, b): return Gate("CSWAP", (c, a, b))
def CTRL_PAULI(c, t, pauli): return Gate("CTRL_PAULI", (c, t), pauli=pauli)


@dataclass(frozen=True)
class Reset:
    qubits: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(sorted(int(q) for q in self.qubits)))
        if not self.qubits or len(set(self.qubits)) != len(self.qubits):
            raise ValueError("reset needs distinct target qubits")


Instruction = Gate | Reset


@dataclass(frozen=True)
class Layer:
    """One time step.

    ``noiseless`` switches off every channel in the step (ideal controlled blocks);
    ``quiet`` lists qubits whose idling channel is suppressed in this step.
    """

    ops: tuple[Instruction, ...]
    noiseless: bool = False
    quiet: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "ops", tuple(self.ops))
        object.__setattr__(self, "quiet", frozenset(int(q) for q in self.quiet))
        seen: set[int] = set()
        for op in self.ops:
            if seen & set(op.qubits):
                raise ValueError(f"layer ops overlap on qubits {sorted(seen & set(op.qubits))}")
            seen |= set(op.qubits)

    @property
    def active(self) -> frozenset[int]:
        return frozenset(q for op in self.ops for q in op.qubits)


@dataclass(frozen=True)
class Circuit:
    width: int
    layers: tuple[Layer, ...] = ()
    label: str = ""
    seed: int | None = None
    # qubit groups that a global depolarizing channel treats as one register
    registers: tuple[tuple[int, ...], ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        if self.width < 1:
            raise ValueError("circuit width must be positive")
        for layer in self.layers:
            for q in layer.active | layer.quiet:
                if q >= self.width:
                    raise ValueError(f"qubit {q} outside circuit width {self.width}")
        if not self.registers:
            object.__setattr__(self, "registers", (tuple(range(self.width)),))

    @property
    def depth(self) -> int:
        return len(self.layers)

    def instructions(self) -> list[Instruction]:
        return [op for layer in self.layers for op in layer.ops]

    def gates(self) -> list[Gate]:
        return [op for op in self.instructions() if isinstance(op, Gate)]

    def count(self, kind: str) -> int:
        if kind == "RESET":
            return sum(len(op.qubits) for op in self.instructions() if isinstance(op, Reset))
        return sum(1 for g in self.gates() if g.kind == kind)

    def has_resets(self) -> bool:
        return any(isinstance(op, Reset) for op in self.instructions())

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.width != self.width:
            raise ValueError("cannot concatenate circuits of different width")
        return replace(self, layers=self.layers + other.layers)

    def shifted(self, offset: int, width: int) -> "Circuit":
        """Same circuit relabelled onto qubits ``offset..`` of a wider circuit."""
        layers = [
            Layer(tuple(_shift(op, offset) for op in layer.ops), layer.noiseless,
                  frozenset(q + offset for q in layer.quiet))
            for layer in self.layers
        ]
        return Circuit(width, layers, self.label, self.seed)

    def map_gates(self, fn) -> "Circuit":
        layers = [
            replace(layer, ops=tuple(fn(op) if isinstance(op, Gate) else op for op in layer.ops))
            for layer in self.layers
        ]
        return replace(self, layers=tuple(layers))


def _shift(op: Instruction, offset: int) -> Instruction:
    if isinstance(op, Reset):
        return Reset(tuple(q + offset for q in op.qubits))
    return replace(op, qubits=tuple(q + offset for q in op.qubits))


def schedule(ops: Iterable[Instruction], noiseless: bool = False,
             quiet: Iterable[int] = ()) -> list[Layer]:
    """Pack instructions into layers as early as possible, preserving order per qubit."""
    frontier: dict[int, int] = {}
    buckets: list[list[Instruction]] = []
    for op in ops:
        t = max((frontier.get(q, 0) for q in op.qubits), default=0)
        if t == len(buckets):
            buckets.append([])
        buckets[t].append(op)
        for q in op.qubits:
            frontier[q] = t + 1
    quiet = frozenset(quiet)
    return [Layer(tuple(b), noiseless, quiet) for b in buckets]


# ---------------------------------------------------------------- matrices

def rz_matrix(a: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])


def ry_matrix(b: float) -> np.ndarray:
    c, s = math.cos(b / 2), math.sin(b / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def xx_matrix(d: float) -> np.ndarray:
    xx = np.kron(PAULI_MATRICES["X"], PAULI_MATRICES["X"])
    return math.cos(d) * np.eye(4) - 1j * math.sin(d) * xx


_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)


def _controlled(u: np.ndarray, n_controls: int = 1) -> np.ndarray:
    d = u.shape[0] * 2**n_controls
    out = np.eye(d, dtype=complex)
    out[d - u.shape[0]:, d - u.shape[0]:] = u
    return out


_SWAP = np.eye(4, dtype=complex)[[0, 2, 1, 3]]


def gate_matrix(g: Gate) -> np.ndarray:
    """Unitary of ``g`` in the ordering of ``g.qubits`` (first operand = most significant)."""
    k = g.kind
    if k == "RZ":
        return rz_matrix(g.angle)
    if k == "RY":
        return ry_matrix(g.angle)
    if k == "XX":
        return xx_matrix(g.angle)
    if k == "H":
        return _H.copy()
    if k == "X":
        return PAULI_MATRICES["X"].copy()
    if k == "Z":
        return PAULI_MATRICES["Z"].copy()
    if k == "CNOT":
        return _controlled(PAULI_MATRICES["X"])
    if k == "CTRL_PAULI":
        return _controlled(PAULI_MATRICES[g.pauli])
    if k == "TOFFOLI":
        return _controlled(PAULI_MATRICES["X"], 2)
    if k == "CSWAP":
        return _controlled(_SWAP)
    raise ValueError(f"no matrix for gate kind {k!r}")


def embed(u: np.ndarray, qubits: Sequence[int], width: int) -> np.ndarray:
    """Full ``2**width`` matrix of ``u`` acting on ``qubits``."""
    k = len(qubits)
    rest = [q for q in range(width) if q not in qubits]
    perm = list(qubits) + rest
    full = np.kron(u, np.eye(2 ** (width - k)))
    t = full.reshape([2] * (2 * width))
    inv = np.argsort(perm)
    t = t.transpose(list(inv) + [width + i for i in inv])
    return t.reshape(2**width, 2**width)


def circuit_unitary(gates: Iterable[Gate], width: int) -> np.ndarray:
    u = np.eye(2**width, dtype=complex)
    for g in gates:
        u = embed(gate_matrix(g), g.qubits, width) @ u
    return u


def phase_distance(u: np.ndarray, v: np.ndarray) -> float:
    """``1 - |tr(U^dag V)| / dim``: zero iff equal up to a global phase."""
    return float(1 - abs(np.trace(u.conj().T @ v)) / u.shape[0])


# ---------------------------------------------------------- decompositions

def decompose_cswap(control: int, a: int, b: int) -> list[Gate]:
    return [CNOT(b, a), TOFFOLI(control, a, b), CNOT(b, a)]


def zyz_angles(u: np.ndarray) -> tuple[float, float, float]:
    """Angles with ``u ∝ RZ(a) @ RY(b) @ RZ(c)``."""
    u = np.asarray(u, dtype=complex)
    u = u / np.sqrt(np.linalg.det(u))
    b = 2 * math.atan2(abs(u[1, 0]), abs(u[0, 0]))
    # u = [[e^{-i(a+c)/2} cos, -e^{-i(a-c)/2} sin], [e^{i(a-c)/2} sin, e^{i(a+c)/2} cos]]
    if abs(u[0, 0]) > 1e-12 and abs(u[1, 0]) > 1e-12:
        s = 2 * np.angle(u[1, 1])
        d = 2 * np.angle(u[1, 0])
    elif abs(u[1, 0]) <= 1e-12:
        s, d = 2 * np.angle(u[1, 1]), 0.0
    else:
        s, d = 0.0, 2 * np.angle(u[1, 0])
    return (s + d) / 2, b, (s - d) / 2


def _wrap(angle: float) -> float:
    a = math.fmod(angle, 4 * math.pi)
    if a > 2 * math.pi:
        a -= 4 * math.pi
    elif a <= -2 * math.pi:
        a += 4 * math.pi
    return a


def single_qubit_native(u: np.ndarray, q: int) -> list[Gate]:
    """Shortest RZ-RY-RZ sequence (time order) implementing ``u`` up to phase."""
    a, b, c = zyz_angles(u)
    out = []
    for kind, ang in (("RZ", c), ("RY", b), ("RZ", a)):
        ang = _wrap(ang)
        if abs(math.remainder(ang, 4 * math.pi)) > 1e-12:
            out.append(Gate(kind, (q,), ang))
    return out


# CNOT = (H_t) CZ (H_t), CZ ∝ (H⊗H) XX(pi/4) (H⊗H) (RZ(-pi/2)⊗RZ(-pi/2))
def _cnot_native(c: int, t: int) -> list[Gate]:
    h, rzm = _H, rz_matrix(-math.pi / 2)
    before_c = h @ rzm
    before_t = h @ rzm @ h
    after_c = h
    after_t = h @ h
    return (single_qubit_native(before_c, c) + single_qubit_native(before_t, t)
            + [XX(c, t, math.pi / 4)]
            + single_qubit_native(after_c, c) + single_qubit_native(after_t, t))


_T = rz_matrix(math.pi / 4)
_TDG = rz_matrix(-math.pi / 4)


def _toffoli_cnot_form(c1: int, c2: int, t: int) -> list[tuple[str, object]]:
    # six-CNOT Toffoli; single-qubit entries carry (qubit, matrix)
    return [
        ("1q", (t, _H)),
        ("cx", (c2, t)), ("1q", (t, _TDG)),
        ("cx", (c1, t)), ("1q", (t, _T)),
        ("cx", (c2, t)), ("1q", (t, _TDG)),
        ("cx", (c1, t)), ("1q", (c2, _T)), ("1q", (t, _T)),
        ("1q", (t, _H)),
        ("cx", (c1, c2)), ("1q", (c1, _T)), ("1q", (c2, _TDG)),
        ("cx", (c1, c2)),
    ]


def _merge_native(seq: list[Gate]) -> list[Gate]:
    """Fuse runs of single-qubit natives on each wire into at most three rotations."""
    out: list[Gate] = []
    pending: dict[int, np.ndarray] = {}

    def flush(q: int):
        u = pending.pop(q, None)
        if u is not None:
            out.extend(single_qubit_native(u, q))

    for g in seq:
        if len(g.qubits) == 1:
            pending[g.qubits[0]] = gate_matrix(g) @ pending.get(g.qubits[0], np.eye(2))
        else:
            for q in g.qubits:
                flush(q)
            out.append(g)
    for q in sorted(pending):
        flush(q)
    return out


def decompose_to_native(g: Gate) -> list[Gate]:
    """Equivalent sequence (time order) of RZ/RY/XX gates, equal up to global phase."""
    k = g.kind
    if k in NATIVE_KINDS:
        return [g]
    if k in ("H", "X", "Z"):
        return single_qubit_native(gate_matrix(g), g.qubits[0])
    if k == "CNOT":
        return _merge_native(_cnot_native(*g.qubits))
    if k == "CTRL_PAULI":
        c, t = g.qubits
        if g.pauli == "X":
            return _merge_native(_cnot_native(c, t))
        # Z = H X H, Y = S X S^dag
        basis = _H if g.pauli == "Z" else rz_matrix(math.pi / 2)
        seq = (single_qubit_native(basis.conj().T, t) + _cnot_native(c, t)
               + single_qubit_native(basis, t))
        return _merge_native(seq)
    if k == "TOFFOLI":
        seq: list[Gate] = []
        for tag, arg in _toffoli_cnot_form(*g.qubits):
            if tag == "cx":
                seq += _cnot_native(*arg)
            else:
                q, u = arg
                seq += single_qubit_native(u, q)
        return _merge_native(seq)
    if k == "CSWAP":
        seq = []
        for sub in decompose_cswap(*g.qubits):
            seq += decompose_to_native(sub)
        return _merge_native(seq)
    raise ValueError(f"cannot decompose gate kind {k!r}")


def to_native(c: Circuit) -> Circuit:
    """Expand every non-native gate into its native sub-sequence, keeping layer flags."""
    layers: list[Layer] = []
    for layer in c.layers:
        if all(not isinstance(op, Gate) or op.kind in NATIVE_KINDS for op in layer.ops):
            layers.append(layer)
            continue
        seq: list[Instruction] = []
        for op in layer.ops:
            seq += decompose_to_native(op) if isinstance(op, Gate) else [op]
        layers += schedule(seq, layer.noiseless, layer.quiet)
    return replace(c, layers=tuple(layers))


# --------------------------------------------------------------- Cliffords

def _is_multiple(angle: float, step: float) -> bool:
    r = math.remainder(angle, step)
    return abs(r) <= CLIFFORD_TOL


def is_clifford(g: Gate) -> bool:
    if g.kind in ("RZ", "RY"):
        return _is_multiple(g.angle, math.pi / 2)
    if g.kind == "XX":
        return _is_multiple(g.angle, math.pi / 4)
    return g.kind in ("H", "X", "Z", "CNOT", "CTRL_PAULI")


# --------------------------------------------------------------------- RQC

def v_block(q: int, alpha: float, beta: float, gamma: float) -> list[Gate]:
    """``RZ(alpha) RY(beta) RZ(gamma)`` in time order."""
    return [RZ(q, gamma), RY(q, beta), RZ(q, alpha)]


def generate_rqc(n: int, p: int, seed: int | np.random.Generator | None = None) -> Circuit:
    """Random circuit from the trapped-ion ansatz.

    Each of the ``p`` layers runs XX gates on pairs (0,1),(2,3),... and then on
    (1,2),(3,4),... (open chain). Before every XX both operand wires get a
    ``v(alpha, beta, gamma)`` block. All angles are uniform on [0, 2pi).
    """
    if n < 2:
        raise ValueError("random circuits need at least two qubits")
    if p < 1:
        raise ValueError("need at least one layer")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    layers: list[Layer] = []
    two_pi = 2 * math.pi
    for _ in range(p):
        for start in (0, 1):
            pairs = [(q, q + 1) for q in range(start, n - 1, 2)]
            if not pairs:
                continue
            blocks = []
            for a, b in pairs:
                for q in (a, b):
                    alpha, beta, gamma = rng.uniform(0, two_pi, size=3)
                    blocks.append(v_block(q, alpha, beta, gamma))
            for step in range(3):
                layers.append(Layer(tuple(blk[step] for blk in blocks)))
            layers.append(Layer(tuple(XX(a, b, rng.uniform(0, two_pi)) for a, b in pairs)))
    label = f"rqc-N{n}-p{p}"
    return Circuit(n, layers, label, seed if isinstance(seed, int) else None)


# ------------------------------------------------------------- text format

def dumps(c: Circuit) -> str:
    """Line format: ``GATE kind q.. [angle|pauli]``, ``RESET q..``, ``NOISELESS``,
    ``QUIET q..`` and ``BARRIER`` closing each layer."""
    lines = [f"# width {c.width}"]
    if c.label:
        lines.append(f"# label {c.label}")
    if c.seed is not None:
        lines.append(f"# seed {c.seed}")
    if c.registers != (tuple(range(c.width)),):
        lines.append("# registers " + " | ".join(" ".join(map(str, r)) for r in c.registers))
    for layer in c.layers:
        if layer.noiseless:
            lines.append("NOISELESS")
        if layer.quiet:
            lines.append("QUIET " + " ".join(map(str, sorted(layer.quiet))))
        for op in layer.ops:
            if isinstance(op, Reset):
                lines.append("RESET " + " ".join(map(str, op.qubits)))
            else:
                parts = ["GATE", op.kind, *map(str, op.qubits)]
                if op.kind in ROTATION_KINDS:
                    parts.append(repr(float(op.angle)))
                elif op.kind == "CTRL_PAULI":
                    parts.append(op.pauli)
                lines.append(" ".join(parts))
        lines.append("BARRIER")
    return "\n".join(lines) + "\n"


def loads(text: str) -> Circuit:
    width = None
    label, seed, registers = "", None, ()
    layers: list[Layer] = []
    ops: list[Instruction] = []
    noiseless, quiet = False, frozenset()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition(" ")
            if key == "width":
                width = int(val)
            elif key == "label":
                label = val
            elif key == "seed":
                seed = int(val)
            elif key == "registers":
                registers = tuple(tuple(int(x) for x in r.split()) for r in val.split("|"))
            continue
        tok = line.split()
        try:
            if tok[0] == "GATE":
                kind = tok[1]
                arity = ARITY[kind]
                qubits = tuple(int(x) for x in tok[2:2 + arity])
                extra = tok[2 + arity:]
                if kind in ROTATION_KINDS:
                    ops.append(Gate(kind, qubits, float(extra[0])))
                elif kind == "CTRL_PAULI":
                    ops.append(Gate(kind, qubits, pauli=extra[0]))
                else:
                    ops.append(Gate(kind, qubits))
            elif tok[0] == "RESET":
                ops.append(Reset(tuple(int(x) for x in tok[1:])))
            elif tok[0] == "NOISELESS":
                noiseless = True
            elif tok[0] == "QUIET":
                quiet = frozenset(int(x) for x in tok[1:])
            elif tok[0] == "BARRIER":
                layers.append(Layer(tuple(ops), noiseless, quiet))
                ops, noiseless, quiet = [], False, frozenset()
            else:
                raise ValueError(f"unknown directive {tok[0]!r}")
        except (KeyError, IndexError, ValueError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    if ops:
        layers.append(Layer(tuple(ops), noiseless, quiet))
    if width is None:
        width = 1 + max((q for layer in layers for q in layer.active), default=0)
    return Circuit(width, layers, label, seed, registers)
