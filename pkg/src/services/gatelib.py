"""
Gate catalog, gate set assembly and circuit evaluation.

Qubit 0 is the most significant bit of the state index everywhere, so
CX2 is controlled on qubit 0 and ``kron(a, b)`` puts ``a`` on qubit 0.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import InvalidArgumentError, MatrixValidationError
from src.services.matcore import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    RngHandle,
    UnitaryMatrix,
    as_array,
    haar_unitary,
    operator_distance,
)
from src.services.matrix_io import load_unitary


class GateId(str, Enum):
    R1 = "R1"      # random 1-qubit, frozen at assembly
    P1 = "P1"      # 3-parameter 1-qubit
    T1 = "T1"
    TD1 = "TD1"
    S1 = "S1"
    Z1 = "Z1"
    X1 = "X1"
    H1 = "H1"
    F1 = "F1"      # 1-qubit gate loaded from file
    R2 = "R2"      # random 2-qubit, frozen at assembly
    NL2 = "NL2"    # canonical gate
    CX2 = "CX2"
    CZ2 = "CZ2"
    B2 = "B2"      # Berkeley gate
    SPE2 = "SPE2"  # special perfect entangler
    F2 = "F2"      # 2-qubit gate loaded from file


class GateKind(str, Enum):
    FIXED = "fixed"
    PARAMETRIC = "parametric"
    RANDOM = "random-frozen"
    FILE = "file"


# identifier -> (arity, kind, param count)
CATALOG: Dict[GateId, Tuple[int, GateKind, int]] = {
    GateId.R1: (1, GateKind.RANDOM, 0),
    GateId.P1: (1, GateKind.PARAMETRIC, 3),
    GateId.T1: (1, GateKind.FIXED, 0),
    GateId.TD1: (1, GateKind.FIXED, 0),
    GateId.S1: (1, GateKind.FIXED, 0),
    GateId.Z1: (1, GateKind.FIXED, 0),
    GateId.X1: (1, GateKind.FIXED, 0),
    GateId.H1: (1, GateKind.FIXED, 0),
    GateId.F1: (1, GateKind.FILE, 0),
    GateId.R2: (2, GateKind.RANDOM, 0),
    GateId.NL2: (2, GateKind.PARAMETRIC, 3),
    GateId.CX2: (2, GateKind.FIXED, 0),
    GateId.CZ2: (2, GateKind.FIXED, 0),
    GateId.B2: (2, GateKind.FIXED, 0),
    GateId.SPE2: (2, GateKind.PARAMETRIC, 1),
    GateId.F2: (2, GateKind.FILE, 0),
}

PARAM_BOUNDS: Dict[GateId, List[Tuple[float, float]]] = {
    GateId.P1: [(0.0, np.pi), (0.0, 2 * np.pi), (0.0, 2 * np.pi)],
    GateId.NL2: [(0.0, 1.0)] * 3,
    GateId.SPE2: [(0.0, 0.5)],
}


def rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=np.complex128)


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def p1_matrix(a1: float, a2: float, a3: float) -> np.ndarray:
    c, s = np.cos(a1 / 2), np.sin(a1 / 2)
    return np.array(
        [[c, -np.exp(1j * a3) * s],
         [np.exp(1j * a2) * s, np.exp(1j * (a2 + a3)) * c]],
        dtype=np.complex128,
    )


def p1_params(u) -> Tuple[Tuple[float, float, float], complex]:
    """
    Angles (a1, a2, a3) and phase g with u = g * P1(a1, a2, a3).

    a1 lands in [0, pi]; a2 and a3 are wrapped into [0, 2*pi).
    """
    m = as_array(u)
    if m.shape != (2, 2):
        raise InvalidArgumentError(f"expected a 2x2 matrix, got {m.shape}")
    c, s = abs(m[0, 0]), abs(m[1, 0])
    a1 = 2.0 * np.arctan2(s, c)
    if c > 1e-12:
        phi = np.angle(m[0, 0])
        if s > 1e-12:
            a2 = np.angle(m[1, 0]) - phi
            a3 = np.angle(-m[0, 1]) - phi
        else:
            a2 = 0.0
            a3 = np.angle(m[1, 1]) - phi
    else:
        a3 = 0.0
        phi = np.angle(-m[0, 1])
        a2 = np.angle(m[1, 0]) - phi
    a2 = float(np.mod(a2, 2 * np.pi))
    a3 = float(np.mod(a3, 2 * np.pi))
    return (float(a1), a2, a3), complex(np.exp(1j * phi))


# Bell basis (columns) and its (XX, YY, ZZ) eigenvalues; NL2 is diagonal here.
_BELL = np.array(
    [[1, 1, 0, 0],
     [0, 0, 1, 1],
     [0, 0, 1, -1],
     [1, -1, 0, 0]],
    dtype=np.complex128,
) / np.sqrt(2)
_BELL_SIGNS = np.array([
    [1, -1, 1],    # Phi+
    [-1, 1, 1],    # Phi-
    [1, 1, -1],    # Psi+
    [-1, -1, -1],  # Psi-
], dtype=float)


def nl2_matrix(tx: float, ty: float, tz: float) -> np.ndarray:
    """exp(-i pi/2 (tx XX + ty YY + tz ZZ)) via its Bell-basis diagonal."""
    phases = np.exp(-0.5j * np.pi * (_BELL_SIGNS @ np.array([tx, ty, tz], dtype=float)))
    return (_BELL * phases) @ _BELL.conj().T


_C1, _S1 = np.cos(np.pi / 8), np.sin(np.pi / 8)
_C3, _S3 = np.cos(3 * np.pi / 8), np.sin(3 * np.pi / 8)

FIXED_MATRICES: Dict[GateId, np.ndarray] = {
    GateId.T1: np.diag([1, np.exp(0.25j * np.pi)]).astype(np.complex128),
    GateId.TD1: np.diag([1, np.exp(-0.25j * np.pi)]).astype(np.complex128),
    GateId.S1: np.diag([1, 1j]).astype(np.complex128),
    GateId.Z1: PAULI_Z.copy(),
    GateId.X1: PAULI_X.copy(),
    GateId.H1: np.array([[1, 1], [1, -1]], dtype=np.complex128) / np.sqrt(2),
    GateId.CX2: np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=np.complex128
    ),
    GateId.CZ2: np.diag([1, 1, 1, -1]).astype(np.complex128),
    GateId.B2: np.array(
        [[_C1, 0, 0, 1j * _S1],
         [0, _C3, 1j * _S3, 0],
         [0, 1j * _S3, _C3, 0],
         [1j * _S1, 0, 0, _C1]],
        dtype=np.complex128,
    ),
}

CX = FIXED_MATRICES[GateId.CX2]
SWAP = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=np.complex128)
PAULIS = (PAULI_X, PAULI_Y, PAULI_Z)


@dataclass(frozen=True)
class GateSpec:
    identifier: GateId
    fabrication_cost: float = 1.0
    file_path: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "identifier", GateId(self.identifier))
        if self.fabrication_cost < 0 or not np.isfinite(self.fabrication_cost):
            raise InvalidArgumentError(f"{self.identifier.value}: fabrication cost must be finite and >= 0")
        if self.kind == GateKind.FILE and not self.file_path:
            raise InvalidArgumentError(f"{self.identifier.value} needs a file path")

    @property
    def arity(self) -> int:
        return CATALOG[self.identifier][0]

    @property
    def kind(self) -> GateKind:
        return CATALOG[self.identifier][1]

    @property
    def param_count(self) -> int:
        return CATALOG[self.identifier][2]


def gate_matrix(spec: GateSpec, params: Sequence[float] = (), rng: Optional[RngHandle] = None) -> UnitaryMatrix:
    """
    Matrix of one catalog gate.

    Args:
        spec: Gate to evaluate.
        params: Exactly ``spec.param_count`` reals.
        rng: Required for R1/R2, which sample once from the Haar measure.

    Returns:
        The gate's unitary.
    """
    params = [float(p) for p in params]
    if len(params) != spec.param_count:
        raise InvalidArgumentError(
            f"{spec.identifier.value} takes {spec.param_count} parameters, got {len(params)}"
        )
    gid = spec.identifier
    if gid == GateId.P1:
        return UnitaryMatrix(p1_matrix(*params))
    if gid == GateId.NL2:
        return UnitaryMatrix(nl2_matrix(*params))
    if gid == GateId.SPE2:
        return UnitaryMatrix(nl2_matrix(0.5, params[0], 0.0))
    if spec.kind == GateKind.RANDOM:
        if rng is None:
            raise InvalidArgumentError(f"{gid.value} needs an rng to sample its frozen matrix")
        return haar_unitary(2 ** spec.arity, rng)
    if spec.kind == GateKind.FILE:
        m = load_unitary(spec.file_path)
        if m.dim != 2 ** spec.arity:
            raise MatrixValidationError(
                f"{gid.value} expects dimension {2 ** spec.arity}, file has {m.dim}", spec.file_path
            )
        return m
    return UnitaryMatrix(FIXED_MATRICES[gid])


@dataclass(frozen=True, eq=False)
class EffectiveGate:
    """One entry of a gate set's gate table (a catalog gate or its dagger)."""
    label: str
    matrix: np.ndarray = field(repr=False)
    arity: int
    spec_index: int
    dagger: bool = False


@dataclass(frozen=True, eq=False)
class GateSet:
    specs: Tuple[GateSpec, ...]
    params: np.ndarray
    include_daggers: bool
    label: str
    seed: int
    gates: Tuple[EffectiveGate, ...] = field(repr=False)

    @property
    def n_base(self) -> int:
        return len(self.specs)

    def indices(self, arity: Optional[int] = None, daggers: Optional[bool] = None) -> List[int]:
        """
        Gate-table indices, optionally filtered by arity.

        ``daggers=None`` follows ``include_daggers``; SKD passes True.
        """
        use_daggers = self.include_daggers if daggers is None else daggers
        out = []
        for i, g in enumerate(self.gates):
            if g.dagger and not use_daggers:
                continue
            if arity is not None and g.arity != arity:
                continue
            out.append(i)
        return out

    def index_of(self, label: str) -> int:
        for i, g in enumerate(self.gates):
            if g.label == label:
                return i
        raise InvalidArgumentError(f"gate set {self.label!r} has no gate {label!r}")

    @property
    def max_arity(self) -> int:
        return max((g.arity for g in self.gates), default=0)

    @property
    def fabrication_costs(self) -> List[float]:
        return [s.fabrication_cost for s in self.specs]

    def with_params(self, params: Sequence[float], label: Optional[str] = None) -> "GateSet":
        """Same specs and frozen random/file gates, new parameter vector."""
        return _build(
            self.specs, np.asarray(params, dtype=float), self.include_daggers,
            label or self.label, self.seed, frozen=self.gates[: self.n_base],
        )

    def describe(self) -> dict:
        return {
            "label": self.label,
            "gates": [s.identifier.value for s in self.specs],
            "params": [float(p) for p in self.params],
            "fabrication_costs": self.fabrication_costs,
            "files": [s.file_path for s in self.specs if s.file_path],
            "include_daggers": self.include_daggers,
            "seed": self.seed,
        }


def parameter_bounds(specs: Iterable[GateSpec]) -> List[Tuple[float, float]]:
    bounds: List[Tuple[float, float]] = []
    for s in specs:
        bounds.extend(PARAM_BOUNDS.get(s.identifier, []))
    return bounds


def _base_labels(specs: Sequence[GateSpec]) -> List[str]:
    counts: Dict[GateId, int] = {}
    for s in specs:
        counts[s.identifier] = counts.get(s.identifier, 0) + 1
    seen: Dict[GateId, int] = {}
    labels = []
    for s in specs:
        name = s.identifier.value
        if counts[s.identifier] > 1:
            name = f"{name}_{seen.get(s.identifier, 0)}"
            seen[s.identifier] = seen.get(s.identifier, 0) + 1
        labels.append(name)
    return labels


def _build(specs, params, include_daggers, label, seed, frozen=None) -> GateSet:
    specs = tuple(specs)
    params = np.array(params, dtype=float).reshape(-1)
    expected = sum(s.param_count for s in specs)
    if params.size != expected:
        raise InvalidArgumentError(f"gate set {label!r} needs {expected} parameters, got {params.size}")

    rng = RngHandle(seed)
    labels = _base_labels(specs)
    base: List[EffectiveGate] = []
    offset = 0
    for i, spec in enumerate(specs):
        chunk = params[offset: offset + spec.param_count]
        offset += spec.param_count
        if frozen is not None and spec.param_count == 0:
            matrix = frozen[i].matrix
        else:
            matrix = as_array(gate_matrix(spec, chunk, rng.child(i)))
        base.append(EffectiveGate(labels[i], matrix, spec.arity, i))

    gates = list(base)
    for g in base:
        dg = g.matrix.conj().T
        if any(h.arity == g.arity and operator_distance(h.matrix, dg) < 1e-10 for h in gates):
            continue
        gates.append(EffectiveGate(g.label + "dg", dg, g.arity, g.spec_index, dagger=True))

    params.setflags(write=False)
    for g in gates:
        g.matrix.setflags(write=False)
    return GateSet(specs, params, bool(include_daggers), label, int(seed), tuple(gates))


def assemble_gateset(
    specs: Sequence[GateSpec],
    params: Sequence[float] = (),
    rng: Optional[RngHandle] = None,
    include_daggers: bool = False,
    label: str = "gs",
) -> GateSet:
    """
    Freeze a gate set: evaluate parametric gates, sample R1/R2 once, load F1/F2.

    The gate table holds the specs' matrices first, then the daggers that
    are not already present up to global phase. Random gates are sampled
    from ``rng.child(spec_index)`` so they only depend on the seed and their
    position.
    """
    seed = rng.seed if rng is not None else 0
    return _build(specs, params, include_daggers, label, seed)


@dataclass(frozen=True)
class Op:
    gate: int
    qubits: Tuple[int, ...]


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    ops: Tuple[Op, ...] = ()
    gateset: str = ""

    def __post_init__(self):
        if self.n_qubits < 1:
            raise InvalidArgumentError("a circuit needs at least one qubit")
        object.__setattr__(self, "ops", tuple(self.ops))
        for op in self.ops:
            if any(q < 0 or q >= self.n_qubits for q in op.qubits):
                raise InvalidArgumentError(f"qubit index out of range in {op} (n={self.n_qubits})")
            if len(set(op.qubits)) != len(op.qubits):
                raise InvalidArgumentError(f"repeated qubit in {op}")

    def __add__(self, other: "Circuit") -> "Circuit":
        if other.n_qubits != self.n_qubits or other.gateset != self.gateset:
            raise InvalidArgumentError("cannot concatenate circuits over different registers or gate sets")
        return Circuit(self.n_qubits, self.ops + other.ops, self.gateset)


def circuit_depth(c: Circuit) -> int:
    return len(c.ops)


def apply_gate(u: np.ndarray, gate: np.ndarray, qubits: Sequence[int], n_qubits: int) -> np.ndarray:
    """Left-multiply a (2^n x m) matrix by ``gate`` acting on ``qubits``."""
    k = len(qubits)
    t = u.reshape((2,) * n_qubits + (-1,))
    g = gate.reshape((2,) * (2 * k))
    t = np.tensordot(g, t, axes=(list(range(k, 2 * k)), list(qubits)))
    t = np.moveaxis(t, list(range(k)), list(qubits))
    return t.reshape(2 ** n_qubits, -1)


def lift(gate: np.ndarray, qubits: Sequence[int], n_qubits: int) -> np.ndarray:
    return apply_gate(np.eye(2 ** n_qubits, dtype=np.complex128), as_array(gate), qubits, n_qubits)


def circuit_unitary(c: Circuit, gs: GateSet) -> UnitaryMatrix:
    """Ops apply left to right, so the result is M_k ... M_1."""
    if c.gateset and c.gateset != gs.label:
        raise InvalidArgumentError(f"circuit targets gate set {c.gateset!r}, got {gs.label!r}")
    u = np.eye(2 ** c.n_qubits, dtype=np.complex128)
    for op in c.ops:
        if op.gate < 0 or op.gate >= len(gs.gates):
            raise InvalidArgumentError(f"gate index {op.gate} out of range")
        g = gs.gates[op.gate]
        if g.arity != len(op.qubits):
            raise InvalidArgumentError(f"{g.label} acts on {g.arity} qubits, op names {len(op.qubits)}")
        u = apply_gate(u, g.matrix, op.qubits, c.n_qubits)
    return UnitaryMatrix(u, tol=1e-8)


def inverse_circuit(c: Circuit, gs: GateSet) -> Tuple[Circuit, GateSet]:
    """
    Reversed-dagger circuit. Daggers missing from the table are appended to
    a copy of the gate set.
    """
    gates = list(gs.gates)
    ops = []
    for op in reversed(c.ops):
        dg = gates[op.gate].matrix.conj().T
        idx = next(
            (i for i, h in enumerate(gates) if h.arity == len(op.qubits) and np.allclose(h.matrix, dg, atol=1e-12)),
            None,
        )
        if idx is None:
            src = gates[op.gate]
            gates.append(EffectiveGate(src.label + "dg", dg, src.arity, src.spec_index, dagger=True))
            idx = len(gates) - 1
        ops.append(Op(idx, op.qubits))
    inv_gs = GateSet(gs.specs, gs.params, gs.include_daggers, gs.label, gs.seed, tuple(gates))
    return Circuit(c.n_qubits, tuple(ops), c.gateset), inv_gs


@dataclass(frozen=True, eq=False)
class MatrixOp:
    """A concrete-matrix gate application used by intermediate (pre-mapping) circuits."""
    name: str
    matrix: np.ndarray = field(repr=False)
    qubits: Tuple[int, ...]
    angles: Tuple[float, ...] = ()


@dataclass
class OpSequence:
    """
    Circuit over concrete matrices with an explicit global phase.

    QSD emits {CX, RY, RZ} sequences and KAK emits {entangler, P1} sequences
    in this form before the pipeline maps them onto a gate set.
    """
    n_qubits: int
    ops: List[MatrixOp] = field(default_factory=list)
    phase: complex = 1.0

    def append(self, name: str, matrix: np.ndarray, qubits: Sequence[int], angles: Sequence[float] = ()) -> None:
        self.ops.append(MatrixOp(name, np.asarray(matrix, dtype=np.complex128), tuple(qubits), tuple(angles)))

    def extend(self, other: "OpSequence") -> None:
        self.ops.extend(other.ops)
        self.phase *= other.phase

    def count(self, name: str) -> int:
        return sum(1 for op in self.ops if op.name == name)

    def unitary(self, with_phase: bool = True) -> np.ndarray:
        u = np.eye(2 ** self.n_qubits, dtype=np.complex128)
        for op in self.ops:
            u = apply_gate(u, op.matrix, op.qubits, self.n_qubits)
        return self.phase * u if with_phase else u

    def __len__(self) -> int:
        return len(self.ops)
