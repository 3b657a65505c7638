"""
Decomposition results shared by every engine, and the circuit text format.

    gateset <label>
    qubits <n>
    op <gate-label> <qubit> [<qubit>]
    ...
    fidelity <f>
    depth <d>
"""

import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np

from src.core.errors import InvalidArgumentError
from src.services.gatelib import Circuit, GateSet, Op, circuit_depth, circuit_unitary
from src.services.matcore import as_array, process_fidelity, state_fidelity


class Method(str, Enum):
    SKD = "SKD"
    RD = "RD"
    KAK = "KAK"
    QSD = "QSD"
    PIPELINE = "pipeline"


class FidelityMetric(str, Enum):
    PROCESS = "process"
    STATE = "state"
    AUTO = "auto"  # state for state-preparation datasets, process otherwise


def fidelity(target, candidate, metric: FidelityMetric = FidelityMetric.PROCESS) -> float:
    if metric == FidelityMetric.STATE:
        return state_fidelity(target, candidate)
    if metric == FidelityMetric.AUTO:
        raise InvalidArgumentError("'auto' fidelity must be resolved against a dataset first")
    return process_fidelity(target, candidate)


@dataclass
class DecompositionResult:
    circuit: Circuit
    fidelity: float
    depth: int
    method: Method
    elapsed: float
    gateset: GateSet
    metric: FidelityMetric = FidelityMetric.PROCESS
    distance: Optional[float] = None

    def unitary(self) -> np.ndarray:
        return as_array(circuit_unitary(self.circuit, self.gateset))


def make_result(
    circuit: Circuit,
    gs: GateSet,
    target,
    method: Method,
    started: float,
    metric: FidelityMetric = FidelityMetric.PROCESS,
    distance: Optional[float] = None,
) -> DecompositionResult:
    """Build a result whose fidelity is recomputed from the circuit itself."""
    u = circuit_unitary(circuit, gs)
    return DecompositionResult(
        circuit=circuit,
        fidelity=fidelity(target, u, metric),
        depth=circuit_depth(circuit),
        method=method,
        elapsed=time.perf_counter() - started,
        gateset=gs,
        metric=metric,
        distance=distance,
    )


def serialize_circuit(c: Circuit, gs: GateSet, result: Optional[DecompositionResult] = None) -> str:
    lines = [f"gateset {gs.label}", f"qubits {c.n_qubits}"]
    for op in c.ops:
        lines.append(" ".join(["op", gs.gates[op.gate].label, *map(str, op.qubits)]))
    if result is not None:
        lines.append(f"fidelity {result.fidelity!r}")
        lines.append(f"depth {result.depth}")
    return "\n".join(lines) + "\n"


def parse_circuit(text: str, gs: GateSet) -> Circuit:
    """Inverse of ``serialize_circuit``; trailing fidelity/depth lines are ignored."""
    n_qubits = None
    label = gs.label
    ops = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split()
        if not parts or parts[0] in ("fidelity", "depth"):
            continue
        key = parts[0]
        if key == "gateset":
            label = parts[1] if len(parts) > 1 else ""
            if label != gs.label:
                raise InvalidArgumentError(f"line {lineno}: circuit targets gate set {label!r}, got {gs.label!r}")
        elif key == "qubits":
            n_qubits = int(parts[1])
        elif key == "op":
            if len(parts) < 3:
                raise InvalidArgumentError(f"line {lineno}: malformed op {raw!r}")
            ops.append(Op(gs.index_of(parts[1]), tuple(int(q) for q in parts[2:])))
        else:
            raise InvalidArgumentError(f"line {lineno}: unknown directive {key!r}")
    if n_qubits is None:
        raise InvalidArgumentError("circuit text has no 'qubits' line")
    return Circuit(n_qubits, tuple(ops), label)


def write_circuit(path: Union[str, Path], result: DecompositionResult) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_circuit(result.circuit, result.gateset, result), encoding="utf-8")
    return path
