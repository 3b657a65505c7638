"""Random decomposition: sample circuits from the gate set and keep the best one."""

import time
from typing import List, Tuple

import numpy as np

from src.core.errors import InvalidArgumentError
from src.services.decomposition import DecompositionResult, FidelityMetric, Method, fidelity, make_result
from src.services.gatelib import Circuit, GateSet, Op, apply_gate
from src.services.matcore import RngHandle, as_array

TIE_TOL = 1e-12


def _sample_ops(gs: GateSet, gates: List[int], n_qubits: int, length: int, gen: np.random.Generator) -> List[Op]:
    ops = []
    for _ in range(length):
        g = gates[int(gen.integers(len(gates)))]
        arity = gs.gates[g].arity
        if arity == 1:
            qubits: Tuple[int, ...] = (int(gen.integers(n_qubits)),)
        else:
            qubits = tuple(int(q) for q in gen.choice(n_qubits, size=arity, replace=False))
        ops.append(Op(g, qubits))
    return ops


def rd_decompose(
    u,
    gs: GateSet,
    max_length: int = 20,
    trials: int = 500,
    rng: RngHandle = None,
    metric: FidelityMetric = FidelityMetric.PROCESS,
) -> DecompositionResult:
    """
    Best of ``trials`` random circuits.

    Each trial has a length drawn uniformly from [1, max_length]; every op is
    a uniform gate on uniform qubits (an ordered distinct pair for 2-qubit
    gates). The highest-fidelity circuit wins, the shorter one on ties.
    """
    started = time.perf_counter()
    target = as_array(u)
    n_qubits = target.shape[0].bit_length() - 1
    if trials < 1 or max_length < 1:
        raise InvalidArgumentError("RD needs trials >= 1 and max_length >= 1")
    gates = [i for i in gs.indices() if gs.gates[i].arity <= n_qubits]
    if not gates:
        raise InvalidArgumentError(f"gate set {gs.label!r} has no gate that fits {n_qubits} qubit(s)")
    gen = (rng or RngHandle(0)).generator
    dim = 2 ** n_qubits

    best_ops, best_fid = None, -1.0
    for _ in range(trials):
        length = int(gen.integers(1, max_length + 1))
        ops = _sample_ops(gs, gates, n_qubits, length, gen)
        m = np.eye(dim, dtype=np.complex128)
        for op in ops:
            m = apply_gate(m, gs.gates[op.gate].matrix, op.qubits, n_qubits)
        f = fidelity(target, m, metric)
        if f > best_fid + TIE_TOL or (abs(f - best_fid) <= TIE_TOL and len(ops) < len(best_ops)):
            best_ops, best_fid = ops, f

    circuit = Circuit(n_qubits, tuple(best_ops), gs.label)
    return make_result(circuit, gs, target, Method.RD, started, metric)
