"""
Routing pipeline: QSD for n >= 3 qubits, KAK for 2-qubit blocks and entangler
substitution, then SKD or RD for the remaining 1-qubit unitaries.
"""

import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.core.config import settings
from src.core.errors import InvalidArgumentError
from src.core.logging import logger
from src.services.decomposition import DecompositionResult, FidelityMetric, Method, make_result
from src.services.gatelib import CX, Circuit, GateSet, Op, OpSequence
from src.services.kak_service import KakSynthesis, kak_resynthesize
from src.services.matcore import RngHandle, as_array, operator_distance
from src.services.qsd_service import qsd_decompose
from src.services.rd_service import rd_decompose
from src.services.skd_service import SkBasis, skd_build_basis, skd_decompose


class OneQubitMethod(str, Enum):
    SKD = "SKD"
    RD = "RD"


class TwoQubitMethod(str, Enum):
    KAK = "KAK"
    RD = "RD"


class MultiQubitMethod(str, Enum):
    QSD = "QSD"
    RD = "RD"


@dataclass(frozen=True)
class PipelineConfig:
    oneq: OneQubitMethod = OneQubitMethod.SKD
    twoq: TwoQubitMethod = TwoQubitMethod.KAK
    nq: MultiQubitMethod = MultiQubitMethod.QSD
    basis_depth: int = 6
    recursion: int = 2
    rd_trials: int = 500
    rd_max_length: int = 20
    kak_max_apps: int = 3
    metric: FidelityMetric = FidelityMetric.PROCESS


class Pipeline:
    """
    Decomposes targets of any supported size onto one gate set.

    The SK basis is built on first use and shared by every call, including
    calls from worker threads.
    """

    def __init__(self, gs: GateSet, cfg: PipelineConfig = PipelineConfig()):
        self.gs = gs
        self.cfg = cfg
        self._basis: Optional[SkBasis] = None
        self._lock = threading.Lock()

    @property
    def basis(self) -> SkBasis:
        with self._lock:
            if self._basis is None:
                self._basis = skd_build_basis(self.gs, self.cfg.basis_depth)
            return self._basis

    def _one_qubit(self, u: np.ndarray, rng: RngHandle, metric: FidelityMetric) -> DecompositionResult:
        if self.cfg.oneq == OneQubitMethod.RD:
            return rd_decompose(u, self.gs, self.cfg.rd_max_length, self.cfg.rd_trials, rng, metric)
        return skd_decompose(u, self.gs, self.cfg.recursion, basis=self.basis, metric=metric)

    def _lower(self, seq: OpSequence, entangler: int, rng: RngHandle) -> List[Op]:
        """
        Map an {entangler-or-CX, 1-qubit} sequence onto the gate set.

        Consecutive 1-qubit ops on a qubit are merged into one block before the
        1-qubit method runs; blocks equal to the identity up to phase vanish.
        """
        e_matrix = self.gs.gates[entangler].matrix
        cx_program: Optional[KakSynthesis] = None
        if seq.count("CX") and operator_distance(e_matrix, CX) > 1e-12:
            cx_program = kak_resynthesize(CX, e_matrix, self.cfg.kak_max_apps, rng.child(0))

        items: List[Tuple] = []
        for op in seq.ops:
            if op.name == "E" or (op.name == "CX" and cx_program is None):
                items.append(("2q", op.qubits))
            elif op.name == "CX":
                for sub in cx_program.sequence.ops:
                    mapped = tuple(op.qubits[q] for q in sub.qubits)
                    items.append(("2q", mapped) if sub.name == "E" else ("1q", mapped[0], sub.matrix))
            else:
                items.append(("1q", op.qubits[0], op.matrix))

        ops: List[Op] = []
        pending: Dict[int, np.ndarray] = {}
        counter = [1]

        def flush(q: int) -> None:
            block = pending.pop(q, None)
            if block is None:
                return
            tr = np.trace(block) / 2
            if abs(abs(tr) - 1.0) < 1e-12:
                return
            res = self._one_qubit(block, rng.child(counter[0]), FidelityMetric.PROCESS)
            counter[0] += 1
            ops.extend(Op(o.gate, (q,)) for o in res.circuit.ops)

        for item in items:
            if item[0] == "1q":
                _, q, m = item
                pending[q] = m @ pending.get(q, np.eye(2, dtype=np.complex128))
            else:
                for q in item[1]:
                    flush(q)
                ops.append(Op(entangler, tuple(item[1])))
        for q in sorted(pending):
            flush(q)
        return ops

    def _entanglers(self) -> List[int]:
        found = self.gs.indices(arity=2)
        if not found:
            raise InvalidArgumentError(f"gate set {self.gs.label!r} has no 2-qubit gate for the KAK stage")
        return found

    def decompose(self, u, rng: Optional[RngHandle] = None, metric: Optional[FidelityMetric] = None) -> DecompositionResult:
        started = time.perf_counter()
        rng = rng or RngHandle(0)
        metric = metric or self.cfg.metric
        target = as_array(u)
        dim = target.shape[0]
        n = dim.bit_length() - 1
        if target.ndim != 2 or target.shape[1] != dim or dim < 2 or dim & (dim - 1):
            raise InvalidArgumentError(f"unsupported target shape {target.shape}")
        if n > settings.MAX_QUBITS:
            raise InvalidArgumentError(f"{n}-qubit targets exceed the {settings.MAX_QUBITS}-qubit limit")

        if n == 1:
            return self._one_qubit(target, rng, metric)
        if (n == 2 and self.cfg.twoq == TwoQubitMethod.RD) or (n > 2 and self.cfg.nq == MultiQubitMethod.RD):
            return rd_decompose(target, self.gs, self.cfg.rd_max_length, self.cfg.rd_trials, rng, metric)

        qsd = qsd_decompose(target) if n > 2 else None
        best: Optional[DecompositionResult] = None
        for k, e in enumerate(self._entanglers()):
            sub = rng.child(k)
            if qsd is None:
                synth = kak_resynthesize(target, self.gs.gates[e].matrix, self.cfg.kak_max_apps, sub.child(0))
                seq = synth.sequence
            else:
                seq = qsd
            circuit = Circuit(n, tuple(self._lower(seq, e, sub.child(1))), self.gs.label)
            result = make_result(circuit, self.gs, target, Method.PIPELINE, started, metric)
            logger.debug(f"pipeline via {self.gs.gates[e].label}: fidelity {result.fidelity:.6f}, depth {result.depth}")
            if best is None or result.fidelity > best.fidelity + 1e-12:
                best = result
        best.elapsed = time.perf_counter() - started
        return best


def decompose_pipeline(u, gs: GateSet, cfg: PipelineConfig = PipelineConfig(),
                       rng: Optional[RngHandle] = None) -> DecompositionResult:
    return Pipeline(gs, cfg).decompose(u, rng)
