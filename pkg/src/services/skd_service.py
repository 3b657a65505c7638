"""
Solovay-Kitaev decomposition of 1-qubit unitaries over a discrete gate set.

SU(2) elements are handled as unit quaternions q = (a, b, c, d) with
U = a I - i (b X + c Y + d Z). For two SU(2) matrices the phase-aligned
spectral distance is min(|q1 - q2|, |q1 + q2|), which is what the basis
scan and the deduplication use.
"""

import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree

from src.core.config import settings
from src.core.errors import InvalidArgumentError, ResourceLimitError
from src.core.logging import logger
from src.services.decomposition import DecompositionResult, FidelityMetric, Method, make_result
from src.services.gatelib import Circuit, GateSet, Op, rx, ry
from src.services.matcore import (
    PAULI_X,
    PAULI_Y,
    PAULI_Z,
    as_array,
    axis_angle,
    is_unitary,
    operator_distance,
    rotation_su2,
    to_su2,
)

DEDUP_TOL = 1e-6
TIE_TOL = 1e-12


def quaternion(u) -> np.ndarray:
    su = to_su2(u)
    return np.array([
        np.real(np.trace(su)) / 2,
        -np.imag(np.trace(su @ PAULI_X)) / 2,
        -np.imag(np.trace(su @ PAULI_Y)) / 2,
        -np.imag(np.trace(su @ PAULI_Z)) / 2,
    ])


def _quaternions(stack: np.ndarray) -> np.ndarray:
    """Batched ``quaternion`` for an (N, 2, 2) stack."""
    det = stack[:, 0, 0] * stack[:, 1, 1] - stack[:, 0, 1] * stack[:, 1, 0]
    su = stack / np.sqrt(det)[:, None, None]
    a = (su[:, 0, 0] + su[:, 1, 1]).real / 2
    b = -(su[:, 0, 1] + su[:, 1, 0]).imag / 2
    c = (su[:, 1, 0] - su[:, 0, 1]).real / 2
    d = -(su[:, 0, 0] - su[:, 1, 1]).imag / 2
    return np.stack([a, b, c, d], axis=1)


@dataclass(eq=False)
class SkBasis:
    """
    All distinct gate sequences up to ``max_depth``, in breadth-first order.

    Entry 0 is the empty sequence (identity). ``dagger`` maps each gate-table
    index used here to the index of its inverse.
    """
    gateset: str
    max_depth: int
    sequences: List[Tuple[int, ...]]
    matrices: np.ndarray = field(repr=False)
    quats: np.ndarray = field(repr=False)
    dagger: Dict[int, int]

    def __len__(self) -> int:
        return len(self.sequences)


def _dagger_map(gs: GateSet, indices: List[int]) -> Dict[int, int]:
    out = {}
    for i in indices:
        dg = gs.gates[i].matrix.conj().T
        match = [j for j in indices if operator_distance(gs.gates[j].matrix, dg) < 1e-10]
        if not match:
            raise InvalidArgumentError(f"{gs.gates[i].label} has no inverse in the SK gate list")
        out[i] = match[0]
    return out


def skd_build_basis(gs: GateSet, depth: int, cap: Optional[int] = None) -> SkBasis:
    """
    Enumerate gate sequences of length <= depth over the 1-qubit gates and their daggers.

    Args:
        gs: Gate set; only its 1-qubit gates are used.
        depth: Maximum sequence length.
        cap: Maximum number of stored entries (settings.SK_BASIS_CAP by default).

    Returns:
        SkBasis with near-duplicates (distance < 1e-6) removed.

    Raises:
        ResourceLimitError: the basis outgrows ``cap``.
    """
    if depth < 1:
        raise InvalidArgumentError("SK basis depth must be >= 1")
    cap = settings.SK_BASIS_CAP if cap is None else cap
    gates = gs.indices(arity=1, daggers=True)
    if not gates:
        raise InvalidArgumentError(f"gate set {gs.label!r} has no 1-qubit gates for SKD")
    mats = np.stack([gs.gates[i].matrix for i in gates])

    sequences: List[Tuple[int, ...]] = [()]
    matrices = [np.eye(2, dtype=np.complex128)]
    quats = [np.array([1.0, 0.0, 0.0, 0.0])]
    frontier = [0]

    for level in range(1, depth + 1):
        if not frontier:
            break
        front = np.stack([matrices[i] for i in frontier])
        # candidate (f, g) = gate g applied after sequence f
        cand = np.einsum("gij,fjk->fgik", mats, front).reshape(-1, 2, 2)
        cand_seq = [sequences[f] + (g,) for f in frontier for g in gates]
        cand_q = _quaternions(cand)

        stored = np.array(quats)
        tree = cKDTree(np.vstack([stored, -stored]))
        dist, _ = tree.query(cand_q, k=1, distance_upper_bound=DEDUP_TOL)
        fresh = np.flatnonzero(~np.isfinite(dist))

        new_frontier = []
        if fresh.size:
            fq = cand_q[fresh]
            ftree = cKDTree(np.vstack([fq, -fq]))
            neighbours = ftree.query_ball_point(fq, r=DEDUP_TOL)
            dropped = np.zeros(fresh.size, dtype=bool)
            for pos in range(fresh.size):
                if dropped[pos]:
                    continue
                for nb in neighbours[pos]:
                    other = nb % fresh.size
                    if other > pos:
                        dropped[other] = True
                idx = fresh[pos]
                sequences.append(cand_seq[idx])
                matrices.append(cand[idx])
                quats.append(cand_q[idx])
                new_frontier.append(len(sequences) - 1)
                if len(sequences) > cap:
                    raise ResourceLimitError(
                        f"SK basis exceeds {cap} entries at length {level}; use a smaller basis depth"
                    )
        frontier = new_frontier

    logger.debug(f"SK basis for {gs.label!r}: {len(sequences)} entries up to length {depth}")
    return SkBasis(
        gateset=gs.label,
        max_depth=depth,
        sequences=sequences,
        matrices=np.stack(matrices),
        quats=np.stack(quats),
        dagger=_dagger_map(gs, gates),
    )


def skd_best_approx(u, basis: SkBasis) -> Tuple[Tuple[int, ...], float]:
    """Linear scan for the entry closest to ``u``; ties go to the earliest (shortest) entry."""
    if len(basis) == 0:
        raise InvalidArgumentError("empty SK basis")
    arr = as_array(u)
    if arr.shape != (2, 2):
        raise InvalidArgumentError(f"SKD works on 2x2 matrices, got {arr.shape}")
    q = quaternion(arr)
    d = np.minimum(np.linalg.norm(basis.quats - q, axis=1), np.linalg.norm(basis.quats + q, axis=1))
    best = int(np.flatnonzero(d <= d.min() + TIE_TOL)[0])
    return basis.sequences[best], operator_distance(arr, basis.matrices[best])


def _commutator_angle(theta: float) -> float:
    """Solve sin(theta/2) = 2 s sqrt(1 - s^2), s = sin^2(phi/2), on the branch s = sin(theta/4)."""
    return float(2 * np.arcsin(np.sqrt(np.sin(theta / 4))))


def _align(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """SU(2) element rotating Bloch axis ``src`` onto ``dst``."""
    cross = np.cross(src, dst)
    sin_a = np.linalg.norm(cross)
    cos_a = float(np.clip(np.dot(src, dst), -1.0, 1.0))
    if sin_a < 1e-14:
        if cos_a > 0:
            return np.eye(2, dtype=np.complex128)
        perp = np.cross(src, [1.0, 0.0, 0.0])
        if np.linalg.norm(perp) < 1e-6:
            perp = np.cross(src, [0.0, 1.0, 0.0])
        return rotation_su2(perp / np.linalg.norm(perp), np.pi)
    return rotation_su2(cross / sin_a, float(np.arctan2(sin_a, cos_a)))


def skd_group_commutator(delta) -> Tuple[np.ndarray, np.ndarray]:
    """
    Balanced group commutator: V W V^dag W^dag = delta up to global phase.

    V and W are rotations by the same angle phi about orthogonal axes, with
    sin(theta/2) = 2 sin^2(phi/2) sqrt(1 - sin^4(phi/2)) for delta's angle theta.
    """
    arr = as_array(delta)
    if arr.shape != (2, 2) or not is_unitary(arr, 1e-8):
        raise InvalidArgumentError("group commutator needs a 2x2 unitary")
    axis, theta = axis_angle(arr)
    if theta < 1e-15:
        eye = np.eye(2, dtype=np.complex128)
        return eye, eye.copy()

    phi = _commutator_angle(theta)
    v_hat, w_hat = rx(phi), ry(phi)
    comm = v_hat @ w_hat @ v_hat.conj().T @ w_hat.conj().T
    comm_axis, _ = axis_angle(comm)
    s = _align(comm_axis, axis)
    return s @ v_hat @ s.conj().T, s @ w_hat @ s.conj().T


class SolovayKitaev:
    """Recursive SK approximation over a fixed basis, keeping the best result seen."""

    def __init__(self, basis: SkBasis, gates: Dict[int, np.ndarray]):
        self.basis = basis
        self.gates = gates

    def _dagger(self, seq: Tuple[int, ...]) -> Tuple[int, ...]:
        return tuple(self.basis.dagger[g] for g in reversed(seq))

    def _matrix(self, seq: Tuple[int, ...]) -> np.ndarray:
        u = np.eye(2, dtype=np.complex128)
        for g in seq:
            u = self.gates[g] @ u
        return u

    def approximate(self, u: np.ndarray, n: int) -> Tuple[Tuple[int, ...], np.ndarray, float]:
        if n == 0:
            seq, dist = skd_best_approx(u, self.basis)
            return seq, self._matrix(seq), dist

        prev_seq, prev_m, prev_d = self.approximate(u, n - 1)
        v, w = skd_group_commutator(u @ prev_m.conj().T)
        v_seq, v_m, _ = self.approximate(v, n - 1)
        w_seq, w_m, _ = self.approximate(w, n - 1)

        # operator V W V^dag W^dag U_prev, so U_prev acts first in time
        seq = prev_seq + self._dagger(w_seq) + self._dagger(v_seq) + w_seq + v_seq
        m = v_m @ w_m @ v_m.conj().T @ w_m.conj().T @ prev_m
        dist = operator_distance(u, m)
        if dist >= prev_d:
            return prev_seq, prev_m, prev_d
        return seq, m, dist


def skd_decompose(
    u,
    gs: GateSet,
    recursion: int = 2,
    basis_depth: int = 6,
    basis: Optional[SkBasis] = None,
    metric: FidelityMetric = FidelityMetric.PROCESS,
) -> DecompositionResult:
    """
    Approximate a 1-qubit unitary with the Solovay-Kitaev recursion.

    Args:
        u: 2x2 target.
        gs: Gate set (its 1-qubit gates and their daggers are used).
        recursion: Recursion level n >= 0.
        basis_depth: Sequence length of the SK basis when ``basis`` is not given.
        basis: Prebuilt basis to share across calls.
        metric: Fidelity reported on the result.

    Returns:
        DecompositionResult with method SKD.
    """
    started = time.perf_counter()
    arr = as_array(u)
    if arr.shape != (2, 2):
        raise InvalidArgumentError(f"SKD works on 2x2 matrices, got {arr.shape}")
    if recursion < 0:
        raise InvalidArgumentError("recursion must be >= 0")
    basis = basis or skd_build_basis(gs, basis_depth)
    engine = SolovayKitaev(basis, {i: gs.gates[i].matrix for i in basis.dagger})
    seq, _, dist = engine.approximate(arr, recursion)
    circuit = Circuit(1, tuple(Op(g, (0,)) for g in seq), gs.label)
    return make_result(circuit, gs, arr, Method.SKD, started, metric, distance=dist)
