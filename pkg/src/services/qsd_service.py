"""
Quantum Shannon decomposition onto {CX, RY, RZ}.

    U = L * M * R^dag                       (cosine-sine, M a multiplexed RY)
    diag(A1, A2) = (I (x) V)(D + D^dag)(I (x) W)   (demultiplexing, multiplexed RZ)

Recursion stops at 2-qubit blocks, which go through KAK with CX as the
entangler. Multiplexed rotations are lowered to Gray-code CX ladders with
2^k CX for k controls.
"""

from typing import List, Sequence

import numpy as np
import scipy.linalg

from src.core.errors import InvalidArgumentError
from src.core.logging import logger
from src.services.gatelib import CX, OpSequence, ry, rz
from src.services.kak_service import kak_resynthesize
from src.services.matcore import as_array, is_unitary

ANGLE_TOL = 1e-12


def _emit_rotation(seq: OpSequence, axis: str, angle: float, qubit: int) -> None:
    turns = np.round(angle / (2 * np.pi))
    if abs(angle - 2 * np.pi * turns) < ANGLE_TOL:
        # R(2 pi m) = (-1)^m I
        if int(turns) % 2:
            seq.phase *= -1
        return
    m = ry(angle) if axis == "RY" else rz(angle)
    seq.append(axis, m, (qubit,), (float(angle),))


def _gray(j: int) -> int:
    return j ^ (j >> 1)


def multiplexed_rotation(seq: OpSequence, axis: str, angles: Sequence[float],
                         controls: Sequence[int], target: int) -> None:
    """
    Append a uniformly controlled rotation: for control state x (controls[0]
    is the most significant bit) the target gets R(angles[x]).
    """
    angles = np.asarray(angles, dtype=float)
    k = len(controls)
    if angles.size != 2 ** k:
        raise InvalidArgumentError(f"{k} controls need {2 ** k} angles, got {angles.size}")
    if np.max(np.abs(angles - angles[0])) < ANGLE_TOL:
        _emit_rotation(seq, axis, angles[0], target)
        return

    n = 2 ** k
    x = np.arange(n)
    gray = np.array([_gray(j) for j in range(n)])
    parity = np.array([[bin(gray[j] & xi).count("1") & 1 for j in range(n)] for xi in x])
    signs = 1 - 2 * parity
    thetas = signs.T @ angles / n

    for j in range(n):
        _emit_rotation(seq, axis, thetas[j], target)
        if j == n - 1:
            bit = k - 1
        else:
            bit = ((j + 1) & -(j + 1)).bit_length() - 1
        seq.append("CX", CX, (controls[k - 1 - bit], target))


def _append_two_qubit(seq: OpSequence, u: np.ndarray, qubits: Sequence[int]) -> None:
    synth = kak_resynthesize(u, CX, max_apps=3)
    seq.phase *= synth.sequence.phase
    for op in synth.sequence.ops:
        if op.name == "E":
            seq.append("CX", CX, (qubits[0], qubits[1]))
            continue
        a1, a2, a3 = op.angles
        q = qubits[op.qubits[0]]
        # P1(a1, a2, a3) = e^{i(a2+a3)/2} Rz(a2) Ry(a1) Rz(a3)
        seq.phase *= np.exp(0.5j * (a2 + a3))
        _emit_rotation(seq, "RZ", a3, q)
        _emit_rotation(seq, "RY", a1, q)
        _emit_rotation(seq, "RZ", a2, q)


def _demultiplex(seq: OpSequence, a1: np.ndarray, a2: np.ndarray, qubits: List[int]) -> None:
    """Append diag(a1, a2), block chosen by qubits[0]."""
    t, v = scipy.linalg.schur(a1 @ a2.conj().T, output="complex")
    d = np.sqrt(np.diag(t))
    w = (d[:, None] * v.conj().T) @ a2
    _decompose(seq, w, qubits[1:])
    multiplexed_rotation(seq, "RZ", -2.0 * np.angle(d), qubits[1:], qubits[0])
    _decompose(seq, v, qubits[1:])


def _decompose(seq: OpSequence, u: np.ndarray, qubits: List[int]) -> None:
    dim = u.shape[0]
    tr = np.trace(u) / dim
    if abs(abs(tr) - 1.0) < 1e-12 and np.max(np.abs(u - tr * np.eye(dim))) < 1e-12:
        seq.phase *= tr / abs(tr)
        return
    if len(qubits) == 1:
        raise InvalidArgumentError("QSD recursion reached a single qubit")
    if len(qubits) == 2:
        _append_two_qubit(seq, u, qubits)
        return

    h = dim // 2
    left, cs, right_dag = scipy.linalg.cossin(u, p=h, q=h)
    thetas = np.arctan2(np.diag(cs[h:, :h]), np.diag(cs[:h, :h]))

    _demultiplex(seq, right_dag[:h, :h], right_dag[h:, h:], qubits)
    multiplexed_rotation(seq, "RY", 2.0 * thetas, qubits[1:], qubits[0])
    _demultiplex(seq, left[:h, :h], left[h:, h:], qubits)


def qsd_decompose(u) -> OpSequence:
    """
    Exact synthesis of an n-qubit unitary (n >= 2) over {CX, RY, RZ}.

    Returns:
        An OpSequence whose ``unitary()`` (phase included) equals ``u``.
    """
    arr = as_array(u)
    dim = arr.shape[0]
    if arr.ndim != 2 or arr.shape[1] != dim or dim < 4 or dim & (dim - 1):
        raise InvalidArgumentError(f"QSD needs a 2^n x 2^n matrix with n >= 2, got {arr.shape}")
    if not is_unitary(arr, 1e-8):
        raise InvalidArgumentError("QSD input is not unitary")
    n = dim.bit_length() - 1
    seq = OpSequence(n)
    _decompose(seq, arr, list(range(n)))
    logger.debug(f"QSD on {n} qubits: {seq.count('CX')} CX, {len(seq)} ops")
    return seq
