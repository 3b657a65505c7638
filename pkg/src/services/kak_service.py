"""
Cartan (KAK) decomposition of 2-qubit unitaries and re-synthesis onto an entangler.

Any U in U(4) factors as

    U = phase * (k3 (x) k4) * NL2(tx, ty, tz) * (k1 (x) k2)

with NL2(t) = exp(-i pi/2 (tx XX + ty YY + tz ZZ)) and t in the chamber
tx >= ty >= tz >= 0, tx + ty <= 1, where tx > 1/2 only when tz > 0.

The diagonalisation runs in the magic basis, where local gates become real
orthogonal matrices and the interaction becomes diagonal.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.optimize

from src.core.config import settings
from src.core.errors import InternalConsistencyError, InvalidArgumentError
from src.core.logging import logger
from src.services.gatelib import (
    CX,
    FIXED_MATRICES,
    GateId,
    OpSequence,
    PAULIS,
    nl2_matrix,
    p1_matrix,
    p1_params,
    rx,
    ry,
    rz,
)
from src.services.matcore import (
    PAULI_I,
    RngHandle,
    as_array,
    eig_unitary_symmetric,
    is_unitary,
    kron,
    nearest_kron_factors,
    process_fidelity,
)

MAGIC = np.array(
    [[1, 0, 0, 1j],
     [0, 1j, 1, 0],
     [0, 1j, -1, 0],
     [1, 0, 0, -1j]],
    dtype=np.complex128,
) * np.sqrt(0.5)
MAGIC_DAG = MAGIC.conj().T

# Maps the four magic-basis eigenphases to (global phase, x, y, z).
GAMMA = np.array(
    [[1, 1, 1, 1],
     [1, 1, -1, -1],
     [-1, 1, -1, 1],
     [1, -1, -1, 1]],
    dtype=float,
) * 0.25

CX_CLASS = (0.5, 0.0, 0.0)
CLASS_TOL = 1e-7
EXACT_THRESHOLD = 1.0 - 1e-9


@dataclass(frozen=True, eq=False)
class CanonicalForm:
    k1: np.ndarray = field(repr=False)
    k2: np.ndarray = field(repr=False)
    k3: np.ndarray = field(repr=False)
    k4: np.ndarray = field(repr=False)
    t: Tuple[float, float, float]
    phase: complex

    def unitary(self) -> np.ndarray:
        return self.phase * kron(self.k3, self.k4) @ nl2_matrix(*self.t) @ kron(self.k1, self.k2)


class _Canonicalizer:
    """
    Moves an interaction exp(i(v0 XX + v1 YY + v2 ZZ)) into canonical order.

    Invariant: phase * (L0 (x) L1) * E(v) * (R0 (x) R1) stays equal to the
    operator the object was constructed from.
    """

    def __init__(self, v, left, right, phase):
        self.v = [float(x) for x in v]
        self.left = list(left)
        self.right = list(right)
        self.phase = complex(phase)

    def shift(self, k: int, step: int) -> None:
        # exp(i pi/2 PP) = i PP
        self.v[k] += step * np.pi / 2
        self.phase *= (-1j) ** step
        if step % 2:
            self.right = [PAULIS[k] @ r for r in self.right]

    def negate(self, k1: int, k2: int) -> None:
        # conjugating qubit 1 by the third Pauli flips the other two terms
        self.v[k1] *= -1
        self.v[k2] *= -1
        s = PAULIS[3 - k1 - k2]
        self.left[1] = self.left[1] @ s
        self.right[1] = s @ self.right[1]

    def swap(self, k1: int, k2: int) -> None:
        self.v[k1], self.v[k2] = self.v[k2], self.v[k1]
        s = (PAULIS[k1] + PAULIS[k2]) / np.sqrt(2)
        self.left = [m @ s for m in self.left]
        self.right = [s @ m for m in self.right]

    def canonical_shift(self, k: int) -> None:
        while self.v[k] <= -np.pi / 4:
            self.shift(k, +1)
        while self.v[k] > np.pi / 4:
            self.shift(k, -1)

    def sort(self) -> None:
        if abs(self.v[0]) < abs(self.v[1]):
            self.swap(0, 1)
        if abs(self.v[1]) < abs(self.v[2]):
            self.swap(1, 2)
        if abs(self.v[0]) < abs(self.v[1]):
            self.swap(0, 1)

    def run(self, atol: float) -> Tuple[float, float, float]:
        for k in range(3):
            self.canonical_shift(k)
        self.sort()
        if self.v[0] < 0:
            self.negate(0, 2)
        if self.v[1] < 0:
            self.negate(1, 2)
        self.canonical_shift(2)
        if self.v[0] > np.pi / 4 - atol and self.v[2] < 0:
            self.shift(0, -1)
            self.negate(0, 2)

        # pi/4 >= x >= y >= |z| here; switch to NL2's sign convention
        if self.v[2] > atol:
            self.shift(0, -1)
            self.negate(1, 2)
        else:
            self.negate(0, 1)
        return tuple(float(-2.0 * x / np.pi) for x in self.v)


def _unit_det(m: np.ndarray) -> Tuple[np.ndarray, complex]:
    root = np.sqrt(np.linalg.det(m))
    return m / root, complex(root)


def kak_canonicalize(u, atol: float = 1e-9) -> CanonicalForm:
    """
    Canonical (KAK) form of a 4x4 unitary.

    Args:
        u: Two-qubit unitary.
        atol: Tolerance used when deciding chamber boundary cases.

    Returns:
        CanonicalForm whose ``unitary()`` reconstructs ``u`` including phase.

    Raises:
        InvalidArgumentError: ``u`` is not a 4x4 unitary.
        InternalConsistencyError: a local factor is not a Kronecker product,
            or the factors do not reconstruct ``u``.
    """
    arr = as_array(u)
    if arr.shape != (4, 4):
        raise InvalidArgumentError(f"KAK needs a 4x4 matrix, got {arr.shape}")
    if not is_unitary(arr, settings.FILE_UNITARITY_TOL):
        raise InvalidArgumentError("KAK input is not unitary")

    up = MAGIC_DAG @ arr @ MAGIC
    ev, q = eig_unitary_symmetric(up.T @ up)
    q = q.copy()
    if np.linalg.det(q) < 0:
        q[:, 0] *= -1
    d = np.exp(0.5j * np.angle(ev))
    left_c = (up @ q) / d
    if np.max(np.abs(left_c.imag)) > 1e-6:
        raise InternalConsistencyError("magic-basis left factor is not real")
    left = left_c.real
    if np.linalg.det(left) < 0:
        left[:, 0] *= -1
        d[0] *= -1

    a = MAGIC @ left @ MAGIC_DAG
    b = MAGIC @ q.T @ MAGIC_DAG
    a0, a1, res_a = nearest_kron_factors(a)
    b0, b1, res_b = nearest_kron_factors(b)
    if max(res_a, res_b) > 1e-6:
        raise InternalConsistencyError(
            f"local factor is not a Kronecker product (residual {max(res_a, res_b):.2e})"
        )

    w, x, y, z = GAMMA @ np.angle(d)
    canon = _Canonicalizer((x, y, z), (a0, a1), (b0, b1), np.exp(1j * w))
    t = canon.run(atol)

    phase = canon.phase
    locals_ = []
    for m in (canon.right[0], canon.right[1], canon.left[0], canon.left[1]):
        k, root = _unit_det(m)
        locals_.append(k)
        phase *= root
    form = CanonicalForm(*locals_, t=t, phase=complex(phase))

    err = float(np.max(np.abs(form.unitary() - arr)))
    if err > settings.RECONSTRUCTION_TOL:
        raise InternalConsistencyError(f"KAK reconstruction error {err:.2e}")
    return form


def canonical_coordinates(u) -> Tuple[float, float, float]:
    return kak_canonicalize(u).t


def canonicalize_coords(t: Sequence[float]) -> Tuple[float, float, float]:
    """Chamber representative of an arbitrary (tx, ty, tz)."""
    return kak_canonicalize(nl2_matrix(*t)).t


def same_class(t1: Sequence[float], t2: Sequence[float], tol: float = CLASS_TOL) -> bool:
    return bool(np.max(np.abs(np.subtract(t1, t2))) < tol)


def num_cx_required(u, tol: float = CLASS_TOL) -> int:
    """CX count needed to build ``u`` exactly: 0 local, 1 CX class, 2 when tz = 0, else 3."""
    return cx_count(canonical_coordinates(u), tol)


def cx_count(t: Sequence[float], tol: float = CLASS_TOL) -> int:
    if same_class(t, (0.0, 0.0, 0.0), tol):
        return 0
    if same_class(t, CX_CLASS, tol):
        return 1
    if abs(t[2]) < tol:
        return 2
    return 3


# Time-ordered programs: ("L", qubit, 2x2) or ("E",) entries plus a phase.
_H = FIXED_MATRICES[GateId.H1]
_S = FIXED_MATRICES[GateId.S1]
_A = (PAULI_I + 1j * PAULIS[0]) / np.sqrt(2)


def _cx0() -> List[tuple]:
    return [("E",)]


def _cx1() -> List[tuple]:
    """CX with control on qubit 1, written through CX on qubit 0."""
    return [("L", 0, _H), ("L", 1, _H), ("E",), ("L", 0, _H), ("L", 1, _H)]


def _can_two(t) -> Tuple[List[tuple], complex]:
    # (A (x) A) CX (Rx (x) Rz) CX (A^dag (x) A^dag) = exp(-i(a XX + b YY))
    alpha, beta = np.pi * t[0] / 2, np.pi * t[1] / 2
    prog = [("L", 0, _A.conj().T), ("L", 1, _A.conj().T)]
    prog += _cx0()
    prog += [("L", 0, rx(2 * alpha)), ("L", 1, rz(2 * beta))]
    prog += _cx0()
    prog += [("L", 0, _A), ("L", 1, _A)]
    return prog, 1.0


def _can_three(t) -> Tuple[List[tuple], complex]:
    alpha, beta, gamma = (np.pi * (c - 0.5) / 2 for c in t)
    prog = [("L", 1, _S)]
    prog += _cx1()
    prog += [("L", 0, rz(2 * gamma)), ("L", 1, ry(2 * alpha))]
    prog += _cx0()
    prog += [("L", 1, ry(-2 * beta))]
    prog += _cx1()
    prog += [("L", 0, _S.conj().T)]
    return prog, np.exp(-0.25j * np.pi)


def _wrap(form: CanonicalForm, prog: List[tuple], phase: complex) -> Tuple[List[tuple], complex]:
    full = [("L", 0, form.k1), ("L", 1, form.k2)] + prog + [("L", 0, form.k3), ("L", 1, form.k4)]
    return full, form.phase * phase


def _substitute_entangler(prog: List[tuple], phase: complex, cx_form: CanonicalForm, e_form: CanonicalForm):
    """Rewrite every CX of a program as locals around the (CX-class) entangler."""
    out = []
    for item in prog:
        if item[0] != "E":
            out.append(item)
            continue
        out += [
            ("L", 0, e_form.k1.conj().T @ cx_form.k1),
            ("L", 1, e_form.k2.conj().T @ cx_form.k2),
            ("E",),
            ("L", 0, cx_form.k3 @ e_form.k3.conj().T),
            ("L", 1, cx_form.k4 @ e_form.k4.conj().T),
        ]
        phase *= cx_form.phase / e_form.phase
    return out, phase


def _layers(prog: List[tuple]) -> List[Tuple[np.ndarray, np.ndarray]]:
    acc = [np.eye(2, dtype=np.complex128), np.eye(2, dtype=np.complex128)]
    layers = []
    for item in prog:
        if item[0] == "E":
            layers.append((acc[0], acc[1]))
            acc = [np.eye(2, dtype=np.complex128), np.eye(2, dtype=np.complex128)]
        else:
            _, q, m = item
            acc[q] = m @ acc[q]
    layers.append((acc[0], acc[1]))
    return layers


def _to_sequence(layers, entangler: np.ndarray, phase: complex) -> OpSequence:
    seq = OpSequence(2, phase=phase)
    for i, pair in enumerate(layers):
        if i:
            seq.append("E", entangler, (0, 1))
        for q, m in enumerate(pair):
            angles, g = p1_params(m)
            seq.phase *= g
            seq.append("P1", p1_matrix(*angles), (q,), angles)
    return seq


@dataclass
class KakSynthesis:
    sequence: OpSequence
    applications: int
    fidelity: float
    exact: bool
    method: str  # "closed-form" or "numeric"


def _ansatz_unitary(x: np.ndarray, entangler: np.ndarray, k: int) -> np.ndarray:
    u = np.eye(4, dtype=np.complex128)
    for layer in range(k + 1):
        if layer:
            u = entangler @ u
        a = x[6 * layer: 6 * layer + 3]
        b = x[6 * layer + 3: 6 * layer + 6]
        u = np.kron(p1_matrix(*a), p1_matrix(*b)) @ u
    return u


def _numeric_fit(target: np.ndarray, entangler: np.ndarray, k: int, rng: RngHandle,
                 restarts: int = 3, maxiter: int = 3000) -> KakSynthesis:
    lo = np.tile([0.0, 0.0, 0.0], 2 * (k + 1))
    hi = np.tile([np.pi, 2 * np.pi, 2 * np.pi], 2 * (k + 1))

    def infidelity(x):
        return 1.0 - process_fidelity(_ansatz_unitary(x, entangler, k), target)

    best_x, best_val = None, np.inf
    for r in range(restarts):
        x0 = rng.generator.uniform(lo, hi)
        res = scipy.optimize.minimize(
            infidelity, x0, method="COBYLA", tol=1e-10,
            options={"maxiter": maxiter, "rhobeg": 0.5},
        )
        if res.fun < best_val:
            best_x, best_val = res.x, float(res.fun)
        if best_val < 1e-12:
            break

    fitted = _ansatz_unitary(best_x, entangler, k)
    tr = np.vdot(fitted, target)
    phase = tr / abs(tr) if abs(tr) > 1e-15 else 1.0
    layers = [
        (p1_matrix(*best_x[6 * i: 6 * i + 3]), p1_matrix(*best_x[6 * i + 3: 6 * i + 6]))
        for i in range(k + 1)
    ]
    seq = _to_sequence(layers, entangler, phase)
    fid = process_fidelity(seq.unitary(), target)
    return KakSynthesis(seq, k, fid, fid >= EXACT_THRESHOLD, "numeric")


_CX_FORM: Optional[CanonicalForm] = None


def _cx_form() -> CanonicalForm:
    global _CX_FORM
    if _CX_FORM is None:
        _CX_FORM = kak_canonicalize(CX)
    return _CX_FORM


def _closed_form(k: int, target: np.ndarray, u_form: CanonicalForm, entangler: np.ndarray,
                 e_form: CanonicalForm, cx_class: bool) -> Optional[KakSynthesis]:
    t = u_form.t
    if k == 0:
        if not same_class(t, (0.0, 0.0, 0.0)):
            return None
        # NL2(t) with t ~ 0 is dropped; the fidelity check catches any residue
        prog, phase = _wrap(u_form, [], 1.0)
    elif k == 1:
        if not same_class(t, e_form.t):
            return None
        # NL2(t) = E-locals^dag * E / phase_E
        prog = [
            ("L", 0, u_form.k1), ("L", 1, u_form.k2),
            ("L", 0, e_form.k1.conj().T), ("L", 1, e_form.k2.conj().T),
            ("E",),
            ("L", 0, e_form.k3.conj().T), ("L", 1, e_form.k4.conj().T),
            ("L", 0, u_form.k3), ("L", 1, u_form.k4),
        ]
        phase = u_form.phase / e_form.phase
    elif k == 2 and cx_class and abs(t[2]) < CLASS_TOL:
        prog, phase = _wrap(u_form, *_can_two(t))
        prog, phase = _substitute_entangler(prog, phase, _cx_form(), e_form)
    elif k == 3 and cx_class:
        prog, phase = _wrap(u_form, *_can_three(t))
        prog, phase = _substitute_entangler(prog, phase, _cx_form(), e_form)
    else:
        return None

    seq = _to_sequence(_layers(prog), entangler, phase)
    fid = process_fidelity(seq.unitary(), target)
    return KakSynthesis(seq, k, fid, fid >= EXACT_THRESHOLD, "closed-form")


def _exact_impossible(k: int, u_form: CanonicalForm, e_form: CanonicalForm, cx_class: bool) -> bool:
    if k == 0:
        return not same_class(u_form.t, (0.0, 0.0, 0.0))
    if k == 1:
        return not same_class(u_form.t, e_form.t)
    if cx_class:
        return k < cx_count(u_form.t)
    return False


def kak_resynthesize(u, entangler, max_apps: int = 3, rng: Optional[RngHandle] = None) -> KakSynthesis:
    """
    Circuit over {entangler, P1} for a 2-qubit target.

    Tries k = 0..max_apps entangler applications with P1 layers between
    them. Closed forms are used where they exist (local targets, targets in
    the entangler's own class, and CX-class entanglers at k = 2 and 3);
    otherwise the locals are fitted with COBYLA. Returns the smallest k that
    reaches fidelity 1 - 1e-9, else the best circuit found.
    """
    if max_apps < 0:
        raise InvalidArgumentError("max_apps must be >= 0")
    target = as_array(u)
    ent = as_array(entangler)
    rng = rng or RngHandle(0)
    u_form = kak_canonicalize(target)
    e_form = kak_canonicalize(ent)
    cx_class = same_class(e_form.t, CX_CLASS)

    best: Optional[KakSynthesis] = None
    for k in range(max_apps + 1):
        cand = _closed_form(k, target, u_form, ent, e_form, cx_class)
        if cand is None or not cand.exact:
            if k < max_apps and _exact_impossible(k, u_form, e_form, cx_class):
                continue
            fitted = _numeric_fit(target, ent, k, rng.child(k))
            if cand is None or fitted.fidelity > cand.fidelity:
                cand = fitted
        if best is None or cand.fidelity > best.fidelity + 1e-15:
            best = cand
        if cand.exact:
            return cand

    logger.debug(f"KAK re-synthesis not exact, best fidelity {best.fidelity:.3e} at k={best.applications}")
    return best
