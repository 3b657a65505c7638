"""
Dense complex linear algebra shared by every other service.

Everything here is pure: functions take matrices (``UnitaryMatrix`` or plain
ndarrays) and return new values. Randomness always flows through an explicit
``RngHandle`` so runs are reproducible from their seed.
"""

from dataclasses import dataclass, field
from typing import Tuple, Union

import numpy as np
import scipy.linalg

from src.core.config import settings
from src.core.errors import InvalidArgumentError, InternalConsistencyError, MatrixValidationError

ArrayLike = Union["UnitaryMatrix", np.ndarray]

_SEED_MASK = (1 << 64) - 1
_PHASE_GRID = np.exp(1j * np.linspace(0.0, 2.0 * np.pi, 360, endpoint=False))


class UnitaryMatrix:
    """Immutable dim x dim unitary with dim a power of two."""

    __slots__ = ("_data",)

    def __init__(self, data: np.ndarray, *, tol: float = None, check: bool = True):
        arr = np.array(data, dtype=np.complex128, copy=True)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
            raise InvalidArgumentError(f"expected a non-empty square matrix, got shape {arr.shape}")
        dim = arr.shape[0]
        if check:
            if dim & (dim - 1):
                raise InvalidArgumentError(f"dimension {dim} is not a power of two")
            tol = settings.UNITARITY_TOL if tol is None else tol
            if not is_unitary(arr, tol):
                raise MatrixValidationError(
                    f"matrix is not unitary (max |U^dag U - I| = {unitarity_error(arr):.3e})"
                )
        arr.setflags(write=False)
        self._data = arr

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def dim(self) -> int:
        return self._data.shape[0]

    @property
    def n_qubits(self) -> int:
        return int(self.dim).bit_length() - 1

    def dagger(self) -> "UnitaryMatrix":
        return UnitaryMatrix(self._data.conj().T, check=False)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._data
        return self._data.astype(dtype)

    def __matmul__(self, other: ArrayLike) -> "UnitaryMatrix":
        return UnitaryMatrix(self._data @ as_array(other), check=False)

    def __repr__(self) -> str:
        return f"UnitaryMatrix(dim={self.dim})"


def as_array(m: ArrayLike) -> np.ndarray:
    if isinstance(m, UnitaryMatrix):
        return m.data
    return np.asarray(m, dtype=np.complex128)


def unitarity_error(m: ArrayLike) -> float:
    arr = as_array(m)
    return float(np.max(np.abs(arr.conj().T @ arr - np.eye(arr.shape[0]))))


def is_unitary(m: ArrayLike, tol: float = None) -> bool:
    tol = settings.UNITARITY_TOL if tol is None else tol
    arr = as_array(m)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        return False
    return unitarity_error(arr) < tol


def derive_seed(parent_seed: int, index: int) -> int:
    """child_seed = hash(parent_seed, index), stable across platforms."""
    seq = np.random.SeedSequence([int(parent_seed) & _SEED_MASK, int(index) & _SEED_MASK])
    return int(seq.generate_state(1, dtype=np.uint64)[0])


@dataclass(eq=False)
class RngHandle:
    """
    Seeded PCG64 stream. Single owner: parallel callers split with ``child``.
    """
    seed: int
    generator: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self.seed = int(self.seed) & _SEED_MASK
        self.generator = np.random.Generator(np.random.PCG64(self.seed))

    def child(self, index: int) -> "RngHandle":
        return RngHandle(derive_seed(self.seed, index))


def haar_unitary(dim: int, rng: RngHandle) -> UnitaryMatrix:
    """
    Sample from the Haar measure on U(dim).

    QR of a complex Ginibre matrix, with the columns of Q rescaled by the
    phases of R's diagonal so the distribution is exactly Haar.
    """
    if dim < 1:
        raise InvalidArgumentError(f"dim must be >= 1, got {dim}")
    gen = rng.generator
    z = (gen.standard_normal((dim, dim)) + 1j * gen.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = scipy.linalg.qr(z)
    d = np.diag(r)
    q = q * (d / np.abs(d))
    return UnitaryMatrix(q)


def _check_same_dim(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise InvalidArgumentError(f"dimension mismatch: {a.shape} vs {b.shape}")


def process_fidelity(a: ArrayLike, b: ArrayLike) -> float:
    """|Tr(a^dag b)|^2 / d^2, the unitary-channel form of the superoperator overlap."""
    a, b = as_array(a), as_array(b)
    _check_same_dim(a, b)
    d = a.shape[0]
    tr = np.vdot(a, b)
    return float(min(1.0, abs(tr) ** 2 / d ** 2))


def state_fidelity(target: ArrayLike, candidate: ArrayLike) -> float:
    """|<psi|U|0>|^2 where psi is the first column of the target."""
    target, candidate = as_array(target), as_array(candidate)
    _check_same_dim(target, candidate)
    return float(min(1.0, abs(np.vdot(target[:, 0], candidate[:, 0])) ** 2))


def operator_distance(a: ArrayLike, b: ArrayLike) -> float:
    """Spectral norm of a - e^{i phi} b at the phase that aligns the two."""
    a, b = as_array(a), as_array(b)
    _check_same_dim(a, b)
    tr = np.vdot(a, b)
    if abs(tr) > 1e-12:
        return float(np.linalg.norm(a - np.exp(-1j * np.angle(tr)) * b, ord=2))
    diffs = a[None, :, :] - _PHASE_GRID[:, None, None] * b[None, :, :]
    return float(np.min(np.linalg.norm(diffs, ord=2, axis=(1, 2))))


def operator_distances(stack: np.ndarray, target: ArrayLike) -> np.ndarray:
    """Vectorised ``operator_distance(target, m)`` for every m in an (N, d, d) stack."""
    target = as_array(target)
    tr = np.einsum("ij,nij->n", target.conj(), stack)
    mag = np.abs(tr)
    phases = np.where(mag > 1e-12, np.exp(-1j * np.angle(tr)), 1.0)
    dists = np.linalg.norm(target[None] - phases[:, None, None] * stack, ord=2, axis=(1, 2))
    for idx in np.flatnonzero(mag <= 1e-12):
        dists[idx] = operator_distance(target, stack[idx])
    return dists


def kron(*mats: ArrayLike) -> np.ndarray:
    out = np.eye(1, dtype=np.complex128)
    for m in mats:
        out = np.kron(out, as_array(m))
    return out


def nearest_kron_factors(m: ArrayLike) -> Tuple[np.ndarray, np.ndarray, float]:
    """
    Best A (x) B approximation of a 4x4 matrix.

    Rank-1 SVD of the rearranged matrix R[(i1,j1),(i2,j2)] = m[2*i1+i2, 2*j1+j2].
    Exact when m is a product; returns the Frobenius residual alongside.
    """
    arr = as_array(m)
    if arr.shape != (4, 4):
        raise InvalidArgumentError(f"expected a 4x4 matrix, got {arr.shape}")
    rearranged = arr.reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
    u, s, vh = np.linalg.svd(rearranged)
    scale = np.sqrt(s[0])
    a = scale * u[:, 0].reshape(2, 2)
    b = scale * vh[0, :].reshape(2, 2)
    residual = float(np.linalg.norm(np.kron(a, b) - arr))
    return a, b, residual


def eig_unitary_symmetric(m: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """
    Diagonalise a complex symmetric unitary with a REAL orthogonal basis.

    Re(m) and Im(m) commute, so a generic real combination of them has the
    joint eigenspaces of both; eigh of that combination gives real
    orthonormal vectors even inside degenerate eigenspaces. Combinations
    are drawn from a fixed seed sequence so results are deterministic.

    Returns:
        (eigenvalues, q) with m = q @ diag(eigenvalues) @ q.T
    """
    arr = as_array(m)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidArgumentError("expected a square matrix")
    if np.max(np.abs(arr - arr.T)) > 1e-8:
        raise InvalidArgumentError("matrix is not symmetric")
    if not is_unitary(arr, 1e-8):
        raise InvalidArgumentError("matrix is not unitary")

    best = None
    for attempt in range(100):
        if attempt == 0:
            a, b = 1.0, 0.0
        else:
            a, b = np.random.default_rng(attempt).random(2)
        _, q = np.linalg.eigh(a * arr.real + b * arr.imag)
        d = np.diag(q.T @ arr @ q)
        err = float(np.max(np.abs(q @ np.diag(d) @ q.T - arr)))
        if best is None or err < best[0]:
            best = (err, d, q)
        if err < 1e-12:
            break

    err, d, q = best
    if err > settings.RECONSTRUCTION_TOL:
        raise InternalConsistencyError(f"symmetric eigendecomposition failed (residual {err:.2e})")

    # Canonical order: by position of each column's dominant entry, dominant entry positive.
    dominant = np.argmax(np.abs(q), axis=0)
    order = np.argsort(dominant, kind="stable")
    q = q[:, order]
    d = d[order]
    signs = np.sign(q[np.argmax(np.abs(q), axis=0), np.arange(q.shape[1])])
    q = q * signs
    return d / np.abs(d), q


def rotation_su2(axis: np.ndarray, angle: float) -> np.ndarray:
    """exp(-i angle/2 n.sigma) for a unit axis n."""
    nx, ny, nz = axis
    c, s = np.cos(angle / 2.0), np.sin(angle / 2.0)
    return np.array(
        [[c - 1j * s * nz, -1j * s * nx - s * ny],
         [-1j * s * nx + s * ny, c + 1j * s * nz]],
        dtype=np.complex128,
    )


def to_su2(u: ArrayLike) -> np.ndarray:
    arr = as_array(u)
    return arr / np.sqrt(np.linalg.det(arr))


def axis_angle(u: ArrayLike) -> Tuple[np.ndarray, float]:
    """
    Rotation axis and angle in [0, pi] of a 2x2 unitary, ignoring global phase.
    """
    su = to_su2(u)
    if np.real(np.trace(su)) < 0:
        su = -su
    vec = np.array([
        -np.imag(np.trace(su @ PAULI_X)),
        -np.imag(np.trace(su @ PAULI_Y)),
        -np.imag(np.trace(su @ PAULI_Z)),
    ]) / 2.0
    sin_half = float(np.linalg.norm(vec))
    cos_half = float(np.real(np.trace(su)) / 2.0)
    angle = 2.0 * np.arctan2(sin_half, cos_half)
    if sin_half < 1e-15:
        return np.array([0.0, 0.0, 1.0]), 0.0
    return vec / sin_half, float(angle)


def bloch_vector(state: np.ndarray) -> np.ndarray:
    psi = np.asarray(state, dtype=np.complex128)
    psi = psi / np.linalg.norm(psi)
    overlap = np.conj(psi[0]) * psi[1]
    return np.array([2 * overlap.real, 2 * overlap.imag, abs(psi[0]) ** 2 - abs(psi[1]) ** 2])


PAULI_I = np.eye(2, dtype=np.complex128)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
