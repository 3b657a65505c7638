"""
Benchmark datasets of target unitaries.

State-preparation datasets (haar-state, golden-equispaced, stab-magic) store
a unitary whose first column is the state; only U|0> matters for them.
"""

import csv
import io
import itertools
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import InvalidArgumentError, MatrixValidationError
from src.core.logging import logger
from src.services.decomposition import FidelityMetric
from src.services.gatelib import nl2_matrix, p1_matrix
from src.services.kak_service import canonical_coordinates, canonicalize_coords
from src.services.matcore import RngHandle, UnitaryMatrix, as_array, bloch_vector, haar_unitary
from src.services.matrix_io import load_unitary

GOLDEN_RATIO = (1 + np.sqrt(5)) / 2


class DatasetKind(str, Enum):
    HAAR_UNITARY = "haar-unitary"
    HAAR_STATE = "haar-state"
    GOLDEN_EQUISPACED = "golden-equispaced"
    U3_GRID = "u3-grid"
    STAB_MAGIC = "stab-magic"
    WEYL_RANDOM = "weyl-random"
    WEYL_EQUISPACED = "weyl-equispaced-nonlocal"
    FROM_FILES = "from-files"


STATE_KINDS = {DatasetKind.HAAR_STATE, DatasetKind.GOLDEN_EQUISPACED, DatasetKind.STAB_MAGIC}


@dataclass(eq=False)
class Dataset:
    n_qubits: int
    unitaries: List[UnitaryMatrix]
    kind: DatasetKind
    seed: Optional[int] = None
    paths: List[str] = field(default_factory=list)
    coords: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        dim = 2 ** self.n_qubits
        for i, u in enumerate(self.unitaries):
            if u.dim != dim:
                raise InvalidArgumentError(f"dataset member {i} has dimension {u.dim}, expected {dim}")

    def __len__(self) -> int:
        return len(self.unitaries)

    @property
    def is_state_prep(self) -> bool:
        return self.kind in STATE_KINDS

    def describe(self) -> dict:
        return {
            "kind": self.kind.value,
            "n_qubits": self.n_qubits,
            "size": len(self),
            "seed": self.seed,
            "paths": list(self.paths),
        }


def resolve_metric(metric: FidelityMetric, ds: Dataset) -> FidelityMetric:
    if metric != FidelityMetric.AUTO:
        return metric
    return FidelityMetric.STATE if ds.is_state_prep else FidelityMetric.PROCESS


def _check_size(size: int) -> None:
    if size < 1:
        raise InvalidArgumentError(f"dataset size must be >= 1, got {size}")


def _state_prep(theta: float, phi: float) -> UnitaryMatrix:
    return UnitaryMatrix(p1_matrix(theta, phi, 0.0))


def gen_haar_unitaries(n: int, size: int, rng: RngHandle) -> Dataset:
    _check_size(size)
    members = [haar_unitary(2 ** n, rng.child(i)) for i in range(size)]
    return Dataset(n, members, DatasetKind.HAAR_UNITARY, seed=rng.seed)


def gen_haar_states(n: int, size: int, rng: RngHandle) -> Dataset:
    """A Haar unitary maps |0> to a Haar state, so its first column is the sample."""
    _check_size(size)
    members = [haar_unitary(2 ** n, rng.child(i)) for i in range(size)]
    return Dataset(n, members, DatasetKind.HAAR_STATE, seed=rng.seed)


def gen_golden_equispaced(size: int) -> Dataset:
    """Fibonacci sphere: colatitude arccos(1 - 2(i + 0.5)/size), azimuth 2 pi i / golden ratio."""
    _check_size(size)
    i = np.arange(size)
    theta = np.arccos(1 - 2 * (i + 0.5) / size)
    phi = np.mod(2 * np.pi * i / GOLDEN_RATIO, 2 * np.pi)
    members = [_state_prep(t, p) for t, p in zip(theta, phi)]
    return Dataset(1, members, DatasetKind.GOLDEN_EQUISPACED)


def gen_u3_grid(resolution: int) -> Dataset:
    """
    Cartesian grid of P1 angles. Resolution 1 is the single midpoint
    (pi/2, pi, pi); otherwise a1 spans [0, pi] and a2, a3 span [0, 2 pi).
    """
    if resolution < 1:
        raise InvalidArgumentError(f"resolution must be >= 1, got {resolution}")
    if resolution == 1:
        a1, a2 = np.array([np.pi / 2]), np.array([np.pi])
    else:
        a1 = np.linspace(0.0, np.pi, resolution)
        a2 = np.linspace(0.0, 2 * np.pi, resolution, endpoint=False)
    members = [UnitaryMatrix(p1_matrix(x, y, z)) for x, y, z in itertools.product(a1, a2, a2)]
    return Dataset(1, members, DatasetKind.U3_GRID)


STABILIZER_VECTORS = [(0, 0, 1), (0, 0, -1), (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)]
MAGIC_VECTORS = [tuple(np.array(s) / np.sqrt(3)) for s in itertools.product([1, -1], repeat=3)]


def gen_stab_magic() -> Dataset:
    """Six stabilizer states (indices 0-5) then the eight magic states (6-13)."""
    members = []
    for x, y, z in STABILIZER_VECTORS + MAGIC_VECTORS:
        members.append(_state_prep(float(np.arccos(np.clip(z, -1, 1))), float(np.arctan2(y, x))))
    return Dataset(1, members, DatasetKind.STAB_MAGIC)


def _in_chamber(t: np.ndarray) -> bool:
    tx, ty, tz = t
    if not (tx >= ty >= tz >= 0 and tx + ty <= 1):
        return False
    return tx <= 0.5 or tz > 0


def gen_weyl_random(size: int, rng: RngHandle) -> Dataset:
    """Rejection-sample [0, 1]^3 into the chamber tetrahedron, then canonicalise."""
    _check_size(size)
    gen = rng.generator
    coords = []
    while len(coords) < size:
        t = gen.random(3)
        if _in_chamber(t):
            coords.append(canonicalize_coords(t))
    coords = np.array(coords)
    members = [UnitaryMatrix(nl2_matrix(*t)) for t in coords]
    return Dataset(2, members, DatasetKind.WEYL_RANDOM, seed=rng.seed, coords=coords)


def _farthest_points(points: np.ndarray, size: int) -> np.ndarray:
    """Greedy max-min selection starting from point 0; lowest index wins ties."""
    chosen = [0]
    dist = np.linalg.norm(points - points[0], axis=1)
    while len(chosen) < size:
        nxt = int(np.argmax(dist))
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(points - points[nxt], axis=1))
    return np.array(sorted(chosen))


def gen_weyl_equispaced_nonlocal(size: int) -> Dataset:
    """
    Regular chamber grid without the identity class, trimmed to ``size``
    points by largest-minimum-distance selection. The grid is refined until
    it holds at least ``size`` points.
    """
    _check_size(size)
    m = 1
    while True:
        step = 1.0 / (2 * m)
        axis = np.arange(0, 2 * m + 1) * step
        grid = np.array([t for t in itertools.product(axis, repeat=3) if _in_chamber(np.array(t))])
        grid = grid[np.linalg.norm(grid, axis=1) > 1e-12]
        # mirror points on the chamber faces collapse to one class
        grid = np.unique(np.round([canonicalize_coords(t) for t in grid], 9), axis=0)
        if len(grid) >= size:
            break
        m += 1
    coords = grid[_farthest_points(grid, size)] if len(grid) > size else grid
    members = [UnitaryMatrix(nl2_matrix(*t)) for t in coords]
    logger.debug(f"Weyl grid step 1/{2 * m}: {len(grid)} points, kept {len(coords)}")
    return Dataset(2, members, DatasetKind.WEYL_EQUISPACED, coords=coords)


def load_dataset(paths: Sequence[str], n_qubits: Optional[int] = None) -> Dataset:
    """Load matrix files; all must be unitary (1e-8) and share one dimension."""
    if not paths:
        raise InvalidArgumentError("from-files dataset needs at least one path")
    members = [load_unitary(p) for p in paths]
    dim = 2 ** n_qubits if n_qubits is not None else members[0].dim
    for p, u in zip(paths, members):
        if u.dim != dim:
            raise MatrixValidationError(f"dimension {u.dim} differs from dataset dimension {dim}", str(p))
    return Dataset(dim.bit_length() - 1, members, DatasetKind.FROM_FILES, paths=[str(p) for p in paths])


def dataset_coords(ds: Dataset) -> Tuple[List[str], np.ndarray]:
    """Bloch vectors of U|0> (1 qubit) or canonical coordinates (2 qubits)."""
    if ds.n_qubits == 1:
        rows = np.array([bloch_vector(as_array(u)[:, 0]) for u in ds.unitaries])
        return ["index", "x", "y", "z"], rows
    if ds.n_qubits == 2:
        rows = np.array([canonical_coordinates(u) for u in ds.unitaries])
        return ["index", "tx", "ty", "tz"], rows
    raise InvalidArgumentError(f"coordinate export supports 1 or 2 qubits, dataset has {ds.n_qubits}")


def export_coords(ds: Dataset, path: Optional[Path] = None) -> str:
    header, rows = dataset_coords(ds)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for i, row in enumerate(rows):
        writer.writerow([i, *(repr(float(v)) for v in row)])
    text = buf.getvalue()
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")
    return text


def build_dataset(kind: DatasetKind, n_qubits: int = 1, size: int = 1, seed: int = 0,
                  resolution: int = 2, paths: Sequence[str] = ()) -> Dataset:
    kind = DatasetKind(kind)
    rng = RngHandle(seed)
    if kind == DatasetKind.HAAR_UNITARY:
        return gen_haar_unitaries(n_qubits, size, rng)
    if kind == DatasetKind.HAAR_STATE:
        return gen_haar_states(n_qubits, size, rng)
    if kind == DatasetKind.FROM_FILES:
        return load_dataset(list(paths), n_qubits)

    fixed_width = {
        DatasetKind.GOLDEN_EQUISPACED: 1, DatasetKind.U3_GRID: 1, DatasetKind.STAB_MAGIC: 1,
        DatasetKind.WEYL_RANDOM: 2, DatasetKind.WEYL_EQUISPACED: 2,
    }[kind]
    if n_qubits != fixed_width:
        raise InvalidArgumentError(f"{kind.value} datasets have {fixed_width} qubit(s), got {n_qubits}")
    if kind == DatasetKind.GOLDEN_EQUISPACED:
        return gen_golden_equispaced(size)
    if kind == DatasetKind.U3_GRID:
        return gen_u3_grid(resolution)
    if kind == DatasetKind.STAB_MAGIC:
        return gen_stab_magic()
    if kind == DatasetKind.WEYL_RANDOM:
        return gen_weyl_random(size, rng)
    return gen_weyl_equispaced_nonlocal(size)
