"""
Matrix file format used by F1/F2 gates, file-loaded datasets and exported gates.

Text form (UTF-8):

    dim 2
    0.7071067811865476+0j 0.7071067811865476+0j
    0.7071067811865476+0j -0.7071067811865476+0j

Binary form: magic ``UMAT``, little-endian u32 dim, then row-major
little-endian f64 (re, im) pairs.
"""

from pathlib import Path
from typing import Union

import numpy as np

from src.core.config import settings
from src.core.errors import MatrixValidationError
from src.services.matcore import UnitaryMatrix, as_array, is_unitary, unitarity_error

MAGIC = b"UMAT"

PathLike = Union[str, Path]


def _parse_text(text: str, source: str) -> np.ndarray:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise MatrixValidationError("empty matrix file", source)
    header = lines[0].split()
    if len(header) != 2 or header[0] != "dim":
        raise MatrixValidationError(f"expected 'dim <d>' header, got {lines[0]!r}", source)
    try:
        dim = int(header[1])
    except ValueError:
        raise MatrixValidationError(f"bad dimension {header[1]!r}", source)
    if dim < 1:
        raise MatrixValidationError(f"bad dimension {dim}", source)
    rows = lines[1:]
    if len(rows) != dim:
        raise MatrixValidationError(f"expected {dim} rows, found {len(rows)}", source)

    out = np.empty((dim, dim), dtype=np.complex128)
    for r, row in enumerate(rows):
        tokens = row.split()
        if len(tokens) != dim:
            raise MatrixValidationError(f"row {r + 1} has {len(tokens)} entries, expected {dim}", source)
        for c, tok in enumerate(tokens):
            try:
                out[r, c] = complex(tok)
            except ValueError:
                raise MatrixValidationError(f"row {r + 1}: cannot parse entry {tok!r}", source)
    return out


def _parse_binary(data: bytes, source: str) -> np.ndarray:
    if len(data) < 8:
        raise MatrixValidationError("truncated UMAT header", source)
    dim = int(np.frombuffer(data[4:8], dtype="<u4")[0])
    expected = 8 + dim * dim * 16
    if dim < 1 or len(data) != expected:
        raise MatrixValidationError(f"UMAT payload is {len(data)} bytes, expected {expected}", source)
    pairs = np.frombuffer(data[8:], dtype="<f8").reshape(dim, dim, 2)
    return pairs[..., 0] + 1j * pairs[..., 1]


def read_matrix(path: PathLike) -> np.ndarray:
    """Read a raw complex matrix (no unitarity check) from text or UMAT binary."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise MatrixValidationError(f"cannot read file ({e.strerror})", str(path))
    if data.startswith(MAGIC):
        return _parse_binary(data, str(path))
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        raise MatrixValidationError("not UTF-8 text and no UMAT magic", str(path))
    return _parse_text(text, str(path))


def load_unitary(path: PathLike, tol: float = None) -> UnitaryMatrix:
    """
    Read a matrix file and validate it as a unitary.

    Args:
        path: Text or UMAT file.
        tol: Unitarity tolerance, defaults to the file-loading tolerance (1e-8).

    Returns:
        The validated matrix. Errors name the offending file.
    """
    tol = settings.FILE_UNITARITY_TOL if tol is None else tol
    arr = read_matrix(path)
    dim = arr.shape[0]
    if dim & (dim - 1):
        raise MatrixValidationError(f"dimension {dim} is not a power of two", str(path))
    if not is_unitary(arr, tol):
        raise MatrixValidationError(
            f"matrix is not unitary (max |U^dag U - I| = {unitarity_error(arr):.3e})", str(path)
        )
    return UnitaryMatrix(arr, tol=tol)


def format_matrix(m) -> str:
    arr = as_array(m)
    lines = [f"dim {arr.shape[0]}"]
    for row in arr:
        lines.append(" ".join(f"{z.real:.17g}{z.imag:+.17g}j" for z in row))
    return "\n".join(lines) + "\n"


def write_matrix(path: PathLike, m, binary: bool = None) -> Path:
    """Write a matrix; ``binary`` defaults to True for the ``.umat`` suffix."""
    path = Path(path)
    arr = as_array(m)
    if binary is None:
        binary = path.suffix == ".umat"
    path.parent.mkdir(parents=True, exist_ok=True)
    if binary:
        pairs = np.stack([arr.real, arr.imag], axis=-1).astype("<f8")
        path.write_bytes(MAGIC + np.array([arr.shape[0]], dtype="<u4").tobytes() + pairs.tobytes())
    else:
        path.write_text(format_matrix(arr), encoding="utf-8")
    return path
