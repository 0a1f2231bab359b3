"""Dense operator container shared by the vertex- and bond-level machinery."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["GraphOperator", "hs_norm", "operator_norm", "is_selfadjoint", "save_operator_csv"]


@dataclass(frozen=True)
class GraphOperator:
    """A dense matrix acting on vertices or directed bonds.

    The matrix is frozen after construction so operators can be shared
    across threads.  Self-adjointness is a checked property, never assumed.
    """

    matrix: np.ndarray
    label: str = ""
    space: str = "vertex"

    def __post_init__(self):
        mat = np.asarray(self.matrix)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"operator matrix must be square, got shape {mat.shape}")
        if not np.all(np.isfinite(mat.view(np.float64) if mat.dtype == np.complex128 else mat)):
            raise ValueError("operator matrix has non-finite entries")
        mat = np.ascontiguousarray(mat)
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _as_matrix(op) -> np.ndarray:
    return op.matrix if isinstance(op, GraphOperator) else np.asarray(op)


def hs_norm(op) -> float:
    """Hilbert-Schmidt (Frobenius) norm."""
    return float(np.linalg.norm(_as_matrix(op), "fro"))


def operator_norm(op) -> float:
    """Spectral norm (largest singular value); safe for non-normal matrices."""
    return float(np.linalg.norm(_as_matrix(op), 2))


def is_selfadjoint(op, tol: float = 1e-10) -> bool:
    mat = _as_matrix(op)
    return bool(np.max(np.abs(mat - mat.conj().T)) <= tol)


def save_operator_csv(op, path) -> None:
    """Write the matrix as CSV, splitting complex entries as re+imj text."""
    mat = _as_matrix(op)
    with open(path, "w", newline="") as fh:
        for row in mat:
            fh.write(",".join(f"{z.real:.17g}+{z.imag:.17g}j" if np.iscomplexobj(mat)
                              else f"{z:.17g}" for z in row))
            fh.write("\n")
