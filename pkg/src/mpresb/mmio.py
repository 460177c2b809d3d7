"""Matrix Market import/export for ``SparseMatrix`` and dense vectors.

Values are written with 17 significant digits, which round-trips IEEE
doubles exactly.
"""

import os

import numpy as np
import scipy.io

from .sparse import SparseMatrix

__all__ = ["write_matrix", "read_matrix", "write_vector", "read_vector"]

DIGITS = 17


def write_matrix(path, A: SparseMatrix, comment=""):
    """Write ``A`` in coordinate format (``real`` or ``complex`` field,
    always ``general`` symmetry so every stored entry appears once)."""
    scipy.io.mmwrite(
        os.fspath(path), A.to_scipy(), comment=comment, precision=DIGITS, symmetry="general"
    )


def read_matrix(path, hermitian=False) -> SparseMatrix:
    A = scipy.io.mmread(os.fspath(path))
    return SparseMatrix.from_scipy(A, hermitian=hermitian)


def write_vector(path, v, comment=""):
    """Write a vector as an ``n x 1`` array-format file."""
    v = np.asarray(v).reshape(-1, 1)
    scipy.io.mmwrite(os.fspath(path), v, comment=comment, precision=DIGITS)


def read_vector(path) -> np.ndarray:
    v = scipy.io.mmread(os.fspath(path))
    return np.asarray(v).reshape(-1)
