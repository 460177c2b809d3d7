"""
Sparse and dense linear-algebra primitives.

``SparseMatrix`` is an immutable, canonical CSR matrix (sorted column
indices, duplicates summed, explicit zeros dropped) over real or complex
scalars. ``WeightedSum`` represents ``sum_k c_k A_k`` with complex scalar
weights and real or complex matrices, so a block such as
``-sqrt(nu) (K - i omega M)`` is never materialized. ``BlockOperator`` is the
implicit two-by-two block operator built from four weighted sums.

Real matrices acting on complex vectors are applied separately to the real
and imaginary parts, which avoids a complex copy of the stored values.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sps

from .errors import ContractError

__all__ = [
    "MAX_DENSE_DIM",
    "SparseMatrix",
    "WeightedSum",
    "BlockOperator",
    "spmv",
    "block_apply",
    "to_dense",
    "linear_combination",
]

# largest dimension to_dense() will materialize
MAX_DENSE_DIM = 1024


class SparseMatrix:
    """Canonical compressed-row matrix.

    Parameters
    ----------
    nrows, ncols : int
    row_offsets, col_indices, values : array_like
        Raw CSR arrays. They are copied and canonicalized: columns sorted
        within each row, duplicates summed, explicit zeros removed.
    hermitian : bool
        Declare the matrix Hermitian (symmetric if real). The claim is
        verified at construction by an exact transpose compare.
    """

    __slots__ = ("_csr", "hermitian", "_adjoint")

    def __init__(self, nrows, ncols, row_offsets, col_indices, values, hermitian=False):
        nrows, ncols = int(nrows), int(ncols)
        if nrows < 0 or ncols < 0:
            raise ContractError("matrix dimensions must be nonnegative")
        row_offsets = np.asarray(row_offsets, dtype=np.int64)
        col_indices = np.asarray(col_indices, dtype=np.int64)
        values = np.asarray(values)
        if values.dtype.kind not in "fc":
            values = values.astype(np.float64)
        elif values.dtype.kind == "f":
            values = values.astype(np.float64, copy=False)
        else:
            values = values.astype(np.complex128, copy=False)
        if row_offsets.shape != (nrows + 1,):
            raise ContractError("row_offsets must have length nrows + 1")
        if row_offsets[0] != 0 or np.any(np.diff(row_offsets) < 0):
            raise ContractError("row_offsets must start at 0 and be nondecreasing")
        if row_offsets[-1] != len(values) or len(col_indices) != len(values):
            raise ContractError("row_offsets[-1], col_indices and values disagree in length")
        if len(col_indices) and (col_indices.min() < 0 or col_indices.max() >= ncols):
            raise ContractError("column index out of range")

        csr = sps.csr_matrix(
            (values.copy(), col_indices.copy(), row_offsets.copy()), shape=(nrows, ncols)
        )
        csr.sum_duplicates()
        csr.sort_indices()
        csr.eliminate_zeros()
        for arr in (csr.data, csr.indices, csr.indptr):
            arr.flags.writeable = False
        self._csr = csr
        self._adjoint = None
        self.hermitian = bool(hermitian)
        if self.hermitian and not self._is_hermitian():
            raise ContractError("matrix flagged hermitian is not equal to its conjugate transpose")

    # -- construction helpers -------------------------------------------------

    @classmethod
    def from_scipy(cls, A, hermitian=False) -> "SparseMatrix":
        A = sps.csr_matrix(A)
        return cls(A.shape[0], A.shape[1], A.indptr, A.indices, A.data, hermitian=hermitian)

    @classmethod
    def from_coo(cls, rows, cols, values, shape, hermitian=False) -> "SparseMatrix":
        A = sps.coo_matrix((values, (rows, cols)), shape=shape).tocsr()
        return cls.from_scipy(A, hermitian=hermitian)

    @classmethod
    def from_dense(cls, A, hermitian=False) -> "SparseMatrix":
        return cls.from_scipy(sps.csr_matrix(np.asarray(A)), hermitian=hermitian)

    @classmethod
    def identity(cls, n, dtype=np.float64) -> "SparseMatrix":
        return cls(n, n, np.arange(n + 1), np.arange(n), np.ones(n, dtype=dtype), hermitian=True)

    @classmethod
    def diag(cls, d) -> "SparseMatrix":
        d = np.asarray(d)
        n = len(d)
        herm = d.dtype.kind != "c" or bool(np.all(d.imag == 0))
        return cls(n, n, np.arange(n + 1), np.arange(n), d, hermitian=herm)

    # -- attributes -----------------------------------------------------------

    @property
    def nrows(self) -> int:
        return self._csr.shape[0]

    @property
    def ncols(self) -> int:
        return self._csr.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._csr.shape

    @property
    def row_offsets(self) -> np.ndarray:
        return self._csr.indptr

    @property
    def col_indices(self) -> np.ndarray:
        return self._csr.indices

    @property
    def values(self) -> np.ndarray:
        return self._csr.data

    @property
    def nnz(self) -> int:
        return self._csr.nnz

    @property
    def is_complex(self) -> bool:
        return self._csr.dtype.kind == "c"

    @property
    def dtype(self):
        return self._csr.dtype

    def to_scipy(self) -> sps.csr_matrix:
        """Return a writable scipy copy."""
        return self._csr.copy()

    # -- algebra --------------------------------------------------------------

    def _is_hermitian(self) -> bool:
        if self.nrows != self.ncols:
            return False
        T = self._csr.conj().T.tocsr()
        T.sort_indices()
        return (
            np.array_equal(T.indptr, self._csr.indptr)
            and np.array_equal(T.indices, self._csr.indices)
            and np.array_equal(T.data, self._csr.data)
        )

    def conj_transpose(self) -> "SparseMatrix":
        if self.hermitian:
            return self
        if self._adjoint is None:
            self._adjoint = SparseMatrix.from_scipy(self._csr.conj().T)
        return self._adjoint

    @property
    def H(self) -> "SparseMatrix":
        return self.conj_transpose()

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix.from_scipy(self._csr.T, hermitian=self.hermitian and not self.is_complex)

    def __matmul__(self, x):
        return spmv(self, x)

    def __eq__(self, other):
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.row_offsets, other.row_offsets)
            and np.array_equal(self.col_indices, other.col_indices)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def __repr__(self):
        kind = "complex" if self.is_complex else "real"
        return f"SparseMatrix({self.nrows}x{self.ncols}, nnz={self.nnz}, {kind})"

    def toarray(self) -> np.ndarray:
        return self._csr.toarray()


def linear_combination(terms: Iterable[tuple[complex, SparseMatrix]], shape=None) -> SparseMatrix:
    """Materialize ``sum_k c_k A_k`` as a canonical sparse matrix.

    Real weights on real matrices give a real result.
    """
    terms = list(terms)
    if not terms:
        if shape is None:
            raise ContractError("empty combination needs an explicit shape")
        return SparseMatrix(shape[0], shape[1], np.zeros(shape[0] + 1), [], np.zeros(0))
    herm = True
    acc = None
    for c, A in terms:
        if shape is not None and A.shape != tuple(shape):
            raise ContractError("shape mismatch in linear combination")
        shape = A.shape
        c = complex(c)
        if c.imag == 0:
            term = A._csr * c.real
            herm = herm and A.hermitian
        else:
            term = A._csr * c
            herm = False
        acc = term if acc is None else acc + term
    return SparseMatrix.from_scipy(acc, hermitian=herm)


def _real_matvec(csr, x):
    if x.dtype.kind == "c" and csr.dtype.kind != "c":
        return (csr @ x.real) + 1j * (csr @ x.imag)
    return csr @ x


def spmv(A: SparseMatrix, x, alpha=1.0, y=None, beta=0.0) -> np.ndarray:
    """Return ``alpha * A @ x + beta * y``.

    ``x`` may be a vector or a 2-D block of column vectors. A real matrix
    acting on complex input is applied to the real and imaginary parts
    separately. The result is a new array; neither ``x`` nor ``y`` is
    modified.
    """
    x = np.asarray(x)
    if x.ndim not in (1, 2) or x.shape[0] != A.ncols:
        raise ContractError(f"spmv: operand of shape {x.shape} does not conform to {A.shape}")
    out = _real_matvec(A._csr, x)
    if alpha != 1.0:
        out = alpha * out
    if beta != 0.0:
        if y is None:
            raise ContractError("spmv: beta != 0 requires y")
        y = np.asarray(y)
        if y.shape != out.shape:
            raise ContractError(f"spmv: y has shape {y.shape}, expected {out.shape}")
        out = out + beta * y
    return out


class WeightedSum:
    """Lazy ``sum_k c_k A_k`` over square sparse matrices of equal order.

    An empty term list is the zero operator of order ``n``. Repeated
    matrices (by identity) are merged into one term, so ``F + G + G*``
    and ``F + 2H`` produce the same coefficients.
    """

    __slots__ = ("terms", "n")

    def __init__(self, terms: Sequence[tuple[complex, SparseMatrix]] = (), n=None):
        merged = {}
        for c, A in terms:
            key = id(A)
            c0, _ = merged.get(key, (0j, A))
            merged[key] = (c0 + complex(c), A)
        terms = tuple((c, A) for c, A in merged.values() if c != 0)
        for _, A in terms:
            if A.nrows != A.ncols:
                raise ContractError("WeightedSum terms must be square")
            if n is None:
                n = A.nrows
            elif A.nrows != n:
                raise ContractError("WeightedSum terms must share one order")
        if n is None:
            raise ContractError("order of an empty WeightedSum must be given")
        self.terms = terms
        self.n = int(n)

    @classmethod
    def of(cls, A: SparseMatrix, c=1.0) -> "WeightedSum":
        return cls(((c, A),))

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x)
        if x.shape[0] != self.n:
            raise ContractError(f"operand of length {x.shape[0]} does not conform to order {self.n}")
        out = None
        for c, A in self.terms:
            t = spmv(A, x)
            t = t * (c.real if c.imag == 0 else c)
            out = t if out is None else out + t
        if out is None:
            dtype = np.result_type(x.dtype, np.float64)
            return np.zeros(x.shape, dtype=dtype)
        return out

    __matmul__ = apply

    def adjoint(self) -> "WeightedSum":
        return WeightedSum(tuple((np.conj(c), A.conj_transpose()) for c, A in self.terms), self.n)

    def __add__(self, other: "WeightedSum") -> "WeightedSum":
        if other.n != self.n:
            raise ContractError("order mismatch")
        return WeightedSum(self.terms + other.terms, self.n)

    def __neg__(self) -> "WeightedSum":
        return self.scaled(-1.0)

    def __sub__(self, other: "WeightedSum") -> "WeightedSum":
        return self + (-other)

    def scaled(self, c) -> "WeightedSum":
        return WeightedSum(tuple((c * w, A) for w, A in self.terms), self.n)

    def materialize(self) -> SparseMatrix:
        return linear_combination(self.terms, shape=(self.n, self.n))

    def __repr__(self):
        parts = " + ".join(f"({c:.3g})*{A!r}" for c, A in self.terms) or "0"
        return f"WeightedSum(n={self.n}: {parts})"


def _as_weighted(block, n=None) -> WeightedSum:
    if block is None:
        if n is None:
            raise ContractError("zero block needs an order")
        return WeightedSum((), n)
    if isinstance(block, WeightedSum):
        return block
    if isinstance(block, SparseMatrix):
        return WeightedSum.of(block)
    raise TypeError(f"cannot use {type(block).__name__} as a block")


class BlockOperator:
    """Implicit operator ``[[B11, B12], [B21, B22]]`` of dimension ``2n``.

    Blocks are ``WeightedSum`` (or a ``SparseMatrix``, or ``None`` for zero).
    """

    __slots__ = ("blocks", "n")

    def __init__(self, b11, b12, b21, b22):
        given = [b for b in (b11, b12, b21, b22) if b is not None]
        if not given:
            raise ContractError("at least one block must be given")
        n = _as_weighted(given[0]).n
        blocks = tuple(_as_weighted(b, n) for b in (b11, b12, b21, b22))
        if any(b.n != n for b in blocks):
            raise ContractError("all four blocks must be square with equal order")
        self.blocks = blocks
        self.n = n

    @property
    def shape(self) -> tuple[int, int]:
        return (2 * self.n, 2 * self.n)

    @property
    def dim(self) -> int:
        return 2 * self.n

    def apply(self, v) -> np.ndarray:
        return block_apply(self, v)

    __matmul__ = apply
    __call__ = apply

    def __repr__(self):
        return f"BlockOperator(dim={self.dim})"


def block_apply(A: BlockOperator, v) -> np.ndarray:
    """Return ``[B11 x + B12 y; B21 x + B22 y]`` for ``v = [x; y]``."""
    v = np.asarray(v)
    if v.ndim != 1 or v.shape[0] != 2 * A.n:
        raise ContractError(f"block_apply: vector of shape {v.shape}, expected ({2 * A.n},)")
    n = A.n
    x, y = v[:n], v[n:]
    b11, b12, b21, b22 = A.blocks
    return np.concatenate([b11.apply(x) + b12.apply(y), b21.apply(x) + b22.apply(y)])


def to_dense(A) -> np.ndarray:
    """Dense complex image of a ``SparseMatrix``, ``WeightedSum`` or
    ``BlockOperator``. Refuses anything larger than ``MAX_DENSE_DIM``."""
    if isinstance(A, BlockOperator):
        if A.dim > MAX_DENSE_DIM:
            raise ContractError(f"dense guard: dimension {A.dim} > {MAX_DENSE_DIM}")
        b11, b12, b21, b22 = (to_dense(b) for b in A.blocks)
        return np.block([[b11, b12], [b21, b22]])
    if isinstance(A, WeightedSum):
        if A.n > MAX_DENSE_DIM:
            raise ContractError(f"dense guard: dimension {A.n} > {MAX_DENSE_DIM}")
        out = np.zeros((A.n, A.n), dtype=np.complex128)
        for c, M in A.terms:
            out += c * M.toarray()
        return out
    if isinstance(A, SparseMatrix):
        if max(A.shape) > MAX_DENSE_DIM:
            raise ContractError(f"dense guard: dimension {max(A.shape)} > {MAX_DENSE_DIM}")
        return A.toarray().astype(np.complex128)
    raise TypeError(f"cannot densify {type(A).__name__}")
