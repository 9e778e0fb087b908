"""3-order tensor containers and mode-unfolding index arithmetic.

Conventions
-----------
* The canonical dense linearization is the mode-1 unfolding column order,
  i.e. Fortran order of an (I1, I2, I3) array: index 1 varies fastest.
  ``unfold_dense(t, 1)`` is therefore a zero-copy view; modes 2 and 3 are
  permuted copies.
* Indices are 1-based in file formats, error messages and the public
  ``unfold_index`` helper (whose convention mirrors the usual unfolding
  formula); everything stored internally is 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import RangeError, ShapeError

__all__ = [
    "Shape3",
    "DenseTensor3",
    "SparseTensor3",
    "FactorPair",
    "unfold_index",
    "mode_rowcol",
    "unfold_dense",
    "fold_dense",
    "fold_factor_dense",
    "inner",
    "fro_norm",
    "eval_factors",
    "sparse_residual",
]


@dataclass(frozen=True)
class Shape3:
    """Extents (I1, I2, I3) of a 3-order tensor."""

    dims: tuple[int, int, int]

    def __post_init__(self):
        if len(self.dims) != 3 or any(int(d) < 1 for d in self.dims):
            raise ShapeError(f"extents must be three positive integers, got {self.dims}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def size(self) -> int:
        """Total number of entries, I1*I2*I3."""
        d = self.dims
        return d[0] * d[1] * d[2]

    @property
    def sum(self) -> int:
        """I1 + I2 + I3."""
        return self.dims[0] + self.dims[1] + self.dims[2]

    def mode_dims(self, mode: int) -> tuple[int, int]:
        """(nrows, ncols) of the mode-``mode`` unfolding."""
        _check_mode(mode)
        n = self.dims[mode - 1]
        return n, self.size // n

    def other_modes(self, mode: int) -> tuple[int, int]:
        """The two modes other than ``mode``, in increasing order."""
        _check_mode(mode)
        return tuple(m for m in (1, 2, 3) if m != mode)


def _check_mode(mode: int):
    if mode not in (1, 2, 3):
        raise RangeError(f"mode must be 1, 2 or 3, got {mode}")


def unfold_index(shape: Shape3, mode: int, idx: tuple[int, int, int]) -> tuple[int, int]:
    """Map a 1-based entry index to its 1-based (row, col) in the mode unfolding.

    The column index is ``1 + sum_{l != mode} (i_l - 1) * prod_{m < l, m != mode} I_m``.
    Bijective between entry triples and the I_mode x (I1*I2*I3/I_mode) grid.
    """
    _check_mode(mode)
    dims = shape.dims
    for l in range(3):
        if not 1 <= idx[l] <= dims[l]:
            raise RangeError(f"index {idx} out of range for shape {dims}")
    col = 1
    stride = 1
    for l in range(3):
        if l == mode - 1:
            continue
        col += (idx[l] - 1) * stride
        stride *= dims[l]
    return idx[mode - 1], col


def mode_rowcol(shape: Shape3, mode: int, i1, i2, i3):
    """Vectorized 0-based (rows, cols) of entries in the mode unfolding."""
    _check_mode(mode)
    I1, I2, _ = shape.dims
    if mode == 1:
        return i1, i2 + i3 * I2
    if mode == 2:
        return i2, i1 + i3 * I1
    return i3, i1 + i2 * I1


@dataclass(frozen=True)
class DenseTensor3:
    """Dense 3-order tensor in the canonical (Fortran-order) linearization."""

    shape: Shape3
    values: np.ndarray  # flat, length shape.size

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if v.size != self.shape.size:
            raise ShapeError(
                f"expected {self.shape.size} values for shape {self.shape.dims}, got {v.size}"
            )
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "DenseTensor3":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 3:
            raise ShapeError(f"expected a 3-d array, got ndim={arr.ndim}")
        return cls(Shape3(arr.shape), arr.flatten(order="F"))

    def as_array(self) -> np.ndarray:
        """Read-only (I1, I2, I3) view of the canonical layout."""
        return self.values.reshape(self.shape.dims, order="F")

    def __getitem__(self, idx: tuple[int, int, int]) -> float:
        """Entry at a 1-based (i1, i2, i3) triple."""
        dims = self.shape.dims
        for l in range(3):
            if not 1 <= idx[l] <= dims[l]:
                raise RangeError(f"index {idx} out of range for shape {dims}")
        i1, i2, i3 = (i - 1 for i in idx)
        return float(self.values[i1 + dims[0] * (i2 + dims[1] * i3)])


def unfold_dense(t: DenseTensor3, mode: int) -> np.ndarray:
    """Mode-``mode`` unfolding as an I_mode x (size/I_mode) matrix.

    Mode 1 is a zero-copy view of the canonical layout.
    """
    _check_mode(mode)
    arr = t.as_array()
    n = t.shape.dims[mode - 1]
    return np.moveaxis(arr, mode - 1, 0).reshape(n, -1, order="F")


def fold_dense(m: np.ndarray, mode: int, shape: Shape3) -> DenseTensor3:
    """Inverse of :func:`unfold_dense`."""
    _check_mode(mode)
    m = np.asarray(m, dtype=np.float64)
    nrows, ncols = shape.mode_dims(mode)
    if m.shape != (nrows, ncols):
        raise ShapeError(
            f"mode-{mode} unfolding of {shape.dims} must be {nrows}x{ncols}, got {m.shape}"
        )
    rest = tuple(shape.dims[l] for l in range(3) if l != mode - 1)
    arr = m.reshape((nrows,) + rest, order="F")
    arr = np.moveaxis(arr, 0, mode - 1)
    return DenseTensor3(shape, arr.flatten(order="F"))


@dataclass
class SparseTensor3:
    """Sparse 3-order tensor in coordinate form.

    Entries are stored 0-based, sorted by the canonical (mode-1 unfolding
    column order) linear index, with per-mode unfolded CSR matrices
    precomputed so that unfolded matrix-vector products need no index math.
    """

    shape: Shape3
    i1: np.ndarray
    i2: np.ndarray
    i3: np.ndarray
    values: np.ndarray
    _csr: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        dims = self.shape.dims
        idx = [np.asarray(a, dtype=np.int64).reshape(-1) for a in (self.i1, self.i2, self.i3)]
        vals = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if not (idx[0].size == idx[1].size == idx[2].size == vals.size):
            raise ShapeError("index and value arrays must have equal length")
        for l in range(3):
            if idx[l].size and (idx[l].min() < 0 or idx[l].max() >= dims[l]):
                bad = int(np.argmax((idx[l] < 0) | (idx[l] >= dims[l])))
                raise RangeError(
                    f"entry {bad + 1}: mode-{l + 1} index {idx[l][bad] + 1} "
                    f"out of range for shape {dims}"
                )
        lin = idx[0] + dims[0] * (idx[1] + dims[1] * idx[2])
        order = np.argsort(lin, kind="stable")
        lin = lin[order]
        if lin.size > 1 and np.any(np.diff(lin) == 0):
            p = int(np.argmax(np.diff(lin) == 0))
            t = (idx[0][order][p] + 1, idx[1][order][p] + 1, idx[2][order][p] + 1)
            raise ShapeError(f"duplicate entry at index {t}")
        self.i1, self.i2, self.i3 = (a[order] for a in idx)
        self.values = vals[order]
        for a in (self.i1, self.i2, self.i3, self.values):
            a.flags.writeable = False
        self._csr = {}
        for mode in (1, 2, 3):
            rows, cols = mode_rowcol(self.shape, mode, self.i1, self.i2, self.i3)
            nrows, ncols = self.shape.mode_dims(mode)
            self._csr[mode] = sp.csr_matrix(
                (self.values, (rows, cols)), shape=(nrows, ncols)
            )

    @classmethod
    def from_entries(cls, shape: Shape3, entries) -> "SparseTensor3":
        """Build from an iterable of 1-based (i1, i2, i3, value) quadruples."""
        entries = list(entries)
        if not entries:
            z = np.zeros(0)
            return cls(shape, z, z, z, z)
        arr = np.asarray(entries, dtype=np.float64)
        return cls(shape, arr[:, 0] - 1, arr[:, 1] - 1, arr[:, 2] - 1, arr[:, 3])

    @property
    def nnz(self) -> int:
        return self.values.size

    def with_values(self, values: np.ndarray) -> "SparseTensor3":
        """Same sparsity pattern, new values."""
        return SparseTensor3(self.shape, self.i1, self.i2, self.i3, values)

    def unfold_csr(self, mode: int) -> sp.csr_matrix:
        """Precomputed CSR form of the mode unfolding."""
        _check_mode(mode)
        return self._csr[mode]

    def densify(self) -> DenseTensor3:
        arr = np.zeros(self.shape.dims, order="F")
        arr[self.i1, self.i2, self.i3] = self.values
        return DenseTensor3(self.shape, arr.flatten(order="F"))

    def fro_norm(self) -> float:
        return float(np.linalg.norm(self.values))


@dataclass(frozen=True)
class FactorPair:
    """Low-rank factorization U V^T of one mode-unfolding, tagged with its mode."""

    mode: int
    U: np.ndarray  # I_mode x k
    V: np.ndarray  # (size / I_mode) x k

    def __post_init__(self):
        _check_mode(self.mode)
        U = np.ascontiguousarray(self.U, dtype=np.float64)
        V = np.ascontiguousarray(self.V, dtype=np.float64)
        if U.ndim != 2 or V.ndim != 2:
            raise ShapeError("factors must be 2-d arrays")
        if U.shape[1] != V.shape[1]:
            raise ShapeError(
                f"factor rank mismatch: U has {U.shape[1]} columns, V has {V.shape[1]}"
            )
        U.flags.writeable = False
        V.flags.writeable = False
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

    @property
    def rank(self) -> int:
        return self.U.shape[1]

    def check_shape(self, shape: Shape3):
        nrows, ncols = shape.mode_dims(self.mode)
        if self.U.shape[0] != nrows or self.V.shape[0] != ncols:
            raise ShapeError(
                f"mode-{self.mode} factor of shape {shape.dims} must be "
                f"{nrows}xk and {ncols}xk, got {self.U.shape} and {self.V.shape}"
            )

    @classmethod
    def zero(cls, shape: Shape3, mode: int) -> "FactorPair":
        nrows, ncols = shape.mode_dims(mode)
        return cls(mode, np.zeros((nrows, 0)), np.zeros((ncols, 0)))


def fold_factor_dense(f: FactorPair, shape: Shape3) -> DenseTensor3:
    """Dense tensor folded from U V^T at the factor's mode (test/oracle path)."""
    f.check_shape(shape)
    return fold_dense(f.U @ f.V.T, f.mode, shape)


def inner(a: DenseTensor3, b: DenseTensor3) -> float:
    """Elementwise inner product of two equal-shape tensors."""
    if a.shape.dims != b.shape.dims:
        raise ShapeError(f"shape mismatch: {a.shape.dims} vs {b.shape.dims}")
    return float(np.dot(a.values, b.values))


def fro_norm(a: DenseTensor3) -> float:
    return float(np.linalg.norm(a.values))


def eval_factors(shape: Shape3, terms, i1, i2, i3) -> np.ndarray:
    """Evaluate sum_t coeff_t * fold(U_t V_t^T) at the given 0-based entries.

    ``terms`` is a list of (coeff, FactorPair). Cost O(nnz * sum_t k_t).
    """
    out = np.zeros(np.asarray(i1).size)
    for coeff, f in terms:
        f.check_shape(shape)
        if coeff == 0.0 or f.rank == 0:
            continue
        rows, cols = mode_rowcol(shape, f.mode, i1, i2, i3)
        out += coeff * np.einsum("ij,ij->i", f.U[rows], f.V[cols])
    return out


def sparse_residual(terms, obs: SparseTensor3, shape: Shape3 | None = None) -> SparseTensor3:
    """P_Omega(X - O) for X given in weighted factor form, on O's index set."""
    shape = shape or obs.shape
    if shape.dims != obs.shape.dims:
        raise ShapeError(f"shape mismatch: {shape.dims} vs {obs.shape.dims}")
    pred = eval_factors(shape, terms, obs.i1, obs.i2, obs.i3)
    return obs.with_values(pred - obs.values)
