"""Implicit "sparse plus low-rank" tensor operators.

An iterate of the form

    Z = sum_t coeff_t * fold(U_t V_t^T, mode_t) + c_s * S        (S sparse)

is exposed as a matrix along any mode through :class:`ModeView`, whose
matvec / rmatvec never materialize a dense tensor.  The cross-mode kernels
(:func:`kron_matvec`, :func:`kron_rmatvec`) run one rank-1 component at a
time so the scratch footprint stays O((1/I_i + 1/I_j) * I1*I2*I3) per
right-hand side, independent of the factor rank.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import blas

from .errors import ShapeError
from .tensors import (
    DenseTensor3,
    FactorPair,
    Shape3,
    SparseTensor3,
    eval_factors,
    fold_factor_dense,
)

__all__ = [
    "Workspace",
    "kron_matvec",
    "kron_rmatvec",
    "sparse_matvec",
    "sparse_rmatvec",
    "SplrOperator",
    "ModeView",
    "DenseOperator",
]


class Workspace:
    """Scratch-buffer arena that tracks allocation for the kernel space tests.

    Kernels route temporary buffers through :meth:`alloc`; reruns with the
    same buffer names reuse storage, which keeps power iterations
    allocation-free after warm-up.
    """

    def __init__(self):
        self._buffers: dict[str, np.ndarray] = {}
        self.peak_bytes = 0
        self._live = 0

    def reset(self):
        self._live = 0
        self.peak_bytes = 0

    def alloc(self, name: str, shape) -> np.ndarray:
        buf = self._buffers.get(name)
        if buf is None or buf.shape != tuple(shape):
            buf = np.empty(shape)
            self._buffers[name] = buf
        self._live += buf.nbytes
        self.peak_bytes = max(self.peak_bytes, self._live)
        return buf


def _as_block(x, length, what):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] != length:
        raise ShapeError(f"{what} must have length {length}, got shape {x.shape}")
    return x, single


def _factor_v_axes(shape: Shape3, mode: int):
    """Axes (dims, modes) of the V-column reshape for a mode-``mode`` factor."""
    m1, m2 = shape.other_modes(mode)
    return (shape.dims[m1 - 1], shape.dims[m2 - 1]), (m1, m2)


def kron_matvec(f: FactorPair, shape: Shape3, j: int, b, ws: Workspace | None = None):
    """[(U V^T)^<i>]_<j> b  for target mode j != f.mode, without folding.

    ``b`` is a vector of length I1*I2*I3/I_j or a block of such columns.
    """
    i = f.mode
    if j == i:
        raise ShapeError("target mode must differ from the factor's mode")
    f.check_shape(shape)
    dims = shape.dims
    Ij, ncols_j = shape.mode_dims(j)
    B, single = _as_block(b, ncols_j, "b")
    nb = B.shape[1]
    ws = ws or Workspace()

    l = next(m for m in (1, 2, 3) if m not in (i, j))
    Ii, Il = dims[i - 1], dims[l - 1]
    (vd1, vd2), (vm1, vm2) = _factor_v_axes(shape, i)

    # b's columns index the complementary modes of j (ascending, first fastest)
    bm1, bm2 = shape.other_modes(j)
    Bt = B.reshape(dims[bm1 - 1], dims[bm2 - 1], nb, order="F")
    if (bm1, bm2) != (i, l):
        Bt = Bt.transpose(1, 0, 2)  # -> (I_i, I_l, nb)

    y = ws.alloc("kmv_out", (Ij, nb))
    y[:] = 0.0
    if f.rank == 0:
        out = y.copy()
        return out[:, 0] if single else out
    Bflat = ws.alloc("kmv_b", (Ii, Il * nb))
    Bflat[:] = Bt.reshape(Ii, Il * nb)
    vbuf = ws.alloc("kmv_v", (vd1, vd2))
    for p in range(f.rank):
        vbuf[:] = f.V[:, p].reshape(vd1, vd2, order="F")
        Vp = vbuf if (vm1, vm2) == (j, l) else vbuf.T  # -> (I_j, I_l)
        g = (f.U[:, p] @ Bflat).reshape(Il, nb)
        y += Vp @ g
    out = y.copy()
    return out[:, 0] if single else out


def kron_rmatvec(f: FactorPair, shape: Shape3, j: int, a, ws: Workspace | None = None):
    """a^T [(U V^T)^<i>]_<j>  for target mode j != f.mode, without folding.

    ``a`` is a vector of length I_j or a block of such columns; the result
    lives in the mode-j column space (length I1*I2*I3/I_j per column).
    """
    i = f.mode
    if j == i:
        raise ShapeError("target mode must differ from the factor's mode")
    f.check_shape(shape)
    dims = shape.dims
    Ij, ncols_j = shape.mode_dims(j)
    A, single = _as_block(a, Ij, "a")
    nb = A.shape[1]
    ws = ws or Workspace()

    l = next(m for m in (1, 2, 3) if m not in (i, j))
    Ii, Il = dims[i - 1], dims[l - 1]
    (vd1, vd2), (vm1, vm2) = _factor_v_axes(shape, i)

    # result indexes the complementary modes of j: (i, l) in ascending order
    rm1, rm2 = shape.other_modes(j)
    R = ws.alloc("krm_acc", (Ii, Il, nb))
    R[:] = 0.0
    if f.rank > 0:
        Rt = R.reshape(Ii, Il * nb).T  # F-contiguous view for the rank-1 update
        vbuf = ws.alloc("krm_v", (vd1, vd2))
        for p in range(f.rank):
            vbuf[:] = f.V[:, p].reshape(vd1, vd2, order="F")
            Vp = vbuf if (vm1, vm2) == (j, l) else vbuf.T  # -> (I_j, I_l)
            w = Vp.T @ A  # (I_l, nb)
            blas.dger(1.0, w.reshape(Il * nb), f.U[:, p], a=Rt, overwrite_a=1)
    if (rm1, rm2) != (i, l):
        R = R.transpose(1, 0, 2)
    out = R.reshape(ncols_j, nb, order="F").copy()
    return out[:, 0] if single else out


def sparse_matvec(s: SparseTensor3, mode: int, b):
    """Mode unfolding of a sparse tensor times a vector (or block)."""
    _, ncols = s.shape.mode_dims(mode)
    B, single = _as_block(b, ncols, "b")
    out = s.unfold_csr(mode) @ B
    return out[:, 0] if single else out


def sparse_rmatvec(s: SparseTensor3, mode: int, a):
    """a^T times the mode unfolding of a sparse tensor."""
    nrows, _ = s.shape.mode_dims(mode)
    A, single = _as_block(a, nrows, "a")
    out = s.unfold_csr(mode).T @ A
    return out[:, 0] if single else out


class SplrOperator:
    """Weighted sum of mode-folded factor pairs plus one weighted sparse term."""

    def __init__(self, shape: Shape3, low_rank_terms=(), sparse_term=None):
        self.shape = shape
        terms = []
        for coeff, f in low_rank_terms:
            coeff = float(coeff)
            if not np.isfinite(coeff):
                raise ShapeError("low-rank term coefficient must be finite")
            f.check_shape(shape)
            if coeff != 0.0 and f.rank > 0:
                terms.append((coeff, f))
        self.low_rank_terms = terms
        if sparse_term is not None:
            cs, s = sparse_term
            cs = float(cs)
            if not np.isfinite(cs):
                raise ShapeError("sparse term coefficient must be finite")
            if s.shape.dims != shape.dims:
                raise ShapeError(
                    f"sparse term shape {s.shape.dims} != operator shape {shape.dims}"
                )
            if cs == 0.0 or s.nnz == 0:
                sparse_term = None
            else:
                sparse_term = (cs, s)
        self.sparse_term = sparse_term

    def mode_view(self, mode: int) -> "ModeView":
        return ModeView(self, mode)

    def eval_entries(self, i1, i2, i3) -> np.ndarray:
        """Evaluate the operator's low-rank part at 0-based entry indices.

        Only valid when there is no sparse term (pointwise sparse lookup is
        not supported).
        """
        if self.sparse_term is not None:
            raise ShapeError("eval_entries requires an operator without a sparse term")
        return eval_factors(self.shape, self.low_rank_terms, i1, i2, i3)

    def densify(self) -> DenseTensor3:
        """Dense materialization (oracle / baseline path only)."""
        acc = np.zeros(self.shape.size)
        for coeff, f in self.low_rank_terms:
            acc += coeff * fold_factor_dense(f, self.shape).values
        if self.sparse_term is not None:
            cs, s = self.sparse_term
            acc += cs * s.densify().values
        return DenseTensor3(self.shape, acc)

    def inner(self, other: "SplrOperator") -> float:
        """<self, other> for pure factor-form operators, without densifying.

        Same-mode pairs reduce to small Gram products; cross-mode pairs go
        through :func:`kron_matvec`.
        """
        if self.sparse_term is not None or other.sparse_term is not None:
            raise ShapeError("factor-form inner product requires no sparse terms")
        total = 0.0
        for c1, f1 in self.low_rank_terms:
            for c2, f2 in other.low_rank_terms:
                if f1.mode == f2.mode:
                    g = float(np.sum((f1.U.T @ f2.U) * (f1.V.T @ f2.V)))
                else:
                    prod = kron_matvec(f1, self.shape, f2.mode, f2.V)
                    g = float(np.sum(f2.U * prod))
                total += c1 * c2 * g
        return total

    def norm(self) -> float:
        return float(np.sqrt(max(self.inner(self), 0.0)))

    def max_rank(self) -> int:
        return max((f.rank for _, f in self.low_rank_terms), default=0)


class ModeView:
    """One mode unfolding of an :class:`SplrOperator` as a linear operator."""

    def __init__(self, op: SplrOperator, mode: int):
        self.op = op
        self.mode = mode
        self.nrows, self.ncols = op.shape.mode_dims(mode)
        self._ws = Workspace()

    def matmat(self, b):
        """Unfolded operator times a vector or block of column vectors."""
        B, single = _as_block(b, self.ncols, "b")
        out = np.zeros((self.nrows, B.shape[1]))
        for coeff, f in self.op.low_rank_terms:
            if f.mode == self.mode:
                out += coeff * (f.U @ (f.V.T @ B))
            else:
                out += coeff * kron_matvec(f, self.op.shape, self.mode, B, self._ws)
        if self.op.sparse_term is not None:
            cs, s = self.op.sparse_term
            out += cs * sparse_matvec(s, self.mode, B)
        return out[:, 0] if single else out

    def rmatmat(self, a):
        """Transposed unfolded operator times a vector or block."""
        A, single = _as_block(a, self.nrows, "a")
        out = np.zeros((self.ncols, A.shape[1]))
        for coeff, f in self.op.low_rank_terms:
            if f.mode == self.mode:
                out += coeff * (f.V @ (f.U.T @ A))
            else:
                out += coeff * kron_rmatvec(f, self.op.shape, self.mode, A, self._ws)
        if self.op.sparse_term is not None:
            cs, s = self.op.sparse_term
            out += cs * sparse_rmatvec(s, self.mode, A)
        return out[:, 0] if single else out

    matvec = matmat
    rmatvec = rmatmat


class DenseOperator:
    """Dense matrix behind the matvec/rmatvec protocol (tests and baselines)."""

    def __init__(self, m: np.ndarray):
        self.m = np.asarray(m, dtype=np.float64)
        self.nrows, self.ncols = self.m.shape

    def matmat(self, b):
        B, single = _as_block(b, self.ncols, "b")
        out = self.m @ B
        return out[:, 0] if single else out

    def rmatmat(self, a):
        A, single = _as_block(a, self.nrows, "a")
        out = self.m.T @ A
        return out[:, 0] if single else out

    matvec = matmat
    rmatvec = rmatmat
