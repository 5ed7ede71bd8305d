"""Compressed sparse row storage and preconditioned conjugate gradients."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, NumericalBreakdownError


@dataclass(frozen=True, eq=False)
class CsrMatrix:
    nrows: int
    ncols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        ro, ci, va = self.row_offsets, self.col_indices, self.values
        if len(ro) != self.nrows + 1 or ro[0] != 0 or ro[-1] != len(va) or len(ci) != len(va):
            raise InvalidArgumentError("inconsistent CSR offsets")
        if np.any(np.diff(ro) < 0):
            raise InvalidArgumentError("row offsets must be nondecreasing")
        if len(ci) and (ci.min() < 0 or ci.max() >= self.ncols):
            raise InvalidArgumentError("column index out of range")
        for arr in (ro, ci, va):
            arr.setflags(write=False)

    @classmethod
    def from_triplets(cls, rows, cols, vals, shape, symmetric=False) -> "CsrMatrix":
        """Build from COO triplets; duplicate entries are summed in input order."""
        nrows, ncols = shape
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        if len(rows) and (rows.min() < 0 or rows.max() >= nrows or cols.min() < 0 or cols.max() >= ncols):
            raise InvalidArgumentError("triplet index out of range")
        key = rows * ncols + cols
        order = np.argsort(key, kind="stable")
        key = key[order]
        uniq, start = np.unique(key, return_index=True)
        summed = np.add.reduceat(vals[order], start) if len(vals) else vals
        r = uniq // ncols
        c = uniq % ncols
        offsets = np.zeros(nrows + 1, dtype=np.int64)
        np.add.at(offsets, r + 1, 1)
        offsets = np.cumsum(offsets)
        return cls(nrows, ncols, offsets, c.astype(np.int64), summed, symmetric)

    @classmethod
    def from_dense(cls, dense, symmetric=False) -> "CsrMatrix":
        dense = np.asarray(dense, dtype=float)
        r, c = np.nonzero(dense)
        return cls.from_triplets(r, c, dense[r, c], dense.shape, symmetric)

    @classmethod
    def identity(cls, n) -> "CsrMatrix":
        idx = np.arange(n)
        return cls.from_triplets(idx, idx, np.ones(n), (n, n), symmetric=True)

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    @property
    def nnz(self) -> int:
        return len(self.values)

    def row_ids(self) -> np.ndarray:
        return np.repeat(np.arange(self.nrows), np.diff(self.row_offsets))

    def to_dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        np.add.at(out, (self.row_ids(), self.col_indices), self.values)
        return out

    def diagonal(self) -> np.ndarray:
        d = np.zeros(min(self.shape))
        rid = self.row_ids()
        on = rid == self.col_indices
        d[rid[on]] = self.values[on]
        return d

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.row_ids(), weights=self.values, minlength=self.nrows)

    def max_asymmetry(self) -> float:
        if self.nrows != self.ncols:
            raise InvalidArgumentError("matrix is not square")
        if self.nnz == 0:
            return 0.0
        dense = self.to_dense()
        return float(np.abs(dense - dense.T).max())

    def submatrix(self, rows, cols) -> "CsrMatrix":
        """Extract ``A[rows][:, cols]`` for sorted index arrays."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        col_map = np.full(self.ncols, -1, dtype=np.int64)
        col_map[cols] = np.arange(len(cols))
        row_map = np.full(self.nrows, -1, dtype=np.int64)
        row_map[rows] = np.arange(len(rows))
        rid = row_map[self.row_ids()]
        cid = col_map[self.col_indices]
        keep = (rid >= 0) & (cid >= 0)
        return CsrMatrix.from_triplets(rid[keep], cid[keep], self.values[keep], (len(rows), len(cols)),
                                       symmetric=self.symmetric and np.array_equal(rows, cols))

    def scaled(self, factor: float) -> "CsrMatrix":
        return CsrMatrix(self.nrows, self.ncols, self.row_offsets.copy(), self.col_indices.copy(),
                         factor * self.values, self.symmetric)

    def __matmul__(self, x):
        return spmv(self, x)


def spmv(A: CsrMatrix, x) -> np.ndarray:
    """Sparse matrix-vector product ``A @ x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (A.ncols,):
        raise InvalidArgumentError(f"vector of length {x.size} does not match {A.ncols} columns")
    return np.bincount(A.row_ids(), weights=A.values * x[A.col_indices], minlength=A.nrows)


@dataclass(frozen=True)
class CgReport:
    iterations: int
    final_residual_norm: float  # relative: ||b - Ax|| / ||b||
    converged: bool


def cg_solve(A: CsrMatrix, b, tol=1e-12, max_iter=None, preconditioner="none", x0=None):
    """Solve ``A x = b`` for symmetric positive definite ``A``.

    Stops when the true relative residual ``||b - A x|| / ||b||`` is at most
    ``tol``. Non-convergence is reported through ``CgReport.converged``.

    Parameters
    ----------
    preconditioner : {"none", "jacobi"}
    x0 : array, optional
        Starting vector (default zero).

    Returns
    -------
    x, CgReport
    """
    if tol <= 0:
        raise InvalidArgumentError("tol must be positive")
    if A.nrows != A.ncols:
        raise InvalidArgumentError("matrix must be square")
    b = np.asarray(b, dtype=float)
    n = A.nrows
    if b.shape != (n,):
        raise InvalidArgumentError("right-hand side has the wrong length")
    if max_iter is None:
        max_iter = 10 * max(n, 1)
    if preconditioner not in ("none", "jacobi"):
        raise InvalidArgumentError(f"unknown preconditioner {preconditioner!r}")
    if not np.isfinite(b).all():
        raise NumericalBreakdownError("right-hand side contains NaN or inf")

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = float(np.linalg.norm(b))
    if bnorm == 0.0:
        return np.zeros(n), CgReport(0, 0.0, True)

    if preconditioner == "jacobi":
        diag = A.diagonal()
        if np.any(diag <= 0):
            raise NumericalBreakdownError("Jacobi preconditioner needs a positive diagonal")
        inv_diag = 1.0 / diag
    else:
        inv_diag = None

    def precond(r):
        return r if inv_diag is None else inv_diag * r

    it = 0
    r = b - spmv(A, x)
    rel = np.linalg.norm(r) / bnorm
    if not np.isfinite(rel):
        raise NumericalBreakdownError("NaN encountered in the initial residual")
    # Outer loop restarts from the true residual if the recursive one drifted.
    while rel > tol and it < max_iter:
        zv = precond(r)
        p = zv.copy()
        rz = float(r @ zv)
        while it < max_iter:
            Ap = spmv(A, p)
            pAp = float(p @ Ap)
            if not np.isfinite(pAp):
                raise NumericalBreakdownError(f"NaN encountered in CG at iteration {it}")
            if pAp <= 0:
                raise NumericalBreakdownError("matrix is not positive definite (p^T A p <= 0)")
            alpha = rz / pAp
            x += alpha * p
            r -= alpha * Ap
            it += 1
            if np.linalg.norm(r) / bnorm <= tol:
                break
            zv = precond(r)
            rz_new = float(r @ zv)
            p = zv + (rz_new / rz) * p
            rz = rz_new
        r = b - spmv(A, x)
        rel_new = np.linalg.norm(r) / bnorm
        if not np.isfinite(rel_new):
            raise NumericalBreakdownError("NaN encountered in CG residual")
        if rel_new > tol and rel_new >= rel:
            rel = rel_new
            break  # restart brought no progress: accuracy floor reached
        rel = rel_new
    return x, CgReport(it, float(rel), bool(rel <= tol))


def write_matrix_market(path, A: CsrMatrix, comment: str = "") -> None:
    """Export in MatrixMarket coordinate real general format (1-based)."""
    lines = ["%%MatrixMarket matrix coordinate real general"]
    if comment:
        lines.extend(f"% {c}" for c in comment.splitlines())
    lines.append(f"{A.nrows} {A.ncols} {A.nnz}")
    for i, j, v in zip(A.row_ids(), A.col_indices, A.values):
        lines.append(f"{i + 1} {j + 1} {v:.17g}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_matrix_market(path) -> CsrMatrix:
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("%")]
    nrows, ncols, nnz = (int(t) for t in lines[0].split())
    data = np.loadtxt(lines[1:1 + nnz], ndmin=2) if nnz else np.zeros((0, 3))
    return CsrMatrix.from_triplets(data[:, 0].astype(int) - 1, data[:, 1].astype(int) - 1, data[:, 2],
                                   (nrows, ncols))
