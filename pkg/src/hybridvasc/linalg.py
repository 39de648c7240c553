"""Sparse assembly helpers and the Krylov solve shared by all models."""
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.io
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import ConvergenceError, SingularSystemError


class TripletBuilder:
    """Accumulates COO triplets; coupling entries are also kept per family.

    Coupling terms are added in (+v, -v) pairs through :meth:`add_coupling` so
    that the per-family sum of assembled values vanishes exactly.
    """

    def __init__(self, n):
        self.n = int(n)
        self._rows, self._cols, self._vals = [], [], []
        self.families = {}

    def add(self, rows, cols, vals):
        rows = np.atleast_1d(np.asarray(rows, dtype=np.int64))
        cols = np.atleast_1d(np.asarray(cols, dtype=np.int64))
        vals = np.broadcast_to(np.asarray(vals, dtype=float), rows.shape)
        if rows.shape != cols.shape:
            raise ValueError("row and column arrays differ in shape")
        self._rows.append(rows.ravel())
        self._cols.append(cols.ravel())
        self._vals.append(np.array(vals, dtype=float).ravel())

    def add_coupling(self, family, row_pos, row_neg, cols, vals):
        """Add ``+vals`` at ``(row_pos, cols)`` and ``-vals`` at ``(row_neg, cols)``."""
        row_pos = np.atleast_1d(np.asarray(row_pos, dtype=np.int64))
        row_neg = np.atleast_1d(np.asarray(row_neg, dtype=np.int64))
        cols = np.atleast_1d(np.asarray(cols, dtype=np.int64))
        vals = np.atleast_1d(np.asarray(vals, dtype=float))
        self.add(row_pos, cols, vals)
        self.add(row_neg, cols, -vals)
        fam = self.families.setdefault(family, [])
        fam.append(vals.copy())
        fam.append(-vals)

    def add_rhs_coupling(self, family, rhs, row_pos, row_neg, vals):
        """Add ``+vals`` to ``rhs[row_pos]`` and ``-vals`` to ``rhs[row_neg]``."""
        vals = np.atleast_1d(np.asarray(vals, dtype=float))
        np.add.at(rhs, np.asarray(row_pos, dtype=np.int64), vals)
        np.add.at(rhs, np.asarray(row_neg, dtype=np.int64), -vals)
        fam = self.families.setdefault(f"{family}:rhs", [])
        fam.append(vals.copy())
        fam.append(-vals)

    def family_sums(self):
        """Exactly rounded sum of every coupling family's assembled values."""
        return {k: math.fsum(np.concatenate(v).tolist()) for k, v in self.families.items()}

    def tocsr(self):
        if self._rows:
            rows = np.concatenate(self._rows)
            cols = np.concatenate(self._cols)
            vals = np.concatenate(self._vals)
        else:
            rows = cols = np.zeros(0, dtype=np.int64)
            vals = np.zeros(0)
        if not np.all(np.isfinite(vals)):
            raise ValueError("non-finite matrix entry")
        A = sp.coo_matrix((vals, (rows, cols)), shape=(self.n, self.n)).tocsr()
        A.sum_duplicates()
        return A


@dataclass
class SolveInfo:
    method: str
    iterations: int
    residual: float
    history: list = field(default_factory=list)


def _split_scaling(A, kind):
    """Symmetric diagonal scaling ``D^-1/2 A D^-1/2`` used by the Jacobi option.

    Applying Jacobi as a split (two-sided) scaling keeps the scaled operator
    close to symmetric, which avoids the BiCGSTAB breakdowns seen with
    one-sided Jacobi on the nearly singular tissue blocks.
    """
    n = A.shape[0]
    if kind == "jacobi" or kind == "ilu":
        d = np.abs(A.diagonal())
        if np.any(d == 0):
            raise SingularSystemError("zero diagonal entry; Jacobi scaling undefined")
        s = 1.0 / np.sqrt(d)
    elif kind in (None, "none"):
        s = np.ones(n)
    else:
        raise ValueError(f"unknown preconditioner {kind!r}")
    S = sp.diags(s)
    return (S @ A @ S).tocsr(), s


def solve(A, b, tol=1.0e-10, max_iter=None, preconditioner="jacobi", method="bicgstab",
          x0=None, return_info=False):
    """Solve ``A x = b`` and verify ``||A x - b|| <= tol ||b||``.

    Parameters
    ----------
    A : sparse matrix
    b : ndarray
    tol : float
        Relative residual target in (0, 1).
    max_iter : int, optional
        Krylov iteration cap, ``10 n`` by default.
    preconditioner : {"jacobi", "ilu", "none"}
        ``"ilu"`` adds an incomplete LU factorisation on top of the Jacobi
        scaling.
    method : {"bicgstab", "direct"}
        ``"direct"`` uses a sparse LU factorisation and still enforces the
        residual contract.

    Raises
    ------
    ConvergenceError
        On breakdown, iteration cap, or a failed post-hoc residual check.
    """
    A = sp.csr_matrix(A)
    b = np.asarray(b, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or b.shape != (n,):
        raise ValueError(f"dimension mismatch: A {A.shape}, b {b.shape}")
    if not 0.0 < tol < 1.0:
        raise ValueError("tol must lie in (0, 1)")
    bnorm = float(np.linalg.norm(b))
    if n == 0 or bnorm == 0.0:
        x = np.zeros(n)
        info = SolveInfo(method, 0, 0.0, [0.0])
        return (x, info) if return_info else x

    def true_residual(x):
        if not np.all(np.isfinite(x)):
            return math.inf
        return float(np.linalg.norm(b - A @ x)) / bnorm

    history = []
    if method == "direct":
        try:
            with np.errstate(all="ignore"):
                x = spla.splu(A.tocsc()).solve(b)
        except RuntimeError as exc:
            raise ConvergenceError(f"direct factorisation failed: {exc}") from None
        iterations = 1
    elif method == "bicgstab":
        max_iter = 10 * n if max_iter is None else int(max_iter)
        As, s = _split_scaling(A, preconditioner)
        bs = s * b
        M = None
        if preconditioner == "ilu":
            ilu = spla.spilu(As.tocsc(), fill_factor=1.0, drop_tol=0.0)
            M = spla.LinearOperator((n, n), matvec=ilu.solve, dtype=float)
        y = None if x0 is None else np.asarray(x0, dtype=float) / s
        iterations = 0
        rtol = tol

        def record(yk):
            history.append(true_residual(s * yk))

        # the Krylov test runs on the scaled system; tighten and restart
        # until the unscaled residual also meets the contract. A breakdown
        # restarts from the last iterate.
        breakdowns = 0
        for _ in range(6):
            y, flag = spla.bicgstab(As, bs, x0=y, rtol=rtol, atol=0.0,
                                    maxiter=max_iter - iterations, M=M, callback=record)
            iterations = len(history)
            if true_residual(s * y) <= tol or flag > 0 or iterations >= max_iter:
                break
            if flag < 0:
                breakdowns += 1
            else:
                rtol *= 1.0e-2
        x = s * y
        if breakdowns and not true_residual(x) <= tol:
            raise ConvergenceError(f"BiCGSTAB breakdown ({breakdowns} restarts)",
                                   true_residual(x), history)
    else:
        raise ValueError(f"unknown method {method!r}")

    res = true_residual(x)
    if not res <= tol:
        raise ConvergenceError(
            f"{method} did not reach relative residual {tol:g} (final {res:.3e})", res, history)
    info = SolveInfo(method, iterations, res, history)
    return (x, info) if return_info else x


def write_matrix_market(path, A, comment=""):
    """Dump a matrix in MatrixMarket coordinate format."""
    scipy.io.mmwrite(str(path), sp.coo_matrix(A), comment=comment)
