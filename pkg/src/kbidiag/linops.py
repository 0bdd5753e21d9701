"""Linear operators, norms, dense SVD oracle, and test-matrix generators.

Operators are tall or square (m >= n), applied through numba kernels that
fix the summation order, so dense and sparse storage of the same matrix
produce bit-identical products.  binary32 precision is emulated: results
are accumulated in binary64 and rounded to float32 afterwards.
"""

import enum

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import ConvergenceError, DimensionError, InvalidInput

EPS64 = 2.0 ** -53
EPS32 = 2.0 ** -24


class PrecisionMode(enum.Enum):
    BINARY64 = "double"
    BINARY32 = "single"

    @property
    def unit_roundoff(self):
        return EPS32 if self is PrecisionMode.BINARY32 else EPS64

    def round(self, x):
        """Round a scalar or array to the mode's storage precision."""
        if self is PrecisionMode.BINARY64:
            return x
        if np.ndim(x) == 0:
            return float(np.float32(x))
        return np.asarray(x, dtype=np.float32).astype(np.float64)


def _check_vector(x, length, what):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.shape != (length,):
        raise DimensionError(f"{what}: expected length {length}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInput(f"{what}: non-finite entries")
    return x


class LinearOperator:
    """An m-by-n real operator (m >= n) with forward and adjoint products."""

    def __init__(self, m, n, mode=PrecisionMode.BINARY64):
        m, n = int(m), int(n)
        if m < n:
            raise InvalidInput(f"operator must be tall or square, got {m}x{n}")
        self.m = m
        self.n = n
        self.mode = mode

    @property
    def shape(self):
        return (self.m, self.n)

    def apply(self, x):
        raise NotImplementedError

    def adjoint_apply(self, y):
        raise NotImplementedError

    def to_dense(self):
        raise NotImplementedError


class DenseOperator(LinearOperator):
    def __init__(self, a, mode=PrecisionMode.BINARY64):
        a = np.ascontiguousarray(a, dtype=np.float64)
        if a.ndim != 2:
            raise InvalidInput("dense operator needs a 2-d array")
        if not np.all(np.isfinite(a)):
            raise InvalidInput("dense operator entries must be finite")
        super().__init__(a.shape[0], a.shape[1], mode)
        self._a = a

    def apply(self, x):
        x = _check_vector(x, self.n, "matvec input")
        out = np.empty(self.m)
        _kernels.dense_matvec(self._a, x, out)
        return self.mode.round(out)

    def adjoint_apply(self, y):
        y = _check_vector(y, self.m, "adjoint matvec input")
        out = np.empty(self.n)
        _kernels.dense_rmatvec(self._a, y, out)
        return self.mode.round(out)

    def to_dense(self):
        return self._a.copy()


class SparseOperator(LinearOperator):
    """CSR-backed operator; column indices are sorted within each row."""

    def __init__(self, a, mode=PrecisionMode.BINARY64):
        a = sp.csr_matrix(a)
        a.sort_indices()
        a.sum_duplicates()
        if not np.all(np.isfinite(a.data)):
            raise InvalidInput("sparse operator entries must be finite")
        super().__init__(a.shape[0], a.shape[1], mode)
        self._indptr = a.indptr.astype(np.int64)
        self._indices = a.indices.astype(np.int64)
        self._data = a.data.astype(np.float64)

    @property
    def nnz(self):
        return self._data.size

    def apply(self, x):
        x = _check_vector(x, self.n, "matvec input")
        out = np.empty(self.m)
        _kernels.csr_matvec(self._indptr, self._indices, self._data, x, out)
        return self.mode.round(out)

    def adjoint_apply(self, y):
        y = _check_vector(y, self.m, "adjoint matvec input")
        out = np.empty(self.n)
        _kernels.csr_rmatvec(self._indptr, self._indices, self._data, y, self.n, out)
        return self.mode.round(out)

    def to_dense(self):
        a = sp.csr_matrix(
            (self._data, self._indices, self._indptr), shape=(self.m, self.n)
        )
        return np.asarray(a.todense(), dtype=np.float64)

    def to_sparse(self):
        return sp.csr_matrix(
            (self._data.copy(), self._indices.copy(), self._indptr.copy()),
            shape=(self.m, self.n),
        )


def as_operator(a, mode=PrecisionMode.BINARY64):
    """Wrap a dense array or scipy sparse matrix as a LinearOperator."""
    if isinstance(a, LinearOperator):
        return a
    if sp.issparse(a):
        return SparseOperator(a, mode)
    return DenseOperator(np.asarray(a, dtype=np.float64), mode)


def matvec(op, x):
    """A @ x in the operator's precision mode."""
    return op.apply(x)


def adjoint_matvec(op, y):
    """A.T @ y in the operator's precision mode."""
    return op.adjoint_apply(y)


def dense_svd(m):
    """Full SVD of a dense matrix: (U, s, V) with M = U @ diag(s) @ V.T."""
    m = np.asarray(m, dtype=np.float64)
    if not np.all(np.isfinite(m)):
        raise InvalidInput("dense_svd: non-finite entries")
    u, s, vt = np.linalg.svd(m, full_matrices=True)
    return u, s, vt.T


_POWER_SEED = 0x5EED


def _power_estimate(op, tol, max_iter):
    """Largest singular value via power iteration on A^T A.

    Returns (estimate, converged).  Deterministic: internally seeded.
    """
    rng = np.random.default_rng(_POWER_SEED)
    v = rng.standard_normal(op.n)
    nv = np.linalg.norm(v)
    if nv == 0.0:
        raise InvalidInput("power iteration: degenerate start")
    v /= nv
    lam = 0.0
    for _ in range(max_iter):
        w = op.adjoint_apply(op.apply(v))
        lam = float(v @ w)
        resid = np.linalg.norm(w - lam * v)
        if lam <= 0.0:
            nw = np.linalg.norm(w)
            if nw == 0.0:
                raise InvalidInput("spectral_norm: operator is zero on test vector")
            v = w / nw
            continue
        if resid <= tol * lam:
            return float(np.sqrt(lam)), True
        v = w / np.linalg.norm(w)
    return float(np.sqrt(max(lam, 0.0))), False


def spectral_norm(op, tol=1e-6, max_iter=5000):
    """Largest singular value of the operator.

    Dense operators use a full SVD; sparse/implicit operators use power
    iteration on A^T A with a fixed internal seed.
    """
    if isinstance(op, DenseOperator):
        s = np.linalg.svd(op.to_dense(), compute_uv=False)
        if s[0] == 0.0:
            raise InvalidInput("spectral_norm: zero operator")
        return float(s[0])
    est, ok = _power_estimate(op, tol, max_iter)
    if not ok:
        raise ConvergenceError(
            f"power iteration did not reach tol={tol} within {max_iter} iterations",
            best_estimate=est,
        )
    return est


def norm_estimate(op, tol=1e-4, max_iter=300):
    """Non-raising ||A|| estimate used for termination thresholds."""
    try:
        est, _ = _power_estimate(op, tol, max_iter)
    except InvalidInput:
        return 0.0
    return est


# ---------------------------------------------------------------------------
# generators


def identity_operator(n, mode=PrecisionMode.BINARY64):
    return DenseOperator(np.eye(n), mode)


def diagonal_operator(values, m=None, mode=PrecisionMode.BINARY64):
    """diag(values), optionally padded with zero rows to m >= n."""
    values = np.asarray(values, dtype=np.float64)
    n = values.size
    m = n if m is None else int(m)
    a = np.zeros((m, n))
    a[np.arange(n), np.arange(n)] = values
    return DenseOperator(a, mode)


def random_dense(m, n, seed=0, mode=PrecisionMode.BINARY64):
    rng = np.random.default_rng(seed)
    return DenseOperator(rng.standard_normal((m, n)), mode)


def rank_one_operator(u, v, mode=PrecisionMode.BINARY64):
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    return DenseOperator(np.outer(u, v), mode)


def orthog_type1(n):
    """Symmetric orthogonal matrix P(i,j) = sqrt(2/(n+1)) sin(ij pi/(n+1)).

    The integer product ij is reduced mod the sine period before the
    float multiply, keeping the columns orthonormal to a few ulps.
    """
    i = np.arange(1, n + 1, dtype=np.int64)
    ij = np.outer(i, i) % (2 * (n + 1))
    return np.sqrt(2.0 / (n + 1)) * np.sin(ij * (np.pi / (n + 1)))


def orthog_type2(n):
    """Symmetric orthogonal matrix Q(i,j) = 2/sqrt(2n+1) sin(2ij pi/(2n+1))."""
    i = np.arange(1, n + 1, dtype=np.int64)
    ij = (2 * np.outer(i, i)) % (2 * (2 * n + 1))
    return (2.0 / np.sqrt(2 * n + 1)) * np.sin(ij * (np.pi / (2 * n + 1)))


def clustered_spectrum_profile(n):
    """Singular-value profile with double extremes: 1, 1, .95, ..., 1e-4, 1e-4."""
    if n < 8:
        raise InvalidInput("clustered-spectrum matrix needs n >= 8")
    s = np.empty(n)
    s[0] = s[1] = 1.0
    s[2] = 0.95
    s[3 : n - 3] = np.linspace(0.90, 0.15, n - 6)
    s[n - 3] = 0.1
    s[n - 2] = s[n - 1] = 1e-4
    return s


def clustered_spectrum_matrix(n):
    """Dense n-by-n matrix P diag(s) Q^T with the clustered profile above.

    sigma_1 = sigma_2 = 1.0 and sigma_{n-1} = sigma_n = 1e-4 by
    construction; P and Q are the two trigonometric orthogonal families.
    """
    s = clustered_spectrum_profile(n)
    p = orthog_type1(n)
    q = orthog_type2(n)
    return (p * s) @ q.T
