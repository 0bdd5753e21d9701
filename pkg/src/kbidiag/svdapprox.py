"""Partial SVD through the bidiagonalization: compact SVD of B_k, Ritz
triplets, convergence tracking, and multiplicity gaps.

The bidiagonal SVD is an implicit-shift QR iteration written here (Givens
bulge chasing on the upper-bidiagonal form), independent of the dense SVD
oracle it is tested against.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .bidiag import Status, init, step
from .errors import ConvergenceError, InvalidInput, StateError
from .linops import PrecisionMode

_EPS = 2.0 ** -53


@njit(cache=True)
def _lower_to_upper(d, e, rot_c, rot_s, tall):
    """Left Givens sweep turning a lower bidiagonal into an upper one.

    d: diagonal (length k), e: subdiagonal (length k if tall else k-1).
    Rotation j acts on rows (j, j+1); fill-in lands on the superdiagonal,
    which is written back into e (length k-1 used on output).
    """
    k = d.shape[0]
    nrot = k if tall else k - 1
    cur = d[0]
    for j in range(nrot):
        r = math.hypot(cur, e[j])
        if r == 0.0:
            c, s = 1.0, 0.0
        else:
            c, s = cur / r, e[j] / r
        rot_c[j] = c
        rot_s[j] = s
        d[j] = r
        if j < k - 1:
            e[j] = s * d[j + 1]
            cur = c * d[j + 1]
    if not tall:
        d[k - 1] = cur


@njit(cache=True)
def _rot_cols(mat, i, j, c, s):
    for row in range(mat.shape[0]):
        t1 = mat[row, i]
        t2 = mat[row, j]
        mat[row, i] = c * t1 + s * t2
        mat[row, j] = -s * t1 + c * t2


@njit(cache=True)
def _qr_upper_bidiag(d, e, u_acc, v_acc):
    """Implicit-shift QR on an upper bidiagonal; returns 0 on success.

    Maintains B_in = u_acc @ bidiag(d, e) @ v_acc.T throughout.
    """
    p = d.shape[0]
    if p == 1:
        return 0
    scale = 0.0
    for i in range(p):
        if abs(d[i]) > scale:
            scale = abs(d[i])
    for i in range(p - 1):
        if abs(e[i]) > scale:
            scale = abs(e[i])
    if scale == 0.0:
        return 0
    tol = _EPS
    floor = _EPS * _EPS * scale
    hi = p - 1
    iters = 0
    max_iters = 60 * p * p
    while hi > 0:
        iters += 1
        if iters > max_iters:
            return 1
        # deflate converged trailing entries
        while hi > 0 and (
            abs(e[hi - 1]) <= tol * (abs(d[hi - 1]) + abs(d[hi]))
            or abs(e[hi - 1]) <= floor
        ):
            e[hi - 1] = 0.0
            hi -= 1
        if hi == 0:
            break
        lo = hi - 1
        while lo > 0 and not (
            abs(e[lo - 1]) <= tol * (abs(d[lo - 1]) + abs(d[lo]))
            or abs(e[lo - 1]) <= floor
        ):
            lo -= 1

        # zero diagonal inside the block: chase the coupling entry out
        zero_diag = -1
        dtol = _EPS * scale
        for i in range(lo, hi + 1):
            if abs(d[i]) <= dtol:
                zero_diag = i
                break
        if zero_diag == hi:
            # rotate e[hi-1] upward out of column hi (right rotations)
            d[hi] = 0.0
            f = e[hi - 1]
            e[hi - 1] = 0.0
            for j in range(hi - 1, lo - 1, -1):
                r = math.hypot(d[j], f)
                c, s = (1.0, 0.0) if r == 0.0 else (d[j] / r, -f / r)
                d[j] = r
                _rot_cols(v_acc, j, hi, c, -s)
                if j > lo:
                    f = s * e[j - 1]
                    e[j - 1] = c * e[j - 1]
            continue
        if zero_diag >= 0:
            # rotate e[i] rightward out of row i (left rotations)
            i = zero_diag
            d[i] = 0.0
            f = e[i]
            e[i] = 0.0
            for j in range(i + 1, hi + 1):
                r = math.hypot(d[j], f)
                c, s = (1.0, 0.0) if r == 0.0 else (d[j] / r, f / r)
                d[j] = r
                _rot_cols(u_acc, i, j, c, -s)
                if j < hi:
                    f = -s * e[j]
                    e[j] = c * e[j]
            continue

        # Wilkinson shift from the trailing 2x2 of B^T B
        t11 = d[hi - 1] * d[hi - 1]
        if hi - 1 > lo:
            t11 += e[hi - 2] * e[hi - 2]
        t12 = d[hi - 1] * e[hi - 1]
        t22 = d[hi] * d[hi] + e[hi - 1] * e[hi - 1]
        if t12 == 0.0:
            mu = t22
        else:
            delta = 0.5 * (t11 - t22)
            sgn = 1.0 if delta >= 0.0 else -1.0
            mu = t22 - t12 * t12 / (delta + sgn * math.hypot(delta, t12))

        y = d[lo] * d[lo] - mu
        z = d[lo] * e[lo]
        for i in range(lo, hi):
            # right rotation zeroing z against y
            r = math.hypot(y, z)
            c, s = (1.0, 0.0) if r == 0.0 else (y / r, z / r)
            if i > lo:
                e[i - 1] = r
            td, te = d[i], e[i]
            d[i] = c * td + s * te
            e[i] = -s * td + c * te
            bulge = s * d[i + 1]
            d[i + 1] = c * d[i + 1]
            _rot_cols(v_acc, i, i + 1, c, s)
            # left rotation zeroing the bulge against d[i]
            r2 = math.hypot(d[i], bulge)
            c2, s2 = (1.0, 0.0) if r2 == 0.0 else (d[i] / r2, bulge / r2)
            d[i] = r2
            te2, td2 = e[i], d[i + 1]
            e[i] = c2 * te2 + s2 * td2
            d[i + 1] = -s2 * te2 + c2 * td2
            if i < hi - 1:
                y = e[i]
                z = s2 * e[i + 1]
                e[i + 1] = c2 * e[i + 1]
            _rot_cols(u_acc, i, i + 1, c2, s2)
    return 0


def _extract_bidiagonal(b):
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 2:
        raise InvalidInput("bidiag_svd expects a matrix")
    rows, k = b.shape
    if k < 1 or rows not in (k, k + 1):
        raise InvalidInput(f"expected a (k+1)-by-k or k-by-k matrix, got {b.shape}")
    d = np.diag(b).copy()
    sub = np.array([b[j + 1, j] for j in range(min(rows - 1, k))])
    mask = np.ones_like(b, dtype=bool)
    mask[np.arange(k), np.arange(k)] = False
    rr = np.arange(min(rows - 1, k))
    mask[rr + 1, rr] = False
    if b[mask].size and np.abs(b[mask]).max() != 0.0:
        raise InvalidInput("matrix is not lower bidiagonal")
    return d, sub, rows == k + 1


def bidiag_svd(b):
    """Compact SVD of a lower bidiagonal matrix: (H, s, Z).

    B = H @ diag(s) @ Z.T with H of shape (rows, k) having orthonormal
    columns, s descending, and Z k-by-k orthogonal.
    """
    d, sub, tall = _extract_bidiagonal(b)
    k = d.shape[0]
    rows = k + 1 if tall else k
    e = np.zeros(max(k, 1))
    e[: sub.size] = sub
    # scale to O(1) so the squared quantities in the shift cannot over- or
    # underflow; singular values are rescaled on the way out
    scale = max(np.abs(d).max(), np.abs(e).max() if e.size else 0.0)
    if scale == 0.0 or not np.isfinite(scale):
        scale = 1.0
    rot_c = np.zeros(max(k, 1))
    rot_s = np.zeros(max(k, 1))
    d1 = d / scale
    e1 = e / scale
    _lower_to_upper(d1, e1, rot_c, rot_s, tall)
    u_acc = np.eye(k)
    v_acc = np.eye(k)
    status = _qr_upper_bidiag(d1, e1[: max(k - 1, 1)], u_acc, v_acc)
    if status != 0:
        raise ConvergenceError("bidiagonal QR iteration exceeded its budget")
    # sign fix and descending sort
    neg = d1 < 0.0
    d1[neg] = -d1[neg]
    u_acc[:, neg] = -u_acc[:, neg]
    order = np.argsort(-d1, kind="stable")
    s = d1[order] * scale
    u_acc = u_acc[:, order]
    z = v_acc[:, order]
    # fold the lower-to-upper rotations back into the left factor
    h = np.zeros((rows, k))
    h[:k, :] = u_acc
    nrot = k if tall else k - 1
    for j in range(nrot - 1, -1, -1):
        c, sg = rot_c[j], rot_s[j]
        top = h[j, :].copy()
        bot = h[j + 1, :].copy()
        h[j, :] = c * top - sg * bot
        h[j + 1, :] = sg * top + c * bot
    return h, s, z


@dataclass
class RitzDecomposition:
    k: int
    H: np.ndarray
    theta: np.ndarray
    Z: np.ndarray
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    residuals: np.ndarray | None = None


def ritz_triplets(fact, op, decomposition=None):
    """Assemble approximate singular triplets and their true residuals.

    Residuals are recomputed with fresh operator applications:
    max(||A y_i - s_i x_i||, ||A^T x_i - s_i y_i||).
    """
    square = fact.status is Status.LUCKY_BETA
    bmat = fact.B(square=square)
    if decomposition is None:
        h, s, z = bidiag_svd(bmat)
        decomposition = RitzDecomposition(k=fact.k, H=h, theta=s, Z=z)
    h, s, z = decomposition.H, decomposition.theta, decomposition.Z
    u_cols = fact.U[:, : h.shape[0]]
    x = u_cols @ h
    y = fact.V[:, : fact.k] @ z
    res = np.empty(s.size)
    for i in range(s.size):
        r1 = np.linalg.norm(op.apply(y[:, i]) - s[i] * x[:, i])
        r2 = np.linalg.norm(op.adjoint_apply(x[:, i]) - s[i] * y[:, i])
        res[i] = max(r1, r2)
    decomposition.x = x
    decomposition.y = y
    decomposition.residuals = res
    return decomposition


@dataclass
class WatchedValue:
    rank: int             # 1-based; positive = from largest, negative = from smallest
    values: list = field(default_factory=list)
    residual_estimates: list = field(default_factory=list)
    converged: bool = False
    converged_at: int | None = None
    converged_value: float | None = None
    ghost_suspect: bool = False
    ghost_events: int = 0


@dataclass
class ConvergenceHistory:
    watched: list
    ks: list = field(default_factory=list)
    norm_a: float = 0.0
    tol: float = 0.0
    status: Status = Status.RUNNING
    fact: object = None

    def watch(self, rank):
        for w in self.watched:
            if w.rank == rank:
                return w
        raise KeyError(f"rank {rank} is not watched")


def parse_watch(spec):
    """Watch specs: 'largest:4', 'smallest:2', or '1,2,3' (1-based ranks)."""
    if isinstance(spec, (list, tuple)):
        return [int(r) for r in spec]
    spec = str(spec)
    if spec.startswith("largest"):
        j = int(spec.split(":")[1]) if ":" in spec else 4
        return list(range(1, j + 1))
    if spec.startswith("smallest"):
        j = int(spec.split(":")[1]) if ":" in spec else 2
        return [-(r + 1) for r in range(j)]
    return [int(tok) for tok in spec.split(",") if tok.strip()]


def track_convergence(op, b, policy, k_max, watch="largest:4", tol=None,
                      term_tol=None):
    """Run incrementally, recording the watched Ritz values each step.

    A watched value converges when its residual estimate drops below
    tol * ||A||; a converged value that later departs by more than
    10 tol ||A|| is flagged as a ghost suspect and may re-converge.
    Ghosts are duplicates caused by loss of orthogonality, so a departure
    only counts while the estimated basis levels are above sqrt(u); with
    orthogonality maintained, a departing rank means a genuine new copy
    entered above it (e.g. the second copy of a multiple singular value).
    """
    ranks = parse_watch(watch)
    if tol is None:
        tol = 1e-10 if op.mode is PrecisionMode.BINARY64 else 1e-4
    fact = init(op, b, term_tol)
    history = ConvergenceHistory(
        watched=[WatchedValue(rank=r) for r in ranks],
        norm_a=fact.norm_a_est,
        tol=tol,
    )
    thresh = tol * history.norm_a
    while fact.status is Status.RUNNING and fact.k < k_max:
        step(fact, op, policy)
        k = fact.k
        square = fact.status is Status.LUCKY_BETA
        h, s, _ = bidiag_svd(fact.B(square=square))
        if square:
            res_est = np.zeros(s.size)
        else:
            alpha_next = fact.alphas[k] if len(fact.alphas) > k else 0.0
            res_est = np.abs(alpha_next * h[k, :])
        history.ks.append(k)
        levels_degraded = (
            max(fact.omega.levels("u").max(), fact.omega.levels("v").max())
            > np.sqrt(np.finfo(float).eps)
        )
        for w in history.watched:
            idx = (w.rank - 1) if w.rank > 0 else (s.size + w.rank)
            if 0 <= idx < s.size:
                val = float(s[idx])
                rest = float(res_est[idx])
            else:
                val, rest = np.nan, np.nan
            w.values.append(val)
            w.residual_estimates.append(rest)
            if not np.isfinite(val):
                continue
            if w.converged and abs(val - w.converged_value) > 10.0 * thresh:
                if levels_degraded:
                    w.ghost_suspect = True
                    w.ghost_events += 1
                w.converged = False
                w.converged_value = None
            if not w.converged and rest <= thresh:
                w.converged = True
                w.converged_at = k
                w.converged_value = val
    history.status = fact.status
    history.fact = fact
    return history


def multiplicity_gap(history, i, j):
    """|s_i - s_j| at the final recorded step; both must have converged."""
    wi, wj = history.watch(i), history.watch(j)
    if not (wi.converged and wj.converged):
        raise StateError(f"ranks {i} and {j} must both be converged")
    return abs(wi.values[-1] - wj.values[-1])
