"""LSQR on top of the bidiagonalization, plus its projected-subproblem oracle.

The recursive path updates the iterate with one Givens rotation per step
(Paige-Saunders); the oracle path re-solves the (k+1)-by-k bidiagonal
least-squares problem from scratch at a chosen k.  Their difference is the
internal-consistency gap used to probe forward stability.
"""

from dataclasses import dataclass, field

import numpy as np

from .bidiag import Status, init, step
from .errors import InvalidInput
from .reorth import ReorthPolicy


def _sym_givens(a, b):
    """Stable Givens pair (c, s, r) with [c s; -s c] [a; b] = [r; 0]."""
    if b == 0.0:
        return (1.0 if a >= 0 else -1.0, 0.0, abs(a))
    if a == 0.0:
        return (0.0, 1.0 if b >= 0 else -1.0, abs(b))
    if abs(b) > abs(a):
        tau = a / b
        s = np.sign(b) / np.sqrt(1.0 + tau * tau)
        c = s * tau
        r = b / s
    else:
        tau = b / a
        c = np.sign(a) / np.sqrt(1.0 + tau * tau)
        s = c * tau
        r = a / c
    return c, s, r


@dataclass
class LsqrState:
    k: int
    x: np.ndarray
    phibar: float
    rhobar: float
    w: np.ndarray
    residual_estimate: float
    normal_residual_estimate: float


@dataclass
class LsqrResult:
    xs: list = field(default_factory=list)
    residual_estimates: list = field(default_factory=list)
    normal_residual_estimates: list = field(default_factory=list)
    fact: object = None
    stop_reason: str = "k_max"

    @property
    def x(self):
        return self.xs[-1]


def lsqr_solve(op, b, k_max, policy=None, atol=1e-12, term_tol=None):
    """Iterate LSQR for up to k_max steps.

    Stops early when the normal-equation residual estimate satisfies
    ||A^T r|| <= atol ||A|| ||r||, or on lucky termination (which finishes
    the projected solve exactly).
    """
    policy = ReorthPolicy.full() if policy is None else policy
    b = np.asarray(b, dtype=np.float64)
    if not 1 <= k_max <= op.n:
        raise InvalidInput(f"k_max must be in [1, n={op.n}]")
    fact = init(op, b, term_tol)
    result = LsqrResult(fact=fact)
    if fact.status is not Status.RUNNING:
        result.stop_reason = "lucky"
        return result
    norm_a = fact.norm_a_est
    x = np.zeros(op.n)
    w = fact.V[:, 0].copy()
    phibar = fact.betas[0]
    rhobar = fact.alphas[0]
    for i in range(1, k_max + 1):
        rec = step(fact, op, policy)
        beta = rec.beta
        c, s, rho = _sym_givens(rhobar, beta)
        phi = c * phibar
        phibar = s * phibar
        x = x + (phi / rho) * w
        result.xs.append(x.copy())
        result.residual_estimates.append(abs(phibar))
        if rec.alpha is not None:
            alpha = rec.alpha
            theta = s * alpha
            rhobar = -c * alpha
            normal_est = abs(phibar * alpha * c)
        else:
            normal_est = 0.0
        result.normal_residual_estimates.append(normal_est)
        if fact.status is not Status.RUNNING:
            result.stop_reason = "lucky"
            break
        if normal_est <= atol * norm_a * max(abs(phibar), np.finfo(float).tiny):
            result.stop_reason = "atol"
            break
        w = fact.V[:, i] - (theta / rho) * w
    return result


def projected_solve(bmat, beta1):
    """Least-squares solution of min ||B y - beta1 e1|| by Givens QR.

    B is (k+1)-by-k or k-by-k lower bidiagonal; the same rotation formulas
    as the recursive update are used so the two paths differ only in
    accumulation order.
    """
    bmat = np.asarray(bmat, dtype=np.float64)
    rows, k = bmat.shape
    if rows not in (k, k + 1):
        raise InvalidInput("projected_solve expects a lower bidiagonal matrix")
    if beta1 <= 0.0:
        raise InvalidInput("beta1 must be positive")
    diag = np.diag(bmat).copy()
    sub = np.array([bmat[j + 1, j] for j in range(min(rows - 1, k))])
    r_diag = np.empty(k)
    r_super = np.zeros(k)
    g = np.zeros(rows)
    g[0] = beta1
    cur = diag[0]
    for j in range(sub.size):
        c, s, r = _sym_givens(cur, sub[j])
        r_diag[j] = r
        gj = g[j]
        g[j] = c * gj + s * g[j + 1]
        g[j + 1] = -s * gj + c * g[j + 1]
        if j < k - 1:
            r_super[j] = s * diag[j + 1]
            cur = c * diag[j + 1]
    if sub.size < k:
        r_diag[k - 1] = cur
    y = np.zeros(k)
    for j in range(k - 1, -1, -1):
        top = g[j]
        if j < k - 1:
            top -= r_super[j] * y[j + 1]
        y[j] = top / r_diag[j]
    return y


def oracle_gap(op, b, policy, k, term_tol=None, result=None):
    """Relative gap between the recursive iterate and V_k @ projected solve.

    Returns the absolute gap when the iterate is zero.
    """
    if result is None:
        result = lsqr_solve(op, b, k, policy=policy, atol=0.0, term_tol=term_tol)
    fact = result.fact
    k_eff = min(k, len(result.xs))
    if k_eff == 0:
        raise InvalidInput("no completed iterations")
    x_rec = result.xs[k_eff - 1]
    square = fact.status is Status.LUCKY_BETA and fact.k == k_eff
    bmat = fact.B(square=square, k=k_eff)
    y = projected_solve(bmat, fact.betas[0])
    x_proj = fact.V[:, :k_eff] @ y
    nx = np.linalg.norm(x_rec)
    gap = np.linalg.norm(x_rec - x_proj)
    return float(gap / nx) if nx > 0 else float(gap)


def oracle_gap_trace(result):
    """oracle_gap at every completed k of an existing solve."""
    fact = result.fact
    gaps = np.empty(len(result.xs))
    for k in range(1, len(result.xs) + 1):
        square = fact.status is Status.LUCKY_BETA and fact.k == k
        bmat = fact.B(square=square, k=k)
        y = projected_solve(bmat, fact.betas[0])
        x_proj = fact.V[:, :k] @ y
        x_rec = result.xs[k - 1]
        nx = np.linalg.norm(x_rec)
        g = np.linalg.norm(x_rec - x_proj)
        gaps[k - 1] = g / nx if nx > 0 else g
    return gaps
