"""Householder products tied to the Lanczos left basis, and what they verify.

Each left Lanczos vector u_i defines a reflector on an augmented space via
p_i = (-e_i; u_i) with ||p_i||^2 = 2.  Applying the chain to the padded
bidiagonal columns and comparing against the padded A v_j columns yields a
per-column residual whose size measures how far the computed factorization
is from an exact one of a nearby problem.  The square case (m = n) drops
the last reflector and shrinks the augmented space by one.
"""

from dataclasses import dataclass

import numpy as np

from .bidiag import Status, run
from .errors import DimensionError, InvalidInput
from .linops import dense_svd, spectral_norm
from .reorth import ReorthPolicy


@dataclass
class ReflectorChain:
    """Implicit product P_1 ... P_L on a space of dimension top + m.

    top is n+1 for tall operators and n for square ones; reflector i is
    stored as its lower part u_i (the upper part is -e_i).
    """

    top: int
    us: np.ndarray  # m-by-L, column i-1 holds u_i

    @property
    def dim(self):
        return self.top + self.us.shape[0]

    def __len__(self):
        return self.us.shape[1]


def chain_from_factorization(fact):
    """Build the reflector chain from the recorded left basis.

    The chain length is capped at n (square) or n+1 (tall); for m = n the
    (n+1)-th reflector is the identity and is simply omitted.
    """
    m, n = fact.op.m, fact.op.n
    square = m == n
    top = n if square else n + 1
    cap = n if square else n + 1
    cols = min(fact.U.shape[1], cap)
    return ReflectorChain(top=top, us=fact.U[:, :cols].copy())


def apply_chain(chain, x, order="forward"):
    """Apply P_1...P_L (forward) or its transpose P_L...P_1 (reverse) to x."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (chain.dim,):
        raise DimensionError(f"expected vector of length {chain.dim}, got {x.shape}")
    if order not in ("forward", "reverse"):
        raise InvalidInput("order must be 'forward' or 'reverse'")
    y = x.copy()
    top = chain.top
    length = len(chain)
    sequence = range(length - 1, -1, -1) if order == "forward" else range(length)
    for idx in sequence:
        u = chain.us[:, idx]
        dot = -y[idx] + u @ y[top:]
        y[idx] += dot
        y[top:] -= dot * u
    return y


@dataclass
class BackwardErrorReport:
    k: int
    column_norms: np.ndarray
    norm_x: float
    norm_a: float

    @property
    def normalized(self):
        return self.norm_x / self.norm_a


def _stack_norm(x):
    """Spectral norm of the residual stack; SVD at desk scale."""
    if x.size == 0:
        return 0.0
    if x.shape[0] <= 20000:
        return float(np.linalg.svd(x, compute_uv=False)[0])
    g = x.T @ x
    w = np.linalg.eigvalsh(g)
    return float(np.sqrt(max(w[-1], 0.0)))


def backward_error_columns(fact, op, k=None):
    """Residual columns x_j, j = 1..k, of the padded-column identity.

    Column j applies the first j+1 reflectors (j for square j = n) to the
    padded (alpha_j, beta_{j+1}) column and subtracts the padded A v_j.
    """
    k = fact.k if k is None else int(k)
    m, n = op.m, op.n
    square = m == n
    chain = chain_from_factorization(fact)
    alphas, betas = fact.alphas, fact.betas
    if k > fact.V.shape[1] or k > len(alphas):
        raise InvalidInput(f"only {fact.k} steps available, asked for {k}")
    cols = np.empty((chain.dim, k))
    for j in range(1, k + 1):
        need_beta = not (square and j == n)
        if need_beta and j >= len(betas):
            raise InvalidInput(f"beta_{j + 1} not recorded; column {j} unavailable")
        nref = min(j + 1, len(chain))
        z = np.zeros(chain.dim)
        z[j - 1] = alphas[j - 1]
        if need_beta:
            z[j] = betas[j]
        sub = ReflectorChain(top=chain.top, us=chain.us[:, :nref])
        y = apply_chain(sub, z, "forward")
        y[chain.top :] -= op.apply(fact.V[:, j - 1])
        cols[:, j - 1] = y
    return cols


def compute_Xk(fact, op, k=None, norm_a=None):
    """Backward-error residual report after k steps."""
    cols = backward_error_columns(fact, op, k)
    if norm_a is None:
        norm_a = spectral_norm(op, tol=1e-8)
    return BackwardErrorReport(
        k=cols.shape[1],
        column_norms=np.linalg.norm(cols, axis=0),
        norm_x=_stack_norm(cols),
        norm_a=float(norm_a),
    )


def backward_error_trace(fact, op, norm_a=None, upto=None):
    """||X_k||/||A|| for every k = 1..upto, NaN where a column is unavailable."""
    if norm_a is None:
        norm_a = spectral_norm(op, tol=1e-8)
    upto = fact.k if upto is None else int(upto)
    square = op.m == op.n
    k_avail = upto
    if fact.status is Status.LUCKY_BETA and not (square and fact.k == op.n):
        k_avail = min(k_avail, fact.k - 1)  # no u_{k+1}, last column undefined
    k_avail = min(k_avail, fact.V.shape[1])
    out = np.full(upto, np.nan)
    if k_avail >= 1:
        cols = backward_error_columns(fact, op, k_avail)
        for k in range(1, k_avail + 1):
            out[k - 1] = _stack_norm(cols[:, :k]) / norm_a
    return out


def exact_equivalence_residual(op, b, k, term_tol=None):
    """Residual of the padded-column identity under full reorthogonalization.

    A binary64 full-reorthogonalization run stands in for the exact
    process; the value returned is ||X_k||/||A|| for the largest feasible
    k' <= k.
    """
    fact = run(op, b, k, policy=ReorthPolicy.full(), term_tol=term_tol)
    k_eff = min(k, fact.k)
    if fact.status is Status.LUCKY_BETA and not (op.m == op.n and fact.k == op.n):
        k_eff = min(k_eff, fact.k - 1)
    k_eff = min(k_eff, fact.V.shape[1])
    report = compute_Xk(fact, op, k=k_eff)
    return report.normalized


@dataclass
class StructureReport:
    l: int
    M: np.ndarray
    S: np.ndarray
    block_residual: float
    norm_s: float
    norm_m: float

    @property
    def slack_unit(self):
        return 1.0 - self.norm_s

    @property
    def slack_lower(self):
        return self.norm_s - self.norm_m / (1.0 + self.norm_m)

    @property
    def slack_upper(self):
        return 2.0 * self.norm_m - self.norm_s


def structure_report(q, unit_tol=None):
    """Check the explicit block structure of W_1...W_l built from unit columns.

    W_j = I - w_j w_j^T with w_j = (-e_j; q_j); the product's four blocks
    are compared against the closed form in terms of S = (I + M)^{-1} M,
    M = strict upper triangle of Q^T Q, and the norm inequalities
    ||S|| <= 1 and ||M||/(1+||M||) <= ||S|| <= 2||M|| are reported as
    slack values.
    """
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2 or q.shape[0] < q.shape[1]:
        raise InvalidInput("expected an r-by-l matrix with r >= l")
    r, l = q.shape
    unit_tol = 4 * np.finfo(float).eps if unit_tol is None else unit_tol
    norms = np.linalg.norm(q, axis=0)
    if np.abs(norms - 1.0).max() > unit_tol:
        raise InvalidInput("columns must have unit norm")

    gram = q.T @ q
    m_mat = np.triu(gram, 1)
    s_mat = np.linalg.solve(np.eye(l) + m_mat, m_mat)

    w = np.eye(r + l)
    for j in range(l):
        wj = np.zeros(r + l)
        wj[j] = -1.0
        wj[l:] = q[:, j]
        w = w - np.outer(w @ wj, wj)

    i_minus_s = np.eye(l) - s_mat
    blocks = (
        w[:l, :l] - s_mat,
        w[:l, l:] - i_minus_s @ q.T,
        w[l:, :l] - q @ i_minus_s,
        w[l:, l:] - (np.eye(r) - q @ i_minus_s @ q.T),
    )
    block_residual = max(np.abs(b).max() for b in blocks)
    _, sv_s, _ = dense_svd(s_mat)
    _, sv_m, _ = dense_svd(m_mat)
    return StructureReport(
        l=l,
        M=m_mat,
        S=s_mat,
        block_residual=float(block_residual),
        norm_s=float(sv_s[0]) if sv_s.size else 0.0,
        norm_m=float(sv_m[0]) if sv_m.size else 0.0,
    )
