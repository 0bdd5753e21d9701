"""k-step lower Lanczos bidiagonalization with pluggable reorthogonalization.

The driver implements the two-halves step: form the left residual, let the
policy orthogonalize it against previous left vectors, normalize; then the
right residual against previous right vectors.  Everything a later
diagnosis might need is recorded: coefficient matrices, pre-orthogonalization
residual norms and directions, per-step reorthogonalization events and
inner-product counts.
"""

import csv
import enum
import json
import pathlib
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput, StateError
from .linops import norm_estimate
from .reorth import OmegaEstimate, ReorthPolicy, orthogonalize, select_targets


class Status(enum.Enum):
    RUNNING = "running"
    COMPLETED = "completed"
    LUCKY_BETA = "lucky-beta"
    LUCKY_ALPHA = "lucky-alpha"

    @property
    def terminated(self):
        return self in (Status.LUCKY_BETA, Status.LUCKY_ALPHA)


@dataclass
class StepRecord:
    """Per-step bookkeeping for step i (producing u_{i+1} and v_{i+1})."""

    step: int
    beta_prime: float
    u_prime: np.ndarray
    xi: np.ndarray          # coefficients removed from u_{i+1}, length i
    eta: np.ndarray | None  # coefficients removed from v_{i+1}, None if beta-terminated
    beta: float
    alpha: float | None
    n_targets_u: int = 0
    n_targets_v: int = 0


class _Basis:
    """Growing column buffer with amortized appends."""

    def __init__(self, dim, capacity=8):
        self._buf = np.empty((dim, capacity))
        self.count = 0

    def append(self, vec):
        if self.count == self._buf.shape[1]:
            grown = np.empty((self._buf.shape[0], 2 * self._buf.shape[1]))
            grown[:, : self.count] = self._buf
            self._buf = grown
        self._buf[:, self.count] = vec
        self.count += 1

    @property
    def matrix(self):
        return self._buf[:, : self.count]

    def column(self, j):
        return self._buf[:, j]


def _vec_norm(x, mode):
    d = mode.round(float(x @ x))
    return mode.round(float(np.sqrt(d)))


class BidiagFactorization:
    """State of a running or finished factorization.

    alphas/betas are the recorded coefficients (betas[0] is the starting
    vector norm); U and V expose the Lanczos bases as dense matrices; C and
    D are the reorthogonalization coefficient matrices matching the two
    fundamental matrix relations.
    """

    def __init__(self, op, term_tol=None):
        self.op = op
        self.mode = op.mode
        u = self.mode.unit_roundoff
        self.term_tol = np.sqrt(u) if term_tol is None else float(term_tol)
        self.norm_a_est = norm_estimate(op)
        self.k = 0
        self.status = Status.RUNNING
        self.termination_step = None
        self._alphas = []
        self._betas = []
        self._U = _Basis(op.m)
        self._V = _Basis(op.n)
        self.records = []
        self.omega = OmegaEstimate(
            norm_a=self.norm_a_est, floor_scale=np.sqrt(max(op.m, op.n))
        )
        self.inner_products = 0

    # -- views ------------------------------------------------------------
    @property
    def alphas(self):
        return np.array(self._alphas)

    @property
    def betas(self):
        return np.array(self._betas)

    @property
    def U(self):
        return self._U.matrix

    @property
    def V(self):
        return self._V.matrix

    @property
    def term_tol_abs(self):
        return self.term_tol * self.norm_a_est

    def B(self, square=False, k=None):
        """The (k+1)-by-k lower bidiagonal, or its square top block."""
        k = self.k if k is None else int(k)
        if square:
            b = np.zeros((k, k))
        else:
            if len(self._betas) < k + 1:
                raise StateError("beta_{k+1} not available")
            b = np.zeros((k + 1, k))
        for j in range(k):
            b[j, j] = self._alphas[j]
            if j + 1 < b.shape[0]:
                b[j + 1, j] = self._betas[j + 1]
        return b

    def C(self):
        """(k+1)-by-k matrix of left coefficients xi_{ji} (column i = step i)."""
        k = self.k
        c = np.zeros((k + 1, k))
        for rec in self.records[:k]:
            c[: rec.xi.size, rec.step - 1] = rec.xi
        return c

    def D(self):
        """k-by-(k+1) matrix of right coefficients eta_{ji} (column i+1 = step i)."""
        k = self.k
        d = np.zeros((k, k + 1))
        for rec in self.records[:k]:
            if rec.eta is not None and rec.step < k + 1:
                d[: rec.eta.size, rec.step] = rec.eta
        return d

    # -- serialization ----------------------------------------------------
    def save(self, outdir):
        """Write B_k as a three-column CSV plus the dense bases and metadata."""
        outdir = pathlib.Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "bk.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "alpha_i", "beta_ip1"])
            for j in range(self.k):
                beta_next = self._betas[j + 1] if j + 1 < len(self._betas) else np.nan
                w.writerow([j + 1, f"{self._alphas[j]:.17g}", f"{beta_next:.17g}"])
        np.save(outdir / "U.npy", self.U)
        np.save(outdir / "V.npy", self.V)
        meta = {
            "m": self.op.m,
            "n": self.op.n,
            "k": self.k,
            "beta1": self._betas[0],
            "status": self.status.value,
            "precision": self.mode.value,
        }
        (outdir / "meta.json").write_text(json.dumps(meta, indent=1))


def init(op, b, term_tol=None):
    """Start a factorization: beta_1 u_1 = b, alpha_1 v_1 = A^T u_1."""
    b = np.asarray(b, dtype=np.float64)
    if b.shape != (op.m,):
        raise InvalidInput(f"starting vector must have length {op.m}")
    if not np.all(np.isfinite(b)) or np.all(b == 0.0):
        raise InvalidInput("starting vector must be nonzero and finite")
    fact = BidiagFactorization(op, term_tol)
    mode = fact.mode
    beta1 = _vec_norm(b, mode)
    u1 = mode.round(b / beta1)
    fact._betas.append(beta1)
    fact._U.append(u1)
    w = op.adjoint_apply(u1)
    alpha1 = _vec_norm(w, mode)
    fact._alphas.append(alpha1)
    if alpha1 <= fact.term_tol_abs or alpha1 == 0.0:
        fact.status = Status.LUCKY_ALPHA
        fact.termination_step = 0
        return fact
    fact._V.append(mode.round(w / alpha1))
    return fact


def step(fact, op, policy):
    """Advance one step; returns the StepRecord."""
    if fact.status is not Status.RUNNING:
        raise StateError(f"cannot step a factorization with status {fact.status}")
    mode = fact.mode
    i = fact.k + 1
    u_i = fact._U.column(i - 1)
    v_i = fact._V.column(i - 1)
    alpha_i = fact._alphas[i - 1]

    r = mode.round(op.apply(v_i) - alpha_i * u_i)
    beta_prime = _vec_norm(r, mode)
    u_prime = r / beta_prime if beta_prime > 0.0 else np.zeros_like(r)
    fact.omega.advance_u(fact._alphas, fact._betas, beta_prime)

    # with m = n the (n+1)-th left vector is never reorthogonalized
    square_last = op.m == op.n and i == op.n
    if square_last:
        targets_u = np.empty(0, dtype=np.int64)
    else:
        targets_u = select_targets(policy, "u", i, fact.omega.levels("u"))
    r, xi = orthogonalize(r, fact.U, targets_u, policy.passes, mode)
    fact.inner_products += policy.passes * targets_u.size
    fact.omega.reset("u", targets_u)
    beta_next = _vec_norm(r, mode)

    if beta_next <= fact.term_tol_abs or beta_next == 0.0:
        rec = StepRecord(
            step=i, beta_prime=beta_prime, u_prime=u_prime, xi=xi, eta=None,
            beta=beta_next, alpha=None, n_targets_u=targets_u.size,
        )
        fact._betas.append(beta_next)
        fact.records.append(rec)
        fact.k = i
        fact.status = Status.LUCKY_BETA
        fact.termination_step = i
        return rec

    u_next = mode.round(r / beta_next)
    fact._betas.append(beta_next)
    fact._U.append(u_next)

    s = mode.round(op.adjoint_apply(u_next) - beta_next * v_i)
    alpha_prime = _vec_norm(s, mode)
    fact.omega.advance_v(fact._alphas, fact._betas, alpha_prime)
    targets_v = select_targets(policy, "v", i, fact.omega.levels("v"))
    s, eta = orthogonalize(s, fact.V, targets_v, policy.passes, mode)
    fact.inner_products += policy.passes * targets_v.size
    fact.omega.reset("v", targets_v)
    alpha_next = _vec_norm(s, mode)

    rec = StepRecord(
        step=i, beta_prime=beta_prime, u_prime=u_prime, xi=xi, eta=eta,
        beta=beta_next, alpha=alpha_next,
        n_targets_u=targets_u.size, n_targets_v=targets_v.size,
    )
    fact._alphas.append(alpha_next)
    fact.records.append(rec)
    fact.k = i

    if alpha_next <= fact.term_tol_abs or alpha_next == 0.0:
        fact.status = Status.LUCKY_ALPHA
        fact.termination_step = i
        return rec
    fact._V.append(mode.round(s / alpha_next))
    return rec


def run(op, b, k_max, policy=None, term_tol=None):
    """Run up to k_max steps (or until lucky termination)."""
    if not 1 <= k_max <= op.n:
        raise InvalidInput(f"k_max must be in [1, n={op.n}], got {k_max}")
    policy = ReorthPolicy.full() if policy is None else policy
    fact = init(op, b, term_tol)
    while fact.status is Status.RUNNING and fact.k < k_max:
        step(fact, op, policy)
    if fact.status is Status.RUNNING:
        fact.status = Status.COMPLETED
    return fact
