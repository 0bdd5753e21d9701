"""Reorthogonalization strategies: target selection, coefficients, estimates.

Every strategy fits one template: when a new Lanczos vector is formed, a
subset of the previous vectors is chosen and the projections onto them are
removed (classical Gram-Schmidt, optionally repeated).  The subset rule is
what distinguishes full / one-sided / partial / semi / none.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput
from .linops import EPS64, PrecisionMode

SQRT_EPS = np.sqrt(EPS64)

KINDS = ("none", "full", "onesided-u", "onesided-v", "partial", "semi")


@dataclass(frozen=True)
class ReorthPolicy:
    """Strategy selector plus the knobs shared by all strategies.

    include_local controls whether the immediately preceding vector takes
    part (its coefficient is forced to zero otherwise); passes is the
    number of classical Gram-Schmidt repetitions.
    """

    kind: str = "full"
    eta: float = 1e-10
    threshold: float = SQRT_EPS
    include_local: bool = True
    passes: int = 2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown reorthogonalization kind {self.kind!r}")
        if self.kind == "partial" and not 0.0 < self.eta < 1.0:
            raise InvalidInput("partial strategy needs eta in (0, 1)")
        if self.kind == "semi" and not 0.0 < self.threshold < 1.0:
            raise InvalidInput("semi strategy needs threshold in (0, 1)")
        if self.passes < 1:
            raise InvalidInput("passes must be >= 1")

    @classmethod
    def none(cls):
        return cls(kind="none")

    @classmethod
    def full(cls, include_local=True, passes=2):
        return cls(kind="full", include_local=include_local, passes=passes)

    @classmethod
    def one_sided(cls, side="v", include_local=True, passes=2):
        if side not in ("u", "v"):
            raise InvalidInput("one-sided side must be 'u' or 'v'")
        return cls(kind=f"onesided-{side}", include_local=include_local, passes=passes)

    @classmethod
    def partial(cls, eta=1e-10, include_local=True, passes=2):
        return cls(kind="partial", eta=eta, include_local=include_local, passes=passes)

    @classmethod
    def semi(cls, threshold=SQRT_EPS, include_local=True, passes=2):
        return cls(
            kind="semi", threshold=threshold, include_local=include_local, passes=passes
        )

    @property
    def uses_estimates(self):
        return self.kind in ("partial", "semi")


def _full_set(i, include_local):
    return np.arange(i if include_local else i - 1, dtype=np.int64)


def select_targets(policy, side, i, omega=None):
    """0-based indices among the first i basis vectors to orthogonalize against.

    For the partial strategy omega must hold the i estimated levels of the
    new vector against each previous one; selection triggers when the max
    exceeds eta and then takes every index above eta**(4/3) together with
    its immediate neighbors.
    """
    if i < 1 or policy.kind == "none":
        return np.empty(0, dtype=np.int64)
    if policy.kind == "full":
        return _full_set(i, policy.include_local)
    if policy.kind.startswith("onesided"):
        if policy.kind.endswith(side):
            return _full_set(i, policy.include_local)
        return np.empty(0, dtype=np.int64)

    levels = np.clip(np.abs(np.asarray(omega, dtype=np.float64)[:i]), EPS64, 1.0)
    if policy.kind == "semi":
        if levels.max() > policy.threshold:
            return _full_set(i, policy.include_local)
        return np.empty(0, dtype=np.int64)

    # partial
    if levels.max() <= policy.eta:
        return np.empty(0, dtype=np.int64)
    mask = levels > policy.eta ** (4.0 / 3.0)
    grown = mask.copy()
    grown[:-1] |= mask[1:]
    grown[1:] |= mask[:-1]
    if not policy.include_local:
        grown[i - 1] = False
    return np.nonzero(grown)[0].astype(np.int64)


def orthogonalize(w, basis, targets, passes=2, mode=PrecisionMode.BINARY64):
    """Remove projections of w onto the target basis columns.

    Returns (w', coeffs) where coeffs has one entry per basis column,
    zero outside the target set, accumulated over all passes.  A vanishing
    ||w'|| is the caller's signal for candidate lucky termination.
    """
    w = np.array(w, dtype=np.float64)
    ncols = basis.shape[1] if basis.ndim == 2 else 0
    coeffs = np.zeros(ncols)
    targets = np.asarray(targets, dtype=np.int64)
    if targets.size == 0:
        return w, coeffs
    if targets.max() >= ncols:
        raise InvalidInput("orthogonalization target outside the basis")
    cols = basis[:, targets]
    for _ in range(passes):
        c = mode.round(cols.T @ w)
        w = mode.round(w - cols @ c)
        coeffs[targets] += c
    return w, coeffs


@dataclass
class OmegaEstimate:
    """Recurrence-propagated bounds on the new vector's inner products.

    u_est[j] bounds |u_{j+1}^T u_{i+1}| and v_est[j] bounds
    |v_{j+1}^T v_{i+1}|.  The recurrence mirrors the two coupled
    three-term recurrences with every term taken in magnitude (a
    deliberate overestimate), and the rounding contribution modeled as
    floor_scale * u * ||A||.
    """

    norm_a: float
    floor_scale: float = 1.0
    u_est: np.ndarray = field(default_factory=lambda: np.zeros(0))
    v_est: np.ndarray = field(default_factory=lambda: np.zeros(0))

    RESET = 2.0 * EPS64

    def _floor(self):
        return self.floor_scale * EPS64 * self.norm_a

    def levels(self, side):
        est = self.u_est if side == "u" else self.v_est
        return np.clip(np.abs(est), EPS64, 1.0)

    def advance_u(self, alphas, betas, beta_prime):
        """Estimates for u_{i+1} before its reorthogonalization.

        alphas holds alpha_1..alpha_i, betas holds beta_1..beta_i and
        beta_prime is the norm of the unorthogonalized residual.
        """
        i = len(alphas)
        new = np.empty(i)
        c0 = self._floor()
        denom = max(beta_prime, np.finfo(float).tiny)
        for jj in range(i - 1):
            t = alphas[jj] * self.v_est[jj] + alphas[i - 1] * self.u_est[jj] + c0
            if jj >= 1:
                t += betas[jj] * self.v_est[jj - 1]
            new[jj] = t / denom
        new[i - 1] = self.RESET
        np.clip(new, 0.0, 1.0, out=new)
        self.u_est = new

    def advance_v(self, alphas, betas, alpha_prime):
        """Estimates for v_{i+1}; betas must already include beta_{i+1}."""
        i = len(alphas)
        new = np.empty(i)
        c0 = self._floor()
        denom = max(alpha_prime, np.finfo(float).tiny)
        for jj in range(i - 1):
            t = (
                alphas[jj] * self.u_est[jj]
                + betas[jj + 1] * self.u_est[jj + 1]
                + betas[i] * self.v_est[jj]
                + c0
            )
            new[jj] = t / denom
        new[i - 1] = self.RESET
        np.clip(new, 0.0, 1.0, out=new)
        self.v_est = new

    def reset(self, side, indices):
        est = self.u_est if side == "u" else self.v_est
        est[np.asarray(indices, dtype=np.int64)] = self.RESET


def omega_update(
    omega, alphas, betas, beta_prime, alpha_prime, reset_u=(), reset_v=()
):
    """One full-step propagation of the estimates (u side, then v side).

    Freshly reorthogonalized indices are reset to roundoff level; the
    returned object is the same instance, advanced in place.
    """
    omega.advance_u(alphas, betas[: len(alphas)], beta_prime)
    omega.reset("u", np.asarray(reset_u, dtype=np.int64))
    omega.advance_v(alphas, betas, alpha_prime)
    omega.reset("v", np.asarray(reset_v, dtype=np.int64))
    return omega
