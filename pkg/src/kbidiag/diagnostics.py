"""Orthogonality metrics and per-step diagnostic traces.

The trace row for step k pairs the quantities that enter the step-k
backward-error bound: the level of the k+1 left vectors with the level of
the k right vectors, the pairwise levels of the newest vectors, the local
product beta_{k+1}|u_k^T u_{k+1}|, the left-coefficient norm, and the
normalized residual-stack norm.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .bidiag import run
from .householder import backward_error_trace
from .linops import spectral_norm

CSV_COLUMNS = [
    "k",
    "mu",
    "nu",
    "omega_u",
    "omega_v",
    "local_u",
    "norm_cbar",
    "normXk_over_normA",
    "reorth_events_u",
    "reorth_events_v",
    "inner_products_count",
]


def orthogonality_level(q):
    """Spectral norm of the strict upper triangle of I - Q^T Q."""
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 2 or q.shape[1] < 2:
        return 0.0
    t = np.triu(q.T @ q, 1)
    return float(np.linalg.svd(t, compute_uv=False)[0])


def pairwise_level(q_new, basis, exclude_last=False):
    """max |basis_j^T q_new| over all (or all-but-last) basis columns."""
    basis = np.asarray(basis, dtype=np.float64)
    if basis.ndim != 2 or basis.shape[1] == 0:
        return 0.0
    cols = basis[:, :-1] if exclude_last else basis
    if cols.shape[1] == 0:
        return 0.0
    return float(np.abs(cols.T @ np.asarray(q_new, dtype=np.float64)).max())


@dataclass
class SingularValueWindow:
    status: str  # "ok" | "not-applicable"
    level: float
    sigma_max: float | None = None
    sigma_min: float | None = None
    sigma_max_ok: bool | None = None
    sigma_min_ok: bool | None = None


def singular_value_window(q, slack=None):
    """Check sigma_1(Q) <= 1 + level and sigma_min(Q) >= sqrt(1 - 2 level).

    Requires level < 1/2; otherwise the premise fails and the check is
    reported as not applicable rather than as a failure.
    """
    q = np.asarray(q, dtype=np.float64)
    level = orthogonality_level(q)
    if level >= 0.5:
        return SingularValueWindow(status="not-applicable", level=level)
    slack = 100 * np.finfo(float).eps if slack is None else slack
    sv = np.linalg.svd(q, compute_uv=False)
    smax, smin = float(sv[0]), float(sv[-1])
    return SingularValueWindow(
        status="ok",
        level=level,
        sigma_max=smax,
        sigma_min=smin,
        sigma_max_ok=smax <= 1.0 + level + slack,
        sigma_min_ok=smin >= math.sqrt(max(1.0 - 2.0 * level, 0.0)) - slack,
    )


def local_orthogonality_trace(fact):
    """beta_{i+1} |u_i^T u_{i+1}| for every consecutive recorded pair."""
    u = fact.U
    betas = fact.betas
    vals = []
    for i in range(1, u.shape[1]):
        vals.append(betas[i] * abs(float(u[:, i - 1] @ u[:, i])))
    return np.array(vals)


@dataclass
class DiagnosticsTrace:
    rows: list = field(default_factory=list)

    def column(self, name):
        idx = CSV_COLUMNS.index(name)
        return np.array([row[idx] for row in self.rows], dtype=np.float64)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for row in self.rows:
                out = []
                for name, val in zip(CSV_COLUMNS, row):
                    if name in ("k", "reorth_events_u", "reorth_events_v",
                                "inner_products_count"):
                        out.append(str(int(val)))
                    else:
                        out.append(f"{val:.17g}")
                w.writerow(out)

    @classmethod
    def read_csv(cls, path):
        trace = cls()
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            header = next(r)
            if header != CSV_COLUMNS:
                raise ValueError(f"unexpected trace header {header}")
            for row in r:
                trace.rows.append([float(x) for x in row])
        return trace


def build_trace(fact, op, norm_a=None, compute_x=True, passes=1, level_stride=1):
    """Assemble the per-step trace from a finished factorization.

    The bases only grow during a run, so recomputing each prefix level
    afterwards reproduces the values an in-loop tracer would have seen.
    passes scales the per-target projection count into inner products;
    level_stride > 1 samples the (relatively costly) basis levels every
    that many steps, carrying the last sampled value in between.
    """
    if norm_a is None:
        norm_a = spectral_norm(op, tol=1e-8)
    u_mat, v_mat = fact.U, fact.V
    betas = fact.betas
    if compute_x:
        x_trace = backward_error_trace(fact, op, norm_a=norm_a)
    else:
        x_trace = np.full(fact.k, np.nan)

    trace = DiagnosticsTrace()
    inner_running = 0
    mu = nu = 0.0
    for k in range(1, fact.k + 1):
        rec = fact.records[k - 1]
        if (k - 1) % level_stride == 0 or k == fact.k:
            mu = orthogonality_level(u_mat[:, : min(k + 1, u_mat.shape[1])])
            nu = orthogonality_level(v_mat[:, : min(k, v_mat.shape[1])])
        om_u = pairwise_level(u_mat[:, k - 1], u_mat[:, : k - 1])
        om_v = (
            pairwise_level(v_mat[:, k - 1], v_mat[:, : k - 1])
            if k <= v_mat.shape[1]
            else np.nan
        )
        if k < u_mat.shape[1]:
            local_u = betas[k] * abs(float(u_mat[:, k - 1] @ u_mat[:, k]))
        else:
            local_u = np.nan
        inner_running += (rec.n_targets_u + rec.n_targets_v) * passes
        trace.rows.append(
            [
                k,
                mu,
                nu,
                om_u,
                om_v,
                local_u,
                float(np.linalg.norm(rec.xi)),
                x_trace[k - 1],
                1 if rec.n_targets_u > 0 else 0,
                1 if rec.n_targets_v > 0 else 0,
                inner_running,
            ]
        )
    return trace


def trace_run(op, b, k_max, policy, term_tol=None, compute_x=True, norm_a=None,
              level_stride=1):
    """Run the factorization and assemble its diagnostics trace."""
    fact = run(op, b, k_max, policy=policy, term_tol=term_tol)
    trace = build_trace(
        fact, op, norm_a=norm_a, compute_x=compute_x, passes=policy.passes,
        level_stride=level_stride,
    )
    return fact, trace


def check_trace_invariants(trace, slack=None):
    """Return a list of violated trace invariants (empty when healthy)."""
    slack = 4 * np.finfo(float).eps if slack is None else slack
    problems = []
    mu = trace.column("mu")
    nu = trace.column("nu")
    for name, arr in (("mu", mu), ("nu", nu)):
        finite = arr[np.isfinite(arr)]
        if finite.size and np.any(np.diff(finite) < -slack - 1e-18):
            problems.append(f"{name} is not nondecreasing")
        if np.any(~np.isfinite(arr)):
            problems.append(f"{name} has non-finite entries")
    return problems
