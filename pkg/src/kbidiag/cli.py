"""Command-line driver: factorization runs, SVD/LSQR, experiments, generators.

Exit codes: 0 success, 2 input error, 3 numerical invariant violation.
All outputs are deterministic for a fixed configuration and seed (no
timestamps, floats printed with 17 significant digits).
"""

import argparse
import csv
import os
import pathlib
import sys

import numpy as np
import scipy.sparse as sp

from . import corpus as corpus_mod
from . import diagnostics, lsqr, mmio, svdapprox
from .errors import InvalidInput
from .linops import (
    DenseOperator,
    PrecisionMode,
    clustered_spectrum_matrix,
    clustered_spectrum_profile,
    diagonal_operator,
)
from .reorth import SQRT_EPS, ReorthPolicy


def _mode(name):
    return PrecisionMode.BINARY32 if name == "single" else PrecisionMode.BINARY64


def _policy_from_args(args):
    kind = args.reorth
    include_local = not args.no_local
    if kind == "full":
        return ReorthPolicy.full(include_local=include_local, passes=args.passes)
    if kind == "none":
        return ReorthPolicy.none()
    if kind in ("onesided-u", "onesided-v"):
        return ReorthPolicy.one_sided(
            kind[-1], include_local=include_local, passes=args.passes
        )
    if kind == "partial":
        return ReorthPolicy.partial(
            eta=args.eta, include_local=include_local, passes=args.passes
        )
    if kind == "semi":
        return ReorthPolicy.semi(
            threshold=args.threshold, include_local=include_local, passes=args.passes
        )
    raise InvalidInput(f"unknown reorthogonalization strategy {kind!r}")


def _parse_gen_spec(spec, args, mode):
    """Generator specs: section5 | diag:5,3,1 | rank1 | random."""
    name, _, params = spec.partition(":")
    plist = [p for p in params.split(",") if p] if params else []
    seed = args.seed
    if name == "diag":
        if not plist:
            raise InvalidInput("diag generator needs values, e.g. diag:5,3,1")
        values = [float(p) for p in plist]
        return diagonal_operator(values, m=args.m or None, mode=mode), "diag"
    if name == "section5":
        n = int(plist[0]) if plist else (args.n or 800)
        return DenseOperator(clustered_spectrum_matrix(n), mode), "section5"
    if name == "random":
        m = int(plist[0]) if len(plist) > 0 else (args.m or 10)
        n = int(plist[1]) if len(plist) > 1 else (args.n or 6)
        rng = np.random.default_rng(seed)
        return DenseOperator(rng.standard_normal((m, n)), mode), "random"
    if name == "rank1":
        m = int(plist[0]) if len(plist) > 0 else (args.m or 10)
        n = int(plist[1]) if len(plist) > 1 else (args.n or 6)
        rng = np.random.default_rng(seed)
        u = rng.standard_normal(m)
        v = rng.standard_normal(n)
        return DenseOperator(np.outer(u, v), mode), "rank1"
    raise InvalidInput(f"unknown generator {name!r}")


def _load_op(args, mode):
    if getattr(args, "matrix", None):
        return mmio.load_operator(args.matrix, mode)
    if getattr(args, "gen", None):
        op, _ = _parse_gen_spec(args.gen, args, mode)
        return op
    raise InvalidInput("one of --matrix or --gen is required")


def _starting_vector(args, op):
    spec = getattr(args, "b", "ones") or "ones"
    if spec == "ones":
        return np.ones(op.m)
    if spec == "random":
        return np.random.default_rng(args.seed).standard_normal(op.m)
    if spec.startswith("file:"):
        return np.loadtxt(spec[5:], dtype=np.float64)
    raise InvalidInput(f"unknown starting vector spec {spec!r}")


def _outdir(args):
    out = args.out or os.environ.get("KB_OUT_DIR") or "."
    path = pathlib.Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _fmt(x):
    return f"{x:.17g}"


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args):
    mode = _mode(args.precision)
    op = _load_op(args, mode)
    b = _starting_vector(args, op)
    policy = _policy_from_args(args)
    k = min(args.k, op.n)
    fact, trace = diagnostics.trace_run(
        op, b, k, policy, compute_x=not args.no_x
    )
    out = _outdir(args)
    trace.write_csv(out / "trace.csv")
    if args.save_factorization:
        fact.save(out / "factorization")
    problems = diagnostics.check_trace_invariants(trace)
    if problems:
        for p in problems:
            print(f"invariant violation: {p}", file=sys.stderr)
        return 3
    print(f"wrote {out / 'trace.csv'} ({fact.k} steps, status {fact.status.value})")
    return 0


def cmd_svd(args):
    mode = _mode(args.precision)
    op = _load_op(args, mode)
    b = _starting_vector(args, op)
    policy = _policy_from_args(args)
    k = min(args.k, op.n)
    history = svdapprox.track_convergence(
        op, b, policy, k, watch=args.watch, tol=args.tol
    )
    out = _outdir(args)
    ranks = [w.rank for w in history.watched]
    with open(out / "ritz.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        labels = [f"s_{r}" if r > 0 else f"s_end{r}" for r in ranks]
        w.writerow(["k"] + labels + [f"res_{lab}" for lab in labels])
        for idx, kk in enumerate(history.ks):
            row = [str(kk)]
            row += [_fmt(wv.values[idx]) for wv in history.watched]
            row += [_fmt(wv.residual_estimates[idx]) for wv in history.watched]
            w.writerow(row)
    with open(out / "summary.txt", "w") as fh:
        fh.write(f"k={history.ks[-1] if history.ks else 0}\n")
        fh.write(f"status={history.status.value}\n")
        for wv in history.watched:
            tag = f"rank_{wv.rank}" if wv.rank > 0 else f"rank_end{wv.rank}"
            final = wv.values[-1] if wv.values else float("nan")
            fh.write(f"{tag}_value={_fmt(final)}\n")
            fh.write(f"{tag}_converged={int(wv.converged)}\n")
            fh.write(f"{tag}_ghost_events={wv.ghost_events}\n")
    print(f"wrote {out / 'ritz.csv'} and {out / 'summary.txt'}")
    return 0


def cmd_lsqr(args):
    mode = _mode(args.precision)
    op = _load_op(args, mode)
    b = _starting_vector(args, op)
    policy = _policy_from_args(args)
    k = min(args.k, op.n)
    result = lsqr.lsqr_solve(op, b, k, policy=policy, atol=args.atol)
    gaps = lsqr.oracle_gap_trace(result)
    fact = result.fact
    dense_ok = op.m * op.n <= 4_000_000
    a_dense = op.to_dense() if dense_ok else None
    out = _outdir(args)
    with open(out / "lsqr.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "residual_estimate", "true_residual", "oracle_gap", "nu_k"])
        for i, x in enumerate(result.xs):
            true_res = (
                float(np.linalg.norm(b - a_dense @ x)) if dense_ok else float("nan")
            )
            nu = diagnostics.orthogonality_level(fact.V[:, : i + 1])
            w.writerow(
                [
                    str(i + 1),
                    _fmt(result.residual_estimates[i]),
                    _fmt(true_res),
                    _fmt(gaps[i]),
                    _fmt(nu),
                ]
            )
    print(f"wrote {out / 'lsqr.csv'} ({len(result.xs)} iterations, {result.stop_reason})")
    return 0


def cmd_gen(args):
    mode = PrecisionMode.BINARY64
    op, name = _parse_gen_spec(args.name, args, mode)
    out = _outdir(args)
    path = out / f"{name}.mtx"
    if name == "diag":
        a = op.to_dense()
        mmio.write_matrix_market(path, sp.coo_matrix(a))
    else:
        mmio.write_matrix_market(path, op.to_dense())
    print(f"wrote {path}")
    return 0


def _corpus_operators(args, mode):
    for name in corpus_mod.CORPUS:
        op, substituted = corpus_mod.load_corpus_operator(
            name, matrix_dir=args.matrix_dir, mode=mode
        )
        if substituted:
            where = args.matrix_dir or "no --matrix-dir given"
            print(
                f"warning: {name}.mtx not found ({where}); "
                "using generated substitute",
                file=sys.stderr,
            )
        yield name, op


def cmd_experiment(args):
    out = _outdir(args)
    name = args.name
    if name in ("fig1", "fig2"):
        policy = (
            ReorthPolicy.full()
            if name == "fig1"
            else ReorthPolicy.partial(eta=args.eta)
        )
        for mat_name, op in _corpus_operators(args, PrecisionMode.BINARY64):
            b = np.ones(op.m)
            k = min(args.k, op.n)
            _, trace = diagnostics.trace_run(op, b, k, policy)
            fname = out / f"{name}_{mat_name}.csv"
            trace.write_csv(fname)
            print(f"wrote {fname}")
        return 0
    if name == "fig3":
        return _experiment_fig3(args, out)
    if name == "table2":
        return _experiment_table2(args, out)
    raise InvalidInput(f"unknown experiment {name!r}")


def _precisions(args):
    if args.precision == "both":
        return ["double", "single"]
    return [args.precision]


def _experiment_fig3(args, out):
    n = args.n or 800
    a = clustered_spectrum_matrix(n)
    profile = np.sort(clustered_spectrum_profile(n))[::-1]
    refs_path = out / "fig3_refs.csv"
    with open(refs_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "sigma"])
        for i, s in enumerate(profile, start=1):
            w.writerow([str(i), _fmt(s)])
    for prec in _precisions(args):
        op = DenseOperator(a, _mode(prec))
        history = svdapprox.track_convergence(
            op, np.ones(n), ReorthPolicy.full(), min(args.k, n), watch="largest:4"
        )
        path = out / f"fig3_{prec}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            labels = [f"s_{j}" for j in range(1, 5)]
            w.writerow(["k"] + labels + [f"res_{lab}" for lab in labels])
            for idx, kk in enumerate(history.ks):
                row = [str(kk)]
                row += [_fmt(wv.values[idx]) for wv in history.watched]
                row += [_fmt(wv.residual_estimates[idx]) for wv in history.watched]
                w.writerow(row)
        print(f"wrote {path}")
    print(f"wrote {refs_path}")
    return 0


def _experiment_table2(args, out):
    n = args.n or 800
    a = clustered_spectrum_matrix(n)
    sigma_top = 1.0
    sigma_bot = 1e-4
    k_large = min(args.k, n)
    k_small = min(args.k_small, n)
    lines = []
    for prec in _precisions(args):
        op = DenseOperator(a, _mode(prec))
        hist_l = svdapprox.track_convergence(
            op, np.ones(n), ReorthPolicy.full(), k_large, watch="largest:2"
        )
        s1 = hist_l.watch(1).values[-1]
        s2 = hist_l.watch(2).values[-1]
        lines += [
            f"{prec}_largest_k={hist_l.ks[-1]}",
            f"{prec}_s1_rel_err={_fmt(abs(s1 - sigma_top) / sigma_top)}",
            f"{prec}_s2_rel_err={_fmt(abs(s2 - sigma_top) / sigma_top)}",
            f"{prec}_s1_s2_gap={_fmt(abs(s1 - s2))}",
        ]
        hist_s = svdapprox.track_convergence(
            op, np.ones(n), ReorthPolicy.full(), k_small, watch="smallest:2"
        )
        smin = hist_s.watch(-1).values[-1]
        smin2 = hist_s.watch(-2).values[-1]
        lines += [
            f"{prec}_smallest_k={hist_s.ks[-1]}",
            f"{prec}_smin_rel_err={_fmt(abs(smin - sigma_bot) / sigma_bot)}",
            f"{prec}_smin2_rel_err={_fmt(abs(smin2 - sigma_bot) / sigma_bot)}",
            f"{prec}_smin_gap={_fmt(abs(smin - smin2))}",
        ]
    path = out / "table2.txt"
    path.write_text("\n".join(lines) + "\n")
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------


def _add_matrix_args(p):
    p.add_argument("--matrix", help="Matrix Market file to load")
    p.add_argument("--gen", help="generator spec: section5|diag:...|rank1|random")
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--b", default="ones", help="ones | random | file:PATH")
    p.add_argument("--seed", type=int, default=0)


def _add_policy_args(p):
    p.add_argument(
        "--reorth",
        default="full",
        choices=["full", "none", "onesided-u", "onesided-v", "partial", "semi"],
    )
    p.add_argument("--eta", type=float, default=1e-10)
    p.add_argument("--threshold", type=float, default=SQRT_EPS)
    p.add_argument("--passes", type=int, default=2)
    p.add_argument("--no-local", action="store_true")


def build_parser():
    ap = argparse.ArgumentParser(
        prog="kbidiag",
        description="Lower Lanczos bidiagonalization with reorthogonalization",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="factorize and write the diagnostics trace")
    _add_matrix_args(p)
    _add_policy_args(p)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--precision", default="double", choices=["double", "single"])
    p.add_argument("--out", default=None)
    p.add_argument("--no-x", action="store_true", help="skip the residual-stack norm")
    p.add_argument("--save-factorization", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("svd", help="track approximate singular values")
    _add_matrix_args(p)
    _add_policy_args(p)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--watch", default="largest:4")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--precision", default="double", choices=["double", "single"])
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_svd)

    p = sub.add_parser("lsqr", help="iterative least squares")
    _add_matrix_args(p)
    _add_policy_args(p)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--atol", type=float, default=1e-12)
    p.add_argument("--precision", default="double", choices=["double", "single"])
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_lsqr)

    p = sub.add_parser("gen", help="write a generated matrix to .mtx")
    p.add_argument("name", help="section5 | diag:5,3,1 | rank1 | random")
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("experiment", help="fig1 | fig2 | fig3 | table2")
    p.add_argument("name", choices=["fig1", "fig2", "fig3", "table2"])
    p.add_argument("--matrix-dir", default=None)
    p.add_argument("--k", type=int, default=100)
    p.add_argument("--k-small", type=int, default=250)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--eta", type=float, default=1e-10)
    p.add_argument(
        "--precision", default="both", choices=["double", "single", "both"]
    )
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_experiment)

    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInput, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
