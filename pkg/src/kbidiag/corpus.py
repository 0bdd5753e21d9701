"""The four-matrix test corpus and its offline substitutes.

The reference matrices (SuiteSparse collection: nos3, well1850, lshp2614,
c-23) are not redistributed here.  When the .mtx files are absent we build
sparse substitutes of the same size, spectral norm, and condition number:
a decaying diagonal profile with a few separated leading values plus a
small random off-pattern perturbation, rescaled so the top singular value
matches the reference norm.
"""

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .linops import PrecisionMode, SparseOperator, norm_estimate
from .mmio import load_operator


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    m: int
    n: int
    norm: float
    cond: float
    seed: int


CORPUS = {
    "nos3": CorpusEntry("nos3", 960, 960, 689.904, 37723.6, 101),
    "well1850": CorpusEntry("well1850", 1850, 712, 1.79433, 111.313, 102),
    "lshp2614": CorpusEntry("lshp2614", 2614, 2614, 6.98798, 5197.35, 103),
    "c-23": CorpusEntry("c-23", 3969, 3969, 1089.71, 22795.9, 104),
}


def substitute_matrix(entry):
    """Sparse stand-in with the entry's size, norm, and conditioning."""
    rng = np.random.default_rng(entry.seed)
    m, n = entry.m, entry.n
    s = np.empty(n)
    s[0] = 1.0
    s[1] = 1.0 / 1.5
    s[2] = 0.5
    s[3:] = np.logspace(np.log10(1.0 / 2.2), -np.log10(entry.cond), n - 3)
    rows = [np.arange(n)]
    cols = [np.arange(n)]
    vals = [s]
    # sprinkle small entries so the matrix is not normal and has fill
    per_row = 4
    amp = s.min() / (3.0 * per_row)
    for _ in range(per_row):
        rows.append(rng.integers(0, m, n))
        cols.append(rng.integers(0, n, n))
        vals.append(amp * rng.standard_normal(n))
    a = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m, n),
    ).tocsr()
    measured = norm_estimate(SparseOperator(a), tol=1e-10, max_iter=2000)
    a = a * (entry.norm / measured)
    return a


def load_corpus_operator(name, matrix_dir=None, mode=PrecisionMode.BINARY64):
    """Load the named corpus matrix, or its substitute when absent.

    Returns (operator, used_substitute).
    """
    entry = CORPUS[name]
    if matrix_dir is not None:
        path = f"{matrix_dir}/{name}.mtx"
        try:
            return load_operator(path, mode), False
        except Exception:
            pass
    return SparseOperator(substitute_matrix(entry), mode), True
