import numpy as np

from kbidiag.corpus import CORPUS, load_corpus_operator, substitute_matrix
from kbidiag.linops import SparseOperator, spectral_norm
from kbidiag.mmio import write_matrix_market


def test_sizes_match_registry():
    for name, entry in CORPUS.items():
        op, substituted = load_corpus_operator(name)
        assert substituted
        assert op.shape == (entry.m, entry.n)


def test_substitute_norm_calibrated():
    entry = CORPUS["nos3"]
    op = SparseOperator(substitute_matrix(entry))
    est = spectral_norm(op, tol=1e-9)
    assert abs(est - entry.norm) <= 1e-3


def test_substitute_conditioning_comparable():
    entry = CORPUS["well1850"]
    a = substitute_matrix(entry).toarray()
    sv = np.linalg.svd(a, compute_uv=False)
    kappa = sv[0] / sv[-1]
    assert entry.cond / 3 <= kappa <= entry.cond * 3


def test_real_file_preferred(tmp_path, rng):
    a = rng.standard_normal((30, 20))
    a[np.arange(20), np.arange(20)] += 3.0
    write_matrix_market(tmp_path / "nos3.mtx", a)
    op, substituted = load_corpus_operator("nos3", matrix_dir=str(tmp_path))
    assert not substituted
    assert op.shape == (30, 20)


def test_substitutes_deterministic():
    a1 = substitute_matrix(CORPUS["nos3"])
    a2 = substitute_matrix(CORPUS["nos3"])
    assert (a1 != a2).nnz == 0
