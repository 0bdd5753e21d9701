import numpy as np
import pytest
import scipy.sparse as sp

from kbidiag.errors import InvalidInput
from kbidiag.mmio import load_operator, read_matrix_market, write_matrix_market


def test_coordinate_roundtrip(tmp_path, rng):
    a = sp.random(9, 6, density=0.3, random_state=3, format="coo")
    path = tmp_path / "a.mtx"
    write_matrix_market(path, a)
    back = read_matrix_market(path)
    assert sp.issparse(back)
    np.testing.assert_allclose(back.toarray(), a.toarray(), rtol=0, atol=1e-15)


def test_array_roundtrip(tmp_path, rng):
    a = rng.standard_normal((5, 4))
    path = tmp_path / "dense.mtx"
    write_matrix_market(path, a)
    back = read_matrix_market(path)
    assert isinstance(back, np.ndarray)
    np.testing.assert_allclose(back, a, rtol=0, atol=1e-15)


def test_symmetric_expansion(tmp_path):
    # lower triangle stored once; loading must fill both triangles
    text = "\n".join(
        [
            "%%MatrixMarket matrix coordinate real symmetric",
            "% a comment line",
            "3 3 4",
            "1 1 2.0",
            "2 2 3.0",
            "3 3 4.0",
            "3 1 5.0",
        ]
    )
    path = tmp_path / "sym.mtx"
    path.write_text(text + "\n")
    a = read_matrix_market(path).toarray()
    expected = np.array([[2.0, 0, 5.0], [0, 3.0, 0], [5.0, 0, 4.0]])
    np.testing.assert_array_equal(a, expected)


def test_load_operator(tmp_path, rng):
    a = rng.standard_normal((6, 4))
    path = tmp_path / "op.mtx"
    write_matrix_market(path, a)
    op = load_operator(path)
    x = rng.standard_normal(4)
    np.testing.assert_allclose(op.apply(x), a @ x, atol=1e-13)


def test_missing_file():
    with pytest.raises(InvalidInput):
        read_matrix_market("/nonexistent/thing.mtx")


def test_garbage_file(tmp_path):
    path = tmp_path / "bad.mtx"
    path.write_text("this is not a matrix\n")
    with pytest.raises(InvalidInput):
        read_matrix_market(path)
