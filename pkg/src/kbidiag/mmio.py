"""Matrix Market reading and writing.

Coordinate (real general/symmetric) and array (real general) formats,
1-based indices, % comments skipped; symmetric storage is expanded on
load.  Backed by scipy.io, which implements exactly this contract.
"""

import pathlib

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import InvalidInput
from .linops import DenseOperator, PrecisionMode, SparseOperator


def read_matrix_market(path):
    """Load a .mtx file; returns a dense ndarray or a CSR matrix."""
    path = pathlib.Path(path)
    if not path.exists():
        raise InvalidInput(f"matrix file not found: {path}")
    try:
        a = scipy.io.mmread(str(path))
    except Exception as exc:
        raise InvalidInput(f"could not parse {path}: {exc}") from exc
    if sp.issparse(a):
        return sp.csr_matrix(a)
    return np.asarray(a, dtype=np.float64)


def write_matrix_market(path, a, comment=""):
    """Write dense arrays in array format, sparse matrices in coordinate."""
    if sp.issparse(a):
        scipy.io.mmwrite(str(path), sp.coo_matrix(a), comment=comment)
    else:
        scipy.io.mmwrite(str(path), np.asarray(a, dtype=np.float64), comment=comment)


def load_operator(path, mode=PrecisionMode.BINARY64):
    a = read_matrix_market(path)
    if sp.issparse(a):
        return SparseOperator(a, mode)
    return DenseOperator(a, mode)
