import numpy as np
import pytest

EPS = 2.0 ** -53


@pytest.fixture
def rng():
    return np.random.default_rng(20240801)


def random_orthonormal(rng, m, k):
    q, _ = np.linalg.qr(rng.standard_normal((m, k)))
    return q


def lower_bidiagonal(alphas, betas):
    """Build the (k+1)-by-k (or k-by-k) lower bidiagonal from coefficients."""
    alphas = np.asarray(alphas, dtype=np.float64)
    betas = np.asarray(betas, dtype=np.float64)
    k = alphas.size
    rows = k + 1 if betas.size == k else k
    b = np.zeros((rows, k))
    for j in range(k):
        b[j, j] = alphas[j]
        if j + 1 < rows:
            b[j + 1, j] = betas[j]
    return b
