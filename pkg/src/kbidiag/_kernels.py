"""Numba matvec kernels with a fixed ascending-index summation order.

Dense and CSR products accumulate scalar terms in exactly the same order
(row by row, columns ascending), so the two storage paths agree bit for
bit on matrices with identical entries.  Accumulation is plain IEEE
double; no fast-math reassociation.
"""

from numba import njit


@njit(cache=True)
def dense_matvec(a, x, out):
    m, n = a.shape
    for i in range(m):
        acc = 0.0
        for j in range(n):
            acc += a[i, j] * x[j]
        out[i] = acc


@njit(cache=True)
def dense_rmatvec(a, y, out):
    m, n = a.shape
    for j in range(n):
        out[j] = 0.0
    for i in range(m):
        yi = y[i]
        for j in range(n):
            out[j] += a[i, j] * yi


@njit(cache=True)
def csr_matvec(indptr, indices, data, x, out):
    m = indptr.shape[0] - 1
    for i in range(m):
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * x[indices[p]]
        out[i] = acc


@njit(cache=True)
def csr_rmatvec(indptr, indices, data, y, n, out):
    m = indptr.shape[0] - 1
    for j in range(n):
        out[j] = 0.0
    for i in range(m):
        yi = y[i]
        for p in range(indptr[i], indptr[i + 1]):
            out[indices[p]] += data[p] * yi
