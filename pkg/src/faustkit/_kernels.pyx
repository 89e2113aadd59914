# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: CSR products and batch OMP."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


def csr_matvec(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
               const double[::1] data, const double[::1] x, double[::1] out):
    cdef Py_ssize_t i, p
    cdef double acc
    cdef Py_ssize_t nrows = indptr.shape[0] - 1
    with nogil:
        for i in range(nrows):
            acc = 0.0
            for p in range(indptr[i], indptr[i + 1]):
                acc = acc + data[p] * x[indices[p]]
            out[i] = acc


def csr_rmatvec(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
                const double[::1] data, const double[::1] x, double[::1] out):
    cdef Py_ssize_t i, p
    cdef double xi
    cdef Py_ssize_t nrows = indptr.shape[0] - 1
    with nogil:
        out[:] = 0.0
        for i in range(nrows):
            xi = x[i]
            for p in range(indptr[i], indptr[i + 1]):
                out[indices[p]] = out[indices[p]] + data[p] * xi


cdef int _omp_one(const double[:, ::1] gram, const double[::1] corr0,
                  double yy, int t, double tol, double gmax,
                  cnp.int64_t[::1] support, double[::1] coef,
                  double[:, ::1] chol, double[::1] alpha, double[::1] w,
                  double[::1] z) noexcept nogil:
    """Cholesky-updated OMP on precomputed Gram and correlations.

    Returns the number of selected atoms.
    """
    cdef Py_ssize_t n = gram.shape[0]
    cdef Py_ssize_t i, j, r, best
    cdef double bestval, v, d, s
    cdef double thresh = tol * sqrt(yy * gmax)
    cdef int k = 0
    for i in range(n):
        alpha[i] = corr0[i]
    while k < t:
        best = -1
        bestval = 0.0
        for i in range(n):
            v = fabs(alpha[i])
            if v > bestval:
                bestval = v
                best = i
        if best < 0 or bestval <= thresh:
            break
        # forward solve chol[:k,:k] w = gram[support, best]
        for r in range(k):
            s = gram[support[r], best]
            for j in range(r):
                s = s - chol[r, j] * w[j]
            w[r] = s / chol[r, r]
        d = gram[best, best]
        for r in range(k):
            d = d - w[r] * w[r]
        if d <= 1e-12 * gram[best, best]:
            break
        for r in range(k):
            chol[k, r] = w[r]
        chol[k, k] = sqrt(d)
        support[k] = best
        k += 1
        # solve chol chol^T coef = corr0[support]
        for r in range(k):
            s = corr0[support[r]]
            for j in range(r):
                s = s - chol[r, j] * z[j]
            z[r] = s / chol[r, r]
        for r in range(k - 1, -1, -1):
            s = z[r]
            for j in range(r + 1, k):
                s = s - chol[j, r] * coef[j]
            coef[r] = s / chol[r, r]
        for i in range(n):
            s = corr0[i]
            for r in range(k):
                s = s - gram[i, support[r]] * coef[r]
            alpha[i] = s
    return k


def batch_omp(const double[:, ::1] gram, const double[:, ::1] corr,
              const double[::1] norms2, int t, double tol,
              cnp.int64_t[:, ::1] supports, double[:, ::1] coefs, cnp.int64_t[::1] counts):
    """OMP for every column signal; ``corr`` is (L, n) = (D^T Y)^T."""
    cdef Py_ssize_t L = corr.shape[0]
    cdef Py_ssize_t n = gram.shape[0]
    cdef Py_ssize_t col, i
    cdef double gmax = 0.0
    cdef double[:, ::1] chol = np.zeros((t, t))
    cdef double[::1] alpha = np.zeros(n)
    cdef double[::1] w = np.zeros(t)
    cdef double[::1] z = np.zeros(t)
    with nogil:
        for i in range(n):
            if gram[i, i] > gmax:
                gmax = gram[i, i]
        for col in range(L):
            counts[col] = _omp_one(gram, corr[col], norms2[col], t, tol, gmax,
                                   supports[col], coefs[col], chol, alpha, w, z)
