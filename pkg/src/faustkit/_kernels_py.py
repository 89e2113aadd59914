"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Signatures and outputs match the compiled module exactly, so either can back
:mod:`faustkit.kernels`.
"""

import numpy as np


def csr_matvec(indptr, indices, data, x, out):
    rows = np.repeat(np.arange(len(indptr) - 1), np.diff(indptr))
    out[:] = np.bincount(rows, weights=data * x[indices], minlength=len(out))


def csr_rmatvec(indptr, indices, data, x, out):
    rows = np.repeat(np.arange(len(indptr) - 1), np.diff(indptr))
    out[:] = np.bincount(indices, weights=data * x[rows], minlength=len(out))


def _omp_one(gram, corr0, yy, t, tol, gmax, support, coef):
    thresh = tol * np.sqrt(yy * gmax)
    alpha = corr0.copy()
    chol = np.zeros((t, t))
    k = 0
    while k < t:
        mag = np.abs(alpha)
        best = int(np.argmax(mag))
        if mag[best] <= thresh:
            break
        sel = support[:k]
        if k:
            w = _forward(chol[:k, :k], gram[sel, best])
            d = gram[best, best] - w @ w
        else:
            w = np.zeros(0)
            d = gram[best, best]
        if d <= 1e-12 * gram[best, best]:
            break
        chol[k, :k] = w
        chol[k, k] = np.sqrt(d)
        support[k] = best
        k += 1
        sel = support[:k]
        z = _forward(chol[:k, :k], corr0[sel])
        coef[:k] = _backward(chol[:k, :k], z)
        alpha = corr0.copy()
        for r in range(k):
            alpha = alpha - gram[:, sel[r]] * coef[r]
    return k


def _forward(low, b):
    # explicit loops keep the rounding identical to the compiled kernel
    k = len(b)
    z = np.zeros(k)
    for r in range(k):
        s = b[r]
        for j in range(r):
            s = s - low[r, j] * z[j]
        z[r] = s / low[r, r]
    return z


def _backward(low, z):
    k = len(z)
    x = np.zeros(k)
    for r in range(k - 1, -1, -1):
        s = z[r]
        for j in range(r + 1, k):
            s = s - low[j, r] * x[j]
        x[r] = s / low[r, r]
    return x


def batch_omp(gram, corr, norms2, t, tol, supports, coefs, counts):
    gmax = float(np.max(np.diag(gram))) if len(gram) else 0.0
    for col in range(corr.shape[0]):
        counts[col] = _omp_one(gram, corr[col], norms2[col], t, tol, gmax,
                               supports[col], coefs[col])
