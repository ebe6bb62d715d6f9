"""Level-1/2 primitives used by the dense kernels.

Two implementations share one signature: scalar loops for numba (no
temporaries, cache-friendly row access) and vectorised numpy for the fallback
path.  The algorithms in :mod:`bugsylv._kernels` only call these.
"""
import numpy as np

from ._accel import USE_NUMBA, numba

if USE_NUMBA:
    _nj = numba.njit(cache=True)

    @_nj
    def dot(x, y):
        s = 0.0
        for i in range(x.shape[0]):
            s += x[i] * y[i]
        return s

    @_nj
    def axpy(a, x, y):
        for i in range(x.shape[0]):
            y[i] += a * x[i]

    @_nj
    def rot_rows(M, r1, r2, j0, j1, c, s):
        for j in range(j0, j1):
            a = M[r1, j]
            b = M[r2, j]
            M[r1, j] = c * a + s * b
            M[r2, j] = c * b - s * a

    @_nj
    def rot_cols(M, c1, c2, i0, i1, c, s):
        for i in range(i0, i1):
            a = M[i, c1]
            b = M[i, c2]
            M[i, c1] = c * a + s * b
            M[i, c2] = c * b - s * a

    @_nj
    def reflect3_rows(M, k, j0, j1, x, y, z, q, r, notlast):
        for j in range(j0, j1):
            p = M[k, j] + q * M[k + 1, j]
            if notlast:
                p += r * M[k + 2, j]
                M[k + 2, j] -= p * z
            M[k, j] -= p * x
            M[k + 1, j] -= p * y

    @_nj
    def reflect3_cols(M, k, i0, i1, x, y, z, q, r, notlast):
        for i in range(i0, i1):
            p = x * M[i, k] + y * M[i, k + 1]
            if notlast:
                p += z * M[i, k + 2]
                M[i, k + 2] -= p * r
            M[i, k] -= p
            M[i, k + 1] -= p * q

    @_nj
    def house_left(R, v, beta, r0, c0):
        m = v.shape[0]
        w = np.zeros(R.shape[1] - c0)
        for i in range(m):
            axpy(v[i], R[r0 + i, c0:], w)
        for i in range(m):
            axpy(-beta * v[i], w, R[r0 + i, c0:])

    @_nj
    def house_right(M, v, beta, c0, r0, r1):
        for i in range(r0, r1):
            s = dot(M[i, c0:], v)
            axpy(-beta * s, v, M[i, c0:])

else:

    def dot(x, y):
        return float(np.dot(x, y))

    def axpy(a, x, y):
        y += a * x

    def rot_rows(M, r1, r2, j0, j1, c, s):
        a = M[r1, j0:j1].copy()
        b = M[r2, j0:j1].copy()
        M[r1, j0:j1] = c * a + s * b
        M[r2, j0:j1] = c * b - s * a

    def rot_cols(M, c1, c2, i0, i1, c, s):
        a = M[i0:i1, c1].copy()
        b = M[i0:i1, c2].copy()
        M[i0:i1, c1] = c * a + s * b
        M[i0:i1, c2] = c * b - s * a

    def reflect3_rows(M, k, j0, j1, x, y, z, q, r, notlast):
        p = M[k, j0:j1] + q * M[k + 1, j0:j1]
        if notlast:
            p += r * M[k + 2, j0:j1]
            M[k + 2, j0:j1] -= p * z
        M[k, j0:j1] -= p * x
        M[k + 1, j0:j1] -= p * y

    def reflect3_cols(M, k, i0, i1, x, y, z, q, r, notlast):
        p = x * M[i0:i1, k] + y * M[i0:i1, k + 1]
        if notlast:
            p += z * M[i0:i1, k + 2]
            M[i0:i1, k + 2] -= p * r
        M[i0:i1, k] -= p
        M[i0:i1, k + 1] -= p * q

    def house_left(R, v, beta, r0, c0):
        sub = R[r0:, c0:]
        w = v @ sub
        sub -= beta * np.outer(v, w)

    def house_right(M, v, beta, c0, r0, r1):
        sub = M[r0:r1, c0:]
        w = sub @ v
        sub -= beta * np.outer(w, v)


if USE_NUMBA:

    @_nj
    def lu_eliminate(A, k):
        n = A.shape[0]
        inv = 1.0 / A[k, k]
        for i in range(k + 1, n):
            lik = A[i, k] * inv
            A[i, k] = lik
            if lik != 0.0:
                for j in range(k + 1, A.shape[1]):
                    A[i, j] -= lik * A[k, j]

else:

    def lu_eliminate(A, k):
        A[k + 1:, k] /= A[k, k]
        A[k + 1:, k + 1:] -= np.outer(A[k + 1:, k], A[k, k + 1:])
