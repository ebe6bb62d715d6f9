"""Compiled dense kernels.

Every function here is numba-compilable; with the numba switch off they run
as ordinary Python over the numpy primitives in :mod:`bugsylv._prims`.
Status codes are returned instead of raising so the same code works in
nopython mode; :mod:`bugsylv.kernels` turns them into exceptions.
"""
import math

import numpy as np

from ._accel import jit
from ._prims import (axpy, dot, house_left, house_right, lu_eliminate,
                     reflect3_cols, reflect3_rows, rot_cols, rot_rows)

EPS = 2.0 ** -52


@jit
def nrm2(x):
    """Euclidean norm without underflow or overflow in the squares."""
    scale = 0.0
    for i in range(x.shape[0]):
        scale = max(scale, abs(x[i]))
    if scale == 0.0:
        return 0.0
    acc = 0.0
    for i in range(x.shape[0]):
        t = x[i] / scale
        acc += t * t
    return scale * math.sqrt(acc)


@jit
def house(x):
    """Householder vector v, factor beta and image alpha with
    (I - beta v v^T) x = alpha e_1."""
    scale = 0.0
    for i in range(x.shape[0]):
        scale = max(scale, abs(x[i]))
    if scale == 0.0:
        return x.copy(), 0.0, 0.0
    # work on x / scale so tiny or huge columns neither underflow nor overflow
    v = x / scale
    normx = math.sqrt(dot(v, v))
    alpha = -normx if v[0] >= 0.0 else normx
    v[0] = v[0] - alpha
    beta = 2.0 / dot(v, v)
    return v, beta, alpha * scale


@jit
def qr_householder(A, pivot):
    m, n = A.shape
    k = min(m, n)
    R = A.copy()
    perm = np.arange(n)
    vs = np.zeros((k, m))
    betas = np.zeros(k)
    for j in range(k):
        if pivot:
            best = j
            bestn = -1.0
            for c in range(j, n):
                nc = dot(R[j:, c], R[j:, c])
                if nc > bestn:
                    bestn = nc
                    best = c
            if best != j:
                for i in range(m):
                    t = R[i, j]
                    R[i, j] = R[i, best]
                    R[i, best] = t
                t2 = perm[j]
                perm[j] = perm[best]
                perm[best] = t2
        v, beta, alpha = house(R[j:, j].copy())
        betas[j] = beta
        vs[j, j:] = v
        if beta != 0.0:
            house_left(R, v, beta, j, j)
            R[j, j] = alpha
            R[j + 1:, j] = 0.0
    Q = np.zeros((m, k))
    for i in range(k):
        Q[i, i] = 1.0
    for j in range(k - 1, -1, -1):
        if betas[j] != 0.0:
            house_left(Q, vs[j, j:].copy(), betas[j], j, j)
    return Q, R[:k, :].copy(), perm


@jit
def hessenberg(A):
    n = A.shape[0]
    H = A.copy()
    Q = np.eye(n)
    for k in range(n - 2):
        v, beta, alpha = house(H[k + 1:, k].copy())
        if beta == 0.0:
            continue
        house_left(H, v, beta, k + 1, k)
        house_right(H, v, beta, k + 1, 0, n)
        house_right(Q, v, beta, k + 1, 0, n)
        H[k + 1, k] = alpha
        H[k + 2:, k] = 0.0
    return H, Q


@jit
def francis_schur(H, V, maxit):
    """Francis double-shift QR on upper Hessenberg H, accumulating into V.

    Returns the number of QR sweeps, or -1 when ``maxit`` is exceeded.
    """
    nn = H.shape[0]
    n = nn - 1
    low = 0
    exshift = 0.0
    p = 0.0
    q = 0.0
    r = 0.0
    s = 0.0
    z = 0.0
    w = 0.0
    x = 0.0
    y = 0.0
    norm = 0.0
    for i in range(nn):
        for j in range(max(i - 1, 0), nn):
            norm += abs(H[i, j])
    it = 0
    total = 0
    while n >= low:
        l = n
        while l > low:
            s = abs(H[l - 1, l - 1]) + abs(H[l, l])
            if s == 0.0:
                s = norm
            if abs(H[l, l - 1]) < EPS * s:
                break
            l -= 1
        if l > low:
            H[l, l - 1] = 0.0
        if l == n:
            H[n, n] += exshift
            n -= 1
            it = 0
        elif l == n - 1:
            w = H[n, n - 1] * H[n - 1, n]
            p = (H[n - 1, n - 1] - H[n, n]) / 2.0
            q = p * p + w
            z = math.sqrt(abs(q))
            H[n, n] += exshift
            H[n - 1, n - 1] += exshift
            if q >= 0.0:
                # real pair: rotate the block to triangular form
                z = p + z if p >= 0.0 else p - z
                x = H[n, n - 1]
                s = abs(x) + abs(z)
                p = x / s
                q = z / s
                r = math.sqrt(p * p + q * q)
                p /= r
                q /= r
                rot_rows(H, n - 1, n, n - 1, nn, q, p)
                rot_cols(H, n - 1, n, 0, n + 1, q, p)
                rot_cols(V, n - 1, n, 0, nn, q, p)
                H[n, n - 1] = 0.0
            n -= 2
            it = 0
        else:
            total += 1
            if total > maxit:
                return -1
            x = H[n, n]
            y = 0.0
            w = 0.0
            if l < n:
                y = H[n - 1, n - 1]
                w = H[n, n - 1] * H[n - 1, n]
            if it == 10:
                # exceptional shift
                exshift += x
                for i in range(low, n + 1):
                    H[i, i] -= x
                s = abs(H[n, n - 1]) + abs(H[n - 1, n - 2])
                x = 0.75 * s
                y = x
                w = -0.4375 * s * s
            if it == 30:
                s = (y - x) / 2.0
                s = s * s + w
                if s > 0.0:
                    s = math.sqrt(s)
                    if y < x:
                        s = -s
                    s = x - w / ((y - x) / 2.0 + s)
                    for i in range(low, n + 1):
                        H[i, i] -= s
                    exshift += s
                    x = 0.964
                    y = x
                    w = x
            it += 1
            m = n - 2
            while m >= l:
                z = H[m, m]
                r = x - z
                s = y - z
                p = (r * s - w) / H[m + 1, m] + H[m, m + 1]
                q = H[m + 1, m + 1] - z - r - s
                r = H[m + 2, m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                if (abs(H[m, m - 1]) * (abs(q) + abs(r))
                        < EPS * (abs(p) * (abs(H[m - 1, m - 1]) + abs(z)
                                           + abs(H[m + 1, m + 1])))):
                    break
                m -= 1
            for i in range(m + 2, n + 1):
                H[i, i - 2] = 0.0
                if i > m + 2:
                    H[i, i - 3] = 0.0
            for k in range(m, n):
                notlast = k != n - 1
                if k != m:
                    p = H[k, k - 1]
                    q = H[k + 1, k - 1]
                    r = H[k + 2, k - 1] if notlast else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x == 0.0:
                        continue
                    p /= x
                    q /= x
                    r /= x
                s = math.sqrt(p * p + q * q + r * r)
                if p < 0.0:
                    s = -s
                if s != 0.0:
                    if k != m:
                        H[k, k - 1] = -s * x
                    elif l != m:
                        H[k, k - 1] = -H[k, k - 1]
                    p += s
                    x = p / s
                    y = q / s
                    z = r / s
                    q /= p
                    r /= p
                    reflect3_rows(H, k, k, nn, x, y, z, q, r, notlast)
                    reflect3_cols(H, k, 0, min(n, k + 3) + 1, x, y, z, q, r, notlast)
                    reflect3_cols(V, k, 0, nn, x, y, z, q, r, notlast)
                    if notlast:
                        # the reflector annihilates these exactly
                        if k != m:
                            H[k + 1, k - 1] = 0.0
                            H[k + 2, k - 1] = 0.0
                    elif k != m:
                        H[k + 1, k - 1] = 0.0
    for i in range(nn):
        for j in range(0, i - 1):
            H[i, j] = 0.0
    return total


@jit
def schur_blocks(T):
    """Start indices and sizes of the diagonal blocks of a quasi-triangular T."""
    n = T.shape[0]
    starts = np.empty(n, dtype=np.int64)
    sizes = np.empty(n, dtype=np.int64)
    nb = 0
    i = 0
    while i < n:
        starts[nb] = i
        if i + 1 < n and T[i + 1, i] != 0.0:
            sizes[nb] = 2
            i += 2
        else:
            sizes[nb] = 1
            i += 1
        nb += 1
    return starts[:nb].copy(), sizes[:nb].copy()


@jit
def svd_golub_kahan(A0, maxit):
    """Golub-Kahan bidiagonalisation + implicit-shift QR, m >= n.

    Returns (U, s, V, status) with A0 = U diag(s) V^T; status -1 when the
    sweep cap is hit.
    """
    A = A0.copy()
    m, n = A.shape
    nu = min(m, n)
    s = np.zeros(min(m + 1, n))
    U = np.zeros((m, nu))
    V = np.zeros((n, n))
    e = np.zeros(n)
    work = np.zeros(m)
    nct = min(m - 1, n)
    nrt = max(0, min(n - 2, m))
    for k in range(max(nct, nrt)):
        if k < nct:
            sk = nrm2(A[k:, k])
            if sk != 0.0:
                if A[k, k] < 0.0:
                    sk = -sk
                for i in range(k, m):
                    A[i, k] /= sk
                A[k, k] += 1.0
            s[k] = -sk
        for j in range(k + 1, n):
            if k < nct and s[k] != 0.0:
                t = -dot(A[k:, k], A[k:, j]) / A[k, k]
                axpy(t, A[k:, k], A[k:, j])
            e[j] = A[k, j]
        if k < nct:
            for i in range(k, m):
                U[i, k] = A[i, k]
        if k < nrt:
            ek = nrm2(e[k + 1:])
            if ek != 0.0:
                if e[k + 1] < 0.0:
                    ek = -ek
                for i in range(k + 1, n):
                    e[i] /= ek
                e[k + 1] += 1.0
            e[k] = -ek
            if k + 1 < m and e[k] != 0.0:
                for i in range(k + 1, m):
                    work[i] = 0.0
                for j in range(k + 1, n):
                    axpy(e[j], A[k + 1:, j], work[k + 1:])
                for j in range(k + 1, n):
                    axpy(-e[j] / e[k + 1], work[k + 1:], A[k + 1:, j])
            for i in range(k + 1, n):
                V[i, k] = e[i]

    p = min(n, m + 1)
    if nct < n:
        s[nct] = A[nct, nct]
    if m < p:
        s[p - 1] = 0.0
    if nrt + 1 < p:
        e[nrt] = A[nrt, p - 1]
    e[p - 1] = 0.0

    for j in range(nct, nu):
        for i in range(m):
            U[i, j] = 0.0
        U[j, j] = 1.0
    for k in range(nct - 1, -1, -1):
        if s[k] != 0.0:
            for j in range(k + 1, nu):
                t = -dot(U[k:, k], U[k:, j]) / U[k, k]
                axpy(t, U[k:, k], U[k:, j])
            for i in range(k, m):
                U[i, k] = -U[i, k]
            U[k, k] = 1.0 + U[k, k]
            for i in range(0, k):
                U[i, k] = 0.0
        else:
            for i in range(m):
                U[i, k] = 0.0
            U[k, k] = 1.0

    for k in range(n - 1, -1, -1):
        if k < nrt and e[k] != 0.0:
            for j in range(k + 1, nu):
                t = -dot(V[k + 1:, k], V[k + 1:, j]) / V[k + 1, k]
                axpy(t, V[k + 1:, k], V[k + 1:, j])
        for i in range(n):
            V[i, k] = 0.0
        V[k, k] = 1.0

    pp = p - 1
    sweeps = 0
    tiny = 2.0 ** -966.0
    while p > 0:
        k = p - 2
        while k >= 0:
            if abs(e[k]) <= tiny + EPS * (abs(s[k]) + abs(s[k + 1])):
                e[k] = 0.0
                break
            k -= 1
        if k == p - 2:
            kase = 4
        else:
            ks = p - 1
            while ks > k:
                t = 0.0
                if ks != p:
                    t += abs(e[ks])
                if ks != k + 1:
                    t += abs(e[ks - 1])
                if abs(s[ks]) <= tiny + EPS * t:
                    s[ks] = 0.0
                    break
                ks -= 1
            if ks == k:
                kase = 3
            elif ks == p - 1:
                kase = 1
            else:
                kase = 2
                k = ks
        k += 1

        if kase == 1:
            # deflate negligible s[p-1]
            f = e[p - 2]
            e[p - 2] = 0.0
            for j in range(p - 2, k - 1, -1):
                t = math.hypot(s[j], f)
                cs = s[j] / t
                sn = f / t
                s[j] = t
                if j != k:
                    f = -sn * e[j - 1]
                    e[j - 1] = cs * e[j - 1]
                rot_cols(V, j, p - 1, 0, n, cs, sn)
        elif kase == 2:
            # split at negligible s[k-1]
            f = e[k - 1]
            e[k - 1] = 0.0
            for j in range(k, p):
                t = math.hypot(s[j], f)
                cs = s[j] / t
                sn = f / t
                s[j] = t
                f = -sn * e[j]
                e[j] = cs * e[j]
                rot_cols(U, j, k - 1, 0, m, cs, sn)
        elif kase == 3:
            sweeps += 1
            if sweeps > maxit:
                return U, s[:nu].copy(), V, -1
            scale = max(max(max(max(abs(s[p - 1]), abs(s[p - 2])), abs(e[p - 2])),
                            abs(s[k])), abs(e[k]))
            sp = s[p - 1] / scale
            spm1 = s[p - 2] / scale
            epm1 = e[p - 2] / scale
            sk = s[k] / scale
            ek = e[k] / scale
            b = ((spm1 + sp) * (spm1 - sp) + epm1 * epm1) / 2.0
            c = (sp * epm1) * (sp * epm1)
            shift = 0.0
            if b != 0.0 or c != 0.0:
                shift = math.sqrt(b * b + c)
                if b < 0.0:
                    shift = -shift
                shift = c / (b + shift)
            f = (sk + sp) * (sk - sp) + shift
            g = sk * ek
            for j in range(k, p - 1):
                t = math.hypot(f, g)
                cs = f / t
                sn = g / t
                if j != k:
                    e[j - 1] = t
                f = cs * s[j] + sn * e[j]
                e[j] = cs * e[j] - sn * s[j]
                g = sn * s[j + 1]
                s[j + 1] = cs * s[j + 1]
                rot_cols(V, j, j + 1, 0, n, cs, sn)
                t = math.hypot(f, g)
                cs = f / t
                sn = g / t
                s[j] = t
                f = cs * e[j] + sn * s[j + 1]
                s[j + 1] = -sn * e[j] + cs * s[j + 1]
                g = sn * e[j + 1]
                e[j + 1] = cs * e[j + 1]
                if j < m - 1:
                    rot_cols(U, j, j + 1, 0, m, cs, sn)
            e[p - 2] = f
        else:
            # convergence: sign fix and ordering
            if s[k] <= 0.0:
                s[k] = -s[k] if s[k] < 0.0 else 0.0
                for i in range(pp + 1):
                    V[i, k] = -V[i, k]
            while k < pp:
                if s[k] >= s[k + 1]:
                    break
                t = s[k]
                s[k] = s[k + 1]
                s[k + 1] = t
                if k < n - 1:
                    for i in range(n):
                        t = V[i, k + 1]
                        V[i, k + 1] = V[i, k]
                        V[i, k] = t
                if k < m - 1:
                    for i in range(m):
                        t = U[i, k + 1]
                        U[i, k + 1] = U[i, k]
                        U[i, k] = t
                k += 1
            p -= 1
    return U, s[:nu].copy(), V, 0


@jit
def small_solve(M, b, smin):
    """Dense GEPP for tiny systems; overwrites b. Returns 1 if a pivot is
    below ``smin``."""
    n = M.shape[0]
    A = M.copy()
    for k in range(n):
        p = k
        best = abs(A[k, k])
        for i in range(k + 1, n):
            if abs(A[i, k]) > best:
                best = abs(A[i, k])
                p = i
        if best <= smin:
            return 1
        if p != k:
            for j in range(n):
                t = A[k, j]
                A[k, j] = A[p, j]
                A[p, j] = t
            t = b[k]
            b[k] = b[p]
            b[p] = t
        for i in range(k + 1, n):
            lik = A[i, k] / A[k, k]
            if lik != 0.0:
                for j in range(k + 1, n):
                    A[i, j] -= lik * A[k, j]
                b[i] -= lik * b[k]
    for i in range(n - 1, -1, -1):
        acc = b[i]
        for j in range(i + 1, n):
            acc -= A[i, j] * b[j]
        b[i] = acc / A[i, i]
    return 0


@jit
def quasi_tri_solve(T, starts, sizes, S, Rt, smin):
    """Solve T Y + Y S^T = R for quasi-upper-triangular T (n x n) and a
    1x1/2x2 block S.  Right-hand side and result are stored transposed
    (q x n) so every inner product runs over contiguous rows."""
    q = S.shape[0]
    n = T.shape[0]
    Yt = np.zeros((q, n))
    for bi in range(starts.shape[0] - 1, -1, -1):
        i0 = starts[bi]
        p = sizes[bi]
        e0 = i0 + p
        dim = p * q
        K = np.zeros((dim, dim))
        rhs = np.zeros(dim)
        for c in range(q):
            for a in range(p):
                i = i0 + a
                rhs[c * p + a] = Rt[c, i] - dot(T[i, e0:], Yt[c, e0:])
                for b2 in range(p):
                    K[c * p + a, c * p + b2] += T[i, i0 + b2]
                for d in range(q):
                    K[c * p + a, d * p + a] += S[c, d]
        if small_solve(K, rhs, smin) != 0:
            return Yt, 1
        for c in range(q):
            for a in range(p):
                Yt[c, i0 + a] = rhs[c * p + a]
    return Yt, 0


@jit
def bartels_stewart(TA, sA, zA, TB, sB, zB, Gt, smin):
    """Solve TA Y + Y TB^T = G with both factors quasi-upper-triangular.

    ``Gt`` is G transposed (n x m); the solution is returned transposed too.
    """
    n, m = Gt.shape
    Yt = np.zeros((n, m))
    for bj in range(sB.shape[0] - 1, -1, -1):
        j0 = sB[bj]
        q = zB[bj]
        rhs = np.empty((q, m))
        for c in range(q):
            row = Gt[j0 + c].copy()
            for l in range(j0 + q, n):
                t = TB[j0 + c, l]
                if t != 0.0:
                    axpy(-t, Yt[l], row)
            rhs[c] = row
        S = TB[j0:j0 + q, j0:j0 + q].copy()
        blk, status = quasi_tri_solve(TA, sA, zA, S, rhs, smin)
        if status != 0:
            return Yt, 1
        for c in range(q):
            Yt[j0 + c] = blk[c]
    return Yt, 0


@jit
def lu_factor(A0):
    """Gaussian elimination with partial pivoting. Returns (LU, piv, status)
    where status is 1 + index of the first negligible pivot, or 0."""
    A = A0.copy()
    n = A.shape[0]
    piv = np.arange(n)
    amax = 0.0
    for i in range(n):
        for j in range(n):
            if abs(A[i, j]) > amax:
                amax = abs(A[i, j])
    thresh = n * EPS * amax
    for k in range(n):
        p = k
        best = abs(A[k, k])
        for i in range(k + 1, n):
            if abs(A[i, k]) > best:
                best = abs(A[i, k])
                p = i
        piv[k] = p
        if best <= thresh:
            return A, piv, k + 1
        if p != k:
            row = A[k].copy()
            A[k] = A[p]
            A[p] = row
        lu_eliminate(A, k)
    return A, piv, 0


@jit
def lu_solve(LU, piv, B):
    n = LU.shape[0]
    Xt = B.T.copy()
    for c in range(Xt.shape[0]):
        x = Xt[c]
        for k in range(n):
            p = piv[k]
            if p != k:
                t = x[k]
                x[k] = x[p]
                x[p] = t
        for i in range(1, n):
            x[i] -= dot(LU[i, :i], x[:i])
        for i in range(n - 1, -1, -1):
            x[i] = (x[i] - dot(LU[i, i + 1:], x[i + 1:])) / LU[i, i]
    return Xt.T.copy()


@jit
def band_lu_factor(B, kl, ku):
    """Banded GEPP in place.  Row i of ``B`` holds columns i-kl .. i+ku+kl
    (the last kl slots absorb pivoting fill).  Returns (L, piv, status, ops)."""
    n = B.shape[0]
    L = np.zeros((n, max(kl, 1)))
    piv = np.arange(n)
    ops = 0
    for k in range(n):
        p = k
        amax = abs(B[k, kl])
        for i in range(k + 1, min(n, k + kl + 1)):
            a = abs(B[i, k - i + kl])
            if a > amax:
                amax = a
                p = i
        piv[k] = p
        if amax == 0.0:
            return L, piv, k + 1, ops
        jend = min(n, k + ku + kl + 1)
        if p != k:
            for j in range(k, jend):
                t = B[k, j - k + kl]
                B[k, j - k + kl] = B[p, j - p + kl]
                B[p, j - p + kl] = t
        for i in range(k + 1, min(n, k + kl + 1)):
            lik = B[i, k - i + kl] / B[k, kl]
            L[k, i - k - 1] = lik
            B[i, k - i + kl] = 0.0
            for j in range(k + 1, jend):
                B[i, j - i + kl] -= lik * B[k, j - k + kl]
                ops += 1
    return L, piv, 0, ops


@jit
def band_lu_solve(B, L, piv, kl, ku, rhs):
    n = B.shape[0]
    Xt = rhs.T.copy()
    ops = 0
    for c in range(Xt.shape[0]):
        x = Xt[c]
        for k in range(n):
            p = piv[k]
            if p != k:
                t = x[k]
                x[k] = x[p]
                x[p] = t
            for i in range(k + 1, min(n, k + kl + 1)):
                x[i] -= L[k, i - k - 1] * x[k]
                ops += 1
        for i in range(n - 1, -1, -1):
            acc = x[i]
            for j in range(i + 1, min(n, i + ku + kl + 1)):
                acc -= B[i, j - i + kl] * x[j]
                ops += 1
            x[i] = acc / B[i, kl]
    return Xt.T.copy(), ops
