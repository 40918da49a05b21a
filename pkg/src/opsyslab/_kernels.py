"""Hot numeric kernels: Hermitian coordinates, spectral clips, Dykstra sweeps.

Everything here works on real float64 coordinate vectors.  A Hermitian p x p
matrix X = A + iB is stored as a length p*p vector

    v = [X_11 .. X_pp,  sqrt2*Re X_12, sqrt2*Im X_12, ...  (pairs i<j row-major)]

which is an isometry for <X, Y> = Re tr(X* Y).  Eigenvalue work happens on the
2p x 2p real symmetric realification [[A, -B], [B, A]], whose spectrum is the
spectrum of X with every eigenvalue doubled; spectral clips commute with the
realification, so clipping there and mapping back is exact.

The kernels compile with numba's @njit by default.  Set the environment
variable OPSYSLAB_KERNELS=numpy before import to force the pure-numpy path
(same code, no JIT); benchmarks/bench_kernels.py compares the two.
"""

import os

import numpy as np

_REQUESTED = os.environ.get("OPSYSLAB_KERNELS", "numba").strip().lower()
if _REQUESTED not in ("numba", "numpy"):
    raise ValueError(f"OPSYSLAB_KERNELS must be 'numba' or 'numpy', got {_REQUESTED!r}")

if _REQUESTED == "numba":
    try:
        from numba import njit as _njit

        def _jit(f):
            return _njit(cache=True, fastmath=False)(f)

        BACKEND = "numba"
    except ImportError:  # pragma: no cover - numba is a declared dependency
        def _jit(f):
            return f

        BACKEND = "numpy"
else:
    def _jit(f):
        return f

    BACKEND = "numpy"

# Atom kind codes for the projection engine.
AFFINE = 0
SPECTRAL = 1
LINIMG = 2
HALFSPACE = 3
BALL = 4

# Dykstra exit codes.
OK = 0
PLATEAU = 1
MAXIT = 2


@_jit
def vec_to_parts(v, off, p):
    """Unpack coordinates into (A, B) with X = A + iB, A sym, B antisym."""
    A = np.zeros((p, p))
    B = np.zeros((p, p))
    for i in range(p):
        A[i, i] = v[off + i]
    k = off + p
    s = 0.7071067811865475244  # 1/sqrt(2)
    for i in range(p):
        for j in range(i + 1, p):
            re = v[k] * s
            im = v[k + 1] * s
            k += 2
            A[i, j] = re
            A[j, i] = re
            B[i, j] = im
            B[j, i] = -im
    return A, B


@_jit
def parts_to_vec(A, B, v, off):
    p = A.shape[0]
    for i in range(p):
        v[off + i] = A[i, i]
    k = off + p
    s = 1.4142135623730950488  # sqrt(2)
    for i in range(p):
        for j in range(i + 1, p):
            v[k] = A[i, j] * s
            v[k + 1] = B[i, j] * s
            k += 2


@_jit
def realify(A, B):
    """Real symmetric 2p x 2p representation [[A, -B], [B, A]] of A + iB."""
    p = A.shape[0]
    R = np.empty((2 * p, 2 * p))
    for i in range(p):
        for j in range(p):
            R[i, j] = A[i, j]
            R[p + i, p + j] = A[i, j]
            R[i, p + j] = -B[i, j]
            R[p + i, j] = B[i, j]
    return R


@_jit
def eig_range_vec(v, off, p):
    """(min, max) eigenvalue of the Hermitian block stored at v[off:off+p*p]."""
    A, B = vec_to_parts(v, off, p)
    R = realify(A, B)
    w = np.linalg.eigvalsh(R)
    return w[0], w[2 * p - 1]


@_jit
def clip_block(v, off, p, lo, hi):
    """Project the Hermitian block onto {lo <= eigs <= hi}; returns distance moved."""
    A, B = vec_to_parts(v, off, p)
    R = realify(A, B)
    w, Q = np.linalg.eigh(R)
    if w[0] >= lo and w[2 * p - 1] <= hi:
        return 0.0
    wc = np.empty(2 * p)
    dist2 = 0.0
    for i in range(2 * p):
        x = w[i]
        if x < lo:
            wc[i] = lo
        elif x > hi:
            wc[i] = hi
        else:
            wc[i] = x
        d = x - wc[i]
        dist2 += d * d
    Rc = (Q * wc) @ Q.T
    # Read back, re-symmetrising the realified structure.
    Ap = np.empty((p, p))
    Bp = np.empty((p, p))
    for i in range(p):
        for j in range(p):
            Ap[i, j] = 0.5 * (Rc[i, j] + Rc[p + i, p + j])
            Bp[i, j] = 0.5 * (Rc[p + i, j] - Rc[i, p + j])
    for i in range(p):
        Bp[i, i] = 0.0
        for j in range(i + 1, p):
            a = 0.5 * (Ap[i, j] + Ap[j, i])
            Ap[i, j] = a
            Ap[j, i] = a
            b = 0.5 * (Bp[i, j] - Bp[j, i])
            Bp[i, j] = b
            Bp[j, i] = -b
    parts_to_vec(Ap, Bp, v, off)
    # Spectrum is doubled on the realification: true squared distance is /2.
    return np.sqrt(0.5 * dist2)


@_jit
def opnorm_vec(v, off, p):
    lo, hi = eig_range_vec(v, off, p)
    return max(abs(lo), abs(hi))


@_jit
def _proj_atom(v, i, kinds, ip, fp, pool, pof):
    """Project v in place onto atom i; returns the distance moved."""
    off = ip[i, 0]
    size = ip[i, 1]
    blk = ip[i, 2]
    a = pof[i]
    kind = kinds[i]
    if kind == AFFINE:
        # pool: P (size x size), q (size)
        P = pool[a:a + size * size].reshape(size, size)
        q = pool[a + size * size:a + size * size + size]
        w = P @ v[off:off + size] + q
        d2 = 0.0
        for t in range(size):
            dd = w[t] - v[off + t]
            d2 += dd * dd
            v[off + t] = w[t]
        return np.sqrt(d2)
    elif kind == SPECTRAL:
        # pool: center (size); fp: lo, hi
        cen = pool[a:a + size]
        for t in range(size):
            v[off + t] -= cen[t]
        moved = clip_block(v, off, blk, fp[i, 0], fp[i, 1])
        for t in range(size):
            v[off + t] += cen[t]
        return moved
    elif kind == LINIMG:
        # Set {x : eigs(T x - z) in [lo, hi]} with T T^T = c I on the image.
        # pool: T (r x size) with r = blk*blk, then z (r); fp: lo, hi, c
        r = blk * blk
        T = pool[a:a + r * size].reshape(r, size)
        z = pool[a + r * size:a + r * size + r]
        g = T @ v[off:off + size]
        y = g - z
        moved_img = clip_block(y, 0, blk, fp[i, 0], fp[i, 1])
        if moved_img == 0.0:
            return 0.0
        c = fp[i, 2]
        corr = T.T @ (y + z - g) / c
        d2 = 0.0
        for t in range(size):
            v[off + t] += corr[t]
            d2 += corr[t] * corr[t]
        return np.sqrt(d2)
    elif kind == HALFSPACE:
        # pool: a (size); fp: beta; set {x : <a, x> <= beta}
        av = pool[a:a + size]
        s = 0.0
        n2 = 0.0
        for t in range(size):
            s += av[t] * v[off + t]
            n2 += av[t] * av[t]
        if s <= fp[i, 0] or n2 == 0.0:
            return 0.0
        lam = (s - fp[i, 0]) / n2
        for t in range(size):
            v[off + t] -= lam * av[t]
        return lam * np.sqrt(n2)
    else:  # BALL: pool center (size); fp: radius
        cen = pool[a:a + size]
        d2 = 0.0
        for t in range(size):
            dd = v[off + t] - cen[t]
            d2 += dd * dd
        rad = fp[i, 0]
        dist = np.sqrt(d2)
        if dist <= rad:
            return 0.0
        scale = rad / dist
        for t in range(size):
            v[off + t] = cen[t] + (v[off + t] - cen[t]) * scale
        return dist - rad


@_jit
def residual_max(v, kinds, ip, fp, pool, pof):
    """Largest distance from v to any atom (fresh projections on a copy)."""
    worst = 0.0
    for i in range(kinds.size):
        w = v.copy()
        d = _proj_atom(w, i, kinds, ip, fp, pool, pof)
        if d > worst:
            worst = d
    return worst


@_jit
def dykstra(v0, kinds, ip, fp, pool, pof, max_sweeps, tol, dv_tol,
            check_every, plateau_sweeps, plateau_rtol):
    """Dykstra cyclic projections onto the intersection of the atoms.

    Returns (v, residual, sweeps, status) with status OK / PLATEAU / MAXIT.
    PLATEAU means the infeasibility gap stopped shrinking: `residual` is then
    the stabilised gap estimate.  Corrections are kept for every non-affine
    atom; affine atoms need none.
    """
    K = kinds.size
    M = v0.size
    v = v0.copy()
    E = np.zeros((K, M))
    res = 1e300
    prev = 1e300
    plateau = 0
    status = MAXIT
    sweep = 0
    for sweep in range(1, max_sweeps + 1):
        start = v.copy()
        for i in range(K):
            if kinds[i] == AFFINE:
                _proj_atom(v, i, kinds, ip, fp, pool, pof)
            else:
                off = ip[i, 0]
                size = ip[i, 1]
                for t in range(size):
                    v[off + t] += E[i, off + t]
                u_blk = v[off:off + size].copy()
                _proj_atom(v, i, kinds, ip, fp, pool, pof)
                for t in range(size):
                    E[i, off + t] = u_blk[t] - v[off + t]
        dv = 0.0
        for t in range(M):
            dd = v[t] - start[t]
            dv += dd * dd
        dv = np.sqrt(dv)
        if sweep % check_every == 0 or sweep == max_sweeps or dv <= 1e-16:
            res = residual_max(v, kinds, ip, fp, pool, pof)
            if res <= tol and dv <= dv_tol:
                status = OK
                break
            if res > tol and prev < 1e299 and res >= prev * (1.0 - plateau_rtol):
                plateau += check_every
                if plateau >= plateau_sweeps:
                    status = PLATEAU
                    break
            else:
                plateau = 0
            prev = res
    return v, res, sweep, status


# ---------------------------------------------------------------------------
# numpy-side conversions (boundary code, not worth jitting)

def herm_to_vec(X):
    """Coordinates of a complex Hermitian matrix (symmetrised if slightly off)."""
    X = np.asarray(X, dtype=np.complex128)
    p = X.shape[0]
    H = 0.5 * (X + X.conj().T)
    v = np.empty(p * p)
    parts_to_vec(np.ascontiguousarray(H.real), np.ascontiguousarray(H.imag), v, 0)
    return v


def vec_to_herm(v, p):
    A, B = vec_to_parts(np.ascontiguousarray(v, dtype=np.float64), 0, p)
    return A + 1j * B


def opnorm_matrix(M):
    """Operator norm of a general complex matrix via the symmetric solver."""
    M = np.asarray(M, dtype=np.complex128)
    p = M.shape[0]
    R = np.zeros((2 * p, 2 * p))
    R[:p, :p] = M.real
    R[p:, p:] = M.real
    R[:p, p:] = -M.imag
    R[p:, :p] = M.imag
    w = np.linalg.eigvalsh(R.T @ R)
    return float(np.sqrt(max(w[-1], 0.0)))


def eig_range_herm(X):
    v = herm_to_vec(X)
    lo, hi = eig_range_vec(v, 0, X.shape[0])
    return float(lo), float(hi)


def warmup():
    """Trigger JIT compilation of the kernels on a tiny instance."""
    v = herm_to_vec(np.array([[1.0, 2.0 + 1j], [2.0 - 1j, -3.0]]))
    clip_block(v.copy(), 0, 2, 0.0, np.inf)
    kinds = np.array([SPECTRAL], dtype=np.int64)
    ip = np.array([[0, 4, 2]], dtype=np.int64)
    fp = np.array([[0.0, np.inf, 0.0]])
    pool = np.zeros(4)
    pof = np.array([0, 4], dtype=np.int64)
    dykstra(v, kinds, ip, fp, pool, pof, 5, 1e-9, np.inf, 2, 50, 1e-3)
