"""Exact polyhedral oracles for diagonal (commutative) systems.

Level-1 data of a diagonal system lives in R^d: the selfadjoint part is the
real row span of the hermitian basis diagonals, the cone is its intersection
with the nonnegative orthant and the norm is sup over grid points.  All the
level-1 constants are therefore linear programs over small polytopes, which
these helpers solve by explicit vertex enumeration plus LP gauges -- an
independent route used to pin the sampled estimators.
"""

import itertools

import numpy as np
from scipy.optimize import linprog

_FEAS = 1e-9


def hpolytope_vertices(A, b, tol=1e-9):
    """Vertices of {x : A x <= b} (assumed bounded) by basis enumeration."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    rows, k = A.shape
    verts = []
    for idx in itertools.combinations(range(rows), k):
        M = A[list(idx)]
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, b[list(idx)])
        if np.all(A @ x <= b + tol * (1.0 + np.abs(b))):
            if not any(np.linalg.norm(x - v) <= 1e-8 for v in verts):
                verts.append(x)
    return verts


def standard_form_vertices(A_eq, b_eq, tol=1e-9):
    """Basic feasible solutions of {x >= 0 : A_eq x = b_eq}."""
    A = np.asarray(A_eq, dtype=float)
    b = np.asarray(b_eq, dtype=float)
    m, n = A.shape
    rank = np.linalg.matrix_rank(A, tol=1e-10)
    verts = []
    for cols in itertools.combinations(range(n), rank):
        B = A[:, list(cols)]
        if np.linalg.matrix_rank(B, tol=1e-10) < rank:
            continue
        xb, res, _, _ = np.linalg.lstsq(B, b, rcond=None)
        if np.linalg.norm(B @ xb - b) > tol * (1.0 + np.linalg.norm(b)):
            continue
        if np.min(xb) < -tol:
            continue
        x = np.zeros(n)
        x[list(cols)] = np.clip(xb, 0.0, None)
        if not any(np.linalg.norm(x - v) <= 1e-8 for v in verts):
            verts.append(x)
    return verts


def _lp(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, bounds=None):
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                  bounds=bounds, method="highs")
    return res


def diagonal_profile(spec):
    """(m, d) real matrix of hermitian-basis diagonals; None if not diagonal."""
    if not spec.structure.is_diagonal:
        return None
    return np.array([np.real(np.diag(H)) for H in spec.hermitian_basis])


def decomposition_value_lp(H, c):
    """min 1'(lam + mu) with x = G(lam - mu) over the cone-cap generators.

    H is the (m, d) diagonal profile, c the coordinate vector of x over the
    hermitian basis.  The cone cap {y in span : 0 <= y_i <= 1} is a polytope;
    its vertices generate conv(B+ u -B+) as a generalized cross-polytope, so
    the decomposition gauge is an LP in the generator weights.
    """
    m, d = H.shape
    A = np.vstack([-H.T, H.T])  # -y <= 0 and y <= 1 in grid coordinates
    b = np.concatenate([np.zeros(d), np.ones(d)])
    gens = [v for v in hpolytope_vertices(A, b) if np.linalg.norm(v) > 1e-9]
    if not gens:
        return np.inf if np.linalg.norm(c) > 1e-12 else 0.0
    G = np.array(gens).T  # (m, n_gens)
    n = G.shape[1]
    A_eq = np.hstack([G, -G])
    res = _lp(np.ones(2 * n), A_eq=A_eq, b_eq=c, bounds=[(0, None)] * 2 * n)
    if res.status != 0:
        return np.inf
    return float(res.fun)


def exact_alpha_level1(spec):
    """Exact level-1 generation constant of a diagonal spec (inf if none)."""
    H = diagonal_profile(spec)
    if H is None:
        raise ValueError("exact diagonal oracle needs a diagonal spec")
    m, d = H.shape
    ball = hpolytope_vertices(
        np.vstack([H.T, -H.T]), np.ones(2 * d)
    )
    best = 0.0
    for v in ball:
        val = decomposition_value_lp(H, v)
        if not np.isfinite(val):
            return np.inf
        best = max(best, val)
    return best


def quasistate_gauge_lp(H, y):
    """min 1'p s.t. H p = y, p >= 0: the dual norm of a positive functional."""
    m, d = H.shape
    res = _lp(np.ones(d), A_eq=H, b_eq=y, bounds=[(0, None)] * d)
    if res.status != 0:
        return np.inf
    return float(res.fun)


def dual_norm_lp(H, y):
    """Level-1 dual norm: gauge of conv(QS u -QS) = min 1'(p+q), H(p-q) = y."""
    m, d = H.shape
    A_eq = np.hstack([H, -H])
    res = _lp(np.ones(2 * d), A_eq=A_eq, b_eq=y, bounds=[(0, None)] * 2 * d)
    if res.status != 0:
        return np.inf
    return float(res.fun)


def dual_cone_has_line(H, tol=1e-9):
    """Is the level-1 dual cone {H p : p >= 0} not pointed?

    Checks for p, q >= 0 with H p = -H q != 0; when such a pair exists the
    dual positives contain a line.
    """
    m, d = H.shape
    A_eq = np.hstack([H, H])  # H p + H q = 0
    A_eq = np.vstack([A_eq, np.ones((1, 2 * d))])  # normalisation
    b_eq = np.concatenate([np.zeros(m), [1.0]])
    for j in range(m):
        for sign in (1.0, -1.0):
            c = np.concatenate([sign * H[j], np.zeros(d)])
            res = _lp(-c, A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * 2 * d)
            if res.status == 0 and -res.fun > tol:
                return True
    return False


def exact_beta_level1(spec):
    """Exact level-1 normality constant of the dual of a diagonal spec.

    Enumerates the extreme points of the order-interval body
    {f : 0 <= f <= g, g a quasistate} through its standard-form lift and
    takes the largest quasistate gauge.
    """
    H = diagonal_profile(spec)
    if H is None:
        raise ValueError("exact diagonal oracle needs a diagonal spec")
    m, d = H.shape
    if dual_cone_has_line(H):
        return np.inf
    # lift: y = H p, y = H (s - q), sum s + u = 1, all vars >= 0
    A_eq = np.zeros((m + 1, 3 * d + 1))
    A_eq[:m, 0:d] = H
    A_eq[:m, d:2 * d] = -H
    A_eq[:m, 2 * d:3 * d] = H
    A_eq[m, d:2 * d] = 1.0
    A_eq[m, 3 * d] = 1.0
    b_eq = np.concatenate([np.zeros(m), [1.0]])
    best = 0.0
    for v in standard_form_vertices(A_eq, b_eq):
        y = H @ v[:d]
        g = quasistate_gauge_lp(H, y)
        if np.isfinite(g):
            best = max(best, g)
    return best


def min_norm_preimage_lp(H_src, V, w):
    """min ||x||_inf over source elements with map-coordinates V x = w."""
    m, d = H_src.shape
    k = V.shape[0]
    # variables (c in R^m, t): minimize t with |(H' c)_i| <= t and V c = w
    A_ub = np.zeros((2 * d, m + 1))
    A_ub[:d, :m] = H_src.T
    A_ub[d:, :m] = -H_src.T
    A_ub[:, m] = -1.0
    A_eq = np.zeros((k, m + 1))
    A_eq[:, :m] = V
    res = _lp(np.concatenate([np.zeros(m), [1.0]]),
              A_ub=A_ub, b_ub=np.zeros(2 * d),
              A_eq=A_eq, b_eq=w,
              bounds=[(None, None)] * m + [(0, None)])
    if res.status != 0:
        return np.inf
    return float(res.fun)


def exact_quotient_constant_level1(src_spec, V, tgt_spec):
    """Exact level-1 quotient constant of a diagonal-to-diagonal ccp map.

    V is the coordinate matrix of the map on hermitian bases.  The constant
    is the largest min-norm-preimage norm over the vertices of the target
    unit-ball polytope.
    """
    Hs = diagonal_profile(src_spec)
    Ht = diagonal_profile(tgt_spec)
    if Hs is None or Ht is None:
        raise ValueError("exact oracle needs diagonal source and target")
    mt, dt = Ht.shape
    ball = hpolytope_vertices(np.vstack([Ht.T, -Ht.T]), np.ones(2 * dt))
    best = 0.0
    for w in ball:
        val = min_norm_preimage_lp(Hs, V, w)
        if not np.isfinite(val):
            return np.inf
        best = max(best, val)
    return best
