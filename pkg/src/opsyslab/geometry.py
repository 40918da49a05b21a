"""Levelwise noncommutative convex geometry over body families.

A body family assigns a convex body to each matrix level up to the level
cap.  Widths, the difference/hull gauge sandwich, separation certificates
and extension constants between nested families are computed here; scalar
matrix-interval families take exact spectral/LP routes, everything else goes
through the projection engine.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from . import conic
from .conic import (
    EngineConfig,
    OriginNotInBody,
    UnsupportedNode,
    gauge,
    hull_gauge,
    membership,
    minkowski_difference,
    project_body,
    scale,
)


class LevelOutOfRange(Exception):
    pass


class NotNested(Exception):
    pass


@dataclass
class NcBodyFamily:
    """Level-graded family of convex bodies (finitely truncated)."""

    tag: str
    level_cap: int
    builder: callable
    zero_in: bool = True
    _cache: dict = field(default_factory=dict, repr=False)

    def body(self, n):
        if not (1 <= n <= self.level_cap):
            raise LevelOutOfRange(
                f"level {n} outside 1..{self.level_cap} for {self.tag}"
            )
        if n not in self._cache:
            b = self.builder(n)
            if b.zero_in is None:
                b.zero_in = self.zero_in
            self._cache[n] = b
        return self._cache[n]

    def interval_bounds(self, n):
        si = self.body(n).scalar_interval()
        return None if si is None else si[:2]


def interval_family(lo, hi, base_dim=1, level_cap=3, tag=None):
    """K_n = {lo <= eigs <= hi} in Herm(base_dim * n); compressions-closed."""
    if lo > hi:
        raise ValueError("empty interval")
    tag = tag or f"interval[{lo},{hi}]x{base_dim}"
    return NcBodyFamily(
        tag=tag,
        level_cap=level_cap,
        builder=lambda n: conic.SpectralIntervalBody(base_dim * n, lo, hi),
        zero_in=(lo <= 0.0 <= hi),
    )


def psd_ball_family(ambient_dim, radius=1.0, level_cap=3):
    """The positive part of the radius ball over M_d: {0 <= x, ||x|| <= r}."""
    return interval_family(0.0, radius, base_dim=ambient_dim,
                           level_cap=level_cap,
                           tag=f"psd_ball({ambient_dim},r={radius})")


@dataclass
class SeparationCertificate:
    """Linear functional with sup <= 1 on the body but > 1 at the point."""

    level: int
    normal: np.ndarray
    value: float
    margin: float
    threshold: float = 1.0
    revalidated_max: float = None

    def evaluate(self, x):
        return float(self.normal @ np.asarray(x, dtype=np.float64))


def width(family, direction, n, cfg: EngineConfig):
    """Reciprocal gauge of the direction against K_n - K_n (0 off the span)."""
    body = family.body(n)
    d = np.ascontiguousarray(direction, dtype=np.float64)
    if np.linalg.norm(d) == 0.0:
        return np.inf
    g = gauge(minkowski_difference(body, body), d, cfg)
    if g == 0.0:
        return np.inf
    return 0.0 if np.isinf(g) else 1.0 / g


def dual_norm_sandwich(family, direction, n, cfg: EngineConfig):
    """(difference gauge, levelwise-hull gauge) for a direction at level n.

    The hull gauge is the levelwise upper surrogate for the dual selfadjoint
    norm; the pair always satisfies g_lo <= g_hull <= 2 g_lo for bodies
    containing 0.
    """
    body = family.body(n)
    if body.zero_in is False:
        raise OriginNotInBody(f"{family.tag} does not contain 0")
    d = np.ascontiguousarray(direction, dtype=np.float64)
    g_lo = gauge(minkowski_difference(body, body), d, cfg)
    g_hull = hull_gauge(body, scale(-1.0, body), d, cfg)
    return g_lo, g_hull


def sample_body_point(body, rng, cfg: EngineConfig, spread=1.0):
    """A point of the body: clip/projection of a Gaussian seed."""
    x = rng.normal(size=body.dim) * spread
    p, st = project_body(body, x, cfg)
    return p


def separate_point(family, x, n, cfg: EngineConfig, rng=None, revalidate=1000):
    """Certificate separating x from K_n, or None when x is (nearly) inside.

    The functional is the projection direction calibrated at the foot point
    p when <x-p, p> is usable and at the segment midpoint otherwise; both
    keep the body below threshold 1 whenever 0 is in the body.
    """
    body = family.body(n)
    x = np.ascontiguousarray(x, dtype=np.float64)
    p, st = project_body(body, x, cfg)
    if st.status == "max_iter":
        raise conic.MaxIterations("projection did not converge")
    f0 = x - p
    dist = float(np.linalg.norm(f0))
    if dist <= cfg.tol.feas_tol:
        return None
    c = float(f0 @ p)
    denom = c if c > cfg.tol.feas_tol else c + 0.5 * dist * dist
    if denom <= cfg.tol.feas_tol:
        raise OriginNotInBody(
            "midpoint calibration degenerate; body lies behind the origin"
        )
    normal = f0 / denom
    value = float(normal @ x)
    cert = SeparationCertificate(level=n, normal=normal, value=value,
                                 margin=value - 1.0)
    if revalidate and rng is not None:
        worst = -np.inf
        for _ in range(revalidate):
            s = sample_body_point(body, rng, cfg, spread=1.0 + dist)
            worst = max(worst, cert.evaluate(s))
        if worst > 1.0 + 100 * cfg.tol.feas_tol:
            raise AssertionError(
                f"separation certificate failed revalidation ({worst})"
            )
        cert.revalidated_max = worst
    return cert


def difference_span(family, n, cfg: EngineConfig, rng, tries=40):
    """Orthonormal basis (columns) of the observed span of K_n - K_n."""
    body = family.body(n)
    si = body.scalar_interval()
    if si is not None:
        lo, hi = si[0], si[1]
        if hi - lo > 0:
            return np.eye(body.dim)
        return np.zeros((body.dim, 0))
    base = sample_body_point(body, rng, cfg)
    cols = []
    for _ in range(tries):
        q = sample_body_point(body, rng, cfg, spread=2.0) - base
        cols.append(q)
    M = np.array(cols).T
    if not np.any(M):
        return np.zeros((body.dim, 0))
    u, s, _ = np.linalg.svd(M, full_matrices=False)
    keep = s > cfg.tol.dedup_tol * max(1.0, s[0])
    return u[:, keep]


@dataclass
class ExtensionEstimate:
    C_hat: float
    c_hat: float
    witness: np.ndarray
    samples: int


def _direction_battery(dim, block, span_basis, rng, samples):
    """Coordinate/rank-one directions and random points, all inside the span."""
    dirs = []
    for j in range(span_basis.shape[1]):
        dirs.append(span_basis[:, j])
    for i in range(min(dim, 4)):
        e = np.zeros(dim)
        e[i] = 1.0
        dirs.append(e)
    if block >= 2 and block * block == dim:
        dirs.append(K.herm_to_vec(np.diag([1.0, -1.0] + [0.0] * (block - 2))))
    for _ in range(samples):
        if span_basis.shape[1]:
            dirs.append(span_basis @ rng.normal(size=span_basis.shape[1]))
    out = []
    proj = span_basis @ span_basis.T
    for d in dirs:
        d = proj @ d
        nrm = np.linalg.norm(d)
        if nrm > 1e-10:
            out.append(d / nrm)
    return out


def extension_constant(inner, outer, n, samples, cfg: EngineConfig, rng):
    """Largest observed gauge ratio between the difference bodies.

    For nested families L within K this estimates the smallest C with
    (K_n - K_n) intersected with the span of L_n inside C (L_n - L_n); the
    estimate grows monotonically with the sample battery and 1/C_hat is
    returned from the same gauge evaluations, so the reciprocity is exact.
    """
    Lb = inner.body(n)
    Kb = outer.body(n)
    if Lb.dim != Kb.dim:
        raise conic.DimensionMismatch("families live in different spaces")
    for _ in range(8):
        p = sample_body_point(Lb, rng, cfg)
        ok, res = membership(Kb, p, cfg)
        if not ok and res > 100 * cfg.tol.feas_tol:
            raise NotNested(f"sampled point of {inner.tag} escapes {outer.tag}")
    span = difference_span(inner, n, cfg, rng)
    if span.shape[1] == 0:
        return ExtensionEstimate(1.0, 1.0, np.zeros(Lb.dim), 0)
    si = Lb.scalar_interval()
    block = si[2] if si else int(round(np.sqrt(Lb.dim)))
    diff_L = minkowski_difference(Lb, Lb)
    diff_K = minkowski_difference(Kb, Kb)
    C_hat = 0.0
    witness = None
    count = 0
    for d in _direction_battery(Lb.dim, block, span, rng, samples):
        gK = gauge(diff_K, d, cfg)
        gL = gauge(diff_L, d, cfg)
        count += 1
        if gK == 0.0:
            continue
        if np.isinf(gL):
            return ExtensionEstimate(np.inf, 0.0, d, count)
        ratio = gL / gK if np.isfinite(gK) else 0.0
        if ratio > C_hat:
            C_hat = ratio
            witness = d
    return ExtensionEstimate(C_hat, 1.0 / C_hat if C_hat > 0 else np.inf,
                             witness, count)


def _interval_cone_member(x, block, lo, hi, tol):
    """Exact membership of x in the cone generated by a scalar interval."""
    lmin, lmax = conic._eig_range_snapped(x, block, tol)
    if lo < 0 < hi:
        return True
    if lo == 0 and hi == 0:
        return lmin == 0 and lmax == 0
    if lo >= 0:
        if lmin < 0:
            return False
        if lo == 0:
            return True
        # lo > 0: need t with t*lo <= lmin and lmax <= t*hi
        return lmax * lo <= lmin * hi + tol
    # lo < hi <= 0: mirror case
    return _interval_cone_member(-np.asarray(x), block, -hi, -lo, tol)


def order_embedding_check(inner, outer, n, samples, cfg: EngineConfig, rng):
    """Does K_n meet the span of L_n only inside the cone generated by L_n?

    Exact for scalar-interval families; otherwise sampled evidence (a `pass`
    is not a proof).  Returns (passed, witness_or_None).
    """
    Lb = inner.body(n)
    Kb = outer.body(n)
    si_L = Lb.scalar_interval()
    si_K = Kb.scalar_interval()
    if si_L is not None and si_K is not None:
        lo, hi, block = si_L
        klo, khi = si_K[0], si_K[1]
        if lo < 0 < hi:
            return True, None
        # candidate witnesses sit at extreme spectral profiles of K
        for profile in ([klo] * block, [khi] * block,
                        [klo] + [khi] * (block - 1)):
            x = K.herm_to_vec(np.diag(np.array(profile, dtype=float)))
            if np.linalg.norm(x) == 0.0:
                continue
            if not _interval_cone_member(x, block, lo, hi, cfg.tol.feas_tol):
                return False, x
        return True, None
    span = difference_span(inner, n, cfg, rng)
    if span.shape[1] == 0:
        return True, None
    span_body = conic.SubspaceBody(span)
    for _ in range(samples):
        seed = rng.normal(size=Kb.dim) * 2.0
        st = conic.check_feasible([Kb, span_body], cfg, start=seed)
        if not st.feasible:
            continue
        x = st.point
        if np.linalg.norm(x) <= cfg.tol.dedup_tol:
            continue
        g = gauge(Lb, x, cfg)
        if np.isinf(g):
            return False, x
    return True, None
