"""Positive decomposition, generation constants and order-unit constructions.

The decomposition objective is min ||y|| + ||z|| over positive y, z in the
system with y - z = x.  For systems whose cone is closed under spectral
positive parts (full matrix algebras, partition-diagonal systems, systems
generated by one PSD element) the spectral split y = x_+, z = x_- is optimal
and exact; everything else runs a bisection over the total weight with a
ternary search over the (||y||, ||z||) split, each feasibility test being a
Dykstra run.  Infeasibility is certified exactly through the linear span of
the cone: x decomposes iff it lies in span(cone).
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from . import _polytope, conic, core
from .conic import EngineConfig, SplitFeasibility, cone_cap_ball, support_max
from .core import (
    LevelElement,
    NotSelfadjoint,
    element,
    is_selfadjoint,
    op_norm,
    project_to_system,
    realize,
    sa_coords,
)


class Infeasible(Exception):
    def __init__(self, msg, witness=None, cap=None):
        super().__init__(msg)
        self.witness = witness
        self.cap = cap


class NotPositivelyGenerated(Exception):
    pass


@dataclass
class Decomposition:
    y: LevelElement
    z: LevelElement
    value: float          # ||y|| + ||z||
    value_max: float      # max(||y||, ||z||), recorded for comparison
    residual: float       # ||y - z - x|| (Frobenius)
    min_eig_y: float
    min_eig_z: float
    exact: bool


@dataclass
class GenerationRow:
    level: int
    alpha_hat: float
    witness: np.ndarray | None
    samples: int
    exact: bool


@dataclass
class GenerationReport:
    mode: str
    rows: dict = field(default_factory=dict)


@dataclass
class SpanReport:
    level: int
    passed: bool
    rank: int
    dim: int
    witnesses: list
    vanishing_functional: np.ndarray | None


def _spectral_split(spec, x):
    """Jordan split through the realization; exact on jordan-closed systems."""
    M = realize(spec, x)
    w, Q = np.linalg.eigh(0.5 * (M + M.conj().T))
    pos = (Q * np.clip(w, 0.0, None)) @ Q.conj().T
    y, res_y = project_to_system(spec, pos, x.level)
    z = element(spec, y.coeffs - x.coeffs)
    return y, z, res_y


def decompose(spec, x, cfg: EngineConfig = None):
    """Optimal positive decomposition of a selfadjoint element.

    Raises Infeasible when x is not a difference of positives in the system;
    that case is certified through exact linear algebra (x leaves the span
    of the cone), never through solver heuristics alone.
    """
    cfg = cfg or EngineConfig.default(spec.tol)
    if not is_selfadjoint(spec, x):
        raise NotSelfadjoint("decompose needs a selfadjoint element")
    n = x.level
    opn = op_norm(spec, x)
    if opn <= spec.tol.eig_tol:
        zero = element(spec, np.zeros_like(x.coeffs))
        return Decomposition(zero, zero, 0.0, 0.0, 0.0, 0.0, 0.0, True)

    if spec.structure.zero_cone:
        raise Infeasible(
            "the cone of this system is {0}; only 0 decomposes",
            witness=sa_coords(spec, x),
        )

    if spec.structure.jordan_closed:
        y, z, res = _spectral_split(spec, x)
        if res > 1e-8 * max(1.0, opn):
            raise AssertionError(
                "spectral split left the system on a jordan-closed spec"
            )
        return _package(spec, x, y, z, exact=True)

    # infeasibility pre-check: x decomposes iff x in cone - cone = span(cone)
    span = cone_span_matrix(spec, n, cfg)
    v = sa_coords(spec, x)
    resid = v - span @ (span.T @ v) if span.size else v
    if np.linalg.norm(resid) > 1e-7 * max(1.0, np.linalg.norm(v)):
        # the span is sampled; certify by checking the cone is flat along
        # the escape direction before raising
        eta = resid / np.linalg.norm(resid)
        _assert_flat_direction(spec, n, eta, cfg,
                               np.random.default_rng(spec.tol.seed + 3))
        raise Infeasible("element leaves the span of the cone", witness=resid)

    cap = cone_cap_ball(spec, n, 1.0)
    split = SplitFeasibility(cap, conic.scale(-1.0, cap), cfg)
    accept = max(cfg.tol.feas_tol, 1e-9)
    x_amb = K.herm_to_vec(realize(spec, x))
    t_max = 1e3 * opn

    def feasible(c):
        return split.min_dist_over_split(c, x_amb, stop_below=accept) <= accept

    c_hi = opn
    while not feasible(c_hi):
        c_hi *= 2.0
        if c_hi > t_max:
            raise Infeasible(
                "no decomposition below the weight cap", cap=t_max,
            )
    c_lo = opn * (1.0 - 1e-12)
    rel = max(cfg.tol.bisect_tol, 1e-8)
    while c_hi - c_lo > rel * max(1.0, c_hi):
        mid = 0.5 * (c_lo + c_hi)
        if feasible(mid):
            c_hi = mid
        else:
            c_lo = mid

    # recover a witness split at a slightly relaxed total weight
    c_fin = c_hi * (1.0 + 10 * rel)
    best = (np.inf, None)
    lo, hi = 0.0, c_fin
    for _ in range(cfg.ternary_iters):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        f1 = split.dist(m1, c_fin - m1, x_amb)
        p1 = split.warm.copy()
        f2 = split.dist(m2, c_fin - m2, x_amb)
        p2 = split.warm.copy()
        if min(f1, f2) < best[0]:
            best = (f1, p1) if f1 <= f2 else (f2, p2)
        if f1 <= f2:
            hi = m2
        else:
            lo = m1
        if best[0] <= accept and hi - lo <= 1e-3 * c_fin:
            break
    v_lift = best[1]
    y_amb = v_lift[:cap.dim]
    y, res_y = project_to_system(spec, K.vec_to_herm(y_amb, n * spec.d), n)
    z = element(spec, y.coeffs - x.coeffs)
    return _package(spec, x, y, z, exact=False)


def _package(spec, x, y, z, exact):
    ny, nz = op_norm(spec, y), op_norm(spec, z)
    _, ey = core.is_positive(spec, y)
    _, ez = core.is_positive(spec, z)
    res = float(np.linalg.norm(realize(spec, y) - realize(spec, z) - realize(spec, x)))
    return Decomposition(y, z, ny + nz, max(ny, nz), res, ey, ez, exact)


# ---------------------------------------------------------------------------
# cone span and positive generation

def cone_witnesses(spec, level, cfg: EngineConfig, rng, max_samples=None):
    """Positive elements spanning the cone, from random support maximizers."""
    body = cone_cap_ball(spec, level, 1.0)
    dim = spec.sa_dim(level)
    max_samples = max_samples or (2 * dim + 12)
    U = spec.sa_basis_matrix(level)
    witnesses = []
    coords = []
    rank = 0
    patience = 0
    for _ in range(max_samples):
        w = rng.normal(size=body.dim)
        val, pt, st = support_max(body, w, cfg, rng=rng, starts=2)
        if pt is None or np.linalg.norm(pt) <= spec.tol.dedup_tol:
            patience += 1
            if patience > dim + 6 and rank == 0:
                break
            continue
        elem, _ = project_to_system(spec, K.vec_to_herm(pt, level * spec.d), level)
        c = U.T @ K.herm_to_vec(realize(spec, elem))
        cand = coords + [c]
        r = np.linalg.matrix_rank(np.array(cand).T, tol=spec.tol.dedup_tol)
        if r > rank:
            rank = r
            coords.append(c)
            witnesses.append(elem)
            patience = 0
        else:
            patience += 1
        if rank == dim or patience > dim + 6:
            break
    return witnesses, np.array(coords)


def cone_span_matrix(spec, level, cfg: EngineConfig, rng=None):
    """Orthonormal columns spanning the observed cone span (cached)."""
    key = ("cone_span", level)
    if key in spec._caches:
        return spec._caches[key]
    rng = rng or np.random.default_rng(spec.tol.seed + 101 * level)
    if spec.structure.jordan_closed:
        span = np.eye(spec.sa_dim(level))
    elif spec.structure.zero_cone:
        span = np.zeros((spec.sa_dim(level), 0))
    else:
        _, coords = cone_witnesses(spec, level, cfg, rng)
        if coords.size == 0:
            span = np.zeros((spec.sa_dim(level), 0))
        else:
            u, s, _ = np.linalg.svd(coords.T, full_matrices=False)
            span = u[:, s > spec.tol.dedup_tol * max(1.0, s[0])]
    spec._caches[key] = span
    return span


def positive_generation_check(spec, level, cfg: EngineConfig = None, rng=None):
    """Does the cone span all of M_n(S)^sa?  Decided by exact rank arithmetic.

    By finite-dimensionality this simultaneously decides whether the cone
    separates quasistates: a rank deficit yields a nonzero selfadjoint
    functional vanishing on the cone (the dual positives then contain a
    line), returned as the certificate.
    """
    cfg = cfg or EngineConfig.default(spec.tol)
    rng = rng or np.random.default_rng(spec.tol.seed + 17 * level)
    dim = spec.sa_dim(level)
    if spec.structure.jordan_closed:
        return SpanReport(level, True, dim, dim, [], None)
    if spec.structure.zero_cone:
        eta = np.zeros(dim)
        eta[0] = 1.0
        return SpanReport(level, False, 0, dim, [], eta)
    witnesses, coords = cone_witnesses(spec, level, cfg, rng)
    if coords.size == 0:
        rank = 0
        span = np.zeros((dim, 0))
    else:
        u, s, _ = np.linalg.svd(coords.T, full_matrices=False)
        span = u[:, s > spec.tol.dedup_tol * max(1.0, s[0])]
        rank = span.shape[1]
    if rank == dim:
        return SpanReport(level, True, rank, dim, witnesses, None)
    # null direction of the witness matrix, validated against the cone
    if rank == 0:
        eta = np.zeros(dim)
        eta[0] = 1.0
    else:
        proj = np.eye(dim) - span @ span.T
        idx = int(np.argmax(np.linalg.norm(proj, axis=0)))
        eta = proj[:, idx]
        eta = eta / np.linalg.norm(eta)
    _assert_flat_direction(spec, level, eta, cfg, rng)
    return SpanReport(level, False, rank, dim, witnesses, eta)


def _assert_flat_direction(spec, level, eta, cfg, rng):
    """Independent check that the cone is flat along eta (support ~ 0)."""
    body = cone_cap_ball(spec, level, 1.0)
    U = spec.sa_basis_matrix(level)
    amb = U @ eta
    for sign in (1.0, -1.0):
        val, _, _ = support_max(body, sign * amb, cfg, rng=rng, starts=2)
        if val > 1e-6:
            raise AssertionError(
                "claimed vanishing functional sees cone mass; rank pass "
                "and separation check disagree"
            )


# ---------------------------------------------------------------------------
# generation constants

def alpha_structural(spec, level):
    """Exact generation constant for structured systems, else None.

    On jordan-closed systems the optimal split value is lmax_+ + lmin_- and
    the norm is max |l|, so the constant is 2 as soon as the spectrum can be
    two-sided (and 1 in the scalar-profile cases).
    """
    st = spec.structure
    if st.zero_cone:
        return np.inf
    if st.is_full_matrix:
        return 1.0 if level * spec.d == 1 else 2.0
    if st.partition is not None:
        k = len(st.partition)
        return 1.0 if level * k == 1 else 2.0
    if st.interval_generator is not None:
        return 1.0 if level == 1 else 2.0
    return None


def diagonal_restriction(spec, level):
    """Diagonal-coefficient subsystem of M_n(S) as its own diagonal spec."""
    if not spec.structure.is_diagonal:
        raise ValueError("diagonal restriction needs a diagonal spec")
    key = ("diag_restriction", level)
    if key in spec._caches:
        return spec._caches[key]
    basis = []
    for r in range(level):
        Err = np.zeros((level, level), dtype=complex)
        Err[r, r] = 1.0
        for B in spec.basis:
            basis.append(np.kron(Err, B))
    sub = core.build_system(basis, spec.tol, name=f"{spec.name}|diag{level}")
    spec._caches[key] = sub
    return sub


def exact_alpha_diagonal(spec, level):
    """(value, is_exact) from the level-1 LP oracle on the level restriction.

    Exact at level 1 for every diagonal system; at higher levels the value is
    exact when the structure reduces spectra to diagonal profiles
    (jordan-closed), otherwise a certified lower bound.
    """
    if not spec.structure.is_diagonal:
        raise ValueError("exact_diagonal mode needs a diagonal spec")
    target = spec if level == 1 else diagonal_restriction(spec, level)
    val = _polytope.exact_alpha_level1(target)
    return val, (level == 1 or spec.structure.jordan_closed)


def alpha_estimate(spec, level, samples, mode, cfg: EngineConfig = None,
                   rng=None):
    """One row of the generation table: a lower bound or an exact value."""
    cfg = cfg or EngineConfig.default(spec.tol)
    rng = rng or np.random.default_rng(spec.tol.seed + 23 * level)
    if mode == "exact_diagonal":
        val, exact = exact_alpha_diagonal(spec, level)
        return GenerationRow(level, val, None, 0, exact)
    if mode != "sampled":
        raise ValueError(f"unknown alpha mode {mode!r}")

    best = 0.0
    witness = None
    count = 0
    for x in _alpha_battery(spec, level, samples, rng):
        nrm = op_norm(spec, x)
        if nrm <= 1e-12:
            continue
        xn = element(spec, x.coeffs / nrm)
        count += 1
        try:
            dec = decompose(spec, xn, cfg)
        except Infeasible:
            certain = alpha_structural(spec, level) == np.inf
            return GenerationRow(level, np.inf, sa_coords(spec, xn), count,
                                 certain)
        if dec.value > best:
            best = dec.value
            witness = sa_coords(spec, xn)
    exact = alpha_structural(spec, level)
    is_exact = exact is not None and abs(best - exact) <= 1e-9
    return GenerationRow(level, best, witness, count, is_exact)


def _alpha_battery(spec, level, samples, rng):
    m = spec.dim
    herm_mix = spec.herm_in_basis()
    eye = np.eye(level)

    def from_sa_vector(vals):
        coeffs = np.zeros((m, level, level), dtype=complex)
        for j in range(m):
            coeffs[j] += vals[j] * eye
        return element(spec, np.einsum("jk,jab->kab", herm_mix, coeffs))

    for j in range(m):
        e = np.zeros(m)
        e[j] = 1.0
        yield from_sa_vector(e)
    for i in range(m):
        for j in range(i + 1, m):
            e = np.zeros(m)
            e[i], e[j] = 1.0, -1.0
            yield from_sa_vector(e)
    if level >= 2:
        # two-sided spectral profiles inside a single generator direction
        sig = np.diag([1.0, -1.0] + [0.0] * (level - 2)).astype(complex)
        for j in range(m):
            coeffs = np.zeros((m, level, level), dtype=complex)
            for k in range(m):
                coeffs[k] = herm_mix[j, k] * sig
            yield element(spec, coeffs)
    for _ in range(samples):
        yield core.random_selfadjoint(spec, level, rng)


# ---------------------------------------------------------------------------
# order units (finite-dimensional positively generated systems)

def positive_basis(spec, cfg: EngineConfig = None, rng=None):
    """A basis of S^sa consisting of positive elements, greedily extracted."""
    cfg = cfg or EngineConfig.default(spec.tol)
    rng = rng or np.random.default_rng(spec.tol.seed + 5)
    report = positive_generation_check(spec, 1, cfg, rng)
    if not report.passed:
        raise NotPositivelyGenerated(
            f"{spec.name} is not positively generated at level 1"
        )
    if spec.structure.jordan_closed:
        elems = _structured_positive_basis(spec)
    else:
        elems = report.witnesses
        if len(elems) < spec.dim:
            more, _ = cone_witnesses(spec, 1, cfg, rng,
                                     max_samples=6 * spec.dim + 20)
            coords = []
            elems = []
            for cand in more:
                c = sa_coords(spec, cand)
                r = np.linalg.matrix_rank(
                    np.array(coords + [c]).T, tol=spec.tol.dedup_tol)
                if r > len(coords):
                    coords.append(c)
                    elems.append(cand)
    if len(elems) != spec.dim:
        raise NotPositivelyGenerated(
            f"could not extract a positive basis ({len(elems)}/{spec.dim})"
        )
    return [_polish_positive(spec, p) for p in elems]


def _structured_positive_basis(spec):
    st = spec.structure
    d = spec.d
    out = []
    if st.is_full_matrix:
        for i in range(d):
            E = np.zeros((d, d), dtype=complex)
            E[i, i] = 1.0
            out.append(E)
        for i in range(d):
            for j in range(i + 1, d):
                E = np.zeros((d, d), dtype=complex)
                E[i, i] = E[j, j] = 1.0
                E[i, j] = E[j, i] = 1.0
                out.append(E.copy())
                E[i, j] = -1j
                E[j, i] = 1j
                out.append(E.copy())
    elif st.partition is not None:
        for cls in st.partition:
            E = np.zeros((d, d), dtype=complex)
            for i in cls:
                E[i, i] = 1.0
            out.append(E)
    else:
        out.append(st.interval_generator)
    return [project_to_system(spec, M, 1)[0] for M in out]


def _polish_positive(spec, p):
    """Nudge a witness onto the cone: clip then reproject, a few rounds."""
    cur = p
    for _ in range(6):
        M = realize(spec, cur)
        w, Q = np.linalg.eigh(0.5 * (M + M.conj().T))
        if w[0] >= -1e-13 * max(1.0, abs(w[-1])):
            break
        M = (Q * np.clip(w, 0.0, None)) @ Q.conj().T
        cur, _ = project_to_system(spec, M, 1)
    return cur


def order_unit(spec, cfg: EngineConfig = None, rng=None):
    """Sum of a positive basis; an order unit when level-1 generation holds."""
    basis = positive_basis(spec, cfg, rng)
    coeffs = np.sum([p.coeffs for p in basis], axis=0)
    e = element(spec, coeffs)
    ok, mineig = core.is_positive(spec, e)
    if not ok:
        raise AssertionError("order-unit candidate is not positive")
    return e, basis


@dataclass
class LambdaReport:
    lam: float
    min_eig_plus: float
    min_eig_minus: float

    @property
    def dominated(self):
        return self.min_eig_plus >= -1e-9 and self.min_eig_minus >= -1e-9


def dominate_lambda(spec, X, basis, e, cfg: EngineConfig = None):
    """Domination coefficient from diagonal/real/imaginary coefficient maxima.

    Decomposes every entry of X over the positive basis, takes
    lam = lam_diag + lam_real + lam_imag built from per-entry coefficient
    maxima (each at least 1), and verifies lam * (1_n (x) e) +- X >= 0.
    """
    if not is_selfadjoint(spec, X):
        raise NotSelfadjoint("dominate_lambda needs a selfadjoint element")
    n = X.level
    P = np.array([sa_coords(spec, p) for p in basis]).T  # (m, m) columns
    if np.linalg.matrix_rank(P, tol=spec.tol.dedup_tol) < spec.dim:
        raise NotPositivelyGenerated("positive family is not a basis")

    def coeffs_of(vals_sa):
        sol, *_ = np.linalg.lstsq(P, vals_sa, rcond=None)
        return sol

    def lam_of(vals_sa):
        return max(1.0, float(np.max(np.abs(coeffs_of(vals_sa)))))

    U = spec.sa_basis_matrix(1)

    def entry(r, s):
        c = X.coeffs[:, r, s]  # element of S with basis coefficients c
        M = np.tensordot(c, spec.basis, axes=(0, 0))
        return M

    lam_d = 0.0
    for r in range(n):
        M = entry(r, r)
        lam_d = max(lam_d, lam_of(U.T @ K.herm_to_vec(M)))
    lam_re = 0.0
    lam_im = 0.0
    for r in range(n):
        for s in range(r + 1, n):
            M = entry(r, s)
            re = 0.5 * (M + M.conj().T)
            im = -0.5j * (M - M.conj().T)
            lam_re += lam_of(U.T @ K.herm_to_vec(re))
            lam_im += lam_of(U.T @ K.herm_to_vec(im))
    lam = lam_d + lam_re + lam_im

    amp_e = core.amplify(spec, e, n)
    plus = element(spec, lam * amp_e.coeffs + X.coeffs)
    minus = element(spec, lam * amp_e.coeffs - X.coeffs)
    _, ep = core.is_positive(spec, plus)
    _, em = core.is_positive(spec, minus)
    return LambdaReport(lam, ep, em)
