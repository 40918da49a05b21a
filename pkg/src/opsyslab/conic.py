"""Convex-body expressions and the reference feasibility/gauge engine.

Bodies live in real coordinate spaces of selfadjoint matrices (see _kernels
for the coordinate convention).  Every body compiles to a "program": a list
of exactly-projectable atoms over a lifted space together with an affine
output map.  Membership, feasibility, gauges and linear maximization are all
driven off that compiled form:

  * membership in a direct body (output map = identity) is a pointwise check
    against each atom -- exact, no iteration;
  * existential questions (lifted bodies, Minkowski sums, hulls) run Dykstra
    cyclic projections, with infeasibility reported through a stabilised-gap
    heuristic;
  * gauges use bisection over membership; bodies that are scalar matrix
    intervals (and hulls of such) short-circuit to closed forms.

The engine is self-contained; an external conic solver can be plugged in
through the SolverAdapter contract (see adapters.py).
"""

import numpy as np

from . import _kernels as K
from .core import ToleranceConfig


class ConicError(Exception):
    pass


class UnsupportedNode(ConicError):
    pass


class MaxIterations(ConicError):
    pass


class OriginNotInBody(ConicError):
    pass


class UnboundedBody(ConicError):
    pass


class DimensionMismatch(ConicError):
    pass


class SolveStatus:
    """Outcome of one engine call.

    status is 'feasible', 'infeasible' or 'max_iter'; residual is the true
    constraint violation of `point` (feasible) or the stabilised gap estimate
    (infeasible).
    """

    def __init__(self, status, residual, iterations, point=None):
        self.status = status
        self.residual = float(residual)
        self.iterations = int(iterations)
        self.point = point

    @property
    def feasible(self):
        return self.status == "feasible"

    def __repr__(self):
        return (
            f"SolveStatus({self.status!r}, residual={self.residual:.3e}, "
            f"iterations={self.iterations})"
        )


class EngineConfig:
    """Iteration budgets and detection windows for the reference engine."""

    def __init__(self, tol: ToleranceConfig, max_sweeps=20000, check_every=8,
                 plateau_sweeps=240, plateau_rtol=1e-3, gauge_cap=1e6,
                 pgd_iters=300, pgd_starts=4, ternary_iters=70):
        self.tol = tol
        self.max_sweeps = int(max_sweeps)
        self.check_every = int(check_every)
        self.plateau_sweeps = int(plateau_sweeps)
        self.plateau_rtol = float(plateau_rtol)
        self.gauge_cap = float(gauge_cap)
        self.pgd_iters = int(pgd_iters)
        self.pgd_starts = int(pgd_starts)
        self.ternary_iters = int(ternary_iters)

    @classmethod
    def default(cls, tol=None):
        return cls(tol or ToleranceConfig())


# ---------------------------------------------------------------------------
# atoms

def _sc(t, b):
    """t * b with the convention 0 * inf = 0 (scaling a set by zero)."""
    return 0.0 if t == 0.0 else t * b


class Atom:
    kind = None

    def __init__(self, offset, size):
        self.offset = int(offset)
        self.size = int(size)

    def scaled(self, t):
        raise NotImplementedError

    def at_offset(self, offset):
        import copy

        a = copy.copy(self)
        a.offset = offset
        return a

    def pack(self):
        """(kind, (offset, size, blk), (f0, f1, f2), pool_payload)"""
        raise NotImplementedError


class AffineAtom(Atom):
    """Affine subspace via its projection x -> P x + q on a coordinate block."""

    kind = K.AFFINE

    def __init__(self, offset, P, q):
        super().__init__(offset, P.shape[0])
        self.P = np.ascontiguousarray(P, dtype=np.float64)
        self.q = np.ascontiguousarray(q, dtype=np.float64)

    @classmethod
    def from_constraints(cls, A, b, offset=0):
        """Subspace {x : A x = b}; uses the pseudoinverse, so rank-safe."""
        A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        pinv = np.linalg.pinv(A)
        P = np.eye(A.shape[1]) - pinv @ A
        q = pinv @ np.asarray(b, dtype=np.float64)
        return cls(offset, P, q)

    @classmethod
    def from_orthonormal_columns(cls, U, offset=0):
        U = np.asarray(U, dtype=np.float64)
        return cls(offset, U @ U.T, np.zeros(U.shape[0]))

    def scaled(self, t):
        return AffineAtom(self.offset, self.P, t * self.q)

    def pack(self):
        return (self.kind, (self.offset, self.size, 0), (0.0, 0.0, 0.0),
                np.concatenate([self.P.reshape(-1), self.q]))


class SpectralAtom(Atom):
    """{X : eigenvalues of (X - center) in [lo, hi]} on a Hermitian block."""

    kind = K.SPECTRAL

    def __init__(self, offset, block, lo, hi, center=None):
        super().__init__(offset, block * block)
        self.block = int(block)
        self.lo = float(lo)
        self.hi = float(hi)
        self.center = (
            np.zeros(self.size) if center is None
            else np.ascontiguousarray(center, dtype=np.float64)
        )

    def scaled(self, t):
        return SpectralAtom(self.offset, self.block, _sc(t, self.lo),
                            _sc(t, self.hi), t * self.center)

    def pack(self):
        return (self.kind, (self.offset, self.size, self.block),
                (self.lo, self.hi, 0.0), self.center)


class LinImgSpectralAtom(Atom):
    """{x : eigenvalues of (T x - z) in [lo, hi]} where T T^T = c I."""

    kind = K.LINIMG

    def __init__(self, offset, T, c, block, lo, hi, z=None):
        T = np.ascontiguousarray(T, dtype=np.float64)
        super().__init__(offset, T.shape[1])
        self.T = T
        self.c = float(c)
        self.block = int(block)
        self.lo = float(lo)
        self.hi = float(hi)
        self.z = (
            np.zeros(T.shape[0]) if z is None
            else np.ascontiguousarray(z, dtype=np.float64)
        )

    def scaled(self, t):
        return LinImgSpectralAtom(self.offset, self.T, self.c, self.block,
                                  _sc(t, self.lo), _sc(t, self.hi), t * self.z)

    def pack(self):
        return (self.kind, (self.offset, self.size, self.block),
                (self.lo, self.hi, self.c),
                np.concatenate([self.T.reshape(-1), self.z]))


class HalfspaceAtom(Atom):
    kind = K.HALFSPACE

    def __init__(self, offset, a, beta):
        a = np.ascontiguousarray(a, dtype=np.float64)
        super().__init__(offset, a.size)
        self.a = a
        self.beta = float(beta)

    def scaled(self, t):
        return HalfspaceAtom(self.offset, self.a, t * self.beta)

    def pack(self):
        return (self.kind, (self.offset, self.size, 0),
                (self.beta, 0.0, 0.0), self.a)


class BallAtom(Atom):
    kind = K.BALL

    def __init__(self, offset, center, radius):
        center = np.ascontiguousarray(center, dtype=np.float64)
        super().__init__(offset, center.size)
        self.center = center
        self.radius = float(radius)

    def scaled(self, t):
        return BallAtom(self.offset, t * self.center, t * self.radius)

    def pack(self):
        return (self.kind, (self.offset, self.size, 0),
                (self.radius, 0.0, 0.0), self.center)


class PackedSystem:
    """Atoms flattened into the array format the kernels consume."""

    def __init__(self, atoms, dim):
        self.atoms = list(atoms)
        self.dim = int(dim)
        kinds, ips, fps, pools, pofs = [], [], [], [], [0]
        for a in self.atoms:
            kind, ip, fp, payload = a.pack()
            kinds.append(kind)
            ips.append(ip)
            fps.append(fp)
            pools.append(np.asarray(payload, dtype=np.float64))
            pofs.append(pofs[-1] + payload.size)
        self.kinds = np.asarray(kinds, dtype=np.int64)
        self.ip = np.asarray(ips, dtype=np.int64).reshape(len(atoms), 3)
        self.fp = np.asarray(fps, dtype=np.float64).reshape(len(atoms), 3)
        self.pool = (
            np.concatenate(pools) if pools else np.zeros(0)
        )
        self.pof = np.asarray(pofs, dtype=np.int64)

    def residual(self, v):
        return float(K.residual_max(v, self.kinds, self.ip, self.fp,
                                    self.pool, self.pof))

    def dykstra(self, v0, cfg: EngineConfig, tol=None, dv_tol=np.inf,
                max_sweeps=None):
        v, res, sweeps, code = K.dykstra(
            np.ascontiguousarray(v0, dtype=np.float64),
            self.kinds, self.ip, self.fp, self.pool, self.pof,
            max_sweeps or cfg.max_sweeps,
            tol if tol is not None else cfg.tol.feas_tol,
            dv_tol, cfg.check_every, cfg.plateau_sweeps, cfg.plateau_rtol,
        )
        status = {K.OK: "feasible", K.PLATEAU: "infeasible",
                  K.MAXIT: "max_iter"}[int(code)]
        return v, float(res), int(sweeps), status

    def clone(self):
        """Copy with private mutable arrays (atoms stay shared, read-only)."""
        import copy

        new = copy.copy(self)
        new.fp = self.fp.copy()
        new.pool = self.pool.copy()
        return new

    def update_affine_q(self, atom_index, q):
        a = self.atoms[atom_index]
        base = self.pof[atom_index] + a.size * a.size
        self.pool[base:base + a.size] = q

    def update_spectral_bounds(self, atom_index, lo, hi):
        self.fp[atom_index, 0] = lo
        self.fp[atom_index, 1] = hi

    def set_scale(self, atom_index, t):
        """Rescale atom i to t * (its original set); t >= 0.

        The packed arrays are rewritten from the atom's stored (unit)
        parameters, so repeated rescaling does not drift.
        """
        if t < 0:
            raise ValueError("set_scale needs t >= 0")
        a = self.atoms[atom_index]
        base = self.pof[atom_index]
        if isinstance(a, SpectralAtom):
            self.fp[atom_index, 0] = _sc(t, a.lo)
            self.fp[atom_index, 1] = _sc(t, a.hi)
            self.pool[base:base + a.size] = t * a.center
        elif isinstance(a, AffineAtom):
            qbase = base + a.size * a.size
            self.pool[qbase:qbase + a.size] = t * a.q
        elif isinstance(a, LinImgSpectralAtom):
            self.fp[atom_index, 0] = _sc(t, a.lo)
            self.fp[atom_index, 1] = _sc(t, a.hi)
            r = a.block * a.block
            zbase = base + r * a.size
            self.pool[zbase:zbase + r] = t * a.z
        elif isinstance(a, HalfspaceAtom):
            self.fp[atom_index, 0] = _sc(t, a.beta)
        elif isinstance(a, BallAtom):
            self.fp[atom_index, 0] = _sc(t, a.radius)
            self.pool[base:base + a.size] = t * a.center
        else:
            raise UnsupportedNode(f"cannot rescale {type(a).__name__}")


class Program:
    """Compiled body: {out_T @ xi + out_b : xi satisfies every atom}."""

    def __init__(self, lift_dim, atoms, dim=None, out_T=None, out_b=None):
        self.lift_dim = int(lift_dim)
        self.atoms = list(atoms)
        self.out_T = out_T  # None means identity (direct body)
        self.dim = int(dim) if dim is not None else self.lift_dim
        self.out_b = (
            np.zeros(self.dim) if out_b is None
            else np.asarray(out_b, dtype=np.float64)
        )
        self._packed = None
        self._member_packed = None

    @property
    def direct(self):
        return self.out_T is None

    def packed(self):
        if self._packed is None:
            self._packed = PackedSystem(self.atoms, self.lift_dim)
        return self._packed

    def member_packed(self):
        """Packed atoms plus a mutable link atom {out_T xi = target}."""
        if self._member_packed is None:
            T = self.out_T
            link = AffineAtom.from_constraints(T, np.zeros(T.shape[0]))
            pinv = np.linalg.pinv(T)
            sys = PackedSystem(self.atoms + [link], self.lift_dim)
            self._member_packed = (sys, len(self.atoms), pinv)
        return self._member_packed


# ---------------------------------------------------------------------------
# body expression nodes

class Body:
    """Abstract convex body in R^dim. Subclasses implement compile()."""

    dim = None
    zero_in = None  # True/False/None(unknown)

    def compile(self) -> Program:
        raise NotImplementedError

    def scalar_interval(self):
        """(lo, hi, block) when the body is {lo <= eigs <= hi}, else None."""
        return None

    def hull_intervals(self):
        """((lo1,hi1),(lo2,hi2),block) when the body is a hull of intervals."""
        return None


class SpectralIntervalBody(Body):
    def __init__(self, block, lo, hi):
        self.block = int(block)
        self.dim = self.block * self.block
        self.lo = float(lo)
        self.hi = float(hi)
        if self.lo > self.hi:
            raise ValueError("empty spectral interval")
        self.zero_in = self.lo <= 0.0 <= self.hi

    def compile(self):
        return Program(self.dim, [SpectralAtom(0, self.block, self.lo, self.hi)])

    def scalar_interval(self):
        return (self.lo, self.hi, self.block)


def psd_cone(block):
    return SpectralIntervalBody(block, 0.0, np.inf)


def norm_ball(radius, block):
    return SpectralIntervalBody(block, -float(radius), float(radius))


class SubspaceBody(Body):
    """Linear subspace given by orthonormal columns in coordinate space."""

    def __init__(self, U):
        self.U = np.asarray(U, dtype=np.float64)
        self.dim = self.U.shape[0]
        self.zero_in = True

    def compile(self):
        return Program(self.dim, [AffineAtom.from_orthonormal_columns(self.U)])


def system_sa(spec, level):
    """M_n(S)^sa as a body inside the selfadjoint coordinates of M_{nd}."""
    return SubspaceBody(spec.sa_basis_matrix(level))


class AffineSliceBody(Body):
    """{x : A x = b}."""

    def __init__(self, A, b, dim):
        self.A = np.atleast_2d(np.asarray(A, dtype=np.float64))
        self.b = np.atleast_1d(np.asarray(b, dtype=np.float64))
        self.dim = int(dim)
        self.zero_in = bool(np.linalg.norm(self.b) == 0.0)

    def compile(self):
        return Program(self.dim, [AffineAtom.from_constraints(self.A, self.b)])


class IntersectionBody(Body):
    def __init__(self, children):
        children = list(children)
        dims = {c.dim for c in children}
        if len(dims) != 1:
            raise DimensionMismatch("intersection children must share a space")
        self.children = children
        self.dim = children[0].dim
        flags = [c.zero_in for c in children]
        self.zero_in = all(flags) if None not in flags else None

    def compile(self):
        atoms = []
        for c in self.children:
            prog = c.compile()
            if not prog.direct:
                raise UnsupportedNode(
                    "intersection children must be directly projectable"
                )
            atoms.extend(prog.atoms)
        return Program(self.dim, atoms)

    def scalar_interval(self):
        lo, hi, block = -np.inf, np.inf, None
        for c in self.children:
            si = c.scalar_interval()
            if si is None:
                if isinstance(c, SubspaceBody) and _is_full_subspace(c):
                    continue
                return None
            lo = max(lo, si[0])
            hi = min(hi, si[1])
            block = si[2]
        if block is None or lo > hi:
            return None
        return (lo, hi, block)


def _is_full_subspace(body):
    return body.U.shape[1] == body.U.shape[0]


def intersection(children):
    return IntersectionBody(children)


def cone_cap_ball(spec, level, radius):
    """{x in M_n(S)^sa : x >= 0, ||x|| <= radius} in Herm(nd) coordinates."""
    block = level * spec.d
    kids = [psd_cone(block), norm_ball(radius, block)]
    if spec.dim < spec.d * spec.d:
        kids.insert(0, system_sa(spec, level))
    return IntersectionBody(kids)


class ScaledBody(Body):
    def __init__(self, t, child):
        self.t = float(t)
        self.child = child
        self.dim = child.dim
        if self.t == 0.0:
            self.zero_in = True
        else:
            self.zero_in = child.zero_in

    def compile(self):
        if self.t == 0.0:
            return Program(self.dim, [AffineAtom(
                0, np.zeros((self.dim, self.dim)), np.zeros(self.dim))])
        prog = self.child.compile()
        if prog.direct:
            if self.t > 0:
                return Program(prog.lift_dim,
                               [a.scaled(self.t) for a in prog.atoms],
                               dim=self.dim)
            return Program(prog.lift_dim, prog.atoms, dim=self.dim,
                           out_T=self.t * np.eye(self.dim))
        return Program(prog.lift_dim, prog.atoms, dim=self.dim,
                       out_T=self.t * prog.out_T, out_b=self.t * prog.out_b)

    def scalar_interval(self):
        si = self.child.scalar_interval()
        if si is None:
            return None
        lo, hi, block = si
        a, b = sorted((self.t * lo, self.t * hi))
        return (a, b, block)


def scale(t, body):
    return ScaledBody(t, body)


class TranslatedBody(Body):
    def __init__(self, shift, child):
        self.shift = np.asarray(shift, dtype=np.float64)
        self.child = child
        self.dim = child.dim
        if self.shift.size != self.dim:
            raise DimensionMismatch("shift size does not match body dimension")
        self.zero_in = None

    def compile(self):
        prog = self.child.compile()
        if prog.direct:
            # shift each atom's reference frame: proj_{w+C}(x) = w + P_C(x-w)
            atoms = [_shift_atom(a, self.shift) for a in prog.atoms]
            return Program(prog.lift_dim, atoms, dim=self.dim)
        return Program(prog.lift_dim, prog.atoms, dim=self.dim,
                       out_T=prog.out_T, out_b=prog.out_b + self.shift)

    def scalar_interval(self):
        # only a scalar multiple of the identity keeps the spectral form
        si = self.child.scalar_interval()
        if si is None:
            return None
        lo, hi, block = si
        ident = K.herm_to_vec(np.eye(block))
        c = float(self.shift @ ident) / block
        if np.linalg.norm(self.shift - c * ident) > 1e-12 * max(
            1.0, np.linalg.norm(self.shift)
        ):
            return None
        return (lo + c, hi + c, block)


def _shift_atom(a, w):
    blk = w[a.offset:a.offset + a.size]
    if isinstance(a, AffineAtom):
        q = a.q + blk - a.P @ blk
        return AffineAtom(a.offset, a.P, q)
    if isinstance(a, SpectralAtom):
        return SpectralAtom(a.offset, a.block, a.lo, a.hi, a.center + blk)
    if isinstance(a, LinImgSpectralAtom):
        return LinImgSpectralAtom(a.offset, a.T, a.c, a.block, a.lo, a.hi,
                                  a.z + a.T @ blk)
    if isinstance(a, HalfspaceAtom):
        return HalfspaceAtom(a.offset, a.a, a.beta + float(a.a @ blk))
    if isinstance(a, BallAtom):
        return BallAtom(a.offset, a.center + blk, a.radius)
    raise UnsupportedNode(f"cannot translate atom {type(a).__name__}")


def translate(shift, body):
    return TranslatedBody(shift, body)


class MinkowskiSumBody(Body):
    def __init__(self, children):
        children = list(children)
        dims = {c.dim for c in children}
        if len(dims) != 1:
            raise DimensionMismatch("summands must share a space")
        self.children = children
        self.dim = children[0].dim
        flags = [c.zero_in for c in children]
        self.zero_in = all(flags) if None not in flags else None

    def compile(self):
        progs = [c.compile() for c in self.children]
        lift = sum(p.lift_dim for p in progs)
        atoms = []
        out_T = np.zeros((self.dim, lift))
        out_b = np.zeros(self.dim)
        off = 0
        for p in progs:
            for a in p.atoms:
                atoms.append(a.at_offset(a.offset + off))
            T = p.out_T if p.out_T is not None else np.eye(p.dim)
            out_T[:, off:off + p.lift_dim] += T
            out_b += p.out_b
            off += p.lift_dim
        return Program(lift, atoms, dim=self.dim, out_T=out_T, out_b=out_b)

    def scalar_interval(self):
        # valid for scalar bounds: [a1,b1] + [a2,b2] = [a1+a2, b1+b2]
        lo, hi, block = 0.0, 0.0, None
        for c in self.children:
            si = c.scalar_interval()
            if si is None:
                return None
            lo += si[0]
            hi += si[1]
            block = si[2]
        return (lo, hi, block)


def minkowski_sum(children):
    return MinkowskiSumBody(children)


def minkowski_difference(a, b):
    """Levelwise difference {x - y : x in a, y in b}."""
    return MinkowskiSumBody([a, scale(-1.0, b)])


class ConvHullUnionBody(Body):
    """conv(A u B), handled through the split form s*A + r*B, s + r = 1."""

    def __init__(self, a, b):
        if a.dim != b.dim:
            raise DimensionMismatch("hull children must share a space")
        self.a = a
        self.b = b
        self.dim = a.dim
        self.zero_in = (a.zero_in or b.zero_in) if None not in (
            a.zero_in, b.zero_in) else None

    def compile(self):
        raise UnsupportedNode(
            "hull bodies answer membership/gauge through the split search"
        )

    def hull_intervals(self):
        sa = self.a.scalar_interval()
        sb = self.b.scalar_interval()
        if sa is None or sb is None or sa[2] != sb[2]:
            return None
        if not all(np.isfinite(v) for v in (*sa[:2], *sb[:2])):
            return None
        return (sa[:2], sb[:2], sa[2])


def conv_hull_union(a, b):
    return ConvHullUnionBody(a, b)


class LiftedBody(Body):
    """Explicit lifted description: {out_T xi + out_b : xi meets the atoms}."""

    def __init__(self, lift_dim, atoms, out_T, out_b=None, zero_in=None,
                 exact_gauge=None, exact_support=None):
        self.lift_dim = int(lift_dim)
        self.atoms = list(atoms)
        self.out_T = np.asarray(out_T, dtype=np.float64)
        self.dim = self.out_T.shape[0]
        self.out_b = (
            np.zeros(self.dim) if out_b is None
            else np.asarray(out_b, dtype=np.float64)
        )
        self.zero_in = zero_in
        self.exact_gauge = exact_gauge  # optional callable(x_coords) -> float
        self.exact_support = exact_support  # optional callable(c) -> (val, pt)
        self._prog = None

    def compile(self):
        if self._prog is None:
            self._prog = Program(self.lift_dim, self.atoms, dim=self.dim,
                                 out_T=self.out_T, out_b=self.out_b)
        return self._prog



# ---------------------------------------------------------------------------
# engine operations


def _inner_config(cfg: EngineConfig):
    """Cheaper budgets for the inner solves of nested split searches."""
    inner = EngineConfig(
        cfg.tol,
        max_sweeps=max(2000, cfg.max_sweeps // 8),
        check_every=4,
        plateau_sweeps=64,
        plateau_rtol=cfg.plateau_rtol,
        gauge_cap=cfg.gauge_cap,
        pgd_iters=cfg.pgd_iters,
        pgd_starts=cfg.pgd_starts,
        ternary_iters=cfg.ternary_iters,
    )
    return inner


def _clip_distance(x, block, lo, hi):
    v = np.array(x, dtype=np.float64)
    return float(K.clip_block(v, 0, block, lo, hi))


def _eig_range_snapped(x, block, feas_tol):
    v = np.array(x, dtype=np.float64)
    lmin, lmax = K.eig_range_vec(v, 0, block)
    snap = feas_tol * max(1.0, abs(lmin), abs(lmax))
    if abs(lmin) <= snap:
        lmin = 0.0
    if abs(lmax) <= snap:
        lmax = 0.0
    return lmin, lmax


def _interval_gauge(x, block, lo, hi, feas_tol):
    lmin, lmax = _eig_range_snapped(x, block, feas_tol)
    need = 0.0
    if lmax > 0:
        if hi <= 0:
            return np.inf
        need = 0.0 if np.isinf(hi) else lmax / hi
    if lmin < 0:
        if lo >= 0:
            return np.inf
        need = max(need, 0.0 if np.isinf(lo) else lmin / lo)
    return need


def _hull_interval_gauge(x, ia, ib, block, feas_tol):
    """min{s + r >= 0 : eigs(x) within [s*a1 + r*a2, s*b1 + r*b2]} via LP.

    Exact for scalar interval bounds: the commuting construction inside the
    eigenbasis of x attains it, and Weyl's inequalities rule out anything
    better from noncommuting choices.
    """
    from scipy.optimize import linprog

    lmin, lmax = _eig_range_snapped(x, block, feas_tol)
    (a1, b1), (a2, b2) = ia, ib
    A_ub = [[-b1, -b2], [a1, a2]]
    b_ub = [-lmax, lmin]
    res = linprog(c=[1.0, 1.0], A_ub=A_ub, b_ub=b_ub, bounds=[(0, None)] * 2,
                  method="highs")
    if res.status != 0:
        return np.inf
    return float(res.fun)


class MembershipSolver:
    """Repeated membership queries against one body, with private buffers."""

    def __init__(self, body, cfg: EngineConfig):
        self.body = body
        self.cfg = cfg
        self.kind = "generic"
        self.warm = None
        si = body.scalar_interval()
        if si is not None:
            self.kind = "interval"
            self.si = si
            return
        if isinstance(body, ConvHullUnionBody):
            hp = body.hull_intervals()
            if hp is not None:
                self.kind = "hull_lp"
                self.hp = hp
            else:
                self.kind = "hull_split"
                self.split = SplitFeasibility(body.a, body.b, cfg)
            return
        prog = body.compile()
        self.prog = prog
        if prog.direct:
            self.kind = "direct"
            self.sys = prog.packed()
        else:
            sys, link_idx, pinv = prog.member_packed()
            self.sys = sys.clone()
            self.link_idx = link_idx
            self.pinv = pinv

    def query(self, x):
        """(is_member, residual-style distance)."""
        cfg = self.cfg
        tol = cfg.tol.feas_tol
        if self.kind == "interval":
            d = _clip_distance(x, self.si[2], self.si[0], self.si[1])
            return d <= tol, d
        if self.kind == "hull_lp":
            g = _hull_interval_gauge(x, self.hp[0], self.hp[1], self.hp[2], tol)
            return g <= 1.0 + tol, max(0.0, g - 1.0)
        if self.kind == "hull_split":
            d = self.split.hull_distance(x)
            return d <= tol, d
        if self.kind == "direct":
            d = self.sys.residual(x - self.prog.out_b)
            return d <= tol, d
        target = self.pinv @ (x - self.prog.out_b)
        self.sys.update_affine_q(self.link_idx, target)
        v0 = self.warm if self.warm is not None else target
        v, res, sweeps, status = self.sys.dykstra(v0, cfg)
        if status == "feasible":
            self.warm = v
        return status == "feasible", res


class SplitFeasibility:
    """Distances dist(x, s*A + r*B) for varying nonnegative weights.

    The product program is packed once; per query only the scale slots and
    the linking offset change, and Dykstra restarts from the previous
    solution, which keeps nested ternary/bisection searches cheap.
    """

    def __init__(self, body_a, body_b, cfg: EngineConfig):
        self.cfg = _inner_config(cfg)
        pa = body_a.compile()
        pb = body_b.compile()
        dim = pa.dim
        if pb.dim != dim:
            raise DimensionMismatch("split bodies must share a space")
        lift = pa.lift_dim + pb.lift_dim
        atoms = []
        self.idx_a = []
        self.idx_b = []
        for a in pa.atoms:
            self.idx_a.append(len(atoms))
            atoms.append(a)
        for a in pb.atoms:
            self.idx_b.append(len(atoms))
            atoms.append(a.at_offset(a.offset + pa.lift_dim))
        Ta = pa.out_T if pa.out_T is not None else np.eye(dim)
        Tb = pb.out_T if pb.out_T is not None else np.eye(dim)
        T = np.hstack([Ta, Tb])
        link = AffineAtom.from_constraints(T, np.zeros(dim))
        self.link_idx = len(atoms)
        atoms.append(link)
        self.sys = PackedSystem(atoms, lift)
        self.pinv = np.linalg.pinv(T)
        self.b_a = pa.out_b
        self.b_b = pb.out_b
        self.dim = dim
        self.lift = lift
        self.warm = None

    def dist(self, s, r, x):
        for i in self.idx_a:
            self.sys.set_scale(i, s)
        for i in self.idx_b:
            self.sys.set_scale(i, r)
        rhs = x - s * self.b_a - r * self.b_b
        target = self.pinv @ rhs
        self.sys.update_affine_q(self.link_idx, target)
        v0 = self.warm if self.warm is not None else target
        v, res, sweeps, status = self.sys.dykstra(v0, self.cfg)
        self.warm = v
        return res

    def min_dist_over_split(self, total, x, stop_below=None):
        """min over s in [0, total] of dist(s, total - s, x), by ternary search."""
        stop = self.cfg.tol.feas_tol * 0.5 if stop_below is None else stop_below
        lo, hi = 0.0, total
        best = min(self.dist(0.0, total, x), self.dist(total, 0.0, x))
        if best <= stop:
            return best
        for _ in range(self.cfg.ternary_iters):
            m1 = lo + (hi - lo) / 3.0
            m2 = hi - (hi - lo) / 3.0
            f1 = self.dist(m1, total - m1, x)
            f2 = self.dist(m2, total - m2, x)
            best = min(best, f1, f2)
            if best <= stop:
                return best
            if f1 <= f2:
                hi = m2
            else:
                lo = m1
            if hi - lo <= 1e-14 * max(1.0, total):
                break
        return best

    def hull_distance(self, x):
        """dist(x, conv(A u B)) = min over splits with total weight 1."""
        return self.min_dist_over_split(1.0, x)


def membership(body, x, cfg: EngineConfig):
    """(is_member, residual). Exact for direct bodies, Dykstra otherwise."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.size != body.dim:
        raise DimensionMismatch(f"point has size {x.size}, body dim {body.dim}")
    return MembershipSolver(body, cfg).query(x)


def project_body(body, x, cfg: EngineConfig):
    """Nearest point of a directly projectable body, with a SolveStatus."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    si = body.scalar_interval()
    if si is not None:
        v = x.copy()
        K.clip_block(v, 0, si[2], si[0], si[1])
        return v, SolveStatus("feasible", 0.0, 1, v)
    prog = body.compile()
    if not prog.direct:
        raise UnsupportedNode(f"{type(body).__name__} is not projection-capable")
    sys = prog.packed()
    v, res, sweeps, status = sys.dykstra(
        x, cfg, tol=cfg.tol.feas_tol, dv_tol=cfg.tol.feas_tol * 10
    )
    if status == "max_iter":
        return v, SolveStatus("max_iter", res, sweeps, v)
    return v, SolveStatus(
        "feasible" if res <= cfg.tol.feas_tol else "infeasible", res, sweeps, v
    )


def check_feasible(bodies, cfg: EngineConfig, start=None):
    """Witness a point in the intersection of bodies sharing one space."""
    bodies = list(bodies)
    if not bodies:
        raise ValueError("need at least one body")
    dims = {b.dim for b in bodies}
    if len(dims) != 1:
        raise DimensionMismatch("bodies do not share a space")
    dim = bodies[0].dim
    atoms = []
    lift = dim
    links = []
    for b in bodies:
        prog = b.compile()
        if prog.direct:
            atoms.extend(prog.atoms)
        else:
            off = lift
            lift += prog.lift_dim
            for a in prog.atoms:
                atoms.append(a.at_offset(a.offset + off))
            links.append((off, prog))
    rows = []
    rhs = []
    for off, prog in links:
        R = np.zeros((dim, lift))
        R[:, :dim] = np.eye(dim)
        R[:, off:off + prog.lift_dim] = -prog.out_T
        rows.append(R)
        rhs.append(prog.out_b)
    if rows:
        atoms.append(AffineAtom.from_constraints(
            np.vstack(rows), np.concatenate(rhs)))
    sys = PackedSystem(atoms, lift)
    v0 = np.zeros(lift)
    if start is not None:
        v0[:dim] = start
    v, res, sweeps, status = sys.dykstra(v0, cfg)
    point = v[:dim]
    return SolveStatus(status, res, sweeps, point)


def gauge(body, x, cfg: EngineConfig):
    """Minkowski gauge inf{t >= 0 : x in t * body}; inf means beyond the cap."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    if body.zero_in is False:
        raise OriginNotInBody("gauge requires 0 in the body")
    if body.zero_in is None:
        ok, _ = membership(body, np.zeros(body.dim), cfg)
        if not ok:
            raise OriginNotInBody("gauge requires 0 in the body")
        body.zero_in = True
    nrm = float(np.linalg.norm(x))
    if nrm == 0.0:
        return 0.0
    si = body.scalar_interval()
    if si is not None:
        g = _interval_gauge(x, si[2], si[0], si[1], cfg.tol.feas_tol)
        return g if g <= cfg.gauge_cap else np.inf
    if isinstance(body, ConvHullUnionBody):
        hp = body.hull_intervals()
        if hp is not None:
            g = _hull_interval_gauge(x, hp[0], hp[1], hp[2], cfg.tol.feas_tol)
            return g if g <= cfg.gauge_cap else np.inf
        return _split_gauge(body.a, body.b, x, cfg)
    if isinstance(body, LiftedBody) and body.exact_gauge is not None:
        g = body.exact_gauge(x)
        return g if g <= cfg.gauge_cap else np.inf

    solver = MembershipSolver(body, cfg)

    def member(t):
        ok, _ = solver.query(x / t)
        return ok

    t_hi = max(nrm, cfg.tol.bisect_tol)
    while not member(t_hi):
        t_hi *= 4.0
        if t_hi > cfg.gauge_cap:
            return np.inf
    t_lo = 0.0
    while t_hi - t_lo > cfg.tol.bisect_tol * max(1.0, t_hi):
        mid = 0.5 * (t_lo + t_hi)
        if mid <= 0.0:
            break
        if member(mid):
            t_hi = mid
        else:
            t_lo = mid
    return t_hi


def hull_gauge(a, b, x, cfg: EngineConfig):
    """Gauge of conv(a u b) at x, i.e. min{s + r : x in s*a + r*b}."""
    body = ConvHullUnionBody(a, b)
    hp = body.hull_intervals()
    x = np.ascontiguousarray(x, dtype=np.float64)
    if hp is not None:
        g = _hull_interval_gauge(x, hp[0], hp[1], hp[2], cfg.tol.feas_tol)
        return g if g <= cfg.gauge_cap else np.inf
    return _split_gauge(a, b, x, cfg)


def _split_gauge(a, b, x, cfg):
    """Bisection on the total weight with a ternary split search inside.

    The split-feasibility region {(s, r) : x in s*a + r*b} is convex, so the
    inner distance is unimodal over the split; the accepted tolerance is the
    feasibility tolerance, which bounds how far outside the hull the answer
    can certify a point.
    """
    nrm = float(np.linalg.norm(x))
    if nrm == 0.0:
        return 0.0
    split = SplitFeasibility(a, b, cfg)
    accept = max(cfg.tol.feas_tol, 1e-9)

    def feasible(c):
        return split.min_dist_over_split(c, x, stop_below=accept) <= accept

    c_hi = max(nrm, cfg.tol.bisect_tol)
    while not feasible(c_hi):
        c_hi *= 4.0
        if c_hi > cfg.gauge_cap:
            return np.inf
    c_lo = 0.0
    rel = max(cfg.tol.bisect_tol, 1e-8)
    while c_hi - c_lo > rel * max(1.0, c_hi):
        mid = 0.5 * (c_lo + c_hi)
        if feasible(mid):
            c_hi = mid
        else:
            c_lo = mid
    return c_hi


def support_max(body, objective, cfg: EngineConfig, rng=None, starts=None):
    """max <objective, x> over the body; the value comes from a feasible point.

    Closed form for interval bodies; otherwise projected gradient ascent with
    multi-start over the compiled program.  Returns (value, maximizer,
    SolveStatus); the value is a certified lower bound for the supremum.
    """
    c = np.ascontiguousarray(objective, dtype=np.float64)
    if c.size != body.dim:
        raise DimensionMismatch("objective size does not match the body")
    si = body.scalar_interval()
    if si is not None:
        lo, hi, block = si
        W = K.vec_to_herm(c, block)
        w, Q = np.linalg.eigh(W)
        if (np.isinf(hi) and w[-1] > 1e-13) or (np.isinf(lo) and w[0] < -1e-13):
            raise UnboundedBody("interval body unbounded along the objective")
        diag = np.where(w > 0, hi, np.where(w < 0, lo, 0.0))
        diag = np.where(np.isfinite(diag), diag, 0.0)
        X = (Q * diag) @ Q.conj().T
        val = float(w @ diag)
        pt = K.herm_to_vec(X)
        return val, pt, SolveStatus("feasible", 0.0, 1, pt)
    if isinstance(body, LiftedBody) and body.exact_support is not None:
        val, pt = body.exact_support(c)
        return val, pt, SolveStatus("feasible", 0.0, 1, pt)

    prog = body.compile()
    sys = prog.packed()
    T = prog.out_T
    c_lift = c if T is None else T.T @ c
    base_val = 0.0 if T is None else float(c @ prog.out_b)
    scale_ref = max(np.linalg.norm(c_lift), 1e-12)

    start_list = [np.zeros(prog.lift_dim), c_lift / scale_ref]
    if rng is not None:
        for _ in range(max(0, (starts or cfg.pgd_starts) - 2)):
            start_list.append(rng.normal(size=prog.lift_dim))
    best_val, best_pt, total = -np.inf, None, 0
    for s0 in start_list:
        v, res, sweeps, status = sys.dykstra(
            s0, cfg, dv_tol=cfg.tol.feas_tol * 10)
        total += sweeps
        if res > 10 * cfg.tol.feas_tol:
            continue  # could not reach the body from this start
        eta = 1.0 / scale_ref
        prev = -np.inf
        for _ in range(cfg.pgd_iters):
            v2, res, sweeps, status = sys.dykstra(
                v + eta * c_lift, cfg, dv_tol=cfg.tol.feas_tol * 10)
            total += sweeps
            if np.linalg.norm(v2) > 1e9:
                raise UnboundedBody("iterates diverge: body looks unbounded")
            v = v2
            val = float(c_lift @ v2)
            if val <= prev + 0.1 * cfg.tol.bisect_tol * max(1.0, abs(val)):
                break
            prev = val
        # polish so the reported value comes from a feasible point
        v, res, sweeps, status = sys.dykstra(
            v, cfg, tol=cfg.tol.feas_tol, dv_tol=cfg.tol.feas_tol)
        total += sweeps
        val = float(c_lift @ v)
        if val > best_val:
            best_val = val
            best_pt = v
    if best_pt is None:
        return -np.inf, None, SolveStatus("max_iter", np.inf, total)
    out = best_pt if T is None else T @ best_pt + prog.out_b
    return best_val + base_val, out, SolveStatus("feasible", 0.0, total, out)
