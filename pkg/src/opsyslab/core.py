"""Concrete operator systems: *-closed subspaces of M_d with induced structure.

A system is given by a complex basis of d x d matrices.  Elements of the n-th
matrix level are stored as coefficient tensors over that basis; every cone or
norm query goes through the concrete (nd) x (nd) realization, so membership in
the subspace is exact by construction and only positivity/norm are numerical
questions.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels as K
from ._util import as_complex_matrix, frob_inner, frob_norm, hermitize


class OperatorSystemError(Exception):
    pass


class DependentBasis(OperatorSystemError):
    pass


class NotAdjointClosed(OperatorSystemError):
    def __init__(self, witness_index, residual):
        self.witness_index = witness_index
        self.residual = residual
        super().__init__(
            f"adjoint of basis element {witness_index} leaves the span "
            f"(residual {residual:.3e})"
        )


class ShapeMismatch(OperatorSystemError):
    pass


class NotSelfadjoint(OperatorSystemError):
    pass


@dataclass(frozen=True)
class ToleranceConfig:
    """Numerical policy shared by all modules."""

    eig_tol: float = 1e-9
    feas_tol: float = 1e-9
    bisect_tol: float = 1e-9
    dedup_tol: float = 1e-7
    level_cap: int = 3
    sample_count: int = 64
    seed: int = 2024

    def __post_init__(self):
        for name in ("eig_tol", "feas_tol", "bisect_tol", "dedup_tol"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.level_cap < 1:
            raise ValueError("level_cap must be at least 1")
        if self.sample_count < 1:
            raise ValueError("sample_count must be at least 1")


@dataclass(frozen=True)
class StructureInfo:
    """Detected structure enabling exact fast paths.

    jordan_closed means x in M_n(S)^sa implies its positive part stays in
    M_n(S); for such systems the optimal positive decomposition is the
    spectral one.  Holds for full matrix algebras, spans of disjoint diagonal
    indicators ("partition" systems) and one-dimensional systems with a
    positive semidefinite generator ("interval" systems).
    """

    is_full_matrix: bool = False
    is_diagonal: bool = False
    partition: tuple | None = None  # tuple of tuples of grid indices
    indicator_coeffs: np.ndarray | None = None  # (k, m) indicators in herm basis
    interval_generator: np.ndarray | None = None  # PSD generator g (m == 1)
    generator_top: float = 0.0  # largest eigenvalue of g
    zero_cone: bool = False  # cone provably {0} at every level

    @property
    def jordan_closed(self):
        return (
            self.is_full_matrix
            or self.partition is not None
            or self.interval_generator is not None
        )


class OperatorSystemSpec:
    """Validated system: basis, derived hermitian basis, tolerances, structure."""

    def __init__(self, name, basis, hermitian_basis, tolerances, structure):
        self.name = name
        self.basis = basis  # (m, d, d) complex
        self.hermitian_basis = hermitian_basis  # (m, d, d) complex, orthonormal
        self.tol = tolerances
        self.structure = structure
        self.d = basis.shape[1]
        self.dim = basis.shape[0]
        self._caches = {}

    def __repr__(self):
        return f"OperatorSystemSpec({self.name!r}, d={self.d}, dim={self.dim})"

    # -- derived linear algebra, cached per level ---------------------------

    def _cache(self, key, builder):
        if key not in self._caches:
            self._caches[key] = builder()
        return self._caches[key]

    def orthonormal_complex_basis(self):
        """Complex-orthonormal spanning set of S, as (m, d, d)."""

        def build():
            vecs = self.basis.reshape(self.dim, -1).T  # (d*d, m)
            q, _ = np.linalg.qr(vecs)
            return q.T.reshape(self.dim, self.d, self.d)

        return self._cache("qbasis", build)

    def coeffs_from_matrix(self, M):
        """Coefficients over `basis` of a matrix assumed (close to) in S."""

        def build():
            vecs = self.basis.reshape(self.dim, -1).T
            return np.linalg.pinv(vecs)

        pinv = self._cache("pinv", build)
        return pinv @ np.asarray(M, dtype=np.complex128).reshape(-1)

    def herm_in_basis(self):
        """Expansion of each hermitian basis element over the complex basis."""

        def build():
            return np.array(
                [self.coeffs_from_matrix(H) for H in self.hermitian_basis]
            )

        return self._cache("herm_in_basis", build)

    def adjoint_map(self):
        """Matrix G with vec-coeffs of B_k* = sum_l G[k, l] B_l."""

        def build():
            return np.array(
                [self.coeffs_from_matrix(B.conj().T) for B in self.basis]
            )

        return self._cache("adjoint_map", build)

    def sa_basis_matrix(self, n):
        """Columns: Herm(nd)-coordinates of an orthonormal basis of M_n(S)^sa.

        The basis is {G_a (x) H_j} with G_a the coordinate basis of Herm(n),
        so a selfadjoint level-n element has exactly dim * n^2 real
        coordinates.
        """

        key = ("sa_basis", n)

        def build():
            nd = n * self.d
            cols = []
            for j in range(self.dim):
                H = self.hermitian_basis[j]
                for a in range(n * n):
                    e = np.zeros(n * n)
                    e[a] = 1.0
                    G = K.vec_to_herm(e, n)
                    cols.append(K.herm_to_vec(np.kron(G, H)))
            return np.array(cols).T  # ((nd)^2, dim*n^2)

        return self._cache(key, build)

    def sa_dim(self, n):
        return self.dim * n * n


@dataclass
class LevelElement:
    """x in M_n(S) as a coefficient tensor, with its realization cached."""

    level: int
    coeffs: np.ndarray  # (m, n, n) complex
    realization: np.ndarray = field(repr=False, default=None)

    @property
    def n(self):
        return self.level


def _orthonormalize_sa(candidates, dedup_tol):
    """Real Gram-Schmidt over Hermitian matrices, dropping near-dependents."""
    out = []
    for c in candidates:
        v = c.copy()
        for b in out:
            v = v - frob_inner(b, v) * b
        nrm = frob_norm(v)
        if nrm > dedup_tol:
            out.append(v / nrm)
    return out


def _detect_structure(basis, herm, tol):
    d = basis.shape[1]
    m = basis.shape[0]
    info = {}
    info["is_full_matrix"] = m == d * d
    offdiag = max(
        float(np.max(np.abs(B - np.diag(np.diag(B))))) for B in basis
    )
    scale = max(float(np.max(np.abs(basis))), 1.0)
    is_diag = offdiag <= 1e-12 * scale
    info["is_diagonal"] = is_diag

    partition = None
    indicator_coeffs = None
    if is_diag and not info["is_full_matrix"]:
        ev = np.array([np.real(np.diag(H)) for H in herm])  # (m, d)
        classes = []
        for i in range(d):
            placed = False
            for cls in classes:
                if np.max(np.abs(ev[:, i] - ev[:, cls[0]])) <= tol.dedup_tol:
                    cls.append(i)
                    placed = True
                    break
            if not placed:
                classes.append([i])
        if len(classes) == m:
            coeffs = np.zeros((m, m))
            ok = True
            for k, cls in enumerate(classes):
                target = np.zeros(d)
                target[cls] = 1.0
                sol, res, _, _ = np.linalg.lstsq(ev.T, target, rcond=None)
                if frob_norm(ev.T @ sol - target) > tol.dedup_tol:
                    ok = False
                    break
                coeffs[k] = sol
            if ok:
                partition = tuple(tuple(c) for c in classes)
                indicator_coeffs = coeffs

    interval_gen = None
    gen_top = 0.0
    zero_cone = False
    if m == 1:
        g = herm[0]
        lo, hi = K.eig_range_herm(g)
        s = max(abs(lo), abs(hi))
        if lo >= -1e-12 * s and hi > 0:
            interval_gen, gen_top = g, hi
        elif hi <= 1e-12 * s and lo < 0:
            interval_gen, gen_top = -g, -lo
        elif lo < 0 < hi:
            # mixed-sign generator: A (x) g psd forces A both >=0 and <=0
            zero_cone = True

    return StructureInfo(
        is_full_matrix=info["is_full_matrix"],
        is_diagonal=is_diag,
        partition=partition,
        indicator_coeffs=indicator_coeffs,
        interval_generator=interval_gen,
        generator_top=gen_top,
        zero_cone=zero_cone,
    )


def build_system(basis, tolerances=None, name="system"):
    """Validate a raw basis and derive the hermitian basis and structure tags.

    Raises DependentBasis when the family is rank deficient and
    NotAdjointClosed (with the offending index and residual) when some B_k*
    escapes the complex span.
    """
    tol = tolerances or ToleranceConfig()
    if len(basis) == 0:
        raise ValueError("basis must be nonempty")
    mats = [as_complex_matrix(B) for B in basis]
    d = mats[0].shape[0]
    for B in mats:
        if B.shape != (d, d):
            raise ShapeMismatch("basis matrices must share one square shape")
    arr = np.array(mats)
    m = arr.shape[0]
    if m > d * d:
        raise DependentBasis(f"{m} elements cannot be independent in M_{d}")

    vecs = arr.reshape(m, -1)
    svals = np.linalg.svd(vecs, compute_uv=False)
    scale = max(svals[0], 1.0)
    if svals[-1] <= tol.dedup_tol * scale:
        raise DependentBasis(
            f"smallest singular value {svals[-1]:.3e} below tolerance"
        )

    q, _ = np.linalg.qr(vecs.T)  # (d*d, m) orthonormal columns
    proj = q @ q.conj().T
    for k, B in enumerate(arr):
        adj = B.conj().T.reshape(-1)
        residual = float(np.linalg.norm(adj - proj @ adj))
        if residual > tol.dedup_tol * max(1.0, float(np.linalg.norm(adj))):
            raise NotAdjointClosed(k, residual)

    halves = []
    for B in arr:
        halves.append(hermitize(B))
        halves.append(hermitize(-1j * B))
    herm = _orthonormalize_sa(halves, tol.dedup_tol)
    if len(herm) != m:
        raise OperatorSystemError(
            f"selfadjoint part has real dimension {len(herm)}, expected {m}"
        )
    herm = np.array(herm)

    structure = _detect_structure(arr, herm, tol)
    return OperatorSystemSpec(name, arr, herm, tol, structure)


# ---------------------------------------------------------------------------
# level elements

def element(spec, coeffs, level=None):
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    if coeffs.ndim == 1:
        coeffs = coeffs.reshape(-1, 1, 1)
    if coeffs.shape[0] != spec.dim:
        raise ShapeMismatch(
            f"expected {spec.dim} coefficient blocks, got {coeffs.shape[0]}"
        )
    n = coeffs.shape[1]
    if coeffs.shape[1] != coeffs.shape[2]:
        raise ShapeMismatch("coefficient blocks must be square")
    if level is not None and level != n:
        raise ShapeMismatch(f"level {level} does not match blocks of size {n}")
    x = LevelElement(level=n, coeffs=coeffs)
    x.realization = realize(spec, x)
    return x


def realize(spec, x):
    """Concrete matrix sum_k coeffs[k] (x) B_k in M_{n d}."""
    if x.coeffs.shape[0] != spec.dim:
        raise ShapeMismatch("coefficient count does not match basis size")
    if x.realization is not None:
        nd = x.level * spec.d
        if x.realization.shape == (nd, nd):
            return x.realization
    out = np.zeros((x.level * spec.d, x.level * spec.d), dtype=np.complex128)
    for k in range(spec.dim):
        out += np.kron(x.coeffs[k], spec.basis[k])
    x.realization = out
    return out


def element_from_sa_coords(spec, v, n):
    """Inverse of sa_coords: rebuild a selfadjoint element from coordinates."""
    U = spec.sa_basis_matrix(n)
    M = K.vec_to_herm(U @ np.asarray(v, dtype=np.float64), n * spec.d)
    x, residual = project_to_system(spec, M, n)
    if residual > 1e-8 * max(1.0, frob_norm(M)):
        raise OperatorSystemError("sa coordinates do not define a system element")
    return x


def sa_coords(spec, x):
    U = spec.sa_basis_matrix(x.level)
    return U.T @ K.herm_to_vec(realize(spec, x))


def is_selfadjoint(spec, x, rtol=None):
    M = realize(spec, x)
    tol = (rtol if rtol is not None else spec.tol.eig_tol) * max(
        1.0, float(np.max(np.abs(M)))
    )
    return float(np.max(np.abs(M - M.conj().T))) <= tol


def is_positive(spec, x):
    """(verdict, smallest eigenvalue) of the realization; x must be selfadjoint."""
    if not is_selfadjoint(spec, x):
        raise NotSelfadjoint("element is not selfadjoint within tolerance")
    M = realize(spec, x)
    lo, _ = K.eig_range_herm(M)
    return lo >= -spec.tol.eig_tol, lo


def op_norm(spec, x):
    M = realize(spec, x)
    if is_selfadjoint(spec, x, rtol=1e-12):
        lo, hi = K.eig_range_herm(M)
        return max(abs(lo), abs(hi))
    return K.opnorm_matrix(M)


def project_to_system(spec, M, n):
    """Nearest element of M_n(S) in Frobenius norm, with the residual."""
    M = np.asarray(M, dtype=np.complex128)
    nd = n * spec.d
    if M.shape != (nd, nd):
        raise ShapeMismatch(f"expected shape {(nd, nd)}, got {M.shape}")
    q = spec.orthonormal_complex_basis()
    coeffs = np.zeros((spec.dim, n, n), dtype=np.complex128)
    # inner products <Q_k (x) G, M> over an orthonormal complex basis of
    # M_n(S); the coefficient of Q_k is the partial trace against Q_k.
    proj = np.zeros_like(M)
    blocks = M.reshape(n, spec.d, n, spec.d)
    for k in range(spec.dim):
        Ak = np.einsum("ibjf,bf->ij", blocks, q[k].conj())
        proj += np.kron(Ak, q[k])
        coeffs[k] = Ak
    residual = frob_norm(M - proj)
    # convert coefficients over q back to the original basis
    vecs = spec.basis.reshape(spec.dim, -1).T
    qvecs = q.reshape(spec.dim, -1).T
    change = np.linalg.lstsq(vecs, qvecs, rcond=None)[0]  # (m, m)
    out_coeffs = np.einsum("kl,kij->lij", change, coeffs)
    x = LevelElement(level=n, coeffs=out_coeffs)
    x.realization = proj
    return x, residual


def amplify(spec, x, k):
    """1_k (x) x, the k-fold direct sum."""
    eye = np.eye(k)
    coeffs = np.array([np.kron(eye, c) for c in x.coeffs])
    return element(spec, coeffs)


def random_selfadjoint(spec, n, rng, unit_norm=False):
    """Random selfadjoint level-n element (GUE coefficients on the sa basis)."""
    coeffs = np.zeros((spec.dim, n, n), dtype=np.complex128)
    herm_mix = spec.herm_in_basis()
    for j in range(spec.dim):
        A = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        A = hermitize(A)
        for k in range(spec.dim):
            coeffs[k] += herm_mix[j, k] * A
    x = element(spec, coeffs)
    if unit_norm:
        nrm = op_norm(spec, x)
        if nrm < 1e-14:
            return random_selfadjoint(spec, n, rng, unit_norm=True)
        x = element(spec, x.coeffs / nrm)
    return x


def scale_element(spec, x, t):
    return element(spec, x.coeffs * t)


def add_elements(spec, x, y):
    if x.level != y.level:
        raise ShapeMismatch("levels differ")
    return element(spec, x.coeffs + y.coeffs)
