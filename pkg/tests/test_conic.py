import itertools

import numpy as np
import pytest

from opsyslab import _kernels as K
from opsyslab import conic
from opsyslab.conic import (
    EngineConfig,
    LiftedBody,
    OriginNotInBody,
    UnsupportedNode,
    check_feasible,
    cone_cap_ball,
    conv_hull_union,
    gauge,
    hull_gauge,
    intersection,
    membership,
    minkowski_difference,
    norm_ball,
    project_body,
    psd_cone,
    scale,
    support_max,
    system_sa,
    translate,
)


@pytest.fixture(scope="module")
def cfg():
    return EngineConfig.default()


def vec(M):
    return K.herm_to_vec(np.asarray(M, dtype=complex))


class TestProjectBody:
    def test_point_already_inside(self, cfg, rng):
        body = psd_cone(2)
        x = vec(np.diag([2.0, 1.0]))
        y, st = project_body(body, x, cfg)
        assert st.feasible
        assert np.allclose(y, x, atol=1e-12)

    def test_psd_clip_hand_value(self, cfg):
        y, _ = project_body(psd_cone(2), vec(np.diag([1.0, -1.0])), cfg)
        assert np.allclose(K.vec_to_herm(y, 2), np.diag([1.0, 0.0]), atol=1e-12)

    def test_ball_clip_hand_value(self, cfg):
        y, _ = project_body(norm_ball(1.0, 2), vec(np.diag([3.0, 0.0])), cfg)
        assert np.allclose(K.vec_to_herm(y, 2), np.diag([1.0, 0.0]), atol=1e-12)

    def test_intersection_projection_idempotent(self, cfg, rng, spin2):
        body = cone_cap_ball(spin2, 2, 1.0)
        x = rng.normal(size=body.dim)
        y, st = project_body(body, x, cfg)
        y2, _ = project_body(body, y, cfg)
        assert np.linalg.norm(y - y2) <= 1e-7

    def test_hull_not_projection_capable(self, cfg):
        body = conv_hull_union(psd_cone(2), scale(-1.0, psd_cone(2)))
        with pytest.raises(UnsupportedNode):
            project_body(body, vec(np.eye(2)), cfg)


class TestCheckFeasible:
    def test_psd_and_ball_share_zero(self, cfg):
        st = check_feasible([psd_cone(2), norm_ball(1.0, 2)], cfg)
        assert st.feasible

    def test_shifted_cone_against_small_ball(self, cfg):
        # x >= 1 forces ||x|| >= 1, incompatible with the 1/2 ball
        ge_one = translate(vec(np.eye(2)), psd_cone(2))
        st = check_feasible([ge_one, norm_ball(0.5, 2)], cfg)
        assert st.status == "infeasible"
        assert st.residual > 0.1

    def test_offdiagonal_cone_has_no_unit_slice(self, cfg, offdiag2):
        # the only positive element of span{E12, E21} is 0, so a normalised
        # slice of the cone is empty ("contains no nonzero positive elements")
        cone = intersection([system_sa(offdiag2, 1), psd_cone(2)])
        tr_one = conic.AffineSliceBody(vec(np.eye(2)), np.array([1.0]), 4)
        st = check_feasible([cone, tr_one], cfg)
        assert st.status == "infeasible"

    def test_translated_pair_convexity_family(self, cfg, rng):
        body = norm_ball(1.0, 2)
        for _ in range(5):
            w = rng.normal(size=4) * 0.3
            st = check_feasible([body, translate(w, body)], cfg)
            assert st.feasible  # w/2 keeps a witness in both

    def test_max_iter_reports_best_iterate(self, rng):
        tiny = EngineConfig.default()
        tiny.max_sweeps = 3
        tiny.plateau_sweeps = 10**9
        ge_one = translate(vec(np.eye(2)), psd_cone(2))
        st = check_feasible([ge_one, norm_ball(0.5, 2)], tiny)
        assert st.status == "max_iter"
        assert st.point is not None


class TestGauge:
    def test_zero_direction(self, cfg):
        assert gauge(norm_ball(1.0, 2), np.zeros(4), cfg) == 0.0

    def test_unit_ball_at_unit_norm_point(self, cfg):
        x = vec(np.diag([1.0, -0.3]))
        assert abs(gauge(norm_ball(1.0, 2), x, cfg) - 1.0) <= 1e-9

    def test_segment_scaling(self, cfg, tol):
        # interval [0, 2] in a one-dimensional diagonal system; x = 1 -> 1/2
        seg = conic.SpectralIntervalBody(1, 0.0, 2.0)
        assert abs(gauge(seg, np.array([1.0]), cfg) - 0.5) <= 1e-12

    def test_origin_required(self, cfg):
        body = conic.SpectralIntervalBody(2, 1.0, 2.0)
        with pytest.raises(OriginNotInBody):
            gauge(body, vec(np.eye(2)), cfg)

    def test_outside_span_is_infinite(self, cfg, offdiag2):
        body = intersection([system_sa(offdiag2, 1), norm_ball(1.0, 2)])
        assert gauge(body, vec(np.eye(2)), cfg) == np.inf

    def test_homogeneity(self, cfg, rng):
        body = conic.SpectralIntervalBody(2, -0.5, 1.5)
        for _ in range(50):
            x = rng.normal(size=4)
            t = rng.uniform(0.05, 4.0)
            g1 = gauge(body, x, cfg)
            g2 = gauge(body, t * x, cfg)
            assert abs(g2 - t * g1) <= 10 * cfg.tol.bisect_tol * max(1.0, g2)

    def test_boundary_point_has_gauge_one(self, cfg, rng):
        body = intersection([psd_cone(2), norm_ball(1.0, 2)])
        for _ in range(10):
            A = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            w, Q = np.linalg.eigh(0.5 * (A + A.conj().T))
            w = np.clip(w, 0.0, 1.0)
            w[-1] = 1.0  # exact boundary of the norm face
            p = vec((Q * w) @ Q.conj().T)
            ok, _ = membership(body, p, cfg)
            assert ok
            g = gauge(body, p, cfg)
            assert abs(g - 1.0) <= 10 * cfg.tol.bisect_tol

    def test_generic_bisection_matches_exact_interval(self, cfg, rng):
        # same set, once with the spectral fast path and once forced through
        # the lifted Dykstra route
        lo, hi = -0.7, 1.3
        fast = conic.SpectralIntervalBody(2, lo, hi)
        slow = LiftedBody(4, [conic.SpectralAtom(0, 2, lo, hi)],
                          out_T=np.eye(4), zero_in=True)
        for _ in range(8):
            x = rng.normal(size=4)
            g_fast = gauge(fast, x, cfg)
            g_slow = gauge(slow, x, cfg)
            assert abs(g_fast - g_slow) <= 1e-5 * max(1.0, g_fast)


class TestHullGauge:
    def test_tight_pair_value_two(self, cfg):
        # conv([0,1] u -[0,1]) needs weight 2 to reach diag(1, -1)
        K01 = conic.SpectralIntervalBody(2, 0.0, 1.0)
        g = hull_gauge(K01, scale(-1.0, K01), vec(np.diag([1.0, -1.0])), cfg)
        assert abs(g - 2.0) <= 1e-9

    def test_psd_direction_value_one(self, cfg):
        K01 = conic.SpectralIntervalBody(2, 0.0, 1.0)
        g = hull_gauge(K01, scale(-1.0, K01), vec(np.diag([1.0, 0.5])), cfg)
        assert abs(g - 1.0) <= 1e-9

    def test_brute_force_two_parameter_oracle(self, cfg, rng):
        # oracle: scan (s, split) grids over s*u - r*v with u, v in [0,1]
        K01 = conic.SpectralIntervalBody(2, 0.0, 1.0)

        def oracle(X):
            w = np.linalg.eigvalsh(X)
            lmax, lmin = w[-1], w[0]
            best = np.inf
            for s in np.linspace(0, 4, 4001):
                # feasibility: lmax <= s, lmin >= -(r), minimise s + r
                r = max(0.0, -lmin)
                if lmax <= s + 1e-12:
                    best = min(best, max(s, lmax) + r)
            return best

        for _ in range(10):
            A = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            A = 0.5 * (A + A.conj().T)
            g = hull_gauge(K01, scale(-1.0, K01), vec(A), cfg)
            assert abs(g - oracle(A)) <= 2e-3

    def test_generic_split_search_agrees_with_lp(self, rng):
        cfg = EngineConfig.default()
        K01 = conic.SpectralIntervalBody(2, 0.0, 1.0)
        slow = LiftedBody(4, [conic.SpectralAtom(0, 2, 0.0, 1.0)],
                          out_T=np.eye(4), zero_in=True)
        slow_neg = scale(-1.0, slow)
        for _ in range(4):
            x = rng.normal(size=4)
            g_lp = hull_gauge(K01, scale(-1.0, K01), x, cfg)
            g_gen = conic._split_gauge(slow, slow_neg, x, cfg)
            assert abs(g_lp - g_gen) <= 2e-4 * max(1.0, g_lp)


class TestSupportMax:
    def test_trace_over_psd_ball(self, cfg):
        body = intersection([psd_cone(2), norm_ball(1.0, 2)])
        val, pt, st = support_max(body, vec(np.eye(2)), cfg)
        assert abs(val - 2.0) <= 1e-9
        assert np.allclose(K.vec_to_herm(pt, 2), np.eye(2), atol=1e-9)

    def test_signature_objective(self, cfg):
        body = intersection([psd_cone(2), norm_ball(1.0, 2)])
        val, pt, st = support_max(body, vec(np.diag([1.0, -1.0])), cfg)
        assert abs(val - 1.0) <= 1e-9
        assert np.allclose(K.vec_to_herm(pt, 2), np.diag([1.0, 0.0]), atol=1e-9)

    def test_zero_objective(self, cfg):
        body = intersection([psd_cone(2), norm_ball(1.0, 2)])
        val, _, _ = support_max(body, np.zeros(4), cfg)
        assert abs(val) <= 1e-12

    def test_brute_force_grid_confirms(self, cfg, rng):
        body = intersection([psd_cone(2), norm_ball(1.0, 2)])
        # dense grid over {0 <= X <= 1} in Herm(2): X = U diag(a,b) U*
        thetas = np.linspace(0, np.pi, 60)
        phis = np.linspace(0, np.pi, 30)
        levels = np.linspace(0, 1, 21)
        for _ in range(3):
            c = rng.normal(size=4)
            W = K.vec_to_herm(c, 2)
            best = -np.inf
            for th, ph, a, b in itertools.product(thetas, phis, levels, levels):
                u = np.array([np.cos(th), np.sin(th) * np.exp(1j * ph)])
                U = np.column_stack([u, [-u[1].conj(), u[0].conj()]])
                X = (U * [a, b]) @ U.conj().T
                best = max(best, float(np.real(np.vdot(W, X))))
            val, _, _ = support_max(body, c, cfg)
            assert val >= best - 1e-9  # engine value dominates the grid
            assert val <= best + 1e-2  # and the grid nearly reaches it

    def test_pgd_on_lifted_body(self, cfg, rng):
        # shadow of a 2-block box under summation: support of 1 is 2
        atoms = [conic.SpectralAtom(0, 1, 0.0, 1.0),
                 conic.SpectralAtom(1, 1, 0.0, 1.0)]
        body = LiftedBody(2, atoms, out_T=np.array([[1.0, 1.0]]), zero_in=True)
        val, pt, st = support_max(body, np.array([1.0]), cfg, rng=rng)
        assert abs(val - 2.0) <= 1e-7

    def test_unbounded_detected(self, cfg):
        with pytest.raises(conic.UnboundedBody):
            support_max(psd_cone(2), vec(np.eye(2)), cfg)


class TestMinkowski:
    def test_difference_of_intervals_is_interval(self, cfg):
        A = conic.SpectralIntervalBody(2, 0.0, 1.0)
        diff = minkowski_difference(A, A)
        assert diff.scalar_interval() == (-1.0, 1.0, 2)
        ok, _ = membership(diff, vec(np.diag([0.9, -0.9])), cfg)
        assert ok
        ok, _ = membership(diff, vec(np.diag([1.5, 0.0])), cfg)
        assert not ok

    def test_generic_sum_membership(self, cfg, rng):
        # force the lifted route and compare against the interval answer
        A = LiftedBody(4, [conic.SpectralAtom(0, 2, 0.0, 1.0)],
                       out_T=np.eye(4), zero_in=True)
        diff = minkowski_difference(A, A)
        for _ in range(6):
            x = rng.normal(size=4) * 0.8
            lmin, lmax = K.eig_range_vec(x, 0, 2)
            expected = lmax <= 1 + 1e-9 and lmin >= -1 - 1e-9
            ok, res = membership(diff, x, cfg)
            assert ok == expected


class TestPinnedDykstraInstances:
    """Three pinned feasibility problems that must reach 1e-8 in 1e4 sweeps."""

    def run(self, bodies, cfg, start=None):
        st = check_feasible(bodies, cfg, start=start)
        return st

    def test_pinned_psd_ball_slice(self):
        cfg = EngineConfig.default()
        cfg.max_sweeps = 10**4
        slice_ = conic.AffineSliceBody(vec(np.eye(3)), np.array([1.0]), 9)
        st = self.run([psd_cone(3), norm_ball(1.0, 3), slice_], cfg)
        assert st.feasible and st.residual < 1e-8

    def test_pinned_shifted_cones(self):
        cfg = EngineConfig.default()
        cfg.max_sweeps = 10**4
        a = translate(vec(-np.eye(2)), psd_cone(2))   # x >= -1
        b = translate(vec(0.5 * np.eye(2)), scale(-1.0, psd_cone(2)))  # x <= 1/2
        st = self.run([a, b, norm_ball(2.0, 2)], cfg)
        assert st.feasible and st.residual < 1e-8

    def test_pinned_subspace_cone(self, spin2):
        cfg = EngineConfig.default()
        cfg.max_sweeps = 10**4
        st = self.run(
            [system_sa(spin2, 1), translate(vec(np.eye(2) * 0.25), psd_cone(2)),
             norm_ball(1.0, 2)],
            cfg,
        )
        assert st.feasible and st.residual < 1e-8


@pytest.fixture()
def rng():
    return np.random.default_rng(11)
