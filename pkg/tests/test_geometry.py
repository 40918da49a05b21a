import numpy as np
import pytest

from opsyslab import _kernels as K
from opsyslab import geometry
from opsyslab.conic import EngineConfig, OriginNotInBody
from opsyslab.geometry import (
    NotNested,
    dual_norm_sandwich,
    extension_constant,
    interval_family,
    order_embedding_check,
    psd_ball_family,
    separate_point,
    width,
)


@pytest.fixture(scope="module")
def cfg():
    return EngineConfig.default()


def vec(M):
    return K.herm_to_vec(np.asarray(M, dtype=complex))


class TestWidth:
    def test_unit_interval_width_one(self, cfg):
        fam = interval_family(0.0, 1.0)
        assert abs(width(fam, np.array([1.0]), 1, cfg) - 1.0) <= 1e-10

    def test_direction_outside_span_is_zero(self, cfg):
        fam = interval_family(0.0, 0.0, base_dim=2)  # the body {0}
        assert width(fam, vec(np.eye(2)), 1, cfg) == 0.0

    def test_halving(self, cfg):
        fam = interval_family(0.0, 1.0)
        w1 = width(fam, np.array([1.0]), 1, cfg)
        w2 = width(fam, np.array([2.0]), 1, cfg)
        assert abs(w2 - w1 / 2.0) <= 1e-10

    def test_level_out_of_range(self, cfg):
        fam = interval_family(0.0, 1.0, level_cap=2)
        with pytest.raises(geometry.LevelOutOfRange):
            fam.body(3)


class TestSandwich:
    def test_unit_interval_tight_lower(self, cfg):
        fam = interval_family(0.0, 1.0)
        g_lo, g_hull = dual_norm_sandwich(fam, np.array([1.0]), 1, cfg)
        assert abs(g_lo - 1.0) <= 1e-10
        assert abs(g_hull - 1.0) <= 1e-10

    def test_zero_direction(self, cfg):
        fam = interval_family(0.0, 1.0)
        g_lo, g_hull = dual_norm_sandwich(fam, np.array([0.0]), 1, cfg)
        assert g_lo == 0.0 and g_hull == 0.0

    def test_tight_pair_on_psd_ball(self, cfg):
        fam = psd_ball_family(2)
        d = vec(np.diag([1.0, -1.0]))
        g_lo, g_hull = dual_norm_sandwich(fam, d, 1, cfg)
        assert abs(g_lo - 1.0) <= 1e-9
        assert abs(g_hull - 2.0) <= 1e-9

    @pytest.mark.parametrize("fam_builder", [
        lambda: interval_family(0.0, 1.0),
        lambda: interval_family(-1.0, 1.0),
        lambda: psd_ball_family(2),
    ])
    def test_sandwich_holds_randomly(self, cfg, fam_builder, rng):
        fam = fam_builder()
        for n in (1, 2):
            body = fam.body(n)
            for _ in range(40):
                d = rng.normal(size=body.dim)
                g_lo, g_hull = dual_norm_sandwich(fam, d, n, cfg)
                assert g_lo <= g_hull + 1e-10
                assert g_hull <= 2.0 * g_lo + 1e-5


class TestSeparation:
    def test_outside_interval_point(self, cfg, rng):
        fam = interval_family(0.0, 1.0)
        cert = separate_point(fam, np.array([2.0]), 1, cfg, rng, revalidate=200)
        assert cert is not None
        # f(t) = t separates: value 2, margin 1
        assert abs(cert.evaluate(np.array([2.0])) - 2.0) <= 1e-9
        assert abs(cert.margin - 1.0) <= 1e-9

    def test_inside_returns_none(self, cfg, rng):
        fam = interval_family(0.0, 1.0)
        assert separate_point(fam, np.array([0.5]), 1, cfg, rng) is None

    def test_psd_ball_axis_point(self, cfg, rng):
        fam = psd_ball_family(2)
        x = vec(np.diag([2.0, 0.0]))
        cert = separate_point(fam, x, 1, cfg, rng, revalidate=300)
        # normal is E11 -> value 2 while sup over the body is 1
        assert abs(cert.value - 2.0) <= 1e-9
        assert np.allclose(K.vec_to_herm(cert.normal, 2),
                           np.diag([1.0, 0.0]), atol=1e-9)

    def test_certificate_soundness_on_samples(self, cfg, rng):
        fam = psd_ball_family(2)
        for _ in range(5):
            x = rng.normal(size=4) * 2.0
            cert = separate_point(fam, x, 1, cfg, rng, revalidate=1000)
            if cert is None:
                continue
            assert cert.revalidated_max <= 1.0 + 100 * cfg.tol.feas_tol


class TestExtensionConstant:
    def test_unit_in_symmetric_interval(self, cfg, rng):
        est = extension_constant(interval_family(0, 1), interval_family(-1, 1),
                                 1, 32, cfg, rng)
        # (K-K) = [-2,2], (L-L) = [-1,1]: every ratio is exactly 2
        assert abs(est.C_hat - 2.0) <= 1e-9
        assert est.C_hat * est.c_hat == 1.0

    def test_equal_families_give_one(self, cfg, rng):
        fam = interval_family(0, 1)
        est = extension_constant(fam, fam, 1, 16, cfg, rng)
        assert abs(est.C_hat - 1.0) <= 1e-9

    def test_unit_in_twice_interval(self, cfg, rng):
        est = extension_constant(interval_family(0, 1), interval_family(-2, 2),
                                 1, 16, cfg, rng)
        assert abs(est.C_hat - 4.0) <= 1e-9

    def test_not_nested_detected(self, cfg, rng):
        with pytest.raises(NotNested):
            extension_constant(interval_family(-2, 2), interval_family(0, 1),
                               1, 8, cfg, rng)

    def test_level2_matches_level1_for_intervals(self, cfg, rng):
        est = extension_constant(interval_family(0, 1), interval_family(-1, 1),
                                 2, 16, cfg, rng)
        assert abs(est.C_hat - 2.0) <= 1e-9


class TestOrderEmbedding:
    def test_interval_fail_with_negative_witness(self, cfg, rng):
        passed, witness = order_embedding_check(
            interval_family(0, 1), interval_family(-1, 1), 1, 16, cfg, rng)
        assert not passed
        assert witness is not None
        lmin, _ = K.eig_range_vec(np.ascontiguousarray(witness), 0, 1)
        assert lmin < 0  # the witness -1 of the symmetric interval example

    def test_equal_families_pass(self, cfg, rng):
        fam = interval_family(0, 1)
        passed, _ = order_embedding_check(fam, fam, 1, 8, cfg, rng)
        assert passed

    def test_scaled_interval_passes(self, cfg, rng):
        passed, _ = order_embedding_check(
            interval_family(0, 1), interval_family(0, 2), 1, 8, cfg, rng)
        assert passed

    def test_level2_psd_ball(self, cfg, rng):
        passed, _ = order_embedding_check(
            psd_ball_family(2), psd_ball_family(2), 2, 8, cfg, rng)
        assert passed


class TestWidthPositivity:
    def test_span_agreement(self, cfg, rng):
        fam = psd_ball_family(2)
        span = geometry.difference_span(fam, 1, cfg, rng)
        for _ in range(20):
            d = rng.normal(size=4)
            w = width(fam, d, 1, cfg)
            in_span = np.linalg.norm(d - span @ (span.T @ d)) <= 1e-8
            assert (w > 0) == in_span


@pytest.fixture()
def rng():
    return np.random.default_rng(5)
