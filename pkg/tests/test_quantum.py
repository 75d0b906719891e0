import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from b92feedback import quantum as q
from b92feedback._validation import DomainError, wrap_angle

thetas = st.floats(min_value=1e-3, max_value=math.pi / 2 - 1e-3)
angles = st.floats(min_value=-math.pi, max_value=math.pi)
bits = st.sampled_from([0, 1])


class TestStates:

    def test_signal_states_at_pi_over_3(self):
        s0 = q.signal_state(0, math.pi / 3)
        s1 = q.signal_state(1, math.pi / 3)
        assert (s0.c0, s0.c1) == pytest.approx((math.sqrt(3) / 2, 0.5), abs=1e-15)
        assert (s1.c0, s1.c1) == pytest.approx((math.sqrt(3) / 2, -0.5), abs=1e-15)

    def test_orthogonal_state_at_pi_over_3(self):
        s = q.orthogonal_state(0, math.pi / 3)
        assert (s.c0, s.c1) == pytest.approx((0.5, -math.sqrt(3) / 2), abs=1e-15)

    @given(thetas)
    def test_overlaps(self, theta):
        s0, s1 = q.signal_state(0, theta), q.signal_state(1, theta)
        assert s0.inner(s1) == pytest.approx(math.cos(theta), abs=1e-12)
        assert q.orthogonal_state(0, theta).inner(s1) ** 2 == pytest.approx(math.sin(theta) ** 2, abs=1e-12)
        for j in (0, 1):
            assert q.orthogonal_state(j, theta).inner(q.signal_state(j, theta)) == pytest.approx(0, abs=1e-15)

    @pytest.mark.parametrize("theta", [0.0, math.pi / 2, -0.1, 1.7])
    def test_theta_domain(self, theta):
        with pytest.raises(DomainError, match="theta"):
            q.signal_state(0, theta)
        with pytest.raises(DomainError):
            q.source_density(theta)

    def test_bit_domain(self):
        with pytest.raises(DomainError):
            q.signal_state(2, 0.5)

    def test_unnormalized_state_rejected(self):
        with pytest.raises(DomainError):
            q.StateVector(1.0, 0.1)


class TestSourceDensity:

    def test_pi_over_3(self):
        rho = q.source_density(math.pi / 3)
        np.testing.assert_allclose(rho.as_array(), [[0.75, 0], [0, 0.25]], atol=1e-15)

    @given(thetas)
    def test_matches_outer_products_and_is_asymmetric(self, theta):
        rho = q.source_density(theta).as_array()
        outer = sum(np.outer(s.as_array(), s.as_array())
                    for s in (q.signal_state(0, theta), q.signal_state(1, theta))) / 2
        np.testing.assert_allclose(rho, outer, atol=1e-12)
        gap = abs(rho[0, 0] - rho[1, 1])
        assert gap == pytest.approx(math.cos(theta), abs=1e-12)
        assert not np.allclose(rho, np.eye(2) / 2)


class TestRotation:

    def test_identity(self):
        s = q.signal_state(1, 0.7)
        assert q.rotate(s, 0.0) == s

    def test_sign_convention_pinned(self):
        # drifted bit-0 state must sit at angle theta + eps
        theta, eps = 0.4, 0.3
        r = q.rotate(q.signal_state(0, theta), eps)
        assert (r.c0, r.c1) == pytest.approx((math.cos((theta + eps) / 2), math.sin((theta + eps) / 2)), abs=1e-15)
        np.testing.assert_allclose(q.rotation_matrix(eps) @ q.signal_state(0, theta).as_array(),
                                   r.as_array(), atol=1e-15)

    @given(bits, thetas, angles, angles)
    def test_group_property_and_norm(self, j, theta, a, b):
        s = q.signal_state(j, theta)
        ab = q.rotate(q.rotate(s, a), b)
        direct = q.rotate(s, a + b)
        assert (ab.c0, ab.c1) == pytest.approx((direct.c0, direct.c1), abs=1e-12)
        assert ab.c0 ** 2 + ab.c1 ** 2 == pytest.approx(1, abs=1e-12)

    def test_fig1_center_panel(self):
        s = q.drifted_state(0, math.pi / 12, math.pi / 4)
        assert (s.c0, s.c1) == pytest.approx((math.cos(math.pi / 6), math.sin(math.pi / 6)), abs=1e-15)

    def test_zero_drift_reproduces_signal_states(self):
        for j in (0, 1):
            assert q.drifted_state(j, 0.9, 0.0) == q.signal_state(j, 0.9)

    def test_drifted_equals_rotated_random(self):
        rng = np.random.default_rng(7)
        for _ in range(10_000):
            j = int(rng.integers(2))
            theta = rng.uniform(1e-3, math.pi / 2 - 1e-3)
            eps = rng.uniform(-math.pi, math.pi)
            a = q.drifted_state(j, theta, eps).as_array()
            b = q.rotate(q.signal_state(j, theta), eps).as_array()
            assert np.max(np.abs(a - b)) < 1e-12


class TestProbabilities:

    def test_values_at_zero_noise(self):
        assert q.p_inconclusive(0, math.pi / 3, 0.0, 1.0) == pytest.approx(0.625, abs=1e-15)
        assert q.p_conclusive(0, math.pi / 3, 0.0, 1.0) == pytest.approx(0.375, abs=1e-15)
        assert q.p_conclusive(0, math.pi / 3, 0.0, 0.005) == pytest.approx(0.001875, abs=1e-15)

    @given(thetas)
    def test_basis_symmetry_at_zero(self, theta):
        assert q.p_inconclusive(0, theta, 0.0) == pytest.approx(q.p_inconclusive(1, theta, 0.0), abs=1e-15)

    @given(thetas, angles, st.floats(min_value=1e-3, max_value=1.0))
    def test_sum_rule(self, theta, eps, eta):
        for k in (0, 1):
            total = q.p_inconclusive(k, theta, eps, eta) + q.p_conclusive(k, theta, eps, eta)
            assert total == pytest.approx(eta, abs=1e-12)

    @given(thetas, angles)
    def test_mirror_symmetry(self, theta, eps):
        assert q.p_inconclusive(0, theta, eps) == pytest.approx(q.p_inconclusive(1, theta, -eps), abs=1e-14)

    @settings(max_examples=300)
    @given(bits, thetas, angles, st.floats(min_value=1e-3, max_value=1.0))
    def test_closed_form_matches_born_rule(self, k, theta, eps, eta):
        inc, con = q.born_probabilities(k, theta, eps, eta)
        assert q.p_inconclusive(k, theta, eps, eta) == pytest.approx(inc, abs=1e-10)
        assert q.p_conclusive(k, theta, eps, eta) == pytest.approx(con, abs=1e-10)

    def test_conclusive_given_detection_matches_state_overlaps(self):
        rng = np.random.default_rng(3)
        j = rng.integers(0, 2, 500)
        k = rng.integers(0, 2, 500)
        eps = rng.uniform(-math.pi, math.pi, 500)
        theta = 1.1
        got = q.conclusive_given_detection(j, k, theta, eps)
        want = [q.orthogonal_state(int(kk), theta).inner(q.drifted_state(int(jj), theta, e)) ** 2
                for jj, kk, e in zip(j, k, eps)]
        np.testing.assert_allclose(got, want, atol=1e-12)

    @pytest.mark.parametrize("eta", [0.0, 1.5, -0.1])
    def test_eta_domain(self, eta):
        with pytest.raises(DomainError):
            q.p_conclusive(0, 1.0, 0.0, eta)


class TestProtocolParams:

    def test_fig3_eta(self):
        p = q.ProtocolParams()
        assert p.eta == pytest.approx(0.005, rel=1e-12)
        assert p.f * p.eta == pytest.approx(1e4)

    def test_validation(self):
        with pytest.raises(DomainError, match="theta"):
            q.ProtocolParams(theta=1.7)
        with pytest.raises(DomainError, match="eta_B"):
            q.ProtocolParams(eta_B=1.2)
        with pytest.raises(DomainError, match="total transmission"):
            q.ProtocolParams(mu=5.0, eta_B=1.0, eta_C=1.0)


@given(st.floats(min_value=-50, max_value=50))
def test_wrap_angle_range(x):
    w = wrap_angle(x)
    assert -math.pi < w <= math.pi
    assert math.cos(w) == pytest.approx(math.cos(x), abs=1e-9)


def test_wrap_angle_edges():
    assert wrap_angle(math.pi) == math.pi
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(-1e-20) == pytest.approx(0.0, abs=1e-15)
