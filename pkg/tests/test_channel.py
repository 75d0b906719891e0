import inspect
import math

import numpy as np
import pytest

from b92feedback import quantum as q
from b92feedback._validation import DomainError
from b92feedback.channel import (EventLog, NoiseTrajectory, Outcome, eval_trajectory,
                                 run_transmission, simulate_pulse)
from b92feedback.feedback import FeedbackConfig, FeedbackController, NoFeedback


def binomial_se(p, n):
    return math.sqrt(p * (1 - p) / n)


class TestTrajectory:

    def test_linear(self):
        assert eval_trajectory(NoiseTrajectory.linear(0.05), 10.0) == pytest.approx(0.5)

    def test_step(self):
        traj = NoiseTrajectory.step([(5.0, 2.0)])
        assert eval_trajectory(traj, 4.9) == 0.0
        assert eval_trajectory(traj, 5.1) == 2.0
        assert eval_trajectory(traj, 5.0) == 2.0
        assert traj.discontinuities == (5.0,)

    def test_constant(self):
        traj = NoiseTrajectory.constant(0.0)
        np.testing.assert_array_equal(eval_trajectory(traj, np.linspace(0, 100, 7)), 0.0)

    def test_wraps(self):
        traj = NoiseTrajectory.linear(1.0)
        eps = eval_trajectory(traj, np.linspace(0, 40, 1001))
        assert np.all((eps > -math.pi) & (eps <= math.pi))
        assert eval_trajectory(traj, 4.0) == pytest.approx(4.0 - 2 * math.pi)

    def test_piecewise_interpolates(self):
        traj = NoiseTrajectory.piecewise([(0, 0.0), (10, 1.0)])
        assert eval_trajectory(traj, 5.0) == pytest.approx(0.5)
        assert eval_trajectory(traj, 20.0) == pytest.approx(1.0)

    def test_validation(self):
        with pytest.raises(DomainError):
            NoiseTrajectory.step([(5.0, 1.0), (3.0, 0.0)])
        with pytest.raises(DomainError):
            NoiseTrajectory("sine")
        with pytest.raises(DomainError):
            eval_trajectory(NoiseTrajectory.constant(), -1.0)


class TestSimulatePulse:

    def test_eta_zero_always_vacuum(self):
        params = q.ProtocolParams(eta_C=0.0)
        rng = np.random.default_rng(0)
        assert all(simulate_pulse(params, 0.0, rng).outcome == Outcome.VACUUM for _ in range(500))

    def test_error_free_decoding_at_zero_noise(self):
        params = q.ProtocolParams(mu=1.0, eta_B=1.0, eta_C=1.0)
        rng = np.random.default_rng(1)
        for _ in range(4000):
            ev = simulate_pulse(params, 0.0, rng)
            if ev.outcome == Outcome.CONCLUSIVE:
                assert ev.bob_basis == 1 - ev.alice_bit

    def test_single_pulse_frequencies_match_closed_form(self):
        params = q.ProtocolParams(theta=math.pi / 3, mu=1.0, eta_B=0.5, eta_C=1.0)
        rng = np.random.default_rng(2)
        n = 60_000
        events = [simulate_pulse(params, 0.3, rng) for _ in range(n)]
        vac = sum(e.outcome == Outcome.VACUUM for e in events)
        assert abs(vac - n * 0.5) < 4 * math.sqrt(n * 0.25)
        basis0 = [e for e in events if e.bob_basis == 0]
        con = sum(e.outcome == Outcome.CONCLUSIVE for e in basis0)
        p = q.p_conclusive(0, math.pi / 3, 0.3, 0.5)
        assert abs(con / len(basis0) - p) < 4 * binomial_se(p, len(basis0))


def _controller_off_log(eps, n_pulses, eta=1.0, seed=0):
    params = q.ProtocolParams(theta=math.pi / 3, f=1e6, mu=1.0, eta_B=eta, eta_C=1.0)
    res = run_transmission(params, NoiseTrajectory.constant(eps), NoFeedback(),
                           n_pulses / params.f, seed)
    return params, res


class TestRunTransmission:

    def test_pulse_count_and_vacuum_rate(self):
        params, res = _controller_off_log(0.0, 400_000, eta=0.3)
        assert res.n_pulses == 400_000
        n_vac = res.n_pulses - res.n_detected
        mean, sd = res.n_pulses * 0.7, math.sqrt(res.n_pulses * 0.21)
        assert abs(n_vac - mean) < 4 * sd
        assert res.events.pulse_index.max() < res.n_pulses
        assert np.all(np.diff(res.events.pulse_index) > 0)

    def test_eta_one_detects_every_pulse(self):
        _, res = _controller_off_log(0.0, 10_000)
        np.testing.assert_array_equal(res.events.pulse_index, np.arange(10_000))

    @pytest.mark.parametrize("eps", [0.0, 0.7, -2.0])
    def test_conditional_frequencies(self, eps):
        _, res = _controller_off_log(eps, 400_000, seed=11)
        ev = res.events
        for k in (0, 1):
            m = ev.bob_basis == k
            p = q.p_conclusive(k, math.pi / 3, eps, 1.0)
            freq = np.mean(ev.outcome[m] == Outcome.CONCLUSIVE)
            assert abs(freq - p) < 4 * binomial_se(p, m.sum())

    def test_no_op_controller_ratio_matches_control_function(self):
        from b92feedback.feedback import control_function
        c = 0.4
        _, res = _controller_off_log(c, 1_000_000, seed=5)
        ev = res.events
        m = ev.bob_basis == 0
        n_con = np.sum(ev.outcome[m] == Outcome.CONCLUSIVE)
        n_inc = np.sum(ev.outcome[m] == Outcome.INCONCLUSIVE)
        p = q.p_conclusive(0, math.pi / 3, c)
        # delta method: SE(R) = SE(p_hat) / p^2
        se = binomial_se(p, m.sum()) / p ** 2
        assert abs(n_inc / n_con - control_function(0, math.pi / 3, c)) < 3 * se

    def test_fig3_detection_rate(self):
        params = q.ProtocolParams()
        res = run_transmission(params, NoiseTrajectory.constant(), NoFeedback(), 1.0, 3,
                               keep_events=False)
        assert res.n_pulses == 2_000_000
        assert abs(res.n_detected - 1e4) < 4 * math.sqrt(1e4)
        half = run_transmission(params, NoiseTrajectory.constant(), NoFeedback(), 0.5, 3,
                                keep_events=False)
        assert abs(half.n_detected - 5e3) < 4 * math.sqrt(5e3)

    def test_determinism(self):
        params = q.ProtocolParams()
        traj = NoiseTrajectory.linear(0.05)
        a = run_transmission(params, traj, FeedbackConfig().make_controller(), 2.0, 99)
        b = run_transmission(params, traj, FeedbackConfig().make_controller(), 2.0, 99)
        assert a.kicks == b.kicks
        for col in EventLog.COLUMNS:
            np.testing.assert_array_equal(getattr(a.events, col), getattr(b.events, col))

    def test_batched_equals_per_event_feedback(self):
        params = q.ProtocolParams()
        traj = NoiseTrajectory.linear(0.05)
        ctrl = FeedbackConfig(window=500).make_controller()
        res = run_transmission(params, traj, ctrl, 1.0, 4)
        replay = FeedbackConfig(window=500).make_controller()
        kicks = []
        for i in range(len(res.events)):
            e = res.events[i]
            k = replay.offer_event(e.bob_basis, e.outcome, e.time)
            if k is not None:
                kicks.append(k)
        assert kicks == res.kicks
        # the residual each event saw is the correction in force at that time
        times = np.array([k.time_s for k in kicks])
        corr = np.concatenate([[0.0], [k.applied_correction for k in kicks]])
        idx = np.searchsorted(times, res.events.time, side="left")
        expected = np.angle(np.exp(1j * (res.events.true_eps - corr[idx])))
        np.testing.assert_allclose(res.events.residual_eps, expected, atol=1e-12)

    def test_bit_error_frequency(self):
        eps = 0.2
        _, res = _controller_off_log(eps, 2_000_000, seed=8)
        p = (1 - math.cos(eps)) / 4
        assert p == pytest.approx(0.0049833555396895934, rel=1e-12)
        freq = res.events.bit_error.sum() / res.n_pulses
        assert abs(freq - p) < 3 * binomial_se(p, res.n_pulses)

    def test_decoded_bits_at_zero_noise_are_correct(self):
        _, res = _controller_off_log(0.0, 50_000)
        ev = res.events
        con = ev.outcome == Outcome.CONCLUSIVE
        np.testing.assert_array_equal(ev.decoded_bit[con], ev.alice_bit[con])
        assert not ev.bit_error.any()

    def test_controller_is_blind(self):
        for method in (FeedbackController.offer_batch, FeedbackController.offer_event):
            params = set(inspect.signature(method).parameters)
            assert params.isdisjoint({"alice_bit", "alice_bits", "true_eps", "residual"})

    def test_rejects_nonpositive_duration(self):
        with pytest.raises(DomainError):
            run_transmission(q.ProtocolParams(), NoiseTrajectory.constant(), NoFeedback(), 0.0)
