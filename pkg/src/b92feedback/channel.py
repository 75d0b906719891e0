"""Seeded Monte Carlo simulation of a B92 link with a drifting phase reference.

Only non-vacuum pulses are materialized: the gap between consecutive
detections is drawn from a geometric distribution with success probability
``eta``, which is equivalent to drawing a Bernoulli vacuum/non-vacuum flag for
every trigger.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import DomainError, wrap_angle
from .quantum import ProtocolParams, conclusive_given_detection

DEFAULT_CHUNK = 1 << 16


class Outcome(enum.IntEnum):
    VACUUM = 0
    CONCLUSIVE = 1
    INCONCLUSIVE = 2


@dataclass(frozen=True)
class NoiseTrajectory:
    """Deterministic map from time (s) to the true channel misalignment (rad).

    Build instances with :meth:`constant`, :meth:`linear`, :meth:`step` or
    :meth:`piecewise`.  ``steps`` holds ``(time, value)`` pairs: for ``step``
    the misalignment jumps to ``value`` at ``time`` (right-continuous), for
    ``piecewise`` the pairs are knots of a linear interpolation.
    """

    kind: str = "constant"
    offset: float = 0.0
    rate: float = 0.0
    steps: tuple = ()

    KINDS = ("constant", "linear", "step", "piecewise")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise DomainError(f"trajectory kind must be one of {self.KINDS}, got {self.kind!r}")
        steps = tuple((float(t), float(v)) for t, v in self.steps)
        times = [t for t, _ in steps]
        if any(t < 0 for t in times):
            raise DomainError("step times must be non-negative")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise DomainError("step times must be strictly increasing")
        if self.kind == "piecewise" and not steps:
            raise DomainError("piecewise trajectory needs at least one knot")
        object.__setattr__(self, "steps", steps)

    @classmethod
    def constant(cls, value=0.0):
        return cls("constant", offset=value)

    @classmethod
    def linear(cls, rate, offset=0.0):
        return cls("linear", offset=offset, rate=rate)

    @classmethod
    def step(cls, schedule, offset=0.0):
        return cls("step", offset=offset, steps=tuple(schedule))

    @classmethod
    def piecewise(cls, knots):
        return cls("piecewise", steps=tuple(knots))

    @property
    def discontinuities(self):
        """Times at which the trajectory jumps (step kind only)."""
        if self.kind != "step":
            return ()
        return tuple(t for t, _ in self.steps)

    def __call__(self, t):
        return eval_trajectory(self, t)


def eval_trajectory(traj: NoiseTrajectory, t):
    """True misalignment at time ``t`` (scalar or array), wrapped to (-π, π]."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("time must be non-negative")
    if traj.kind == "constant":
        eps = np.full(t.shape, traj.offset)
    elif traj.kind == "linear":
        eps = traj.offset + traj.rate * t
    elif traj.kind == "step":
        if traj.steps:
            times = np.array([s[0] for s in traj.steps])
            values = np.array([traj.offset] + [s[1] for s in traj.steps])
            eps = values[np.searchsorted(times, t, side="right")]
        else:
            eps = np.full(t.shape, traj.offset)
    else:
        times = np.array([s[0] for s in traj.steps])
        values = np.array([s[1] for s in traj.steps])
        eps = np.interp(t, times, values)
    return wrap_angle(eps)


@dataclass(frozen=True)
class DetectionEvent:
    pulse_index: int
    time: float
    alice_bit: int
    bob_basis: int
    outcome: Outcome
    true_eps: float


@dataclass
class EventLog:
    """Columnar record of non-vacuum detections.

    ``residual_eps`` is the misalignment actually seen by Bob after his
    modulator correction; ``true_eps`` is the uncorrected channel value.
    Neither column is ever handed to a controller.
    """

    pulse_index: np.ndarray
    time: np.ndarray
    alice_bit: np.ndarray
    bob_basis: np.ndarray
    outcome: np.ndarray
    true_eps: np.ndarray
    residual_eps: np.ndarray

    COLUMNS = ("pulse_index", "time", "alice_bit", "bob_basis", "outcome",
               "true_eps", "residual_eps")

    @classmethod
    def empty(cls):
        return cls(np.empty(0, np.int64), np.empty(0), np.empty(0, np.int8),
                   np.empty(0, np.int8), np.empty(0, np.int8), np.empty(0), np.empty(0))

    @classmethod
    def concatenate(cls, parts):
        if not parts:
            return cls.empty()
        return cls(*(np.concatenate([getattr(p, c) for p in parts]) for c in cls.COLUMNS))

    def __len__(self):
        return len(self.pulse_index)

    def __getitem__(self, i):
        if isinstance(i, (int, np.integer)):
            return DetectionEvent(int(self.pulse_index[i]), float(self.time[i]),
                                  int(self.alice_bit[i]), int(self.bob_basis[i]),
                                  Outcome(int(self.outcome[i])), float(self.true_eps[i]))
        return EventLog(*(getattr(self, c)[i] for c in self.COLUMNS))

    @property
    def decoded_bit(self):
        """Bob's decoded bit (``k XOR 1``) for conclusive events, -1 otherwise."""
        return np.where(self.outcome == Outcome.CONCLUSIVE, self.bob_basis ^ 1, -1)

    @property
    def bit_error(self):
        """Mask of conclusive events whose decoded bit differs from Alice's."""
        return (self.outcome == Outcome.CONCLUSIVE) & (self.bob_basis == self.alice_bit)


@dataclass
class TransmissionResult:
    n_pulses: int
    n_detected: int
    kicks: list = field(default_factory=list)
    events: EventLog | None = None


def simulate_pulse(params: ProtocolParams, eps_effective, rng, *, pulse_index=0, true_eps=None):
    """Draw the outcome of a single trigger.

    Parameters
    ----------
    params : ProtocolParams
    eps_effective : float
        Residual misalignment after Bob's correction.
    rng : numpy.random.Generator
    pulse_index : int, optional
    true_eps : float, optional
        Recorded on the event for analysis; defaults to ``eps_effective``.
    """
    alice_bit = int(rng.integers(0, 2))
    bob_basis = int(rng.integers(0, 2))
    detected = rng.random() < params.eta
    if not detected:
        outcome = Outcome.VACUUM
    else:
        p_con = conclusive_given_detection(alice_bit, bob_basis, params.theta, eps_effective)
        outcome = Outcome.CONCLUSIVE if rng.random() < p_con else Outcome.INCONCLUSIVE
    return DetectionEvent(pulse_index, pulse_index / params.f, alice_bit, bob_basis, outcome,
                          eps_effective if true_eps is None else float(true_eps))


def run_transmission(params: ProtocolParams, traj: NoiseTrajectory, controller, duration,
                     seed=0, *, keep_events=True, chunk=DEFAULT_CHUNK):
    """Simulate ``floor(f * duration)`` triggers under closed-loop feedback.

    The controller sees only Bob's basis, the outcome class and the detection
    time.  When it asks for a kick after ``n`` more detections, exactly ``n``
    detections are generated before the next correction is read, so the result
    is identical to offering events one at a time.

    Returns
    -------
    TransmissionResult
    """
    if not duration > 0:
        raise DomainError(f"duration must be positive, got {duration!r}")
    rng = np.random.default_rng(seed)
    eta = params.eta
    n_pulses = int(math.floor(params.f * duration))
    parts = []
    kicks = []
    n_detected = 0
    last_index = -1
    if eta == 0:
        return TransmissionResult(n_pulses, 0, kicks, EventLog.empty() if keep_events else None)

    while True:
        pending = controller.pending()
        n = chunk if pending is None else pending
        gaps = rng.geometric(eta, size=n)
        alice_bit = rng.integers(0, 2, size=n, dtype=np.int8)
        bob_basis = rng.integers(0, 2, size=n, dtype=np.int8)
        u = rng.random(n)

        index = last_index + np.cumsum(gaps)
        keep = index < n_pulses
        done = not keep[-1]
        if done:
            m = int(np.count_nonzero(keep))
            index, alice_bit, bob_basis, u = index[:m], alice_bit[:m], bob_basis[:m], u[:m]
            if m == 0:
                break
        last_index = int(index[-1])

        time = index / params.f
        true_eps = eval_trajectory(traj, time)
        residual = wrap_angle(true_eps - controller.correction)
        p_con = conclusive_given_detection(alice_bit, bob_basis, params.theta, residual)
        outcome = np.where(u < p_con, Outcome.CONCLUSIVE, Outcome.INCONCLUSIVE).astype(np.int8)

        kicks.extend(controller.offer_batch(bob_basis, outcome, time))
        n_detected += len(index)
        if keep_events:
            parts.append(EventLog(index.astype(np.int64), time, alice_bit, bob_basis,
                                  outcome, true_eps, residual))
        if done:
            break

    events = EventLog.concatenate(parts) if keep_events else None
    return TransmissionResult(n_pulses, n_detected, kicks, events)
