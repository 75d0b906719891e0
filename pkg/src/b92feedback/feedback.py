"""Misalignment estimation from conclusive/inconclusive tallies and feedback kicks.

Bob never sees Alice's bits.  What he does see is, per measurement basis
``k``, how many detections were conclusive and how many inconclusive.  Their
ratio depends on the channel misalignment but not on the transmission, so it
can be inverted for the angle:

* fast mode linearizes ``R_0`` around zero misalignment (one basis, cheap,
  valid only inside the monotone window of ``R_0``);
* slow mode matches both ratios at once over the whole circle, which is
  unambiguous.

The estimators follow the scikit-learn API: rows of ``X`` are windows of
tallies ``[n_inc0, n_con0, n_inc1, n_con1]`` and ``predict`` returns one angle
per row (``nan`` where the window carries too little information).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from ._validation import DomainError, check_bit, check_theta, wrap_angle
from .channel import Outcome

INVPHI = (math.sqrt(5) - 1) / 2
TALLY_COLUMNS = ("n_inc0", "n_con0", "n_inc1", "n_con1")


class Abstain(Exception):
    """The current window cannot produce an estimate (no conclusive counts)."""


def control_function(k, theta, eps):
    """Ratio of inconclusive to conclusive probability in basis ``k``.

    Vectorized over ``eps``.
    """
    k = check_bit(k, "k")
    theta = check_theta(theta)
    sign = 1.0 if k == 0 else -1.0
    s = np.cos(eps) + np.cos(2 * theta - sign * np.asarray(eps, dtype=float))
    den = 2.0 - s
    if np.any(den <= 1e-15):
        raise DomainError("control function denominator vanishes")
    r = (2.0 + s) / den
    return float(r) if np.ndim(r) == 0 else r


def control_slope_at_zero(theta):
    """Derivative of ``R_0(theta, ·)`` at zero misalignment."""
    theta = check_theta(theta)
    return 4 * math.sin(2 * theta) / (1 - math.cos(2 * theta)) ** 2


def monotone_window(theta):
    """Open interval of ``eps`` on which ``R_0(theta, eps)`` strictly increases.

    ``R_0`` is an increasing function of ``cos(theta) cos(theta - eps)``, so
    it rises from its minimum at ``theta - π`` to its maximum at ``theta``.
    ``R_1`` mirrors this on the negated interval.
    """
    theta = check_theta(theta)
    return theta - math.pi, theta


@dataclass
class ControlEstimate:
    """Per-basis tallies collected during one feedback window."""

    n_inc: list = field(default_factory=lambda: [0, 0])
    n_con: list = field(default_factory=lambda: [0, 0])

    @classmethod
    def from_row(cls, row):
        n_inc0, n_con0, n_inc1, n_con1 = (int(v) for v in row)
        return cls([n_inc0, n_inc1], [n_con0, n_con1])

    def as_row(self):
        return [self.n_inc[0], self.n_con[0], self.n_inc[1], self.n_con[1]]

    @property
    def total(self):
        return sum(self.n_inc) + sum(self.n_con)

    def ratio(self, k):
        if self.n_con[k] == 0:
            return None
        return self.n_inc[k] / self.n_con[k]

    @property
    def r0_star(self):
        return self.ratio(0)

    @property
    def r1_star(self):
        return self.ratio(1)

    def add(self, basis, outcome):
        if outcome == Outcome.CONCLUSIVE:
            self.n_con[basis] += 1
        elif outcome == Outcome.INCONCLUSIVE:
            self.n_inc[basis] += 1


def _tangent_estimate(r_star, basis, theta):
    setpoint = control_function(0, theta, 0.0)
    slope = control_slope_at_zero(theta)
    # R_1(θ, ε) = R_0(θ, -ε): basis 1 has the opposite slope
    return (r_star - setpoint) / slope * (1.0 if basis == 0 else -1.0)


def estimate_fast(est: ControlEstimate, theta, *, basis=0, max_kick=None):
    """Invert the tangent of the control function at zero misalignment.

    ``basis`` selects ``R_0`` (default), ``R_1`` or ``"mean"`` of both.
    Raises :class:`Abstain` when a required conclusive count is zero.
    """
    bases = (0, 1) if basis == "mean" else (check_bit(basis, "basis"),)
    values = []
    for k in bases:
        r_star = est.ratio(k)
        if r_star is None:
            raise Abstain(f"no conclusive counts in basis {k}")
        values.append(_tangent_estimate(r_star, k, theta))
    eps_hat = sum(values) / len(values)
    if max_kick is not None:
        eps_hat = min(max(eps_hat, -max_kick), max_kick)
    return eps_hat


def golden_section(fun, a, b, tol=1e-10, max_iter=200):
    """Minimize a unimodal scalar function on ``[a, b]``; returns the abscissa."""
    x1 = b - INVPHI * (b - a)
    x2 = a + INVPHI * (b - a)
    f1, f2 = fun(x1), fun(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - INVPHI * (b - a)
            f1 = fun(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + INVPHI * (b - a)
            f2 = fun(x2)
    return 0.5 * (a + b)


def slow_grid(resolution):
    """Uniform grid on (-π, π] with spacing no larger than ``resolution``."""
    if not resolution > 0:
        raise DomainError(f"resolution must be positive, got {resolution!r}")
    n = int(math.ceil(2 * math.pi / resolution))
    return -math.pi + np.arange(1, n + 1) * (2 * math.pi / n)


def _match_both(theta, grid, r0_grid, r1_grid, r0_star, r1_star):
    obj = np.abs(r0_grid - r0_star) + np.abs(r1_grid - r1_star)
    best = np.flatnonzero(obj == obj.min())
    i = best[np.argmin(np.abs(grid[best]))]
    step = grid[1] - grid[0]

    def mismatch(e):
        return (abs(control_function(0, theta, e) - r0_star)
                + abs(control_function(1, theta, e) - r1_star))

    x = golden_section(mismatch, grid[i] - step, grid[i] + step, tol=step * 1e-6)
    if mismatch(x) > obj[i]:
        x = grid[i]
    return wrap_angle(x)


def estimate_slow(est: ControlEstimate, theta, resolution=1e-3):
    """Angle whose pair of control functions best matches the measured ratios.

    Scans a uniform grid on (-π, π] for the minimum of
    ``|R_0(ε) - R_0*| + |R_1(ε) - R_1*|`` and refines it with a golden-section
    pass inside the neighbouring cells.  Exact ties on the grid go to the
    smallest ``|ε|``.
    """
    theta = check_theta(theta)
    r0, r1 = est.r0_star, est.r1_star
    if r0 is None or r1 is None:
        raise Abstain("slow estimate needs conclusive counts in both bases")
    grid = slow_grid(resolution)
    return _match_both(theta, grid, control_function(0, theta, grid),
                       control_function(1, theta, grid), r0, r1)


def check_tallies(X):
    """Validate a tally matrix: shape (n, 4), finite, non-negative."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != 4:
        raise ValueError(f"tallies need 4 columns {TALLY_COLUMNS}, got {X.shape[1]}")
    if np.any(X < 0):
        raise ValueError("tallies must be non-negative")
    return X


class _PhaseEstimatorBase(BaseEstimator):

    def fit(self, X=None, y=None):
        """Validate hyper-parameters and precompute the control-function setpoint.

        No data is needed; ``X`` is only checked for shape when given.
        """
        check_theta(self.theta)
        if X is not None:
            X = check_tallies(X)
            self.n_features_in_ = X.shape[1]
        self.setpoint_ = control_function(0, self.theta, 0.0)
        self.slope_ = control_slope_at_zero(self.theta)
        return self

    def predict(self, X):
        """Estimated misalignment per tally row, ``nan`` where abstaining."""
        check_is_fitted(self, "setpoint_")
        X = check_tallies(X)
        out = np.empty(len(X))
        for i, row in enumerate(X):
            try:
                out[i] = self._estimate(ControlEstimate.from_row(row))
            except Abstain:
                out[i] = np.nan
        return out

    def score(self, X, y):
        """Negative mean absolute wrapped error; abstentions count as π."""
        err = np.abs(wrap_angle(self.predict(X) - np.asarray(y, dtype=float)))
        return -float(np.mean(np.where(np.isnan(err), math.pi, err)))


class FastPhaseEstimator(_PhaseEstimatorBase):
    """Tangent inversion of a single control function.

    Parameters
    ----------
    theta : float, default=π/3
        Signal-state angle.
    basis : {0, 1, "mean"}, default=0
        Which control function drives the estimate.
    max_kick : float or None, default=None
        Clamp on the magnitude of a single estimate.
    """

    def __init__(self, theta=math.pi / 3, basis=0, max_kick=None):
        self.theta = theta
        self.basis = basis
        self.max_kick = max_kick

    def fit(self, X=None, y=None):
        if self.basis not in (0, 1, "mean"):
            raise ValueError(f"basis must be 0, 1 or 'mean', got {self.basis!r}")
        if self.max_kick is not None and not self.max_kick > 0:
            raise ValueError("max_kick must be positive")
        self.valid_range_ = monotone_window(self.theta)
        return super().fit(X, y)

    def _estimate(self, est):
        return estimate_fast(est, self.theta, basis=self.basis, max_kick=self.max_kick)


class SlowPhaseEstimator(_PhaseEstimatorBase):
    """Joint inversion of both control functions over the full circle.

    Parameters
    ----------
    theta : float, default=π/3
    resolution : float, default=1e-3
        Coarse grid spacing in radians before golden-section refinement.
    """

    def __init__(self, theta=math.pi / 3, resolution=1e-3):
        self.theta = theta
        self.resolution = resolution

    def fit(self, X=None, y=None):
        super().fit(X, y)
        self.grid_ = slow_grid(self.resolution)
        self.r0_grid_ = control_function(0, self.theta, self.grid_)
        self.r1_grid_ = control_function(1, self.theta, self.grid_)
        return self

    def _estimate(self, est):
        r0, r1 = est.r0_star, est.r1_star
        if r0 is None or r1 is None:
            raise Abstain("slow estimate needs conclusive counts in both bases")
        return _match_both(self.theta, self.grid_, self.r0_grid_, self.r1_grid_, r0, r1)


@dataclass(frozen=True)
class FeedbackConfig:
    """Settings of Bob's correction loop.

    ``window`` counts non-vacuum detections per kick.  It defaults to 5000
    in fast mode and 1000 in slow mode.
    """

    mode: str = "fast"
    window: int | None = None
    theta: float = math.pi / 3
    resolution: float = 1e-3
    max_kick: float | None = None
    basis: object = 0

    def __post_init__(self):
        if self.mode not in ("fast", "slow", "off"):
            raise DomainError(f"mode must be 'fast', 'slow' or 'off', got {self.mode!r}")
        if self.window is None:
            object.__setattr__(self, "window", 1000 if self.mode == "slow" else 5000)
        if int(self.window) != self.window or self.window < 1:
            raise DomainError(f"window must be a positive integer, got {self.window!r}")
        object.__setattr__(self, "window", int(self.window))
        if not self.resolution > 0:
            raise DomainError(f"resolution must be positive, got {self.resolution!r}")
        if self.max_kick is not None and not self.max_kick > 0:
            raise DomainError(f"max_kick must be positive, got {self.max_kick!r}")
        check_theta(self.theta)

    def make_estimator(self):
        if self.mode == "slow":
            return SlowPhaseEstimator(self.theta, self.resolution)
        return FastPhaseEstimator(self.theta, self.basis, self.max_kick)

    def make_controller(self):
        if self.mode == "off":
            return NoFeedback()
        return FeedbackController(self.make_estimator(), self.window)


@dataclass(frozen=True)
class KickRecord:
    kick_index: int
    time_s: float
    window_events: int
    r0_star: float | None
    r1_star: float | None
    eps_hat: float | None
    correction_before: float
    applied_correction: float
    abstained: bool


class NoFeedback:
    """Controller that never corrects; Bob's modulator stays at zero."""

    correction = 0.0

    def pending(self):
        return None

    def offer_batch(self, bases, outcomes, times):
        return []

    def offer_event(self, basis, outcome, time):
        return None


class FeedbackController:
    """Bob's windowed correction loop.

    Counts non-vacuum detections per basis.  Once ``window`` of them have
    arrived the estimator is evaluated, the estimate is added to the
    modulator correction and the tallies start over.  If the estimator
    abstains the tallies also start over and the correction is left alone.

    Only Bob-side information (basis, outcome, time) enters this class.
    """

    def __init__(self, estimator, window):
        if window < 1:
            raise DomainError("window must be at least 1")
        self.estimator = estimator.fit()
        self.window = int(window)
        self.correction = 0.0
        self.tally = ControlEstimate()
        self.history = []

    def pending(self):
        """Number of further detections after which the next kick fires."""
        return self.window - self.tally.total

    def _kick(self, time):
        row = np.array([self.tally.as_row()], dtype=float)
        eps_hat = float(self.estimator.predict(row)[0])
        before = self.correction
        abstained = math.isnan(eps_hat)
        if not abstained:
            self.correction = wrap_angle(self.correction + eps_hat)
        record = KickRecord(len(self.history), float(time), self.tally.total,
                            self.tally.r0_star, self.tally.r1_star,
                            None if abstained else eps_hat, before, self.correction,
                            abstained)
        self.history.append(record)
        self.tally = ControlEstimate()
        return record

    def offer_event(self, basis, outcome, time):
        """Feed one detection; returns the :class:`KickRecord` if a kick fired."""
        if outcome == Outcome.VACUUM:
            return None
        self.tally.add(int(basis), outcome)
        if self.tally.total >= self.window:
            return self._kick(time)
        return None

    def offer_batch(self, bases, outcomes, times):
        """Feed detections in order; equivalent to repeated :meth:`offer_event`."""
        bases = np.asarray(bases)
        outcomes = np.asarray(outcomes)
        times = np.asarray(times, dtype=float)
        counted = np.flatnonzero(outcomes != Outcome.VACUUM)
        kicks = []
        start = 0
        while start < len(counted):
            need = self.pending()
            sel = counted[start:start + need]
            code = bases[sel].astype(np.int64) * 2 + (outcomes[sel] == Outcome.CONCLUSIVE)
            n_inc0, n_con0, n_inc1, n_con1 = np.bincount(code, minlength=4)
            self.tally.n_inc[0] += int(n_inc0)
            self.tally.n_con[0] += int(n_con0)
            self.tally.n_inc[1] += int(n_inc1)
            self.tally.n_con[1] += int(n_con1)
            start += len(sel)
            if len(sel) == need:
                kicks.append(self._kick(times[sel[-1]]))
        return kicks
