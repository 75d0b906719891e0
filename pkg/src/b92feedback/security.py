"""Error rates, secure gain and the largest misalignment that still yields key.

The phase-error rate bound that enters the gain comes from an external
optimization that is not reproduced here.  Instead :data:`BOUNDS` offers two
simple strategies, and any callable
``bound(lambda_bit, lambda_con, theta) -> lambda_ph_bar`` can be plugged in.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import DomainError, check_eta, check_theta

#: Threshold reported for the optimized phase-error bound at theta = π/3.
#: Kept for comparison only; the optimized bound is not implemented.
REFERENCE_OPTIMIZED_THRESHOLD_RAD = 0.27646


class UndefinedGainError(ValueError):
    """Gain requested with a zero conclusive-count rate."""


class NoPositiveGainError(ValueError):
    """No misalignment gives a positive gain for the requested setup."""


def lambda_bit(eps, eta=1.0):
    """Bit-error rate per pulse, ``eta (1 - cos eps) / 4``; independent of theta."""
    eta = check_eta(eta)
    return eta * (1.0 - np.cos(eps)) / 4.0


def lambda_con(theta, eps, eta=1.0):
    """Conclusive-count rate per pulse, ``eta (1 - cos eps cos²theta) / 2``."""
    theta = check_theta(theta)
    eta = check_eta(eta)
    return eta * (1.0 - np.cos(eps) * math.cos(theta) ** 2) / 2.0


def binary_entropy(x):
    """Shannon entropy in bits of a biased coin, with ``h(0) = h(1) = 0``."""
    x = np.asarray(x, dtype=float)
    if np.any((x < 0) | (x > 1)) or np.any(np.isnan(x)):
        raise DomainError("binary entropy argument must lie in [0, 1]")
    inner = (x > 0) & (x < 1)
    xs = np.where(inner, x, 0.5)
    h = np.where(inner, -xs * np.log2(xs) - (1 - xs) * np.log2(1 - xs), 0.0)
    return float(h) if h.ndim == 0 else h


def naive_bound(lambda_bit, lambda_con, theta):
    """Phase errors as frequent as bit errors."""
    return lambda_bit


def worst_case_bound(lambda_bit, lambda_con, theta):
    """Phase-error ratio pinned at 1/2, where its entropy penalty is maximal.

    Falls back to the bit-error rate when that is already larger, so the
    bound never drops below ``lambda_bit``.
    """
    return max(lambda_con / 2.0, lambda_bit)


BOUNDS = {"naive": naive_bound, "worst-case": worst_case_bound}


def get_bound(bound):
    if callable(bound):
        return bound
    try:
        return BOUNDS[bound]
    except KeyError:
        raise DomainError(f"unknown phase-error bound {bound!r}; choose from {sorted(BOUNDS)}") from None


@dataclass(frozen=True)
class SecurityRates:
    """Per-pulse rates entering the secure gain.

    ``lambda_ph_bar`` and ``gain`` stay ``None`` for rates Bob estimated on
    his own, which carry only the bit-error and conclusive-count rates.
    """

    lambda_bit: float
    lambda_con: float
    lambda_ph_bar: float | None = None
    gain: float | None = None

    def __post_init__(self):
        if self.lambda_bit < 0 or self.lambda_bit > self.lambda_con + 1e-15:
            raise DomainError("rates must satisfy 0 <= lambda_bit <= lambda_con")


def secure_gain(rates: SecurityRates):
    """Secret bits per prepared qubit; negative values mean no key."""
    if rates.lambda_con <= 0:
        raise UndefinedGainError("gain is undefined when the conclusive rate is zero")
    if rates.lambda_ph_bar is None:
        raise ValueError("secure_gain needs a phase-error bound")
    con = rates.lambda_con
    # clip away rounding just above 1
    x_bit = min(rates.lambda_bit / con, 1.0)
    x_ph = min(rates.lambda_ph_bar / con, 1.0)
    return con * (1.0 - binary_entropy(x_bit) - binary_entropy(x_ph))


def rates_at(theta, eps, eta=1.0, bound="naive"):
    """Complete :class:`SecurityRates` (gain included) at a given misalignment."""
    bound = get_bound(bound)
    lb = float(lambda_bit(eps, eta))
    lc = float(lambda_con(theta, eps, eta))
    lph = float(bound(lb, lc, theta))
    rates = SecurityRates(lb, lc, lph)
    return SecurityRates(lb, lc, lph, secure_gain(rates))


def has_positive_gain(theta, eps, eta=1.0, bound="naive"):
    return rates_at(theta, eps, eta, bound).gain > 0


def gain_threshold(theta, bound="naive", *, eta=1.0, tol=1e-5, scan_points=2048):
    """Largest ``|eps|`` below which the gain stays positive.

    The sign of the gain does not depend on ``eta``.  A coarse scan of
    ``[0, π)`` locates the first sign change and bisection narrows it to
    ``tol``.

    Raises
    ------
    NoPositiveGainError
        If the gain is not positive at zero misalignment.
    """
    theta = check_theta(theta)

    def gain(e):
        return rates_at(theta, e, eta, bound).gain

    if not gain(0.0) > 0:
        raise NoPositiveGainError(f"gain is not positive at zero misalignment (theta={theta!r})")
    grid = np.linspace(0.0, math.pi, scan_points, endpoint=False)
    lo = 0.0
    hi = None
    for e in grid[1:]:
        if gain(e) > 0:
            lo = e
        else:
            hi = e
            break
    if hi is None:
        return math.pi
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if gain(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def estimate_rates_from_eps(eps_hat, theta, eta=1.0):
    """Bit-error and conclusive rates from Bob's own misalignment estimate.

    No data from Alice is needed: both rates are closed-form functions of the
    angle, so substituting the estimate is enough.
    """
    return SecurityRates(float(lambda_bit(eps_hat, eta)), float(lambda_con(theta, eps_hat, eta)))
