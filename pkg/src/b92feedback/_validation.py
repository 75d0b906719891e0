"""Shared argument checks and angle helpers."""
import math

import numpy as np


class DomainError(ValueError):
    """Raised when a physical parameter falls outside its allowed range."""


def check_theta(theta):
    theta = float(theta)
    if not 0.0 < theta < math.pi / 2:
        raise DomainError(f"theta must lie in (0, π/2), got {theta!r}")
    return theta


def check_eta(eta):
    eta = float(eta)
    if not 0.0 < eta <= 1.0:
        raise DomainError(f"eta must lie in (0, 1], got {eta!r}")
    return eta


def check_bit(value, name="bit"):
    if value not in (0, 1):
        raise DomainError(f"{name} must be 0 or 1, got {value!r}")
    return int(value)


def wrap_angle(x):
    """Wrap angles to the half-open interval (-π, π].

    Works on scalars and arrays; scalars come back as ``float``.
    """
    w = math.pi - np.mod(math.pi - np.asarray(x, dtype=float), 2 * math.pi)
    # np.mod can round up to exactly 2π for tiny negative arguments
    w = np.where(w <= -math.pi, math.pi, w)
    if np.ndim(w) == 0:
        return float(w)
    return w
