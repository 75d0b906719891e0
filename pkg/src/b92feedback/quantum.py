"""Closed-form B92 states, the phase-drift rotation and detection probabilities.

All states live on the real slice of the qubit space, written in the
eigenbasis ``{|0_x>, |1_x>}`` of the Pauli X operator.  A rotation about Y
keeps amplitudes real, so a pair of floats is enough for every state used by
the protocol.

The probability functions here are the analytic reference the Monte Carlo
simulator is checked against.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import DomainError, check_bit, check_eta, check_theta

NORM_TOL = 1e-12


@dataclass(frozen=True)
class StateVector:
    """Real amplitudes ``c0|0_x> + c1|1_x>``."""

    c0: float
    c1: float

    def __post_init__(self):
        norm = self.c0 ** 2 + self.c1 ** 2
        if abs(norm - 1.0) > NORM_TOL:
            raise DomainError(f"state is not normalized (|psi|^2 = {norm!r})")

    def as_array(self):
        return np.array([self.c0, self.c1])

    def inner(self, other: "StateVector") -> float:
        return self.c0 * other.c0 + self.c1 * other.c1

    def projector(self) -> "DensityMatrix2":
        return DensityMatrix2(self.c0 * self.c0, self.c0 * self.c1,
                              self.c1 * self.c0, self.c1 * self.c1)


@dataclass(frozen=True)
class DensityMatrix2:
    """Real symmetric 2x2 density matrix in the ``{|0_x>, |1_x>}`` basis."""

    m00: float
    m01: float
    m10: float
    m11: float

    def __post_init__(self):
        if abs(self.m01 - self.m10) > NORM_TOL:
            raise DomainError("density matrix must be symmetric")
        if abs(self.m00 + self.m11 - 1.0) > NORM_TOL:
            raise DomainError("density matrix must have unit trace")
        det = self.m00 * self.m11 - self.m01 * self.m10
        if self.m00 < -NORM_TOL or self.m11 < -NORM_TOL or det < -NORM_TOL:
            raise DomainError("density matrix must be positive semidefinite")

    def as_array(self):
        return np.array([[self.m00, self.m01], [self.m10, self.m11]])

    def expectation(self, state: StateVector) -> float:
        """``<state| rho |state>``."""
        a, b = state.c0, state.c1
        return a * a * self.m00 + a * b * (self.m01 + self.m10) + b * b * self.m11

    def eigenvalues(self):
        return np.linalg.eigvalsh(self.as_array())


def mixture(states) -> DensityMatrix2:
    """Equal-weight mixture of pure states."""
    states = list(states)
    m = sum(np.outer(s.as_array(), s.as_array()) for s in states) / len(states)
    return DensityMatrix2(m[0, 0], m[0, 1], m[1, 0], m[1, 1])


@dataclass(frozen=True)
class ProtocolParams:
    """Source, channel and detector settings of one B92 link.

    Parameters
    ----------
    theta : float
        Angle between the two signal states on the Poincaré sphere, in (0, π/2).
    f : float
        Trigger rate in Hz.
    mu : float
        Mean photon number per pulse.
    eta_B : float
        Detector efficiency in [0, 1].
    eta_C : float
        Channel transmittance in [0, 1].
    """

    theta: float = math.pi / 3
    f: float = 2e6
    mu: float = 0.5
    eta_B: float = 0.1
    eta_C: float = 0.1

    def __post_init__(self):
        check_theta(self.theta)
        if not self.f > 0:
            raise DomainError(f"f must be positive, got {self.f!r}")
        if not self.mu >= 0:
            raise DomainError(f"mu must be non-negative, got {self.mu!r}")
        for name in ("eta_B", "eta_C"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {value!r}")
        if self.eta > 1.0:
            raise DomainError(f"total transmission mu*eta_B*eta_C must not exceed 1, got {self.eta!r}")

    @property
    def eta(self) -> float:
        """Probability that a trigger yields a usable detection.

        Double clicks are not modelled, so this is simply ``mu * eta_B * eta_C``.
        """
        return self.mu * self.eta_B * self.eta_C


def signal_state(j, theta) -> StateVector:
    """Signal state ``cos(θ/2)|0_x> + (-1)^j sin(θ/2)|1_x>`` encoding bit ``j``."""
    j = check_bit(j, "j")
    theta = check_theta(theta)
    return StateVector(math.cos(theta / 2), (-1) ** j * math.sin(theta / 2))


def orthogonal_state(j, theta) -> StateVector:
    """State orthogonal to ``signal_state(j, theta)``."""
    j = check_bit(j, "j")
    theta = check_theta(theta)
    return StateVector(math.sin(theta / 2), -((-1) ** j) * math.cos(theta / 2))


def source_density(theta) -> DensityMatrix2:
    """Alice's average state ``diag(cos²(θ/2), sin²(θ/2))``.

    It is never proportional to the identity on (0, π/2); the eigenvalue gap
    is ``cos θ``.
    """
    theta = check_theta(theta)
    return DensityMatrix2(math.cos(theta / 2) ** 2, 0.0, 0.0, math.sin(theta / 2) ** 2)


def rotation_matrix(eps):
    """Matrix of the phase-drift unitary acting on ``(c0, c1)``.

    The sign convention makes ``rotate(signal_state(0, θ), ε)`` equal to
    ``cos((θ+ε)/2)|0_x> + sin((θ+ε)/2)|1_x>``.
    """
    c, s = math.cos(eps / 2), math.sin(eps / 2)
    return np.array([[c, -s], [s, c]])


def rotate(state: StateVector, eps) -> StateVector:
    c, s = math.cos(eps / 2), math.sin(eps / 2)
    c0 = c * state.c0 - s * state.c1
    c1 = s * state.c0 + c * state.c1
    # re-normalize away the last-ulp drift so StateVector's check never trips
    n = math.hypot(c0, c1)
    return StateVector(c0 / n, c1 / n)


def drifted_state(j, theta, eps) -> StateVector:
    """Signal state ``j`` after a channel misalignment ``eps``, in closed form."""
    j = check_bit(j, "j")
    theta = check_theta(theta)
    if j == 0:
        return StateVector(math.cos((theta + eps) / 2), math.sin((theta + eps) / 2))
    return StateVector(math.cos((theta - eps) / 2), -math.sin((theta - eps) / 2))


def drifted_density(theta, eps) -> DensityMatrix2:
    """Bob's average received state for equiprobable bits."""
    return mixture([drifted_state(0, theta, eps), drifted_state(1, theta, eps)])


def _basis_term(k, theta, eps):
    sign = 1.0 if k == 0 else -1.0
    return np.cos(eps) + np.cos(2 * theta - sign * eps)


def p_inconclusive(k, theta, eps, eta=1.0):
    """Probability of an inconclusive click when Bob measures in basis ``k``.

    ``eps`` may be an array; the result then broadcasts.
    """
    k = check_bit(k, "k")
    theta = check_theta(theta)
    eta = check_eta(eta)
    return eta * (2.0 + _basis_term(k, theta, eps)) / 4.0


def p_conclusive(k, theta, eps, eta=1.0):
    """Probability of a conclusive click when Bob measures in basis ``k``."""
    k = check_bit(k, "k")
    theta = check_theta(theta)
    eta = check_eta(eta)
    return eta * (2.0 - _basis_term(k, theta, eps)) / 4.0


def born_probabilities(k, theta, eps, eta=1.0):
    """``(P_inc, P_con)`` for basis ``k`` evaluated from the state vectors.

    Independent of the closed forms in :func:`p_inconclusive` and
    :func:`p_conclusive`; used to cross-check them.
    """
    rho = drifted_density(theta, eps)
    eta = check_eta(eta)
    return (eta * rho.expectation(signal_state(k, theta)),
            eta * rho.expectation(orthogonal_state(k, theta)))


def conclusive_given_detection(alice_bit, bob_basis, theta, eps):
    """Born probability that a detected pulse is conclusive, vectorized.

    Evaluates ``|<φ̄_k|φ̃_j>|²`` for arrays of Alice bits ``j``, Bob bases
    ``k`` and residual misalignments ``eps``.
    """
    alice_bit = np.asarray(alice_bit)
    bob_basis = np.asarray(bob_basis)
    eps = np.asarray(eps, dtype=float)
    sj = 1.0 - 2.0 * alice_bit          # (-1)^j
    sk = 1.0 - 2.0 * bob_basis          # (-1)^k
    half = (theta + sj * eps) / 2.0
    # drifted state: (cos(half), sj*sin(half)); orthogonal: (sin(θ/2), -sk*cos(θ/2))
    amp = np.sin(theta / 2) * np.cos(half) - sk * sj * np.cos(theta / 2) * np.sin(half)
    return amp * amp
