"""Line solitons, scaling exponents and the constants derived from them.

Everything here is a closed-form expression or a one-dimensional
quadrature.  The numerical solver is checked against these values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize

_QUAD_REL = 1e-12
_TAIL = 1e-14


def _check_p(p: float) -> None:
    if not (2.0 < p < 6.0):
        raise ValueError(f"p must lie in (2, 6), got {p!r}")


def exponents(p: float) -> tuple[float, float]:
    """Return (alpha, beta) = (2/(6-p), (p-2)/(6-p))."""
    _check_p(p)
    return 2.0 / (6.0 - p), (p - 2.0) / (6.0 - p)


@dataclass(frozen=True)
class NonlinearityParams:
    """Exponents, vertex weight and mass of the problem."""

    p: float
    q: float
    tau: float = 1.0
    mu: float = 1.0

    def __post_init__(self) -> None:
        _check_p(self.p)
        if not (2.0 < self.q < 4.0):
            raise ValueError(f"q must lie in (2, 4), got {self.q!r}")
        if not (self.tau >= 0.0 and math.isfinite(self.tau)):
            raise ValueError(f"tau must be a finite non-negative number, got {self.tau!r}")
        if not (self.mu > 0.0 and math.isfinite(self.mu)):
            raise ValueError(f"mu must be positive, got {self.mu!r}")

    @property
    def alpha(self) -> float:
        return exponents(self.p)[0]

    @property
    def beta(self) -> float:
        return exponents(self.p)[1]

    @property
    def theta_p(self) -> float:
        return theta(self.p)

    @property
    def regime(self) -> str:
        """Position of q relative to p/2 + 1: 'below', 'critical' or 'above'."""
        d = self.q - (self.p / 2.0 + 1.0)
        if d < 0:
            return "below"
        if d > 0:
            return "above"
        return "critical"

    @property
    def soliton_level(self) -> float:
        return soliton_energy(self.p, self.mu)

    def with_mu(self, mu: float) -> "NonlinearityParams":
        return NonlinearityParams(self.p, self.q, self.tau, mu)

    def with_tau(self, tau: float) -> "NonlinearityParams":
        return NonlinearityParams(self.p, self.q, tau, self.mu)

    def to_dict(self) -> dict:
        return {"p": self.p, "q": self.q, "tau": self.tau, "mu": self.mu, "regime": self.regime}


def regime_below(p: float, q: float) -> bool:
    """True iff alpha*q < 2*beta + 1."""
    a, b = exponents(p)
    return a * q < 2.0 * b + 1.0


# ---------------------------------------------------------------------------
# the profile phi_1 for a given frequency
# ---------------------------------------------------------------------------


def _sech(y: np.ndarray) -> np.ndarray:
    y = np.abs(y)
    e = np.exp(-y)
    return 2.0 * e / (1.0 + e * e)


def profile(p: float, omega: float, x) -> np.ndarray:
    """Positive even solution of -u'' + omega u = u^{p-1} on the line."""
    c = 0.5 * (p - 2.0) * math.sqrt(omega)
    s2 = _sech(c * np.asarray(x, dtype=float)) ** 2
    return (0.5 * p * omega * s2) ** (1.0 / (p - 2.0))


def _profile_derivative(p: float, omega: float, x) -> np.ndarray:
    c = 0.5 * (p - 2.0) * math.sqrt(omega)
    x = np.asarray(x, dtype=float)
    return -math.sqrt(omega) * np.tanh(c * x) * profile(p, omega, x)


def _cutoff(p: float, omega: float) -> float:
    # phi^2 decays like exp(-2 sqrt(omega) x); pick X with a negligible tail
    X = 10.0 / math.sqrt(omega)
    while float(profile(p, omega, X)) ** 2 / (2.0 * math.sqrt(omega)) > _TAIL * 1e-2:
        X *= 2.0
    return X


def _half_integral(f, X: float) -> float:
    val, _ = integrate.quad(f, 0.0, X, epsabs=0.0, epsrel=_QUAD_REL, limit=400)
    return val


def profile_mass(p: float, omega: float) -> float:
    """Quadrature of the squared profile over the whole line."""
    X = _cutoff(p, omega)
    return 2.0 * _half_integral(lambda x: float(profile(p, omega, x)) ** 2, X)


@lru_cache(maxsize=None)
def soliton_frequency(p: float) -> float:
    """Frequency omega_1 giving the unit-mass profile."""
    _check_p(p)
    lo, hi = 1e-3, 1.0
    while profile_mass(p, lo) > 1.0:
        lo *= 0.1
    while profile_mass(p, hi) < 1.0:
        hi *= 10.0
    root, info = optimize.brentq(
        lambda w: profile_mass(p, w) - 1.0, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps,
        maxiter=200, full_output=True,
    )
    if not info.converged:
        raise RuntimeError(f"frequency root-find failed for p={p}")
    return root


def closed_form_mass(p: float, omega: float) -> float:
    """Mass of the profile from the Beta-function integral of sech powers."""
    a = 4.0 / (p - 2.0)
    c = 0.5 * (p - 2.0) * math.sqrt(omega)
    sech_int = math.sqrt(math.pi) * math.exp(math.lgamma(a / 2.0) - math.lgamma((a + 1.0) / 2.0))
    return (0.5 * p * omega) ** (2.0 / (p - 2.0)) * sech_int / c


def phi1_at_0(p: float) -> float:
    return float(profile(p, soliton_frequency(p), 0.0))


def theta(p: float) -> float:
    """theta_p = -E(phi_1) = omega_1 (6-p) / (2(p+2))."""
    return soliton_frequency(p) * (6.0 - p) / (2.0 * (p + 2.0))


def soliton_eval(p: float, mu: float, x) -> np.ndarray:
    """phi_mu(x) = mu^alpha phi_1(mu^beta x)."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    a, b = exponents(p)
    out = mu**a * profile(p, soliton_frequency(p), mu**b * np.asarray(x, dtype=float))
    return out if np.ndim(out) else float(out)


def soliton_derivative(p: float, mu: float, x) -> np.ndarray:
    a, b = exponents(p)
    return mu ** (a + b) * _profile_derivative(p, soliton_frequency(p), mu**b * np.asarray(x, dtype=float))


def soliton_energy(p: float, mu: float) -> float:
    """Soliton level -theta_p mu^{2 beta + 1}."""
    _, b = exponents(p)
    return -theta(p) * mu ** (2.0 * b + 1.0)


def soliton_energy_quadrature(p: float, mu: float) -> float:
    """E(phi_mu) on the line by adaptive quadrature of the scaled profile."""
    a, b = exponents(p)
    omega = soliton_frequency(p)
    X = _cutoff(p, omega) / mu**b

    def density(x: float) -> float:
        d = float(soliton_derivative(p, mu, x))
        v = float(soliton_eval(p, mu, x))
        return 0.5 * d * d - v**p / p

    return 2.0 * _half_integral(density, X)


def soliton_mass_quadrature(p: float, mu: float) -> float:
    _, b = exponents(p)
    X = _cutoff(p, soliton_frequency(p)) / mu**b
    return 2.0 * _half_integral(lambda x: float(soliton_eval(p, mu, x)) ** 2, X)


def verify_identity_appendixA(p: float) -> float:
    """Residual |theta_p (2 beta + 1) - phi_1(0)^{p-2} / p|."""
    _, b = exponents(p)
    return abs(theta(p) * (2.0 * b + 1.0) - phi1_at_0(p) ** (p - 2.0) / p)


@dataclass(frozen=True)
class LineConstants:
    alpha: float
    beta: float
    theta_p: float
    omega1: float
    phi1_at_0: float

    @classmethod
    def for_p(cls, p: float) -> "LineConstants":
        a, b = exponents(p)
        return cls(a, b, theta(p), soliton_frequency(p), phi1_at_0(p))
