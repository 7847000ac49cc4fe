"""Spectral analysis of the sign-changing transmission corner.

The model problem is the scalar equation div(sigma grad u) = -f posed on an
annulus sector {delta < r < 1, 0 < theta < pi} whose coefficient sigma takes a
positive value sigma_plus on the outer sector {pi/4 < theta < pi} and a
negative value sigma_minus on the inner sector {0 < theta < pi/4}.  Separation
of variables at the corner produces power-law solutions r^lambda phi(theta),
and the contrast

    kappa = sigma_minus / sigma_plus  < 0

decides the character of the exponent set.  Inside the critical interval
kappa in (-1, -1/3) a conjugate pair of purely imaginary exponents +-i*mu
appears.  The positive number mu solves the dispersion relation

    D(mu) = sigma_minus * coth(mu*pi/4) + sigma_plus * coth(3*mu*pi/4) = 0,

equivalently cosh(mu*pi/2) = (1 - kappa) / (2*(1 + kappa)), which gives the
closed form

    mu = (2/pi) * acosh((1 - kappa) / (2*(1 + kappa))).

The corresponding angular profile is

    phi(theta) = c_phi * sinh(mu*theta) / sinh(mu*pi/4)          on [0, pi/4],
    phi(theta) = c_phi * sinh(mu*(pi - theta)) / sinh(3*mu*pi/4) on [pi/4, pi],

normalized so that mu * int_0^pi sigma(theta) * phi(theta)^2 dtheta = 1 with
c_phi > 0.  The oscillating modes r^(+-i*mu) phi(theta) neither decay nor grow
toward the corner; when the corner is rounded at radius delta they reflect,
and the reflected wave re-enters the matching system.  The system degenerates
on the geometric sequence of resonant radii

    delta_n = exp(-n*pi/mu),    n = 1, 2, ...

between which lies the "safe" set where the matched expansion has uniformly
bounded gauges.  Everything in this module is closed-form or 1-D
root-finding; no discretization enters.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .errors import (
    DomainError,
    NormalizationError,
    RegimeError,
    ResonanceError,
)

__all__ = [
    "Contrast",
    "Regime",
    "SpectralData",
    "SafeSetParams",
    "MatchingData",
    "classify_contrast",
    "mu_dispersion",
    "mu_closed_form",
    "spectral_data",
    "phi_normalization",
    "phi_eval",
    "lambda_set",
    "resonance_deltas",
    "safe_set_contains",
    "matching_solve",
    "gauge_first_order",
]

#: Tolerance for recognizing the excluded limit contrasts -1 and -1/3.
LIMIT_TOL = 1e-14

#: Matching denominators smaller than this are treated as resonant.
RESONANCE_TOL = 1e-9


@dataclass(frozen=True)
class Contrast:
    """Coefficient pair (sigma_plus > 0, sigma_minus < 0) of the two sectors."""

    sigma_plus: float
    sigma_minus: float

    def __post_init__(self):
        if not (self.sigma_plus > 0):
            raise ValueError(f"sigma_plus must be > 0, got {self.sigma_plus}")
        if not (self.sigma_minus < 0):
            raise ValueError(f"sigma_minus must be < 0, got {self.sigma_minus}")

    @property
    def kappa(self) -> float:
        """Contrast ratio sigma_minus / sigma_plus (always negative)."""
        return self.sigma_minus / self.sigma_plus

    @classmethod
    def from_kappa(cls, kappa: float, sigma_plus: float = 1.0) -> "Contrast":
        return cls(sigma_plus, kappa * sigma_plus)


class Regime(Enum):
    """Position of the contrast relative to the critical interval (-1, -1/3)."""

    CRITICAL_INTERVAL = "critical-interval"
    FREDHOLM_OUTSIDE = "fredholm-outside"
    LIMIT_MINUS_ONE = "limit-minus-one"
    LIMIT_MINUS_THIRD = "limit-minus-third"


def classify_contrast(contrast: Contrast) -> Regime:
    """Classify kappa against the critical interval.

    The limit values -1 and -1/3 (within LIMIT_TOL) are flagged separately:
    at both of them the transmission operator leaves the Fredholm framework
    and none of the spectral quantities below are defined.
    """
    kappa = contrast.kappa
    if abs(kappa + 1.0) <= LIMIT_TOL:
        return Regime.LIMIT_MINUS_ONE
    if abs(kappa + 1.0 / 3.0) <= LIMIT_TOL:
        return Regime.LIMIT_MINUS_THIRD
    if -1.0 < kappa < -1.0 / 3.0:
        return Regime.CRITICAL_INTERVAL
    return Regime.FREDHOLM_OUTSIDE


def _require_critical(contrast: Contrast, what: str) -> None:
    regime = classify_contrast(contrast)
    if regime is not Regime.CRITICAL_INTERVAL:
        raise RegimeError(
            f"{what} requires kappa in (-1, -1/3); "
            f"kappa = {contrast.kappa:.6g} is {regime.value}"
        )


def _dispersion(mu: float, contrast: Contrast) -> float:
    # coth through 1/tanh: tanh never overflows, so this is safe for any mu > 0
    return contrast.sigma_minus / math.tanh(mu * math.pi / 4.0) + (
        contrast.sigma_plus / math.tanh(3.0 * mu * math.pi / 4.0)
    )


def mu_dispersion(contrast: Contrast) -> float:
    """Positive root of the dispersion relation D(mu) = 0, by bracketed root-finding.

    D is negative as mu -> 0+ (it behaves like (4/(pi*mu))*(sigma_minus +
    sigma_plus/3)) and tends to sigma_plus + sigma_minus > 0 as mu -> inf, so
    inside the critical interval a sign change is guaranteed; the root is
    unique because the relation is equivalent to the strictly monotone
    condition cosh(mu*pi/2) = (1-kappa)/(2*(1+kappa)).
    """
    _require_critical(contrast, "mu_dispersion")
    lo = 1e-8
    while _dispersion(lo, contrast) >= 0.0:
        lo *= 0.5
        if lo < 1e-300:
            raise RegimeError("dispersion relation has no sign change near 0")
    hi = 1.0
    while _dispersion(hi, contrast) <= 0.0:
        hi *= 2.0
        if hi > 1e6:
            raise RegimeError("dispersion relation has no sign change at scale")
    mu = brentq(_dispersion, lo, hi, args=(contrast,), xtol=1e-14, rtol=8.9e-16)
    return float(mu)


def mu_closed_form(contrast: Contrast) -> float:
    """Singular exponent via mu = (2/pi)*acosh((1-kappa)/(2*(1+kappa))).

    This is the real branch of the complex logarithm form of the exponent;
    it satisfies cosh(mu*pi/2) = (1-kappa)/(2*(1+kappa)) exactly.
    """
    _require_critical(contrast, "mu_closed_form")
    kappa = contrast.kappa
    arg = (1.0 - kappa) / (2.0 * (1.0 + kappa))
    # inside the open interval arg > 1 strictly
    return float(2.0 / math.pi * math.acosh(arg))


def phi_normalization(mu: float, contrast: Contrast) -> float:
    """Positive scale c_phi with mu * int_0^pi sigma(theta) phi(theta)^2 dtheta = 1.

    Uses the antiderivative int sinh(mu t)^2 dt = sinh(2 mu t)/(4 mu) - t/2 on
    each sector.  Raises NormalizationError when the weighted integral is not
    positive (which cannot happen for mu solving the dispersion relation, but
    can for arbitrary mu / coefficient combinations).
    """
    if not mu > 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    i_minus = math.sinh(mu * math.pi / 2.0) / (4.0 * mu) - math.pi / 8.0
    i_plus = math.sinh(3.0 * mu * math.pi / 2.0) / (4.0 * mu) - 3.0 * math.pi / 8.0
    weighted = contrast.sigma_minus * i_minus / math.sinh(mu * math.pi / 4.0) ** 2 + (
        contrast.sigma_plus * i_plus / math.sinh(3.0 * mu * math.pi / 4.0) ** 2
    )
    if not weighted > 0.0:
        raise NormalizationError(
            f"weighted profile integral is {mu * weighted:.6g} <= 0; "
            "no positive normalization exists"
        )
    return 1.0 / math.sqrt(mu * weighted)


@dataclass(frozen=True)
class SpectralData:
    """Contrast together with its singular exponent and normalized profile scale."""

    contrast: Contrast
    mu: float
    c_phi: float


def spectral_data(contrast: Contrast) -> SpectralData:
    """Assemble SpectralData for a critical-interval contrast."""
    mu = mu_closed_form(contrast)
    return SpectralData(contrast=contrast, mu=mu, c_phi=phi_normalization(mu, contrast))


def phi_eval(theta, spectral: SpectralData):
    """Evaluate the normalized angular profile phi at theta in [0, pi].

    Accepts scalars or arrays; raises DomainError if any angle leaves [0, pi]
    (beyond a tiny rounding slack).
    """
    th = np.asarray(theta, dtype=float)
    slack = 1e-12
    if np.any(th < -slack) or np.any(th > math.pi + slack):
        raise DomainError("theta outside [0, pi]")
    th = np.clip(th, 0.0, math.pi)
    mu = spectral.mu
    minus = np.sinh(mu * th) / math.sinh(mu * math.pi / 4.0)
    plus = np.sinh(mu * (math.pi - th)) / math.sinh(3.0 * mu * math.pi / 4.0)
    out = spectral.c_phi * np.where(th <= math.pi / 4.0, minus, plus)
    if np.isscalar(theta) or np.ndim(theta) == 0:
        return float(out)
    return out


def lambda_set(contrast: Contrast, re_bound: float) -> list[complex]:
    """All singular exponents with |Re lambda| <= re_bound, sorted by (Re, Im).

    The exponent set is (2Z \\ {0}) united with {+-i*mu + 4k : k in Z}: the
    non-zero even integers from the Dirichlet sector problem and two lattices
    of complex exponents anchored at the oscillating pair +-i*mu.
    """
    _require_critical(contrast, "lambda_set")
    if re_bound < 0:
        raise ValueError("re_bound must be >= 0")
    mu = mu_closed_form(contrast)
    members: set[complex] = set()
    n = 2
    while n <= re_bound:
        members.add(complex(n, 0.0))
        members.add(complex(-n, 0.0))
        n += 2
    k = 0
    while 4 * k <= re_bound:
        for re in {4.0 * k, -4.0 * k}:
            members.add(complex(re, mu))
            members.add(complex(re, -mu))
        k += 1
    return sorted(members, key=lambda z: (z.real, z.imag))


def resonance_deltas(contrast: Contrast, n_max: int) -> list[float]:
    """Resonant inner radii delta_n = exp(-n*pi/mu) for n = 1..n_max (decreasing)."""
    _require_critical(contrast, "resonance_deltas")
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    mu = mu_closed_form(contrast)
    return [math.exp(-n * math.pi / mu) for n in range(1, n_max + 1)]


@dataclass(frozen=True)
class SafeSetParams:
    """Margin alpha, family anchor delta_star and exponent mu of the safe set.

    The safe set is the union over integers k of the closed log-intervals
    [delta_star * e^((k+alpha)pi/mu), delta_star * e^((k+1-alpha)pi/mu)].
    """

    alpha: float
    delta_star: float
    mu: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 0.5):
            raise ValueError(f"alpha must be in (0, 1/2), got {self.alpha}")
        if not (self.delta_star > 0.0):
            raise ValueError(f"delta_star must be > 0, got {self.delta_star}")
        if not (self.mu > 0.0):
            raise ValueError(f"mu must be > 0, got {self.mu}")


def safe_set_contains(delta: float, params: SafeSetParams) -> bool:
    """Whether delta lies in the safe set (fractional-position test).

    delta is safe iff frac(mu * ln(delta/delta_star) / pi) lies in
    [alpha, 1-alpha].  Equivalently |1 - (delta/delta_star)^(2i*mu)| >=
    2*sin(pi*alpha); the interval form is the one implemented.
    """
    if not delta > 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    position = params.mu * math.log(delta / params.delta_star) / math.pi
    frac = position - math.floor(position)
    return params.alpha <= frac <= 1.0 - params.alpha


@dataclass(frozen=True)
class MatchingData:
    """Constants of the two-scale matching system.

    c0_delta and C0_delta are the oscillating-mode coefficients of the outer
    and inner source expansions; c_zeta and C_z are the reflection constants
    of the outer kernel element and the inner profile (both of modulus 1 when
    populated from the theory).
    """

    c0_delta: complex
    C0_delta: complex
    c_zeta: complex
    C_z: complex


def _power_imu(delta: float, mu: float, order: int = 1) -> complex:
    """delta^(i*mu*order) evaluated as exp(i*mu*order*ln delta)."""
    return cmath.exp(1j * mu * order * math.log(delta))


def matching_solve(data: MatchingData, delta: float, mu: float) -> tuple[complex, complex]:
    """Solve the 2x2 matching system for the gauge pair (a, A).

    The equations are

        c0_delta + a*c_zeta = A*delta^(-i mu)
        a = (C0_delta + A*C_z) * delta^(i mu)

    solvable iff delta^(-2 i mu) != c_zeta*C_z; the closed-form solution is

        a = (c0_delta*C_z*delta^(2 i mu) + C0_delta*delta^(i mu)) / d
        A = (C0_delta*c_zeta*delta^(2 i mu) + c0_delta*delta^(i mu)) / d

    with d = 1 - c_zeta*C_z*delta^(2 i mu).  Raises ResonanceError when |d|
    falls below RESONANCE_TOL.
    """
    if not (0.0 < delta):
        raise ValueError(f"delta must be > 0, got {delta}")
    if not mu > 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    p1 = _power_imu(delta, mu)
    p2 = _power_imu(delta, mu, order=2)
    denom = 1.0 - data.c_zeta * data.C_z * p2
    if abs(denom) < RESONANCE_TOL:
        raise ResonanceError(
            f"matching system singular: |1 - c_zeta*C_z*delta^(2i mu)| = {abs(denom):.3e}"
        )
    a = (data.c0_delta * data.C_z * p2 + data.C0_delta * p1) / denom
    big_a = (data.C0_delta * data.c_zeta * p2 + data.c0_delta * p1) / denom
    return a, big_a


def gauge_first_order(
    c0: complex, C_z: complex, delta: float, mu: float, delta_star: float
) -> tuple[complex, complex]:
    """Leading-order gauges of the matched expansion.

        a(delta) = c0 * C_z * delta^(2 i mu) / (1 - (delta/delta_star)^(2 i mu))
        A(delta) = c0 * delta^(i mu)        / (1 - (delta/delta_star)^(2 i mu))

    The denominator vanishes on the resonant family delta_star * e^(-k pi/mu);
    within the safe set of margin alpha it is bounded below by 2*sin(pi*alpha),
    which gives |a| + |A| <= (1 + |C_z|) |c0| / (2 sin(pi*alpha)).  Raises
    ResonanceError when |denominator| < RESONANCE_TOL.
    """
    if not delta > 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    if not delta_star > 0:
        raise ValueError(f"delta_star must be > 0, got {delta_star}")
    if not mu > 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    phase = cmath.exp(2j * mu * math.log(delta / delta_star))
    denom = 1.0 - phase
    if abs(denom) < RESONANCE_TOL:
        raise ResonanceError(
            f"resonant inner radius: |1 - (delta/delta_star)^(2i mu)| = {abs(denom):.3e}"
        )
    a = c0 * C_z * _power_imu(delta, mu, order=2) / denom
    big_a = c0 * _power_imu(delta, mu) / denom
    return a, big_a
