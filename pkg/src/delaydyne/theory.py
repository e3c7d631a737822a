"""Closed-form reference values and the squeezed-state picture of the record.

All logarithms are natural.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy import integrate, special


class SingularMapping(ArithmeticError):
    """|B| >= 1: the squeezing parameter diverges."""


class NoDelayTheory(ValueError):
    """tau = 0 was passed to a delay formula; use the no-delay references."""


class QuadratureError(ArithmeticError):
    def __init__(self, message, abserr):
        super().__init__(f"{message} (achieved abserr={abserr:.3g})")
        self.abserr = abserr


@dataclass(frozen=True)
class SqueezeParams:
    beta: complex
    zeta: complex


def squeeze_params(A: complex, B: complex, v: float = 1.0) -> SqueezeParams:
    """Squeezed state ``|beta, zeta>`` whose overlap with the input gives P(A, B)."""
    abs_b = abs(B)
    if abs_b >= 1.0 or abs_b >= v:
        raise SingularMapping(f"|B| = {abs_b} >= 1")
    C = A * v + B * A.conjugate()
    # likelihood maximum of the record over coherent amplitudes; the modulus
    # keeps beta covariant under a global phase rotation
    beta = C / (v * v - abs_b * abs_b)
    zeta = 0j if abs_b == 0.0 else -(B / abs_b) * math.atanh(abs_b)
    return SqueezeParams(beta, zeta)


def squeezed_photon_number(p: SqueezeParams) -> float:
    return abs(p.beta) ** 2 + math.sinh(abs(p.zeta)) ** 2


def squeezed_phase_variance(n_p: float, zeta_real: float) -> float:
    """Approximate phase variance of a squeezed state with mean photon number ``n_p``.

    ``zeta_real < 0`` squeezes the phase quadrature.
    """
    if n_p <= 0:
        raise ValueError("n_p must be positive")
    n0 = n_p * math.exp(2.0 * zeta_real)
    return (n0 + 1.0) / (4.0 * n_p * n_p) + 2.0 * special.erfc(math.sqrt(2.0 * n0))


def squeezed_phase_variance_simple(n_p: float, zeta_real: float) -> float:
    """Under-squeezed limit ``e^{2 zeta} / (4 n_p)``."""
    return math.exp(2.0 * zeta_real) / (4.0 * n_p)


def delay_limit(tau: float, n_bar: float) -> float:
    """Lower bound on the introduced phase variance with feedback delay ``tau``."""
    if tau == 0:
        raise NoDelayTheory("tau = 0; use theory_limit_no_delay")
    if not 0.0 < tau <= 1.0 or n_bar <= 0:
        raise ValueError(f"need 0 < tau <= 1 and n_bar > 0, got tau={tau}, n_bar={n_bar}")
    return math.exp(-2.0 * math.atanh(1.0 - tau)) / (4.0 * n_bar)


def delay_limit_asymptotic(tau: float, n_bar: float) -> float:
    return tau / (8.0 * n_bar)


def heterodyne_var(n_bar: float) -> float:
    return 1.0 / (4.0 * n_bar)


def markII_intro_var(n_bar: float) -> float:
    return 1.0 / (8.0 * n_bar ** 1.5)


def theory_limit_no_delay(n_bar: float) -> float:
    return math.log(n_bar) / (4.0 * n_bar * n_bar)


def markI_delay_var(alpha: float, tau: float) -> float:
    """Mark I variance with simplified feedback, first order in alpha*tau."""
    return 1.0 / (4.0 * alpha) + 0.5 * tau


def corrected_limit(inv_n_mean: float, tau: float) -> float:
    """Delay limit using the ensemble mean of 1/n_p instead of 1/n_bar."""
    if inv_n_mean <= 0:
        raise ValueError("inv_n_mean must be positive")
    if tau == 0:
        raise NoDelayTheory("tau = 0")
    return 0.25 * inv_n_mean * math.exp(-2.0 * math.atanh(1.0 - tau))


def perturbation_quadrature(alpha: float, v1: float = 1e-4, epsrel: float = 1e-8) -> float:
    """Correlation of the zeroth- and first-order delay corrections at v = 1.

    Evaluates

        4a int_{v1}^1 log(u)/u e^{8a(sqrt u - 1)} du + int_{v1}^1 2 e^{8a(sqrt u - 1)} / u^1.5 du

    after substituting ``s = 1 - sqrt(u)``, which turns the boundary layer at
    u = 1 into the decaying weight e^{-8 a s} at s = 0.
    """
    if alpha < 10:
        raise ValueError("alpha must be >= 10 for the boundary-layer quadrature")
    if not 0.0 < v1 < 1.0:
        raise ValueError("v1 must lie in (0, 1)")
    rate = 8.0 * alpha
    s_max = 1.0 - math.sqrt(v1)

    def integrand(s):
        w = math.exp(-rate * s)
        return 16.0 * alpha * math.log1p(-s) / (1.0 - s) * w + 4.0 * w / (1.0 - s) ** 2

    # the weight has decayed by e^-60 at s = 60/rate; split there so the
    # adaptive rule resolves the layer instead of the flat tail
    s_split = min(60.0 / rate, s_max)
    total = 0.0
    abserr = 0.0
    for lo, hi in ((0.0, s_split), (s_split, s_max)):
        if hi <= lo:
            continue
        val, err = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=epsrel, limit=200)
        total += val
        abserr += err
    if abserr > max(10 * epsrel * abs(total), 1e-300):
        raise QuadratureError("quadrature did not converge", abserr)
    return total
