"""Riccati-Hankel functions of complex order from the large-argument expansion.

The pair

    h+-(z) = sqrt(pi z / 2) * H(1,2)_lam(z)

solves  w'' + (1 - (lam^2 - 1/4)/z^2) w = 0  and behaves asymptotically as
outgoing/incoming radial waves.  For |z| well above the order scale the
classical asymptotic series

    h+-(z) = exp(+-i w) * sum_m (+-i)^m a_m(lam) z^-m,
    w      = z - lam pi/2 - pi/4,
    a_m    = prod_{k=1..m} (4 lam^2 - (2k-1)^2) / (8^m m!)

converges superasymptotically: terms first decrease, then diverge.  We sum
until a term falls below the requested tolerance or stops decreasing
(optimal truncation) and surface the first omitted term's magnitude so the
caller can judge the achieved accuracy.

Derivatives come from termwise differentiation,
d/dz [exp(+-i w) z^-m] = exp(+-i w) (+-i z^-m - m z^-m-1).

The pair satisfies the exact Wronskian  h+ (h-)' - h- (h+)' = -2i.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass

_QUARTER_PI = 0.7853981633974483
_HALF_PI = 1.5707963267948966

# |Im(z - lam pi/2)| beyond this would overflow exp() in double precision
_EXPONENT_LIMIT = 700.0


class AsymptoticDomainError(ValueError):
    """Argument too small for the large-argument expansion at this order."""


class AsymptoticOverflowError(OverflowError):
    """exp(+-i w) exceeds double-precision range (deeply closed channel)."""


@dataclass(frozen=True)
class RiccatiHankelPair:
    """Values and z-derivatives of h+ and h- at one (order, argument) point.

    ``terms_used`` counts the series terms actually summed (same for both
    signs); ``truncation_estimate`` is the magnitude of the first omitted
    term of the unit-scale series, a direct estimate of the relative
    truncation error.
    """

    h_plus: complex
    h_minus: complex
    d_plus: complex
    d_minus: complex
    order: complex
    argument: complex
    terms_used: int
    truncation_estimate: float

    def wronskian(self) -> complex:
        """h+ (h-)' - h- (h+)'; exactly -2i in the asymptotic algebra."""
        return self.h_plus * self.d_minus - self.h_minus * self.d_plus


def required_argument(order: complex, z_min: float = 25.0,
                      order_margin: float = 2.0) -> float:
    """Smallest |z| at which the expansion is accepted for this order."""
    a = abs(order)
    return max(z_min, order_margin * (1.0 + a * a))


def riccati_hankel(
    order: complex,
    argument: complex,
    tol: float = 1e-12,
    z_min: float = 25.0,
    order_margin: float = 2.0,
    max_terms: int = 60,
) -> RiccatiHankelPair:
    """Evaluate h+-(argument) and derivatives for complex order.

    Parameters
    ----------
    order : complex
        Hankel order lam (lam = J + 1/2 in the scattering context).
    argument : complex
        Evaluation point; must satisfy |argument| >= required_argument(order)
        and lie in the closed upper half plane (open channels give real
        positive arguments, closed channels purely imaginary ones).
    tol : float
        Target relative truncation of the asymptotic series.
    z_min, order_margin : float
        Validity-domain parameters, |z| >= max(z_min, margin*(1+|lam|^2)).
    max_terms : int
        Hard cap on series terms.

    Raises
    ------
    AsymptoticDomainError
        Below the validity threshold (increase the matching radius).
    AsymptoticOverflowError
        The exponential prefactor overflows (kappa*r beyond ~700).
    """
    lam = complex(order)
    z = complex(argument)
    z_need = required_argument(lam, z_min, order_margin)
    if abs(z) < z_need:
        raise AsymptoticDomainError(
            f"|z| = {abs(z):.6g} below validity threshold {z_need:.6g} for "
            f"order {lam:.6g}; use a larger matching radius"
        )
    if z.imag < -1e-12 * abs(z):
        raise AsymptoticDomainError(
            f"argument must lie in the upper half plane, got {z:.6g}"
        )

    omega = z - lam * _HALF_PI - _QUARTER_PI
    if abs(omega.imag) > _EXPONENT_LIMIT:
        raise AsymptoticOverflowError(
            f"|Im(z - lam pi/2)| = {abs(omega.imag):.4g} exceeds the "
            f"double-precision exponent range"
        )

    four_lam_sq = 4.0 * lam * lam
    inv_z = 1.0 / z

    # running term t_m = a_m z^-m; i^m and (-i)^m phases applied on the fly
    sum_p = 1.0 + 0.0j
    sum_m = 1.0 + 0.0j
    dsum_p = 0.0 + 0.0j  # sum of m * i^m a_m z^-m-1
    dsum_m = 0.0 + 0.0j
    term = 1.0 + 0.0j
    prev_mag = abs(term)
    terms_used = 1
    truncation = prev_mag

    i_pow = (1.0 + 0.0j, 1j, -1.0 + 0.0j, -1j)       # i^m
    mi_pow = (1.0 + 0.0j, -1j, -1.0 + 0.0j, 1j)      # (-i)^m

    for m in range(1, max_terms + 1):
        odd = 2.0 * m - 1.0
        term = term * (four_lam_sq - odd * odd) / (8.0 * m) * inv_z
        mag = abs(term)
        if mag >= prev_mag:
            truncation = mag  # terms stopped decreasing: omit this one
            break
        tp = i_pow[m % 4] * term
        tm = mi_pow[m % 4] * term
        sum_p += tp
        sum_m += tm
        dsum_p += m * tp * inv_z
        dsum_m += m * tm * inv_z
        terms_used += 1
        prev_mag = mag
        truncation = mag * abs(four_lam_sq - (2.0 * m + 1.0) ** 2) / (8.0 * (m + 1.0)) / abs(z)
        if mag < tol:
            break

    exp_p = cmath.exp(1j * omega)
    exp_m = cmath.exp(-1j * omega)
    h_plus = exp_p * sum_p
    h_minus = exp_m * sum_m
    d_plus = exp_p * (1j * sum_p - dsum_p)
    d_minus = exp_m * (-1j * sum_m - dsum_m)
    return RiccatiHankelPair(
        h_plus=h_plus,
        h_minus=h_minus,
        d_plus=d_plus,
        d_minus=d_minus,
        order=lam,
        argument=z,
        terms_used=terms_used,
        truncation_estimate=truncation,
    )
