"""Power-series start of the regular radial solutions at the singular origin.

The potential's 1/r singularity forbids imposing regularity directly at
r = 0; instead each solution is expanded as

    Phi(r) = r^(lam + 1/2) * sum_j u_j r^j            (lam = J + 1/2)

with vector coefficients from the recursion obtained by substituting the
expansion into the radial equation,

    (j+1)(2 lam + j + 1) u_{j+1} = 2 sum_{l<=j} C_l u_{j-l} - 2 E u_{j-1},

where C_l are the Maclaurin coefficients of r*V(r) and u_{-1} = 0.  The
N unit-vector seeds u_0 = e_m give N linearly independent regular
solutions whose values at a small r0 initialize the outward propagation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _fastpath
from .potential import PotentialModel


class SeriesError(ValueError):
    """Invalid series parameters."""


class SeriesConvergenceError(SeriesError):
    """Truncated series has not converged at the requested start radius."""


class DegenerateExponentError(SeriesError):
    """A recursion denominator (j+1)(2 lam + j + 1) vanishes."""


@dataclass(frozen=True)
class SeriesSolution:
    """Coefficients of one seeded series solution.

    ``coefficients[j]`` is the complex N-vector u_j; the seed satisfies
    (u_0)_n = delta(n, seed_channel) with 0-based ``seed_channel``.
    """

    coefficients: np.ndarray
    lam: complex
    energy: float
    seed_channel: int
    j_max: int

    @property
    def total_angular_momentum(self) -> complex:
        """J in the lam = J + 1/2 convention."""
        return self.lam - 0.5


@dataclass
class RadialState:
    """Bundle of N fundamental solutions at one radius.

    ``phi[:, m]`` is the solution vector seeded in channel m and
    ``dphi[:, m]`` its radial derivative.  ``log_scale`` accumulates the
    natural log of any common rescaling applied during propagation (the
    S-matrix is invariant under it).
    """

    r: float
    phi: np.ndarray
    dphi: np.ndarray
    energy: float
    lam: complex
    log_scale: float = 0.0

    def concomitant(self) -> np.ndarray:
        """Bilinear concomitant phi^T dphi - dphi^T phi (conserved, antisymmetric)."""
        return self.phi.T @ self.dphi - self.dphi.T @ self.phi


def _validate(lam: complex, j_max: int) -> None:
    if j_max < 0:
        raise SeriesError(f"j_max must be >= 0, got {j_max}")
    if complex(lam).real <= -0.5:
        raise SeriesError(
            f"regular solution requires Re(J) > -1, i.e. Re(lam) > -1/2; "
            f"got lam = {lam}"
        )
    # With Re(lam) > -1/2 every denominator has positive real part; the
    # guard below only fires for exotic callers bypassing the check above.
    for j in range(j_max):
        if abs((j + 1) * (2.0 * complex(lam) + j + 1.0)) < 1e-12:
            raise DegenerateExponentError(
                f"recursion denominator vanishes at order {j + 1} for lam = {lam}"
            )


def series_block(model: PotentialModel, energy: float, lam: complex,
                 j_max: int) -> np.ndarray:
    """Coefficients for all N seeds at once, shape (j_max+1, N, N).

    Column m holds the series seeded in channel m.
    """
    _validate(lam, j_max)
    table = np.ascontiguousarray(model.maclaurin_coeffs(j_max), dtype=np.float64)
    return _fastpath.series_kernel(table, float(energy), complex(lam), j_max)


def series_coefficients(model: PotentialModel, energy: float, lam: complex,
                        seed_channel: int, j_max: int) -> SeriesSolution:
    """Series coefficients for the solution seeded in one channel (0-based)."""
    if not 0 <= seed_channel < model.n_channels:
        raise SeriesError(
            f"seed channel {seed_channel} outside 0..{model.n_channels - 1}"
        )
    u = series_block(model, energy, lam, j_max)
    return SeriesSolution(
        coefficients=u[:, :, seed_channel].copy(),
        lam=complex(lam),
        energy=float(energy),
        seed_channel=seed_channel,
        j_max=j_max,
    )


def _evaluate_block(u: np.ndarray, lam: complex, r0: float,
                    tail_tol: float) -> tuple[np.ndarray, np.ndarray, float]:
    """Sum the series bundle at r0; returns (phi, dphi, tail_ratio)."""
    j_max = u.shape[0] - 1
    powers = r0 ** np.arange(j_max + 1)
    inner = np.einsum("j,jnm->nm", powers, u)
    inner_d = np.einsum("j,j,jnm->nm", lam + 0.5 + np.arange(j_max + 1), powers, u)
    # complex power via the principal logarithm; r0 is real positive
    lead = np.exp((lam + 0.5) * np.log(r0))
    phi = lead * inner               # sum_j u_j r0^(lam + 1/2 + j)
    dphi = (lead / r0) * inner_d     # sum_j (lam + 1/2 + j) u_j r0^(lam - 1/2 + j)
    tail = np.linalg.norm(u[j_max] * powers[j_max]) / max(
        np.linalg.norm(inner), np.finfo(float).tiny
    )
    if tail > tail_tol:
        raise SeriesConvergenceError(
            f"series tail ratio {tail:.3e} exceeds {tail_tol:.3e} at r0 = {r0}; "
            f"decrease r0 or increase j_max (currently {j_max})"
        )
    return phi, dphi, tail


def initial_conditions(series: SeriesSolution, r0: float,
                       tail_tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
    """Value and derivative vectors of one seeded solution at r0.

        Phi(r0)  = sum_j u_j r0^(lam + 1/2 + j)
        Phi'(r0) = sum_j (lam + 1/2 + j) u_j r0^(lam - 1/2 + j)

    Raises SeriesConvergenceError when the last retained term is not below
    ``tail_tol`` relative to the sum.
    """
    if r0 <= 0.0:
        raise SeriesError(f"r0 must be positive, got {r0}")
    u = series.coefficients[:, :, None]
    phi, dphi, _ = _evaluate_block(u, series.lam, r0, tail_tol)
    return phi[:, 0], dphi[:, 0]


def initial_state(model: PotentialModel, energy: float, lam: complex, r0: float,
                  j_max: int, tail_tol: float = 1e-12,
                  normalize: bool = False) -> RadialState:
    """Full N-column RadialState at r0 from the series start.

    With ``normalize`` each column is scaled to unit max-norm of
    (phi, r0*dphi); the S-matrix and the zero set of the matching
    determinant are invariant under per-column scaling, and an O(1) start
    keeps the propagator's mixed error control meaningful.
    """
    if r0 <= 0.0:
        raise SeriesError(f"r0 must be positive, got {r0}")
    u = series_block(model, energy, lam, j_max)
    phi, dphi, _ = _evaluate_block(u, complex(lam), r0, tail_tol)
    if normalize:
        scale = np.maximum(
            np.abs(phi), np.abs(dphi) * r0
        ).max(axis=0)
        phi = phi / scale
        dphi = dphi / scale
    return RadialState(r=r0, phi=phi, dphi=dphi, energy=float(energy),
                       lam=complex(lam))
