"""Channel potential matrices for the coupled radial problem.

All models work in atomic units (hartree for energies, bohr for lengths).
A model supplies three things: the symmetric N x N matrix V(r) for r > 0,
the asymptotic channel thresholds V_n = lim V_nn(r), and the Maclaurin
coefficients of r*V(r), which drive the power-series start of the radial
solutions near the Coulomb-singular origin.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

# Kernel ids understood by the compiled propagation core (_fastpath).
# KERNEL_NONE means "no compiled form": the propagator falls back to the
# generic Python integrator driven by model.evaluate().
KERNEL_NONE = -1
KERNEL_ZERO = 0
KERNEL_TF2 = 1
KERNEL_TF1 = 2
KERNEL_TF2_ADIABATIC = 3
KERNEL_COULOMB = 4


class PotentialModelError(ValueError):
    """Invalid model parameters or unsupported model operation."""


class NotAnalyticAtOriginError(PotentialModelError):
    """r*V(r) is not analytic at r = 0, so no Maclaurin start exists."""


class PotentialModel:
    """Abstract N-channel potential matrix.

    Subclasses must set ``n_channels`` and ``thresholds`` and implement
    ``evaluate`` and ``maclaurin_coeffs``.  ``thresholds`` holds the
    asymptotic offsets (V_1, ..., V_N); for the physical two-channel models
    shipped here they are nonincreasing with V_N = 0, but derived
    single-channel models (adiabatic branches, uncoupled channels) may carry
    a nonzero constant offset.

    Instances are immutable after construction and safe to share across
    concurrent workers.
    """

    n_channels: int
    thresholds: np.ndarray

    def evaluate(self, r: float) -> np.ndarray:
        """Potential matrix V(r), shape (N, N), real symmetric.

        Raises ValueError for r <= 0: the models carry a 1/r singularity.
        """
        raise NotImplementedError

    def maclaurin_coeffs(self, j_max: int) -> np.ndarray:
        """Coefficients C_j of r*V(r) = sum_j C_j r^j, shape (j_max+1, N, N).

        Must be exact to near machine precision (series algebra or an
        equivalent exact scheme, never low-order finite differences).
        """
        raise NotImplementedError

    def kernel_spec(self) -> tuple[int, np.ndarray]:
        """(kernel id, parameter vector) for the compiled fast path."""
        return KERNEL_NONE, np.empty(0)

    def _check_radius(self, r: float) -> None:
        if not r > 0.0:
            raise ValueError(f"potential requires r > 0, got r = {r}")


# ---------------------------------------------------------------------------
# series algebra helpers (exact Maclaurin coefficients)
# ---------------------------------------------------------------------------

def _tf_radial_series(z: float, a: float, b: float, n: int) -> np.ndarray:
    """Coefficients of r*V(r) for V = -z / (r (r+a) (r^2+b)), orders 0..n.

    r*V = -z / ((r+a)(r^2+b)); both factors are geometric series with
    radii a and sqrt(b).
    """
    j = np.arange(n + 1)
    inv_ra = (-1.0) ** j / a ** (j + 1)
    inv_rb = np.zeros(n + 1)
    m = np.arange(n // 2 + 1)
    inv_rb[0::2] = (-1.0) ** m / b ** (m + 1)
    return -z * np.convolve(inv_ra, inv_rb)[: n + 1]


def _exp_poly_series(c0: float, p: float, q: float, n: int) -> np.ndarray:
    """Coefficients of c0 * exp(p r + q r^2), orders 0..n.

    Uses the exact derivative recurrence (j+1) e_{j+1} = p e_j + 2 q e_{j-1}.
    """
    e = np.zeros(n + 1)
    e[0] = c0
    for j in range(n):
        acc = p * e[j]
        if j >= 1:
            acc += 2.0 * q * e[j - 1]
        e[j + 1] = acc / (j + 1)
    return e


def _gaussian_series(amplitude: float, center: float, width: float, n: int) -> np.ndarray:
    """Coefficients of amplitude * exp(-(r-center)^2 / width^2), orders 0..n."""
    c0 = amplitude * np.exp(-(center / width) ** 2)
    return _exp_poly_series(c0, 2.0 * center / width**2, -1.0 / width**2, n)


def _sqrt_series(d: np.ndarray) -> np.ndarray:
    """Coefficients of sqrt(d(r)) for a series d with d_0 > 0."""
    n = len(d) - 1
    s = np.zeros(n + 1)
    s[0] = np.sqrt(d[0])
    for j in range(1, n + 1):
        acc = d[j]
        if j >= 2:
            acc -= np.dot(s[1:j], s[j - 1:0:-1])
        s[j] = acc / (2.0 * s[0])
    return s


def _mul_series(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    n = max(len(u), len(v)) - 1
    return np.convolve(u, v)[: n + 1]


# ---------------------------------------------------------------------------
# concrete models
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwoChannelThomasFermi(PotentialModel):
    """Two coupled Thomas-Fermi-type channels with a Gaussian coupling.

    Channel 1 (index 0) is the excited channel, offset by the excitation
    energy ``delta_v`` above channel 2 (index 1):

        V_22(r) = -z / (r (r+a) (r^2+b))
        V_11(r) = V_22(r) + delta_v
        V_12(r) = V_21(r) = alpha * exp(-(r-r_i)^2 / delta_r^2)

    Thresholds are (delta_v, 0).
    """

    z: float = 54.0
    a: float = 0.0125
    b: float = 1.5874
    delta_v: float = 0.3
    alpha: float = 1.5
    r_i: float = 2.4
    delta_r: float = 1.0

    def __post_init__(self):
        if self.a <= 0 or self.b <= 0 or self.delta_r <= 0:
            raise PotentialModelError(
                f"shape parameters must be positive: a={self.a}, b={self.b}, "
                f"delta_r={self.delta_r}"
            )

    @property
    def n_channels(self) -> int:
        return 2

    @property
    def thresholds(self) -> np.ndarray:
        return np.array([self.delta_v, 0.0])

    def evaluate(self, r: float) -> np.ndarray:
        self._check_radius(r)
        v22 = -self.z / (r * (r + self.a) * (r * r + self.b))
        v12 = self.alpha * np.exp(-((r - self.r_i) / self.delta_r) ** 2)
        return np.array([[v22 + self.delta_v, v12], [v12, v22]])

    def maclaurin_coeffs(self, j_max: int) -> np.ndarray:
        if j_max < 0:
            raise ValueError("j_max must be >= 0")
        diag = _tf_radial_series(self.z, self.a, self.b, j_max)
        gauss = _gaussian_series(self.alpha, self.r_i, self.delta_r, j_max)
        coeffs = np.zeros((j_max + 1, 2, 2))
        coeffs[:, 0, 0] = diag
        coeffs[:, 1, 1] = diag
        if j_max >= 1:
            coeffs[1, 0, 0] += self.delta_v  # r * delta_v contributes at order 1
            coeffs[1:, 0, 1] = gauss[:j_max]  # r * V_12 shifts the series up by one
            coeffs[1:, 1, 0] = gauss[:j_max]
        return coeffs

    def kernel_spec(self):
        return KERNEL_TF2, np.array(
            [self.z, self.a, self.b, self.delta_v, self.alpha, self.r_i, self.delta_r]
        )

    def uncoupled(self) -> "TwoChannelThomasFermi":
        """Same model with the inter-channel coupling switched off."""
        return TwoChannelThomasFermi(
            self.z, self.a, self.b, self.delta_v, 0.0, self.r_i, self.delta_r
        )

    def channel_model(self, channel: int) -> "ThomasFermiChannel":
        """Single-channel model of one diagonal entry (1-based channel index)."""
        if channel not in (1, 2):
            raise ValueError("channel must be 1 or 2")
        offset = self.delta_v if channel == 1 else 0.0
        return ThomasFermiChannel(self.z, self.a, self.b, offset)


@dataclass(frozen=True)
class ThomasFermiChannel(PotentialModel):
    """Single Thomas-Fermi-type channel, V(r) = -z/(r (r+a) (r^2+b)) + offset."""

    z: float
    a: float
    b: float
    offset: float = 0.0

    @property
    def n_channels(self) -> int:
        return 1

    @property
    def thresholds(self) -> np.ndarray:
        return np.array([self.offset])

    def evaluate(self, r: float) -> np.ndarray:
        self._check_radius(r)
        v = -self.z / (r * (r + self.a) * (r * r + self.b)) + self.offset
        return np.array([[v]])

    def maclaurin_coeffs(self, j_max: int) -> np.ndarray:
        coeffs = np.zeros((j_max + 1, 1, 1))
        coeffs[:, 0, 0] = _tf_radial_series(self.z, self.a, self.b, j_max)
        if j_max >= 1:
            coeffs[1, 0, 0] += self.offset
        return coeffs

    def kernel_spec(self):
        return KERNEL_TF1, np.array([self.z, self.a, self.b, self.offset])


@dataclass(frozen=True)
class FreeParticle(PotentialModel):
    """Zero potential with a configurable number of channels."""

    channels: int = 1

    @property
    def n_channels(self) -> int:
        return self.channels

    @property
    def thresholds(self) -> np.ndarray:
        return np.zeros(self.channels)

    def evaluate(self, r: float) -> np.ndarray:
        self._check_radius(r)
        return np.zeros((self.channels, self.channels))

    def maclaurin_coeffs(self, j_max: int) -> np.ndarray:
        return np.zeros((j_max + 1, self.channels, self.channels))

    def kernel_spec(self):
        return KERNEL_ZERO, np.empty(0)


@dataclass(frozen=True)
class CoulombModel(PotentialModel):
    """Pure attractive Coulomb channel, V(r) = -z0/r."""

    z0: float

    @property
    def n_channels(self) -> int:
        return 1

    @property
    def thresholds(self) -> np.ndarray:
        return np.zeros(1)

    def evaluate(self, r: float) -> np.ndarray:
        self._check_radius(r)
        return np.array([[-self.z0 / r]])

    def maclaurin_coeffs(self, j_max: int) -> np.ndarray:
        coeffs = np.zeros((j_max + 1, 1, 1))
        coeffs[0, 0, 0] = -self.z0
        return coeffs

    def kernel_spec(self):
        return KERNEL_COULOMB, np.array([self.z0])


class CallableModel(PotentialModel):
    """Wrap an arbitrary matrix function as a model (no compiled fast path).

    Intended for synthetic verification models.  ``coeffs`` holds the
    Maclaurin table of r*V(r); pass None for models without an analytic
    origin (maclaurin_coeffs then raises).
    """

    def __init__(self, fn, thresholds, coeffs=None):
        self._fn = fn
        self.thresholds = np.asarray(thresholds, dtype=float)
        self.n_channels = len(self.thresholds)
        self._coeffs = None if coeffs is None else np.asarray(coeffs, dtype=float)

    def evaluate(self, r: float) -> np.ndarray:
        self._check_radius(r)
        return np.asarray(self._fn(r), dtype=float)

    def maclaurin_coeffs(self, j_max: int) -> np.ndarray:
        if self._coeffs is None:
            raise NotAnalyticAtOriginError(
                "model has no Maclaurin table for r*V(r) at the origin"
            )
        if j_max + 1 > len(self._coeffs):
            raise ValueError(
                f"model supplies Maclaurin orders up to {len(self._coeffs) - 1}, "
                f"requested {j_max}"
            )
        return self._coeffs[: j_max + 1]


# ---------------------------------------------------------------------------
# adiabatic reduction (two-channel models)
# ---------------------------------------------------------------------------

def adiabatic_curves(model: PotentialModel, r: float) -> tuple[float, float]:
    """Eigenvalues of the 2x2 potential matrix at r, ordered upper >= lower.

    (V_11+V_22)/2 +- sqrt((V_11-V_22)^2 + 4 V_12^2)/2.  The discriminant
    uses the square of the coupling; the dimensionally consistent form of
    the characteristic polynomial requires V_12^2, not V_12 (see README
    notes on conventions).
    """
    if model.n_channels != 2:
        raise PotentialModelError("adiabatic reduction requires a 2-channel model")
    v = model.evaluate(r)
    mean = 0.5 * (v[0, 0] + v[1, 1])
    gap = 0.5 * np.sqrt((v[0, 0] - v[1, 1]) ** 2 + 4.0 * v[0, 1] ** 2)
    return mean + gap, mean - gap


class AdiabaticBranch(PotentialModel):
    """One adiabatic eigenvalue branch of a 2-channel model, as a 1-channel model.

    ``branch`` is +1 for the upper curve, -1 for the lower.  Maclaurin
    coefficients are produced by exact series algebra on the parent's series
    (mean part plus/minus a series square root of the discriminant), which
    requires the parent's channel difference and coupling to be analytic at
    the origin and the curves to be separated there.
    """

    def __init__(self, parent: PotentialModel, branch: int):
        if parent.n_channels != 2:
            raise PotentialModelError("adiabatic branch requires a 2-channel parent")
        if branch not in (+1, -1):
            raise ValueError("branch must be +1 (upper) or -1 (lower)")
        self.parent = parent
        self.branch = branch
        self.n_channels = 1
        hi = max(parent.thresholds)
        lo = min(parent.thresholds)
        self.thresholds = np.array([hi if branch > 0 else lo])

    def evaluate(self, r: float) -> np.ndarray:
        hi, lo = adiabatic_curves(self.parent, r)
        return np.array([[hi if self.branch > 0 else lo]])

    def maclaurin_coeffs(self, j_max: int) -> np.ndarray:
        d = self.parent.maclaurin_coeffs(j_max + 1)
        # V_11 - V_22 and V_12 must be analytic at 0: the 1/r parts of the
        # diagonal must cancel and the coupling must have none.
        scale = max(1.0, np.abs(d[0]).max())
        if abs(d[0, 0, 0] - d[0, 1, 1]) > 1e-12 * scale or abs(d[0, 0, 1]) > 1e-12 * scale:
            raise NotAnalyticAtOriginError(
                "adiabatic branches are not analytic at r = 0 for this model"
            )
        half_diff = 0.5 * (d[1:, 0, 0] - d[1:, 1, 1])  # series of (V11-V22)/2
        coupling = d[1:, 0, 1].copy()                   # series of V12
        disc = _mul_series(half_diff, half_diff) + _mul_series(coupling, coupling)
        if disc[0] <= 0.0:
            raise NotAnalyticAtOriginError(
                "adiabatic curves touch at the origin; branch series undefined"
            )
        gap = _sqrt_series(disc)  # sqrt((V11-V22)^2/4 + V12^2), analytic
        coeffs = np.zeros((j_max + 1, 1, 1))
        coeffs[:, 0, 0] = 0.5 * (d[: j_max + 1, 0, 0] + d[: j_max + 1, 1, 1])
        coeffs[1:, 0, 0] += self.branch * gap[:j_max]  # r*gap shifts up by one
        return coeffs

    def kernel_spec(self):
        kind, params = self.parent.kernel_spec()
        if kind == KERNEL_TF2:
            return KERNEL_TF2_ADIABATIC, np.append(params, float(self.branch))
        return KERNEL_NONE, np.empty(0)


def adiabatic_model(model: PotentialModel) -> tuple[AdiabaticBranch, AdiabaticBranch]:
    """Both adiabatic branches of a 2-channel model as independent 1-channel models.

    Warns if the two curves coincide somewhere on a wide log grid (an exact
    crossing); the branches are then still well defined pointwise as the
    upper/lower eigenvalues, which stay continuous through the crossing.
    """
    if model.n_channels != 2:
        raise PotentialModelError("adiabatic reduction requires a 2-channel model")
    radii = np.logspace(-3, 3, 241)
    gaps = np.empty_like(radii)
    scale = 0.0
    for i, r in enumerate(radii):
        hi, lo = adiabatic_curves(model, r)
        gaps[i] = hi - lo
        scale = max(scale, abs(hi), abs(lo))
    if gaps.min() <= 1e-12 * max(1.0, scale):
        r_cross = radii[int(np.argmin(gaps))]
        warnings.warn(
            f"adiabatic curves (nearly) cross around r = {r_cross:.4g}; "
            "branches are ordered pointwise as upper/lower eigenvalues",
            stacklevel=2,
        )
    return AdiabaticBranch(model, +1), AdiabaticBranch(model, -1)
