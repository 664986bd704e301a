"""Asymptotic matching, S-matrix assembly, and the pole determinant.

At the matching radius every propagated solution column m is decomposed in
each channel n against incoming/outgoing Riccati-Hankel waves,

    phi[n, m] = sm[m, n] h-(k_n r) + sp[m, n] h+(k_n r),

solved per (m, n) with the exact Wronskian h+ (h-)' - h- (h+)' = -2i:

    sm[m, n] = +(phi k_n h+' - phi' h+) / (2i k_n)
    sp[m, n] = -(phi k_n h-' - phi' h-) / (2i k_n)

Index conventions (pinned by the free-particle and uncoupled-channel
oracles and by the residue reciprocity test):

* ``s_minus``/``s_plus`` are solution-major: row m = seeded solution,
  column n = channel.
* ``s_matrix = inv(s_minus) @ s_plus`` is entrance-major: ``s_matrix[j, i]``
  is the amplitude for exit channel i+1 given an incoming wave purely in
  channel j+1.  Use ``s_element(result, exit_ch, entrance_ch)`` to read
  entries in physical (exit, entrance) labels.
* The flux-normalized matrix scales entry [i, j] by sqrt(k_col / k_row);
  on open channels it is symmetric and unitary for real lam.

The determinant delta = det(s_minus) vanishes exactly at the Regge poles;
for closed channels (purely imaginary k_n) the same condition removes the
exponentially growing component.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .potential import PotentialModel
from .propagator import PropagationSettings, propagate
from .series_start import RadialState, initial_state
from .special import required_argument, riccati_hankel


class ThresholdError(ValueError):
    """Energy sits on (or numerically at) a channel threshold."""


class IllConditionedMatchError(RuntimeError):
    """s_minus is numerically singular away from a pole."""


@dataclass(frozen=True)
class PipelineSettings:
    """Everything the series -> propagate -> match composition needs."""

    propagation: PropagationSettings = field(default_factory=PropagationSettings)
    r0: float = 1e-3
    j_max: int = 30
    series_tail_tol: float = 1e-12
    hankel_tol: float = 1e-12
    hankel_z_min: float = 25.0
    hankel_order_margin: float = 2.0
    threshold_guard: float = 1e-8
    cond_limit: float = 1e12


@dataclass
class MatchResult:
    """Matched coefficient matrices and derived quantities at one (E, lam)."""

    s_minus: np.ndarray
    s_plus: np.ndarray
    s_matrix: np.ndarray | None
    delta: complex
    wave_vectors: np.ndarray
    r_match: float
    energy: float
    lam: complex

    def scattering_matrix(self) -> np.ndarray:
        if self.s_matrix is None:
            self.s_matrix = _assemble_s(self.s_minus, self.s_plus)
        return self.s_matrix

    def flux_normalized(self) -> np.ndarray:
        """sqrt(k_col/k_row)-scaled S on the open channels (symmetric, unitary)."""
        open_idx = np.where(self.wave_vectors.imag == 0.0)[0]
        s = self.scattering_matrix()[np.ix_(open_idx, open_idx)]
        k = self.wave_vectors[open_idx].real
        return np.sqrt(k[None, :] / k[:, None]) * s


def s_element(result: MatchResult, exit_ch: int, entrance_ch: int) -> complex:
    """S-matrix entry in physical labels (1-based channels)."""
    return result.scattering_matrix()[entrance_ch - 1, exit_ch - 1]


def channel_wave_vectors(model: PotentialModel, energy: float,
                         guard: float = 1e-8) -> np.ndarray:
    """k_n = sqrt(2(E - V_n)), positive real branch for open channels.

    Closed channels take k_n = +i sqrt(2(V_n - E)) so that h+(k_n r) is the
    decaying solution.  Energies within ``guard`` of a threshold raise.
    """
    thresholds = np.asarray(model.thresholds, dtype=float)
    gaps = energy - thresholds
    if np.any(np.abs(gaps) < guard):
        n_bad = int(np.argmin(np.abs(gaps))) + 1
        raise ThresholdError(
            f"E = {energy} is within {guard} of the channel-{n_bad} threshold "
            f"{thresholds[n_bad - 1]}; offset the energy"
        )
    k = np.empty(len(thresholds), dtype=complex)
    open_mask = gaps > 0
    k[open_mask] = np.sqrt(2.0 * gaps[open_mask])
    k[~open_mask] = 1j * np.sqrt(-2.0 * gaps[~open_mask])
    return k


def _assemble_s(s_minus: np.ndarray, s_plus: np.ndarray,
                cond_limit: float = 1e12) -> np.ndarray:
    cond = np.linalg.cond(s_minus)
    if not np.isfinite(cond) or cond > cond_limit:
        raise IllConditionedMatchError(
            f"cond(s_minus) = {cond:.3e} exceeds {cond_limit:.1e}; evaluation "
            "point is (numerically) at a pole"
        )
    return np.linalg.solve(s_minus, s_plus)


def match(state: RadialState, model: PotentialModel,
          settings: PipelineSettings = PipelineSettings(),
          compute_s: bool = True) -> MatchResult:
    """Decompose a propagated state against asymptotic Riccati-Hankel waves."""
    n = model.n_channels
    k = channel_wave_vectors(model, state.energy, settings.threshold_guard)
    r = state.r
    sm = np.empty((n, n), dtype=complex)
    sp = np.empty((n, n), dtype=complex)
    for ch in range(n):
        pair = riccati_hankel(
            state.lam, k[ch] * r,
            tol=settings.hankel_tol,
            z_min=settings.hankel_z_min,
            order_margin=settings.hankel_order_margin,
        )
        phi_row = state.phi[ch, :]
        dphi_row = state.dphi[ch, :]
        denom = 2j * k[ch]
        sm[:, ch] = (phi_row * k[ch] * pair.d_plus - dphi_row * pair.h_plus) / denom
        sp[:, ch] = -(phi_row * k[ch] * pair.d_minus - dphi_row * pair.h_minus) / denom
    delta = complex(np.linalg.det(sm))
    s = _assemble_s(sm, sp, settings.cond_limit) if compute_s else None
    return MatchResult(
        s_minus=sm, s_plus=sp, s_matrix=s, delta=delta,
        wave_vectors=k, r_match=r, energy=state.energy, lam=state.lam,
    )


def resolve_r_match(model: PotentialModel, energy: float, lam: complex,
                    settings: PipelineSettings) -> float:
    """Matching radius: configured base, extended so every |k_n| r is inside
    the asymptotic-series validity domain."""
    k = channel_wave_vectors(model, energy, settings.threshold_guard)
    z_need = required_argument(
        lam, settings.hankel_z_min, settings.hankel_order_margin
    )
    # nudge above the threshold so rounding in |k| r cannot fall below it
    return max(settings.propagation.r_match, (1.0 + 1e-9) * z_need / np.abs(k).min())


def solve_scattering(model: PotentialModel, energy: float, lam: complex,
                     settings: PipelineSettings = PipelineSettings(),
                     r_match: float | None = None,
                     compute_s: bool = True) -> MatchResult:
    """Full pipeline composition at one (E, lam): series start, outward
    propagation, asymptotic matching."""
    r_use = resolve_r_match(model, energy, lam, settings) if r_match is None \
        else float(r_match)
    state = initial_state(
        model, energy, lam, settings.r0, settings.j_max,
        tail_tol=settings.series_tail_tol, normalize=True,
    )
    state = propagate(model, state, settings.propagation, r_end=r_use)
    return match(state, model, settings, compute_s=compute_s)


def delta_fn(model: PotentialModel, energy: float, lam: complex,
             settings: PipelineSettings = PipelineSettings(),
             r_match: float | None = None) -> complex:
    """det(s_minus) at one (E, lam); zeros of this are the Regge poles."""
    return solve_scattering(
        model, energy, lam, settings, r_match=r_match, compute_s=False
    ).delta


# ---------------------------------------------------------------------------
# diagnostic CSV dump
# ---------------------------------------------------------------------------

def scan_rows(model, energies, lambdas, settings=PipelineSettings()):
    """Yield (E, lam, delta, S) rows over a grid scan; S is None where the
    match is singular."""
    for energy in energies:
        for lam in lambdas:
            result = solve_scattering(model, energy, lam, settings,
                                      compute_s=False)
            try:
                s = result.scattering_matrix()
            except IllConditionedMatchError:
                s = None
            yield energy, lam, result.delta, s


def write_scan_csv(path, model, energies, lambdas,
                   settings=PipelineSettings(), precision: int = 12) -> None:
    """Grid-scan CSV: E, Re lam, Im lam, Re delta, Im delta, then Re/Im of
    the S entries row-major (entrance-major storage)."""
    from ._csvio import atomic_write_text, fmt

    n = model.n_channels
    header = ["E", "re_lambda", "im_lambda", "re_delta", "im_delta"]
    for i in range(1, n + 1):
        for j in range(1, n + 1):
            header += [f"re_s{i}{j}", f"im_s{i}{j}"]
    lines = [",".join(header)]
    for energy, lam, delta, s in scan_rows(model, energies, lambdas, settings):
        row = [fmt(energy, precision), fmt(lam.real, precision),
               fmt(lam.imag, precision), fmt(delta.real, precision),
               fmt(delta.imag, precision)]
        if s is None:
            row += ["nan", "nan"] * (n * n)
        else:
            for val in s.ravel():
                row += [fmt(val.real, precision), fmt(val.imag, precision)]
        lines.append(",".join(row))
    atomic_write_text(path, "\n".join(lines) + "\n")
