"""Integral cross sections: partial-wave sums and the Mulholland decomposition.

State-to-state ICS by direct partial-wave summation,

    sigma(exit n, entrance n') = (pi/k_n'^2) sum_J (2J+1) |delta_nn' - S_nn'|^2,

with S evaluated at real lam = J + 1/2 through the full pipeline.  The
model potentials fall off like r^-4, so the diagonal sums converge only
algebraically (Born tail terms ~ J^-5); after the stopping rule fires, the
remaining tail is estimated by a power-law fit to the last computed terms
and added to the sum, and its relative size is reported as the truncation
estimate.

The resonance part of an ICS follows from a certified pole and its residue
matrix:

    sigma_res = (8 pi^2 / k_n'^2) *
                Im[ lam_bar rho_nn' (conj(S_nn'(conj(lam_bar))) - delta_nn')
                    / (1 + exp(-2 pi i lam_bar)) ]

and the background is the literal difference sigma - sigma_res.

S-matrix entries are read in physical (exit, entrance) labels from the
entrance-major storage; ``convention="flux"`` switches the off-diagonal
entries to the flux-normalized (symmetric) convention, which rescales
sigma(1,2)/sigma(2,1) by k ratios and leaves the diagonal untouched.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .poles import ReggePoleRecord, Trajectory
from .potential import PotentialModel
from .smatrix import (
    MatchResult,
    PipelineSettings,
    channel_wave_vectors,
    solve_scattering,
)


class ClosedChannelError(ValueError):
    """Entrance channel is closed at the requested energy."""


class DegenerateDenominatorError(ZeroDivisionError):
    """1 + exp(-2 pi i lam_bar) vanishes (real half-odd-integer pole)."""


@dataclass
class CrossSectionRecord:
    """Full ICS and its resonance/background split for one channel pair."""

    energy: float
    exit_channel: int
    entrance_channel: int
    sigma: float
    sigma_res: float
    background: float
    j_max_used: int
    truncation_error_estimate: float


@dataclass(frozen=True)
class PartialWaveSettings:
    """Stopping rule and tail handling for the partial-wave sum."""

    tol: float = 1e-6
    j_cap: int = 200
    tail_fit_points: int = 8


def _s_entry(result: MatchResult, exit_ch: int, entrance_ch: int,
             convention: str) -> complex:
    s = result.scattering_matrix()
    value = s[entrance_ch - 1, exit_ch - 1]
    if convention == "flux":
        k = result.wave_vectors
        value = value * np.sqrt(k[exit_ch - 1] / k[entrance_ch - 1])
    elif convention != "raw":
        raise ValueError(f"unknown S-matrix convention {convention!r}")
    return value


def _power_law_tail(terms: np.ndarray, j_values: np.ndarray) -> float:
    """Estimated sum of the dropped terms from a power-law fit.

    Fits |term| ~ A J^-p on the trailing points and sums the fitted law
    over the remaining J.  Potentials falling like r^-4 give p ~ 5 on the
    diagonal; exponentially converged pairs fit huge p and return ~0.
    """
    mask = terms > 0
    if mask.sum() < 3:
        return 0.0
    logs = np.log(terms[mask])
    logj = np.log(j_values[mask])
    p, log_a = np.polyfit(logj, logs, 1)
    if p >= -1.0:
        # not decaying: no trustworthy extrapolation, report the last term
        return float(terms[-1]) if len(terms) else 0.0
    j_next = j_values[-1] + 1
    tail_js = np.arange(j_next, j_next + 2000)
    tail = np.exp(log_a) * np.sum(tail_js ** p)
    # integral remainder beyond the summed window
    tail += np.exp(log_a) * (tail_js[-1] + 1.0) ** (p + 1) / (-p - 1.0)
    return float(tail)


def partial_wave_ics(model: PotentialModel, energy: float, exit_ch: int,
                     entrance_ch: int,
                     settings: PipelineSettings = PipelineSettings(),
                     pws: PartialWaveSettings = PartialWaveSettings(),
                     convention: str = "raw") -> tuple[float, int, float]:
    """One state-to-state ICS; returns (sigma, j_max_used, truncation_estimate).

    The sum stops once three consecutive terms each contribute less than
    ``pws.tol`` of the running sum (J capped at ``pws.j_cap`` with a
    warning).  ``truncation_estimate`` is the tail estimate relative to
    sigma; the tail itself is already included in sigma.
    """
    sums, j_used, estimates = _pws_matrix(
        model, energy, settings, pws, convention,
        pairs=[(exit_ch, entrance_ch)],
    )
    key = (exit_ch, entrance_ch)
    return sums[key], j_used[key], estimates[key]


def ics_matrix(model: PotentialModel, energy: float,
               settings: PipelineSettings = PipelineSettings(),
               pws: PartialWaveSettings = PartialWaveSettings(),
               convention: str = "raw"):
    """All channel pairs at once, sharing one pipeline solve per J."""
    n = model.n_channels
    pairs = [(i + 1, j + 1) for i in range(n) for j in range(n)]
    return _pws_matrix(model, energy, settings, pws, convention, pairs)


def _pws_matrix(model, energy, settings, pws, convention, pairs):
    k = channel_wave_vectors(model, energy, settings.threshold_guard)
    for _, entrance in pairs:
        if k[entrance - 1].imag != 0.0:
            raise ClosedChannelError(
                f"entrance channel {entrance} is closed at E = {energy}"
            )
    terms = {pair: [] for pair in pairs}
    done = {pair: False for pair in pairs}
    streak = {pair: 0 for pair in pairs}
    j_used = {}
    j = 0
    while j <= pws.j_cap and not all(done.values()):
        lam = j + 0.5
        result = solve_scattering(model, energy, lam, settings)
        for pair in pairs:
            if done[pair]:
                continue
            exit_ch, entrance_ch = pair
            kron = 1.0 if exit_ch == entrance_ch else 0.0
            amp = kron - _s_entry(result, exit_ch, entrance_ch, convention)
            term = (2 * j + 1) * abs(amp) ** 2
            terms[pair].append(term)
            running = sum(terms[pair])
            if running > 0.0 and term < pws.tol * running:
                streak[pair] += 1
            else:
                streak[pair] = 0
            if streak[pair] >= 3:
                done[pair] = True
                j_used[pair] = j
        j += 1
    sums, estimates = {}, {}
    for pair in pairs:
        if not done[pair]:
            j_used[pair] = j - 1
            warnings.warn(
                f"partial-wave sum for pair {pair} hit the J cap {pws.j_cap} "
                f"at E = {energy}", stacklevel=3,
            )
        series = np.array(terms[pair])
        n_fit = min(pws.tail_fit_points, len(series))
        j_values = np.arange(len(series), dtype=float) + 0.5
        tail = _power_law_tail(series[-n_fit:], j_values[-n_fit:])
        total = series.sum() + tail
        prefactor = np.pi / k[pair[1] - 1].real ** 2
        sums[pair] = prefactor * total
        estimates[pair] = tail / total if total > 0 else 0.0
    return sums, j_used, estimates


# ---------------------------------------------------------------------------
# Mulholland resonance term
# ---------------------------------------------------------------------------

def mulholland_term(lambda_bar: complex, rho_entry: complex,
                    s_conj_entry: complex, k_entrance: float,
                    diagonal: bool) -> float:
    """Resonance contribution of one pole to one ICS entry.

    ``s_conj_entry`` is S_nn' evaluated at lam = conj(lambda_bar); the
    formula uses its complex conjugate.  ``diagonal`` selects the
    Kronecker delta.
    """
    den = 1.0 + np.exp(-2j * np.pi * lambda_bar)
    if abs(den) < 1e-10:
        raise DegenerateDenominatorError(
            f"1 + exp(-2 pi i lam) vanishes at lam = {lambda_bar}"
        )
    kron = 1.0 if diagonal else 0.0
    value = lambda_bar * rho_entry * (np.conj(s_conj_entry) - kron) / den
    return float(8.0 * np.pi**2 / k_entrance**2 * value.imag)


def mulholland_res(model: PotentialModel, pole: ReggePoleRecord,
                   exit_ch: int, entrance_ch: int,
                   settings: PipelineSettings = PipelineSettings(),
                   convention: str = "raw") -> float:
    """Mulholland resonance term for one channel pair at the pole's energy."""
    if pole.residues is None:
        raise ValueError("pole record carries no residues")
    k = channel_wave_vectors(model, pole.energy, settings.threshold_guard)
    if k[entrance_ch - 1].imag != 0.0:
        raise ClosedChannelError(
            f"entrance channel {entrance_ch} is closed at E = {pole.energy}"
        )
    conj_result = solve_scattering(
        model, pole.energy, np.conj(pole.lambda_bar), settings
    )
    return _mulholland_from_parts(
        pole, conj_result, exit_ch, entrance_ch, k, convention
    )


def _mulholland_from_parts(pole, conj_result, exit_ch, entrance_ch, k,
                           convention) -> float:
    rho = pole.residues[entrance_ch - 1, exit_ch - 1]
    if convention == "flux":
        rho = rho * np.sqrt(k[exit_ch - 1] / k[entrance_ch - 1])
    s_conj = _s_entry(conj_result, exit_ch, entrance_ch, convention)
    return mulholland_term(
        pole.lambda_bar, rho, s_conj, k[entrance_ch - 1].real,
        exit_ch == entrance_ch,
    )


# ---------------------------------------------------------------------------
# decomposition over an energy grid
# ---------------------------------------------------------------------------

def decompose(model: PotentialModel, energies, trajectories,
              settings: PipelineSettings = PipelineSettings(),
              pws: PartialWaveSettings = PartialWaveSettings(),
              pairs=None, convention: str = "raw") -> list[CrossSectionRecord]:
    """Full ICS, summed Mulholland terms, and background per energy and pair.

    ``trajectories`` is one Trajectory or a list; each must hold a pole
    record (with residues) at every requested energy; a missing record
    raises (poles are recomputed by tracing, never interpolated).
    """
    if isinstance(trajectories, Trajectory):
        trajectories = [trajectories]
    n = model.n_channels
    if pairs is None:
        pairs = [(i + 1, j + 1) for i in range(n) for j in range(n)]
    records = []
    for energy in np.asarray(energies, dtype=float):
        poles = [traj.at_energy(energy) for traj in trajectories]
        k = channel_wave_vectors(model, energy, settings.threshold_guard)
        sums, j_used, estimates = _pws_matrix(
            model, energy, settings, pws, convention, pairs
        )
        conj_results = [
            solve_scattering(model, energy, np.conj(p.lambda_bar), settings)
            for p in poles
        ]
        for pair in pairs:
            exit_ch, entrance_ch = pair
            res_term = sum(
                _mulholland_from_parts(p, cr, exit_ch, entrance_ch, k, convention)
                for p, cr in zip(poles, conj_results)
            )
            sigma = sums[pair]
            records.append(CrossSectionRecord(
                energy=float(energy),
                exit_channel=exit_ch,
                entrance_channel=entrance_ch,
                sigma=sigma,
                sigma_res=res_term,
                background=sigma - res_term,
                j_max_used=j_used[pair],
                truncation_error_estimate=estimates[pair],
            ))
    return records


def write_xsec_csv(path, records, precision: int = 12) -> None:
    """Cross-section CSV: E, exit, entrance, sigma, sigma_res, background,
    j_max_used, truncation_error_estimate."""
    from ._csvio import atomic_write_text, fmt

    lines = ["E,n,n_prime,sigma,sigma_res,background,j_max_used,"
             "truncation_error_estimate"]
    for rec in records:
        lines.append(",".join([
            fmt(rec.energy, precision),
            str(rec.exit_channel),
            str(rec.entrance_channel),
            fmt(rec.sigma, precision),
            fmt(rec.sigma_res, precision),
            fmt(rec.background, precision),
            str(rec.j_max_used),
            fmt(rec.truncation_error_estimate, precision),
        ]))
    atomic_write_text(path, "\n".join(lines) + "\n")
