"""Regge poles: root finding on delta, trajectory tracing, residues.

A pole at real energy E is a zero of delta(E, lam) = det(s_minus) in the
complex lam plane.  Poles are located by Muller's method (three-point
complex quadratic interpolation; only function values are needed), then
certified against the median of |delta| on a small circle.  Trajectories
march an energy grid with linear extrapolation of the previous poles as
the next guess, halving the energy step whenever the pole jumps too far.
Residue matrices are extracted twice per pole, by contour quadrature
around the pole and by Richardson extrapolation of eps*S(lam+eps), and
the two routes must agree.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .potential import PotentialModel
from .smatrix import (
    IllConditionedMatchError,
    MatchResult,
    PipelineSettings,
    resolve_r_match,
    solve_scattering,
)


class PoleConvergenceError(RuntimeError):
    """Muller iteration failed; carries the iterate history."""

    def __init__(self, message: str, history):
        super().__init__(message)
        self.history = list(history)


class OutOfBasinError(RuntimeError):
    """Root converged outside the caller-supplied bounding box."""


class ResidueConsistencyError(RuntimeError):
    """Contour and limit residues disagree (double pole or crowded contour?)."""


@dataclass(frozen=True)
class PoleSearchSettings:
    """Muller iteration and certification controls."""

    delta_rel_tol: float = 1e-9
    step_tol: float = 1e-10
    max_iterations: int = 50
    start_spread: float = 1e-3
    certificate_radius: float = 0.1
    certificate_points: int = 8


@dataclass
class ReggePoleRecord:
    """One certified pole: position, diagnostics, optionally residues.

    ``residues[i, j]`` follows the entrance-major storage of the S-matrix
    (see smatrix); ``certificate`` is |delta(pole)| over the median |delta|
    on the certification circle.
    """

    energy: float
    lambda_bar: complex
    residues: np.ndarray | None
    iterations: int
    delta_at_pole: complex
    certificate: float


@dataclass(frozen=True)
class SelfIntersection:
    """Polyline crossing of a trajectory with itself."""

    energy_a: float
    energy_b: float
    point: complex


@dataclass
class Trajectory:
    """Pole records over a strictly increasing energy grid."""

    records: list[ReggePoleRecord] = field(default_factory=list)
    label: str = ""
    truncated: bool = False

    @property
    def energies(self) -> np.ndarray:
        return np.array([rec.energy for rec in self.records])

    @property
    def positions(self) -> np.ndarray:
        return np.array([rec.lambda_bar for rec in self.records])

    def at_energy(self, energy: float, tol: float = 1e-9) -> ReggePoleRecord:
        for rec in self.records:
            if abs(rec.energy - energy) <= tol:
                return rec
        raise KeyError(
            f"no pole record at E = {energy}; recompute the pole at this "
            "energy instead of interpolating the trajectory"
        )

    def self_intersections(self) -> list[SelfIntersection]:
        return polyline_self_intersections(self.energies, self.positions)


# ---------------------------------------------------------------------------
# root finding
# ---------------------------------------------------------------------------

def muller_root(fn, guess: complex,
                settings: PoleSearchSettings = PoleSearchSettings(),
                bounding_box=None) -> tuple[complex, complex, int, list]:
    """Muller's method for a zero of a complex function.

    Returns (root, fn(root), iterations, history).  ``bounding_box`` is an
    optional (re_min, re_max, im_min, im_max) basin constraint checked on
    the converged root.  Falls back to a secant step whenever the quadratic
    degenerates.
    """
    spread = settings.start_spread * max(1.0, abs(guess))
    xs = [guess + spread, guess - spread, complex(guess)]
    fs = [fn(x) for x in xs]
    history = list(zip(xs, fs))
    scale = max(abs(f) for f in fs)

    x2 = xs[-1]
    f2 = fs[-1]
    for iteration in range(1, settings.max_iterations + 1):
        x0, x1 = xs[-3], xs[-2]
        f0, f1 = fs[-3], fs[-2]
        h1 = x1 - x0
        h2 = x2 - x1
        if h1 == 0 or h2 == 0:
            break
        d1 = (f1 - f0) / h1
        d2 = (f2 - f1) / h2
        a = (d2 - d1) / (h2 + h1)
        b = a * h2 + d2
        disc = np.sqrt(b * b - 4.0 * f2 * a)
        den_p = b + disc
        den_m = b - disc
        den = den_p if abs(den_p) >= abs(den_m) else den_m
        if abs(den) < 1e-300:
            # degenerate quadratic: secant step
            if f2 == f1:
                break
            step = -f2 * (x2 - x1) / (f2 - f1)
        else:
            step = -2.0 * f2 / den
        x_new = x2 + step
        f_new = fn(x_new)
        xs.append(x_new)
        fs.append(f_new)
        history.append((x_new, f_new))
        scale = max(scale, abs(f_new))
        x2, f2 = x_new, f_new
        if abs(step) <= settings.step_tol and \
                abs(f2) <= settings.delta_rel_tol * scale:
            if bounding_box is not None:
                re_min, re_max, im_min, im_max = bounding_box
                if not (re_min <= x2.real <= re_max and
                        im_min <= x2.imag <= im_max):
                    raise OutOfBasinError(
                        f"root {x2:.8g} converged outside the bounding box "
                        f"{bounding_box}"
                    )
            return x2, f2, iteration, history

    raise PoleConvergenceError(
        f"no convergence after {settings.max_iterations} iterations from "
        f"guess {guess:.6g} (last iterate {x2:.8g}, |f| = {abs(f2):.3e})",
        history,
    )


def certify(fn, root: complex, f_root: complex,
            settings: PoleSearchSettings = PoleSearchSettings()) -> float:
    """|f(root)| over the median |f| on a circle around the root."""
    angles = 2.0 * np.pi * np.arange(settings.certificate_points) \
        / settings.certificate_points
    circle = [abs(fn(root + settings.certificate_radius * np.exp(1j * t)))
              for t in angles]
    return abs(f_root) / np.median(circle)


def find_pole(delta, lam_guess: complex,
              search: PoleSearchSettings = PoleSearchSettings(),
              bounding_box=None, energy: float = np.nan) -> ReggePoleRecord:
    """Locate and certify one zero of a caller-supplied delta function.

    ``delta`` is any callable lam -> complex; use ``find_model_pole`` for
    the physical pipeline.
    """
    root, f_root, iterations, _ = muller_root(
        delta, lam_guess, search, bounding_box
    )
    certificate = certify(delta, root, f_root, search)
    return ReggePoleRecord(
        energy=energy, lambda_bar=root, residues=None,
        iterations=iterations, delta_at_pole=f_root, certificate=certificate,
    )


def find_model_pole(model: PotentialModel, energy: float, lam_guess: complex,
                    settings: PipelineSettings = PipelineSettings(),
                    search: PoleSearchSettings = PoleSearchSettings(),
                    bounding_box=None) -> ReggePoleRecord:
    """Locate a Regge pole of the scattering pipeline at fixed real energy.

    The matching radius is frozen from the initial guess (with margin) so
    the iterates see one smooth function of lam; if the converged pole
    needs a larger radius the solve is repeated with the radius it implies.
    """
    guess = complex(lam_guess)
    for _ in range(3):
        frozen = 1.2 * resolve_r_match(model, energy, guess, settings)

        def delta_frozen(lam):
            return solve_scattering(
                model, energy, lam, settings, r_match=frozen, compute_s=False
            ).delta

        record = find_pole(delta_frozen, guess, search, bounding_box, energy)
        needed = resolve_r_match(model, energy, record.lambda_bar, settings)
        if needed <= frozen:
            return record
        guess = record.lambda_bar
    raise PoleConvergenceError(
        f"matching radius kept growing while chasing the pole from "
        f"{lam_guess:.6g} at E = {energy}", [],
    )


# ---------------------------------------------------------------------------
# residues
# ---------------------------------------------------------------------------

def residue_matrix_contour(s_fn, lambda_bar: complex, radius: float = 1e-3,
                           nodes: int = 16) -> np.ndarray:
    """(1/2 pi i) contour integral of S(lam) on a circle around the pole.

    The trapezoid rule on the circle is spectrally accurate: the analytic
    background integrates to zero and only the simple-pole term survives.
    """
    phases = np.exp(2j * np.pi * np.arange(nodes) / nodes)
    acc = None
    for phase in phases:
        s = np.asarray(s_fn(lambda_bar + radius * phase))
        acc = s * phase if acc is None else acc + s * phase
    return acc * (radius / nodes)


def residue_matrix_limit(s_fn, lambda_bar: complex,
                         eps: float = 1e-3) -> np.ndarray:
    """Richardson extrapolation of eps*S(lam_bar + eps) at eps, eps/2, eps/4.

    The combination (f(e) - 6 f(e/2) + 8 f(e/4)) / 3 removes the linear and
    quadratic background terms of f(e) = e S(lam_bar + e).
    """
    f1 = eps * np.asarray(s_fn(lambda_bar + eps))
    f2 = 0.5 * eps * np.asarray(s_fn(lambda_bar + 0.5 * eps))
    f3 = 0.25 * eps * np.asarray(s_fn(lambda_bar + 0.25 * eps))
    return (f1 - 6.0 * f2 + 8.0 * f3) / 3.0


def residue_pair(s_fn, lambda_bar: complex, radius: float = 1e-3,
                 nodes: int = 16) -> tuple[np.ndarray, np.ndarray, float]:
    """Contour and limit residues plus their relative disagreement."""
    contour = residue_matrix_contour(s_fn, lambda_bar, radius, nodes)
    limit = residue_matrix_limit(s_fn, lambda_bar, radius)
    scale = max(np.abs(contour).max(), np.finfo(float).tiny)
    disagreement = np.abs(contour - limit).max() / scale
    return contour, limit, disagreement


def residues(model: PotentialModel, pole: ReggePoleRecord,
             settings: PipelineSettings = PipelineSettings(),
             radius: float = 1e-3, nodes: int = 16,
             agreement_tol: float = 1e-4) -> np.ndarray:
    """Residue matrix of S at a certified pole (entrance-major storage).

    Both extraction routes must agree to ``agreement_tol`` relative; on
    first disagreement the circle is shrunk once before failing.
    """
    frozen = 1.2 * resolve_r_match(model, pole.energy, pole.lambda_bar, settings)

    def s_fn(lam):
        return solve_scattering(
            model, pole.energy, lam, settings, r_match=frozen
        ).scattering_matrix()

    contour, _, disagreement = residue_pair(s_fn, pole.lambda_bar, radius, nodes)
    if disagreement > agreement_tol:
        warnings.warn(
            f"residue routes disagree by {disagreement:.2e} at "
            f"E = {pole.energy}; shrinking the contour", stacklevel=2,
        )
        contour, _, disagreement = residue_pair(
            s_fn, pole.lambda_bar, 0.5 * radius, nodes
        )
        if disagreement > agreement_tol:
            raise ResidueConsistencyError(
                f"contour and limit residues disagree by {disagreement:.2e} "
                f"(> {agreement_tol}) at E = {pole.energy}, "
                f"lam = {pole.lambda_bar:.8g}; double pole or second pole "
                "inside the contour?"
            )
    return contour


# ---------------------------------------------------------------------------
# trajectory tracing
# ---------------------------------------------------------------------------

class TrajectoryTruncated(RuntimeError):
    """Continuation could not pass an energy even at the minimum step."""


def _extrapolate(records: list[ReggePoleRecord], energy: float) -> complex:
    last = records[-1]
    if len(records) < 2:
        return last.lambda_bar
    prev = records[-2]
    de = last.energy - prev.energy
    if de == 0.0:
        return last.lambda_bar
    slope = (last.lambda_bar - prev.lambda_bar) / de
    return last.lambda_bar + slope * (energy - last.energy)


def trace_trajectory(model: PotentialModel, energies, lam_seed: complex,
                     settings: PipelineSettings = PipelineSettings(),
                     search: PoleSearchSettings = PoleSearchSettings(),
                     jump_tol: float = 0.2, min_energy_step: float = 1e-4,
                     with_residues: bool = False,
                     label: str = "") -> Trajectory:
    """March a pole across an increasing energy grid.

    The guess at each new energy is the linear extrapolation of the last
    two accepted poles.  If the accepted pole jumps by more than
    ``jump_tol`` the energy step is halved recursively down to
    ``min_energy_step``; a persistent failure truncates the trajectory
    (``Trajectory.truncated``) with a warning instead of raising.
    """
    energies = np.asarray(energies, dtype=float)
    if len(energies) == 0:
        raise ValueError("empty energy grid")
    if np.any(np.diff(energies) <= 0):
        raise ValueError("energies must be strictly increasing")

    def locate(energy, guess):
        rec = find_model_pole(model, energy, guess, settings, search)
        if with_residues:
            rec.residues = residues(model, rec, settings)
        return rec

    traj = Trajectory(label=label)
    traj.records.append(locate(energies[0], complex(lam_seed)))

    def advance(energy):
        last = traj.records[-1]
        guess = _extrapolate(traj.records, energy)
        rec = None
        try:
            rec = locate(energy, guess)
        except (PoleConvergenceError, IllConditionedMatchError):
            pass
        if rec is not None and abs(rec.lambda_bar - last.lambda_bar) <= jump_tol:
            traj.records.append(rec)
            return
        if energy - last.energy <= min_energy_step:
            raise TrajectoryTruncated(
                f"pole jump at E = {energy:.8g} persists at the minimum "
                f"energy step {min_energy_step}"
            )
        advance(0.5 * (last.energy + energy))
        advance(energy)

    try:
        for energy in energies[1:]:
            advance(energy)
    except TrajectoryTruncated as err:
        warnings.warn(
            f"trajectory '{label}' truncated at "
            f"E = {traj.records[-1].energy:.8g}: {err}", stacklevel=2,
        )
        traj.truncated = True
    return traj


def check_collision(a: Trajectory, b: Trajectory, tol: float = 1e-6) -> list[float]:
    """Energies at which two trajectories land on the same pole (degenerate)."""
    energies = []
    by_energy = {rec.energy: rec for rec in a.records}
    for rec in b.records:
        mate = by_energy.get(rec.energy)
        if mate is not None and abs(mate.lambda_bar - rec.lambda_bar) < tol:
            energies.append(rec.energy)
    return energies


# ---------------------------------------------------------------------------
# polyline self-intersections
# ---------------------------------------------------------------------------

def _orient(a: complex, b: complex, c: complex) -> float:
    """Twice the signed area of the triangle (a, b, c)."""
    return (b.real - a.real) * (c.imag - a.imag) \
        - (b.imag - a.imag) * (c.real - a.real)


def polyline_self_intersections(energies, points) -> list[SelfIntersection]:
    """Proper crossings between non-adjacent segments of a polyline.

    Each crossing reports the intersection point and the energies linearly
    interpolated along the two segments.
    """
    points = np.asarray(points, dtype=complex)
    energies = np.asarray(energies, dtype=float)
    crossings = []
    n_seg = len(points) - 1
    for i in range(n_seg):
        p1, p2 = points[i], points[i + 1]
        for j in range(i + 2, n_seg):
            q1, q2 = points[j], points[j + 1]
            o1 = _orient(p1, p2, q1)
            o2 = _orient(p1, p2, q2)
            o3 = _orient(q1, q2, p1)
            o4 = _orient(q1, q2, p2)
            if not (o1 * o2 < 0.0 and o3 * o4 < 0.0):
                continue
            # proper crossing: solve p1 + t (p2-p1) = q1 + s (q2-q1)
            d = p2 - p1
            e = q2 - q1
            denom = d.real * e.imag - d.imag * e.real
            w = q1 - p1
            t = (w.real * e.imag - w.imag * e.real) / denom
            s = (w.real * d.imag - w.imag * d.real) / denom
            crossings.append(SelfIntersection(
                energy_a=energies[i] + t * (energies[i + 1] - energies[i]),
                energy_b=energies[j] + s * (energies[j + 1] - energies[j]),
                point=p1 + t * d,
            ))
    return crossings


# ---------------------------------------------------------------------------
# seed scanning
# ---------------------------------------------------------------------------

def delta_grid(model: PotentialModel, energy: float, re_values, im_values,
               settings: PipelineSettings = PipelineSettings()) -> np.ndarray:
    """|delta| over a lam grid (rows: Im, columns: Re), fixed matching radius."""
    re_values = np.asarray(re_values, dtype=float)
    im_values = np.asarray(im_values, dtype=float)
    corner = complex(re_values.max(), im_values.max())
    frozen = 1.2 * resolve_r_match(model, energy, corner, settings)
    grid = np.empty((len(im_values), len(re_values)))
    for i, im in enumerate(im_values):
        for j, re in enumerate(re_values):
            grid[i, j] = abs(solve_scattering(
                model, energy, complex(re, im), settings,
                r_match=frozen, compute_s=False,
            ).delta)
    return grid


def scan_pole_seeds(model: PotentialModel, energy: float,
                    settings: PipelineSettings = PipelineSettings(),
                    re_max: float = 6.0, im_max: float = 1.2,
                    re_count: int = 61, im_count: int = 25,
                    rel_threshold: float = 0.5) -> list[complex]:
    """Candidate pole positions from local minima of |delta| on a coarse grid.

    Interior grid points strictly below all eight neighbours and below
    ``rel_threshold`` times the grid median become seeds, ordered by depth.
    """
    re_values = np.linspace(0.0, re_max, re_count)
    im_values = np.linspace(0.0, im_max, im_count)
    grid = delta_grid(model, energy, re_values, im_values, settings)
    cutoff = rel_threshold * np.median(grid)
    seeds = []
    for i in range(1, len(im_values) - 1):
        for j in range(1, len(re_values) - 1):
            val = grid[i, j]
            if val >= cutoff:
                continue
            neighbours = grid[i - 1:i + 2, j - 1:j + 2].copy()
            neighbours[1, 1] = np.inf
            if val < neighbours.min():
                seeds.append((val, complex(re_values[j], im_values[i])))
    seeds.sort(key=lambda item: item[0])
    return [lam for _, lam in seeds]


def find_poles_in_box(model: PotentialModel, energy: float,
                      settings: PipelineSettings = PipelineSettings(),
                      search: PoleSearchSettings = PoleSearchSettings(),
                      re_max: float = 6.0, im_max: float = 1.2,
                      re_step: float = 0.05,
                      im_levels=(0.004, 0.02, 0.08, 0.2, 0.5),
                      dedupe_tol: float = 1e-6,
                      max_certificate: float = 1e-6) -> list[ReggePoleRecord]:
    """Systematic pole inventory: polish from a lattice of starting points.

    Sharp poles hugging the real axis produce |delta| dips far narrower
    than any affordable heat-map grid, so instead of grid minima this
    walks a lattice of Muller starts (dense in Re, a few heights in Im)
    and keeps every distinct certified pole inside the box.  Sorted by
    descending real part.
    """
    found: list[ReggePoleRecord] = []
    for re in np.arange(re_step, re_max + 1e-12, re_step):
        for im in im_levels:
            if im > im_max:
                continue
            try:
                rec = find_model_pole(model, energy, complex(re, im),
                                      settings, search)
            except (PoleConvergenceError, IllConditionedMatchError):
                continue
            lam = rec.lambda_bar
            if not (0.0 < lam.real <= re_max and 0.0 < lam.imag <= im_max):
                continue
            if rec.certificate > max_certificate:
                continue
            if all(abs(lam - other.lambda_bar) > dedupe_tol for other in found):
                found.append(rec)
    found.sort(key=lambda rec: -rec.lambda_bar.real)
    return found


def refine_turns(model: PotentialModel, traj: Trajectory,
                 settings: PipelineSettings = PipelineSettings(),
                 search: PoleSearchSettings = PoleSearchSettings(),
                 max_turn_deg: float = 25.0, min_energy_step: float = 1e-4,
                 max_rounds: int = 6, with_residues: bool = False) -> Trajectory:
    """Insert energies wherever the traced polyline turns sharply.

    Tight features (loops from trajectory collisions) can hide between grid
    energies; bisecting every interval adjacent to a sharp turn until all
    turn angles fall below ``max_turn_deg`` resolves them.
    """
    cos_limit = np.cos(np.radians(max_turn_deg))
    for _ in range(max_rounds):
        recs = traj.records
        new_energies = set()
        pos = traj.positions
        ens = traj.energies
        for i in range(1, len(recs) - 1):
            a = pos[i] - pos[i - 1]
            b = pos[i + 1] - pos[i]
            if abs(a) == 0.0 or abs(b) == 0.0:
                continue
            cos_turn = (a.real * b.real + a.imag * b.imag) / (abs(a) * abs(b))
            if cos_turn < cos_limit:
                for lo, hi in ((i - 1, i), (i, i + 1)):
                    if ens[hi] - ens[lo] > 2.0 * min_energy_step:
                        new_energies.add(0.5 * (ens[lo] + ens[hi]))
        if not new_energies:
            break
        for energy in sorted(new_energies):
            idx = int(np.searchsorted(traj.energies, energy))
            lo, hi = traj.records[idx - 1], traj.records[idx]
            de = hi.energy - lo.energy
            guess = lo.lambda_bar + (hi.lambda_bar - lo.lambda_bar) \
                * (energy - lo.energy) / de
            try:
                rec = find_model_pole(model, energy, guess, settings, search)
            except (PoleConvergenceError, IllConditionedMatchError):
                continue
            if with_residues and rec.residues is None:
                rec.residues = residues(model, rec, settings)
            traj.records.insert(idx, rec)
    return traj


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

def write_trajectory_csv(path, traj: Trajectory, n_channels: int,
                         precision: int = 12) -> None:
    """Trajectory CSV: E, Re/Im of the pole, iterations, certificate, then
    Re/Im of the residue entries row-major (nan when not computed)."""
    from ._csvio import atomic_write_text, fmt

    header = ["E", "re_lambda", "im_lambda", "iterations", "certificate"]
    for i in range(1, n_channels + 1):
        for j in range(1, n_channels + 1):
            header += [f"re_rho{i}{j}", f"im_rho{i}{j}"]
    lines = [",".join(header)]
    for rec in traj.records:
        row = [fmt(rec.energy, precision), fmt(rec.lambda_bar.real, precision),
               fmt(rec.lambda_bar.imag, precision), str(rec.iterations),
               fmt(rec.certificate, precision)]
        if rec.residues is None:
            row += ["nan", "nan"] * (n_channels * n_channels)
        else:
            for value in rec.residues.ravel():
                row += [fmt(value.real, precision), fmt(value.imag, precision)]
        lines.append(",".join(row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_intersections_csv(path, crossings, precision: int = 12) -> None:
    """Self-intersection CSV: interpolated energies on both segments and the
    crossing point."""
    from ._csvio import atomic_write_text, fmt

    lines = ["E_a,E_b,re_lambda_x,im_lambda_x"]
    for x in crossings:
        lines.append(",".join([
            fmt(x.energy_a, precision), fmt(x.energy_b, precision),
            fmt(x.point.real, precision), fmt(x.point.imag, precision),
        ]))
    atomic_write_text(path, "\n".join(lines) + "\n")
