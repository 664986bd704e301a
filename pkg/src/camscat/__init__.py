"""Multichannel scattering at complex angular momentum.

Coupled-channel radial solutions with a Coulomb-singular series start,
S-matrices at complex angular momentum, Regge pole trajectories and
residues, and resonance/background decomposition of integral cross
sections via the Mulholland formula.  Atomic units throughout.
"""

from .potential import (
    AdiabaticBranch,
    CallableModel,
    CoulombModel,
    FreeParticle,
    PotentialModel,
    ThomasFermiChannel,
    TwoChannelThomasFermi,
    adiabatic_curves,
    adiabatic_model,
)
from .propagator import PropagationError, PropagationSettings, propagate
from .series_start import (
    RadialState,
    SeriesSolution,
    initial_conditions,
    initial_state,
    series_coefficients,
)
from .smatrix import (
    MatchResult,
    PipelineSettings,
    channel_wave_vectors,
    delta_fn,
    match,
    s_element,
    solve_scattering,
)
from .special import RiccatiHankelPair, riccati_hankel
from .poles import (
    PoleSearchSettings,
    ReggePoleRecord,
    Trajectory,
    find_model_pole,
    find_pole,
    find_poles_in_box,
    residues,
    scan_pole_seeds,
    trace_trajectory,
)
from .xsec import (
    CrossSectionRecord,
    PartialWaveSettings,
    decompose,
    ics_matrix,
    mulholland_res,
    partial_wave_ics,
)

__version__ = "0.1.0"

__all__ = [
    "AdiabaticBranch",
    "CallableModel",
    "CoulombModel",
    "CrossSectionRecord",
    "FreeParticle",
    "MatchResult",
    "PartialWaveSettings",
    "PipelineSettings",
    "PoleSearchSettings",
    "PotentialModel",
    "PropagationError",
    "PropagationSettings",
    "RadialState",
    "ReggePoleRecord",
    "RiccatiHankelPair",
    "SeriesSolution",
    "ThomasFermiChannel",
    "Trajectory",
    "TwoChannelThomasFermi",
    "adiabatic_curves",
    "adiabatic_model",
    "channel_wave_vectors",
    "decompose",
    "delta_fn",
    "find_model_pole",
    "find_pole",
    "find_poles_in_box",
    "ics_matrix",
    "initial_conditions",
    "initial_state",
    "match",
    "mulholland_res",
    "partial_wave_ics",
    "propagate",
    "residues",
    "riccati_hankel",
    "s_element",
    "scan_pole_seeds",
    "series_coefficients",
    "solve_scattering",
    "trace_trajectory",
]
