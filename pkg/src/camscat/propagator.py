"""Adaptive outward integration of the coupled radial equations.

The bundle of N solution columns is advanced as one first-order system of
dimension 2 N^2 (values and derivatives together) so that all columns share
the same step sequence:

    phi''(r) = [(lam^2 - 1/4)/r^2] phi + 2 (V(r) - E) phi.

The stepper is an embedded Dormand-Prince 5(4) pair with per-component
mixed absolute/relative error control.  Models that expose a compiled
kernel run in the numba core (`_fastpath`); any other model is integrated
by a pure-Python twin of the same tableau.

Growth control: whenever the bundle's max magnitude exceeds
``rescale_threshold`` all columns and derivatives are divided by it and the
log of the factor accumulates in ``RadialState.log_scale``.  Closed
channels and large angular momenta grow exponentially; S-matrix assembly is
invariant under this common rescaling, but components driven far below
``abs_tol`` by a rescale lose individual error control, so deeply closed
channels should keep the matching radius moderate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _fastpath
from .potential import KERNEL_NONE, PotentialModel
from .series_start import RadialState


class PropagationError(RuntimeError):
    """Integration failed; carries the last radius reached."""

    def __init__(self, message: str, r_reached: float, steps: int):
        super().__init__(f"{message} (reached r = {r_reached:.6g} after {steps} steps)")
        self.r_reached = r_reached
        self.steps = steps


@dataclass(frozen=True)
class PropagationSettings:
    """Step control and matching radius for the outward integration."""

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 3.0
    initial_step: float = 1e-4
    r_match: float = 60.0
    max_steps: int = 1_000_000
    rescale_threshold: float = 1e150

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol < 0:
            raise ValueError("tolerances must be positive")
        if self.max_step <= 0 or self.initial_step <= 0:
            raise ValueError("step bounds must be positive")


def propagate(
    model: PotentialModel,
    state: RadialState,
    settings: PropagationSettings,
    r_end: float | None = None,
    fixed_step: float = 0.0,
) -> RadialState:
    """Advance a RadialState to r_end (default: settings.r_match).

    ``fixed_step > 0`` disables the error control and marches with a
    constant step (diagnostic mode for order verification).
    """
    n = model.n_channels
    if state.phi.shape != (n, n):
        raise ValueError(
            f"state carries {state.phi.shape} columns for an {n}-channel model"
        )
    target = settings.r_match if r_end is None else float(r_end)
    if target <= state.r:
        raise ValueError(f"target radius {target} must exceed state radius {state.r}")

    y = np.concatenate([state.phi.ravel(), state.dphi.ravel()]).astype(np.complex128)
    kind, params = model.kernel_spec()
    if kind != KERNEL_NONE:
        status, steps, log_rescale, r_reached = _fastpath.propagate_kernel(
            kind,
            np.asarray(params, dtype=np.float64),
            n,
            float(state.energy),
            complex(state.lam),
            float(state.r),
            target,
            y,
            settings.rel_tol,
            settings.abs_tol,
            settings.initial_step,
            settings.max_step,
            settings.max_steps,
            settings.rescale_threshold,
            float(fixed_step),
        )
    else:
        status, steps, log_rescale, r_reached = _propagate_python(
            model, n, float(state.energy), complex(state.lam), float(state.r),
            target, y, settings, float(fixed_step),
        )

    if status == _fastpath.STATUS_STEP_UNDERFLOW:
        raise PropagationError("step size underflow", r_reached, steps)
    if status == _fastpath.STATUS_STEP_BUDGET:
        raise PropagationError(
            f"step budget of {settings.max_steps} exhausted", r_reached, steps
        )
    if status == _fastpath.STATUS_NOT_FINITE:
        raise PropagationError("solution norm overflowed", r_reached, steps)

    nn = n * n
    return RadialState(
        r=target,
        phi=y[:nn].reshape(n, n),
        dphi=y[nn:].reshape(n, n),
        energy=state.energy,
        lam=state.lam,
        log_scale=state.log_scale + log_rescale,
    )


def _propagate_python(model, n, energy, lam, r_start, r_end, y, settings,
                      fixed_step):
    """Pure-Python twin of the compiled kernel for models without one."""
    a_tab = _fastpath._A
    b_tab = _fastpath._B
    e_tab = _fastpath._E
    c_tab = _fastpath._C
    nn = n * n
    dim = 2 * nn
    two_e = 2.0 * energy
    cent = lam * lam - 0.25

    def rhs(r, vec):
        out = np.empty(dim, np.complex128)
        out[:nn] = vec[nn:]
        v = model.evaluate(r)
        phi = vec[:nn].reshape(n, n)
        out[nn:] = ((cent / (r * r) - two_e) * phi + 2.0 * (v @ phi)).ravel()
        return out

    adaptive = fixed_step <= 0.0
    h = settings.initial_step if adaptive else fixed_step
    h = min(h, settings.max_step)
    r = r_start
    steps = 0
    log_rescale = 0.0
    k = np.empty((7, dim), np.complex128)
    k[0] = rhs(r, y)

    while r < r_end:
        if steps >= settings.max_steps:
            return _fastpath.STATUS_STEP_BUDGET, steps, log_rescale, r
        if adaptive and h < 1e-14 * max(1.0, abs(r)):
            return _fastpath.STATUS_STEP_UNDERFLOW, steps, log_rescale, r
        h = min(h, r_end - r)

        for s in range(1, 6):
            y_stage = y + h * (a_tab[s, :s] @ k[:s])
            k[s] = rhs(r + c_tab[s] * h, y_stage)
        y_new = y + h * (b_tab[:6] @ k[:6])
        # stage 7 sits at (r+h, y_new): valid as FSAL first stage after accept
        k[6] = rhs(r + h, y_new)
        err = h * (e_tab @ k)

        if adaptive:
            w = settings.abs_tol + settings.rel_tol * np.maximum(
                np.abs(y), np.abs(y_new)
            )
            err_norm = np.sqrt(np.mean(np.abs(err / w) ** 2))
            if not np.isfinite(err_norm):
                return _fastpath.STATUS_NOT_FINITE, steps, log_rescale, r
        else:
            err_norm = 0.0

        steps += 1
        if err_norm <= 1.0:
            r += h
            y[:] = y_new
            amax = np.abs(y).max()
            if amax > settings.rescale_threshold:
                y /= amax
                k[6] /= amax
                log_rescale += np.log(amax)
            k[0] = k[6]
            if adaptive:
                factor = 5.0 if err_norm == 0.0 else min(5.0, 0.9 * err_norm**-0.2)
                h = min(h * factor, settings.max_step)
        else:
            h *= max(0.2, 0.9 * err_norm**-0.2)

    return _fastpath.STATUS_OK, steps, log_rescale, r
