"""Action functional, windowed energy accumulation, and their identity.

The action is implemented with a negative gradient term,

    A(u) = -(1/2) integral |grad u|^2 + integral Q(u, x),

Q the potential of P, so that its discrete gradient is exactly
laplacian(u) + P(u) and A is non-decreasing along the flow.  The
positive-gradient variant is available separately for comparison.

The windowed energy accumulates

    (1/2) dt [ integral ((u_after - u_before)/dt)^2
             + integral (laplacian(u_before) + P(u_before))^2 ]

per step; along a trajectory it telescopes against the action difference
up to the time-discretization error.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import isfinite

import numpy as np

from .grid import Field, dirichlet_energy, integrate, laplacian_values, same_grid
from .nonlinearity import Nonlinearity, RangeOverflowError

__all__ = [
    "ActionValue",
    "EnergyAccumulator",
    "action",
    "action_literal_gradient_sign",
    "energy_step",
    "identity_residual",
]


@dataclass(frozen=True)
class ActionValue:
    value: float
    dirichlet_part: float
    potential_part: float


def action(nl: Nonlinearity, u: Field) -> ActionValue:
    dir_part = dirichlet_energy(u)
    pot_part = integrate(nl.potential(u))
    value = -dir_part + pot_part
    if not (isfinite(dir_part) and isfinite(pot_part)):
        raise RangeOverflowError("non-finite action integrand")
    return ActionValue(value=value, dirichlet_part=dir_part, potential_part=pot_part)


def action_literal_gradient_sign(nl: Nonlinearity, u: Field) -> float:
    """The +(1/2)|grad u|^2 sign variant, kept for comparison only."""
    a = action(nl, u)
    return a.dirichlet_part + a.potential_part


@dataclass(frozen=True)
class EnergyAccumulator:
    """Non-decreasing cumulative energy over a time window."""

    cumulative: float = 0.0
    window_start_t: float = 0.0
    last_t: float = 0.0


def energy_step(
    acc: EnergyAccumulator,
    u_before: Field,
    u_after: Field,
    dt: float,
    nl: Nonlinearity,
) -> EnergyAccumulator:
    """Append one step's energy; returns a new accumulator."""
    if not dt > 0:
        raise ValueError("dt > 0 required")
    g = same_grid(u_before, u_after)
    udot = (u_after.values - u_before.values) / dt
    resid = laplacian_values(u_before.values, g) + nl.apply_P_values(u_before.values)
    addend = 0.5 * dt * g.h * (float(np.dot(udot, udot)) + float(np.dot(resid, resid)))
    if not isfinite(addend):
        raise RangeOverflowError("non-finite energy addend")
    return EnergyAccumulator(
        cumulative=acc.cumulative + addend,
        window_start_t=acc.window_start_t,
        last_t=acc.last_t + dt,
    )


def identity_residual(traj, nl: Nonlinearity) -> float:
    """|E_window - (A(end) - A(start))| over a recorded trajectory.

    Zero for an exact flow; strictly positive for non-solutions.
    """
    if len(traj.diagnostics) == 0:
        return 0.0
    e_window = traj.diagnostics.energy_cum[-1] - traj.diagnostics.energy_cum[0]
    a_start = action(nl, traj.first_field).value
    a_end = action(nl, traj.final_field).value
    return abs(e_window - (a_end - a_start))
