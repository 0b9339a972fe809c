"""Time integration of u_t = Lap(u) + P(u) (+ optional forcing).

First-order IMEX stepping: backward Euler on the diffusion (one
symmetric-positive-definite tridiagonal solve per step), forward Euler on
the reaction.  Step control halves dt when the explicit increment
dt*sup|P(u)| exceeds its limit or the linear solve degrades, and doubles
it back (up to dt_max) after ten smooth steps.  All failure modes land in
the trajectory status, never in exceptions.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import exprlang, problem
from .functionals import action
from .grid import Field, SpatialGrid, laplacian_values, sup_norm, write_field_csv
from .nonlinearity import Nonlinearity, RangeOverflowError
from .tridiag import ImplicitDiffusionSolver

__all__ = [
    "StepControl",
    "StopRule",
    "DiagnosticSeries",
    "Trajectory",
    "imex_step",
    "run",
    "mms_verify",
    "MmsReport",
    "RUNNING",
    "CONVERGED",
    "BLOW_UP",
    "T_MAX_REACHED",
]

RUNNING = "running"
CONVERGED = "converged"
BLOW_UP = "blow_up"
T_MAX_REACHED = "t_max_reached"

_SMOOTH_STEPS_BEFORE_DOUBLING = 10
_LINEAR_SOLVE_TOL = 1e-12


@dataclass(frozen=True)
class StepControl:
    dt_init: float = 1e-3
    dt_min: float = 1e-9
    dt_max: float = 1e-2
    safety: float = 0.9
    sup_guard: float = 1e6
    increment_limit: float = 0.1

    def __post_init__(self):
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        if not self.sup_guard > 0:
            raise ValueError("sup_guard > 0 required")
        if not self.increment_limit > 0:
            raise ValueError("increment_limit > 0 required")


@dataclass(frozen=True)
class StopRule:
    """Convergence is sup|Lap(u) + P(u)| < tol_eq."""

    tol_eq: float = 1e-8


class DiagnosticSeries:
    """Per-step record: t, dt, sup_norm, action, energy_cum, ut_sup."""

    COLUMNS = ("t", "dt", "sup_norm", "action", "energy_cum", "ut_sup")

    def __init__(self):
        self._rows = {c: [] for c in self.COLUMNS}

    def append(self, t, dt, sup, act, energy_cum, ut_sup):
        r = self._rows
        r["t"].append(t)
        r["dt"].append(dt)
        r["sup_norm"].append(sup)
        r["action"].append(act)
        r["energy_cum"].append(energy_cum)
        r["ut_sup"].append(ut_sup)

    def __len__(self):
        return len(self._rows["t"])

    def __getattr__(self, name):
        if name in DiagnosticSeries.COLUMNS:
            return np.asarray(self._rows[name])
        raise AttributeError(name)

    def write_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write(",".join(self.COLUMNS) + "\n")
            for i in range(len(self)):
                f.write(",".join(f"{self._rows[c][i]:.17g}" for c in self.COLUMNS))
                f.write("\n")


@dataclass
class Trajectory:
    snapshots: list  # [(t, Field)] at the configured stride, plus first/last
    diagnostics: DiagnosticSeries
    status: str
    first_field: Field
    final_field: Field
    final_time: float
    steps: int
    escape_sign: int = 0  # sign of the extremum when status is blow_up

    def summary_dict(self) -> dict:
        d = self.diagnostics
        out = {
            "status": self.status,
            "final_time": self.final_time,
            "steps": self.steps,
            "final_sup_norm": float(d.sup_norm[-1]) if len(d) else None,
            "final_ut_sup": float(d.ut_sup[-1]) if len(d) else None,
            "final_action": float(d.action[-1]) if len(d) else None,
            "energy_cum": float(d.energy_cum[-1]) if len(d) else None,
        }
        if self.status == BLOW_UP:
            out["escape_sign"] = self.escape_sign
        return out

    def write_outputs(self, out_dir) -> None:
        os.makedirs(out_dir, exist_ok=True)
        self.diagnostics.write_csv(os.path.join(out_dir, "diagnostics.csv"))
        for t, f in self.snapshots:
            write_field_csv(f, os.path.join(out_dir, f"snap_{t:.6f}.csv"))
        with open(os.path.join(out_dir, "run_summary.json"), "w") as f:
            json.dump(self.summary_dict(), f, indent=2)
            f.write("\n")


@lru_cache(maxsize=128)
def _solver(grid: SpatialGrid, dt: float) -> ImplicitDiffusionSolver:
    return ImplicitDiffusionSolver(grid, dt)


class _LinearSolveDegraded(ArithmeticError):
    pass


def imex_step(u: Field, dt: float, nl: Nonlinearity, forcing=None) -> Field:
    """One IMEX step: solve (I - dt*Lap) u_next = u + dt*(P(u) + forcing).

    Raises RangeOverflowError when the right side is non-finite (blow-up
    evidence for the driver).
    """
    explicit = nl.apply_P_values(u.values)
    if forcing is not None:
        explicit = explicit + (forcing.values if isinstance(forcing, Field) else forcing)
    rhs = u.values + dt * explicit
    if not np.all(np.isfinite(rhs)):
        raise RangeOverflowError("non-finite right side in IMEX step")
    solver = _solver(u.grid, float(dt))
    x = solver.solve(rhs)
    if solver.relative_residual(x, rhs) > _LINEAR_SOLVE_TOL:
        raise _LinearSolveDegraded("tridiagonal solve residual above 1e-12")
    return Field(u.grid, x)


def run(
    spec: problem.ProblemSpec,
    u0: Field,
    ctrl: StepControl,
    t_max: float,
    stop: StopRule = StopRule(),
    *,
    forcing=None,
    snapshot_stride: int = 64,
    nl: Nonlinearity | None = None,
) -> Trajectory:
    """Advance from u0 until convergence, blow-up, or t_max.

    forcing, when given, is a callable t -> ndarray added to P(u).
    Identical inputs produce bit-identical trajectories.
    """
    if not t_max > 0:
        raise ValueError("t_max > 0 required")
    g = u0.grid
    if g != problem.make_grid(spec):
        raise ValueError("u0 grid does not match the problem spec")
    if nl is None:
        nl = Nonlinearity(spec, g)

    diag = DiagnosticSeries()
    snaps = [(0.0, u0)]
    u = u0
    t = 0.0
    dt = ctrl.dt_init
    energy = 0.0
    steps = 0
    smooth = 0
    status = RUNNING
    escape_sign = 0
    limit = ctrl.safety * ctrl.increment_limit

    def reaction_and_residual(f: Field):
        p = nl.apply_P_values(f.values)
        resid = laplacian_values(f.values, g) + p
        return p, resid

    try:
        p_now, resid_now = reaction_and_residual(u)
        a_now = action(nl, u).value
    except RangeOverflowError:
        # initial data already beyond polynomial range
        return Trajectory([(0.0, u0)], diag, BLOW_UP, u0, u0, 0.0, 0,
                          escape_sign=_extreme_sign(u0))
    ut_sup = float(np.max(np.abs(resid_now)))
    diag.append(0.0, 0.0, sup_norm(u), a_now, energy, ut_sup)
    if ut_sup < stop.tol_eq:
        status = CONVERGED

    t_end_tol = 1e-12 * max(1.0, t_max)
    while status == RUNNING:
        if t >= t_max - t_end_tol:
            status = T_MAX_REACHED
            break
        dt = min(dt, t_max - t)

        # explicit-increment guard; collapse of dt counts as blow-up evidence
        p_sup = float(np.max(np.abs(p_now)))
        while dt * p_sup > limit:
            dt *= 0.5
            smooth = 0
            if dt < ctrl.dt_min:
                status = BLOW_UP
                escape_sign = _extreme_sign(u)
                break
        if status != RUNNING:
            break

        forcing_now = forcing(t) if forcing is not None else None
        try:
            rhs = u.values + dt * (p_now if forcing_now is None
                                   else p_now + forcing_now)
            if not np.all(np.isfinite(rhs)):
                raise RangeOverflowError("non-finite right side")
            solver = _solver(g, float(dt))
            x = solver.solve(rhs)
            if solver.relative_residual(x, rhs) > _LINEAR_SOLVE_TOL:
                raise _LinearSolveDegraded
            u_next = Field(g, x)
        except (RangeOverflowError, ValueError):
            status = BLOW_UP
            escape_sign = _extreme_sign(u)
            break
        except _LinearSolveDegraded:
            dt *= 0.5
            smooth = 0
            if dt < ctrl.dt_min:
                status = BLOW_UP
                escape_sign = _extreme_sign(u)
                break
            continue

        # windowed energy, accumulated every step regardless of stride
        udot = (u_next.values - u.values) / dt
        energy += 0.5 * dt * g.h * (
            float(np.dot(udot, udot)) + float(np.dot(resid_now, resid_now))
        )

        t += dt
        steps += 1
        u = u_next
        sup_u = sup_norm(u)

        if sup_u > ctrl.sup_guard:
            status = BLOW_UP
            escape_sign = _extreme_sign(u)
            break

        try:
            p_now, resid_now = reaction_and_residual(u)
            a_now = action(nl, u).value
        except RangeOverflowError:
            status = BLOW_UP
            escape_sign = _extreme_sign(u)
            break
        ut_sup = float(np.max(np.abs(resid_now)))
        diag.append(t, dt, sup_u, a_now, energy, ut_sup)
        if steps % snapshot_stride == 0:
            snaps.append((t, u))

        if ut_sup < stop.tol_eq:
            status = CONVERGED
            break

        smooth += 1
        if smooth >= _SMOOTH_STEPS_BEFORE_DOUBLING:
            dt = min(dt * 2.0, ctrl.dt_max)
            smooth = 0

    if snaps[-1][0] != t:
        snaps.append((t, u))
    return Trajectory(
        snapshots=snaps,
        diagnostics=diag,
        status=status,
        first_field=u0,
        final_field=u,
        final_time=t,
        steps=steps,
        escape_sign=escape_sign,
    )


def _extreme_sign(u: Field) -> int:
    v = u.values
    i = int(np.argmax(np.abs(v)))
    return int(np.sign(v[i])) if v[i] != 0 else 0


@dataclass
class MmsLevel:
    grid_points: int
    dt: float
    error: float


@dataclass
class MmsReport:
    levels: list
    orders: list
    converged: bool

    @property
    def observed_order(self) -> float:
        finite = [o for o in self.orders if math.isfinite(o)]
        return finite[-1] if finite else math.nan


_MMS_SPATIAL_FD_STEP = 1e-4  # second differences: balances truncation/roundoff
_MMS_TIME_FD_STEP = 1e-6


def mms_verify(
    spec: problem.ProblemSpec,
    manufactured: tuple,
    refinements: int,
    *,
    dt0: float,
    t_final: float,
) -> MmsReport:
    """Manufactured-solution ladder (h, dt) -> (h/2, dt/2).

    manufactured is a pair (expr_x, expr_t); the exact solution is their
    product X(x)*T(t).  The forcing g = u*_t - Lap(u*) - P(u*) is built
    from tiny-step finite differences of the sampled expressions, accurate
    far below the solver's own discretization error.  Errors are sup-norm
    at t_final; orders are log2 ratios of consecutive errors.
    """
    ex, et = manufactured
    if isinstance(ex, str):
        ex = exprlang.parse(ex)
    if isinstance(et, str):
        et = exprlang.parse(et)

    def t_fun(t):
        return exprlang.evaluate(et, t)

    def t_prime(t):
        e = _MMS_TIME_FD_STEP
        return (exprlang.evaluate(et, t + e) - exprlang.evaluate(et, t - e)) / (2 * e)

    levels = []
    converged = True
    for lev in range(refinements + 1):
        if spec.boundary == "periodic":
            m = spec.grid_points * 2**lev
        else:
            m = (spec.grid_points + 1) * 2**lev - 1  # halves h exactly
        dt = dt0 / 2**lev
        spec_l = spec.with_grid_points(m)
        g = problem.make_grid(spec_l)
        nl = Nonlinearity(spec_l, g)

        xs = g.nodes
        x_samples = exprlang.sample(ex, xs)
        e = _MMS_SPATIAL_FD_STEP
        x_plus = exprlang.sample(ex, xs + e)
        x_minus = exprlang.sample(ex, xs - e)
        x_second = (x_plus - 2.0 * x_samples + x_minus) / e**2

        def forcing(t, _x=x_samples, _xpp=x_second, _nl=nl):
            tt = t_fun(t)
            ustar = _x * tt
            return _x * t_prime(t) - _xpp * tt - _nl.apply_P_values(ustar)

        u0 = Field(g, x_samples * t_fun(0.0))
        ctrl = StepControl(dt_init=dt, dt_min=dt, dt_max=dt,
                           safety=1.0, increment_limit=1e9,
                           sup_guard=spec.sup_guard)
        traj = run(spec_l, u0, ctrl, t_max=t_final, stop=StopRule(tol_eq=0.0),
                   forcing=forcing, snapshot_stride=10**9, nl=nl)
        if traj.status != T_MAX_REACHED:
            converged = False
            levels.append(MmsLevel(m, dt, math.nan))
            continue
        exact = x_samples * t_fun(traj.final_time)
        err = float(np.max(np.abs(traj.final_field.values - exact)))
        levels.append(MmsLevel(m, dt, err))

    orders = []
    for a, b in zip(levels, levels[1:]):
        if math.isfinite(a.error) and math.isfinite(b.error) and a.error > 0 and b.error > 0:
            orders.append(math.log2(a.error / b.error))
        else:
            orders.append(math.nan)
    return MmsReport(levels=levels, orders=orders, converged=converged)
