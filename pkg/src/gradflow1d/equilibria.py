"""Equilibrium solutions of Lap(u) + P(u) = 0 on the grid.

Sources: real roots of the scalar polynomial for spatially constant
coefficients, damped Newton refinement of grid guesses, and phase-plane
shooting on the steady ODE u'' = -P(u).  Every returned equilibrium
carries its residual, action value, and box-relative boundedness flags.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .functionals import action
from .grid import Field, SpatialGrid, laplacian_values
from .nonlinearity import Nonlinearity, RangeOverflowError
from .tridiag import SingularSystemError, cyclic_thomas_solve, thomas_solve

__all__ = [
    "Equilibrium",
    "NonConstantCoefficientsError",
    "NewtonNoConvergenceError",
    "SingularJacobianError",
    "PowerIterationError",
    "ShootingPath",
    "UnstableDirection",
    "constant_equilibria",
    "newton_refine",
    "shoot",
    "classify_boundedness",
    "unstable_direction",
    "real_polynomial_roots",
]

log = logging.getLogger(__name__)

RESIDUAL_TOL_CONSTANT = 1e-10
RESIDUAL_TOL_NEWTON = 1e-10
RESIDUAL_TOL_SHOOTING = 1e-8
_PIVOT_FLOOR = 1e-14


class NonConstantCoefficientsError(ValueError):
    pass


class NewtonNoConvergenceError(ArithmeticError):
    pass


class SingularJacobianError(ArithmeticError):
    """A Jacobian pivot fell below the 1e-14 floor."""


class PowerIterationError(ArithmeticError):
    pass


@dataclass(frozen=True)
class Equilibrium:
    field: Field
    residual: float
    action: float
    bounded_below: bool
    bounded_above: bool
    source: str  # constant | newton | shooting


def equilibrium_residual(nl: Nonlinearity, values: np.ndarray) -> float:
    r = laplacian_values(values, nl.grid) + nl.apply_P_values(values)
    return float(np.max(np.abs(r)))


def classify_boundedness(eq_or_field, thresholds: tuple[float, float]):
    """Compare sample min/max against (lower, upper) thresholds."""
    f = eq_or_field.field if isinstance(eq_or_field, Equilibrium) else eq_or_field
    lo, hi = thresholds
    return bool(f.values.min() >= lo), bool(f.values.max() <= hi)


def _make_equilibrium(nl, values, source, thresholds=None) -> Equilibrium:
    f = Field(nl.grid, values)
    if thresholds is None:
        thresholds = (-nl.spec.sup_guard, nl.spec.sup_guard)
    try:
        a = action(nl, f).value
    except RangeOverflowError:
        raise RangeOverflowError(
            f"{source} equilibrium rejected: non-finite action"
        ) from None
    below, above = classify_boundedness(f, thresholds)
    return Equilibrium(
        field=f,
        residual=equilibrium_residual(nl, values),
        action=a,
        bounded_below=below,
        bounded_above=above,
        source=source,
    )


# -- scalar polynomial roots ------------------------------------------------


def _poly_eval(coeffs, c):
    acc = 0.0
    for a in reversed(coeffs):
        acc = acc * c + a
    return acc


def real_polynomial_roots(coeffs) -> list[float]:
    """All real roots of p(c) = sum coeffs[i] c^i, ascending coefficients.

    Sign-change bracketing on [-R, R], R = 1 + max|a_i|/|lead| (Cauchy-style
    bound), bisection to 1e-14.  Even-multiplicity roots leave no sign
    change, so critical points of p (found recursively) are probed as well.
    """
    c = [float(v) for v in coeffs]
    while c and c[-1] == 0.0:
        c.pop()
    deg = len(c) - 1
    if deg <= 0:
        return []
    if deg == 1:
        return [-c[0] / c[1]]

    lead = c[-1]
    radius = 1.0 + max(abs(v) for v in c[:-1]) / abs(lead)
    deriv = [i * c[i] for i in range(1, len(c))]
    crit = [v for v in real_polynomial_roots(deriv) if abs(v) <= radius]

    roots = []
    for v in crit:
        scale = sum(abs(a) * abs(v) ** i for i, a in enumerate(c))
        if abs(_poly_eval(c, v)) <= 64 * np.finfo(float).eps * max(scale, 1e-300):
            roots.append(v)

    knots = sorted({-radius, radius, *crit})
    for a, b in zip(knots, knots[1:]):
        fa, fb = _poly_eval(c, a), _poly_eval(c, b)
        if fa == 0.0:
            roots.append(a)
            continue
        if fb == 0.0:
            continue  # handled as the left end of the next interval
        if fa * fb < 0.0:
            lo, hi, flo = a, b, fa
            while hi - lo > 1e-14:
                mid = 0.5 * (lo + hi)
                fm = _poly_eval(c, mid)
                if fm == 0.0:
                    lo = hi = mid
                    break
                if flo * fm < 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fm
            roots.append(0.5 * (lo + hi))
    if _poly_eval(c, knots[-1]) == 0.0:
        roots.append(knots[-1])

    # Newton polish, then merge near-duplicates
    polished = []
    for r in roots:
        v = r
        for _ in range(4):
            dp = _poly_eval(deriv, v)
            if dp == 0.0:
                break
            step = _poly_eval(c, v) / dp
            if not math.isfinite(step) or abs(step) > 1e-6:
                break
            v -= step
        polished.append(v)
    polished.sort()
    merged = []
    for v in polished:
        if not merged or abs(v - merged[-1]) > 1e-10:
            merged.append(v)
    return merged


def constant_equilibria(nl: Nonlinearity, tol: float = RESIDUAL_TOL_CONSTANT,
                        thresholds=None) -> list[Equilibrium]:
    """Spatially constant equilibria (requires constant coefficients).

    Roots whose constant field does not meet the discrete residual bound on
    this grid (nonzero constants under dirichlet0 walls) are dropped with a
    log record.
    """
    if not nl.spatially_constant():
        raise NonConstantCoefficientsError(
            "constant equilibria require spatially constant coefficients"
        )
    consts = nl.constant_coefficients()
    n = nl.degree
    out = []
    seen = []
    if nl.signed_power:
        # -c|c|^{N-1} equals -c^N for c >= 0 and (-1)^N c^N for c < 0;
        # probe both polynomial branches on their own half-lines
        pos = [r for r in real_polynomial_roots(list(consts) + [-1.0])
               if r >= -1e-14]
        neg = [r for r in real_polynomial_roots(list(consts) + [(-1.0) ** n])
               if r < 0.0]
        candidates = sorted(pos + neg)
    else:
        candidates = real_polynomial_roots(list(consts) + [-1.0])
    for root in candidates:
        values = np.full(nl.grid.m, root)
        resid = equilibrium_residual(nl, values)
        if resid > tol:
            log.info("constant root %.17g dropped: residual %.3g > %.3g on %s grid",
                     root, resid, tol, nl.grid.boundary)
            continue
        if any(abs(root - s) <= 1e-10 for s in seen):
            continue
        seen.append(root)
        try:
            out.append(_make_equilibrium(nl, values, "constant", thresholds))
        except RangeOverflowError as e:
            log.warning("%s", e)
    return out


# -- Newton refinement -------------------------------------------------------


def _jacobian_solve(grid: SpatialGrid, dp: np.ndarray, rhs: np.ndarray):
    """Solve (Lap_h + diag(dp)) delta = rhs, tracking the smallest pivot."""
    m = grid.m
    inv_h2 = 1.0 / grid.h**2
    diag = -2.0 * inv_h2 + dp
    sub = np.full(m - 1, inv_h2)
    sup = np.full(m - 1, inv_h2)
    if grid.boundary == "periodic":
        x, _ = cyclic_thomas_solve(sub, diag, sup, inv_h2, inv_h2, rhs,
                                   pivot_floor=_PIVOT_FLOOR)
        return x
    if grid.boundary == "neumann0":
        diag = diag.copy()
        diag[0] += inv_h2
        diag[-1] += inv_h2
    x, _ = thomas_solve(sub, diag, sup, rhs, pivot_floor=_PIVOT_FLOOR)
    return x


def newton_refine(nl: Nonlinearity, guess: Field, max_iter: int = 50,
                  tol: float = RESIDUAL_TOL_NEWTON, thresholds=None) -> Equilibrium:
    """Damped Newton on F(u) = Lap(u) + P(u).

    Step halving (up to 8 times) when the residual does not decrease.
    Raises NewtonNoConvergenceError or SingularJacobianError.
    """
    u = np.array(guess.values, dtype=float)
    resid = laplacian_values(u, nl.grid) + nl.apply_P_values(u)
    r = float(np.max(np.abs(resid)))
    for _ in range(max_iter):
        if r < tol:
            return _make_equilibrium(nl, u, "newton", thresholds)
        dp = nl.apply_dP(Field(nl.grid, u)).values
        try:
            delta = _jacobian_solve(nl.grid, dp, -resid)
        except SingularSystemError as e:
            raise SingularJacobianError(str(e)) from e
        step = 1.0
        for _ in range(9):
            trial = u + step * delta
            try:
                resid_t = laplacian_values(trial, nl.grid) + nl.apply_P_values(trial)
            except RangeOverflowError:
                step *= 0.5
                continue
            r_t = float(np.max(np.abs(resid_t)))
            if r_t < r:
                break
            step *= 0.5
        else:
            raise NewtonNoConvergenceError(
                f"step halving stalled at residual {r:.3g}"
            )
        u, resid, r = trial, resid_t, r_t
    if r < tol:
        return _make_equilibrium(nl, u, "newton", thresholds)
    raise NewtonNoConvergenceError(f"residual {r:.3g} after {max_iter} iterations")


# -- phase-plane shooting ----------------------------------------------------


@dataclass
class ShootingPath:
    xs: np.ndarray
    us: np.ndarray
    vs: np.ndarray
    escaped: bool
    escape_sign: int
    h_drift: float | None  # conserved-quantity drift, constant coefficients only


def shoot(nl: Nonlinearity, u_left: float, slope_left: float,
          x_span: tuple[float, float], h_ode: float | None = None,
          escape_threshold: float | None = None) -> ShootingPath:
    """RK4 on the steady phase-plane system (u, v): u' = v, v' = -P(u).

    Escape (|u| beyond the threshold) is flagged, not an error.  For
    spatially constant coefficients the drift of H = v^2/2 + Q(u) is
    reported.
    """
    x0, x1 = x_span
    if not x1 > x0:
        raise ValueError("x_span must be increasing")
    h_cap = nl.grid.h / 4.0
    h = h_cap if h_ode is None else min(float(h_ode), h_cap)
    n_steps = max(1, math.ceil((x1 - x0) / h))
    h = (x1 - x0) / n_steps
    thr = nl.spec.sup_guard if escape_threshold is None else float(escape_threshold)

    constant = nl.spatially_constant()
    if constant:
        coeffs = nl.constant_coefficients()
        x_mid = 0.0

        def p_of(u, _x):
            acc = 0.0
            for a in reversed(coeffs):
                acc = acc * u + a
            n = nl.degree
            if not nl.disable_leading:
                acc -= u * abs(u) ** (n - 1) if nl.signed_power else u**n
            return acc
    else:
        p_of = nl.scalar_P

    xs = [x0]
    us = [float(u_left)]
    vs = [float(slope_left)]
    u, v, x = float(u_left), float(slope_left), x0
    escaped = False
    sign = 0
    for _ in range(n_steps):
        try:
            k1u, k1v = v, -p_of(u, x)
            k2u = v + 0.5 * h * k1v
            k2v = -p_of(u + 0.5 * h * k1u, x + 0.5 * h)
            k3u = v + 0.5 * h * k2v
            k3v = -p_of(u + 0.5 * h * k2u, x + 0.5 * h)
            k4u = v + h * k3v
            k4v = -p_of(u + h * k3u, x + h)
            u = u + (h / 6.0) * (k1u + 2 * k2u + 2 * k3u + k4u)
            v = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
        except OverflowError:
            escaped = True
            sign = 1 if u > 0 else -1
            break
        x += h
        if not (math.isfinite(u) and math.isfinite(v)):
            escaped = True
            sign = 1 if us[-1] > 0 else -1
            break
        xs.append(x)
        us.append(u)
        vs.append(v)
        if abs(u) > thr:
            escaped = True
            sign = 1 if u > 0 else -1
            break

    drift = None
    if constant:
        uu = np.asarray(us)
        vv = np.asarray(vs)
        q = np.array([nl.scalar_potential(val, x_mid) for val in uu])
        hh = 0.5 * vv * vv + q
        drift = float(np.max(np.abs(hh - hh[0])))
    return ShootingPath(
        xs=np.asarray(xs), us=np.asarray(us), vs=np.asarray(vs),
        escaped=escaped, escape_sign=sign, h_drift=drift,
    )


# -- leading eigenpair of the linearization ----------------------------------


@dataclass
class UnstableDirection:
    eigenvalue: float
    direction: Field  # sup-norm 1
    degenerate: bool
    iterations: int


def unstable_direction(nl: Nonlinearity, eq: Equilibrium,
                       max_iter: int = 10_000, seed: int = 0) -> UnstableDirection:
    """Leading eigenpair of Lap_h + diag(dP(u)) by shifted power iteration.

    The Gershgorin shift sigma = 1 + 4/h^2 + max(0, -min dP) makes the
    spectrum positive so the top of it dominates.  The start vector is the
    constant mode plus a small seeded perturbation: for spatially constant
    linearizations the constant mode is exactly the leading eigenvector and
    the iteration converges immediately.
    """
    g = nl.grid
    dp = nl.apply_dP(eq.field).values
    sigma = 1.0 + 4.0 / g.h**2 + max(0.0, -float(dp.min()))

    def apply(w):
        return laplacian_values(w, g) + dp * w + sigma * w

    rng = np.random.default_rng(seed)
    w = np.ones(g.m) + 1e-12 * rng.standard_normal(g.m)
    w /= np.linalg.norm(w)
    lam_shifted = 0.0
    for it in range(1, max_iter + 1):
        bw = apply(w)
        lam_shifted = float(np.dot(w, bw))
        resid = float(np.max(np.abs(bw - lam_shifted * w)))
        norm = float(np.linalg.norm(bw))
        if norm == 0.0:
            raise PowerIterationError("iterate vanished")
        w = bw / norm
        if resid <= 1e-8 * max(1.0, abs(lam_shifted)):
            eigenvalue = lam_shifted - sigma
            direction = w / float(np.max(np.abs(w)))
            return UnstableDirection(
                eigenvalue=eigenvalue,
                direction=Field(g, direction),
                degenerate=abs(eigenvalue) < 1e-8,
                iterations=it,
            )
    raise PowerIterationError(f"no convergence after {max_iter} iterations")
