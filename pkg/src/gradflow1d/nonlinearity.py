"""Pointwise reaction term P(u), its u-derivative, and its potential.

P(u)(x) = -u^N + sum_{i=0}^{N-1} a_i(x) u^i, evaluated by Horner with
coefficients sampled once per grid; expression evaluation never enters the
stepping loop.  signed_power mode replaces -u^N with -u|u|^(N-1).
"""

from __future__ import annotations

import numpy as np

from . import exprlang
from .grid import Field, SpatialGrid, sobolev_norm

__all__ = ["Nonlinearity", "RangeOverflowError"]


class RangeOverflowError(ArithmeticError):
    """Polynomial evaluation overflowed to a non-finite value.

    Callers in the time stepper treat this as blow-up evidence.
    """


class Nonlinearity:
    def __init__(self, spec, grid: SpatialGrid, disable_leading: bool = False):
        self.spec = spec
        self.grid = grid
        # disable_leading drops the -u^N term: pure-diffusion test hook
        self.disable_leading = bool(disable_leading)
        samples = []
        for e in spec.coeffs:
            a = exprlang.sample(e, grid.nodes)
            a.setflags(write=False)
            samples.append(a)
        self.coeff_samples = tuple(samples)

    @property
    def degree(self) -> int:
        return self.spec.N

    @property
    def signed_power(self) -> bool:
        return self.spec.signed_power

    def spatially_constant(self) -> bool:
        return all(np.ptp(a) == 0.0 for a in self.coeff_samples)

    def constant_coefficients(self) -> tuple[float, ...]:
        if not self.spatially_constant():
            raise ValueError("coefficients are not spatially constant")
        return tuple(float(a[0]) for a in self.coeff_samples)

    def _check(self, out: np.ndarray, what: str) -> np.ndarray:
        if not np.all(np.isfinite(out)):
            raise RangeOverflowError(f"{what} overflowed to a non-finite value")
        return out

    def apply_P(self, u: Field) -> Field:
        return Field(self.grid, self.apply_P_values(u.values))

    def apply_P_values(self, v: np.ndarray) -> np.ndarray:
        n = self.degree
        with np.errstate(over="ignore", invalid="ignore"):
            acc = np.zeros_like(v)
            for a in reversed(self.coeff_samples):
                acc = acc * v + a
            if not self.disable_leading:
                if self.signed_power:
                    acc = acc - v * np.abs(v) ** (n - 1)
                else:
                    acc = acc - v**n
        return self._check(acc, "P(u)")

    def apply_dP(self, u: Field) -> Field:
        """Pointwise derivative of P in u (the Jacobian diagonal)."""
        v = u.values
        n = self.degree
        with np.errstate(over="ignore", invalid="ignore"):
            acc = np.zeros_like(v)
            for i in range(n - 1, 0, -1):
                acc = acc * v + i * self.coeff_samples[i]
            if not self.disable_leading:
                if self.signed_power:
                    acc = acc - n * np.abs(v) ** (n - 1)
                else:
                    acc = acc - n * v ** (n - 1)
        return Field(self.grid, self._check(acc, "dP(u)"))

    def potential(self, u: Field) -> Field:
        """Antiderivative in u of P, sampled pointwise (the action integrand)."""
        v = u.values
        n = self.degree
        with np.errstate(over="ignore", invalid="ignore"):
            acc = np.zeros_like(v)
            for i in range(n - 1, -1, -1):
                acc = acc * v + self.coeff_samples[i] / (i + 1)
            acc = acc * v
            if not self.disable_leading:
                acc = acc - np.abs(v) ** (n + 1) / (n + 1) if self.signed_power \
                    else acc - v ** (n + 1) / (n + 1)
        return Field(self.grid, self._check(acc, "potential(u)"))

    def scalar_P(self, uval: float, xval: float) -> float:
        """P at a single (u, x) point, off-grid; used by phase-plane shooting."""
        acc = 0.0
        for e in reversed(self.spec.coeffs):
            acc = acc * uval + exprlang.evaluate(e, xval)
        if not self.disable_leading:
            n = self.degree
            if self.signed_power:
                acc -= uval * abs(uval) ** (n - 1)
            else:
                acc -= uval**n
        return acc

    def scalar_potential(self, uval: float, xval: float) -> float:
        acc = 0.0
        for i in range(self.degree - 1, -1, -1):
            acc = acc * uval + exprlang.evaluate(self.spec.coeffs[i], xval) / (i + 1)
        acc *= uval
        n = self.degree
        if not self.disable_leading:
            if self.signed_power:
                acc -= abs(uval) ** (n + 1) / (n + 1)
            else:
                acc -= uval ** (n + 1) / (n + 1)
        return acc

    def reaction_norm_ratio(self, u: Field, k: int, p: float) -> float:
        """||P(u) - a_0||_{k,p} / ||u||_{k,p}.

        The constant-in-u coefficient is subtracted so the numerator has no
        zero-order term; empirically this ratio stays bounded on families
        with bounded samples and differences.
        """
        denom = sobolev_norm(u, k, p)
        if denom == 0.0:
            raise ZeroDivisionError("(k,p)-norm of u is zero")
        pu = self.apply_P_values(u.values) - self.coeff_samples[0]
        return sobolev_norm(Field(self.grid, pu), k, p) / denom
