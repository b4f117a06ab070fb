"""Potential, power nonlinearity, energy and its first two derivatives.

The energy of a field u is

    E(u) = 1/2 * integral(u'^2 + V u^2) - integral(F(u)),

with F the antiderivative of the power nonlinearity f(s) = |s|^(p-2) s.
Constrained critical points on the sphere |u|_2^2 = alpha satisfy
-u'' + V u - f(u) = lambda u with the multiplier lambda.  Both the L2
(strong form) and the resolvent-preconditioned representations of the
gradient and Hessian are provided; they agree up to solver tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import grid as gr
from .errors import PreconditionError
from .grid import Field, GridSpec

__all__ = [
    "Potential",
    "Nonlinearity",
    "energy",
    "l2_residual",
    "h1_gradient",
    "hessian_form",
    "positive_gauge",
]


@dataclass(frozen=True)
class Potential:
    """Bounded potential; constant, cosine 1 + A*cos(2 pi x) + shift, or tabulated.

    Cosine and tabulated kinds are 1-periodic.  A generic sampled kind
    (period equal to the box) backs internally rescaled potentials.
    """

    kind: str
    amplitude: float = 0.0
    shift: float = 0.0
    constant: float = 0.0
    table: np.ndarray | None = None
    fn: object | None = None

    @classmethod
    def const(cls, c: float) -> "Potential":
        return cls(kind="constant", constant=float(c))

    @classmethod
    def cosine(cls, amplitude: float, shift: float = 0.0) -> "Potential":
        return cls(kind="cosine", amplitude=float(amplitude), shift=float(shift))

    @classmethod
    def tabulated(cls, values, shift: float = 0.0) -> "Potential":
        """1-periodic potential from samples of one unit period."""
        vals = np.asarray(values, dtype=float)
        if vals.ndim != 1 or len(vals) < 2:
            raise ValueError("need a 1D table with at least two samples")
        if not np.all(np.isfinite(vals)):
            raise ValueError("potential table contains non-finite entries")
        return cls(kind="tabulated", table=vals, shift=float(shift))

    @classmethod
    def from_function(cls, fn) -> "Potential":
        """Potential given by an arbitrary callable of x (no periodicity assumed)."""
        return cls(kind="callable", fn=fn)

    def evaluate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.constant)
        if self.kind == "cosine":
            return 1.0 + self.amplitude * np.cos(2.0 * np.pi * x) + self.shift
        if self.kind == "tabulated":
            n = len(self.table)
            pos = (x % 1.0) * n
            i0 = np.floor(pos).astype(int) % n
            frac = pos - np.floor(pos)
            return (1 - frac) * self.table[i0] + frac * self.table[(i0 + 1) % n] + self.shift
        if self.kind == "callable":
            return np.asarray(self.fn(x), dtype=float)
        raise ValueError(f"unknown potential kind {self.kind!r}")

    def sample(self, grid: GridSpec) -> np.ndarray:
        return self.evaluate(grid.x)

    def bounds(self) -> tuple[float, float]:
        """Min/max over one period (cosine, tabulated) or a dense probe (callable)."""
        if self.kind == "constant":
            return self.constant, self.constant
        if self.kind == "cosine":
            lo = 1.0 - abs(self.amplitude) + self.shift
            hi = 1.0 + abs(self.amplitude) + self.shift
            return lo, hi
        if self.kind == "tabulated":
            return float(self.table.min()) + self.shift, float(self.table.max()) + self.shift
        probe = self.evaluate(np.linspace(-64.0, 64.0, 65536))
        return float(probe.min()), float(probe.max())

    def curvature_at(self, x0: float) -> float:
        """Second derivative at x0 (analytic for cosine, zero for constant)."""
        if self.kind == "constant":
            return 0.0
        if self.kind == "cosine":
            return -self.amplitude * (2.0 * np.pi) ** 2 * np.cos(2.0 * np.pi * x0)
        eps = 1e-4
        vals = self.evaluate(np.array([x0 - eps, x0, x0 + eps]))
        return float((vals[0] - 2 * vals[1] + vals[2]) / eps**2)

    def shifted(self, c: float) -> "Potential":
        if self.kind == "constant":
            return Potential.const(self.constant + c)
        if self.kind == "callable":
            fn = self.fn
            return Potential.from_function(lambda x, _fn=fn, _c=c: np.asarray(_fn(x)) + _c)
        return Potential(
            kind=self.kind,
            amplitude=self.amplitude,
            shift=self.shift + c,
            constant=self.constant,
            table=self.table,
        )


def positive_gauge(V: Potential, grid: GridSpec, margin: float = 0.5):
    """Shift V so the discrete -Lap + V is positive definite.

    Returns (shifted potential, applied constant c); multipliers computed
    in the shifted gauge translate back as lambda_user = lambda - c.
    """
    bottom = gr.operator_bottom_eigenvalue(V, grid)
    if bottom > 0.0:
        return V, 0.0
    c = margin - bottom
    return V.shifted(c), c


@dataclass(frozen=True)
class Nonlinearity:
    """Pure power nonlinearity f(s) = |s|^(p-2) s with p > 2.

    The monotonicity of f(s)/|s| and sign condition f(s) s > 0 hold
    automatically for this family.
    """

    p: float

    def __post_init__(self):
        if not self.p > 2.0:
            raise ValueError(f"exponent must satisfy p > 2, got {self.p}")

    def f(self, s):
        return np.abs(s) ** (self.p - 2.0) * s

    def fprime(self, s):
        return (self.p - 1.0) * np.abs(s) ** (self.p - 2.0)

    def F(self, s):
        return np.abs(s) ** self.p / self.p

    def g(self, density):
        """Density form: f(s) = g(|s|^2) s, so g(d) = d^((p-2)/2)."""
        return density ** (0.5 * (self.p - 2.0))

    @property
    def mass_critical(self) -> float:
        """Critical exponent 2 + 4/N for N = 1."""
        return 6.0

    @property
    def is_subcritical(self) -> bool:
        return self.p < self.mass_critical


def energy(u: Field, V, f: Nonlinearity) -> float:
    """E(u) = 1/2 integral(u'^2 + V u^2) - integral(F(u))."""
    quad = gr.inner_h1v(u, u, V)
    return 0.5 * quad - u.grid.h * float(np.sum(f.F(u.values)))


def l2_residual(u: Field, lam: float, V, f: Nonlinearity) -> Field:
    """Strong-form residual -u'' + V u - f(u) - lambda u."""
    vs = gr.potential_samples(V, u.grid)
    vals = gr.laplacian_apply(u).values + (vs - lam) * u.values - f.f(u.values)
    return Field(u.grid, vals)


def h1_gradient(u: Field, V, f: Nonlinearity) -> Field:
    """Gradient in the (u'v' + V u v) metric: u - S f(u), S = (-Lap+V)^{-1}."""
    sf = gr.resolvent_solve(Field(u.grid, f.f(u.values)), V)
    return u - sf


class HessianForm:
    """Second-derivative bilinear form at (u, lambda).

    Evaluates integral(v' w' + [V - lambda] v w - f'(u) v w) by the grid
    quadrature; exactly symmetric in (v, w).
    """

    def __init__(self, u: Field, lam: float, V, f: Nonlinearity):
        self.grid = u.grid
        self.weight = gr.potential_samples(V, u.grid) - lam - f.fprime(u.values)

    def __call__(self, v: Field, w: Field) -> float:
        if v.grid != self.grid or w.grid != self.grid:
            raise PreconditionError("hessian form arguments live on a different grid")
        lhs = gr._neg_laplacian_values(v.values, self.grid) + self.weight * v.values
        return float(self.grid.h * np.dot(lhs, w.values))


def hessian_form(u: Field, lam: float, V, f: Nonlinearity) -> HessianForm:
    return HessianForm(u, lam, V, f)
