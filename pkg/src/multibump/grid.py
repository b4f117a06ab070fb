"""Discretization on a truncated periodic 1D domain.

The computational domain is the interval [-L, L) with M equispaced points
and periodic boundary conditions.  Differential operators are applied in
the discrete Fourier basis, so they are exact for trigonometric
polynomials up to the Nyquist mode, and integer lattice translations are
exact cyclic shifts whenever the spacing divides 1.

All operations are pure functions of their inputs; grids and fields are
treated as immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh

from .errors import (
    GridMismatchError,
    InvalidFieldError,
    LinearSolverError,
    MisalignedTranslationError,
    SingularOperatorError,
)

__all__ = [
    "GridSpec",
    "Field",
    "laplacian_apply",
    "derivative",
    "translate",
    "inner_l2",
    "inner_h1v",
    "norm_l2",
    "norm_h1",
    "resolvent_solve",
    "operator_bottom_eigenvalue",
    "potential_samples",
    "write_field_csv",
    "read_field_csv",
    "write_field_binary",
    "read_field_binary",
]


@dataclass(frozen=True)
class GridSpec:
    """Periodic grid on [-L, L) with M points and spacing h = 2L/M.

    L must be a positive integer so that integer lattice translations can
    be realized as exact grid shifts (translate checks per call that the
    requested offset is a whole number of points).  M must be even and at
    least 64.
    """

    L: int
    M: int

    def __post_init__(self):
        if int(self.L) != self.L or self.L <= 0:
            raise ValueError(f"half-width L must be a positive integer, got {self.L}")
        if self.M < 64 or self.M % 2 != 0:
            raise ValueError(f"point count M must be even and >= 64, got {self.M}")
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "M", int(self.M))

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.M

    @property
    def x(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.M)

    @property
    def wavenumbers(self) -> np.ndarray:
        """Real-FFT wavenumbers (rad/length), length M//2 + 1."""
        return 2.0 * np.pi * np.fft.rfftfreq(self.M, d=self.h)

    def aligned_shift(self, a) -> int:
        """Number of grid points corresponding to a translation by a.

        Raises MisalignedTranslationError when a/h is not an integer.
        """
        steps = a / self.h
        rounded = round(steps)
        if abs(steps - rounded) > 1e-9:
            raise MisalignedTranslationError(
                f"translation by {a} is {steps} grid points; not an integer shift"
            )
        return int(rounded)


@dataclass(frozen=True)
class Field:
    """Real-valued grid function tied to a GridSpec."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.M,):
            raise InvalidFieldError(
                f"expected {self.grid.M} values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise InvalidFieldError("field contains non-finite entries")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "Field":
        return cls(grid, np.zeros(grid.M))

    @classmethod
    def from_function(cls, grid: GridSpec, fn) -> "Field":
        return cls(grid, fn(grid.x))

    def __add__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values + other.values)

    def __sub__(self, other: "Field") -> "Field":
        _check_same_grid(self, other)
        return Field(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "Field":
        return Field(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "Field":
        return Field(self.grid, -self.values)


def _check_same_grid(u: Field, v: Field) -> None:
    if u.grid != v.grid:
        raise GridMismatchError(f"grids differ: {u.grid} vs {v.grid}")


def potential_samples(V, grid: GridSpec) -> np.ndarray:
    """Sample a potential on the grid.

    Accepts anything with a ``sample(grid)`` method, a callable of x, or
    an array of length M.
    """
    if hasattr(V, "sample"):
        vals = np.asarray(V.sample(grid), dtype=float)
    elif callable(V):
        vals = np.asarray(V(grid.x), dtype=float)
    else:
        vals = np.asarray(V, dtype=float)
    if vals.ndim == 0:
        vals = np.full(grid.M, float(vals))
    if vals.shape != (grid.M,):
        raise ValueError(f"potential samples have shape {vals.shape}, expected ({grid.M},)")
    if not np.all(np.isfinite(vals)):
        raise ValueError("potential samples contain non-finite entries")
    return vals


# -- differential operators ------------------------------------------------


def _neg_laplacian_values(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    k2 = grid.wavenumbers**2
    return np.fft.irfft(k2 * np.fft.rfft(values), n=grid.M)


def laplacian_apply(u: Field) -> Field:
    """Apply the (positive) operator -d^2/dx^2 in the Fourier basis."""
    return Field(u.grid, _neg_laplacian_values(u.values, u.grid))


def _derivative_values(values: np.ndarray, grid: GridSpec) -> np.ndarray:
    coeffs = np.fft.rfft(values)
    k = grid.wavenumbers.copy()
    k[-1] = 0.0  # drop the Nyquist mode: ik at Nyquist has no real preimage
    return np.fft.irfft(1j * k * coeffs, n=grid.M)


def derivative(u: Field) -> Field:
    """First spectral derivative (Nyquist mode dropped)."""
    return Field(u.grid, _derivative_values(u.values, u.grid))


def translate(u: Field, a: int) -> Field:
    """Shift u by a: (translate(u, a))(x) = u(x - a), as an exact roll."""
    if abs(a) >= 2 * u.grid.L:
        raise MisalignedTranslationError(
            f"offset {a} exceeds the period 2L = {2 * u.grid.L}"
        )
    steps = u.grid.aligned_shift(a)
    return Field(u.grid, np.roll(u.values, steps))


# -- inner products and norms ----------------------------------------------


def inner_l2(u: Field, v: Field) -> float:
    """Quadrature L2 pairing h * sum(u_i v_i)."""
    _check_same_grid(u, v)
    return float(u.grid.h * np.dot(u.values, v.values))


def norm_l2(u: Field) -> float:
    return float(np.sqrt(u.grid.h) * np.linalg.norm(u.values))


def inner_h1v(u: Field, v: Field, V) -> float:
    """Form pairing integral(u' v' + V u v), evaluated as (-Lap u + V u, v)_2.

    Requires the discrete operator -Lap + V to be positive definite; this
    is checked once per (grid, V) pair and cached.
    """
    _check_same_grid(u, v)
    vs = potential_samples(V, u.grid)
    _require_positive_bottom(vs, u.grid)
    lhs = _neg_laplacian_values(u.values, u.grid) + vs * u.values
    return float(u.grid.h * np.dot(lhs, v.values))


def norm_h1(u: Field) -> float:
    """Standard H1 norm, sqrt(|u'|_2^2 + |u|_2^2)."""
    q = u.grid.h * (
        np.dot(_neg_laplacian_values(u.values, u.grid), u.values)
        + np.dot(u.values, u.values)
    )
    return float(np.sqrt(max(q, 0.0)))


def norm_h2(u: Field) -> float:
    """Standard H2 norm, sqrt(|u''|_2^2 + |u'|_2^2 + |u|_2^2)."""
    k2 = u.grid.wavenumbers**2
    coeffs = np.fft.rfft(u.values)
    weights = np.full(u.grid.M // 2 + 1, 2.0)
    weights[0] = 1.0
    if u.grid.M % 2 == 0:
        weights[-1] = 1.0
    spectrum = weights * (1.0 + k2 + k2**2) * np.abs(coeffs) ** 2
    return float(np.sqrt(u.grid.h * np.sum(spectrum) / u.grid.M))


# -- resolvent of -Lap + V - shift ------------------------------------------

_bottom_cache: dict = {}


def operator_bottom_eigenvalue(V, grid: GridSpec) -> float:
    """Smallest eigenvalue of the discrete periodic -Lap + V.

    Computed by Lanczos iteration on the inverse operator (the inverse is
    applied by conjugate gradients with a safe shift below min V), cached
    per (grid, potential samples).
    """
    vs = potential_samples(V, grid)
    key = (grid.L, grid.M, vs.tobytes())
    hit = _bottom_cache.get(key)
    if hit is not None:
        return hit

    safe_shift = float(vs.min()) - 1.0

    def apply_inverse(w):
        return _pcg_solve(w, vs, safe_shift, grid, tol=1e-13)

    op = LinearOperator((grid.M, grid.M), matvec=apply_inverse, dtype=float)
    rng = np.random.default_rng(0)
    v0 = np.ones(grid.M) + 1e-3 * rng.standard_normal(grid.M)
    vals = eigsh(op, k=1, which="LA", tol=1e-12, v0=v0, return_eigenvectors=False)
    bottom = safe_shift + 1.0 / float(vals[0])
    _bottom_cache[key] = bottom
    return bottom


def _require_positive_bottom(vs: np.ndarray, grid: GridSpec) -> float:
    from .errors import AssumptionViolationError

    bottom = operator_bottom_eigenvalue(vs, grid)
    if bottom <= 0.0:
        raise AssumptionViolationError(
            f"-Lap + V has bottom eigenvalue {bottom:.6g} <= 0; shift the potential"
        )
    return bottom


def _pcg_solve(rhs, vs, shift, grid, tol=1e-12, max_iter=4000):
    """Preconditioned CG for (-Lap + V - shift) z = rhs.

    The preconditioner is (-Lap + c)^{-1} applied in the Fourier basis,
    with c chosen so the preconditioned operator is a compact perturbation
    of the identity.  Terminates on the true residual in the sup norm;
    requests below the roundoff floor of the spectral operator (machine
    eps times the largest symbol value) are satisfied at that floor.
    """
    k2 = grid.wavenumbers**2
    diag = vs - shift
    c = max(float(np.mean(diag)), 0.05)
    precond_symbol = 1.0 / (k2 + c)
    op_scale = float(k2[-1] + np.max(np.abs(diag)))

    def apply_op(z):
        return np.fft.irfft(k2 * np.fft.rfft(z), n=grid.M) + diag * z

    def apply_pre(r):
        return np.fft.irfft(precond_symbol * np.fft.rfft(r), n=grid.M)

    scale = float(np.max(np.abs(rhs)))
    if scale == 0.0:
        return np.zeros_like(rhs)
    target = tol * scale

    z = np.zeros_like(rhs)
    r = rhs.copy()
    p = apply_pre(r)
    zr = np.dot(r, p)
    d = p.copy()
    best_true = np.inf
    for _ in range(max_iter):
        Ad = apply_op(d)
        dAd = np.dot(d, Ad)
        if dAd <= 0.0:
            raise LinearSolverError("CG direction of nonpositive curvature; operator not SPD")
        alpha = zr / dAd
        z = z + alpha * d
        r = r - alpha * Ad
        if np.max(np.abs(r)) < target:
            true_r = rhs - apply_op(z)
            true_norm = np.max(np.abs(true_r))
            floor = 50 * np.finfo(float).eps * op_scale * max(
                float(np.max(np.abs(z))), scale / op_scale
            )
            if true_norm < max(target, floor):
                return z
            if true_norm > 0.7 * best_true:
                # no longer improving: accept the roundoff-limited solution
                # unless it is clearly short of any reasonable tolerance
                if true_norm < 1e-9 * scale:
                    return z
                raise LinearSolverError(
                    f"CG stalled at residual {true_norm:.3e} (target {target:.3e})"
                )
            best_true = min(best_true, true_norm)
            r = true_r
        pnew = apply_pre(r)
        zr_new = np.dot(r, pnew)
        beta = zr_new / zr
        d = pnew + beta * d
        zr = zr_new
    raise LinearSolverError(
        f"CG stalled at residual {np.max(np.abs(rhs - apply_op(z))):.3e}"
    )


def resolvent_solve(g: Field, V, shift: float = 0.0, tol: float = 1e-13) -> Field:
    """Solve (-Lap + V - shift) z = g.

    The shift must lie strictly below the bottom of the discrete spectrum
    of -Lap + V; otherwise a SingularOperatorError carrying the offending
    gap is raised.
    """
    vs = potential_samples(V, g.grid)
    bottom = operator_bottom_eigenvalue(vs, g.grid)
    gap = bottom - shift
    if gap <= 1e-12:
        raise SingularOperatorError(
            f"shift {shift:.6g} is not below the spectrum bottom {bottom:.6g}",
            gap=gap,
        )
    z = _pcg_solve(g.values, vs, shift, g.grid, tol=tol)
    return Field(g.grid, z)


# -- serialization -----------------------------------------------------------

_BINARY_MAGIC = b"MBF1"


def write_field_csv(u: Field, path) -> None:
    """Two columns x,value with shortest round-trip decimals."""
    with open(path, "w") as fh:
        fh.write("x,value\n")
        for xi, vi in zip(u.grid.x, u.values):
            fh.write(f"{float(xi)!r},{float(vi)!r}\n")


def read_field_csv(path, grid: GridSpec | None = None) -> Field:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    x, vals = data[:, 0], data[:, 1]
    if grid is None:
        M = len(vals)
        L = round((x[1] - x[0]) * M / 2)
        grid = GridSpec(L, M)
    return Field(grid, vals)


def write_field_binary(u: Field, path) -> None:
    """Header (magic, L, M) followed by M little-endian float64 values."""
    with open(path, "wb") as fh:
        fh.write(_BINARY_MAGIC)
        np.array([u.grid.L, u.grid.M], dtype="<i8").tofile(fh)
        u.values.astype("<f8").tofile(fh)


def read_field_binary(path) -> Field:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _BINARY_MAGIC:
            raise ValueError(f"not a field binary (magic {magic!r})")
        L, M = np.fromfile(fh, dtype="<i8", count=2)
        vals = np.fromfile(fh, dtype="<f8", count=int(M))
    return Field(GridSpec(int(L), int(M)), vals)
