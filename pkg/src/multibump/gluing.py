"""Superposition of translated bumps and Newton correction on the sphere.

The working object is the extended functional

    G(u, lambda) = E(u) - lambda/2 * (|u|_2^2 - alpha),

whose critical points are exactly the constrained critical points paired
with their multipliers.  Newton iteration runs on grad G = 0; each step
solves the (M+1)-dimensional bordered block system

    [ -Lap + V - lambda - f'(u)   -u ] [du     ]   [ -r      ]
    [        -(u, .)_2             0 ] [dlambda] = [ +c/2    ]

as one symmetric indefinite solve (MINRES with a Fourier-diagonal
preconditioner), with no Schur-complement splitting.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, minres

from . import grid as gr
from . import model as md
from . import stationary as st
from .errors import (
    DegenerateSuperpositionError,
    GluingFailedError,
    LinearSolverError,
    PreconditionError,
)
from .grid import Field, GridSpec

__all__ = [
    "BumpConfig",
    "ExtendedPoint",
    "superpose",
    "extended_gradient",
    "bordered_apply",
    "newton_correct",
    "glue",
    "GlueResult",
    "shadowing_certificate",
    "ShadowingReport",
    "bordered_sigma_min",
    "ground_state",
]


@dataclass(frozen=True)
class BumpConfig:
    """Bump count n and distinct integer offsets."""

    n: int
    offsets: tuple

    def __post_init__(self):
        offs = tuple(int(a) for a in self.offsets)
        if len(offs) != self.n or self.n < 1:
            raise ValueError(f"need n = {self.n} offsets, got {len(offs)}")
        if len(set(offs)) != len(offs):
            raise ValueError(f"offsets must be distinct, got {offs}")
        if any(o != a for o, a in zip(offs, self.offsets)):
            raise ValueError("offsets must be integers")
        object.__setattr__(self, "offsets", offs)

    @property
    def separation(self) -> float:
        """Minimal pairwise offset distance; +inf for a single bump."""
        if self.n == 1:
            return np.inf
        offs = sorted(self.offsets)
        return float(min(b - a for a, b in zip(offs, offs[1:])))


@dataclass(frozen=True)
class ExtendedPoint:
    """Argument (u, lambda) of the extended functional."""

    u: Field
    lam: float


def superpose(ubar: Field, cfg: BumpConfig) -> Field:
    """Exact sum of integer-shifted copies of ubar."""
    L = ubar.grid.L
    if max(abs(a) for a in cfg.offsets) >= L - 1:
        raise PreconditionError(
            f"offsets {cfg.offsets} reach within one unit of the boundary L = {L}"
        )
    total = np.zeros(ubar.grid.M)
    for a in cfg.offsets:
        total += gr.translate(ubar, a).values
    return Field(ubar.grid, total)


def extended_gradient(pt: ExtendedPoint, alpha: float, V, f) -> tuple[Field, float]:
    """Pair (u - S f(u) - lambda S u, -(|u|_2^2 - alpha)/2)."""
    u, lam = pt.u, pt.lam
    forcing = Field(u.grid, f.f(u.values) + lam * u.values)
    g_field = u - gr.resolvent_solve(forcing, V)
    g_scalar = -0.5 * (gr.inner_l2(u, u) - alpha)
    return g_field, g_scalar


def extended_gradient_norm(pt: ExtendedPoint, alpha: float, V, f) -> float:
    g_field, g_scalar = extended_gradient(pt, alpha, V, f)
    return float(np.sqrt(max(gr.inner_h1v(g_field, g_field, V), 0.0) + g_scalar**2))


def bordered_apply(pt: ExtendedPoint, V, f):
    """Second derivative of the extended functional at pt, as a callable.

    Returns apply(v, mu) = (v - S(f'(u) v) - lambda S v - mu S u, -(u, v)_2),
    symmetric as a block operator in the preconditioned-metric plus R pairing.
    """
    u, lam = pt.u, pt.lam
    fpu = f.fprime(u.values)

    def apply(v: Field, mu: float) -> tuple[Field, float]:
        forcing = Field(u.grid, fpu * v.values + lam * v.values + mu * u.values)
        out_field = v - gr.resolvent_solve(forcing, V)
        out_scalar = -gr.inner_l2(u, v)
        return out_field, out_scalar

    return apply


# -- bordered linear solves ---------------------------------------------------


def _bordered_matvec_factory(u_vals, weight, grid: GridSpec):
    """Symmetric block operator [[ -Lap + weight , -u ], [ -u^T, 0 ]]."""
    k2 = grid.wavenumbers**2
    M = grid.M

    def matvec(x):
        v, mu = x[:M], x[M]
        top = np.fft.irfft(k2 * np.fft.rfft(v), n=M) + weight * v - mu * u_vals
        bottom = -np.dot(u_vals, v)
        return np.concatenate([top, [bottom]])

    return matvec


def _bordered_precond_factory(grid: GridSpec, c: float):
    k2 = grid.wavenumbers**2
    symbol = 1.0 / (k2 + c)
    M = grid.M

    def apply(x):
        out = np.empty_like(x)
        out[:M] = np.fft.irfft(symbol * np.fft.rfft(x[:M]), n=M)
        out[M] = x[M]
        return out

    return apply


def _solve_bordered(u_vals, weight, grid, rhs, rtol=1e-12, maxiter=3000):
    """MINRES on the symmetric bordered system with residual verification.

    Accepts at the roundoff floor of the spectral operator when the
    requested tolerance sits below it.
    """
    M = grid.M
    matvec = _bordered_matvec_factory(u_vals, weight, grid)
    A = LinearOperator((M + 1, M + 1), matvec=matvec, dtype=float)
    c = max(float(np.mean(weight)) + 1.0, 1.0)
    Pre = LinearOperator(
        (M + 1, M + 1), matvec=_bordered_precond_factory(grid, c), dtype=float
    )
    op_scale = float(grid.wavenumbers[-1] ** 2 + np.max(np.abs(weight)))
    scale = np.linalg.norm(rhs)
    if scale == 0.0:
        return np.zeros_like(rhs)
    x = np.zeros_like(rhs)
    r = rhs.copy()
    for _ in range(4):
        dx, info = minres(A, r, rtol=rtol, maxiter=maxiter, M=Pre)
        x = x + dx
        r = rhs - matvec(x)
        floor = 100 * np.finfo(float).eps * op_scale * max(
            np.linalg.norm(x), scale / op_scale
        )
        if np.linalg.norm(r) <= max(10 * rtol * scale, floor):
            return x
        if info != 0 and np.linalg.norm(dx) == 0.0:
            break
    res = np.linalg.norm(r) / scale
    if res > 1e-6:
        raise DegenerateSuperpositionError(
            f"bordered solve stalled at relative residual {res:.3e}"
        )
    raise LinearSolverError(f"bordered solve reached only relative residual {res:.3e}")


def _newton_step(pt: ExtendedPoint, alpha, V, f):
    """One undamped Newton step direction for grad G = 0."""
    u, lam = pt.u, pt.lam
    grid = u.grid
    vs = gr.potential_samples(V, grid)
    weight = vs - lam - f.fprime(u.values)
    strong = md.l2_residual(u, lam, V, f)
    rhs = np.concatenate(
        [-strong.values, [0.5 * (gr.inner_l2(u, u) - alpha) / grid.h]]
    )
    sol = _solve_bordered(u.values, weight, grid, rhs)
    return Field(grid, sol[: grid.M]), float(sol[grid.M])


@dataclass
class GlueResult:
    """Converged point plus per-iteration diagnostics."""

    point: st.ConstrainedCriticalPoint
    iterations: int
    residual_history: list = field(default_factory=list)
    distance_h1: float = np.nan
    dlambda: float = np.nan


def newton_correct(pt0: ExtendedPoint, alpha: float, V, f, tol: float = 1e-10,
                   max_iter: int = 40, max_damping: int = 6,
                   separation: float = np.inf):
    """Damped Newton on grad G = 0 from an arbitrary starting point.

    Returns (extended point, iterations, residual history).  Divergence
    (residual increase on 3 consecutive damped steps) and iteration
    exhaustion raise GluingFailedError carrying the history.
    """
    pt = pt0
    eta = extended_gradient_norm(pt, alpha, V, f)
    history = [eta]
    increases = 0
    iterations = 0
    while eta > tol:
        if iterations >= max_iter:
            raise GluingFailedError(
                f"no convergence in {max_iter} Newton steps",
                separation=separation,
                residual_history=history,
            )
        du, dlam = _newton_step(pt, alpha, V, f)
        t = 1.0
        best = None
        for _ in range(max_damping + 1):
            trial = ExtendedPoint(pt.u + t * du, pt.lam + t * dlam)
            eta_trial = extended_gradient_norm(trial, alpha, V, f)
            if eta_trial < eta:
                best = (trial, eta_trial)
                break
            t *= 0.5
        if best is None:
            increases += 1
            if increases >= 3:
                raise GluingFailedError(
                    "residual increased on 3 consecutive damped steps",
                    separation=separation,
                    residual_history=history,
                )
            pt = ExtendedPoint(pt.u + t * du, pt.lam + t * dlam)
            eta = extended_gradient_norm(pt, alpha, V, f)
        else:
            increases = 0
            pt, eta = best
        history.append(eta)
        iterations += 1
    return pt, iterations, history


def glue(ubar: st.ConstrainedCriticalPoint, cfg: BumpConfig, alpha: float, V, f,
         tol: float = 1e-10, max_iter: int = 40, max_damping: int = 6,
         initial_residual_cap: float = 0.5) -> GlueResult:
    """Correct the superposition of translated copies of ubar to an exact
    discrete constrained critical point by damped Newton on grad G = 0.

    Requires alpha = n * ubar.mass (the total mass splits evenly over the
    bumps) and enough separation that the starting extended-gradient norm
    is below initial_residual_cap.
    """
    if abs(alpha - cfg.n * ubar.mass) > 1e-12 * max(1.0, alpha):
        raise PreconditionError(
            f"alpha = {alpha} must equal n * ubar.mass = {cfg.n * ubar.mass}"
        )
    grid = ubar.u.grid
    bottom = gr.operator_bottom_eigenvalue(V, grid)
    if cfg.n > 1:
        kappa = np.sqrt(max(bottom - ubar.lam, 1e-6))
        reach = max(abs(a) for a in cfg.offsets) + 10.0 / kappa
        if reach >= grid.L:
            raise PreconditionError(
                f"offsets plus 10 decay lengths ({reach:.1f}) exceed the half-width {grid.L}"
            )

    v0 = superpose(ubar.u, cfg)
    pt0 = ExtendedPoint(v0, ubar.lam)
    eta0 = extended_gradient_norm(pt0, alpha, V, f)
    if eta0 > initial_residual_cap:
        raise GluingFailedError(
            f"starting residual {eta0:.3e} exceeds cap {initial_residual_cap:.1e}; "
            "increase the separation",
            separation=cfg.separation,
            residual_history=[eta0],
        )
    pt, iterations, history = newton_correct(
        pt0, alpha, V, f, tol=tol, max_iter=max_iter, max_damping=max_damping,
        separation=cfg.separation,
    )
    point = st.ConstrainedCriticalPoint.measure(pt.u, pt.lam, alpha, V, f)
    return GlueResult(
        point=point,
        iterations=iterations,
        residual_history=history,
        distance_h1=gr.norm_h1(pt.u - v0),
        dlambda=abs(pt.lam - ubar.lam),
    )


# -- diagnostics --------------------------------------------------------------


def _h_norm(v: Field, mu: float, V) -> float:
    return float(np.sqrt(max(gr.inner_h1v(v, v, V), 0.0) + mu**2))


def _solve_bordered_h(pt: ExtendedPoint, V, f, y_field: Field, y_scalar: float):
    """Apply the inverse of the block second derivative in its metric form.

    T (v, mu) = y is reduced to the strong-form bordered system by
    applying -Lap + V to the field part of y.
    """
    u, lam = pt.u, pt.lam
    grid = u.grid
    vs = gr.potential_samples(V, grid)
    weight = vs - lam - f.fprime(u.values)
    strong_rhs = gr._neg_laplacian_values(y_field.values, grid) + vs * y_field.values
    rhs = np.concatenate([strong_rhs, [y_scalar / grid.h]])
    sol = _solve_bordered(u.values, weight, grid, rhs)
    return Field(grid, sol[: grid.M]), float(sol[grid.M])


def bordered_sigma_min(pt: ExtendedPoint, V, f, iters: int = 50,
                       rtol: float = 1e-6, seed: int = 0) -> float:
    """Smallest singular value of the block second derivative at pt.

    Inverse power iteration on the symmetric block operator in the
    preconditioned metric; 1/sigma_min estimates the inverse norm in the
    contraction bound.
    """
    grid = pt.u.grid
    rng = np.random.default_rng(seed)
    v = Field(grid, rng.standard_normal(grid.M))
    mu = float(rng.standard_normal())
    nrm = _h_norm(v, mu, V)
    v, mu = (1.0 / nrm) * v, mu / nrm
    sigma = np.inf
    for _ in range(iters):
        w_f, w_s = _solve_bordered_h(pt, V, f, v, mu)
        nrm = _h_norm(w_f, w_s, V)
        sigma_new = 1.0 / nrm
        v, mu = (1.0 / nrm) * w_f, w_s / nrm
        if np.isfinite(sigma) and abs(sigma_new - sigma) <= rtol * sigma:
            return sigma_new
        sigma = sigma_new
    return sigma


@dataclass(frozen=True)
class ShadowingReport:
    """Sampled contraction diagnostics around a starting point.

    All quantities are estimates (random sampling, power iteration), so a
    satisfied flag is evidence, not a certificate.
    """

    gradient_norm: float
    sigma_min: float
    inverse_norm: float
    lipschitz_bound: float
    delta: float
    q: float
    residual_condition: bool
    lipschitz_condition: bool

    @property
    def all_satisfied(self) -> bool:
        return self.residual_condition and self.lipschitz_condition


def _difference_operator_norm(pt0: ExtendedPoint, pt1: ExtendedPoint, V, f,
                              iters: int = 20, seed: int = 0) -> float:
    """Power iteration estimate of || d(grad G)(pt1) - d(grad G)(pt0) ||."""
    apply0 = bordered_apply(pt0, V, f)
    apply1 = bordered_apply(pt1, V, f)
    grid = pt0.u.grid
    rng = np.random.default_rng(seed)
    v = Field(grid, rng.standard_normal(grid.M))
    mu = float(rng.standard_normal())
    nrm = _h_norm(v, mu, V)
    v, mu = (1.0 / nrm) * v, mu / nrm
    value = 0.0
    for _ in range(iters):
        a_f, a_s = apply1(v, mu)
        b_f, b_s = apply0(v, mu)
        d_f, d_s = a_f - b_f, a_s - b_s
        nrm = _h_norm(d_f, d_s, V)
        if nrm == 0.0:
            return 0.0
        value = nrm
        v, mu = (1.0 / nrm) * d_f, d_s / nrm
    return value


def shadowing_certificate(pt0: ExtendedPoint, alpha: float, V, f, delta: float,
                          q: float, n_samples: int = 5, seed: int = 0) -> ShadowingReport:
    """Sampled check of the contraction conditions around pt0.

    Estimates the starting gradient norm, the inverse norm of the block
    second derivative (1/sigma_min) and a Lipschitz bound sampled over
    n_samples random points in the delta-ball, then flags whether the
    fixed-point conditions hold with the given (delta, q).
    """
    if not 0.0 < q < 1.0:
        raise PreconditionError(f"contraction rate must satisfy 0 < q < 1, got {q}")
    grid = pt0.u.grid
    h_norm = extended_gradient_norm(pt0, alpha, V, f)
    sigma = bordered_sigma_min(pt0, V, f, seed=seed)
    inverse_norm = 1.0 / sigma
    rng = np.random.default_rng(seed + 1)
    lipschitz = 0.0
    for i in range(n_samples):
        direction = Field(grid, rng.standard_normal(grid.M))
        dmu = float(rng.standard_normal())
        nrm = _h_norm(direction, dmu, V)
        radius = delta * rng.uniform(0.2, 1.0)
        pt1 = ExtendedPoint(
            pt0.u + (radius / nrm) * direction, pt0.lam + radius * dmu / nrm
        )
        lipschitz = max(
            lipschitz, _difference_operator_norm(pt0, pt1, V, f, seed=seed + 2 + i)
        )
    return ShadowingReport(
        gradient_norm=h_norm,
        sigma_min=sigma,
        inverse_norm=inverse_norm,
        lipschitz_bound=lipschitz,
        delta=delta,
        q=q,
        residual_condition=h_norm < delta * (1.0 - q) * sigma,
        lipschitz_condition=lipschitz <= q * sigma,
    )


# -- convenience pipeline ------------------------------------------------------


def ground_state(grid: GridSpec, alpha: float, V, f, center: float = 0.0,
                 flow_tol: float = 1e-6, newton_tol: float = 1e-10,
                 flow_step: float = 0.8) -> st.ConstrainedCriticalPoint:
    """Locate a local constrained minimizer and refine it to full precision.

    Normalized gradient flow from a translated closed-form profile seeds
    the single-bump Newton refinement.  If -Lap + V is not positive
    definite the potential is shifted up first; the applied constant is
    recorded on the returned point so the user-gauge multiplier stays
    available as point.lam_user.
    """
    from dataclasses import replace

    V_work, shift = md.positive_gauge(V, grid)
    vbar = max(gr.operator_bottom_eigenvalue(V_work, grid), 0.2)
    guess = st.limit_profile(grid, f.p, vbar=vbar, center=center)
    coarse = st.normalized_flow(guess, alpha, V_work, f, step=flow_step, tol=flow_tol)
    refined = glue(coarse, BumpConfig(n=1, offsets=(0,)), alpha, V_work, f,
                   tol=newton_tol)
    return replace(refined.point, potential_shift=shift)
