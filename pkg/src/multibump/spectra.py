"""Spectral diagnostics of the linearization at constrained critical points.

The central object is the symmetric operator

    L = -Lap + V - lambda - f'(u),

whose quadratic form is the second derivative of the energy on the
multiplier-shifted functional.  Counting its negative eigenvalues over
the whole space gives the free Morse index; deflating the direction of u
and counting on the tangent space of the mass sphere gives the
constrained Morse index.  The sign of (z, u)_2 with L z = u decides which
of the two indices the constraint sees and classifies nondegeneracy.

Eigenvalue counts use dense symmetric eigensolves; counts must be exact,
not sampled.  Near-zero eigenvalues (within the threshold tau0) are
reported and make counts provisional rather than silently counted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import grid as gr
from .errors import (
    NoInstabilityDetected,
    NotFreelyNondegenerateError,
    PositivityViolationError,
    PreconditionError,
)
from .grid import Field, GridSpec
from .stationary import ConstrainedCriticalPoint

__all__ = [
    "MorseCount",
    "SpectralReport",
    "InstabilityResult",
    "linearized_matrix",
    "free_morse_index",
    "constrained_morse_index",
    "z_vector",
    "classify",
    "z_translate_check",
    "ZTranslateReport",
    "instability_eigenvalue",
    "spectrum_bottom",
    "zero_threshold",
]

TAU0_RELATIVE = 1e-6  # zero threshold as a fraction of the spectral radius


_dense_neglap_cache: dict = {}


def dense_neg_laplacian(grid: GridSpec) -> np.ndarray:
    """Dense symmetric matrix of the spectral -d^2/dx^2 (circulant)."""
    key = (grid.L, grid.M)
    hit = _dense_neglap_cache.get(key)
    if hit is None:
        k2 = grid.wavenumbers**2
        column = np.fft.irfft(k2, n=grid.M)
        hit = scipy.linalg.circulant(column)
        hit = 0.5 * (hit + hit.T)
        hit.setflags(write=False)
        _dense_neglap_cache[key] = hit
    return hit


def linearized_matrix(u: Field, lam: float, V, f) -> np.ndarray:
    """Dense symmetric discretization of -Lap + V - lambda - f'(u)."""
    vs = gr.potential_samples(V, u.grid)
    mat = dense_neg_laplacian(u.grid).copy()
    idx = np.arange(u.grid.M)
    mat[idx, idx] += vs - lam - f.fprime(u.values)
    return mat


def zero_threshold(eigenvalues: np.ndarray) -> float:
    """tau0 = 1e-6 times the spectral radius of the operator."""
    return TAU0_RELATIVE * float(np.max(np.abs(eigenvalues)))


@dataclass(frozen=True)
class MorseCount:
    """Count of eigenvalues below -tau0, with near-zero ones reported.

    A nonempty near_zero list makes the count provisional: eigenvalues in
    [-tau0, tau0] are not counted either way.
    """

    count: int
    near_zero: tuple
    tau0: float

    @property
    def provisional(self) -> bool:
        return len(self.near_zero) > 0

    def __int__(self) -> int:
        return self.count


def _count_below_threshold(eigenvalues: np.ndarray, tau0: float) -> MorseCount:
    near = tuple(float(v) for v in eigenvalues[np.abs(eigenvalues) <= tau0])
    count = int(np.count_nonzero(eigenvalues < -tau0))
    return MorseCount(count=count, near_zero=near, tau0=tau0)


def free_morse_index(L: np.ndarray) -> MorseCount:
    """Negative directions of the quadratic form over the whole space."""
    eigenvalues = np.linalg.eigvalsh(L)
    return _count_below_threshold(eigenvalues, zero_threshold(eigenvalues))


def _tangent_basis(u_vals: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the complement of u (Householder completion)."""
    w = u_vals / np.linalg.norm(u_vals)
    v = w.copy()
    v[0] += np.copysign(1.0, w[0] if w[0] != 0 else 1.0)
    v /= np.linalg.norm(v)
    H = np.eye(len(w)) - 2.0 * np.outer(v, v)
    return H[:, 1:]


def constrained_morse_index(L: np.ndarray, u: Field) -> MorseCount:
    """Negative directions of the form restricted to {v : (v, u)_2 = 0}.

    The u-direction is removed by explicit orthogonal projection (basis
    completion), never by penalty shifts.
    """
    Q = _tangent_basis(u.values)
    reduced = Q.T @ L @ Q
    reduced = 0.5 * (reduced + reduced.T)
    eigenvalues = np.linalg.eigvalsh(reduced)
    return _count_below_threshold(eigenvalues, zero_threshold(eigenvalues))


def z_vector(u: Field, lam: float, V, f, operator: np.ndarray | None = None,
             gap: float | None = None, tau0: float | None = None) -> Field:
    """Solve L z = u, defined whenever L has no near-zero eigenvalue."""
    L = linearized_matrix(u, lam, V, f) if operator is None else operator
    if gap is None or tau0 is None:
        eigenvalues = np.linalg.eigvalsh(L)
        gap = float(np.min(np.abs(eigenvalues)))
        tau0 = zero_threshold(eigenvalues)
    if gap <= tau0:
        raise NotFreelyNondegenerateError(
            f"spectral gap {gap:.3e} is below tau0 = {tau0:.3e}"
        )
    z = np.linalg.solve(L, u.values)
    residual = np.max(np.abs(L @ z - u.values))
    if residual > 1e-10 * max(1.0, np.max(np.abs(u.values))):
        raise NotFreelyNondegenerateError(f"z-solve residual {residual:.3e}")
    return Field(u.grid, z)


@dataclass(frozen=True)
class SpectralReport:
    """Morse data and nondegeneracy classification at a critical point.

    classification is one of 'fully_nondegenerate_neg' ((z,u)_2 < 0, so
    the constrained index sits one below the free index),
    'fully_nondegenerate_pos' ((z,u)_2 > 0, indices agree) or
    'degenerate' (gap or |(z,u)_2| below tau0; counts provisional).
    """

    m: int
    m_f: int
    z_dot_u: float
    spectral_gap: float
    classification: str
    eigenvalues_near_zero: tuple = ()
    tau0: float = 0.0
    provisional: bool = False

    def __post_init__(self):
        if self.provisional or self.classification == "degenerate":
            return
        if self.m_f not in (self.m, self.m + 1):
            raise ValueError(
                f"free index {self.m_f} must be m or m+1 for m = {self.m}"
            )
        if self.classification == "fully_nondegenerate_pos":
            if not (self.z_dot_u > 0 and self.m_f == self.m):
                raise ValueError(
                    f"positive pairing requires m_f == m, got ({self.m}, {self.m_f}), "
                    f"(z,u)_2 = {self.z_dot_u:.3e}"
                )
        elif self.classification == "fully_nondegenerate_neg":
            if not (self.z_dot_u < 0 and self.m_f == self.m + 1):
                raise ValueError(
                    f"negative pairing requires m_f == m+1, got ({self.m}, {self.m_f}), "
                    f"(z,u)_2 = {self.z_dot_u:.3e}"
                )
        else:
            raise ValueError(f"unknown classification {self.classification!r}")

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "m_f": self.m_f,
            "z_dot_u": self.z_dot_u,
            "spectral_gap": self.spectral_gap,
            "classification": self.classification,
            "eigenvalues_near_zero": list(self.eigenvalues_near_zero),
            "tau0": self.tau0,
            "provisional": self.provisional,
        }


def classify(u: Field, lam: float, V, f) -> SpectralReport:
    """Assemble the linearization; report indices, (z,u)_2 and the class."""
    L = linearized_matrix(u, lam, V, f)
    eigenvalues = np.linalg.eigvalsh(L)
    tau0 = zero_threshold(eigenvalues)
    gap = float(np.min(np.abs(eigenvalues)))
    free = _count_below_threshold(eigenvalues, tau0)
    constrained = constrained_morse_index(L, u)
    provisional = free.provisional or constrained.provisional

    z_dot = np.nan
    if gap > tau0:
        z = z_vector(u, lam, V, f, operator=L, gap=gap, tau0=tau0)
        z_dot = gr.inner_l2(z, u)

    if gap <= tau0 or not np.isfinite(z_dot) or abs(z_dot) <= tau0:
        classification = "degenerate"
    elif z_dot > 0:
        classification = "fully_nondegenerate_pos"
    else:
        classification = "fully_nondegenerate_neg"

    return SpectralReport(
        m=constrained.count,
        m_f=free.count,
        z_dot_u=float(z_dot),
        spectral_gap=gap,
        classification=classification,
        eigenvalues_near_zero=free.near_zero + constrained.near_zero,
        tau0=tau0,
        provisional=provisional,
    )


@dataclass(frozen=True)
class ZTranslateReport:
    """Locality check of z at a multibump point against the single-bump z."""

    window_error: float
    scalar_discrepancy: float
    scalar_glued: float
    scalar_expected: float


def z_translate_check(ubar: ConstrainedCriticalPoint,
                      glued: ConstrainedCriticalPoint, cfg, V, f,
                      window: float | None = None) -> ZTranslateReport:
    """Compare back-translated z of the glued point with the single-bump z.

    Returns the worst windowed L2 error over the bumps and the mismatch
    of (u_glued, z_glued)_2 against n * (ubar, z_ubar)_2.
    """
    grid = glued.u.grid
    z_bar = z_vector(ubar.u, ubar.lam, V, f)
    z_glued = z_vector(glued.u, glued.lam, V, f)
    if window is None:
        window = min(cfg.separation / 2.0, grid.L / 2.0)
        if not np.isfinite(window):
            window = grid.L / 2.0
    mask = np.abs(grid.x) <= window
    worst = 0.0
    for a in cfg.offsets:
        back = gr.translate(z_glued, -a)
        diff = (back.values - z_bar.values)[mask]
        worst = max(worst, float(np.sqrt(grid.h * np.sum(diff**2))))
    scalar_glued = gr.inner_l2(glued.u, z_glued)
    scalar_expected = cfg.n * gr.inner_l2(ubar.u, z_bar)
    return ZTranslateReport(
        window_error=worst,
        scalar_discrepancy=abs(scalar_glued - scalar_expected),
        scalar_glued=scalar_glued,
        scalar_expected=scalar_expected,
    )


# -- spectrum bottom -----------------------------------------------------------


def spectrum_bottom(V, grid: GridSpec) -> float:
    """Smallest eigenvalue of the discrete periodic -Lap + V on the box.

    Approximates the bottom of the essential spectrum of the full-line
    operator at this truncation.
    """
    return gr.operator_bottom_eigenvalue(V, grid)


# -- linearized Schrodinger flow: unstable eigenvalue --------------------------


@dataclass(frozen=True)
class InstabilityResult:
    """Positive eigenvalue of the linearized flow with its eigenvector data.

    rho = sqrt(-mu) where mu is the minimum of the constrained quotient;
    v is the quotient minimizer (orthogonal to the wave), and beta the
    multiplier that closes the eigenvector reconstruction.
    """

    rho: float
    mu: float
    v: Field
    beta: float
    second_component: Field
    eigen_residual: float


def instability_eigenvalue(phi: ConstrainedCriticalPoint, V, f,
                           kernel_check_tol: float = 1e-6) -> InstabilityResult:
    """Construct the positive eigenvalue of the linearized flow at phi.

    Preconditions: phi positive, constrained Morse index >= 1, and the
    multiplier below the bottom of -Lap + V.  Solves the generalized
    problem P L1 P v = mu P L2^{-1} P v on the tangent space, demands
    mu < -tau0, and reconstructs the block eigenvector

        w = (v, -rho L2^{-1} v + beta phi / rho),      rho = sqrt(-mu).

    Raises NoInstabilityDetected when the quotient has no eigenvalue
    below -tau0 (reported, not asserted).
    """
    u, lam = phi.u, phi.lam
    grid = u.grid
    if np.min(u.values) <= 0.0:
        raise PreconditionError("instability construction needs a positive wave")
    bottom = spectrum_bottom(V, grid)
    if not lam < bottom:
        raise PreconditionError(
            f"multiplier {lam:.6g} must lie below the spectrum bottom {bottom:.6g}"
        )

    L1 = linearized_matrix(u, lam, V, f)
    eig1 = np.linalg.eigvalsh(L1)
    tau0 = zero_threshold(eig1)
    m = constrained_morse_index(L1, u)

    # comparison operator with the ratio f(phi)/phi taken as |phi|^(p-2)
    vs = gr.potential_samples(V, grid)
    L2 = dense_neg_laplacian(grid).copy()
    idx = np.arange(grid.M)
    L2[idx, idx] += vs - lam - np.abs(u.values) ** (f.p - 2.0)

    kernel_residual = float(np.max(np.abs(L2 @ u.values)))
    if kernel_residual > kernel_check_tol:
        raise PreconditionError(
            f"wave is not in the kernel of the comparison operator "
            f"(residual {kernel_residual:.3e})"
        )

    Q = _tangent_basis(u.values)
    L2t = Q.T @ L2 @ Q
    L2t = 0.5 * (L2t + L2t.T)
    eig2 = np.linalg.eigvalsh(L2t)
    # at multibump points the antisymmetric partner of the kernel sits
    # exponentially close to zero but strictly above it; only a roundoff
    # band below zero counts as a violation
    pos_tol = 1e4 * np.finfo(float).eps * float(np.max(np.abs(eig1)))
    if eig2[0] <= pos_tol:
        raise PositivityViolationError(
            f"comparison operator has eigenvalue {eig2[0]:.3e} on the tangent space"
        )

    L1t = Q.T @ L1 @ Q
    L1t = 0.5 * (L1t + L1t.T)
    # quotient (L1 v, v) / (L2^{-1} v, v) via the Cholesky congruence
    C = np.linalg.cholesky(L2t)
    S = C.T @ L1t @ C
    S = 0.5 * (S + S.T)
    vals, vecs = np.linalg.eigh(S)
    mu = float(vals[0])
    # the quotient floor is set by the congruence-transformed problem, not
    # by the raw operator radius: multibump instabilities are exponentially
    # small in the separation yet sit far above this floor
    mu_floor = 100.0 * np.finfo(float).eps * float(np.max(np.abs(vals)))
    if mu >= -mu_floor:
        raise NoInstabilityDetected(
            f"quotient minimum {mu:.3e} is not below the resolution floor "
            f"{-mu_floor:.3e}", mu=mu
        )
    if m.count < 1:
        raise PreconditionError(
            f"quotient minimum {mu:.3e} is negative but the constrained Morse "
            f"index is {m.count}; counts are inconsistent"
        )
    rho = float(np.sqrt(-mu))

    y = C @ vecs[:, 0]
    v_vals = Q @ y
    v_vals /= np.sqrt(grid.h) * np.linalg.norm(v_vals)
    v = Field(grid, v_vals)

    l2inv_v = Q @ np.linalg.solve(L2t, Q.T @ v_vals)
    alpha = gr.inner_l2(u, u)
    beta = float(grid.h * np.dot(L1 @ v_vals, u.values)) / alpha
    w2 = Field(grid, -rho * l2inv_v + (beta / rho) * u.values)

    r_top = np.max(np.abs(-(L2 @ w2.values) - rho * v.values))
    r_bot = np.max(np.abs(L1 @ v.values - rho * w2.values))
    return InstabilityResult(
        rho=rho,
        mu=mu,
        v=v,
        beta=beta,
        second_component=w2,
        eigen_residual=float(max(r_top, r_bot)),
    )
