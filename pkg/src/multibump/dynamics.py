"""Split-step time evolution and orbital (in)stability measurements.

The time-dependent equation, written so that a constrained critical
point phi with multiplier lambda gives the exact orbit phi*exp(i lambda t), is

    du/dt = i ( -Lap u + V u - |u|^(p-2) u ).

Strang splitting alternates exact half-steps of the kinetic part in the
Fourier basis with exact pointwise phase rotation for the potential and
nonlinear parts, so the particle number h*sum(|u|^2) is conserved to
roundoff at every step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import grid as gr
from .errors import FitRejectedError, IntegratorFaultError, PreconditionError
from .grid import Field, GridSpec

__all__ = [
    "ComplexField",
    "TrajectoryRecord",
    "propagate",
    "orbit_distance",
    "growth_rate_fit",
    "complex_energy",
]


@dataclass(frozen=True)
class ComplexField:
    """Complex grid function tied to a GridSpec."""

    grid: GridSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.grid.M,):
            raise ValueError(f"expected {self.grid.M} values, got shape {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("complex field contains non-finite entries")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_real(cls, u: Field) -> "ComplexField":
        return cls(u.grid, u.values.astype(complex))

    @property
    def mass(self) -> float:
        return float(self.grid.h * np.sum(np.abs(self.values) ** 2))


def complex_energy(psi: ComplexField, V, f) -> float:
    """E(psi) = 1/2 integral(|psi'|^2 + V |psi|^2) - integral(F(|psi|))."""
    grid = psi.grid
    k = 2.0 * np.pi * np.fft.fftfreq(grid.M, d=grid.h)
    coeffs = np.fft.fft(psi.values)
    kinetic = grid.h * float(np.sum(k**2 * np.abs(coeffs) ** 2)) / grid.M
    vs = gr.potential_samples(V, grid)
    dens = np.abs(psi.values) ** 2
    return float(
        0.5 * kinetic
        + 0.5 * grid.h * np.sum(vs * dens)
        - grid.h * np.sum(f.F(np.abs(psi.values)))
    )


def _h1_pairing(psi_vals: np.ndarray, phi_vals: np.ndarray, grid: GridSpec) -> complex:
    """Standard complex H1 pairing integral(psi' conj(phi)' + psi conj(phi))."""
    k = 2.0 * np.pi * np.fft.fftfreq(grid.M, d=grid.h)
    a = np.fft.fft(psi_vals)
    b = np.fft.fft(phi_vals)
    return complex(grid.h * np.sum((k**2 + 1.0) * a * np.conj(b)) / grid.M)


def orbit_distance(psi: ComplexField, phi: Field, lam: float) -> float:
    """H1 distance of psi to the phase orbit of the standing wave phi.

    The reference orbit is phi times a unit phase; the minimizing phase
    has the closed form theta = arg of the complex H1 pairing.  lam only
    labels the orbit (it rotates the phase in time without changing the
    set swept).
    """
    del lam
    if psi.grid != phi.grid:
        raise PreconditionError("psi and phi live on different grids")
    grid = psi.grid
    c = _h1_pairing(psi.values, phi.values.astype(complex), grid)
    na = np.real(_h1_pairing(psi.values, psi.values, grid))
    nb = np.real(_h1_pairing(phi.values.astype(complex), phi.values.astype(complex), grid))
    d2 = na + nb - 2.0 * abs(c)
    return float(np.sqrt(max(d2, 0.0)))


@dataclass
class TrajectoryRecord:
    """Time series of conserved quantities and orbit distances.

    Snapshots are stored sparsely (stride configurable) as complex arrays.
    """

    times: np.ndarray
    mass: np.ndarray
    energy: np.ndarray
    orbit_dist: np.ndarray
    snapshot_times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")


def propagate(psi0: ComplexField, V, f, dt: float, t_end: float,
              reference: tuple[Field, float] | None = None,
              record_stride: int = 1, snapshot_stride: int = 0,
              mass_drift_tol: float = 1e-10, dt_cap: float = 0.05) -> TrajectoryRecord:
    """Strang split-step evolution from psi0 up to t_end.

    reference, when given as (phi, lambda), adds an orbit-distance trace.
    Raises IntegratorFaultError if the relative particle-number drift ever
    exceeds mass_drift_tol.
    """
    if dt <= 0 or dt > dt_cap:
        raise PreconditionError(f"time step must lie in (0, {dt_cap}], got {dt}")
    grid = psi0.grid
    vs = gr.potential_samples(V, grid)
    k = 2.0 * np.pi * np.fft.fftfreq(grid.M, d=grid.h)
    half_kinetic = np.exp(1j * k**2 * (0.5 * dt))

    n_steps = int(round(t_end / dt))
    psi = psi0.values.copy()
    mass0 = psi0.mass

    times = [0.0]
    masses = [mass0]
    energies = [complex_energy(psi0, V, f)]
    dists = []
    if reference is not None:
        phi_ref, lam_ref = reference
        dists.append(orbit_distance(psi0, phi_ref, lam_ref))
    snap_times, snaps = [], []
    if snapshot_stride:
        snap_times.append(0.0)
        snaps.append(psi0.values.copy())

    t = 0.0
    for step in range(1, n_steps + 1):
        coeffs = np.fft.fft(psi)
        psi = np.fft.ifft(half_kinetic * coeffs)
        phase = vs - f.g(np.abs(psi) ** 2)
        psi = np.exp(1j * dt * phase) * psi
        psi = np.fft.ifft(half_kinetic * np.fft.fft(psi))
        t = step * dt

        if step % record_stride == 0 or step == n_steps:
            current = ComplexField(grid, psi)
            m = current.mass
            if abs(m - mass0) > mass_drift_tol * mass0:
                raise IntegratorFaultError(
                    f"particle-number drift {abs(m - mass0) / mass0:.3e} at t = {t:.4f}"
                )
            times.append(t)
            masses.append(m)
            energies.append(complex_energy(current, V, f))
            if reference is not None:
                dists.append(orbit_distance(current, phi_ref, lam_ref))
            if snapshot_stride and (step % snapshot_stride == 0 or step == n_steps):
                snap_times.append(t)
                snaps.append(psi.copy())

    return TrajectoryRecord(
        times=np.asarray(times),
        mass=np.asarray(masses),
        energy=np.asarray(energies),
        orbit_dist=np.asarray(dists) if dists else np.full(len(times), np.nan),
        snapshot_times=snap_times,
        snapshots=snaps,
    )


def growth_rate_fit(traj: TrajectoryRecord, window: tuple[float, float],
                    lower: float = 1e-6, upper: float = 1e-1) -> float:
    """Least-squares slope of log(orbit distance) over the time window.

    The window must sit in the linear regime: all distances inside it
    must lie within [lower, upper], otherwise the fit is rejected.
    """
    t0, t1 = window
    mask = (traj.times >= t0) & (traj.times <= t1)
    if np.count_nonzero(mask) < 4:
        raise FitRejectedError(f"window [{t0}, {t1}] holds fewer than 4 samples")
    d = traj.orbit_dist[mask]
    if np.any(~np.isfinite(d)):
        raise FitRejectedError("trajectory carries no orbit-distance trace")
    if np.any(d < lower) or np.any(d > upper):
        raise FitRejectedError(
            f"distances in [{d.min():.3e}, {d.max():.3e}] leave the linear band "
            f"[{lower:.1e}, {upper:.1e}]"
        )
    t = traj.times[mask]
    slope = np.polyfit(t, np.log(d), 1)[0]
    return float(slope)
