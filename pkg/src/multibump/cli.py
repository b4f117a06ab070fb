"""Batch experiment harness.

One JSON configuration file per run; subcommands map to the laboratory's
capabilities: groundstate, glue, spectrum, evolve, semiclassical, sweep.
All tables are CSV with a header row; all scalar reports are JSON with
the configuration hash and code version embedded so identical runs are
byte-identical.

Exit codes: 0 success, 2 configuration error, 3 precondition failure,
4 solver failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import dynamics as dy
from . import gluing as gl
from . import grid as gr
from . import model as md
from . import semiclassical as sc
from . import spectra as sp
from . import stationary as st
from .errors import (
    ConfigError,
    ContinuationNeededError,
    FitRejectedError,
    FlowStalledError,
    GluingFailedError,
    IntegratorFaultError,
    LinearSolverError,
    MassRangeError,
    MultibumpError,
    NoInstabilityDetected,
    PreconditionError,
)

__all__ = ["RunConfig", "main"]

_PRECONDITION_ERRORS = (PreconditionError, MassRangeError, NoInstabilityDetected)
_SOLVER_ERRORS = (
    FlowStalledError,
    GluingFailedError,
    LinearSolverError,
    ContinuationNeededError,
    IntegratorFaultError,
    FitRejectedError,
)

_SCHEMA = {
    "grid": {"L", "M"},
    "potential": {"kind", "amplitude", "shift", "constant", "table"},
    "nonlinearity": {"p"},
    "mass": None,
    "bumps": {"n", "offsets", "separations", "n_list"},
    "solver": {"flow_tol", "newton_tol", "flow_step", "center"},
    "dynamics": {
        "dt",
        "t_end",
        "perturbation_amplitude",
        "perturbation_kind",
        "seed",
        "record_stride",
    },
    "semiclassical": {"eps_list", "m_V"},
    "output": None,
}


class RunConfig:
    """Validated run configuration (unknown keys rejected)."""

    def __init__(self, data: dict):
        if not isinstance(data, dict):
            raise ConfigError("configuration root must be an object")
        unknown = set(data) - set(_SCHEMA)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
        for key, allowed in _SCHEMA.items():
            if allowed is None or key not in data:
                continue
            section = data[key]
            if not isinstance(section, dict):
                raise ConfigError(f"section {key!r} must be an object")
            extra = set(section) - allowed
            if extra:
                raise ConfigError(f"unknown keys in {key!r}: {sorted(extra)}")
        self.data = data
        self._validate()

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from exc
        return cls(data)

    def _validate(self):
        g = self.data.get("grid", {})
        L, M = g.get("L", 24), g.get("M", 1536)
        if not (isinstance(L, int) and L > 0):
            raise ConfigError(f"grid.L must be a positive integer, got {L!r}")
        if not (isinstance(M, int) and M >= 64 and M % 2 == 0):
            raise ConfigError(f"grid.M must be an even integer >= 64, got {M!r}")
        if M % (2 * L) != 0:
            raise ConfigError(
                f"grid.M = {M} must be a multiple of 2L = {2 * L} so that unit "
                "translations are exact grid shifts"
            )
        p = self.data.get("nonlinearity", {}).get("p", 4.0)
        if not p > 2:
            raise ConfigError(f"nonlinearity.p must exceed 2, got {p}")
        alpha = self.data.get("mass", 1.0)
        if not alpha > 0:
            raise ConfigError(f"mass must be positive, got {alpha}")
        kind = self.data.get("potential", {}).get("kind", "constant")
        if kind not in ("constant", "cosine", "tabulated"):
            raise ConfigError(f"unknown potential kind {kind!r}")

    # -- constructors -------------------------------------------------------

    def grid(self) -> gr.GridSpec:
        g = self.data.get("grid", {})
        return gr.GridSpec(g.get("L", 24), g.get("M", 1536))

    def potential(self) -> md.Potential:
        pot = self.data.get("potential", {"kind": "constant", "constant": 1.0})
        kind = pot.get("kind", "constant")
        if kind == "constant":
            return md.Potential.const(pot.get("constant", 1.0))
        if kind == "cosine":
            return md.Potential.cosine(pot.get("amplitude", 0.5), pot.get("shift", 0.0))
        return md.Potential.tabulated(pot["table"], pot.get("shift", 0.0))

    def nonlinearity(self) -> md.Nonlinearity:
        return md.Nonlinearity(self.data.get("nonlinearity", {}).get("p", 4.0))

    def mass(self) -> float:
        return float(self.data.get("mass", 1.0))

    def solver(self) -> dict:
        s = dict(self.data.get("solver", {}))
        s.setdefault("flow_tol", 1e-6)
        s.setdefault("newton_tol", 1e-10)
        s.setdefault("flow_step", 0.8)
        s.setdefault("center", 0.0)
        return s

    def hash(self) -> str:
        canon = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _metadata(config: RunConfig) -> dict:
    return {
        "config_hash": config.hash(),
        "version": __version__,
        "threads": int(os.environ.get("OMP_NUM_THREADS", "0")) or os.cpu_count(),
    }


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _write_csv(path: Path, header: list, rows: list) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(c) if isinstance(c, float) else str(c) for c in row) + "\n")


def _point_payload(point: st.ConstrainedCriticalPoint, V, f, config: RunConfig,
                   field_file: str) -> dict:
    return {
        "lambda": point.lam,
        "lambda_user": point.lam_user,
        "mass": point.mass,
        "residual": point.l2_residual_norm,
        "constraint_violation": point.constraint_violation,
        "energy": md.energy(point.u, V, f),
        "field_file": field_file,
        **_metadata(config),
    }


def _emit_point(point, V, f, config, out: Path, stem: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    gr.write_field_csv(point.u, out / f"{stem}_field.csv")
    gr.write_field_binary(point.u, out / f"{stem}_field.bin")
    _write_json(out / f"{stem}.json", _point_payload(point, V, f, config, f"{stem}_field.bin"))


# -- subcommands ---------------------------------------------------------------


def _working_potential(V, point):
    """Potential in the gauge the point was solved in."""
    return V.shifted(point.potential_shift) if point.potential_shift else V


def cmd_groundstate(config: RunConfig, out: Path) -> int:
    grid = config.grid()
    V, f = config.potential(), config.nonlinearity()
    s = config.solver()
    point = gl.ground_state(
        grid, config.mass(), V, f,
        center=s["center"], flow_tol=s["flow_tol"], newton_tol=s["newton_tol"],
        flow_step=s["flow_step"],
    )
    point.certify()
    Vw = _working_potential(V, point)
    _emit_point(point, Vw, f, config, out, "groundstate")
    report = sp.classify(point.u, point.lam, Vw, f)
    _write_json(out / "groundstate_spectrum.json", {**report.to_dict(), **_metadata(config)})
    return 0


def _base_point(config: RunConfig, per_bump_mass: float, out: Path):
    grid = config.grid()
    V, f = config.potential(), config.nonlinearity()
    s = config.solver()
    point = gl.ground_state(
        grid, per_bump_mass, V, f,
        center=s["center"], flow_tol=s["flow_tol"], newton_tol=s["newton_tol"],
        flow_step=s["flow_step"],
    )
    Vw = _working_potential(V, point)
    _emit_point(point, Vw, f, config, out, "base_point")
    return point, Vw, f


def _symmetric_offsets(n: int, d: int) -> tuple:
    span = d * (n - 1)
    start = -span // 2
    return tuple(start + d * i for i in range(n))


def _glue_row(ubar, cfg, alpha, V, f, newton_tol):
    from dataclasses import replace

    result = gl.glue(ubar, cfg, alpha, V, f, tol=newton_tol)
    if ubar.potential_shift:
        result.point = replace(result.point, potential_shift=ubar.potential_shift)
    point = result.point
    report = sp.classify(point.u, point.lam, V, f)
    sigma = gl.bordered_sigma_min(
        gl.ExtendedPoint(gl.superpose(ubar.u, cfg), ubar.lam), V, f
    )
    return result, report, sigma


def cmd_glue(config: RunConfig, out: Path, jobs: int = 1) -> int:
    bumps = config.data.get("bumps", {})
    n = int(bumps.get("n", 2))
    separations = bumps.get("separations")
    if separations is None:
        if "offsets" in bumps:
            offsets = tuple(int(a) for a in bumps["offsets"])
            separations = [gl.BumpConfig(len(offsets), offsets).separation]
            configs = [gl.BumpConfig(len(offsets), offsets)]
        else:
            separations = [8, 12, 16]
            configs = [gl.BumpConfig(n, _symmetric_offsets(n, int(d))) for d in separations]
    else:
        configs = [gl.BumpConfig(n, _symmetric_offsets(n, int(d))) for d in separations]

    alpha = config.mass()
    ubar, V, f = _base_point(config, alpha / configs[0].n, out)
    newton_tol = config.solver()["newton_tol"]

    def run_one(cfg):
        try:
            return cfg, _glue_row(ubar, cfg, alpha, V, f, newton_tol), None
        except MultibumpError as exc:
            return cfg, None, exc

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run_one, configs))
    else:
        outcomes = [run_one(cfg) for cfg in configs]

    rows, n_ok = [], 0
    for cfg, payload, exc in outcomes:
        d = cfg.separation
        if exc is not None:
            rows.append([d, -1, float("nan"), float("nan"), float("nan"), -1, -1, f"failed:{type(exc).__name__}"])
            continue
        result, report, sigma = payload
        n_ok += 1
        rows.append([
            d, result.iterations, result.distance_h1, result.dlambda,
            sigma, report.m, report.m_f, "ok",
        ])
        stem = f"glue_point_d{int(d)}"
        _emit_point(result.point, V, f, config, out, stem)
        _write_json(out / f"{stem}_spectrum.json", {**report.to_dict(), **_metadata(config)})
    _write_csv(
        out / "glue_sweep.csv",
        ["d", "newton_iters", "dist_h1", "dlambda", "sigma_min", "m", "m_f", "status"],
        rows,
    )
    return 0 if n_ok >= 1 else 4


def cmd_spectrum(config: RunConfig, out: Path, field_file: str,
                 residual_tol: float = 1e-6) -> int:
    V, f = config.potential(), config.nonlinearity()
    path = Path(field_file)
    u = gr.read_field_binary(path) if path.suffix == ".bin" else gr.read_field_csv(path)
    lam = st.lagrange_multiplier(u, V, f)
    res = md.l2_residual(u, lam, V, f)
    res_norm = float(np.max(np.abs(res.values)))
    if res_norm > residual_tol:
        print(
            f"field is not a critical point: residual {res_norm:.3e} > {residual_tol:.1e}",
            file=sys.stderr,
        )
        return 3
    report = sp.classify(u, lam, V, f)
    _write_json(
        out / "spectrum.json",
        {**report.to_dict(), "lambda": lam, "residual": res_norm, **_metadata(config)},
    )
    eigenvalues = np.linalg.eigvalsh(sp.linearized_matrix(u, lam, V, f))
    _write_csv(
        out / "spectrum_eigenvalues.csv",
        ["index", "value"],
        [[i, float(v)] for i, v in enumerate(eigenvalues)],
    )
    return 0


def cmd_evolve(config: RunConfig, out: Path, field_file: str,
               snapshot_stride: int = 0) -> int:
    V, f = config.potential(), config.nonlinearity()
    path = Path(field_file)
    phi = gr.read_field_binary(path) if path.suffix == ".bin" else gr.read_field_csv(path)
    lam = st.lagrange_multiplier(phi, V, f)
    dyn = config.data.get("dynamics", {})
    dt = float(dyn.get("dt", 1e-3))
    t_end = float(dyn.get("t_end", 10.0))
    amp = float(dyn.get("perturbation_amplitude", 0.0))
    kind = dyn.get("perturbation_kind", "none" if amp == 0 else "eigenvector")
    stride = int(dyn.get("record_stride", 20))

    mass = gr.inner_l2(phi, phi)
    point = st.ConstrainedCriticalPoint.measure(phi, lam, mass, V, f)
    seed_vals = phi.values.copy()
    rate_expected = float("nan")
    if kind == "eigenvector":
        inst = sp.instability_eigenvalue(point, V, f)
        seed_vals = seed_vals + amp * inst.v.values
        rate_expected = inst.rho
    elif kind == "random":
        rng = np.random.default_rng(int(dyn.get("seed", 0)))
        noise = rng.standard_normal(len(seed_vals)) * np.exp(-np.abs(phi.grid.x))
        noise /= np.sqrt(phi.grid.h) * np.linalg.norm(noise)
        seed_vals = seed_vals + amp * noise
    elif kind != "none":
        raise ConfigError(f"unknown perturbation kind {kind!r}")
    if amp > 0:
        seed_vals *= np.sqrt(mass) / (np.sqrt(phi.grid.h) * np.linalg.norm(seed_vals))

    traj = dy.propagate(
        dy.ComplexField(phi.grid, seed_vals.astype(complex)), V, f,
        dt=dt, t_end=t_end, reference=(phi, lam),
        record_stride=stride, snapshot_stride=snapshot_stride,
    )
    _write_csv(
        out / "evolve_trace.csv",
        ["t", "mass", "energy", "orbit_distance"],
        [[float(t), float(m), float(e), float(d)]
         for t, m, e, d in zip(traj.times, traj.mass, traj.energy, traj.orbit_dist)],
    )
    payload = {"rho_expected": rate_expected, **_metadata(config)}
    d = traj.orbit_dist
    window = (d > 10 * max(amp, 1e-7)) & (d < 1e-2)
    if kind == "eigenvector" and np.count_nonzero(window) >= 4:
        t_sel = traj.times[window]
        try:
            payload["growth_rate"] = dy.growth_rate_fit(
                traj, (float(t_sel[0]), float(t_sel[-1])), lower=1e-7, upper=2e-2
            )
        except FitRejectedError:
            payload["growth_rate"] = float("nan")
    _write_json(out / "evolve.json", payload)
    for i, (t, snap) in enumerate(zip(traj.snapshot_times, traj.snapshots)):
        np.save(out / f"snapshot_{i:04d}.npy", snap)
    return 0


def cmd_semiclassical(config: RunConfig, out: Path) -> int:
    grid = config.grid()
    V, f = config.potential(), config.nonlinearity()
    semi = config.data.get("semiclassical", {})
    eps_list = semi.get("eps_list", [0.2, 0.1, 0.05])
    m_V = int(semi.get("m_V", 0))
    family = sc.continue_family(grid, eps_list, V, f.p)
    z_rows = sc.z_eps_check(family)
    t_rows = sc.translation_mode_estimate(family, V)
    m_rows = sc.morse_check(family, m_V)
    rows = []
    for member, zr, tr, mr in zip(family.members, z_rows, t_rows, m_rows):
        rows.append([
            member.eps, member.mass_unrescaled, member.x_peak,
            mr["m"], mr["m_f"], zr["pairing"], tr["ratio"],
            "flagged" if mr["flagged"] else "ok",
        ])
    _write_csv(
        out / "semiclassical_family.csv",
        ["eps", "mass", "x_eps", "m", "m_f", "pairing", "rayleigh_ratio", "status"],
        rows,
    )
    crit = sc.criterion_value(f.p, grid=grid)
    _write_json(
        out / "semiclassical_criterion.json",
        {
            "p": f.p,
            "numeric": crit.numeric,
            "analytic": crit.analytic,
            "relative_error": crit.relative_error,
            **_metadata(config),
        },
    )
    if "bumps" in config.data:
        _semiclassical_end_to_end(config, out, family, V, f)
    return 0


def _semiclassical_end_to_end(config: RunConfig, out: Path, family, V, f) -> None:
    """Mass-match a family member and glue n translated copies of it.

    Requires the matched concentration scale to land on an integer
    translation lattice (1/eps integral), otherwise the translated wells
    cannot be realized as exact grid shifts.
    """
    n = int(config.data["bumps"].get("n", 2))
    alpha = config.mass()
    eps_n, base = sc.select_mass_epsilon(alpha, n, family)
    stride = 1.0 / eps_n
    if abs(stride - round(stride)) > 1e-9:
        raise PreconditionError(
            f"matched eps = {eps_n:.8f} has no integer translation lattice; "
            "choose a total mass whose per-bump share lands on 1/eps integral"
        )
    stride = int(round(stride))
    offsets = tuple(stride * (2 * i - (n - 1)) for i in range(n))
    Veps = sc.scaled_potential(V, eps_n)
    result = gl.glue(base, gl.BumpConfig(n, offsets), n * base.mass, Veps, f)
    report = sp.classify(result.point.u, result.point.lam, Veps, f)
    _emit_point(result.point, Veps, f, config, out, "endtoend_point")
    _write_json(
        out / "endtoend.json",
        {
            "eps": eps_n,
            "n": n,
            "offsets": list(offsets),
            "per_bump_mass": base.mass,
            **report.to_dict(),
            **_metadata(config),
        },
    )


def cmd_sweep(config: RunConfig, out: Path, jobs: int = 1) -> int:
    """Separation sweep over one or more bump counts (superset of glue)."""
    bumps = dict(config.data.get("bumps", {}))
    n_list = bumps.get("n_list", [bumps.get("n", 2)])
    status = 4
    for n in n_list:
        sub = dict(config.data)
        sub_bumps = dict(bumps)
        sub_bumps.pop("n_list", None)
        sub_bumps["n"] = int(n)
        sub["bumps"] = sub_bumps
        rc = cmd_glue(RunConfig(sub), out / f"n{n}", jobs=jobs)
        status = min(status, rc)
    return status


def _add_common_flags(parser, suppress=False):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="JSON run configuration")
    parser.add_argument("--out", default=default, help="output directory override")
    parser.add_argument("--jobs", type=int, default=argparse.SUPPRESS if suppress else 1,
                        help="concurrent sweep jobs")
    parser.add_argument("--snapshot-stride", type=int,
                        default=argparse.SUPPRESS if suppress else 0,
                        help="steps between stored snapshots (evolve)")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="multibump", description="normalized multibump standing-wave laboratory"
    )
    _add_common_flags(parser)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("groundstate", "semiclassical", "glue", "sweep"):
        p = sub.add_parser(name)
        _add_common_flags(p, suppress=True)
    for name in ("spectrum", "evolve"):
        p = sub.add_parser(name)
        p.add_argument("field_file", help="field CSV or binary produced by this tool")
        _add_common_flags(p, suppress=True)

    args = parser.parse_args(argv)
    if args.config is None:
        parser.error("--config is required")
    try:
        config = RunConfig.load(args.config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    out = Path(args.out or os.environ.get("MULTIBUMP_OUT") or config.data.get("output", "out"))
    out.mkdir(parents=True, exist_ok=True)

    try:
        if args.command == "groundstate":
            return cmd_groundstate(config, out)
        if args.command == "glue":
            return cmd_glue(config, out, jobs=args.jobs)
        if args.command == "sweep":
            return cmd_sweep(config, out, jobs=args.jobs)
        if args.command == "spectrum":
            return cmd_spectrum(config, out, args.field_file)
        if args.command == "evolve":
            return cmd_evolve(config, out, args.field_file, snapshot_stride=args.snapshot_stride)
        if args.command == "semiclassical":
            return cmd_semiclassical(config, out)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except _PRECONDITION_ERRORS as exc:
        print(f"precondition failure: {exc}", file=sys.stderr)
        return 3
    except _SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
