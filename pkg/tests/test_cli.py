"""Harness: config validation, artifacts, determinism, exit codes."""

import json

import numpy as np
import pytest

from multibump.cli import RunConfig, main
from multibump.errors import ConfigError

BASE_CONFIG = {
    "grid": {"L": 16, "M": 1024},
    "potential": {"kind": "cosine", "amplitude": 0.5},
    "nonlinearity": {"p": 4.0},
    "mass": 4.5,
    "solver": {"center": 0.5},
}


def write_config(tmp_path, data, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


class TestRunConfig:
    def test_accepts_base(self):
        RunConfig(dict(BASE_CONFIG))

    @pytest.mark.parametrize(
        "patch",
        [
            {"unknown_section": {}},
            {"grid": {"L": 16, "M": 1024, "extra": 1}},
            {"grid": {"L": 16, "M": 1000}},  # not a multiple of 2L
            {"grid": {"L": 16, "M": 65}},
            {"grid": {"L": -2, "M": 1024}},
            {"nonlinearity": {"p": 2.0}},
            {"mass": -1.0},
            {"potential": {"kind": "mystery"}},
        ],
    )
    def test_rejects_invalid(self, patch):
        data = dict(BASE_CONFIG)
        data.update(patch)
        with pytest.raises(ConfigError):
            RunConfig(data)

    def test_hash_stable_under_key_order(self):
        a = RunConfig(dict(BASE_CONFIG)).hash()
        reordered = json.loads(json.dumps(BASE_CONFIG, sort_keys=True))
        b = RunConfig(reordered).hash()
        assert a == b

    def test_config_error_exit_code(self, tmp_path, capsys):
        bad = write_config(tmp_path, {"mass": -1.0})
        rc = main(["--config", bad, "--out", str(tmp_path / "o"), "groundstate"])
        assert rc == 2


@pytest.fixture(scope="module")
def groundstate_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("gs")
    cfg = write_config(tmp, BASE_CONFIG)
    out = tmp / "out"
    rc = main(["--config", cfg, "--out", str(out), "groundstate"])
    assert rc == 0
    return tmp, cfg, out


class TestGroundstate:
    def test_artifacts_exist(self, groundstate_run):
        _, _, out = groundstate_run
        for name in (
            "groundstate.json",
            "groundstate_field.csv",
            "groundstate_field.bin",
            "groundstate_spectrum.json",
        ):
            assert (out / name).exists()

    def test_payload_contents(self, groundstate_run):
        _, _, out = groundstate_run
        payload = json.loads((out / "groundstate.json").read_text())
        assert payload["residual"] < 1e-8
        assert payload["mass"] == pytest.approx(4.5)
        assert "config_hash" in payload and "version" in payload
        spectrum = json.loads((out / "groundstate_spectrum.json").read_text())
        assert spectrum["m"] == 0 and spectrum["m_f"] == 1

    def test_determinism(self, groundstate_run):
        tmp, cfg, out = groundstate_run
        out2 = tmp / "out2"
        assert main(["--config", cfg, "--out", str(out2), "groundstate"]) == 0
        for name in ("groundstate.json", "groundstate_field.bin",
                     "groundstate_spectrum.json"):
            assert (out / name).read_bytes() == (out2 / name).read_bytes()


class TestSpectrumCommand:
    def test_classifies_existing_field(self, groundstate_run):
        tmp, cfg, out = groundstate_run
        rc = main([
            "--config", cfg, "--out", str(tmp / "spectrum_out"),
            "spectrum", str(out / "groundstate_field.bin"),
        ])
        assert rc == 0
        report = json.loads((tmp / "spectrum_out" / "spectrum.json").read_text())
        assert report["classification"] == "fully_nondegenerate_neg"
        rows = (tmp / "spectrum_out" / "spectrum_eigenvalues.csv").read_text().splitlines()
        assert rows[0] == "index,value"
        assert len(rows) == 1 + 1024  # one per grid point
        assert float(rows[1].split(",")[1]) < 0  # single negative direction first

    def test_tampered_field_exits_3(self, groundstate_run):
        from multibump.grid import read_field_binary, write_field_binary, Field

        tmp, cfg, out = groundstate_run
        u = read_field_binary(out / "groundstate_field.bin")
        rng = np.random.default_rng(0)
        bad = Field(u.grid, u.values + 0.05 * rng.standard_normal(u.grid.M))
        tampered = tmp / "tampered.bin"
        write_field_binary(bad, tampered)
        rc = main(["--config", cfg, "--out", str(tmp / "spectrum_out2"),
                   "spectrum", str(tampered)])
        assert rc == 3


class TestGlueCommand:
    def test_sweep_csv(self, tmp_path):
        data = dict(BASE_CONFIG)
        data["mass"] = 9.0
        data["bumps"] = {"n": 2, "separations": [8, 10]}
        cfg = write_config(tmp_path, data)
        out = tmp_path / "out"
        rc = main(["--config", cfg, "--out", str(out), "glue"])
        assert rc == 0
        lines = (out / "glue_sweep.csv").read_text().strip().splitlines()
        header = lines[0].split(",")
        assert header == ["d", "newton_iters", "dist_h1", "dlambda",
                          "sigma_min", "m", "m_f", "status"]
        assert len(lines) == 3
        for line in lines[1:]:
            assert line.endswith("ok")
            assert int(line.split(",")[5]) == 1  # constrained index n - 1

    def test_partial_failure_still_succeeds(self, tmp_path):
        data = dict(BASE_CONFIG)
        data["mass"] = 9.0
        data["bumps"] = {"n": 2, "separations": [2, 10]}
        cfg = write_config(tmp_path, data)
        out = tmp_path / "out"
        rc = main(["--config", cfg, "--out", str(out), "glue"])
        assert rc == 0
        lines = (out / "glue_sweep.csv").read_text().strip().splitlines()
        statuses = [line.rsplit(",", 1)[1] for line in lines[1:]]
        assert any(s.startswith("failed") for s in statuses)
        assert any(s == "ok" for s in statuses)


class TestEvolveCommand:
    def test_unperturbed_control_is_flat(self, groundstate_run, tmp_path):
        _, cfg_path, out = groundstate_run
        data = dict(BASE_CONFIG)
        data["dynamics"] = {"dt": 1e-3, "t_end": 1.0, "perturbation_amplitude": 0.0}
        cfg = write_config(tmp_path, data)
        run_out = tmp_path / "evo"
        rc = main(["--config", cfg, "--out", str(run_out),
                   "evolve", str(out / "groundstate_field.bin")])
        assert rc == 0
        rows = (run_out / "evolve_trace.csv").read_text().strip().splitlines()[1:]
        dists = [float(r.split(",")[3]) for r in rows]
        assert max(dists) < 1e-4


class TestSweepCommand:
    def test_multiple_bump_counts(self, tmp_path):
        data = dict(BASE_CONFIG)
        data["mass"] = 9.0
        data["bumps"] = {"n_list": [2], "separations": [10]}
        cfg = write_config(tmp_path, data)
        out = tmp_path / "out"
        rc = main(["--config", cfg, "--out", str(out), "--jobs", "2", "sweep"])
        assert rc == 0
        assert (out / "n2" / "glue_sweep.csv").exists()


class TestPotentialGauge:
    def test_negative_bottom_is_shifted_and_reported(self, tmp_path):
        from multibump.gluing import ground_state
        from multibump.grid import GridSpec
        from multibump.model import Nonlinearity, Potential

        grid = GridSpec(16, 1024)
        V = Potential.cosine(0.5, shift=-1.2)  # bottom below zero
        point = ground_state(grid, 4.0, V, Nonlinearity(4.0), center=0.5)
        assert point.potential_shift > 0
        assert point.lam_user == pytest.approx(point.lam - point.potential_shift)


class TestSemiclassicalCommand:
    def test_family_tables(self, tmp_path):
        data = {
            "grid": {"L": 20, "M": 1280},
            "potential": {"kind": "cosine", "amplitude": -0.3, "shift": 0.3},
            "nonlinearity": {"p": 4.0},
            "mass": 1.0,
            "semiclassical": {"eps_list": [0.2, 0.1], "m_V": 0},
        }
        cfg = write_config(tmp_path, data)
        out = tmp_path / "out"
        rc = main(["--config", cfg, "--out", str(out), "semiclassical"])
        assert rc == 0
        lines = (out / "semiclassical_family.csv").read_text().strip().splitlines()
        assert len(lines) == 3
        crit = json.loads((out / "semiclassical_criterion.json").read_text())
        assert crit["relative_error"] < 1e-4
        for line in lines[1:]:
            cells = line.split(",")
            assert int(cells[3]) == 0 and int(cells[4]) == 1  # m, m_f
            assert float(cells[5]) < 0  # subcritical pairing

    def test_end_to_end_gluing(self, tmp_path):
        # total mass chosen so the per-bump share matches eps = 0.2 exactly,
        # whose translation lattice (multiples of 5) is integral
        from multibump.grid import GridSpec
        from multibump.model import Potential
        from multibump.semiclassical import continue_family

        grid = GridSpec(20, 1280)
        V = Potential.cosine(-0.3, shift=0.3)
        family = continue_family(grid, [0.25, 0.2, 0.15], V, 4.0)
        alpha = 2 * float(
            np.interp(0.2, family.eps_values[::-1], family.unrescaled_masses[::-1])
        )
        data = {
            "grid": {"L": 20, "M": 1280},
            "potential": {"kind": "cosine", "amplitude": -0.3, "shift": 0.3},
            "nonlinearity": {"p": 4.0},
            "mass": alpha,
            "semiclassical": {"eps_list": [0.25, 0.2, 0.15], "m_V": 0},
            "bumps": {"n": 2},
        }
        cfg = write_config(tmp_path, data)
        out = tmp_path / "out"
        rc = main(["--config", cfg, "--out", str(out), "semiclassical"])
        assert rc == 0
        payload = json.loads((out / "endtoend.json").read_text())
        assert payload["eps"] == pytest.approx(0.2, abs=1e-8)
        # subcritical branch at a potential minimum: index n(m_V + 1) - 1
        assert payload["m"] == 1 and payload["m_f"] == 2
