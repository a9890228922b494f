"""Tests for kerrsim.commands and the main entry point."""
import copy
import csv
import json
import os
import tempfile
from unittest.mock import patch

import pytest

from kerrsim.commands import (
    cmd_compare,
    cmd_evolve,
    cmd_steady_sweep,
    wigner_map_name,
)
from kerrsim.config import DEFAULT_CONFIG, config_hash, load_config
from kerrsim.errors import ConfigError, OutputError, ToleranceFailure
from kerrsim.exporter import frame_name, read_manifest
from kerrsim.mps import load_checkpoint, reduced_density_matrix
from kerrsim.observables import photon_number


def _small_cfg(**overrides):
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    cfg["system"].update(delta=-2.0, chi2=0.5, gamma=1.0, drive_re=0.5, cutoff=5.0)
    cfg["simulation"].update(n_sites=4, local_dim=4, bond_dim=4, dt=0.01, t_total=0.05)
    cfg["sweep"].update(drives=[0.5, 1.0], density_dim=8)
    cfg["wigner"].update(x_min=-3.0, x_max=3.0, p_min=-3.0, p_max=3.0, nx=11, np=11,
                         times=[0.02, 0.05])
    cfg["lindblad"].update(dim=6, dt=0.001, t_total=0.05)
    for section, values in overrides.items():
        cfg[section].update(values)
    return cfg


def _write_cfg(tmpdir, cfg):
    path = os.path.join(tmpdir, "run.json")
    with open(path, "w") as f:
        json.dump(cfg, f)
    return path


def _lines(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


class TestSteadySweep:
    def test_writes_table_and_manifest(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            cmd_steady_sweep(_small_cfg(), tmpdir)
            rows = _lines(os.path.join(tmpdir, "sweep.csv"))
            manifest = read_manifest(tmpdir)
        assert len(rows) == 3
        assert [float(r[0]) for r in rows[1:]] == [0.5, 1.0]
        assert manifest.command == "steady-sweep"
        assert manifest.files == ["sweep.csv"]
        assert manifest.config_hash == config_hash(_small_cfg())

    def test_threads_do_not_change_output(self):
        with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
            cmd_steady_sweep(_small_cfg(), a, threads=1)
            cmd_steady_sweep(_small_cfg(), b, threads=2)
            with open(os.path.join(a, "sweep.csv")) as fa, open(os.path.join(b, "sweep.csv")) as fb:
                assert fa.read() == fb.read()

    def test_wigner_maps(self):
        cfg = _small_cfg(sweep={"wigner_maps": True, "drives": [0.5]})
        with tempfile.TemporaryDirectory() as tmpdir:
            cmd_steady_sweep(cfg, tmpdir)
            path = os.path.join(tmpdir, "wigner", wigner_map_name(0.5))
            assert os.path.exists(path)
            assert os.path.exists(path.replace(".csv", ".json"))
        assert wigner_map_name(0.5) == "wigner_E0000.5000.csv"

    def test_complex_drive_rejected(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            with pytest.raises(ConfigError, match="drive_im"):
                cmd_steady_sweep(_small_cfg(system={"drive_im": 0.5}), tmpdir)

    def test_linear_cavity_rejected(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            with pytest.raises(ConfigError, match="system.chi2"):
                cmd_steady_sweep(_small_cfg(system={"chi2": 0.0}), tmpdir)
            assert not os.path.exists(os.path.join(tmpdir, "manifest.json"))

    def test_domain_error_is_recorded_as_config_error(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            with patch("kerrsim.commands.steady_sweep",
                       side_effect=ValueError("drive outside the closed form's domain")):
                with pytest.raises(ConfigError, match="closed form"):
                    cmd_steady_sweep(_small_cfg(), tmpdir)
            manifest = read_manifest(tmpdir)
        assert "closed form" in manifest.convergence["error"]
        assert manifest.files == []


class TestEvolve:
    def test_trajectory_frames_and_manifest(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            cmd_evolve(_small_cfg(), tmpdir)
            rows = _lines(os.path.join(tmpdir, "trajectory.csv"))
            frames = sorted(os.listdir(os.path.join(tmpdir, "frames")))
            manifest = read_manifest(tmpdir)
        assert len(rows) == 7
        assert rows[1][0] == "tebd"
        assert frames == sorted([
            frame_name(0.02), frame_name(0.02).replace(".csv", ".json"),
            frame_name(0.05), frame_name(0.05).replace(".csv", ".json"),
        ])
        assert manifest.convergence["s0"]["frames"] == 2
        assert manifest.convergence["s0"]["frames_cover_support"] is True
        assert "trajectory.csv" in manifest.files

    def test_output_is_deterministic(self):
        with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
            cmd_evolve(_small_cfg(), a)
            cmd_evolve(_small_cfg(), b)
            for name in ("trajectory.csv", os.path.join("frames", frame_name(0.05))):
                with open(os.path.join(a, name)) as fa, open(os.path.join(b, name)) as fb:
                    assert fa.read() == fb.read()

    def test_one_file_per_initial_state(self):
        cfg = _small_cfg()
        cfg["initial_states"] = [
            {"amplitude": 0.0, "phase_pi": 0.0},
            {"amplitude": 0.3, "phase_pi": 0.5},
        ]
        with tempfile.TemporaryDirectory() as tmpdir:
            cmd_evolve(cfg, tmpdir)
            names = set(os.listdir(tmpdir))
        assert {"trajectory_s0.csv", "trajectory_s1.csv", "frames_s0", "frames_s1"} <= names

    def test_lindblad_method(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            cmd_evolve(_small_cfg(), tmpdir, method="lindblad")
            rows = _lines(os.path.join(tmpdir, "trajectory.csv"))
            manifest = read_manifest(tmpdir)
        assert len(rows) == 7
        assert rows[1][0] == "lindblad"
        assert manifest.convergence["method"] == "lindblad"

    def test_checkpoint_holds_final_chain_state(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            cmd_evolve(_small_cfg(), tmpdir, checkpoint=True)
            rows = _lines(os.path.join(tmpdir, "trajectory.csv"))
            state = load_checkpoint(os.path.join(tmpdir, "checkpoint.kmps"))
            manifest = read_manifest(tmpdir)
        assert "checkpoint.kmps" in manifest.files
        assert (state.n_sites, state.local_dim) == (4, 4)
        n_final = photon_number(reduced_density_matrix(state, 0))
        assert n_final == pytest.approx(float(rows[-1][4]), abs=1e-10)
        assert state.trunc_error_accum == pytest.approx(manifest.trunc_error["s0"])

    def test_checkpoint_ignored_for_master_equation(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            cmd_evolve(_small_cfg(), tmpdir, method="lindblad", checkpoint=True)
            assert not os.path.exists(os.path.join(tmpdir, "checkpoint.kmps"))

    def test_unwritable_output_marks_manifest_partial(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            with patch("kerrsim.commands.write_frames", side_effect=OutputError("disk full")):
                with pytest.raises(OutputError):
                    cmd_evolve(_small_cfg(), tmpdir)
            manifest = read_manifest(tmpdir)
        assert manifest.partial is True
        assert manifest.files == ["trajectory.csv"]


class TestCompare:
    def test_linear_cavity_passes(self):
        cfg = _small_cfg(system={"chi2": 0.0})
        with tempfile.TemporaryDirectory() as tmpdir:
            cmd_compare(cfg, tmpdir)
            with open(os.path.join(tmpdir, "report.json")) as f:
                report = json.load(f)
            assert os.path.exists(os.path.join(tmpdir, "report.md"))
            manifest = read_manifest(tmpdir)
        assert report["passed"] is True
        assert manifest.convergence["tebd"] == "ok"
        assert "error" not in manifest.convergence

    def test_zero_tolerance_raises_after_writing(self):
        cfg = _small_cfg(
            system={"chi2": 0.0},
            compare={"tol_field": 0.0, "tol_n": 0.0, "tol_g2": 0.0, "tol_nongauss": 0.0},
        )
        with tempfile.TemporaryDirectory() as tmpdir:
            with pytest.raises(ToleranceFailure):
                cmd_compare(cfg, tmpdir)
            with open(os.path.join(tmpdir, "report.json")) as f:
                assert json.load(f)["passed"] is False
            manifest = read_manifest(tmpdir)
        assert "error" not in manifest.convergence


class TestMain:
    def _exit_code(self, argv):
        from main import main
        with pytest.raises(SystemExit) as exc:
            main(argv)
        return exc.value.code

    def test_success(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = _write_cfg(tmpdir, _small_cfg(system={"chi2": 0.0}))
            out = os.path.join(tmpdir, "out")
            code = self._exit_code(["compare", "--config", path, "--out", out, "--threads", "1"])
            assert code == 0
            assert os.path.exists(os.path.join(out, "manifest.json"))

    def test_config_error_exits_2(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = _write_cfg(tmpdir, {"simulation": {"n_sites": 1}})
            assert self._exit_code(["chain-info", "--config", path]) == 2

    def test_sweep_without_nonlinearity_exits_2(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = _write_cfg(tmpdir, _small_cfg(system={"chi2": 0.0}))
            out = os.path.join(tmpdir, "out")
            assert self._exit_code(["steady-sweep", "--config", path, "--out", out,
                                    "--threads", "1"]) == 2
            assert not os.path.exists(os.path.join(out, "manifest.json"))

    def test_numerical_failure_exits_3(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            cfg = _small_cfg()
            cfg["initial_states"] = [{"amplitude": 3.0, "phase_pi": 0.0}]
            path = _write_cfg(tmpdir, cfg)
            out = os.path.join(tmpdir, "out")
            assert self._exit_code(["evolve", "--config", path, "--out", out,
                                    "--threads", "1"]) == 3
            assert "error" in read_manifest(out).convergence

    def test_tolerance_failure_exits_4(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            cfg = _small_cfg(system={"chi2": 0.0}, compare={"tol_field": 0.0})
            path = _write_cfg(tmpdir, cfg)
            out = os.path.join(tmpdir, "out")
            assert self._exit_code(["compare", "--config", path, "--out", out,
                                    "--threads", "1"]) == 4

    def test_rerun_from_manifest(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            cfg = _small_cfg(system={"chi2": 0.0})
            first = os.path.join(tmpdir, "first")
            cmd_compare(cfg, first)
            assert load_config(os.path.join(first, "manifest.json")) == cfg

    def test_init_config_refuses_overwrite(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "run.json")
            assert self._exit_code(["init-config", path]) == 0
            assert self._exit_code(["init-config", path]) == 1
            assert self._exit_code(["init-config", path, "--force"]) == 0

    def test_rejects_zero_threads(self):
        assert self._exit_code(["compare", "--threads", "0"]) == 2
