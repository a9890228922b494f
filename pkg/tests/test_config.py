"""Tests for kerrsim.config module."""
import copy
import json
import os
import tempfile
from io import StringIO

import pytest
from rich.console import Console

from kerrsim.config import (
    DEFAULT_CONFIG,
    config_hash,
    grid_spec,
    initial_states,
    lindblad_config,
    load_config,
    print_config,
    simulation_config,
    system_params,
    validate_config,
    write_default_config,
)
from kerrsim.errors import ConfigError, OutputError


def _write(tmpdir, payload, name="run.json"):
    path = os.path.join(tmpdir, name)
    with open(path, "w") as f:
        if isinstance(payload, str):
            f.write(payload)
        else:
            json.dump(payload, f)
    return path


def _problems(**overrides):
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    for section, values in overrides.items():
        if isinstance(values, dict) and isinstance(cfg.get(section), dict):
            cfg[section].update(values)
        else:
            cfg[section] = values
    return validate_config(cfg)


class TestLoadConfig:
    def test_defaults_without_file(self):
        assert load_config() == DEFAULT_CONFIG

    def test_merges_partial_file(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = _write(tmpdir, {"system": {"drive_re": 8.0}})
            cfg = load_config(path)
        assert cfg["system"]["drive_re"] == 8.0
        assert cfg["system"]["delta"] == DEFAULT_CONFIG["system"]["delta"]
        assert cfg["simulation"] == DEFAULT_CONFIG["simulation"]

    def test_lists_replace_defaults(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = _write(tmpdir, {"sweep": {"drives": [2.0]}})
            assert load_config(path)["sweep"]["drives"] == [2.0]

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="cannot read"):
            load_config("/nonexistent/run.json")

    def test_invalid_json(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = _write(tmpdir, "{not json")
            with pytest.raises(ConfigError, match="not valid JSON"):
                load_config(path)

    def test_top_level_must_be_object(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = _write(tmpdir, [1, 2])
            with pytest.raises(ConfigError):
                load_config(path)

    def test_every_problem_is_reported(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = _write(tmpdir, {"system": {"dleta": 1.0}, "simulation": {"n_sites": "ten"}})
            with pytest.raises(ConfigError) as exc:
                load_config(path)
        problems = exc.value.problems
        assert any("system.dleta: unknown key" in p for p in problems)
        assert any("simulation.n_sites: expected an integer" in p for p in problems)

    def test_manifest_reruns_its_config(self):
        recorded = copy.deepcopy(DEFAULT_CONFIG)
        recorded["system"]["drive_re"] = 10.0
        with tempfile.TemporaryDirectory() as tmpdir:
            path = _write(tmpdir, {"command": "compare", "config_hash": "abc", "config": recorded},
                          name="manifest.json")
            assert load_config(path) == recorded


class TestValidateConfig:
    def test_defaults_are_valid(self):
        assert validate_config(DEFAULT_CONFIG) == []

    def test_not_an_object(self):
        assert validate_config([]) == ["config must be a JSON object"]

    def test_schema_version(self):
        problems = _problems(schema_version=2)
        assert any("schema_version" in p for p in problems)

    def test_bool_is_not_an_integer(self):
        problems = _problems(simulation={"bond_dim": True})
        assert any("simulation.bond_dim" in p for p in problems)

    def test_integers_accepted_for_floats(self):
        assert _problems(system={"delta": -12}) == []

    def test_domain_errors_are_collected(self):
        problems = _problems(system={"gamma": -1.0}, simulation={"n_sites": 1, "local_dim": 1})
        assert any(p.startswith("system: gamma") for p in problems)
        assert any(p.startswith("simulation: n_sites") for p in problems)
        assert any(p.startswith("simulation: local_dim") for p in problems)

    def test_empty_drive_list(self):
        problems = _problems(sweep={"drives": []})
        assert "sweep.drives: must not be empty" in problems

    def test_negative_drive(self):
        problems = _problems(sweep={"drives": [1.0, -2.0]})
        assert any("sweep.drives[1]" in p for p in problems)

    def test_empty_initial_states(self):
        assert "initial_states: must not be empty" in _problems(initial_states=[])

    def test_initial_state_keys(self):
        problems = _problems(initial_states=[{"amplitude": 1.0}])
        assert any("initial_states[0].phase_pi: missing" in p for p in problems)

    def test_negative_tolerance(self):
        problems = _problems(compare={"tol_n": -0.1})
        assert any("compare.tol_n" in p for p in problems)

    def test_frame_time_off_the_step_grid(self):
        problems = _problems(wigner={"times": [0.015]})
        assert any("does not fall on a snapshot" in p for p in problems)

    def test_frame_time_off_the_stride(self):
        problems = _problems(simulation={"snapshot_stride": 10}, wigner={"times": [0.2, 0.05]})
        assert len(problems) == 1
        assert "wigner.times[1]" in problems[0]

    def test_frame_time_beyond_run(self):
        problems = _problems(wigner={"times": [5.0]})
        assert any("beyond simulation.t_total" in p for p in problems)

    def test_final_time_is_always_a_snapshot(self):
        assert _problems(simulation={"snapshot_stride": 7}, wigner={"times": [2.0]}) == []

    def test_sweep_needs_nonlinearity(self):
        cfg = copy.deepcopy(DEFAULT_CONFIG)
        cfg["system"]["chi2"] = 0.0
        assert validate_config(cfg) == []
        problems = validate_config(cfg, "steady-sweep")
        assert len(problems) == 1
        assert problems[0].startswith("system.chi2")
        assert validate_config(cfg, "compare") == []

    def test_load_config_applies_command_checks(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = _write(tmpdir, {"system": {"chi2": 0.0}})
            assert load_config(path, "evolve")["system"]["chi2"] == 0.0
            with pytest.raises(ConfigError, match="system.chi2"):
                load_config(path, "steady-sweep")


class TestWriteDefaultConfig:
    def test_round_trip(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_default_config(os.path.join(tmpdir, "sub", "run.json"))
            assert load_config(path) == DEFAULT_CONFIG

    def test_refuses_to_overwrite(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = _write(tmpdir, {})
            with pytest.raises(OutputError, match="--force"):
                write_default_config(path)
            write_default_config(path, force=True)
            with open(path) as f:
                assert json.load(f) == DEFAULT_CONFIG


class TestConfigHash:
    def test_independent_of_key_order(self):
        reordered = dict(reversed(list(DEFAULT_CONFIG.items())))
        assert config_hash(reordered) == config_hash(DEFAULT_CONFIG)

    def test_changes_with_values(self):
        changed = copy.deepcopy(DEFAULT_CONFIG)
        changed["system"]["chi2"] = 1.0
        assert config_hash(changed) != config_hash(DEFAULT_CONFIG)


class TestBuilders:
    def test_system_params(self):
        params = system_params(DEFAULT_CONFIG)
        assert params.drive == 1 + 0j
        assert params.gamma == 6.28

    def test_simulation_config(self):
        sim = simulation_config(DEFAULT_CONFIG)
        assert (sim.n_sites, sim.local_dim, sim.bond_dim) == (61, 20, 36)

    def test_initial_states_use_units_of_pi(self):
        cfg = copy.deepcopy(DEFAULT_CONFIG)
        cfg["initial_states"] = [{"amplitude": 1.5, "phase_pi": 0.5}]
        (state,) = initial_states(cfg)
        assert state.alpha == pytest.approx(1.5j)

    def test_grid_and_lindblad(self):
        assert grid_spec(DEFAULT_CONFIG).nx == 81
        assert lindblad_config(DEFAULT_CONFIG).dim == 30


class TestPrintConfig:
    def test_highlights_changed_values(self):
        cfg = copy.deepcopy(DEFAULT_CONFIG)
        cfg["system"]["drive_re"] = 20.0
        buf = StringIO()
        import kerrsim.display as display_mod
        original = display_mod.console
        display_mod.console = Console(file=buf, force_terminal=False, width=140)
        try:
            print_config(cfg, source="run.json")
        finally:
            display_mod.console = original
        output = buf.getvalue()
        assert "system.drive_re" in output
        assert "20.0" in output
        assert "run.json" in output
        assert "config hash" in output
