"""Tests for kerrsim.doctor module."""
import copy
import sys
from collections import namedtuple
from importlib import metadata
from unittest.mock import MagicMock, patch

from kerrsim.config import DEFAULT_CONFIG


def _cfg(**sections):
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    for name, values in sections.items():
        if isinstance(values, dict):
            cfg[name].update(values)
        else:
            cfg[name] = values
    return cfg


class TestCheckPython:
    def test_passes_on_3_10_plus(self):
        from kerrsim.doctor import _check_python
        ok, detail = _check_python(_cfg())
        assert ok is True  # tests run on 3.10+
        assert "." in detail

    def test_fails_on_older_version(self):
        from kerrsim.doctor import _check_python
        VI = namedtuple("version_info", ["major", "minor", "micro"])
        with patch.object(sys, "version_info", VI(3, 9, 0)):
            ok, detail = _check_python(_cfg())
            assert ok is False


class TestCheckPackages:
    def test_reports_versions(self):
        from kerrsim.doctor import _check_packages
        with patch("kerrsim.doctor.metadata.version", return_value="1.0"):
            ok, detail = _check_packages(_cfg())
        assert ok is True
        assert "mpmath 1.0" in detail

    def test_reports_missing(self):
        from kerrsim.doctor import _check_packages

        def version(name):
            if name == "mpmath":
                raise metadata.PackageNotFoundError(name)
            return "1.0"

        with patch("kerrsim.doctor.metadata.version", side_effect=version):
            ok, detail = _check_packages(_cfg())
        assert ok is False
        assert "mpmath" in detail


class TestCheckCores:
    def test_counts(self):
        from kerrsim.doctor import _check_cores
        with patch("kerrsim.doctor.psutil.cpu_count", side_effect=[8, 16]):
            ok, detail = _check_cores(_cfg())
        assert ok is True
        assert "8 physical / 16 logical" in detail

    def test_unknown_physical_count(self):
        from kerrsim.doctor import _check_cores
        with patch("kerrsim.doctor.psutil.cpu_count", return_value=None):
            ok, detail = _check_cores(_cfg())
        assert ok is False


class TestCheckRam:
    def test_enough_memory(self):
        from kerrsim.doctor import _check_ram
        mem = MagicMock(available=16 * 1024 ** 3)
        with patch("kerrsim.doctor.psutil.virtual_memory", return_value=mem):
            ok, detail = _check_ram(_cfg())
        assert ok is True
        assert "MB needed" in detail

    def test_too_little_memory(self):
        from kerrsim.doctor import _check_ram
        mem = MagicMock(available=1024)
        with patch("kerrsim.doctor.psutil.virtual_memory", return_value=mem):
            ok, _ = _check_ram(_cfg())
        assert ok is False


class TestPhysicsChecks:
    def test_truncation_ok_for_reference_states(self):
        from kerrsim.doctor import _check_truncation
        ok, _ = _check_truncation(_cfg())
        assert ok is True

    def test_truncation_flags_large_amplitude(self):
        from kerrsim.doctor import _check_truncation
        cfg = _cfg(initial_states=[{"amplitude": 4.0, "phase_pi": 0.0}])
        ok, detail = _check_truncation(cfg)
        assert ok is False
        assert "need" in detail

    def test_cutoff_ratio(self):
        from kerrsim.doctor import _check_cutoff
        assert _check_cutoff(_cfg())[0] is True
        assert _check_cutoff(_cfg(system={"cutoff": 10.0}))[0] is False


class TestRunDoctor:
    def test_all_checks_pass(self):
        from kerrsim.doctor import run_doctor
        with patch("kerrsim.doctor._CHECKS", [("One", lambda cfg: (True, "fine"))]), \
             patch("kerrsim.doctor.console"):
            assert run_doctor(_cfg()) is True

    def test_failing_check_is_a_warning(self):
        from kerrsim.doctor import run_doctor

        def broken(cfg):
            raise RuntimeError("no sensor")

        checks = [("One", lambda cfg: (True, "fine")), ("Two", broken)]
        with patch("kerrsim.doctor._CHECKS", checks), \
             patch("kerrsim.doctor.console"):
            assert run_doctor(_cfg()) is False
