#!/usr/bin/env python3
"""
Test suite for run configuration management.
"""
import json
import tempfile
from pathlib import Path

import pytest

from smalldet.config import FIELD_NAMES, ConfigManager, RunConfig
from smalldet.errors import ConfigError, UsageError


@pytest.mark.integration
class TestConfigManager:
    """Test ConfigManager functionality."""

    def test_no_config_file(self):
        """Test that defaults apply when no file is given."""
        manager = ConfigManager()
        assert manager.load_config() == {}

        config = manager.build_run_config("bound-check")
        assert config.command == "bound-check"
        assert config.eps == [0.1]
        assert config.confidence == 0.99
        assert config.columns == 2

    def test_file_values_and_overrides(self):
        """Test that flags override file values."""
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "run.json"
            path.write_text(json.dumps({"n": 3, "trials": 500, "seed": 9}))

            manager = ConfigManager(path)
            config = manager.build_run_config("bound-check", {"trials": 1000, "seed": None})

            assert config.n == 3
            assert config.trials == 1000
            assert config.seed == 9

    def test_spec_as_mapping(self):
        """Test a covariance spec given as a JSON object."""
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "run.json"
            path.write_text(json.dumps({"spec": {"kind": "equicorrelated", "rho": 0.3}}))

            config = ConfigManager(path).build_run_config("d-values")
            spec = config.covariance()
            assert spec.kind == "equicorrelated"
            assert spec.rho == 0.3

    def test_unknown_key_rejected(self):
        """Test that an unknown key is named in the error."""
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "run.json"
            path.write_text(json.dumps({"n": 2, "colour": "blue"}))

            with pytest.raises(ConfigError, match="colour"):
                ConfigManager(path).load_config()

    def test_corrupted_config_file(self):
        """Test handling of a corrupted config file."""
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "run.json"
            path.write_text("{ invalid json }")

            with pytest.raises(ConfigError, match="invalid JSON"):
                ConfigManager(path).load_config()

    def test_non_object_config(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "run.json"
            path.write_text("[1, 2]")

            with pytest.raises(ConfigError, match="JSON object"):
                ConfigManager(path).load_config()

    def test_missing_config_file(self):
        with pytest.raises(ConfigError, match="cannot read"):
            ConfigManager("/nonexistent/smalldet/run.json").load_config()

    def test_config_cache(self):
        """Test that the file is read once."""
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "run.json"
            path.write_text(json.dumps({"n": 3}))
            manager = ConfigManager(path)

            first = manager.load_config()
            path.write_text(json.dumps({"n": 4}))
            assert manager.load_config() is first

    def test_save_and_load_config(self):
        """Test that a saved RunConfig loads back into the same run."""
        with tempfile.TemporaryDirectory() as temp_dir:
            path = Path(temp_dir) / "saved.json"
            manager = ConfigManager()
            original = manager.build_run_config(
                "bound-check", {"n": 3, "eps": [0.2, 0.05], "workers": 2}
            )
            manager.save_config(original.to_dict(), path)

            text = path.read_text()
            assert text.endswith("\n")
            assert list(json.loads(text)) == sorted(json.loads(text))

            reloaded = ConfigManager(path).build_run_config("bound-check")
            assert reloaded == original

    def test_save_rejects_unknown_keys(self):
        with tempfile.TemporaryDirectory() as temp_dir:
            with pytest.raises(ConfigError):
                ConfigManager().save_config({"bogus": 1}, Path(temp_dir) / "x.json")

    def test_wrongly_typed_value(self):
        with pytest.raises(ConfigError):
            ConfigManager().build_run_config("bound-check", {"trials": "many"})

    def test_scalar_eps_promoted_to_list(self):
        config = ConfigManager().build_run_config("product-law", {"eps": 0.5})
        assert config.eps == [0.5]


@pytest.mark.unit
class TestRunConfigValidation:
    """Test RunConfig.validate."""

    @pytest.mark.parametrize(
        "changes",
        [
            {"format": "xml"},
            {"variant": "diagonal"},
            {"convention": "bogus"},
            {"law_method": "bogus"},
            {"n": 0},
            {"m": 0},
            {"eps": []},
            {"eps": [0.1, -1.0]},
            {"trials": 0},
            {"workers": 0},
            {"seed": -1},
            {"confidence": 1.5},
            {"stabilize": 1, "n": 2},
            {"grid_step": 0.7},
            {"spec": "kind=nonsense"},
        ],
    )
    def test_invalid_values(self, changes):
        config = RunConfig(command="bound-check", **changes)
        with pytest.raises(UsageError):
            config.validate()

    def test_unknown_command(self):
        with pytest.raises(UsageError):
            RunConfig(command="frobnicate").validate()

    def test_grid_from_fields(self):
        config = RunConfig(command="product-law", grid_step=2.0 ** -5, u_min=-40.0, t_min=-40.0)
        grid = config.grid()
        assert grid.step == 2.0 ** -5
        assert (grid.u_min, grid.t_min) == (-40.0, -40.0)

    def test_field_names(self):
        assert "eps" in FIELD_NAMES
        assert "command" in FIELD_NAMES
