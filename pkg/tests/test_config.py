#!/usr/bin/env python3
"""
Tests for run configuration files and settings
"""

import pytest
from dotenv import load_dotenv

from experiments.config import (
    ExperimentConfig,
    RunSettings,
    SolverSettings,
    TimeRule,
    build_settings,
    load_config_file,
    parse_config_text,
    trace_times,
)
from models.errors import ConfigError, InvalidArgumentError
from models.types import ScaleParams


load_dotenv()


class TestConfigFiles:
    """Test suite for flat key = value files"""

    def test_parse(self):
        """Comments, blanks, lists and booleans"""
        text = """
        # desk run
        seed = 7
        n_list = 64, 256 ,1024
        keep_replicas = yes   # store replica values
        """
        values = parse_config_text(text)
        assert values == {"seed": "7", "n_list": ["64", "256", "1024"], "keep_replicas": True}

    def test_unknown_key_is_named(self):
        """Unknown keys raise ConfigError carrying the key"""
        with pytest.raises(ConfigError) as info:
            parse_config_text("replica = 3")
        assert info.value.key == "replica"

    def test_malformed_line(self):
        """Lines without '=' are rejected"""
        with pytest.raises(ConfigError):
            parse_config_text("seed 7")

    def test_missing_file(self, tmp_path):
        """An unreadable file is a configuration error; no path means no values"""
        with pytest.raises(ConfigError):
            load_config_file(str(tmp_path / "absent.conf"))
        assert load_config_file(None) == {}

    def test_file_round_trip(self, tmp_path):
        """Values from a file reach the settings"""
        path = tmp_path / "run.conf"
        path.write_text("replicas = 12\nmass_tol = 1e-9\n")
        settings = build_settings(load_config_file(str(path)), {})
        assert settings.replicas == 12
        assert settings.solver_settings().mass_tol == 1e-9


class TestRunSettings:
    """Test suite for merged and validated settings"""

    def test_overrides_win(self):
        """Command-line values replace file values; None means not given"""
        settings = build_settings({"seed": "1", "replicas": "8"}, {"seed": 5, "replicas": None})
        assert settings.seed == 5
        assert settings.replicas == 8

    def test_invalid_value_names_key(self):
        """Validation errors become ConfigError with the offending key"""
        with pytest.raises(ConfigError) as info:
            build_settings({"replicas": "1"}, {})
        assert info.value.key == "replicas"
        with pytest.raises(ConfigError) as info:
            build_settings({}, {"n_list": [256, 64]})
        assert info.value.key == "n_list"
        with pytest.raises(ConfigError):
            build_settings({"solver_method": "sinkhorn"}, {})

    def test_kernel_settings_from_env(self, monkeypatch):
        """MATCHLAB_* kernel variables sit below file values and flags"""
        monkeypatch.setenv("MATCHLAB_MAX_MODES", "2048")
        monkeypatch.setenv("MATCHLAB_TARGET_ACCURACY", "1e-9")
        settings = build_settings({"target_accuracy": "1e-11"}, {})
        assert settings.max_modes == 2048
        assert settings.target_accuracy == 1e-11
        monkeypatch.setenv("MATCHLAB_MAX_MODES", "lots")
        with pytest.raises(ConfigError):
            build_settings({}, {})

    def test_trace_times(self):
        """t = 4^-k over the configured k range"""
        settings = RunSettings(trace_k_min=3, trace_k_max=5)
        assert trace_times(settings) == [4.0**-3, 4.0**-4, 4.0**-5]
        with pytest.raises(ValueError):
            RunSettings(trace_k_min=5, trace_k_max=5)

    def test_echo(self):
        """The echoed config is JSON friendly"""
        echo = RunSettings(n_list=(64, 128)).echo()
        assert echo["n_list"] == [64, 128]
        assert echo["seed"] == 20240917


class TestExperimentConfig:
    """Test suite for per-estimator sweeps"""

    def test_time_rules(self):
        """Heat times follow the rule for each n"""
        exp = ExperimentConfig(quantity="quasi_orth", n_list=(256, 1024), t_rule=TimeRule.T_N)
        assert exp.time_for(256) == pytest.approx(ScaleParams.for_n(256).t_n)
        scaled = ExperimentConfig(
            quantity="x", n_list=(256,), t_rule=TimeRule.SCALED_T_N, t_value=2.0
        )
        assert scaled.time_for(256) == pytest.approx(2.0 * ScaleParams.for_n(256).t_n)
        assert ExperimentConfig(quantity="cost", n_list=(64,)).time_for(64) is None

    def test_time_floor(self):
        """Fixed times below 1/n are rejected"""
        with pytest.raises(ValueError):
            ExperimentConfig(quantity="x", n_list=(64, 1024), t_rule=TimeRule.FIXED, t_value=1e-3)
        with pytest.raises(ValueError):
            ExperimentConfig(quantity="x", n_list=(64,), t_rule=TimeRule.FIXED)

    def test_grid_defaults(self):
        """Explicit grid_m wins over 16 sqrt(n)"""
        exp = ExperimentConfig(quantity="cost", n_list=(64,))
        assert exp.grid_for(64) == 128
        assert ExperimentConfig(quantity="cost", n_list=(64,), grid_m=32).grid_for(64) == 32

    def test_settings_build_experiments(self):
        """Run settings fill in subcommand defaults; bad sweeps raise InvalidArgumentError"""
        settings = RunSettings(replicas=4)
        exp = settings.experiment("cost", (64, 128), 32)
        assert exp.replicas == 4 and exp.n_list == (64, 128)
        with pytest.raises(InvalidArgumentError):
            settings.experiment("x", (64,), 4, TimeRule.FIXED, 1e-4)

    def test_solver_method(self):
        """Only the two ascent methods are accepted"""
        assert SolverSettings(method="diagonal").method == "diagonal"
        with pytest.raises(ValueError):
            SolverSettings(method="sinkhorn")
