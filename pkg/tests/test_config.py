"""Run configuration: schema validation, defaults, env overrides."""

import json

import pytest

from aquafarm.config import ConfigError, load_config, parse_config
from aquafarm.plant import Channel


class TestSchema:
    def test_empty_config_gets_full_defaults(self):
        cfg = parse_config({})
        assert cfg.seed == 0
        assert cfg.control.desired_water_level == 100.0
        assert cfg.control.lower_temperature_threshold == 25.0
        assert cfg.control.upper_temperature_threshold == 28.0
        assert cfg.control.lower_humidity_threshold == 40.0
        assert cfg.control.upper_humidity_threshold == 70.0
        assert cfg.control.motor_fill_rate == 5.0
        assert cfg.control.tick_interval_s == 60.0
        assert cfg.ml["forest"]["n_trees"] == 50
        assert cfg.service["port"] == 8080

    def test_unknown_top_level_key_rejected(self):
        with pytest.raises(ConfigError, match="plants"):
            parse_config({"plants": {}})

    def test_unknown_nested_key_rejected(self):
        with pytest.raises(ConfigError):
            parse_config({"control": {"desired_level": 90}})

    def test_invalid_threshold_order_rejected(self):
        with pytest.raises(ConfigError):
            parse_config({"control": {"lower_temperature_threshold": 29.0}})

    def test_negative_rate_rejected(self):
        with pytest.raises(ConfigError):
            parse_config({"plant": {"drain_rate_pct_per_min": -1.0}})

    def test_channel_maps_parse(self):
        cfg = parse_config({"sensors": {"noise_sigma": {"temp": 0.3}}})
        assert cfg.sensors.noise_sigma[Channel.TEMP] == 0.3
        assert cfg.sensors.noise_sigma[Channel.LEVEL] == 0.5  # untouched default

    def test_initial_state_section(self):
        cfg = parse_config({"plant": {"initial": {"water_temp_c": 35.0}}})
        assert cfg.initial is not None
        assert cfg.initial.water_temp_c == 35.0

    def test_seed_flows_into_plant_params(self):
        assert parse_config({"seed": 42}).plant.seed == 42


class TestEnvOverrides:
    def test_port_and_data_dir(self, monkeypatch):
        monkeypatch.setenv("AQF_PORT", "9100")
        monkeypatch.setenv("AQF_DATA_DIR", "/tmp/elsewhere")
        cfg = parse_config({"service": {"port": 8000, "data_dir": "data"}})
        assert cfg.service["port"] == 9100
        assert cfg.service["data_dir"] == "/tmp/elsewhere"

    def test_aqf_config_names_default_path(self, monkeypatch, tmp_path):
        path = tmp_path / "farm.json"
        path.write_text(json.dumps({"seed": 77}))
        monkeypatch.setenv("AQF_CONFIG", str(path))
        assert load_config(None).seed == 77

    def test_missing_file_is_config_error(self):
        with pytest.raises(ConfigError):
            load_config("/nonexistent/farm.json")

    def test_invalid_json_is_config_error(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError):
            load_config(path)
