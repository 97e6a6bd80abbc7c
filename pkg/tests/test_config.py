import json

import pytest

from aerharvest.config import ConfigError, config_from_dict, load_config, map_defaults
from aerharvest.learner import QNetwork


@pytest.mark.parametrize("name", ["manhattan32", "urban50", "tiny8"])
def test_bundled_configs_roundtrip(name):
    cfg = load_config(name)
    assert cfg.map == name
    assert config_from_dict(cfg.to_dict()) == cfg
    json.dumps(cfg.to_dict())


def test_manhattan_defaults():
    cfg = load_config("manhattan32")
    lp = cfg.learner
    assert (lp.capacity, lp.batch_size, lp.tau, lp.discount, lp.temperature) == (50000, 128, 0.005, 0.95, 0.1)
    assert (lp.local_size, lp.pool, lp.max_steps) == (17, 3, 3_000_000)
    assert QNetwork(cfg.network_spec(32)).num_parameters() == 1_175_302


def test_urban_defaults():
    cfg = load_config("urban50")
    assert cfg.learner.pool == 5 and cfg.learner.max_steps == 4_000_000
    assert cfg.scenario.flying_time == (100, 200)
    assert map_defaults("urban50").learner.pool == 5


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"mapp": "tiny8"})
    with pytest.raises(ConfigError):
        config_from_dict({"learner": {"lr": 0.1}})
    with pytest.raises(ConfigError):
        config_from_dict({"channel": {"power_ratio": 3.0}})
    with pytest.raises(ConfigError):
        config_from_dict({"learner": 5})


def test_even_local_size_rejected():
    with pytest.raises(ConfigError):
        config_from_dict({"learner": {"local_size": 16}})


def test_partial_override_keeps_defaults():
    cfg = config_from_dict({"map": "tiny8", "learner": {"batch_size": 4}})
    assert cfg.learner.batch_size == 4 and cfg.learner.capacity == map_defaults("tiny8").learner.capacity


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "nope.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(ConfigError):
        load_config(bad)
