from __future__ import annotations

import json

import pytest

from core.config import (
    ConfigError,
    ConfigManager,
    default_hyperparameters,
    table_lookup,
)
from core.constants import ARS_MINIBATCH, EXPERIMENT_ALGORITHMS


def write_config(tmp_path, payload) -> ConfigManager:
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return ConfigManager(path)


def test_defaults_resolve_every_algorithm_for_the_experiment():
    config = ConfigManager(None).resolve("linreg")
    assert config.algorithms == EXPERIMENT_ALGORITHMS["linreg"]
    assert config.seeds == tuple(range(10))
    assert config.settings["d"] == [10, 100, 1000]


def test_dashed_experiment_names_are_accepted():
    assert ConfigManager(None).resolve("oracle-check").experiment == "oracle_check"


def test_unknown_keys_report_their_full_path(tmp_path):
    with pytest.raises(ConfigError, match="Unknown configuration key: lqr.horizon"):
        write_config(tmp_path, {"lqr": {"horizon": 3}})
    with pytest.raises(ConfigError, match="Unknown configuration key: colour"):
        write_config(tmp_path, {"colour": "red"})


def test_unknown_hyperparameter_is_rejected(tmp_path):
    manager = write_config(tmp_path, {"linreg": {"hyperparameters": {"reinforce": {"gamma": 0.9}}}})
    with pytest.raises(ConfigError, match="linreg.hyperparameters.reinforce.gamma"):
        manager.resolve("linreg")


def test_algorithm_must_belong_to_the_experiment():
    with pytest.raises(ConfigError, match="not valid for experiment regret"):
        ConfigManager(None).resolve("regret", {"algorithms": ["reinforce"]})
    with pytest.raises(ConfigError, match="Unknown algorithm"):
        ConfigManager(None).resolve("regret", {"algorithms": ["sgd2"]})


def test_seeds_must_be_distinct_and_non_negative():
    with pytest.raises(ConfigError):
        ConfigManager(None).resolve("norms", {"seeds": [1, 1]})
    with pytest.raises(ConfigError):
        ConfigManager(None).resolve("norms", {"seeds": [-1]})
    with pytest.raises(ConfigError):
        ConfigManager(None).resolve("norms", {"seeds": []})


def test_section_values_are_validated():
    with pytest.raises(ConfigError, match="linreg.budget"):
        ConfigManager(None).resolve("linreg", {"linreg": {"budget": -5}})
    with pytest.raises(ConfigError, match="lqr.H values"):
        ConfigManager(None).resolve("lqr", {"lqr": {"H": [0, 10]}})
    with pytest.raises(ConfigError, match="bandit_cls.K"):
        ConfigManager(None).resolve("bandit_cls", {"bandit_cls": {"K": 1}})
    with pytest.raises(ConfigError, match="tune.task"):
        ConfigManager(None).resolve("tune", {"tune": {"task": "bandit"}})


def test_file_experiment_must_match_the_command(tmp_path):
    manager = write_config(tmp_path, {"experiment": "lqr"})
    assert manager.provides("experiment")
    assert not manager.provides("output_dir")
    with pytest.raises(ConfigError, match="not linreg"):
        manager.resolve("linreg")


def test_invalid_files_raise_config_error(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        ConfigManager(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError, match="not valid JSON"):
        ConfigManager(bad)
    listing = tmp_path / "list.json"
    listing.write_text("[]", encoding="utf-8")
    with pytest.raises(ConfigError, match="JSON object"):
        ConfigManager(listing)


def test_overrides_take_precedence_over_the_file(tmp_path):
    manager = write_config(tmp_path, {"seeds": [3, 4], "linreg": {"budget": 500}})
    config = manager.resolve("linreg", {"seeds": [7], "linreg": {"eval_every": 50}})
    assert config.seeds == (7,)
    assert config.settings["budget"] == 500
    assert config.settings["eval_every"] == 50


def test_table_lookup_picks_the_nearest_lower_dimension():
    table = {10: {"lr": 1}, 100: {"lr": 2}}
    assert table_lookup(table, 99) == {"lr": 1}
    assert table_lookup(table, 100) == {"lr": 2}
    assert table_lookup(table, 5) == {"lr": 1}


def test_hyperparameter_defaults_and_overrides():
    assert default_hyperparameters("linreg", "reinforce", 100)["lr"] == 0.03
    assert default_hyperparameters("bandit_cls", "ars_v2t")["minibatch"] == ARS_MINIBATCH
    assert default_hyperparameters("regret", "ogd") == {}
    config = ConfigManager(None).resolve(
        "lqr", {"lqr": {"hyperparameters": {"ars_v1t": {"stepsize": 0.5}}}}
    )
    hyper = config.hyperparameters("ars_v1t")
    assert hyper["stepsize"] == 0.5
    assert hyper["n_directions"] == 20


def test_canonical_json_ignores_output_location_and_workers():
    first = ConfigManager(None).resolve("norms", {"output_dir": "a", "workers": 1})
    second = ConfigManager(None).resolve("norms", {"output_dir": "b", "workers": 8})
    third = ConfigManager(None).resolve("norms", {"master_seed": 1})
    assert first.canonical_json() == second.canonical_json()
    assert first.canonical_json() != third.canonical_json()


def test_saved_config_loads_back(tmp_path):
    config = ConfigManager(None).resolve("regret", {"seeds": [0, 1], "regret": {"T": [50]}})
    path = ConfigManager(None).save(config, tmp_path / "run" / "config.json")
    again = ConfigManager(path).resolve("regret")
    assert again == config
