"""INI experiment configs: round trips, defaults, rejection paths."""

import dataclasses

import pytest

from slicekit.config import DATASETS, ExperimentConfig
from slicekit.errors import ConfigError


def test_defaults():
    cfg = ExperimentConfig()
    assert cfg.dataset == "spirals"
    assert cfg.rates == (0.25, 0.5, 0.75, 1.0)
    assert cfg.scheme == "R-weighted-3"
    assert cfg.epochs == 40


def test_ini_round_trip_is_a_fixpoint():
    cfg = ExperimentConfig(
        name="sweep-a", seed=17, dataset="tinyimages", n_per_class=32,
        noise=0.2, width=16, groups=8, depth=3, dropout=0.1, epochs=12,
        batch_size=32, learning_rate=0.05, momentum=0.85, weight_decay=1e-4,
        lr_milestones=(0.4, 0.8), lr_decay=0.2, rates=(0.5, 1.0),
        scheme="R-min-max", average_over_rates=True, seq_len=16,
    )
    text = cfg.to_ini()
    assert ExperimentConfig.from_ini(text) == cfg
    # and the text itself is stable under a second pass
    assert ExperimentConfig.from_ini(text).to_ini() == text


def test_ini_sections_present():
    text = ExperimentConfig().to_ini()
    for section in ("[experiment]", "[data]", "[model]", "[training]"):
        assert section in text


def test_partial_ini_fills_defaults():
    cfg = ExperimentConfig.from_ini("[data]\ndataset = chartext\n")
    assert cfg.dataset == "chartext"
    assert cfg.width == 64            # untouched default
    assert cfg.rates == (0.25, 0.5, 0.75, 1.0)


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        ExperimentConfig.from_ini("[model]\nwidht = 64\n")


def test_unknown_dataset_rejected():
    with pytest.raises(ConfigError, match="unknown dataset"):
        ExperimentConfig.from_ini("[data]\ndataset = cifar\n")
    assert DATASETS == ("spirals", "tinyimages", "chartext")


def test_type_errors_are_config_errors():
    with pytest.raises(ConfigError, match="cannot parse"):
        ExperimentConfig.from_ini("[model]\nwidth = many\n")
    with pytest.raises(ConfigError, match="cannot parse"):
        ExperimentConfig.from_ini("[training]\nlearning_rate = fast\n")
    with pytest.raises(ConfigError, match="cannot parse"):
        ExperimentConfig.from_ini("[training]\naverage_over_rates = maybe\n")
    with pytest.raises(ConfigError, match="cannot parse"):
        ExperimentConfig.from_ini("[training]\nrates = 0.5, x\n")
    with pytest.raises(ConfigError, match="bad config"):
        ExperimentConfig.from_ini("not ini at all [")


def test_bool_spellings():
    for raw, value in [("true", True), ("1", True), ("yes", True),
                       ("false", False), ("0", False), ("off", False)]:
        cfg = ExperimentConfig.from_ini(f"[training]\naverage_over_rates = {raw}\n")
        assert cfg.average_over_rates is value


def test_save_load_file(tmp_path):
    cfg = ExperimentConfig(name="disk", seed=4, epochs=7)
    p = tmp_path / "exp.ini"
    cfg.save(p)
    assert ExperimentConfig.load(p) == cfg
    with pytest.raises(ConfigError, match="cannot read"):
        ExperimentConfig.load(tmp_path / "missing.ini")


def test_every_field_survives_the_round_trip():
    # catches a field added to the dataclass but forgotten in _SECTIONS
    cfg = ExperimentConfig()
    restored = ExperimentConfig.from_ini(cfg.to_ini())
    for f in dataclasses.fields(ExperimentConfig):
        assert getattr(restored, f.name) == getattr(cfg, f.name), f.name


def test_train_config_mapping():
    cfg = ExperimentConfig(epochs=9, batch_size=24, learning_rate=0.3,
                           momentum=0.8, weight_decay=0.01, seed=6,
                           scheme="R-uniform-2", rates=(0.25, 1.0),
                           lr_milestones=(0.5,), lr_decay=0.5,
                           average_over_rates=True)
    tc = cfg.train_config()
    assert tc.epochs == 9 and tc.batch_size == 24
    assert tc.learning_rate == 0.3 and tc.momentum == 0.8
    assert tc.weight_decay == 0.01 and tc.seed == 6
    assert tc.scheme == "R-uniform-2" and tc.rates == (0.25, 1.0)
    assert tc.lr_milestones == (0.5,) and tc.lr_decay == 0.5
    assert tc.average_over_rates is True
