"""Experiment configuration: a dataclass with INI round-trip.

The INI layout groups fields into [experiment], [data], [model], and
[training]; ``from_ini(to_ini(cfg))`` reproduces ``cfg`` exactly.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .training import TrainConfig

__all__ = ["ExperimentConfig", "DATASETS"]

DATASETS = ("spirals", "tinyimages", "chartext")

_SECTIONS = {
    "experiment": ("name", "seed"),
    "data": ("dataset", "n_per_class", "noise", "text_length", "period",
             "alphabet", "test_fraction"),
    "model": ("width", "groups", "depth", "dropout"),
    "training": ("epochs", "batch_size", "learning_rate", "momentum",
                 "weight_decay", "lr_milestones", "lr_decay", "rates",
                 "scheme", "average_over_rates", "seq_len"),
}


@dataclass
class ExperimentConfig:
    # [experiment]
    name: str = "exp"
    seed: int = 0
    # [data]
    dataset: str = "spirals"
    n_per_class: int = 256
    noise: float = 0.08
    text_length: int = 8192      # chartext only
    period: int = 8              # chartext only
    alphabet: str = "abcdefghij"
    test_fraction: float = 0.25
    # [model]
    width: int = 64
    groups: int = 4
    depth: int = 2
    dropout: float = 0.0
    # [training]
    epochs: int = 40
    batch_size: int = 64
    learning_rate: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 0.0
    lr_milestones: tuple[float, ...] = (0.5, 0.75)
    lr_decay: float = 0.1
    rates: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0)
    scheme: str = "R-weighted-3"
    average_over_rates: bool = False
    seq_len: int = 32            # chartext only

    def __post_init__(self):
        if self.dataset not in DATASETS:
            raise ConfigError(f"unknown dataset {self.dataset!r}; choices: {DATASETS}")
        self.rates = tuple(float(r) for r in self.rates)
        self.lr_milestones = tuple(float(m) for m in self.lr_milestones)

    # ---- INI serialization ------------------------------------------------
    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        for section, names in _SECTIONS.items():
            cp[section] = {}
            for n in names:
                cp[section][n] = _format(getattr(self, n))
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as e:
            raise ConfigError(f"bad config: {e}") from e
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for section, names in _SECTIONS.items():
            if not cp.has_section(section):
                continue
            for key in cp[section]:
                if key not in names:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                kwargs[key] = _parse(types[key], cp[section][key], key)
        return cls(**kwargs)

    def save(self, path) -> None:
        Path(path).write_text(self.to_ini())

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        return cls.from_ini(text)

    # ---- glue ---------------------------------------------------------------
    def train_config(self) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            momentum=self.momentum,
            weight_decay=self.weight_decay,
            lr_milestones=self.lr_milestones,
            lr_decay=self.lr_decay,
            seed=self.seed,
            scheme=self.scheme,
            rates=self.rates,
            average_over_rates=self.average_over_rates,
        )


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(repr(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(ftype: str, raw: str, key: str):
    raw = raw.strip()
    try:
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        if ftype == "bool":
            if raw.lower() in ("true", "1", "yes", "on"):
                return True
            if raw.lower() in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if ftype.startswith("tuple"):
            return tuple(float(v) for v in raw.split(",") if v.strip())
        return raw
    except ValueError:
        raise ConfigError(f"cannot parse {key} = {raw!r} as {ftype}") from None
