"""Search configuration and its INI-style file format.

Example file::

    [search]
    strategy = evolution
    space_depth = 2
    population = 50
    random_inject = 10
    elite = 5
    generations = 10
    fitness = loss_based
    master_seed = 0

    [train]
    epochs = 20

    [network]
    hidden_layers = 64, 64

    [data]
    kind = spirals

    [policy]
    epsilon = 1e-7

Every key is optional; omitted keys take the defaults below.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .data import Dataset, generate_synthetic, split_balanced
from .nn import NetworkConfig, TrainConfig
from .numerics import SafetyPolicy
from .errors import ConfigError
from .rng import derive_seed, make_rng

STRATEGIES = ("evolution", "random", "exhaustive")
FITNESS_MODES = ("loss_based", "accuracy_based")


@dataclass(frozen=True)
class DataSpec:
    kind: str = "spirals"
    n_per_class: int = 700
    classes: int = 3
    noise: float = 0.15
    radius: float = 3.0
    turns: float = 1.0
    val_per_class: int = 100
    test_per_class: int = 100
    seed: int = 0

    def build(self) -> Dataset:
        raw = generate_synthetic(self.kind, self.n_per_class, self.classes, self.noise,
                                 make_rng(derive_seed(self.seed, "points")),
                                 radius=self.radius, turns=self.turns)
        return split_balanced(raw, self.val_per_class, self.test_per_class,
                              make_rng(derive_seed(self.seed, "split")))


@dataclass(frozen=True)
class NetworkSpec:
    hidden_layers: tuple[int, ...] = (64, 64)
    batch_norm: bool = True

    def for_data(self, data: Dataset) -> NetworkConfig:
        return NetworkConfig(data.input_dim, data.num_classes, self.hidden_layers, self.batch_norm)


@dataclass(frozen=True)
class SearchConfig:
    strategy: str = "evolution"
    space_depth: int = 2
    population: int = 50
    random_inject: int = 10
    elite: int = 5
    offspring: int | None = None
    generations: int = 10
    fitness: str = "loss_based"
    master_seed: int = 0
    extended_alphabet: bool = False
    initial_exprs: tuple[str, ...] = ()
    train: TrainConfig = field(default_factory=TrainConfig)
    network: NetworkSpec = field(default_factory=NetworkSpec)
    data: DataSpec = field(default_factory=DataSpec)
    policy: SafetyPolicy = field(default_factory=SafetyPolicy)

    def __post_init__(self):
        if self.offspring is None:
            object.__setattr__(self, "offspring", self.population - self.elite - self.random_inject)
        object.__setattr__(self, "initial_exprs", tuple(self.initial_exprs))
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.fitness not in FITNESS_MODES:
            raise ConfigError(f"fitness must be one of {FITNESS_MODES}, got {self.fitness!r}")
        if self.space_depth < 1:
            raise ConfigError("space_depth must be >= 1")
        if self.population < 1 or self.generations < 1:
            raise ConfigError("population and generations must be >= 1")
        if min(self.elite, self.random_inject, self.offspring) < 0:
            raise ConfigError("elite, random_inject and offspring must be >= 0")
        if self.elite + self.random_inject + self.offspring != self.population:
            raise ConfigError(
                f"elite + random_inject + offspring = "
                f"{self.elite + self.random_inject + self.offspring} != population {self.population}")
        if len(self.initial_exprs) > self.population:
            raise ConfigError("more initial_exprs than population slots")

    def to_dict(self) -> dict[str, Any]:
        return {
            "search": {f.name: _plain(getattr(self, f.name)) for f in dataclasses.fields(self)
                       if f.name not in _SECTIONS},
            "train": self.train.to_dict(),
            "network": {k: _plain(v) for k, v in dataclasses.asdict(self.network).items()},
            "data": dataclasses.asdict(self.data),
            "policy": self.policy.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> SearchConfig:
        d = dict(d)
        search = dict(d.pop("search", {}))
        unknown = set(d) - set(_SECTIONS)
        if unknown:
            raise ConfigError(f"unknown section(s): {sorted(unknown)}")
        try:
            return cls(
                **search,
                train=TrainConfig(**d.get("train", {})),
                network=NetworkSpec(**{k: tuple(v) if k == "hidden_layers" else v
                                       for k, v in d.get("network", {}).items()}),
                data=DataSpec(**d.get("data", {})),
                policy=SafetyPolicy(**d.get("policy", {})),
            )
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def run_id(self) -> str:
        return f"{self.strategy}-{self.digest()[:12]}"

    def network_config(self, data: Dataset) -> NetworkConfig:
        return self.network.for_data(data)


_SECTIONS = {"train": TrainConfig, "network": NetworkSpec, "data": DataSpec, "policy": SafetyPolicy}


def _plain(v):
    if isinstance(v, tuple):
        return list(v)
    return v


# -- INI file ------------------------------------------------------------------

def _field_types(cls) -> dict[str, str]:
    return {f.name: str(f.type) for f in dataclasses.fields(cls)}


def _convert(section: str, key: str, raw: str, type_name: str):
    text = raw.strip()
    try:
        if "tuple[str" in type_name:
            return tuple(s.strip() for s in text.split(";") if s.strip())
        if "tuple[int" in type_name:
            if text.lower() in ("", "none") and "None" in type_name:
                return None
            return tuple(int(s) for s in text.replace(",", " ").split())
        if type_name.startswith("bool"):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if type_name.startswith("int"):
            if text.lower() == "none" and "None" in type_name:
                return None
            return int(text)
        if type_name.startswith("float"):
            return float(text)
        return text
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from exc


def parse_config_text(text: str, source: str = "<config>") -> SearchConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    schema = {"search": _field_types(SearchConfig)}
    schema.update({name: _field_types(cls) for name, cls in _SECTIONS.items()})
    for name in _SECTIONS:
        schema["search"].pop(name)
    out: dict[str, dict[str, Any]] = {}
    for section in parser.sections():
        if section not in schema:
            raise ConfigError(f"{source}: unknown section [{section}]")
        fields = schema[section]
        out[section] = {}
        for key, raw in parser.items(section):
            if key not in fields:
                raise ConfigError(f"{source}: [{section}] unknown field {key!r}")
            out[section][key] = _convert(section, key, raw, fields[key])
    try:
        return SearchConfig.from_dict(out)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load_config(path: str | Path) -> SearchConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {p}: {exc}") from exc
    return parse_config_text(text, str(p))


def dump_config_text(cfg: SearchConfig) -> str:
    """INI text that parses back to ``cfg``."""
    lines = []
    for section, values in cfg.to_dict().items():
        lines.append(f"[{section}]")
        for k, v in values.items():
            if isinstance(v, list):
                sep = "; " if k == "initial_exprs" else ", "
                v = sep.join(str(x) for x in v)
            elif v is None:
                v = "none"
            lines.append(f"{k} = {v}")
        lines.append("")
    return "\n".join(lines)
