"""Run configuration: INI-style sections, CLI overrides and manifest echo."""
from __future__ import annotations

import configparser
import json
import os
from dataclasses import asdict, dataclass, field, fields

from .gnn import EncoderConfig
from .graph_builder import FeatureConfig, SchemaConfig
from .kge import KgeTrainConfig
from .link_prediction import TrainConfig

SEED_ENV = "RDF2REC_SEED"


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ValueError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


@dataclass
class ScenarioConfig:
    name: str = "paper"
    setting: str = "full"
    target: str = ""  # "Src,relation,Dst"; empty picks the largest forward edge type

    def target_key(self) -> tuple[str, str, str] | None:
        if not self.target:
            return None
        parts = [p.strip() for p in self.target.split(",")]
        if len(parts) != 3 or not all(parts):
            raise ValueError(f"target must be 'Src,relation,Dst', got {self.target!r}")
        return tuple(parts)


@dataclass
class SweepAxes:
    encoders: str = "sage,gat,hgt"
    strategies: str = "all"
    settings: str = "full"
    seeds: int = 1

    def encoder_list(self) -> list[str]:
        return _split(self.encoders)

    def strategy_list(self) -> list[str]:
        from .features import STRATEGIES
        return list(STRATEGIES) if self.strategies.strip() == "all" else _split(self.strategies)

    def setting_list(self) -> list[str]:
        return _split(self.settings)


def _split(text: str) -> list[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


SECTIONS = {
    "schema": SchemaConfig,
    "features": FeatureConfig,
    "kge": KgeTrainConfig,
    "encoder": EncoderConfig,
    "train": TrainConfig,
    "scenario": ScenarioConfig,
    "sweep": SweepAxes,
}


@dataclass
class RunConfig:
    schema: SchemaConfig = field(default_factory=SchemaConfig)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    kge: KgeTrainConfig = field(default_factory=KgeTrainConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    sweep: SweepAxes = field(default_factory=SweepAxes)
    seed: int = field(default_factory=default_seed)

    def to_dict(self) -> dict:
        return asdict(self)

    def set(self, section: str, key: str, raw) -> None:
        """Assign ``section.key`` from a string (or typed value), re-validating the section."""
        if section not in SECTIONS:
            raise KeyError(f"unknown config section [{section}]")
        cls = SECTIONS[section]
        current = getattr(self, section)
        names = {f.name: f for f in fields(cls)}
        key = key.replace("-", "_")
        if key not in names:
            raise KeyError(f"unknown key {key!r} in [{section}]")
        values = asdict(current)
        values[key] = _coerce(values[key], raw, f"{section}.{key}")
        setattr(self, section, cls(**values))


def _coerce(current, raw, where: str):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    try:
        if isinstance(current, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(current, int):
            return int(text)
        if isinstance(current, float):
            return float(text)
        if isinstance(current, list):
            return _split(text)
        if isinstance(current, dict):
            out = {}
            for item in _split(text):
                k, _, v = item.partition("=")
                if not v:
                    raise ValueError(item)
                out[k.strip()] = v.strip()
            return out
    except ValueError:
        raise ValueError(f"cannot parse {where} = {raw!r}") from None
    return text


def load_config(path=None, overrides: dict[str, object] | None = None) -> RunConfig:
    """Defaults, then the config file, then ``section.key`` overrides."""
    cfg = RunConfig()
    if path is not None and str(path).endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        data = data.get("run_config", data)
        for section in SECTIONS:
            for key, value in data.get(section, {}).items():
                cfg.set(section, key, value)
        cfg.seed = int(data.get("seed", cfg.seed))
    elif path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
        for section in parser.sections():
            for key, value in parser.items(section):
                if section == "run" and key == "seed":
                    cfg.seed = int(value)
                else:
                    cfg.set(section, key, value)
    for dotted, value in (overrides or {}).items():
        if dotted == "seed":
            cfg.seed = int(value)
            continue
        section, _, key = dotted.partition(".")
        cfg.set(section, key, value)
    return cfg


def dump_config(cfg: RunConfig) -> str:
    """INI text that ``load_config`` reads back to an equal config."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser["run"] = {"seed": str(cfg.seed)}
    for section in SECTIONS:
        values = {}
        for k, v in asdict(getattr(cfg, section)).items():
            if isinstance(v, list):
                v = ",".join(v)
            elif isinstance(v, dict):
                v = ",".join(f"{a}={b}" for a, b in v.items())
            values[k] = str(v)
        parser[section] = values
    from io import StringIO
    buf = StringIO()
    parser.write(buf)
    return buf.getvalue()
