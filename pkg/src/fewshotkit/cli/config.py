"""Run configuration: an INI file with one section per module.

Every key is typed by its default value; unknown sections or keys are errors.
"""
from __future__ import annotations

import configparser
import dataclasses
import io
import os
import re
from dataclasses import dataclass, field, fields

from ..backbone import PretrainConfig
from ..errors import ConfigError
from ..fewshot import METHODS, AdaptConfig

OUT_ENV = "FEWSHOTKIT_OUT"
_PROTOCOL_RE = re.compile(r"^(\d+)w(\d+)s(?:(\d+)q)?$")


@dataclass
class RunSection:
    seed: int = 0
    out_dir: str = ""
    workers: int = 1


@dataclass
class DataSection:
    path: str = ""
    n_classes: int = 100
    dim: int = 16
    samples_per_class: int = 60
    center_scale: float = 1.0
    noise_sigma: float = 1.0
    name: str = "synthetic"


@dataclass
class SplitSection:
    fractions: tuple = (0.6, 0.2, 0.2)
    pool: str = "train+val"


@dataclass
class PretrainSection:
    hidden: tuple = (64, 64)
    label_smoothing: float = 0.1
    mixup_alpha: float = 0.25
    mixup: bool = True
    batch_size: int = 128
    momentum: float = 0.9
    weight_decay: float = 1e-4
    cycles: tuple = (8, 16)
    end_lr: float = 1e-6
    augment_sigma: float = 0.0


@dataclass
class EvalSection:
    protocols: tuple = ("5w1s", "5w5s")
    query_shot: int = 15
    n_episodes: int = 200
    methods: tuple = METHODS


@dataclass
class HardnessSection:
    reference: str = ""
    mode: str = "logits"
    relu_before_norm: bool = True


@dataclass
class SweepSection:
    axis: str = "query_shot"
    values: tuple = (1, 5, 15, 30)
    way: int = 5
    shot: int = 1
    query_shot: int = 15
    n_episodes: int = 100
    methods: tuple = ("transductive",)


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    data: DataSection = field(default_factory=DataSection)
    split: SplitSection = field(default_factory=SplitSection)
    pretrain: PretrainSection = field(default_factory=PretrainSection)
    adapt: AdaptConfig = field(default_factory=AdaptConfig)
    eval: EvalSection = field(default_factory=EvalSection)
    hardness: HardnessSection = field(default_factory=HardnessSection)
    sweep: SweepSection = field(default_factory=SweepSection)

    def __post_init__(self):
        validate(self)

    @property
    def out_dir(self):
        return self.run.out_dir or os.environ.get(OUT_ENV, "runs/default")

    def pretrain_config(self, seed):
        kw = dataclasses.asdict(self.pretrain)
        return PretrainConfig(seed=seed, **kw)

    def protocols(self):
        """``(way, shot, query_shot)`` for every grid entry."""
        return [parse_protocol(p, self.eval.query_shot) for p in self.eval.protocols]

    def to_dict(self):
        return {f.name: dataclasses.asdict(getattr(self, f.name)) for f in fields(self)}


def parse_protocol(text, default_query):
    m = _PROTOCOL_RE.match(text.strip())
    if not m:
        raise ConfigError(f"bad protocol {text!r}; expected e.g. '5w1s' or '5w1s15q'")
    way, shot = int(m.group(1)), int(m.group(2))
    query = int(m.group(3)) if m.group(3) else default_query
    return way, shot, query


def validate(cfg):
    fr = cfg.split.fractions
    if len(fr) != 3 or abs(sum(fr) - 1.0) > 1e-9:
        raise ConfigError(f"split.fractions must be three numbers summing to 1, got {fr}")
    if cfg.split.pool not in ("train", "train+val"):
        raise ConfigError("split.pool must be 'train' or 'train+val'")
    for m in cfg.eval.methods + cfg.sweep.methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r}")
    if cfg.sweep.axis not in ("query_shot", "way", "shot"):
        raise ConfigError("sweep.axis must be query_shot, way or shot")
    if cfg.eval.n_episodes < 1 or cfg.sweep.n_episodes < 1:
        raise ConfigError("n_episodes must be >= 1")
    if cfg.run.workers < 1:
        raise ConfigError("run.workers must be >= 1")
    if cfg.hardness.mode not in ("logits", "features"):
        raise ConfigError("hardness.mode must be 'logits' or 'features'")
    for p in cfg.eval.protocols:
        parse_protocol(p, cfg.eval.query_shot)


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(text, default, where):
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            items = [t for t in (s.strip() for s in text.split(",")) if t]
            proto = default[0] if default else ""
            return tuple(_coerce(t, proto, where) for t in items)
        return text
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {text!r} as {type(default).__name__}") from None


def serialize(cfg: RunConfig) -> str:
    parser = configparser.ConfigParser(interpolation=None)
    for f in fields(cfg):
        section = getattr(cfg, f.name)
        parser[f.name] = {sf.name: _format(getattr(section, sf.name)) for sf in fields(section)}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def parse(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    known = {f.name: f for f in fields(RunConfig)}
    sections = {}
    for name in parser.sections():
        if name not in known:
            raise ConfigError(f"unknown config section [{name}]")
        cls = known[name].default_factory
        defaults = cls()
        allowed = {sf.name for sf in fields(defaults)}
        kwargs = {}
        for key, raw in parser[name].items():
            if key not in allowed:
                raise ConfigError(f"unknown key {name}.{key}")
            kwargs[key] = _coerce(raw, getattr(defaults, key), f"{name}.{key}")
        sections[name] = cls(**kwargs)
    return RunConfig(**sections)


def load(path) -> RunConfig:
    try:
        with open(path) as fh:
            return parse(fh.read())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None


def save(path, cfg):
    with open(path, "w") as fh:
        fh.write(serialize(cfg))
