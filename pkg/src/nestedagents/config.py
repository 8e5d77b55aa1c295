"""Experiment configuration and its key = value file format.

The file is INI-style, one section per module::

    [arena]
    scenario = line
    max_steps = 500

Unknown sections or keys are rejected. ``dump`` followed by ``load`` returns
an equal config.
"""
from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

from .errors import ConfigError

FRAMEWORKS = ("nested", "hierarchical", "flat")


@dataclass
class ArenaConfig:
    scenario: str = "line"
    shape_file: str | None = None
    max_steps: int = 500
    front_cell_drop: bool = False


@dataclass
class NetConfig:
    hidden_width: int = 32
    hidden_layers: int = 2
    lr: float = 0.0003


@dataclass
class DdqnConfig:
    gamma: float = 0.99
    tau: int = 100
    batch_size: int = 32
    replay_capacity: int = 1_000_000
    warmup: int = 500
    # the main agent sees one transition per episode
    main_warmup: int = 32
    dqn_target: str = "eq4"
    eps_start: float = 1.0
    eps_main_floor: float = 0.01
    eps_nested_floor: float = 0.001
    eps_main_horizon: float = 0.2
    eps_nested_horizon: float = 0.8
    # affine rescaling of the terminal build score before it is used as a
    # learning reward: (score - grid cells) * scale
    main_reward_scale: float = 0.1
    normalize_main_reward: bool = True


@dataclass
class HarnessConfig:
    framework: str = "nested"
    episodes: int = 3000
    eval_every: int = 30
    eval_episodes: int = 1
    trials: int = 10
    seed: int = 0
    jobs: int = 1
    flat_invalid_score: str = "zero"


@dataclass
class ExperimentConfig:
    arena: ArenaConfig = field(default_factory=ArenaConfig)
    approximator: NetConfig = field(default_factory=NetConfig)
    ddqn: DdqnConfig = field(default_factory=DdqnConfig)
    harness: HarnessConfig = field(default_factory=HarnessConfig)

    def validate(self) -> "ExperimentConfig":
        h, d, a = self.harness, self.ddqn, self.arena
        if h.framework not in FRAMEWORKS:
            raise ConfigError(f"framework must be one of {FRAMEWORKS}, got {h.framework!r}")
        if h.episodes < 1 or h.eval_every < 1 or h.trials < 1 or h.eval_episodes < 1:
            raise ConfigError("episodes, eval_every, eval_episodes and trials must be >= 1")
        if h.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if h.flat_invalid_score not in ("zero", "literal"):
            raise ConfigError("flat_invalid_score must be 'zero' or 'literal'")
        if d.dqn_target not in ("eq3", "eq4"):
            raise ConfigError("dqn_target must be eq3 or eq4")
        if not 0.0 <= d.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        if d.tau < 1 or d.batch_size < 1 or d.replay_capacity < 1:
            raise ConfigError("tau, batch_size and replay_capacity must be >= 1")
        for name in ("eps_main_horizon", "eps_nested_horizon"):
            if not 0.0 < getattr(d, name) <= 1.0:
                raise ConfigError(f"{name} is a fraction of episodes in (0, 1]")
        for name in ("eps_main_floor", "eps_nested_floor"):
            if not 0.0 <= getattr(d, name) <= d.eps_start <= 1.0:
                raise ConfigError(f"need 0 <= {name} <= eps_start <= 1")
        if self.approximator.lr <= 0:
            raise ConfigError("lr must be positive")
        if a.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")
        return self

    def replace(self, **overrides: Any) -> "ExperimentConfig":
        """Copy with dotted or bare-key overrides, e.g. ``episodes=10``."""
        cfg = dataclasses.replace(
            self,
            arena=dataclasses.replace(self.arena),
            approximator=dataclasses.replace(self.approximator),
            ddqn=dataclasses.replace(self.ddqn),
            harness=dataclasses.replace(self.harness),
        )
        for key, value in overrides.items():
            section = section_of(key)
            setattr(getattr(cfg, section), key, value)
        return cfg


SECTIONS = ("arena", "approximator", "ddqn", "harness")


def section_of(key: str) -> str:
    for name in SECTIONS:
        if key in {f.name for f in fields(getattr(ExperimentConfig(), name))}:
            return name
    raise ConfigError(f"unknown config key {key!r}")


def _parse_value(raw: str, default: Any, annotation: str, key: str) -> Any:
    raw = raw.strip()
    if "None" in annotation and raw in ("", "none", "None"):
        return None
    try:
        if isinstance(default, bool) or annotation == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int) or annotation == "int":
            return int(raw)
        if isinstance(default, float) or annotation == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None
    return raw


def _format_value(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def loads(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file: {exc}") from None
    cfg = (base or ExperimentConfig()).replace()
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        target = getattr(cfg, section)
        known = {f.name: f for f in fields(target)}
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            f = known[key]
            setattr(target, key, _parse_value(raw, getattr(target, key), str(f.type), key))
    return cfg


def load(path: str | Path, base: ExperimentConfig | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    return loads(text, base)


def dumps(cfg: ExperimentConfig) -> str:
    out = io.StringIO()
    for section in SECTIONS:
        out.write(f"[{section}]\n")
        obj = getattr(cfg, section)
        for f in fields(obj):
            out.write(f"{f.name} = {_format_value(getattr(obj, f.name))}\n")
        out.write("\n")
    return out.getvalue()
