"""Declarative run configuration: one YAML file whose sections mirror the module types.

Precedence, lowest first: built-in defaults, the config file, ``SPGG_*``
environment variables, command-line flags. Unknown sections or keys are
errors, reported with the offending path and, when it came from a file, its
line number.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path

import yaml

from .analysis import Parameter
from .game import CostModel, GameParams
from .metarl.belief import BeliefDims
from .metarl.env import SyntheticEnv
from .metarl.ppo import TrainerConfig
from .solver import SolverConfig

ENV_PREFIX = "SPGG_"
REQUIRED_GAME = ("n", "gamma_coop", "rho", "threshold", "penalty", "c_min", "c_max")


class ConfigError(ValueError):
    """Invalid configuration; the CLI maps this to exit status 2."""


@dataclass(frozen=True)
class RunSettings:
    seed: int = 0
    out: str | None = None
    format: str | None = None
    threads: int | None = None


@dataclass(frozen=True)
class SweepSettings:
    parameter: str = "gamma"
    lo: float | None = None
    hi: float | None = None
    count: int = 25
    penalty_ratio: float | None = None


@dataclass(frozen=True)
class ParetoSettings:
    samples: int = 10_000
    grid_points: int = 0
    eps: float = 0.0


@dataclass(frozen=True)
class BestResponseSettings:
    agent: int = 3
    s_prev: float = 0.0
    points: int = 25


@dataclass(frozen=True)
class CheckSettings:
    checks: tuple[str, ...] = ("assumptions", "theorem1", "lemma1", "statics")
    probe_points: int = 101
    lemma_grid: int = 25
    statics_count: int = 25


@dataclass(frozen=True)
class RunConfig:
    game: GameParams = field(default_factory=GameParams)
    cost: CostModel = field(default_factory=CostModel)
    solver: SolverConfig = field(default_factory=SolverConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    env: SyntheticEnv = field(default_factory=SyntheticEnv)
    run: RunSettings = field(default_factory=RunSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    pareto: ParetoSettings = field(default_factory=ParetoSettings)
    best_response: BestResponseSettings = field(default_factory=BestResponseSettings)
    check: CheckSettings = field(default_factory=CheckSettings)


SECTIONS = {f.name: f for f in fields(RunConfig)}


def _plain(value):
    """Turn enums, tuples and nested dataclasses into YAML-friendly values."""
    if hasattr(value, "value") and not isinstance(value, (int, float, str)):
        return value.value
    if isinstance(value, str) and hasattr(value, "value"):
        return value.value
    if dataclasses.is_dataclass(value):
        return {k: _plain(v) for k, v in asdict(value).items()}
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def to_dict(cfg: RunConfig) -> dict:
    out = {}
    for name in SECTIONS:
        section = getattr(cfg, name)
        out[name] = {f.name: _plain(getattr(section, f.name)) for f in fields(section)}
    return out


def dump(cfg: RunConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


def _line_index(text: str) -> dict:
    """Map ``(section, key)`` paths to 1-based line numbers in the YAML source."""
    lines = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines
    if not isinstance(root, yaml.MappingNode):
        return lines
    for knode, vnode in root.value:
        lines[(knode.value,)] = knode.start_mark.line + 1
        if isinstance(vnode, yaml.MappingNode):
            for k2, _ in vnode.value:
                lines[(knode.value, k2.value)] = k2.start_mark.line + 1
    return lines


def _where(path, lines):
    line = lines.get(tuple(path))
    dotted = ".".join(path)
    return f"{dotted} (line {line})" if line else dotted


def _build(name: str, data: dict, lines: dict, require=()):
    default = getattr(RunConfig(), name)
    known = {f.name for f in fields(default)}
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown key {_where([name, key], lines)}")
    for key in require:
        if key not in data:
            raise ConfigError(f"missing required field {name}.{key}")
    values = {f.name: getattr(default, f.name) for f in fields(default)}
    values.update(data)
    if name == "cost":
        values.setdefault("kind", "linear")
        if values["kind"] == "linear" and "b" not in data:
            values["b"] = 0.0
    if name == "trainer" and isinstance(values.get("belief_dims"), dict):
        try:
            values["belief_dims"] = BeliefDims(**values["belief_dims"])
        except TypeError as exc:
            raise ConfigError(f"{_where([name, 'belief_dims'], lines)}: {exc}") from exc
    for key in ("checks",):
        if key in values and isinstance(values[key], list):
            values[key] = tuple(values[key])
    try:
        return type(default)(**values)
    except (TypeError, ValueError) as exc:
        bad = [k for k in data if k in str(exc)]
        where = _where([name, bad[0]], lines) if bad else name
        raise ConfigError(f"{where}: {exc}") from exc


def from_dict(data: dict, lines: dict | None = None, strict_game: bool = False) -> RunConfig:
    lines = lines or {}
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("a config file must be a mapping of sections")
    for name, body in data.items():
        if name not in SECTIONS:
            raise ConfigError(f"unknown section {_where([name], lines)}")
        if body is not None and not isinstance(body, dict):
            raise ConfigError(f"section {_where([name], lines)} must be a mapping")
    if strict_game and "game" not in data:
        raise ConfigError("missing required section game")
    built = {}
    for name in SECTIONS:
        body = data.get(name) or {}
        require = REQUIRED_GAME if (strict_game and name == "game") else ()
        if strict_game and name == "cost" and "cost" in data:
            require = ("a",)
        built[name] = _build(name, body, lines, require)
    cfg = RunConfig(**built)
    _validate_cross(cfg)
    return cfg


def _validate_cross(cfg: RunConfig) -> None:
    try:
        Parameter(cfg.sweep.parameter)
    except ValueError:
        raise ConfigError(f"sweep.parameter must be one of gamma, rho, b, got {cfg.sweep.parameter!r}")
    if cfg.run.format not in (None, "csv", "json"):
        raise ConfigError(f"run.format must be csv or json, got {cfg.run.format!r}")
    if cfg.run.threads is not None and int(cfg.run.threads) < 1:
        raise ConfigError("run.threads must be >= 1")
    for name in cfg.check.checks:
        if name not in ("assumptions", "theorem1", "lemma1", "statics"):
            raise ConfigError(f"unknown check {name!r} in check.checks")


def bundled_config_names() -> list[str]:
    root = resources.files("seqpgg") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


def read_config_text(path_or_name: str) -> str:
    """Read a config file, falling back to a bundled config of that name."""
    path = Path(path_or_name)
    if path.exists():
        return path.read_text(encoding="utf-8")
    name = path_or_name[:-5] if path_or_name.endswith(".yaml") else path_or_name
    bundled = resources.files("seqpgg") / "configs" / f"{name}.yaml"
    if "/" not in path_or_name and bundled.is_file():
        return bundled.read_text(encoding="utf-8")
    raise ConfigError(f"config file not found: {path_or_name}")


def parse_text(text: str, strict_game: bool = True) -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}" if mark else ""
        raise ConfigError(f"cannot parse config{where}: {getattr(exc, 'problem', exc)}") from exc
    return from_dict(data, _line_index(text), strict_game)


def env_overrides(environ=None) -> dict:
    """Nested override mapping from ``SPGG_SEED`` style and ``SPGG_SECTION__KEY`` variables."""
    environ = os.environ if environ is None else environ
    out: dict = {}
    shortcuts = {"SEED": ("run", "seed"), "OUT": ("run", "out"),
                 "FORMAT": ("run", "format"), "THREADS": ("run", "threads")}
    for key, raw in environ.items():
        if not key.startswith(ENV_PREFIX):
            continue
        rest = key[len(ENV_PREFIX):]
        if rest in shortcuts:
            section, name = shortcuts[rest]
        elif "__" in rest:
            section, name = (s.lower() for s in rest.split("__", 1))
        else:
            raise ConfigError(f"unrecognized environment override {key}")
        try:
            value = yaml.safe_load(raw) if name not in ("out", "format") else raw
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {key}: {exc}") from exc
        out.setdefault(section, {})[name] = value
    return out


def merge(base: dict, overrides: dict) -> dict:
    out = {k: dict(v or {}) for k, v in base.items()}
    for section, body in overrides.items():
        out.setdefault(section, {}).update(body)
    return out


def load(path: str | None = None, overrides: dict | None = None, environ=None) -> RunConfig:
    """Resolve a run config from defaults, an optional file, the environment and overrides."""
    data: dict = {}
    lines: dict = {}
    strict = path is not None
    if path is not None:
        text = read_config_text(path)
        try:
            data = yaml.safe_load(text) or {}
        except yaml.YAMLError as exc:
            mark = getattr(exc, "problem_mark", None)
            where = f" at line {mark.line + 1}" if mark else ""
            raise ConfigError(f"cannot parse config{where}: {getattr(exc, 'problem', exc)}") from exc
        if not isinstance(data, dict):
            raise ConfigError("a config file must be a mapping of sections")
        lines = _line_index(text)
        # validate the file on its own first so errors point at its lines
        from_dict(data, lines, strict_game=True)
    data = merge(data, env_overrides(environ))
    data = merge(data, overrides or {})
    return from_dict(data, lines, strict_game=strict)
