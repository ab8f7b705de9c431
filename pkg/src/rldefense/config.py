"""Run configuration as a flat mapping of dotted keys.

A config file holds one ``key = value`` pair per line; ``#`` starts a
comment. File values override the defaults below and command-line
overrides beat file values. ``attack.epsilon`` and ``noise.eta`` accept
``auto`` (calibrated epsilon, and eta tied to epsilon respectively).
"""

from __future__ import annotations

import hashlib
from dataclasses import fields

from .agent import DqnConfig
from .envsim import ScenarioConfig, scenario_config

AUTO = "auto"

DEFAULTS: dict[str, object] = {
    "run.seed": 0,
    "run.scenario": "highway",
    "collect.n": 5000,
    "attack.epsilon": AUTO,
    "attack.loss": "cross_entropy",
    "attack.apply_every_step": True,
    "attack.interval": 2,
    "attack.target_fraction": 0.25,
    "attack.grid": (0.01, 0.02, 0.05, 0.1, 0.2),
    "noise.eta": AUTO,
    "noise.clip_lo": -1.0,
    "noise.clip_hi": 1.0,
    "autoencoder.epochs": 200,
    "autoencoder.lr": 1e-3,
    "autoencoder.batch_size": 64,
    "pca.variance_target": 0.95,
    "eval.episodes": 100,
    "eval.batch_size": 10,
    "eval.sma_window": 10,
}
_AUTO_KEYS = {"attack.epsilon", "noise.eta"}
_SCENARIO_FIELDS = {f.name: f for f in fields(ScenarioConfig) if f.name not in ("kind", "seed")}
_DQN_FIELDS = {f.name: f for f in fields(DqnConfig) if f.name != "seed"}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        where = ""
        if source is not None:
            where = f"{source}:{line}: " if line is not None else f"{source}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
        self.line = line


def stage_seed(root: int, label: str) -> int:
    """Derive an independent 63-bit seed for a named stage from the root seed."""
    digest = hashlib.sha256(f"rldefense/{int(root)}/{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def _known_default(key: str):
    if key in DEFAULTS:
        return DEFAULTS[key]
    section, _, name = key.partition(".")
    if section == "scenario" and name in _SCENARIO_FIELDS:
        return getattr(ScenarioConfig(), name)
    if section == "dqn" and name in _DQN_FIELDS:
        return getattr(DqnConfig(), name)
    raise KeyError(key)


def parse_value(key: str, text: str):
    """Convert ``text`` to the type of ``key``'s default."""
    text = text.strip()
    if key in _AUTO_KEYS and text.lower() == AUTO:
        return AUTO
    default = _known_default(key)
    if isinstance(default, bool):
        low = text.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if isinstance(default, int):
        return int(text)
    if isinstance(default, float) or key in _AUTO_KEYS:
        return float(text)
    if isinstance(default, tuple):
        parts = [p for p in text.replace("(", "").replace(")", "").split(",") if p.strip()]
        return tuple(float(p) for p in parts)
    return text


class RunConfig:
    def __init__(self, values: dict | None = None):
        self.values: dict[str, object] = dict(DEFAULTS)
        for key, value in (values or {}).items():
            self.set(key, value)

    def __getitem__(self, key: str):
        if key in self.values:
            return self.values[key]
        return _known_default(key)

    def set(self, key: str, value) -> None:
        try:
            _known_default(key)
        except KeyError:
            raise ConfigError(f"unknown key {key!r}") from None
        if isinstance(value, str):
            try:
                value = parse_value(key, value)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
        self.values[key] = value

    @classmethod
    def from_text(cls, text: str, source: str | None = None) -> RunConfig:
        cfg = cls()
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip()
            if not sep or not key:
                raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, source)
            try:
                _known_default(key)
            except KeyError:
                raise ConfigError(f"unknown key {key!r}", lineno, source) from None
            try:
                cfg.values[key] = parse_value(key, value)
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}", lineno, source) from None
        return cfg

    @classmethod
    def from_file(cls, path) -> RunConfig:
        with open(path) as fh:
            return cls.from_text(fh.read(), source=str(path))

    def to_text(self) -> str:
        lines = []
        for key in sorted(self.values):
            value = self.values[key]
            if isinstance(value, tuple):
                value = ", ".join(repr(v) for v in value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    # -- typed views ---------------------------------------------------------

    @property
    def seed(self) -> int:
        return int(self["run.seed"])

    @property
    def scenario_kind(self) -> str:
        return str(self["run.scenario"])

    def scenario(self) -> ScenarioConfig:
        overrides = {k.split(".", 1)[1]: v for k, v in self.values.items() if k.startswith("scenario.")}
        return scenario_config(self.scenario_kind, seed=stage_seed(self.seed, "scenario") % 2**31, **overrides)

    def dqn(self) -> DqnConfig:
        overrides = {k.split(".", 1)[1]: v for k, v in self.values.items() if k.startswith("dqn.")}
        if "hidden_sizes" in overrides:
            overrides["hidden_sizes"] = tuple(int(v) for v in overrides["hidden_sizes"])
        return DqnConfig(seed=stage_seed(self.seed, "train"), **overrides)
