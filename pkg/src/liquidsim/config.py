"""
Experiment configuration: a YAML document with four optional sections.

    market:      # raw desk assumptions, turned into MarketParams
      annual_vol: 0.12
      bid_ask: 0.125
      daily_volume: 5.0e+6
      trading_days_per_year: 250
      price: 50.0
      shares: 1.0e+6
      horizon_days: 60
      num_trades: 60
    agents:      # one entry per seller; policy is "learner" or "linear".
                 # Omit to get one learner holding market.shares (train,
                 # evaluate) or the preset's own layout (fig2..fig5).
      - {shares: 1.0e+6, risk_aversion: 1.0e-6, policy: learner}
    training:
      scheme: independent      # independent | cooperative | competitive
      episodes: 3000
      eval_episodes: 100
      lag_depth: 5
      seed: 0
      normalized_reward: true
    ddpg:        # any DdpgConfig field
      actor_lr: 1.0e-4

Every key is optional; an empty document gives the single-agent default.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import yaml

from .analytic import MarketParams, derive_params
from .ddpg import DdpgConfig
from .errors import ConfigError, LiquidSimError
from .market import AgentSpec
from .rewards import RewardScheme

DEFAULT_EPISODES = 3000
PAPER_EPISODES = 10000
POLICIES = ("learner", "linear")


@dataclass
class MarketConfig:
    annual_vol: float = 0.12
    bid_ask: float = 0.125
    daily_volume: float = 5e6
    trading_days_per_year: float = 250
    price: float = 50.0
    shares: float = 1e6
    horizon_days: float = 60
    num_trades: int = 60

    def params(self) -> MarketParams:
        return derive_params(
            self.annual_vol, self.bid_ask, self.daily_volume, self.trading_days_per_year,
            self.price, self.shares, self.horizon_days, self.num_trades,
        )


@dataclass
class AgentConfig:
    shares: float = 1e6
    risk_aversion: float = 1e-6
    policy: str = "learner"


@dataclass
class TrainingConfig:
    scheme: str = "independent"
    episodes: int = DEFAULT_EPISODES
    eval_episodes: int = 100
    lag_depth: int = 5
    seed: int = 0
    normalized_reward: bool = True


@dataclass
class ExperimentConfig:
    market: MarketConfig = field(default_factory=MarketConfig)
    # None lets figure presets use their own agent layout
    agents: list[AgentConfig] | None = None
    training: TrainingConfig = field(default_factory=TrainingConfig)
    ddpg: DdpgConfig = field(default_factory=DdpgConfig)

    def params(self) -> MarketParams:
        return self.market.params()

    def effective_agents(self) -> list[AgentConfig]:
        return [AgentConfig(shares=self.market.shares)] if self.agents is None else self.agents

    def agent_specs(self) -> list[AgentSpec]:
        return [AgentSpec(j + 1, a.shares, a.risk_aversion) for j, a in enumerate(self.effective_agents())]

    def validate(self) -> "ExperimentConfig":
        try:
            self.params()
        except LiquidSimError as exc:
            raise ConfigError("market", str(exc)) from exc
        if self.agents is not None and not self.agents:
            raise ConfigError("agents", "at least one agent is required")
        agents = self.effective_agents()
        for j, a in enumerate(agents):
            if not a.shares > 0:
                raise ConfigError(f"agents[{j}].shares", "must be > 0")
            if not a.risk_aversion >= 0:
                raise ConfigError(f"agents[{j}].risk_aversion", "must be >= 0")
            if a.policy not in POLICIES:
                raise ConfigError(f"agents[{j}].policy", f"must be one of {POLICIES}")
        t = self.training
        try:
            scheme = RewardScheme(t.scheme)
        except ValueError:
            raise ConfigError("training.scheme", f"unknown scheme {t.scheme!r}") from None
        if scheme is not RewardScheme.INDEPENDENT and len(agents) != 2:
            raise ConfigError("training.scheme", f"{scheme.value} needs exactly 2 agents")
        if t.episodes < 0:
            raise ConfigError("training.episodes", "must be >= 0")
        if t.eval_episodes < 1:
            raise ConfigError("training.eval_episodes", "must be >= 1")
        if t.lag_depth < 1:
            raise ConfigError("training.lag_depth", "must be >= 1")
        if t.seed < 0:
            raise ConfigError("training.seed", "must be >= 0")
        try:
            self.ddpg.validate()
        except LiquidSimError as exc:
            raise ConfigError("ddpg", str(exc)) from exc
        return self


def _coerce(path: str, value, target):
    if target is bool:
        if not isinstance(value, bool):
            raise ConfigError(path, f"expected a boolean, got {value!r}")
        return value
    if target is int:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(path, f"expected an integer, got {value!r}")
        return int(value)
    if target is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(path, f"expected a number, got {value!r}")
        return float(value)
    if target is str:
        if not isinstance(value, str):
            raise ConfigError(path, f"expected a string, got {value!r}")
        return value
    if target == "tuple[int, ...]":
        if not isinstance(value, (list, tuple)) or not value:
            raise ConfigError(path, f"expected a list of layer widths, got {value!r}")
        return tuple(_coerce(f"{path}[{i}]", v, int) for i, v in enumerate(value))
    raise TypeError(target)


_TYPES = {"float": float, "int": int, "str": str, "bool": bool}


def _build(cls, data, path: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(path, "expected a mapping")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in fields:
            raise ConfigError(f"{path}.{key}", "unknown key")
        ftype = fields[key].type
        kwargs[key] = _coerce(f"{path}.{key}", value, _TYPES.get(ftype, ftype))
    return cls(**kwargs)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a YAML config document; raises :class:`ConfigError`."""
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("<document>", f"invalid YAML: {exc}") from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("<document>", "top level must be a mapping")
    known = {"market", "agents", "training", "ddpg"}
    for key in doc:
        if key not in known:
            raise ConfigError(str(key), "unknown key")
    cfg = ExperimentConfig(
        market=_build(MarketConfig, doc.get("market"), "market"),
        training=_build(TrainingConfig, doc.get("training"), "training"),
        ddpg=_build(DdpgConfig, doc.get("ddpg"), "ddpg"),
    )
    if doc.get("agents") is not None:
        agents = doc["agents"]
        if not isinstance(agents, list):
            raise ConfigError("agents", "expected a list")
        cfg.agents = [_build(AgentConfig, a, f"agents[{j}]") for j, a in enumerate(agents)]
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def to_dict(cfg: ExperimentConfig) -> dict:
    d = dataclasses.asdict(cfg)
    if cfg.agents is None:
        del d["agents"]
    d["ddpg"]["actor_hidden"] = list(cfg.ddpg.actor_hidden)
    d["ddpg"]["critic_hidden"] = list(cfg.ddpg.critic_hidden)
    return d


def serialize_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)
