"""
Multi-agent liquidation market.

Arithmetic random-walk price with linear permanent impact that persists in
the quoted price and linear temporary impact that only discounts the
execution price of the current period. Both impacts are driven by the
aggregate flow of all agents, and every agent trading in a period receives
the same execution price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .analytic import MarketParams
from .errors import (
    ConstructionError,
    EpisodeFinishedError,
    IncompleteEpisodeError,
    InvalidActionError,
    UnknownAgentError,
)

DEFAULT_LAG_DEPTH = 5


@dataclass(frozen=True)
class AgentSpec:
    agent_id: int
    initial_shares: float
    risk_aversion: float


@dataclass(frozen=True)
class Observation:
    log_returns: np.ndarray
    trades_remaining_frac: float
    own_holdings_frac: float

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.log_returns, [self.trades_remaining_frac, self.own_holdings_frac]])


@dataclass(frozen=True)
class StepResult:
    executed: np.ndarray
    execution_price: float
    new_price: float
    per_agent_proceeds: np.ndarray
    terminal: bool


def observation_dim(lag_depth: int) -> int:
    return lag_depth + 3


class MarketEnv:
    """Mutable episode state: price, return history, holdings and proceeds.

    Agents are addressed by ``agent_id`` (1..J, contiguous). Pass
    ``noiseless=True`` to zero every price shock, which makes realized
    shortfall equal the model's expected shortfall.
    """

    def __init__(
        self,
        params: MarketParams,
        agents: Sequence[AgentSpec],
        lag_depth: int = DEFAULT_LAG_DEPTH,
        seed: int | np.random.SeedSequence | None = 0,
        noiseless: bool = False,
    ):
        if not agents:
            raise ConstructionError("at least one agent is required")
        ids = [a.agent_id for a in agents]
        if ids != list(range(1, len(agents) + 1)):
            raise ConstructionError(f"agent ids must be 1..J in order, got {ids}")
        for a in agents:
            if not a.initial_shares > 0:
                raise ConstructionError(f"agent {a.agent_id}: initial_shares must be > 0")
            if not a.risk_aversion >= 0:
                raise ConstructionError(f"agent {a.agent_id}: risk_aversion must be >= 0")
        if int(lag_depth) != lag_depth or lag_depth < 1:
            raise ConstructionError(f"lag_depth must be a positive integer, got {lag_depth}")

        self.params = params
        self.agents = list(agents)
        self.lag_depth = int(lag_depth)
        self.noiseless = noiseless
        self.rng = np.random.default_rng(seed)

        self.step_index = 0
        self.price = params.initial_price
        self.log_return_history = np.zeros(self.lag_depth + 1)
        self.initial_holdings = np.array([a.initial_shares for a in agents], dtype=float)
        self.holdings = self.initial_holdings.copy()
        self.captures = np.zeros(len(agents))
        self.negative_price = False

    @property
    def num_agents(self) -> int:
        return len(self.agents)

    @property
    def terminal(self) -> bool:
        return self.step_index >= self.params.num_trades

    @property
    def steps_remaining(self) -> int:
        return self.params.num_trades - self.step_index

    def _index(self, agent_id: int) -> int:
        if not 1 <= agent_id <= self.num_agents:
            raise UnknownAgentError(agent_id)
        return agent_id - 1

    def observe(self, agent_id: int) -> Observation:
        """Partial view: market returns, time left and the agent's own inventory only."""
        j = self._index(agent_id)
        return Observation(
            log_returns=self.log_return_history.copy(),
            trades_remaining_frac=self.steps_remaining / self.params.num_trades,
            own_holdings_frac=float(self.holdings[j] / self.initial_holdings[j]),
        )

    def observation_vector(self, agent_id: int) -> np.ndarray:
        j = self._index(agent_id)
        out = np.empty(self.lag_depth + 3)
        out[: self.lag_depth + 1] = self.log_return_history
        out[-2] = self.steps_remaining / self.params.num_trades
        out[-1] = self.holdings[j] / self.initial_holdings[j]
        return out

    def step(self, actions: Sequence[float]) -> tuple[list[Observation], StepResult]:
        """Advance one trading period with per-agent sell fractions.

        Actions are clipped to [0, 1]. On the final period every agent is
        forced to sell its remainder regardless of its action.
        """
        if self.terminal:
            raise EpisodeFinishedError("episode already finished")
        a = np.asarray(actions, dtype=float).reshape(-1)
        if a.size != self.num_agents:
            raise InvalidActionError(f"expected {self.num_agents} actions, got {a.size}")
        if not np.all(np.isfinite(a)):
            raise InvalidActionError(f"non-finite action in {a}")
        a = np.clip(a, 0.0, 1.0)
        if self.step_index + 1 == self.params.num_trades:
            a = np.ones_like(a)

        p = self.params
        executed = a * self.holdings
        # a == 1 must empty the book exactly
        executed[a == 1.0] = self.holdings[a == 1.0]
        n = float(executed.sum())
        execution_price = self.price - p.epsilon * math.copysign(1.0, n) * (n != 0) - p.eta / p.tau * n
        xi = 0.0 if self.noiseless else float(self.rng.standard_normal())
        new_price = self.price + p.sigma * math.sqrt(p.tau) * xi - p.tau * p.gamma_perm * (n / p.tau)

        proceeds = executed * execution_price
        self.holdings = self.holdings - executed
        self.holdings[a == 1.0] = 0.0
        self.captures = self.captures + proceeds
        if new_price > 0 and self.price > 0:
            r = math.log(new_price / self.price)
        else:
            self.negative_price = True
            r = 0.0
        if execution_price < 0:
            self.negative_price = True
        self.log_return_history = np.roll(self.log_return_history, -1)
        self.log_return_history[-1] = r
        self.price = new_price
        self.step_index += 1

        result = StepResult(
            executed=executed,
            execution_price=execution_price,
            new_price=new_price,
            per_agent_proceeds=proceeds,
            terminal=self.terminal,
        )
        return [self.observe(a.agent_id) for a in self.agents], result

    def realized_shortfall(self, agent_id: int) -> float:
        """Initial book value at P0 minus realized proceeds, for a finished episode."""
        j = self._index(agent_id)
        if not self.terminal:
            raise IncompleteEpisodeError("shortfall is only defined once the episode has ended")
        return float(self.initial_holdings[j] * self.params.initial_price - self.captures[j])


def create(
    params: MarketParams,
    agents: Sequence[AgentSpec],
    lag_depth: int = DEFAULT_LAG_DEPTH,
    seed: int | np.random.SeedSequence | None = 0,
    noiseless: bool = False,
) -> MarketEnv:
    return MarketEnv(params, agents, lag_depth=lag_depth, seed=seed, noiseless=noiseless)
