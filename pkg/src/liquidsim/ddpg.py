"""
DDPG learners and the multi-agent training loop.

Every agent owns an actor, a critic, slowly tracking copies of both, a
replay buffer and an Ornstein-Uhlenbeck exploration process. Agents see
only their own observation, act simultaneously, and each learns once per
environment step from its shaped reward.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidParameterError
from .market import MarketEnv
from .nn import Adam, Mlp, soft_update
from .rewards import RewardScheme, remaining_utility, shape_rewards, NORMALIZATION_FLOOR


@dataclass(frozen=True)
class Transition:
    observation: np.ndarray
    action: float
    reward: float
    next_observation: np.ndarray
    terminal: bool


class ReplayBuffer:
    """Fixed-capacity FIFO of transitions backed by preallocated ring arrays."""

    def __init__(self, capacity: int, obs_dim: int, rng: np.random.Generator | int | None = None):
        if capacity < 1:
            raise InvalidParameterError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.obs_dim = obs_dim
        self.rng = np.random.default_rng(rng)
        self._obs = np.zeros((capacity, obs_dim))
        self._next_obs = np.zeros((capacity, obs_dim))
        self._action = np.zeros(capacity)
        self._reward = np.zeros(capacity)
        self._terminal = np.zeros(capacity, dtype=bool)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, t: Transition) -> None:
        i = self._next
        self._obs[i] = t.observation
        self._action[i] = t.action
        self._reward[i] = t.reward
        self._next_obs[i] = t.next_observation
        self._terminal[i] = t.terminal
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _order(self) -> np.ndarray:
        start = (self._next - self._size) % self.capacity
        return (start + np.arange(self._size)) % self.capacity

    def transitions(self) -> list[Transition]:
        """Stored transitions, oldest first."""
        return [self._get(i) for i in self._order()]

    def _get(self, i: int) -> Transition:
        return Transition(
            self._obs[i].copy(), float(self._action[i]), float(self._reward[i]),
            self._next_obs[i].copy(), bool(self._terminal[i]),
        )

    def sample_indices(self, batch_size: int) -> np.ndarray:
        """Uniform draw without replacement, as positions in oldest-first order."""
        if batch_size > self._size:
            raise InvalidParameterError(f"cannot sample {batch_size} from {self._size} transitions")
        return self.rng.choice(self._size, size=batch_size, replace=False)

    def sample(self, batch_size: int):
        """Return (obs, actions, rewards, next_obs, terminal) arrays for a minibatch."""
        idx = self._order()[self.sample_indices(batch_size)]
        return self._obs[idx], self._action[idx], self._reward[idx], self._next_obs[idx], self._terminal[idx]


class OUNoise:
    """Mean-reverting exploration noise; sigma decays once per episode to a floor."""

    def __init__(self, theta=0.15, sigma=0.2, mu=0.0, sigma_decay=0.999, sigma_floor=0.05, rng=None):
        self.theta = theta
        self.sigma = sigma
        self.mu = mu
        self.sigma_decay = sigma_decay
        self.sigma_floor = sigma_floor
        self.rng = np.random.default_rng(rng)
        self.state = mu

    def reset(self) -> None:
        self.state = self.mu

    def sample(self) -> float:
        self.state += self.theta * (self.mu - self.state) + self.sigma * self.rng.standard_normal()
        return self.state

    def decay(self) -> None:
        self.sigma = max(self.sigma * self.sigma_decay, self.sigma_floor)


@dataclass
class DdpgConfig:
    actor_hidden: tuple[int, ...] = (24, 24)
    critic_hidden: tuple[int, ...] = (64, 64)
    buffer_capacity: int = 100_000
    batch_size: int = 64
    actor_lr: float = 1e-4
    critic_lr: float = 1e-3
    discount_factor: float = 0.99
    soft_update_rate: float = 1e-2
    noise_theta: float = 0.15
    noise_sigma: float = 0.2
    noise_decay: float = 0.999
    noise_floor: float = 0.05

    def validate(self) -> None:
        if self.batch_size < 1 or self.buffer_capacity < self.batch_size:
            raise InvalidParameterError("need 1 <= batch_size <= buffer_capacity")
        for name in ("actor_lr", "critic_lr"):
            if not getattr(self, name) > 0:
                raise InvalidParameterError(f"{name} must be > 0")
        for name in ("discount_factor", "soft_update_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidParameterError(f"{name} must be in [0, 1]")
        if not 0.0 < self.noise_decay <= 1.0 or self.noise_floor < 0 or self.noise_sigma < 0:
            raise InvalidParameterError("invalid exploration noise settings")


Policy = Callable[[np.ndarray], float]


class LinearSeller:
    """Scripted policy selling an equal share count every remaining period."""

    def __init__(self, num_trades: int):
        self.num_trades = num_trades

    def __call__(self, obs: np.ndarray) -> float:
        steps_left = round(obs[-2] * self.num_trades)
        return 1.0 if steps_left <= 1 else 1.0 / steps_left


class DdpgAgent:
    """One learner. Setting ``policy_override`` freezes it as a scripted trader."""

    def __init__(self, obs_dim: int, config: DdpgConfig | None = None, seed=0, policy_override: Policy | None = None):
        self.config = config = config or DdpgConfig()
        config.validate()
        self.obs_dim = obs_dim
        ss = np.random.SeedSequence(seed)
        init_ss, buffer_ss, noise_ss = ss.spawn(3)
        init_rng = np.random.default_rng(init_ss)
        self.actor = Mlp((obs_dim, *config.actor_hidden, 1), "sigmoid", rng=init_rng)
        self.critic = Mlp((obs_dim + 1, *config.critic_hidden, 1), "identity", rng=init_rng)
        self.target_actor = self.actor.copy()
        self.target_critic = self.critic.copy()
        self.actor_opt = Adam(self.actor.num_params, lr=config.actor_lr)
        self.critic_opt = Adam(self.critic.num_params, lr=config.critic_lr)
        self.buffer = ReplayBuffer(config.buffer_capacity, obs_dim, rng=buffer_ss)
        self.noise = OUNoise(
            theta=config.noise_theta, sigma=config.noise_sigma, sigma_decay=config.noise_decay,
            sigma_floor=config.noise_floor, rng=noise_ss,
        )
        self.policy_override = policy_override

    @property
    def learns(self) -> bool:
        return self.policy_override is None

    def act(self, obs: np.ndarray, explore: bool = False) -> float:
        if self.policy_override is not None:
            return float(np.clip(self.policy_override(obs), 0.0, 1.0))
        a = float(self.actor.forward(obs)[0])
        if explore:
            a += self.noise.sample()
        return min(max(a, 0.0), 1.0)

    def remember(self, t: Transition) -> None:
        if self.learns:
            self.buffer.push(t)

    def learn(self) -> tuple[float, float] | None:
        """One critic step, one actor step, then target tracking.

        Returns (critic_loss, actor_objective), or None when the buffer holds
        fewer transitions than a minibatch (nothing is changed).
        """
        cfg = self.config
        if not self.learns or len(self.buffer) < cfg.batch_size:
            return None
        obs, act, rew, next_obs, term = self.buffer.sample(cfg.batch_size)
        B = cfg.batch_size

        next_act = self.target_actor.forward(next_obs)
        q_next = self.target_critic.forward(np.hstack([next_obs, next_act]))[:, 0]
        y = rew + cfg.discount_factor * np.where(term, 0.0, q_next)

        critic_in = np.hstack([obs, act[:, None]])
        q, cache = self.critic.forward_cached(critic_in)
        err = q[:, 0] - y
        critic_loss = float(np.mean(err**2))
        grad, _ = self.critic.backward(cache, (2.0 / B) * err[:, None])
        self.critic_opt.step(self.critic, grad)

        mu, actor_cache = self.actor.forward_cached(obs)
        q_mu, cache = self.critic.forward_cached(np.hstack([obs, mu]))
        actor_objective = float(np.mean(q_mu))
        _, in_grad = self.critic.backward(cache, np.full((B, 1), 1.0 / B))
        grad, _ = self.actor.backward(actor_cache, -in_grad[:, -1:])
        self.actor_opt.step(self.actor, grad)

        soft_update(self.target_critic, self.critic, cfg.soft_update_rate)
        soft_update(self.target_actor, self.actor, cfg.soft_update_rate)
        return critic_loss, actor_objective


@dataclass
class TrainingLog:
    """Per-episode outcomes, appended in episode order."""

    seed: int
    scheme: str
    episode_seeds: list[int] = field(default_factory=list)
    shortfalls: list[np.ndarray] = field(default_factory=list)
    trajectories: list[np.ndarray] = field(default_factory=list)
    shaped_rewards: list[np.ndarray] = field(default_factory=list)
    critic_losses: list[np.ndarray] = field(default_factory=list)
    negative_price: list[bool] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.shortfalls)

    def shortfall_array(self) -> np.ndarray:
        """(episodes, agents) realized shortfalls."""
        if not self.shortfalls:
            return np.zeros((0, 0))
        return np.vstack(self.shortfalls)

    def trailing_mean(self, window: int = 100) -> np.ndarray:
        return self.shortfall_array()[-window:].mean(axis=0)


EnvFactory = Callable[[np.random.SeedSequence], MarketEnv]


def episode_seed(seed: int, episode: int) -> np.random.SeedSequence:
    """Environment seed for one episode; shared across schemes for common random numbers."""
    return np.random.SeedSequence([int(seed), int(episode)])


def _run_episode(env: MarketEnv, agents: Sequence[DdpgAgent], scheme: RewardScheme | None, explore: bool, normalized=True):
    J = env.num_agents
    p = env.params
    lams = [a.risk_aversion for a in env.agents]
    X0 = env.initial_holdings
    ref = p.epsilon * X0 * NORMALIZATION_FLOOR
    holdings_path = [env.holdings.copy()]
    obs = [env.observation_vector(j + 1) for j in range(J)]
    u_before = [remaining_utility(env.holdings[j], env.steps_remaining, lams[j], p) for j in range(J)]
    reward_sum = np.zeros(J)
    losses = [[] for _ in range(J)]
    while not env.terminal:
        actions = [agents[j].act(obs[j], explore=explore) for j in range(J)]
        env.step(actions)
        holdings_path.append(env.holdings.copy())
        next_obs = [env.observation_vector(j + 1) for j in range(J)]
        if scheme is None:
            obs = next_obs
            continue
        raw = np.empty(J)
        u_after = []
        for j in range(J):
            ua = remaining_utility(env.holdings[j], env.steps_remaining, lams[j], p)
            r = u_before[j] - ua
            if normalized and abs(u_before[j]) >= ref[j]:
                r /= u_before[j]
            raw[j] = r
            u_after.append(ua)
        u_before = u_after
        shaped = shape_rewards(scheme, raw).shaped
        reward_sum += shaped
        for j, agent in enumerate(agents):
            agent.remember(Transition(obs[j], actions[j], float(shaped[j]), next_obs[j], env.terminal))
            out = agent.learn()
            if out is not None:
                losses[j].append(out[0])
        obs = next_obs
    shortfalls = np.array([env.realized_shortfall(j + 1) for j in range(J)])
    mean_loss = np.array([np.mean(l) if l else math.nan for l in losses])
    return shortfalls, np.array(holdings_path), reward_sum, mean_loss


def run_training(
    env_factory: EnvFactory,
    agents: Sequence[DdpgAgent],
    scheme: RewardScheme | str,
    episodes: int,
    seed: int,
    normalized: bool = True,
    progress: Callable[[int, TrainingLog], None] | None = None,
) -> TrainingLog:
    """Train all agents jointly for ``episodes`` episodes; deterministic in (seed, agents)."""
    scheme = RewardScheme(scheme)
    log = TrainingLog(seed=seed, scheme=scheme.value)
    for ep in range(episodes):
        env = env_factory(episode_seed(seed, ep))
        if env.num_agents != len(agents):
            raise InvalidParameterError(f"environment has {env.num_agents} agents, got {len(agents)} learners")
        for agent in agents:
            agent.noise.reset()
        shortfalls, path, rewards, losses = _run_episode(env, agents, scheme, explore=True, normalized=normalized)
        for agent in agents:
            agent.noise.decay()
        log.episode_seeds.append(ep)
        log.shortfalls.append(shortfalls)
        log.trajectories.append(path)
        log.shaped_rewards.append(rewards)
        log.critic_losses.append(losses)
        log.negative_price.append(env.negative_price)
        if progress is not None:
            progress(ep, log)
    return log


@dataclass
class PolicyEvaluation:
    mean_shortfall: np.ndarray
    std_shortfall: np.ndarray
    mean_trajectory: np.ndarray  # (steps + 1, agents) holdings
    shortfalls: np.ndarray


def evaluate_policy(env_factory: EnvFactory, agents: Sequence[DdpgAgent], episodes: int, seed: int) -> PolicyEvaluation:
    """Run greedy (no exploration, no learning) episodes and summarise shortfalls."""
    results, paths = [], []
    for ep in range(episodes):
        env = env_factory(episode_seed(seed, ep))
        shortfalls, path, _, _ = _run_episode(env, agents, None, explore=False)
        results.append(shortfalls)
        paths.append(path)
    results = np.array(results)
    return PolicyEvaluation(
        mean_shortfall=results.mean(axis=0),
        std_shortfall=results.std(axis=0, ddof=1) if episodes > 1 else np.zeros(results.shape[1]),
        mean_trajectory=np.mean(paths, axis=0),
        shortfalls=results,
    )
