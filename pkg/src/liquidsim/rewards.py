"""
Utility-difference rewards and multi-agent reward shaping.

Each agent's reward is the drop in the mean-variance utility of its own
optimal remaining schedule from one step to the next, optionally divided by
the utility before the step. Shaping schemes then couple the agents'
rewards: cooperative agents share the mean, competitive ones penalise the
loser by the winner's reward.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .analytic import MarketParams, optimal_utility
from .errors import InvalidParameterError, UnsupportedConfigurationError

NORMALIZATION_FLOOR = 1e-9


class RewardScheme(str, enum.Enum):
    INDEPENDENT = "independent"
    COOPERATIVE = "cooperative"
    COMPETITIVE = "competitive"


@dataclass(frozen=True)
class RewardSet:
    raw: np.ndarray
    shaped: np.ndarray


def remaining_utility(holdings: float, steps_remaining: int, lam: float, params: MarketParams) -> float:
    """Utility of optimally liquidating ``holdings`` over the remaining periods."""
    if steps_remaining <= 0 or holdings <= 0:
        return 0.0
    return optimal_utility(holdings, lam, params.with_trades(steps_remaining))


def utility_reward(
    holdings_before: float,
    holdings_after: float,
    steps_remaining_before: int,
    lam: float,
    params: MarketParams,
    normalized: bool = True,
    reference_shares: float | None = None,
) -> tuple[float, bool]:
    """Return (reward, guard_triggered).

    The normalized reward divides by the utility before the step unless that
    utility is below ``1e-9 * epsilon * reference_shares`` (defaults to the
    market's total shares), in which case the unnormalized difference is
    returned and the flag is set.
    """
    if steps_remaining_before < 1:
        raise InvalidParameterError("steps_remaining_before must be >= 1")
    if holdings_after > holdings_before:
        raise InvalidParameterError("holdings cannot increase")
    u_before = remaining_utility(holdings_before, steps_remaining_before, lam, params)
    u_after = remaining_utility(holdings_after, steps_remaining_before - 1, lam, params)
    reward = u_before - u_after
    if not normalized:
        return reward, False
    ref = params.total_shares if reference_shares is None else reference_shares
    if abs(u_before) < NORMALIZATION_FLOOR * params.epsilon * ref:
        return reward, True
    return reward / u_before, False


def shape_rewards(scheme: RewardScheme | str, raw: Sequence[float]) -> RewardSet:
    raw = np.asarray(raw, dtype=float)
    scheme = RewardScheme(scheme)
    if scheme is RewardScheme.INDEPENDENT:
        return RewardSet(raw=raw, shaped=raw.copy())
    if raw.size != 2:
        raise UnsupportedConfigurationError(f"{scheme.value} shaping needs exactly 2 agents, got {raw.size}")
    r1, r2 = raw
    if scheme is RewardScheme.COOPERATIVE:
        mean = (r1 + r2) / 2.0
        shaped = np.array([mean, mean])
    elif r1 > r2:
        shaped = np.array([r1, r2 - r1])
    else:
        shaped = np.array([r1 - r2, r2])
    return RewardSet(raw=raw, shaped=shaped)
