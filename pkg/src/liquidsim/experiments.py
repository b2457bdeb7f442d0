"""
Experiment presets: analytic tables, theorem checks and the training
scenarios behind each figure. Every preset is a pure function of
(config, seed) to CSV files.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .analytic import (
    MarketParams,
    evaluate_trajectory,
    kappa_tilde,
    optimal_expected_shortfall,
    optimal_trajectory,
    verify_theorems,
)
from .config import AgentConfig, ExperimentConfig
from .csvout import CsvArtifact, emit_csv
from .ddpg import DdpgAgent, LinearSeller, PolicyEvaluation, TrainingLog, evaluate_policy, run_training
from .errors import ConfigError
from .market import AgentSpec, MarketEnv, observation_dim
from .rewards import RewardScheme

ANALYTIC_LAMBDAS = (1e-4, 1e-6, 1e-9)
SPLIT_FRACTIONS = tuple(round(0.1 * i, 1) for i in range(1, 10))
THEOREM_LAMBDA_PAIRS = ((1e-4, 1e-9), (1e-6, 1e-9), (1e-6, 1e-6), (1e-4, 1e-4))
TRAILING_WINDOW = 100
EVAL_SEED_OFFSET = 1_000_003


@dataclass
class RunResult:
    label: str
    params: MarketParams
    specs: list[AgentSpec]
    log: TrainingLog
    evaluation: PolicyEvaluation
    agents: list[DdpgAgent]

    def trailing(self, window: int = TRAILING_WINDOW) -> np.ndarray:
        return self.log.trailing_mean(window)


def env_factory(params: MarketParams, specs: Sequence[AgentSpec], lag_depth: int, noiseless: bool = False):
    def make(seed) -> MarketEnv:
        return MarketEnv(params, specs, lag_depth=lag_depth, seed=seed, noiseless=noiseless)

    return make


def build_agents(cfg: ExperimentConfig, agents: Sequence[AgentConfig], seed: int) -> list[DdpgAgent]:
    """Learners are seeded by (seed, position) so paired scenarios share initial networks."""
    obs_dim = observation_dim(cfg.training.lag_depth)
    n = cfg.market.num_trades
    out = []
    for j, a in enumerate(agents):
        override = LinearSeller(n) if a.policy == "linear" else None
        out.append(DdpgAgent(obs_dim, cfg.ddpg, seed=[seed, j + 1], policy_override=override))
    return out


def run_scenario(
    cfg: ExperimentConfig,
    agents: Sequence[AgentConfig],
    scheme: RewardScheme | str,
    label: str,
    episodes: int | None = None,
    seed: int | None = None,
) -> RunResult:
    seed = cfg.training.seed if seed is None else seed
    episodes = cfg.training.episodes if episodes is None else episodes
    params = cfg.params()
    specs = [AgentSpec(j + 1, a.shares, a.risk_aversion) for j, a in enumerate(agents)]
    factory = env_factory(params, specs, cfg.training.lag_depth)
    learners = build_agents(cfg, agents, seed)
    log = run_training(factory, learners, scheme, episodes, seed, normalized=cfg.training.normalized_reward)
    evaluation = evaluate_policy(factory, learners, cfg.training.eval_episodes, seed + EVAL_SEED_OFFSET)
    return RunResult(label, params, specs, log, evaluation, learners)


def _require(cfg: ExperimentConfig, count: int, preset: str) -> list[AgentConfig] | None:
    if cfg.agents is None:
        return None
    if len(cfg.agents) != count:
        raise ConfigError("agents", f"preset {preset} needs exactly {count} agents, got {len(cfg.agents)}")
    return cfg.agents


def _lam_label(lam: float) -> str:
    return f"{lam:.0e}"


# ---------------------------------------------------------------- analytic

def analytic_preset(cfg: ExperimentConfig, out: Path) -> list[CsvArtifact]:
    p = cfg.params()
    X = p.total_shares
    trajs = {lam: optimal_trajectory(X, lam, p) for lam in ANALYTIC_LAMBDAS}
    cols = ["step"] + [f"holdings_lambda_{_lam_label(l)}" for l in ANALYTIC_LAMBDAS]
    rows = [
        {"step": k, **{c: trajs[l].holdings[k] for c, l in zip(cols[1:], ANALYTIC_LAMBDAS)}}
        for k in range(p.num_trades + 1)
    ]
    a = emit_csv(rows, cols, out / "analytic_trajectories.csv")
    cols2 = ["lambda", "kappa", "expected_shortfall", "variance", "utility"]
    rows2 = []
    for lam in ANALYTIC_LAMBDAS:
        u = evaluate_trajectory(trajs[lam], lam, p)
        rows2.append({
            "lambda": lam, "kappa": kappa_tilde(lam, p), "expected_shortfall": u.expected_shortfall,
            "variance": u.variance, "utility": u.utility,
        })
    b = emit_csv(rows2, cols2, out / "analytic_shortfall.csv")
    return [a, b]


def theorem_preset(cfg: ExperimentConfig, out: Path, lam: float = 1e-6):
    p = cfg.params()
    X = p.total_shares
    splits = [[X]] + [[f * X, X - f * X] for f in SPLIT_FRACTIONS] + [[X / 3, X / 3, X - 2 * X / 3]]
    report = verify_theorems(p, splits, THEOREM_LAMBDA_PAIRS, lam=lam)
    cols = ["theorem", "case", "lhs", "rhs", "margin", "strict", "passed"]
    return report, [emit_csv(report.rows(), cols, out / "theorems.csv")]


# ---------------------------------------------------------------- training

def _curve_rows(results: Sequence[RunResult], names: Sequence[str]):
    cols = ["episode"]
    for r, name in zip(results, names):
        J = len(r.specs)
        cols += [f"{name}_agent{j + 1}" for j in range(J)] + [f"{name}_total"]
    rows = []
    episodes = min(len(r.log) for r in results) if results else 0
    for ep in range(episodes):
        row = {"episode": ep}
        for r, name in zip(results, names):
            s = r.log.shortfalls[ep]
            for j, v in enumerate(s):
                row[f"{name}_agent{j + 1}"] = v
            row[f"{name}_total"] = float(s.sum())
        rows.append(row)
    return rows, cols


def _trajectory_columns(columns: dict[str, np.ndarray], out: Path, name: str) -> CsvArtifact:
    cols = ["step", *columns]
    n = min(len(v) for v in columns.values())
    rows = [{"step": k, **{c: v[k] for c, v in columns.items()}} for k in range(n)]
    return emit_csv(rows, cols, out / name)


def _summary(results: Sequence[RunResult], out: Path, name: str) -> CsvArtifact:
    cols = ["scenario", "agent", "shares", "risk_aversion", "trailing_mean_shortfall", "eval_mean_shortfall",
            "eval_std_shortfall", "analytic_optimal_shortfall"]
    rows = []
    for r in results:
        trailing = r.trailing() if len(r.log) else np.full(len(r.specs), np.nan)
        for j, spec in enumerate(r.specs):
            rows.append({
                "scenario": r.label, "agent": spec.agent_id, "shares": spec.initial_shares,
                "risk_aversion": spec.risk_aversion, "trailing_mean_shortfall": trailing[j],
                "eval_mean_shortfall": r.evaluation.mean_shortfall[j],
                "eval_std_shortfall": r.evaluation.std_shortfall[j],
                "analytic_optimal_shortfall": optimal_expected_shortfall(
                    spec.initial_shares, spec.risk_aversion, r.params
                ),
            })
    return emit_csv(rows, cols, out / name)


def train_preset(cfg: ExperimentConfig, out: Path) -> list[CsvArtifact]:
    agents = cfg.effective_agents()
    r = run_scenario(cfg, agents, cfg.training.scheme, "train")
    rows, cols = _curve_rows([r], ["train"])
    for ep, row in enumerate(rows):
        for j in range(len(agents)):
            row[f"reward_agent{j + 1}"] = r.log.shaped_rewards[ep][j]
            row[f"critic_loss_agent{j + 1}"] = r.log.critic_losses[ep][j]
    cols += [f"reward_agent{j + 1}" for j in range(len(agents))]
    cols += [f"critic_loss_agent{j + 1}" for j in range(len(agents))]
    curve = emit_csv(rows, cols, out / "training_curve.csv")
    traj = _trajectory_columns(
        {f"holdings_agent{j + 1}": r.evaluation.mean_trajectory[:, j] for j in range(len(agents))},
        out, "trajectory.csv",
    )
    return [curve, traj, _summary([r], out, "summary.csv")]


def evaluate_preset(cfg: ExperimentConfig, out: Path) -> list[CsvArtifact]:
    """Greedy evaluation after ``training.episodes`` of training (0 = untrained policies)."""
    agents = cfg.effective_agents()
    r = run_scenario(cfg, agents, cfg.training.scheme, "evaluate")
    cols = ["agent", "mean_shortfall", "std_shortfall"]
    rows = [
        {"agent": j + 1, "mean_shortfall": r.evaluation.mean_shortfall[j], "std_shortfall": r.evaluation.std_shortfall[j]}
        for j in range(len(agents))
    ]
    ev = emit_csv(rows, cols, out / "evaluation.csv")
    traj = _trajectory_columns(
        {f"holdings_agent{j + 1}": r.evaluation.mean_trajectory[:, j] for j in range(len(agents))},
        out, "trajectory.csv",
    )
    return [ev, traj]


def fig2_runs(cfg: ExperimentConfig, seed: int | None = None) -> tuple[RunResult, RunResult]:
    """Agent A alone with the whole block vs. B1 + B2 splitting it in one market."""
    X = cfg.market.shares
    split = _require(cfg, 2, "fig2") or [AgentConfig(0.3 * X, 1e-6), AgentConfig(0.7 * X, 1e-6)]
    lam = split[0].risk_aversion
    whole = [AgentConfig(sum(a.shares for a in split), lam)]
    a = run_scenario(cfg, whole, RewardScheme.INDEPENDENT, "A", seed=seed)
    b = run_scenario(cfg, split, RewardScheme.INDEPENDENT, "B", seed=seed)
    return a, b


def fig2_preset(cfg: ExperimentConfig, out: Path) -> list[CsvArtifact]:
    a, b = fig2_runs(cfg)
    p = cfg.params()
    rows, cols = _curve_rows([a, b], ["A", "B"])
    curves = emit_csv(rows, cols, out / "fig2_curves.csv")
    lam = a.specs[0].risk_aversion
    cols2 = ["source", "E_A", "E_B1", "E_B2", "E_B1_plus_B2"]
    eA = optimal_expected_shortfall(a.specs[0].initial_shares, lam, p)
    eB = [optimal_expected_shortfall(s.initial_shares, s.risk_aversion, p) for s in b.specs]
    rows2 = [{"source": "analytic", "E_A": eA, "E_B1": eB[0], "E_B2": eB[1], "E_B1_plus_B2": eB[0] + eB[1]}]
    if len(a.log):
        tA, tB = a.trailing(), b.trailing()
        rows2.append({"source": "trained_trailing", "E_A": tA[0], "E_B1": tB[0], "E_B2": tB[1],
                      "E_B1_plus_B2": float(tB.sum())})
    mA, mB = a.evaluation.mean_shortfall, b.evaluation.mean_shortfall
    rows2.append({"source": "trained_eval", "E_A": mA[0], "E_B1": mB[0], "E_B2": mB[1],
                  "E_B1_plus_B2": float(mB.sum())})
    return [curves, emit_csv(rows2, cols2, out / "fig2_summary.csv")]


def fig3_runs(cfg: ExperimentConfig, seed: int | None = None) -> tuple[RunResult, RunResult, RunResult]:
    X = cfg.market.shares
    pair = _require(cfg, 2, "fig3") or [AgentConfig(0.5 * X, 1e-4), AgentConfig(0.5 * X, 1e-9)]
    a1 = run_scenario(cfg, [pair[0]], RewardScheme.INDEPENDENT, "A1", seed=seed)
    a2 = run_scenario(cfg, [pair[1]], RewardScheme.INDEPENDENT, "A2", seed=seed)
    b = run_scenario(cfg, pair, RewardScheme.INDEPENDENT, "B", seed=seed)
    return a1, a2, b


def fig3_preset(cfg: ExperimentConfig, out: Path) -> list[CsvArtifact]:
    a1, a2, b = fig3_runs(cfg)
    p = cfg.params()
    s1, s2 = b.specs
    cols = {
        f"analytic_lambda_{_lam_label(s1.risk_aversion)}": optimal_trajectory(s1.initial_shares, s1.risk_aversion, p).holdings,
        f"analytic_lambda_{_lam_label(s2.risk_aversion)}": optimal_trajectory(s2.initial_shares, s2.risk_aversion, p).holdings,
        "single_A1": a1.evaluation.mean_trajectory[:, 0],
        "single_A2": a2.evaluation.mean_trajectory[:, 0],
        "joint_B1": b.evaluation.mean_trajectory[:, 0],
        "joint_B2": b.evaluation.mean_trajectory[:, 1],
    }
    return [_trajectory_columns(cols, out, "fig3_trajectories.csv"), _summary([a1, a2, b], out, "fig3_summary.csv")]


def fig4_runs(cfg: ExperimentConfig, seed: int | None = None, schemes=tuple(RewardScheme)) -> dict[str, RunResult]:
    """Same agents, markets and seeds under each reward scheme."""
    X = cfg.market.shares
    pair = _require(cfg, 2, "fig4") or [AgentConfig(0.5 * X, 1e-6), AgentConfig(0.5 * X, 1e-6)]
    if any(a.policy != "learner" for a in pair):
        raise ConfigError("agents", "fig4 needs two learners")
    return {RewardScheme(s).value: run_scenario(cfg, pair, s, RewardScheme(s).value, seed=seed) for s in schemes}


def fig4_preset(cfg: ExperimentConfig, out: Path) -> list[CsvArtifact]:
    runs = fig4_runs(cfg)
    results = list(runs.values())
    rows, cols = _curve_rows(results, list(runs))
    curves = emit_csv(rows, cols, out / "fig4_curves.csv")
    traj = {}
    for name, r in runs.items():
        traj[f"{name}_agent1"] = r.evaluation.mean_trajectory[:, 0]
        traj[f"{name}_agent2"] = r.evaluation.mean_trajectory[:, 1]
    return [curves, _trajectory_columns(traj, out, "fig4_trajectories.csv"), _summary(results, out, "fig4_summary.csv")]


def fig5_runs(cfg: ExperimentConfig, seed: int | None = None) -> tuple[RunResult, RunResult]:
    """Host learner alone vs. the same host facing a frozen straight-line seller."""
    X = cfg.market.shares
    pair = _require(cfg, 2, "fig5") or [AgentConfig(0.5 * X, 1e-6), AgentConfig(0.5 * X, 1e-9, "linear")]
    if [a.policy for a in pair] != ["learner", "linear"]:
        raise ConfigError("agents", "fig5 needs a learner host (first) and a linear competitor (second)")
    alone = run_scenario(cfg, [pair[0]], RewardScheme.INDEPENDENT, "host_alone", seed=seed)
    contested = run_scenario(cfg, pair, RewardScheme.INDEPENDENT, "host_with_competitor", seed=seed)
    return alone, contested


def fig5_preset(cfg: ExperimentConfig, out: Path) -> list[CsvArtifact]:
    alone, contested = fig5_runs(cfg)
    p = cfg.params()
    host = contested.specs[0]
    cols = {
        "analytic_host_alone": optimal_trajectory(host.initial_shares, host.risk_aversion, p).holdings,
        "host_alone": alone.evaluation.mean_trajectory[:, 0],
        "host_with_competitor": contested.evaluation.mean_trajectory[:, 0],
        "competitor": contested.evaluation.mean_trajectory[:, 1],
    }
    return [_trajectory_columns(cols, out, "fig5_trajectories.csv"), _summary([alone, contested], out, "fig5_summary.csv")]


def with_overrides(cfg: ExperimentConfig, episodes: int | None = None, seed: int | None = None) -> ExperimentConfig:
    training = cfg.training
    if episodes is not None:
        training = dataclasses.replace(training, episodes=episodes)
    if seed is not None:
        training = dataclasses.replace(training, seed=seed)
    return dataclasses.replace(cfg, training=training).validate()
