import csv

import numpy as np
import pytest

from liquidsim import experiments
from liquidsim.analytic import default_params
from liquidsim.cli import EXIT_CONFIG_ERROR, EXIT_OK, EXIT_VERIFICATION_FAILED, main, run_command
from liquidsim.config import (
    AgentConfig,
    ExperimentConfig,
    parse_config,
    serialize_config,
)
from liquidsim.csvout import emit_csv
from liquidsim.ddpg import DdpgConfig
from liquidsim.errors import ConfigError

TINY = """
training: {episodes: 2, eval_episodes: 2}
ddpg: {actor_hidden: [4], critic_hidden: [8], batch_size: 8, buffer_capacity: 200}
"""


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


class TestParseConfig:
    def test_empty_document_defaults(self):
        cfg = parse_config("")
        assert cfg.agents is None
        assert [(s.initial_shares, s.risk_aversion) for s in cfg.agent_specs()] == [(1e6, 1e-6)]
        assert cfg.training.lag_depth == 5 and cfg.training.episodes == 3000
        assert cfg.ddpg == DdpgConfig()
        p, ref = cfg.params(), default_params()
        assert (p.eta, p.gamma_perm, p.sigma, p.epsilon) == (ref.eta, ref.gamma_perm, ref.sigma, ref.epsilon)

    def test_split_accepted(self):
        cfg = parse_config("agents:\n  - {shares: 3.0e+5}\n  - {shares: 7.0e+5}\n")
        assert sum(a.shares for a in cfg.agents) == 1e6

    def test_negative_lambda_names_field(self):
        with pytest.raises(ConfigError) as err:
            parse_config("agents:\n  - {risk_aversion: -1}\n")
        assert err.value.key == "agents[0].risk_aversion"

    @pytest.mark.parametrize("text, key", [
        ("bogus: 1", "bogus"),
        ("training: {epochs: 3}", "training.epochs"),
        ("training: {episodes: 2.5}", "training.episodes"),
        ("training: {normalized_reward: 1}", "training.normalized_reward"),
        ("training: {scheme: cooperative}", "training.scheme"),
        ("training: {scheme: selfish}", "training.scheme"),
        ("market: {annual_vol: 0}", "market"),
        ("market: {num_trades: 0}", "market"),
        ("ddpg: {batch_size: 0}", "ddpg"),
        ("ddpg: {actor_hidden: []}", "ddpg.actor_hidden"),
        ("agents: []", "agents"),
        ("agents: {shares: 1}", "agents"),
        ("agents:\n  - {policy: random}", "agents[0].policy"),
        ("- 1\n- 2", "<document>"),
        ("training: [", "<document>"),
    ])
    def test_errors_carry_key(self, text, key):
        with pytest.raises(ConfigError) as err:
            parse_config(text)
        assert err.value.key == key

    @pytest.mark.parametrize("cfg", [
        ExperimentConfig(),
        ExperimentConfig(agents=[AgentConfig(3e5, 1e-4), AgentConfig(7e5, 1e-9, "linear")]),
        parse_config(TINY + "market: {price: 20.5, num_trades: 30, horizon_days: 15}\n"),
    ])
    def test_round_trip(self, cfg):
        assert parse_config(serialize_config(cfg)) == cfg


class TestEmitCsv:
    def test_header_only(self, tmp_path):
        art = emit_csv([], ["step", "holdings_agent_1"], tmp_path / "a.csv")
        assert (tmp_path / "a.csv").read_text() == "step,holdings_agent_1\n"
        assert art.rows == 0

    def test_formatting(self, tmp_path):
        rows = [{"a": 1, "b": 0.1, "c": True, "d": np.float64(1e-9), "e": "x"}]
        emit_csv(rows, "abcde", tmp_path / "f.csv")
        assert (tmp_path / "f.csv").read_text() == "a,b,c,d,e\n1,0.1,1,1e-09,x\n"

    def test_schema_mismatch(self, tmp_path):
        with pytest.raises(ValueError):
            emit_csv([{"a": 1}], ["a", "b"], tmp_path / "g.csv")

    def test_unwritable(self, tmp_path):
        (tmp_path / "file").write_text("")
        with pytest.raises(OSError):
            emit_csv([], ["a"], tmp_path / "file" / "x.csv")


class TestCli:
    def test_verify_theorems_exit_ok(self, tmp_path, capsys):
        assert main(["verify-theorems", "--out", str(tmp_path)]) == EXIT_OK
        rows = read_csv(tmp_path / "theorems.csv")
        assert len(rows) == 15 and all(r["passed"] == "1" for r in rows)

    def test_verify_failure_exit_code(self, tmp_path, monkeypatch):
        from liquidsim.analytic import TheoremCase, TheoremReport

        bad = TheoremReport("x", [TheoremCase("theorem_1", "forced", 1.0, 0.0, -1.0, False, True)])
        monkeypatch.setattr(experiments, "theorem_preset", lambda cfg, out: (bad, []))
        assert run_command("verify-theorems", ExperimentConfig(), tmp_path)[0] == EXIT_VERIFICATION_FAILED

    def test_config_error_exit_code(self, tmp_path, capsys):
        cfg = tmp_path / "bad.yaml"
        cfg.write_text("training: {scheme: selfish}\n")
        assert main(["train", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG_ERROR
        assert "training.scheme" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert main(["train", "--config", str(tmp_path / "nope.yaml")]) == EXIT_CONFIG_ERROR

    def test_preset_agent_count(self, tmp_path):
        cfg = tmp_path / "three.yaml"
        cfg.write_text(TINY + "agents: [{shares: 1.0e+5}, {shares: 1.0e+5}, {shares: 1.0e+5}]\n")
        assert main(["fig2", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG_ERROR

    def test_bad_command(self):
        with pytest.raises(SystemExit):
            main(["fig9"])

    def test_analytic(self, tmp_path):
        assert main(["analytic", "--out", str(tmp_path)]) == EXIT_OK
        rows = read_csv(tmp_path / "analytic_trajectories.csv")
        assert len(rows) == 61
        near_linear = np.array([float(r["holdings_lambda_1e-09"]) for r in rows])
        assert np.max(np.abs(near_linear - 1e6 * (1 - np.arange(61) / 60))) < 0.02 * 1e6
        front = np.array([float(r["holdings_lambda_1e-04"]) for r in rows])
        assert front[1] < near_linear[1]

    def test_fig2_ordering(self, tmp_path):
        cfg = tmp_path / "tiny.yaml"
        cfg.write_text(TINY)
        assert main(["fig2", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_OK
        analytic = read_csv(tmp_path / "fig2_summary.csv")[0]
        assert analytic["source"] == "analytic"
        assert float(analytic["E_A"]) > float(analytic["E_B1_plus_B2"])

    def test_overrides(self, tmp_path):
        cfg = tmp_path / "tiny.yaml"
        cfg.write_text(TINY)
        assert main(["train", "--config", str(cfg), "--episodes", "3", "--seed", "4", "--out", str(tmp_path)]) == 0
        assert len(read_csv(tmp_path / "training_curve.csv")) == 3
