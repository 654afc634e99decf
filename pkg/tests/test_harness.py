import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from ptrnet_ea import evolution as ev
from ptrnet_ea import ptrnet, tsp
from ptrnet_ea.cli import main
from ptrnet_ea.exceptions import CheckpointError, ConfigError, ReportError
from ptrnet_ea.harness import checkpoint as ck
from ptrnet_ea.harness import records, runner
from ptrnet_ea.harness.config import (
    RunConfig,
    config_digest,
    format_run_config,
    load_run_config,
    parse_run_config,
)

CONFIG_TEXT = """\
# tiny run
train = train.tsp
test = test.tsp
out = run
tag = tiny
seed = 4
embedding_size = 4
hidden_size = 8
num_layers = 1
population_size = 3
max_iterations = 9
batch_size = 8
epoch_length = 3
checkpoint_every = 2
record_wallclock = false
"""


@pytest.fixture
def workspace(tmp_path):
    assert main(["gen", "--n", "8", "--count", "40", "--seed", "1", "--split", "train", "--out", str(tmp_path / "train.tsp")]) == 0
    assert main(["gen", "--n", "8", "--count", "12", "--seed", "1", "--split", "test", "--out", str(tmp_path / "test.tsp")]) == 0
    (tmp_path / "run.cfg").write_text(CONFIG_TEXT)
    return tmp_path


def cfg_for(ws: Path, out: str, **changes) -> RunConfig:
    cfg = replace(load_run_config(ws / "run.cfg"), out_dir=ws / out)
    return replace(cfg, **changes)


class TestConfig:
    def test_parse(self, tmp_path):
        cfg = parse_run_config(CONFIG_TEXT, tmp_path)
        assert cfg.net_config == ptrnet.NetworkConfig(4, 8, 1)
        assert cfg.ncs_config.population_size == 3 and cfg.ncs_config.epoch_length == 3
        assert cfg.train_path == (tmp_path / "train.tsp").resolve()
        assert cfg.record_wallclock is False and cfg.seed == 4

    def test_format_round_trip(self, tmp_path):
        cfg = parse_run_config(CONFIG_TEXT, tmp_path)
        assert parse_run_config(format_run_config(cfg), tmp_path) == cfg

    @pytest.mark.parametrize(
        "line, message",
        [("colour = red", "unknown key"), ("seed 3", "key = value"), ("record_wallclock = maybe", "record_wallclock")],
    )
    def test_errors(self, line, message):
        with pytest.raises(ConfigError, match=message):
            parse_run_config(line)

    def test_digest_ignores_time_budget_only(self):
        net = ptrnet.NetworkConfig(4, 8, 1)
        base = ev.NcsConfig()
        assert config_digest(net, base) == config_digest(net, replace(base, time_budget=5.0))
        assert config_digest(net, base) != config_digest(net, replace(base, sigma_init=0.1))


class TestCheckpoint:
    @pytest.fixture
    def state(self, workspace):
        cfg = cfg_for(workspace, "ck")
        runner.run_training(cfg)
        return ck.load_checkpoint(workspace / "ck" / "checkpoint.bin"), workspace / "ck" / "checkpoint.bin"

    def test_save_load_save_identical(self, state, tmp_path):
        loaded, path = state
        ck.save_checkpoint(tmp_path / "again.bin", loaded["state"], loaded["net_config"], loaded["ncs_config"], loaded["seed"])
        assert (tmp_path / "again.bin").read_bytes() == path.read_bytes()

    def test_contents(self, state):
        loaded, _ = state
        s = loaded["state"]
        assert s.t == 9 and len(s.population) == 3
        assert s.best_params.dtype == np.float32
        assert s.best_fitness == min(r.best_fitness for r in s.record.rows)
        assert loaded["header"]["rng"]["next_iteration"] == 9

    @pytest.mark.parametrize("where", [0, 30, -40, -1])
    def test_corruption_detected(self, state, where):
        _, path = state
        data = bytearray(path.read_bytes())
        data[where] ^= 0xFF
        with pytest.raises(CheckpointError):
            ck.decode_checkpoint(bytes(data))

    def test_truncated(self, state):
        _, path = state
        with pytest.raises(CheckpointError, match="truncated"):
            ck.decode_checkpoint(path.read_bytes()[:20])


class TestTraining:
    def test_resume_matches_uninterrupted(self, workspace):
        runner.run_training(cfg_for(workspace, "full"))
        interrupted = cfg_for(workspace, "part")
        runner.run_training(interrupted, stop_after=4)
        assert len(records.read_metrics(workspace / "part" / "metrics.csv")) == 4
        runner.run_training(interrupted, resume=True)
        for name in ("metrics.csv", "checkpoint.bin"):
            assert (workspace / "part" / name).read_bytes() == (workspace / "full" / name).read_bytes()

    def test_metrics_rows_have_no_gaps(self, workspace):
        runner.run_training(cfg_for(workspace, "r"))
        rows = records.read_metrics(workspace / "r" / "metrics.csv")
        assert [int(r["t"]) for r in rows] == list(range(9))
        assert tuple(rows[0]) == records.METRICS_COLUMNS
        assert all(r["wallclock_ms"] == "" for r in rows)

    def test_wallclock_recorded_by_default(self, workspace):
        runner.run_training(cfg_for(workspace, "w", record_wallclock=True))
        rows = records.read_metrics(workspace / "w" / "metrics.csv")
        assert all(float(r["wallclock_ms"]) >= 0 for r in rows)

    def test_resume_refuses_other_config(self, workspace):
        runner.run_training(cfg_for(workspace, "x"), stop_after=2)
        other = cfg_for(workspace, "x")
        other = replace(other, ncs_config=replace(other.ncs_config, sigma_init=0.2))
        with pytest.raises(CheckpointError, match="different configuration"):
            runner.run_training(other, resume=True)

    def test_resume_refuses_corrupt_checkpoint(self, workspace):
        runner.run_training(cfg_for(workspace, "c"), stop_after=2)
        path = workspace / "c" / "checkpoint.bin"
        path.write_bytes(path.read_bytes()[:-1] + b"\x00")
        with pytest.raises(CheckpointError):
            runner.run_training(cfg_for(workspace, "c"), resume=True)

    def test_run_json(self, workspace):
        runner.run_training(cfg_for(workspace, "j"))
        meta = json.loads((workspace / "j" / "run.json").read_text())
        assert meta["complete"] and meta["iterations"] == 9 and meta["train_n"] == 8
        assert meta["final_best_fitness"] <= meta["initial_best_fitness"]


class TestCli:
    def test_gen_is_deterministic(self, tmp_path):
        args = ["gen", "--n", "20", "--count", "500", "--seed", "7", "--split", "test"]
        assert main(args + ["--out", str(tmp_path / "a.tsp")]) == 0
        assert main(args + ["--out", str(tmp_path / "b.tsp")]) == 0
        assert (tmp_path / "a.tsp").read_bytes() == (tmp_path / "b.tsp").read_bytes()
        assert (tmp_path / "a.tsp").read_text().startswith("TSPSET v1 n=20 count=500 seed=7 split=test")

    def test_gen_rejects_n1(self, tmp_path, capsys):
        assert main(["gen", "--n", "1", "--count", "3", "--out", str(tmp_path / "x.tsp")]) != 0
        assert "n must be >= 2" in capsys.readouterr().err

    def test_gen_preset(self, tmp_path):
        assert main(["gen", "--preset", "tsp100", "--count", "2", "--out", str(tmp_path / "p.tsp")]) == 0
        assert tsp.read_dataset(tmp_path / "p.tsp").n == 100

    def test_train_eval_baseline_report(self, workspace, capsys):
        ws = str(workspace)
        assert main(["train", f"{ws}/run.cfg", "--out", f"{ws}/cli", "--threads", "1"]) == 0
        assert main(["eval", f"{ws}/cli/checkpoint.bin", f"{ws}/test.tsp", "--mode", "portfolio", "--out", f"{ws}/cli/p.report.json"]) == 0
        assert main(["eval", f"{ws}/cli/checkpoint.bin", f"{ws}/test.tsp", "--out", f"{ws}/cli/b.report.json"]) == 0
        for m in ("nn", "two_opt"):
            assert main(["baseline", f"{ws}/test.tsp", "--method", m, "--out", f"{ws}/cli/{m}.report.json"]) == 0
        load = lambda name: json.loads((workspace / "cli" / name).read_text())  # noqa: E731
        assert load("two_opt.report.json")["mean"] <= load("nn.report.json")["mean"]
        assert load("p.report.json")["mean"] <= load("b.report.json")["mean"]
        assert load("b.report.json")["train_n"] == 8

        assert main(["report", f"{ws}/cli", "--out", f"{ws}/rep1"]) == 0
        assert main(["report", f"{ws}/cli", "--out", f"{ws}/rep2"]) == 0
        for name in ("table.csv", "curves.json"):
            assert (workspace / "rep1" / name).read_bytes() == (workspace / "rep2" / name).read_bytes()
        table = (workspace / "rep1" / "table.csv").read_text().splitlines()
        assert len(table) == 1 + 5
        assert list(json.loads((workspace / "rep1" / "curves.json").read_text())) == ["tiny"]

    def test_oracle_refused_for_large_n(self, tmp_path, capsys):
        main(["gen", "--n", "11", "--count", "2", "--out", str(tmp_path / "big.tsp")])
        assert main(["baseline", str(tmp_path / "big.tsp"), "--method", "oracle"]) != 0
        assert "oracle refused" in capsys.readouterr().err

    def test_missing_file(self, tmp_path, capsys):
        assert main(["baseline", str(tmp_path / "nope.tsp"), "--method", "nn"]) != 0
        assert "error" in capsys.readouterr().err


class TestEvalAndReport:
    def test_best_mode_equals_plain_batch_decode(self, workspace):
        cfg = cfg_for(workspace, "one")
        runner.run_training(cfg)
        best = runner.evaluate_checkpoint(workspace / "one" / "checkpoint.bin", workspace / "test.tsp", "best")
        port = runner.evaluate_checkpoint(workspace / "one" / "checkpoint.bin", workspace / "test.tsp", "portfolio")
        state = ck.load_checkpoint(workspace / "one" / "checkpoint.bin")["state"]
        coords = tsp.read_dataset(workspace / "test.tsp").coordinates()
        plain = tsp.tour_lengths(coords, ptrnet.decode_coordinates(coords, state.best_params, cfg.net_config))
        assert best["mean"] == pytest.approx(plain.mean(), abs=1e-12)
        assert best["best_ever"] == {k: best[k] for k in ("mean", "std", "count")}
        assert port["portfolio"]["mean_length"] == port["mean"]

    def test_schema_mismatch_lists_offenders(self, workspace):
        runner.run_training(cfg_for(workspace, "a"))
        (workspace / "b").mkdir()
        runner.run_baseline(workspace / "test.tsp", "nn", workspace / "b" / "nn.report.json")
        bad = workspace / "b" / "nn.report.json"
        doc = json.loads(bad.read_text())
        doc["schema_version"] = 99
        bad.write_text(json.dumps(doc))
        with pytest.raises(ReportError, match="nn.report.json"):
            runner.consolidate([workspace / "a", workspace / "b"], workspace / "out")

    def test_report_needs_runs(self, tmp_path):
        with pytest.raises(ReportError):
            runner.consolidate([], tmp_path)
        with pytest.raises(ReportError):
            runner.consolidate([tmp_path], tmp_path / "o")
