import json

import pytest

from wayward.cli import main
from wayward.gateway import load_network, read_log
from wayward.network import validate_network


def run_cli(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def world_dir(tmp_path):
    out = tmp_path / "world"
    assert run_cli("gen", "--nodes", 30, "--buildings", 8, "--seed", 7, "--out", out) == 0
    return out


class TestGen:
    def test_deterministic_outputs(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        run_cli("gen", "--nodes", 50, "--buildings", 10, "--seed", 7, "--out", a)
        run_cli("gen", "--nodes", 50, "--buildings", 10, "--seed", 7, "--out", b)
        assert (a / "network.json").read_bytes() == (b / "network.json").read_bytes()
        assert (a / "scenario.json").read_bytes() == (b / "scenario.json").read_bytes()

    def test_generated_network_validates(self, world_dir):
        net = load_network(world_dir / "network.json")
        assert validate_network(net).ok

    def test_too_few_nodes_is_usage_error(self, tmp_path, capsys):
        assert run_cli("gen", "--nodes", 1, "--seed", 1, "--out", tmp_path / "x") == 2
        assert "--nodes" in capsys.readouterr().err


class TestSimulate:
    def test_writes_log_and_summary(self, world_dir, tmp_path, capsys):
        log_path = tmp_path / "run.log"
        code = run_cli(
            "simulate", "--scenario", world_dir / "scenario.json",
            "--ticks", 20, "--out-log", log_path,
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "simulated" in out and "deviations" in out
        log = read_log(log_path)
        assert len(log) > 0

    def test_zero_ticks_header_only(self, world_dir, tmp_path):
        log_path = tmp_path / "empty.log"
        assert run_cli(
            "simulate", "--scenario", world_dir / "scenario.json",
            "--ticks", 0, "--out-log", log_path,
        ) == 0
        assert log_path.read_text().startswith("wayward-log v1")
        assert len(read_log(log_path)) == 0

    def test_missing_scenario_exits_3_with_path(self, tmp_path, capsys):
        missing = tmp_path / "nope.json"
        assert run_cli("simulate", "--scenario", missing, "--out-log", tmp_path / "x.log") == 3
        assert str(missing) in capsys.readouterr().err


class TestIrl:
    def test_pipeline_agreement_in_range(self, world_dir, tmp_path, capsys):
        log_path = tmp_path / "run.log"
        run_cli("simulate", "--scenario", world_dir / "scenario.json", "--ticks", 40,
                "--out-log", log_path)
        out_path = tmp_path / "reward.json"
        code = run_cli(
            "irl", "--log", log_path, "--scenario", world_dir / "scenario.json",
            "--sparsity", 0.05, "--out", out_path,
        )
        assert code == 0
        doc = json.loads(out_path.read_text())
        assert 0.0 <= doc["validation_report"]["agreement"] <= 1.0
        assert "values" in doc["reward_estimate"]
        printed = capsys.readouterr().out
        assert "agreement" in printed

    def test_empty_log_exits_1(self, world_dir, tmp_path, capsys):
        log_path = tmp_path / "empty.log"
        run_cli("simulate", "--scenario", world_dir / "scenario.json", "--ticks", 0,
                "--out-log", log_path)
        code = run_cli(
            "irl", "--log", log_path, "--scenario", world_dir / "scenario.json",
            "--out", tmp_path / "r.json",
        )
        assert code == 1
        assert "EmptyLog" in capsys.readouterr().err


class TestIngest:
    def test_round_trip_over_node_coordinates(self, world_dir, tmp_path):
        net = load_network(world_dir / "network.json")
        trace_path = tmp_path / "trace.csv"
        picked = [net.nodes[0], net.nodes[5], net.nodes[9]]
        lines = ["timestamp,x,y"] + [
            f"{i},{n.x},{n.y}" for i, n in enumerate(picked)
        ]
        trace_path.write_text("\n".join(lines) + "\n")
        log_path = tmp_path / "gps.log"
        code = run_cli(
            "ingest", "--gps-csv", trace_path, "--network", world_dir / "network.json",
            "--out-log", log_path,
        )
        assert code == 0
        log = read_log(log_path)
        assert len(log) > 0
        assert all(e.source == 2 for e in log)

    def test_missing_header_exits_1(self, world_dir, tmp_path, capsys):
        trace_path = tmp_path / "bad.csv"
        trace_path.write_text("0,1,2\n")
        code = run_cli(
            "ingest", "--gps-csv", trace_path, "--network", world_dir / "network.json",
            "--out-log", tmp_path / "x.log",
        )
        assert code == 1
        assert "ParseError" in capsys.readouterr().err


class TestReduce:
    def test_reduces_subdivided_network(self, tmp_path):
        out = tmp_path / "world"
        run_cli("gen", "--nodes", 30, "--buildings", 5, "--seed", 3,
                "--subdivide", 3, "--out", out)
        reduced_path = tmp_path / "reduced.json"
        mapping_path = tmp_path / "mapping.json"
        code = run_cli(
            "reduce", "--network", out / "network.json",
            "--out", reduced_path, "--mapping", mapping_path,
        )
        assert code == 0
        original = load_network(out / "network.json")
        reduced = load_network(reduced_path)
        assert reduced.n_nodes < original.n_nodes
        mapping = json.loads(mapping_path.read_text())
        assert len(mapping) == original.n_nodes - reduced.n_nodes
