"""Command line surface: specs, exit codes, output formats, seeding."""

import json
import subprocess
import sys

import pytest

from corpus import weighted_triangle
from treespark.cli import (
    EXIT_BAD_GRAPH,
    EXIT_FAIL,
    EXIT_PASS,
    EXIT_SIZE_GUARD,
    EXIT_USAGE,
    main,
    parse_graph_spec,
)
from treespark.graph import complete_graph, write_graph
from treespark.treesample import parse_tree_line


def test_parse_graph_spec_constructors():
    assert parse_graph_spec("k:5", 0).m == 10
    assert parse_graph_spec("ring:6", 0).m == 6
    g = parse_graph_spec("cliquestar:2,3", 0)
    assert g.n == 5
    assert parse_graph_spec("er:8,0.5", 3).n == 8


def test_parse_graph_spec_file(tmp_path):
    path = tmp_path / "tri.graph"
    write_graph(weighted_triangle(), str(path))
    g = parse_graph_spec(str(path), 0)
    assert g.edges == weighted_triangle().edges


def test_sample_deterministic_output(capsys):
    assert main(["sample", "--graph", "k:5", "--count", "3", "--seed", "7"]) == EXIT_PASS
    first = capsys.readouterr().out
    assert main(["sample", "--graph", "k:5", "--count", "3", "--seed", "7"]) == EXIT_PASS
    second = capsys.readouterr().out
    assert first == second
    lines = first.strip().split("\n")
    assert len(lines) == 3
    g = complete_graph(5)
    for line in lines:
        tree = parse_tree_line(line, g, "original")
        assert len(tree.edge_ids) == 4


def test_sample_to_file(tmp_path, capsys):
    out = tmp_path / "trees.txt"
    code = main(["sample", "--graph", "ring:8", "--count", "2", "--seed", "1", "--out", str(out)])
    assert code == EXIT_PASS
    assert capsys.readouterr().out == ""
    assert len(out.read_text().strip().split("\n")) == 2


def test_certify_tree_graph_passes(tmp_path, capsys):
    path = tmp_path / "path.graph"
    from corpus import path_graph

    write_graph(path_graph(5), str(path))
    code = main(
        ["certify", "--graph", str(path), "--eps", "0.1", "--t", "1", "--trials", "3", "--seed", "2"]
    )
    captured = capsys.readouterr()
    assert code == EXIT_PASS
    payload = json.loads(captured.out)
    assert payload["pass_fraction"] == 1.0
    assert payload["run_config"]["command"] == "certify"
    assert payload["run_config"]["graph"] == str(path)
    assert "PASS" in captured.err


def test_certify_json_flag_silences_stderr(tmp_path, capsys):
    path = tmp_path / "path.graph"
    from corpus import path_graph

    write_graph(path_graph(4), str(path))
    code = main(
        [
            "certify", "--graph", str(path), "--eps", "0.1", "--t", "1",
            "--trials", "2", "--seed", "2", "--json",
        ]
    )
    captured = capsys.readouterr()
    assert code == EXIT_PASS
    assert captured.err == ""
    json.loads(captured.out)


def test_certify_single_tree_fails_gate(capsys):
    code = main(
        [
            "certify", "--graph", "k:200", "--eps", "0.5", "--t", "1",
            "--trials", "5", "--seed", "0", "--jobs", "1", "--json",
        ]
    )
    captured = capsys.readouterr()
    assert code == EXIT_FAIL
    payload = json.loads(captured.out)
    assert payload["pass_fraction"] == 0.0


def test_certify_writes_csv(tmp_path, capsys):
    csv_path = tmp_path / "ext.csv"
    code = main(
        [
            "certify", "--graph", "k:8", "--eps", "0.5", "--t", "2", "--trials", "3",
            "--seed", "0", "--jobs", "1", "--json", "--csv", str(csv_path),
        ]
    )
    capsys.readouterr()
    assert code in (EXIT_PASS, EXIT_FAIL)
    lines = csv_path.read_text().strip().split("\n")
    assert lines[0] == "trial,seed,lambda_min,lambda_max"
    assert len(lines) == 4


def test_diag_marginals_pass_and_guard(capsys):
    assert main(["diag", "marginals", "--graph", "k:4"]) == EXIT_PASS
    payload = json.loads(capsys.readouterr().out)
    assert payload["passed"] is True
    assert payload["forests"] > 0
    # K_6 has 15 edges, past the exhaustive-conditioning cap
    assert main(["diag", "marginals", "--graph", "k:6"]) == EXIT_SIZE_GUARD


def test_diag_martingale_with_dump(tmp_path, capsys):
    dump = tmp_path / "traces.txt"
    code = main(
        ["diag", "martingale", "--graph", "k:5", "--seeds", "10", "--seed", "3", "--dump", str(dump)]
    )
    payload = json.loads(capsys.readouterr().out)
    assert code == EXIT_PASS
    assert payload["failures"] == 0
    lines = dump.read_text().strip().split("\n")
    assert len(lines) == 10 * 5  # 4 steps plus a JSON summary per trace
    json.loads(lines[4])


def test_diag_reverse_chernoff(capsys):
    assert main(["diag", "reverse-chernoff"]) == EXIT_PASS
    payload = json.loads(capsys.readouterr().out)
    assert payload["triples"] >= 200
    assert payload["failures"] == 0


def test_diag_stirling(capsys):
    assert main(["diag", "stirling", "--kmax", "40"]) == EXIT_PASS
    payload = json.loads(capsys.readouterr().out)
    assert payload["pairs"] == sum(k - 1 for k in range(2, 41))


def test_diag_matrix_fact(capsys):
    assert main(["diag", "matrix-fact", "--pairs", "50", "--dim", "6", "--seed", "5"]) == EXIT_PASS
    payload = json.loads(capsys.readouterr().out)
    assert payload["failures"] == 0


def test_diag_to_file(tmp_path, capsys):
    out = tmp_path / "diag.json"
    assert main(["diag", "marginals", "--graph", "k:4", "--out", str(out)]) == EXIT_PASS
    assert capsys.readouterr().out == ""
    assert json.loads(out.read_text())["passed"] is True


def test_bad_specs_exit_usage(capsys):
    assert main(["sample", "--graph", "k:abc"]) == EXIT_USAGE
    assert main(["sample", "--graph", "/nonexistent/file.graph"]) == EXIT_USAGE
    assert main(["sample", "--graph", "torus:4"]) == EXIT_USAGE
    capsys.readouterr()


def test_malformed_file_exit_usage(tmp_path, capsys):
    bad = tmp_path / "bad.graph"
    bad.write_text("not a graph\n")
    assert main(["sample", "--graph", str(bad)]) == EXIT_USAGE
    capsys.readouterr()


def test_disconnected_file_exit_bad_graph(tmp_path, capsys):
    disc = tmp_path / "disc.graph"
    disc.write_text("4 2\n0 1 1.0\n2 3 1.0\n")
    assert main(["sample", "--graph", str(disc)]) == EXIT_BAD_GRAPH
    capsys.readouterr()


def test_env_seed_default(monkeypatch, capsys):
    monkeypatch.setenv("TREESPARK_SEED", "123")
    assert main(["sample", "--graph", "k:6"]) == EXIT_PASS
    from_env = capsys.readouterr().out
    assert main(["sample", "--graph", "k:6", "--seed", "123"]) == EXIT_PASS
    explicit = capsys.readouterr().out
    assert from_env == explicit


def test_env_seed_garbage_rejected(monkeypatch, capsys):
    monkeypatch.setenv("TREESPARK_SEED", "not-a-number")
    assert main(["sample", "--graph", "k:4"]) == EXIT_USAGE
    capsys.readouterr()


def test_version_flag():
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0


def test_installed_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "treespark.cli", "sample", "--graph", "k:4", "--seed", "1"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout.strip()
