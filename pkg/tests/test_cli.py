import json

import numpy as np
import pytest

from semalg.cli import main
from semalg.fitting import random_sem, sample_data

FIG1_TEXT = """\
nodes: a b c d
a -> b
b -> d
a <-> c
a <-> d
b <-> c
"""


@pytest.fixture
def fig1_file(tmp_path):
    path = tmp_path / "fig1.txt"
    path.write_text(FIG1_TEXT)
    return str(path)


def test_enumerate_n2(tmp_path, capsys):
    out = tmp_path / "classes2.json"
    rc = main(["enumerate", "--nodes", "2", "--out", str(out), "--seed", "0"])
    assert rc == 0
    assert capsys.readouterr().out.strip() == "graphs=6 clusters=2 classes=2"
    data = json.loads(out.read_text())
    assert data["class_count"] == 2


def test_enumerate_deterministic(tmp_path, capsys):
    out1 = tmp_path / "a.json"
    out2 = tmp_path / "b.json"
    assert main(["enumerate", "--nodes", "3", "--out", str(out1), "--seed", "5"]) == 0
    assert main(["enumerate", "--nodes", "3", "--out", str(out2), "--seed", "5"]) == 0
    capsys.readouterr()
    assert out1.read_bytes() == out2.read_bytes()


def test_analyze_fig1(fig1_file, capsys):
    rc = main(["analyze", fig1_file])
    assert rc == 0
    out = capsys.readouterr().out
    assert "identifiable" in out
    assert "1*s_aa*s_bb*s_cd + -1*s_aa*s_bc*s_bd + -1*s_ab*s_ab*s_cd + 1*s_ab*s_ad*s_bc" in out
    assert "deficiency: 0" in out and "dimension: 5" in out


def test_analyze_union_graph(tmp_path, capsys):
    path = tmp_path / "union.json"
    path.write_text(
        json.dumps(
            {
                "nodes": ["a", "b", "c"],
                "directed": [["a", "b"], ["b", "c"], ["a", "c"]],
                "bidirected": [["b", "c"]],
            }
        )
    )
    rc = main(["analyze", str(path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "deficiency: 1" in out
    assert "equivalents: 3" in out


def test_analyze_empty_graph(tmp_path, capsys):
    path = tmp_path / "empty.txt"
    path.write_text("nodes: a b c d\n")
    assert main(["constraints", str(path)]) == 0
    out = capsys.readouterr().out
    assert out.count("cov(") == 6


def test_parse_error_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.txt"
    path.write_text("nodes: a b\na -> a\n")
    assert main(["analyze", str(path)]) == 2
    assert "line 2" in capsys.readouterr().err


def test_missing_file_exit_code(capsys):
    assert main(["analyze", "/nonexistent/graph.txt"]) == 2


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["enumerate"])  # missing required arguments
    assert exc.value.code == 1


def test_fit_dag_single_iteration(tmp_path, capsys):
    g, params = random_sem(3, seed=2, config=None)
    path = tmp_path / "chain.txt"
    path.write_text("nodes: a b c\na -> b\nb -> c\n")
    data = sample_data(g, params, 500, seed=3)
    csv_path = tmp_path / "data.csv"
    with open(csv_path, "w") as fh:
        fh.write("a,b,c\n")
        for row in data:
            fh.write(",".join(f"{x:.8g}" for x in row) + "\n")
    rc = main(["fit", str(path), "--data", str(csv_path)])
    assert rc == 0
    result = json.loads(capsys.readouterr().out)
    assert result["iterations"] == 1 and result["converged"]


def test_fit_name_mismatch(tmp_path, capsys):
    path = tmp_path / "g.txt"
    path.write_text("nodes: x y\nx -> y\n")
    csv_path = tmp_path / "d.csv"
    csv_path.write_text("a,b\n0.1,0.2\n0.3,0.4\n-1.0,0.5\n")
    assert main(["fit", str(path), "--data", str(csv_path)]) == 2


def test_simulate_reproducible(tmp_path, capsys):
    rc = main(["simulate", "--p", "4", "--n", "50", "--seed", "9", "--out", str(tmp_path / "one")])
    assert rc == 0
    rc = main(["simulate", "--p", "4", "--n", "50", "--seed", "9", "--out", str(tmp_path / "two")])
    assert rc == 0
    assert (tmp_path / "one.data.csv").read_bytes() == (tmp_path / "two.data.csv").read_bytes()
    assert (tmp_path / "one.graph.json").read_bytes() == (tmp_path / "two.graph.json").read_bytes()
    graph = json.loads((tmp_path / "one.graph.json").read_text())
    assert graph["nodes"] == ["a", "b", "c", "d"]


def test_select_smoke(tmp_path, capsys):
    out = tmp_path / "classes2.json"
    assert main(["enumerate", "--nodes", "2", "--out", str(out)]) == 0
    capsys.readouterr()
    rng = np.random.default_rng(0)
    data = rng.standard_normal((400, 2))
    csv_path = tmp_path / "d.csv"
    with open(csv_path, "w") as fh:
        fh.write("a,b\n")
        for row in data:
            fh.write(f"{row[0]:.8g},{row[1]:.8g}\n")
    rc = main(["select", "--classes", str(out), "--data", str(csv_path)])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert report["best_class"] == 0  # independent data: the empty class
    assert len(report["scores"]) == 2


def test_ystruct_none_filter(capsys):
    rc = main(
        ["ystruct", "--p", "4", "--reps", "1", "--n", "400", "--alpha", "0.01",
         "--seed", "3", "--filter", "none"]
    )
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert "none" in report["filters"]
