import csv
import io
import json

import pytest

from returntime.cli import main


@pytest.fixture
def tri(tmp_path):
    path = tmp_path / "tri.txt"
    path.write_text("0 1\n1 2\n0 2\n")
    return str(path)


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_exact_triangle(tri, capsys):
    assert main(["exact", "--graph", tri, "--node", "0", "--T", "10"]) == 0
    r = rows(capsys.readouterr().out)
    assert len(r) == 10
    assert [float(r[t - 1]["y"]) for t in (2, 3, 4)] == [0.5, 0.25, 0.125]


def test_exact_json(tri, capsys):
    assert main(["exact", "--graph", tri, "--node", "0", "--T", "4", "--format", "json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["y"] == [0.0, 0.5, 0.25, 0.125]
    assert out["x"][1] == 0.5


def test_meanfield_triangle(tri, capsys):
    assert main(["approx", "--graph", tri, "--node", "0", "--method", "meanfield", "--T", "3"]) == 0
    r = rows(capsys.readouterr().out)
    assert float(r[0]["y"]) == pytest.approx(1 / 3)


def test_tree_and_cycle_json(capsys):
    gen = ["--model", "regular", "--n", "100", "--d", "3", "--seed", "2"]
    assert main(["approx", *gen, "--node", "4", "--T", "300", "--format", "json"]) == 0
    tree = json.loads(capsys.readouterr().out)
    assert tree["h"] > 1 and tree["slope"] > 0 and len(tree["y"]) == 300
    assert main(["approx", *gen, "--node", "4", "--method", "cycle", "--r", "2", "--T", "300", "--format", "json"]) == 0
    cyc = json.loads(capsys.readouterr().out)
    assert cyc["F1"] >= tree["F1"] - 1e-12


def test_generate_roundtrip(tmp_path, capsys):
    out = tmp_path / "g.txt"
    assert main(["generate", "--model", "sbm", "--n", "60", "--d", "4", "--c", "3", "--seed", "1", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 120
    assert main(["exact", "--graph", str(out), "--node", "7", "--T", "5"]) == 0


def test_generate_parity_error(capsys):
    assert main(["generate", "--model", "regular", "--n", "5", "--d", "3", "--seed", "1"]) == 2
    assert "parity" in capsys.readouterr().err


def test_missing_generator_flags(capsys):
    assert main(["exact", "--model", "gnm", "--n", "10", "--node", "0"]) == 2
    assert "--m" in capsys.readouterr().err


def test_bad_graph_file(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1\n1 1\n")
    assert main(["exact", "--graph", str(bad), "--node", "0"]) == 2
    assert "line 2" in capsys.readouterr().err
    assert main(["exact", "--graph", str(tmp_path / "missing.txt"), "--node", "0"]) == 2


def test_node_out_of_range(tri, capsys):
    assert main(["exact", "--graph", tri, "--node", "9"]) == 2


def test_numeric_failure_exit_code(tri, capsys):
    # under the node-deletion rule the triangle's walk sums are critical at z = 1
    assert main(["approx", "--graph", tri, "--node", "0", "--method", "cycle", "--r", "1", "--rule", "node"]) == 3


def test_unknown_flag_and_subcommand(capsys):
    with pytest.raises(SystemExit) as err:
        main(["exact", "--bogus"])
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        main(["experiment", "fig9"])
    assert err.value.code == 2


def test_popdyn(tmp_path, capsys):
    slopes = tmp_path / "s.csv"
    assert main(["popdyn", "--law", "regular:6", "--N", "1000", "--sweeps", "100", "--graph-n", "32768",
                 "--samples", "5", "--slopes-out", str(slopes), "--format", "json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["mean_F"] == pytest.approx(1 / 6)
    r = rows(slopes.read_text())
    assert len(r) == 5 and float(r[0]["slope"]) == pytest.approx(2.4415e-5, rel=1e-4)
    assert main(["popdyn", "--law", "explicit:1=0.5,3=0.5", "--N", "1000", "--sweeps", "5"]) == 0
    assert capsys.readouterr().out.startswith("F_val,F_der,k")


@pytest.mark.parametrize("law", ["poisson:0", "explicit:1=0.2", "weird:3", "explicit:a=b"])
def test_popdyn_bad_law(law, capsys):
    assert main(["popdyn", "--law", law, "--N", "1000", "--sweeps", "1"]) == 2


def test_tailfit(tmp_path, capsys):
    assert main(["tailfit", "--h", "2", "--format", "json"]) == 0
    assert json.loads(capsys.readouterr().out)["slope"] == pytest.approx(0.6931471805599453)
    path = tmp_path / "y.csv"
    path.write_text("t,y\n" + "".join(f"{t},{0.5 ** t!r}\n" for t in range(1, 41)))
    assert main(["tailfit", "--input", str(path)]) == 0
    r = rows(capsys.readouterr().out)
    assert float(r[0]["slope"]) == pytest.approx(0.6931471805599453, rel=1e-10)
    assert main(["tailfit", "--input", str(path), "--column", "nope"]) == 2
    assert main(["tailfit"]) == 2


def test_experiment_subcommand(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["experiment", "fig1_regular", "--n", "200", "--nodes", "2", "--T", "40", "--no-popdyn",
                 "--out", str(out)]) == 0
    assert (out / "slopes.csv").exists() and (out / "manifest.json").exists()
    assert json.loads(capsys.readouterr().out)["out"] == str(out)


def test_experiment_stage_failure(tmp_path, capsys):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 1\n0 1\n")
    code = main(["experiment", "custom", "--graph", str(bad), "--out", str(tmp_path / "o")])
    assert code == 2
    assert "stage 'generate'" in capsys.readouterr().err
