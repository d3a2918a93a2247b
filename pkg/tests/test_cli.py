import csv
import json
import subprocess
import sys

import pytest

from graphnls.cli import SWEEP_COLUMNS, main
from graphnls.graph_model import make_star, save_graph
from graphnls.solver import EXISTS, NONEXISTENT


def test_solve_family_prints_report(capsys):
    assert main(["solve", "--family", "star", "--n", "3", "--p", "4", "--q", "2.5", "--mass", "0.05"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["verdict"] == EXISTS
    assert data["params"]["mu"] == 0.05


def test_solve_from_file_writes_outputs(tmp_path, capsys):
    gpath = tmp_path / "s3.json"
    save_graph(make_star(3), gpath)
    rpath, cpath = tmp_path / "rep.json", tmp_path / "u.csv"
    rc = main(["solve", "--graph", str(gpath), "--p", "4", "--q", "2.5", "--mass", "100",
               "--out-report", str(rpath), "--out-csv", str(cpath)])
    assert rc == 0
    assert capsys.readouterr().out.startswith(NONEXISTENT)
    assert json.loads(rpath.read_text())["verdict"] == NONEXISTENT
    assert cpath.read_text().count("\n") > 100


def test_malformed_graph_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"vertices": ["a"], "edges": [["a", "zz", 1.0]]}')
    assert main(["solve", "--graph", str(bad), "--p", "4", "--mass", "1"]) == 2
    assert "error" in capsys.readouterr().err
    assert main(["solve", "--graph", str(tmp_path / "missing.json"), "--p", "4", "--mass", "1"]) == 2


def test_bad_parameters_exit_2():
    assert main(["solve", "--family", "star", "--p", "7", "--mass", "1"]) == 2
    assert main(["solve", "--family", "star", "--p", "4", "--mass", "-1"]) == 2
    assert main(["solve", "--family", "star", "--p", "4", "--mass", "1", "--grid-h", "0.01"]) == 2


def test_argparse_errors_exit_2():
    with pytest.raises(SystemExit) as e:
        main(["solve", "--family", "nope", "--p", "4", "--mass", "1"])
    assert e.value.code == 2


def test_unknown_suite_exits_2(capsys):
    assert main(["verify", "nosuch"]) == 2
    assert "appendixA" in capsys.readouterr().err


def test_sweep_csv_columns(tmp_path):
    out = tmp_path / "sweep.csv"
    rc = main(["sweep", "--family", "star", "--p", "4", "--q", "2.5", "--mass-min", "0.05", "--mass-max", "100",
               "--points", "3", "--log", "--seeds", "1", "--out-csv", str(out)])
    assert rc == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == SWEEP_COLUMNS
    assert [r["verdict"] for r in (rows[0], rows[-1])] == [EXISTS, NONEXISTENT]
    assert float(rows[0]["mu"]) == pytest.approx(0.05)


def test_sweep_needs_a_range():
    assert main(["sweep", "--family", "star", "--p", "4"]) == 2
    assert main(["sweep", "--family", "star", "--p", "4", "--mass-min", "2", "--mass-max", "1"]) == 2


@pytest.mark.parametrize("suite", ["appendixA", "scaling", "gn", "rearrange", "line-oracle"])
def test_verify_suites_pass(suite, capsys):
    assert main(["verify", suite]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out.replace("0 FAIL", "")


def test_console_entry_point():
    r = subprocess.run([sys.executable, "-m", "graphnls.cli", "verify", "appendixA"], capture_output=True, text=True)
    assert r.returncode == 0, r.stderr
