import csv
import json
import os
import subprocess
import sys
from fractions import Fraction

import pytest

from ijets import catalog
from ijets.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def write_json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def test_involutivity_text_line(capsys):
    code, out, _ = run(capsys, "involutivity", "--catalog", "running", "--order", "2")
    assert code == 0
    assert out == "indices 7 6 3; characters 2 0 0; involutive: yes\n"


def test_involutivity_json_and_csv(capsys):
    code, out, _ = run(capsys, "involutivity", "--catalog", "cm-complex", "--format", "json")
    assert code == 0 and json.loads(out)["weighted_indices"] == 14
    code, out, _ = run(capsys, "involutivity", "--catalog", "running", "--system", "reduced",
                       "--order", "2", "--format", "csv")
    assert out.splitlines() == ["class,index,character", "1,4,2", "2,3,0"]


def test_non_involutive_exits_one(capsys):
    code, out, _ = run(capsys, "involutivity", "--catalog", "ex4", "--system", "reduced",
                       "--order", "2")
    assert code == 1
    assert out.endswith("involutive: no\n")


@pytest.mark.parametrize("argv", [
    ["involutivity", "--catalog", "nope"],
    ["involutivity"],
    ["explode", "--catalog", "running"],
    ["involutivity", "--catalog", "running", "--order", "-1"],
    ["reduce", "--catalog", "running"],
    ["normal-form", "--catalog", "ex4", "--order", "3"],
    ["involutivity", "--catalog", "running", "--spec", "x.json"],
])
def test_input_errors_exit_two(capsys, argv):
    assert run(capsys, *argv)[0] == 2


def test_malformed_files_exit_two(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "involutivity", "--spec", str(bad))[0] == 2
    assert run(capsys, "involutivity", "--spec", str(tmp_path / "missing.json"))[0] == 2
    empty = write_json(tmp_path / "empty.json", {"title": "nothing"})
    assert run(capsys, "involutivity", "--spec", empty)[0] == 2


def test_bare_system_spec(capsys, tmp_path):
    spec = write_json(tmp_path / "laplace.json", {
        "context": {"indep": ["x", "y"], "functions": [{"name": "u", "args": ["x", "y"]}]},
        "order": 2, "equations": [{"lhs": "u_yy", "rhs": "-u_xx"}]})
    code, out, _ = run(capsys, "involutivity", "--spec", spec)
    assert code == 0
    assert out == "indices 0 1; characters 2 0; involutive: yes\n"


def test_reduce_report(capsys):
    code, out, _ = run(capsys, "reduce", "--catalog", "running", "--order", "2", "--format",
                       "json")
    data = json.loads(out)
    assert code == 0
    assert data["dimensions"] == [3, 6, 8]
    assert set(data["parametric"]) == {"Xb", "Yb", "Ub", "Xb_x", "Ub_x", "Ub_y", "Ub_xx",
                                       "Ub_xy"}


def test_normal_form_csv_matches_direct_invariant(capsys, tmp_path):
    out_path = tmp_path / "nf.csv"
    code, _, _ = run(capsys, "normal-form", "--catalog", "running", "--order", "6",
                     "--out", str(out_path))
    assert code == 0
    rows = list(csv.DictReader(out_path.open()))
    row = next(r for r in rows if (r["dep"], r["index"]) == ("1", "2 2 2"))
    assert row["kind"] == "invariant"
    # u_yyy / u_yy^(3/2) at the target
    target = catalog.load("running").target_jet(7)
    u_yy, u_yyy = target.jets[(1, (2, 2))], target.jets[(1, (2, 2, 2))]
    assert Fraction(row["value"]) == u_yyy / Fraction(8) == Fraction(-1, 8)
    assert u_yy == 4
    phantom = next(r for r in rows if r["index"] == "2 2")
    assert (phantom["kind"], phantom["value"]) == ("phantom", "1")


def test_growth_diagnostic(capsys, tmp_path):
    growth = tmp_path / "growth.csv"
    code, _, _ = run(capsys, "normal-form", "--catalog", "running", "--order", "8",
                     "--format", "json", "--growth", str(growth))
    assert code == 0
    rows = list(csv.DictReader(growth.open()))
    assert [int(r["order"]) for r in rows] == list(range(1, 9))
    roots = [float(r["root"]) for r in rows]
    assert all(0 <= r < 10 for r in roots)


def test_frame_json(capsys):
    code, out, _ = run(capsys, "frame", "--catalog", "running", "--order", "2", "--format",
                       "json")
    data = json.loads(out)
    assert code == 0 and data["exact"]
    assert data["frame"]["Xb_x"] == "2"


def test_custom_target(capsys, tmp_path):
    target = write_json(tmp_path / "t.json", {"labels": ["X", "Y"], "base": ["0", "0"],
                                              "local": True, "polynomial": "Y**2/2 + X*Y"})
    code, out, _ = run(capsys, "frame", "--catalog", "running", "--order", "2",
                       "--target", target)
    assert code == 0 and "Xb_x = 1\n" in out
    flat = write_json(tmp_path / "flat.json", {"labels": ["X", "Y"], "base": ["0", "0"],
                                               "local": True, "polynomial": "X + Y"})
    assert run(capsys, "frame", "--catalog", "running", "--order", "2", "--target", flat)[0] == 2


def test_ill_posed_cross_section_exits_one(capsys, tmp_path):
    cs = catalog.load("running").cross_section.to_json()
    cs["normalizations"] = []
    path = write_json(tmp_path / "cs.json", cs)
    code, _, err = run(capsys, "normal-form", "--catalog", "running", "--order", "3",
                       "--cross-section", path)
    assert code == 1 and "not well-posed" in err
    # the cached catalog entry is unchanged
    assert run(capsys, "frame", "--catalog", "running", "--order", "2")[0] == 0


def test_chain_reports(capsys):
    code, out, _ = run(capsys, "chain", "--catalog", "ex10", "--format", "json")
    assert code == 0
    assert float(json.loads(out)["closed_form_error"]) < 1e-8
    code, out, _ = run(capsys, "chain", "--catalog", "running")
    assert code == 0 and "revalidated: yes" in out
    assert run(capsys, "chain", "--catalog", "ex4")[0] == 2


def test_probe_and_goldens(capsys):
    code, out, _ = run(capsys, "probe-delta", "--catalog", "ex12", "--system", "reduced",
                       "--order", "1")
    assert code == 0 and out.endswith("delta-irregular: yes\n")
    code, out, _ = run(capsys, "goldens", "--catalog", "ex4")
    assert code == 0 and out.endswith("5 checks, 0 failures\n")


def _cli(args, seed, cwd):
    env = dict(os.environ, PYTHONHASHSEED=str(seed))
    return subprocess.run([sys.executable, "-m", "ijets", *args], env=env, cwd=cwd,
                          capture_output=True, check=True).stdout


@pytest.mark.parametrize("args", [
    ["normal-form", "--catalog", "running", "--order", "5", "--format", "json"],
    ["reduce", "--catalog", "ex5", "--order", "3"],
    ["involutivity", "--catalog", "ex15", "--system", "nf", "--order", "2", "--format", "json"],
])
def test_output_is_byte_identical_across_runs(args, tmp_path):
    first = _cli(args, 1, tmp_path)
    assert first
    assert _cli(args, 987, tmp_path) == first
