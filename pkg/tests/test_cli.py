import json

import pytest

from rmtlab.cli import main


def _run(tmp_path, name, args):
    out = tmp_path / name
    code = main(args + ["--out", str(out), "--no-timestamp"])
    return code, out


def test_eqdensity_csv(tmp_path):
    code, out = _run(tmp_path, "eq.csv", ["eqdensity", "--potential", "0,-1,0,0.25", "--cuts", "1", "--grid", "-2:2:401"])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# rmtlab")
    header = [l for l in lines if not l.startswith("#")][0]
    assert header == "x,density,effective_potential_minus_l"
    assert len([l for l in lines if not l.startswith("#")]) == 402


def test_byte_identical_reruns(tmp_path):
    args = ["tw-cdf", "--x", "-3:1:5"]
    _, a = _run(tmp_path, "a.csv", args)
    _, b = _run(tmp_path, "b.csv", args)
    assert a.read_bytes() == b.read_bytes()


def test_json_mirror(tmp_path):
    code, out = _run(tmp_path, "b.json", ["bridge", "--t", "0.8", "--format", "json"])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["report"]["a"] == pytest.approx(2.0)
    assert doc["meta"]["config"]["t"] == 0.8


def test_string_min_branches(tmp_path):
    code, out = _run(tmp_path, "s.csv", ["string-min", "--N", "100", "--t", "-1", "--g", "1"])
    assert code == 0
    rows = [l.split(",") for l in out.read_text().splitlines() if not l.startswith("#")][1:]
    assert {r[3] for r in rows} == {"R", "L", "bulk"}


def test_check_suite(tmp_path):
    code, out = _run(tmp_path, "c.json", ["check", "--suite", "identities", "--format", "json"])
    assert code == 0
    assert json.loads(out.read_text())["report"]["passed"] is True


def test_sample_with_summary(tmp_path):
    summary = tmp_path / "sum.json"
    code, out = _run(
        tmp_path, "s.csv",
        ["sample", "--potential", "0,1", "--N", "6", "--sweeps", "500", "--seed", "7", "--thin", "100", "--summary", str(summary)],
    )
    assert code == 0
    doc = json.loads(summary.read_text())
    assert doc["summary"]["rng"] == "numpy.random.PCG64"
    assert sum(doc["summary"]["histogram"]["counts"]) == 4 * 6


def test_usage_error_exit_code(tmp_path, capsys):
    code, _ = _run(tmp_path, "g.csv", ["gap", "--interval", "3"])
    assert code == 1
    assert "--interval" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["eqdensity"])
    assert exc.value.code == 1


def test_numerical_failure_exit_code(tmp_path):
    code, _ = _run(tmp_path, "e.csv", ["eqdensity", "--potential", "0,-1.5,0,0.25", "--cuts", "1"])
    assert code == 2


def test_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("RMT_THREADS", "1")
    code, _ = _run(tmp_path, "p.csv", ["pastur", "--a", "1", "--grid", "-1:1:3"])
    assert code == 0
    monkeypatch.setenv("RMT_THREADS", "x")
    code, _ = _run(tmp_path, "p.csv", ["pastur", "--a", "1", "--grid", "-1:1:3"])
    assert code == 1
