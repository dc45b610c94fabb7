import argparse
import json

import pytest

from madmm.cli import BUDGET_DEFAULTS, ConfigError, _resolve_budget_epsilon, main
from madmm.trace import read_trace, records_equal_ignoring_time


def _run(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_budget_defaults_table():
    assert BUDGET_DEFAULTS == {
        (1000, 100): 15.0,
        (5000, 1000): 100.0,
        (10000, 5000): 300.0,
        (10000, 2000): 300.0,
        (7129, 44): 30.0,
        (7129, 38): 30.0,
        (2000, 62): 30.0,
    }


def test_resolve_budget_epsilon_rules():
    ns = argparse.Namespace(budget=None, max_iters=None, epsilon=None)
    assert _resolve_budget_epsilon(ns, (1000, 100)) == (15.0, 0.0, 10**9)
    with pytest.raises(ConfigError, match="no default budget"):
        _resolve_budget_epsilon(ns, (37, 9))
    # An explicit iteration cap suppresses the size-based budget and flips
    # the epsilon default to the solve-mode value.
    ns_iters = argparse.Namespace(budget=None, max_iters=200, epsilon=None)
    assert _resolve_budget_epsilon(ns_iters, (1000, 100)) == (None, 1e-5, 200)
    ns_both = argparse.Namespace(budget=2.0, max_iters=None, epsilon=1e-3)
    assert _resolve_budget_epsilon(ns_both, (37, 9)) == (2.0, 1e-3, 10**9)
    with pytest.raises(ConfigError, match="budget"):
        _resolve_budget_epsilon(
            argparse.Namespace(budget=-1.0, max_iters=None, epsilon=None), (37, 9)
        )
    with pytest.raises(ConfigError, match="epsilon"):
        _resolve_budget_epsilon(
            argparse.Namespace(budget=1.0, max_iters=None, epsilon=-1e-5), (37, 9)
        )
    with pytest.raises(ConfigError, match="max-iters"):
        _resolve_budget_epsilon(
            argparse.Namespace(budget=None, max_iters=0, epsilon=None), (37, 9)
        )


def test_exit_code_3_on_data_errors(capsys):
    code, _, err = _run(
        ["--mode", "madmm", "--data", "/definitely/not/here.libsvm", "--max-iters", "3"],
        capsys,
    )
    assert code == 3 and "data error" in err
    code, _, err = _run(["--mode", "madmm", "--synthetic", "10by5", "--max-iters", "3"], capsys)
    assert code == 3 and "DxQ" in err
    code, _, err = _run(["--mode", "madmm", "--synthetic", "0x5", "--max-iters", "3"], capsys)
    assert code == 3


def test_exit_code_2_on_config_errors(capsys):
    base = ["--mode", "madmm", "--synthetic", "30x6"]
    code, _, err = _run(base, capsys)  # unknown size, no budget, no cap
    assert code == 2 and "config error" in err
    code, _, _ = _run(base + ["--max-iters", "3", "--lambda1", "-0.1"], capsys)
    assert code == 2
    code, _, _ = _run(base + ["--budget", "-2"], capsys)
    assert code == 2
    code, _, _ = _run(base + ["--max-iters", "3", "--beta", "-1"], capsys)
    assert code == 2
    code, _, _ = _run(base + ["--max-iters", "3", "--trace-stride", "0"], capsys)
    assert code == 2


def test_strict_escalates_penalty_condition(capsys, caplog):
    base = ["--mode", "madmm", "--synthetic", "20x5", "--max-iters", "3", "--beta", "1e-9"]
    code, _, err = _run(base + ["--strict"], capsys)
    assert code == 2 and "penalty condition" in err
    code, out, _ = _run(base, capsys)
    assert code == 0
    assert any("penalty condition" in rec.message for rec in caplog.records)
    doc = json.loads(out)
    assert doc["runs"]["madmm"]["beta"] == 1e-9


def test_madmm_run_writes_trace_and_summary(tmp_path, capsys):
    prefix = str(tmp_path / "run")
    summary = tmp_path / "summary.json"
    code, out, _ = _run(
        [
            "--mode", "madmm",
            "--synthetic", "40x8",
            "--max-iters", "20",
            "--trace", prefix,
            "--summary", str(summary),
        ],
        capsys,
    )
    assert code == 0
    assert out == ""  # summary went to the file
    doc = json.loads(summary.read_text())
    assert doc["mode"] == "madmm"
    assert doc["data"]["d"] == 40 and doc["data"]["q"] == 8
    assert doc["data"]["source"] == "synthetic 40x8"
    assert len(doc["data"]["checksum"]) == 64
    cfg = doc["config"]
    assert cfg["budget_sec"] is None
    assert cfg["epsilon"] == 1e-5
    assert cfg["max_iters"] == 20
    assert cfg["trace_stride"] == 1
    run_doc = doc["runs"]["madmm"]
    assert run_doc["iterations"] <= 20
    assert run_doc["stop_reason"] in ("max_iters", "epsilon")
    assert run_doc["violations"] == 0
    records = read_trace(f"{prefix}_madmm.csv")
    assert [r.solver for r in records] == ["madmm"] * len(records)
    ks = [r.k for r in records]
    assert ks == sorted(ks) and ks[-1] == run_doc["iterations"]
    assert records[-1].fit == pytest.approx(run_doc["fit"])


def test_compare_mode_runs_both_solvers(tmp_path, capsys):
    prefix = str(tmp_path / "cmp")
    summary = tmp_path / "cmp.json"
    code, _, _ = _run(
        [
            "--mode", "compare",
            "--synthetic", "30x6",
            "--max-iters", "10",
            "--trace", prefix,
            "--summary", str(summary),
        ],
        capsys,
    )
    assert code == 0
    doc = json.loads(summary.read_text())
    assert set(doc["runs"]) == {"madmm", "proxlinear"}
    madmm_records = read_trace(f"{prefix}_madmm.csv")
    prox_records = read_trace(f"{prefix}_proxlinear.csv")
    assert madmm_records and prox_records
    assert prox_records[0].solver == "proxlinear"
    # Both runs consumed the identical dataset.
    assert doc["runs"]["madmm"]["fit"] > 0
    assert doc["runs"]["proxlinear"]["fit"] > 0


def test_repeat_runs_identical_modulo_time(tmp_path, capsys):
    args = [
        "--mode", "compare",
        "--synthetic", "25x6",
        "--max-iters", "8",
        "--seed", "3",
    ]
    s1, s2 = tmp_path / "a.json", tmp_path / "b.json"
    p1, p2 = str(tmp_path / "a"), str(tmp_path / "b")
    assert _run(args + ["--trace", p1, "--summary", str(s1)], capsys)[0] == 0
    assert _run(args + ["--trace", p2, "--summary", str(s2)], capsys)[0] == 0
    for name in ("madmm", "proxlinear"):
        ra = read_trace(f"{p1}_{name}.csv")
        rb = read_trace(f"{p2}_{name}.csv")
        assert records_equal_ignoring_time(ra, rb)
    da = json.loads(s1.read_text())
    db = json.loads(s2.read_text())
    for name in ("madmm", "proxlinear"):
        a, b = da["runs"][name], db["runs"][name]
        a.pop("wall_time_sec")
        b.pop("wall_time_sec")
        assert a == b
    assert da["data"]["checksum"] == db["data"]["checksum"]


def test_epsilon_zero_under_wall_clock_budget(tmp_path, capsys):
    summary = tmp_path / "budget.json"
    code, _, _ = _run(
        [
            "--mode", "madmm",
            "--synthetic", "15x4",
            "--budget", "0.15",
            "--summary", str(summary),
        ],
        capsys,
    )
    assert code == 0
    doc = json.loads(summary.read_text())
    assert doc["config"]["epsilon"] == 0.0
    assert doc["config"]["budget_sec"] == 0.15
    assert doc["runs"]["madmm"]["stop_reason"] == "budget"


def test_trace_stride_thins_records(tmp_path, capsys):
    prefix = str(tmp_path / "thin")
    code, _, _ = _run(
        [
            "--mode", "madmm",
            "--synthetic", "20x5",
            "--max-iters", "10",
            "--trace-stride", "4",
            "--trace", prefix,
            "--summary", str(tmp_path / "thin.json"),
        ],
        capsys,
    )
    assert code == 0
    assert [r.k for r in read_trace(f"{prefix}_madmm.csv")] == [4, 8, 10]


def test_parallel_compare(tmp_path, capsys):
    summary = tmp_path / "par.json"
    code, _, _ = _run(
        [
            "--mode", "compare",
            "--synthetic", "25x5",
            "--max-iters", "5",
            "--parallel",
            "--summary", str(summary),
        ],
        capsys,
    )
    assert code == 0
    doc = json.loads(summary.read_text())
    assert set(doc["runs"]) == {"madmm", "proxlinear"}


def test_libsvm_file_input(tmp_path, capsys):
    path = tmp_path / "tiny.libsvm"
    path.write_text(
        "+1 1:0.5 3:1.5\n-1 2:2.0\n+1 1:1.0 2:1.0 3:1.0\n-1 3:0.25\n"
    )
    summary = tmp_path / "file.json"
    code, _, _ = _run(
        [
            "--mode", "madmm",
            "--data", str(path),
            "--max-iters", "5",
            "--summary", str(summary),
        ],
        capsys,
    )
    assert code == 0
    doc = json.loads(summary.read_text())
    assert doc["data"]["d"] == 3 and doc["data"]["q"] == 4
    assert doc["data"]["source"] == str(path)
