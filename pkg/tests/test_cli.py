import json

import pytest

from gkreroot.cli import bench_stats, main
from gkreroot.scenario import packaged_scenario

B9 = str(packaged_scenario("b9"))


def _write_bad_budget(tmp_path, cap, b_reset):
    text = packaged_scenario("b9").read_text()
    text = text.replace("cap = 9.0", f"cap = {cap}").replace("b_reset = 0.0", f"b_reset = {b_reset}")
    p = tmp_path / "bad.toml"
    p.write_text(text)
    return str(p)


def test_validate_config_ok(capsys):
    assert main(["validate-config", "--config", B9]) == 0
    assert "ok" in capsys.readouterr().out


@pytest.mark.parametrize("cap,b_reset", [(2.0, 2.0), (1.0, 2.0)])
def test_validate_config_rejects_cap_not_above_reset(tmp_path, capsys, cap, b_reset):
    assert main(["validate-config", "--config", _write_bad_budget(tmp_path, cap, b_reset)]) == 2
    assert "B > b_reset" in capsys.readouterr().err


def test_missing_config_and_unknown_key_exit_2(tmp_path, capsys):
    assert main(["validate-config", "--config", str(tmp_path / "nope.toml")]) == 2
    p = tmp_path / "x.toml"
    p.write_text(packaged_scenario("b9").read_text() + "\n[bogus]\nx = 1\n")
    assert main(["validate-config", "--config", str(p)]) == 2
    assert "bogus" in capsys.readouterr().err


def test_unknown_flag_prints_usage_and_exits_2(capsys):
    assert main(["run", "--config", B9, "--out", "x", "--frobnicate"]) == 2
    assert "usage" in capsys.readouterr().err
    assert main([]) == 2


def test_run_writes_trace_and_plots(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", "--config", B9, "--seed", "2", "--out", str(out), "--plots", "--max-iterations", "6"])
    assert code == 0
    for f in ("trace.csv", "gatekeeper.jsonl", "forest.jsonl", "summary.json", "map.svg", "budget.svg",
              "features.svg"):
        assert (out / f).stat().st_size > 0
    assert json.loads((out / "summary.json").read_text())["seed"] == 2
    assert "status=" in capsys.readouterr().out


def test_run_jsonl_trace(tmp_path):
    out = tmp_path / "out"
    assert main(["run", "--config", B9, "--out", str(out), "--trace-format", "jsonl", "--max-iterations", "3"]) == 0
    first = json.loads((out / "trace.jsonl").read_text().splitlines()[0])
    assert first["event"] == "step" and first["t"] == 0.0


def test_constraint_violation_exits_1(tmp_path, monkeypatch, capsys):
    from gkreroot import cli
    from gkreroot.sim import ConstraintViolation

    def boom(*a, **kw):
        raise ConstraintViolation("budget 9.5 exceeds B=9")

    monkeypatch.setattr(cli, "run", boom)
    assert main(["run", "--config", B9, "--out", str(tmp_path)]) == 1
    assert "constraint violation" in capsys.readouterr().err


def test_bench_reports_mean_and_std(capsys):
    assert main(["bench", "--config", B9, "--iters", "3"]) == 0
    out = capsys.readouterr().out
    assert "mean [ms]" in out and "std [ms]" in out
    stats = json.loads(out.strip().splitlines()[-1])
    for name in ("growth", "gatekeeper"):
        assert stats[name]["n"] == 3 and stats[name]["mean_ms"] > 0 and stats[name]["std_ms"] >= 0


def test_bench_stats_units():
    s = bench_stats({"growth": [0.001, 0.003], "gatekeeper": [0.002]})
    assert s["growth"]["mean_ms"] == pytest.approx(2.0) and s["growth"]["std_ms"] == pytest.approx(1.0)
    assert s["gatekeeper"]["n"] == 1


def test_bench_rejects_nonpositive_iters():
    assert main(["bench", "--config", B9, "--iters", "0"]) == 2
