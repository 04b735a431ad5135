from __future__ import annotations

import json
import subprocess
import sys

import pytest

from onlinematch.cli import EXIT_FAILED, EXIT_INVALID, EXIT_OK, main
from onlinematch.model import Event, InstanceScript, Model


def run(capsys, *argv) -> tuple[int, str]:
    code = main([str(a) for a in argv])
    return code, capsys.readouterr().out


def run_json(capsys, *argv) -> tuple[int, dict]:
    code, out = run(capsys, *argv, "--json")
    return code, json.loads(out)


@pytest.fixture
def two_vertex_files(tmp_path):
    fully = InstanceScript(Model.FULLY, [Event.arrival(0), Event.arrival(1, [0]), Event.deadline(1),
                                         Event.deadline(0)])
    general = InstanceScript(Model.GENERAL, [Event.arrival(0), Event.arrival(1, [0])])
    fully.save(tmp_path / "fully.json")
    general.save(tmp_path / "general.json")
    return tmp_path / "fully.json", tmp_path / "general.json"


class TestHardness:
    def test_minimize(self, capsys):
        code, out = run_json(capsys, "hardness", "fully", "--minimize")
        assert code == EXIT_OK and out["value"] == pytest.approx(0.6132, abs=5e-4)

    def test_alpha_zero(self, capsys):
        code, out = run_json(capsys, "hardness", "fully", "--alpha", "0")
        assert out["closed_form"] == pytest.approx(2 / 3, abs=1e-12)

    def test_general_sweep_writes_curve(self, capsys, tmp_path):
        path = tmp_path / "r.csv"
        code, out = run_json(capsys, "hardness", "general", "--n", 500, "--gamma", 0.584, "--csv", path)
        assert code == EXIT_OK and out["passed"] and out["max_r"] < 0.584
        lines = path.read_text().splitlines()
        # the sweep covers gamma in [0.584, 1] at step 1e-3
        assert lines[0] == "gamma,r" and len(lines) == 1 + 417
        assert all(float(r) < float(g) for g, r in (ln.split(",") for ln in lines[1:]))

    def test_general_sweep_failure_exit(self, capsys, tmp_path):
        # too ambitious a target: the sweep reaches it, so the check fails
        code, out = run_json(capsys, "hardness", "general", "--n", 100, "--gamma", 0.5, "--grid-step", 0.01,
                             "--csv", tmp_path / "r.csv")
        assert code == EXIT_FAILED and not out["passed"]

    def test_triangle(self, capsys):
        code, out = run_json(capsys, "hardness", "triangle", "--k", 200, "--prefill", 0.3)
        assert out["matched_per_vertex"] == pytest.approx(out["bound"], abs=0.03)


class TestSimulate:
    def test_two_vertex_fully(self, capsys, two_vertex_files):
        code, out = run_json(capsys, "simulate", two_vertex_files[0], "--algo", "history")
        assert code == EXIT_OK and out["primal"] == pytest.approx(1.0, abs=1e-9)

    def test_two_vertex_general(self, capsys, two_vertex_files):
        code, out = run_json(capsys, "simulate", two_vertex_files[1])
        assert out["primal"] == pytest.approx(0.5, abs=2e-4)

    def test_invalid_script(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"model": "FullyOnline", "events": [{"kind": "Deadline", "vertex": 0}]}))
        assert main(["simulate", str(bad)]) == EXIT_INVALID
        assert "event 0" in capsys.readouterr().err

    def test_model_mismatch(self, capsys, two_vertex_files):
        assert main(["simulate", str(two_vertex_files[0]), "--algo", "historygeneral"]) == EXIT_INVALID

    def test_missing_file(self, capsys, tmp_path):
        assert main(["simulate", str(tmp_path / "nope.json")]) == EXIT_INVALID

    def test_water_filling_on_hardness_instance(self, capsys, tmp_path):
        inst = tmp_path / "hard.json"
        code, _ = run(capsys, "gen-instance", "hardness", "--n", 20, "--ell", 3, "--alpha", 0.43, "--out", inst)
        assert code == EXIT_OK
        code, out = run_json(capsys, "simulate", inst, "--algo", "waterfilling", "--step", 1e-3, "--no-state")
        assert code == EXIT_OK and 0 < out["ratio"] <= 1 and "final_state" not in out

    def test_trace(self, capsys, two_vertex_files, tmp_path):
        trace = tmp_path / "t.csv"
        run(capsys, "simulate", two_vertex_files[0], "--trace", trace)
        assert trace.read_text().startswith("event_index,vertex,x_level,a_level,alpha")


def test_reports_are_byte_identical(capsys, tmp_path):
    inst = tmp_path / "r.json"
    main(["gen-instance", "random", "--n", "25", "--seed", "11", "--out", str(inst)])
    capsys.readouterr()
    outs = [run(capsys, "simulate", inst, "--algo", "waterfilling", "--json", "--seed", 11)[1] for _ in range(2)]
    assert outs[0] == outs[1]
    again = tmp_path / "r2.json"
    main(["gen-instance", "random", "--n", "25", "--seed", "11", "--out", str(again)])
    assert inst.read_bytes() == again.read_bytes()


def test_batch(capsys, tmp_path):
    for s in range(3):
        main(["gen-instance", "bipartite", "--n", "12", "--seed", str(s), "--out", str(tmp_path / f"i{s}.json")])
    capsys.readouterr()
    code, out = run_json(capsys, "batch", "--dir", tmp_path, "--algo", "waterfilling", "--step", 1e-3)
    assert code == EXIT_OK and out["aggregate"]["runs"] == 3 and out["aggregate"]["errors"] == 0
    assert [r["instance"].endswith(f"i{s}.json") for s, r in enumerate(out["reports"])] == [True] * 3
    assert main(["batch"]) == EXIT_INVALID


def test_solve_h_and_certify(capsys, tmp_path):
    grid = tmp_path / "h.json"
    code, out = run_json(capsys, "solve-h", "--family", "fully", "--n", 4, "--out", grid, "--samples", 5000)
    assert code == EXIT_OK and out["certified"]
    assert 0 < out["gamma"] < 0.5
    doc = json.loads(grid.read_text())
    assert doc["n"] == 4 and doc["gamma"] == out["gamma"]
    cert = json.loads((tmp_path / "h_certificate.json").read_text())
    assert cert["pass"] and "solve_seconds" in cert and cert["constraint_counts"]["phi1"] == 15
    code, rep = run_json(capsys, "certify", "--grid", grid, "--samples", 5000)
    assert code == EXIT_OK and rep["pass"]
    # certifying above the solved ratio must fail
    assert main(["certify", "--grid", str(grid), "--gamma", "0.9", "--samples", "2000"]) == EXIT_FAILED


def test_argument_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        main(["solve-h", "--family", "bogus", "--n", "4"])
    assert info.value.code == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "onlinematch", "hardness", "fully", "--alpha", "0.43"],
                          capture_output=True, text=True, check=True)
    assert "0.613" in proc.stdout
