"""Command line front end: scenario round-trips, output formats, exit codes,
and determinism of the seeded/threaded paths."""
import json
import shutil
import subprocess

import numpy as np
import pytest

from qgraph import cli
from qgraph.counting import PoleOnBoundary


def _scenario_file(tmp_path, name="barrier_end"):
    path = tmp_path / f"{name}.scenario.json"
    path.write_text(cli.scenario_json(cli.parse_scenario(cli._EXAMPLES[name])),
                    encoding="utf-8")
    return str(path)


def test_fmt_round_trips_floats(rng):
    for x in rng.standard_normal(50) * 10.0 ** rng.integers(-8, 8, 50):
        assert float(cli._fmt(x)) == x


def test_scenario_round_trip_is_byte_identical():
    for name in sorted(cli._EXAMPLES):
        text1 = cli.scenario_json(cli.parse_scenario(cli._EXAMPLES[name]))
        text2 = cli.scenario_json(cli.parse_scenario(json.loads(text1)))
        assert text1 == text2


def test_explicit_matrix_round_trip():
    # dump a known-valid boundary to the explicit matrix form, then check
    # the parse/serialize loop is the identity on bytes
    sc = cli.parse_scenario(cli._EXAMPLES["barrier_end"])
    blob = sc.to_dict()
    blob["boundary"] = {
        "alpha1": cli._matrix_to(sc.bc.alpha1),
        "alpha2": cli._matrix_to(sc.bc.alpha2),
        "beta1": cli._pairs(sc.bc.beta1),
        "beta2": cli._pairs(sc.bc.beta2)}
    text1 = cli.scenario_json(cli.parse_scenario(blob))
    text2 = cli.scenario_json(cli.parse_scenario(json.loads(text1)))
    assert text1 == text2
    assert '"alpha1"' in text1  # stays in matrix form, no preset inference


def test_example_bundles(tmp_path, capsys):
    assert cli.main(["example", "barrier_end", "--out", str(tmp_path)]) == 0
    listed = capsys.readouterr().out.splitlines()
    assert len(listed) == 2
    scen = tmp_path / "barrier_end.scenario.json"
    curves = tmp_path / "barrier_end.curves.csv"
    assert scen.exists() and curves.exists()
    text = curves.read_text(encoding="utf-8")
    assert text.startswith("# plot rescale factors")
    assert "# rescale E[omega1:D] 15" in text
    assert "# rescale map 1/25" in text
    header = next(l for l in text.splitlines() if not l.startswith("#"))
    assert header.split(",")[:3] == ["lambda", "Re(E)", "Im(E)"]
    assert "Re(map)" in header
    json.loads(scen.read_text(encoding="utf-8"))


def test_evans_sweep_counts_sign_changes(tmp_path):
    out = tmp_path / "sweep.csv"
    code = cli.main(["evans", "--scenario", _scenario_file(tmp_path),
                     "--out", str(out)])
    assert code == 0
    lines = out.read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    assert header == ["lambda", "Re(E)", "Im(E)",
                      "Re(E[omega1:D])", "Im(E[omega1:D])",
                      "Re(E[omega2:D])", "Im(E[omega2:D])"]
    assert len(lines) == 1 + 1024
    re_e = np.array([float(l.split(",")[1]) for l in lines[1:]])
    assert int(np.sum(re_e[:-1] * re_e[1:] < 0)) == 4
    im_e = np.array([float(l.split(",")[2]) for l in lines[1:]])
    assert np.abs(im_e).max() == 0.0


def test_evans_sample_override_and_header_only(tmp_path, capsys):
    scen = _scenario_file(tmp_path)
    assert cli.main(["evans", "--scenario", scen, "--grid", "0"]) == 0
    out = capsys.readouterr().out
    assert out.splitlines() == ["lambda,Re(E),Im(E),Re(E[omega1:D]),"
                                "Im(E[omega1:D]),Re(E[omega2:D]),Im(E[omega2:D])"]
    assert cli.main(["evans", "--scenario", scen, "--grid", "16"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 17


def test_count_report_text_and_machine_blob(tmp_path, capsys):
    out = tmp_path / "count.json"
    code = cli.main(["count", "--scenario", _scenario_file(tmp_path),
                     "--out", str(out)])
    assert code == 0
    text = capsys.readouterr().out
    assert "identity: 4 = 1 + 3 + 0 PASS" in text
    assert "map poles:" in text
    machine = json.loads(out.read_text(encoding="utf-8"))
    block = machine["intervals"][0]
    assert block["holds"] is True
    assert block["identity"] == "4 = 1 + 3 + 0 PASS"
    assert block["full"]["count"] == 4
    assert [round(z, 5) for z, _ in block["full"]["zeros"]] == [
        6.58182, 19.47846, 36.41483, 58.12901]


def test_count_notes_interval_dependence(tmp_path, capsys):
    code = cli.main(["count", "--scenario", _scenario_file(tmp_path, "two_wire")])
    assert code == 0
    text = capsys.readouterr().out
    assert "identity: 4 = 1 + 1 + 1 + 1 PASS" in text
    assert "identity: 3 = 1 + 1 + 1 + 0 PASS" in text
    assert "note: map delta N depends on the interval" in text


def test_verify_table_deterministic(tmp_path):
    scen = _scenario_file(tmp_path)
    sc = cli.load_scenario(scen)
    t1, ok1 = cli.verify_table(sc, "single", seed=3, rounds=4)
    t2, ok2 = cli.verify_table(sc, "single", seed=3, rounds=4)
    assert ok1 and ok2 and t1 == t2
    lines = t1.splitlines()
    assert lines[0] == "check,lambda,residual,tolerance,status"
    assert len(lines) == 5
    for row in lines[1:]:
        name, lam, res, tol, status = row.split(",")
        assert name == "single_split" and status == "PASS"
        assert float(res) <= float(tol)
    t3, _ = cli.verify_table(sc, "single", seed=4, rounds=4)
    assert t3 != t1  # different seed, different abscissae


def test_verify_projections_and_exit_zero(tmp_path, capsys):
    code = cli.main(["verify", "--scenario", _scenario_file(tmp_path),
                     "--which", "projections"])
    assert code == 0
    text = capsys.readouterr().out
    assert "U_unitary" in text and "trace_relations" in text
    assert "FAIL" not in text


def test_threads_env_does_not_change_bytes(tmp_path, monkeypatch):
    sc = cli.load_scenario(_scenario_file(tmp_path))
    monkeypatch.setenv("QGRAPH_THREADS", "1")
    a = cli.evans_csv(sc, samples=64)
    monkeypatch.setenv("QGRAPH_THREADS", "4")
    b = cli.evans_csv(sc, samples=64)
    assert a == b


def test_exit_2_on_bad_input(tmp_path, capsys):
    assert cli.main(["count", "--scenario", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    assert cli.main(["evans", "--scenario", str(bad)]) == 2
    # structurally valid JSON, invalid boundary data (rank-deficient pair)
    blob = json.loads((tmp_path / "barrier_end.scenario.json").read_text()
                      if (tmp_path / "barrier_end.scenario.json").exists()
                      else cli.scenario_json(cli.parse_scenario(cli._EXAMPLES["barrier_end"])))
    blob["boundary"] = {"alpha1": [[[0.0, 0.0]] * 2] * 2,
                        "alpha2": [[[0.0, 0.0]] * 2] * 2,
                        "beta1": [[1.0, 0.0], [1.0, 0.0]],
                        "beta2": [[0.0, 0.0], [0.0, 0.0]]}
    bad_bc = tmp_path / "bad_bc.json"
    bad_bc.write_text(json.dumps(blob), encoding="utf-8")
    assert cli.main(["evans", "--scenario", str(bad_bc)]) == 2
    capsys.readouterr()


def test_exit_4_on_boundary_pole(tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise PoleOnBoundary("map pole at lambda=5 sits on the interval boundary")
    monkeypatch.setattr(cli, "verify_counting", boom)
    code = cli.main(["count", "--scenario", _scenario_file(tmp_path)])
    assert code == 4
    assert "endpoint error" in capsys.readouterr().err


def test_exit_3_on_numerical_failure(tmp_path, monkeypatch, capsys):
    def boom(*a, **k):
        raise ArithmeticError("synthetic blowup")
    monkeypatch.setattr(cli, "verify_counting", boom)
    code = cli.main(["count", "--scenario", _scenario_file(tmp_path)])
    assert code == 3
    assert "numerical error" in capsys.readouterr().err


def test_exit_5_on_failing_residuals(tmp_path, monkeypatch, capsys):
    monkeypatch.setattr(cli.maps, "verify_single_split",
                        lambda *a, **k: 1.0)
    code = cli.main(["verify", "--scenario", _scenario_file(tmp_path),
                     "--which", "single", "--grid", "2"])
    assert code == 5
    assert "FAIL" in capsys.readouterr().out


def test_verify_rejects_mismatched_mode(tmp_path):
    sc = cli.load_scenario(_scenario_file(tmp_path))
    with pytest.raises(cli.ScenarioError):
        cli.verify_table(sc, "double")


def test_console_script_help():
    exe = shutil.which("qgraph")
    assert exe, "qgraph entry point not installed"
    run = subprocess.run([exe, "--help"], capture_output=True, text=True)
    assert run.returncode == 0
    assert "evans" in run.stdout and "count" in run.stdout
