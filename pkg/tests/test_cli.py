import csv
import json
import math

import numpy as np
import pytest

from arrhenius_rd import cli, dsolve


def run(tmp_path, *argv):
    return cli.main([argv[0], "--out", str(tmp_path), *argv[1:]])


def table(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    head, body = rows[0], rows[1:]
    return head, body


def numeric(path):
    head, body = table(path)
    return head, np.array([[float(x) for x in row] for row in body])


def test_construct_row_a_linear(tmp_path):
    assert run(tmp_path, "construct-reaction", "--row", "a", "--m", "0", "--A", "-1", "--kappa", "2") == 0
    head, a = numeric(tmp_path / "reaction_a.csv")
    assert head == ["theta", "D", "R", "u"]
    theta, R = a[:, 0], a[:, 2]
    assert R[0] == 0.0 and theta[0] == 0.0
    np.testing.assert_allclose(R, theta, atol=1e-14)


def test_construct_row_c_warns_but_succeeds(tmp_path, capsys):
    assert run(tmp_path, "construct-reaction", "--row", "c", "--A", "-1", "--kappa", "1") == 0
    assert "row c as printed" in capsys.readouterr().err


def test_construct_arrhenius_default(tmp_path):
    assert run(tmp_path, "construct-reaction") == 0
    _, a = numeric(tmp_path / "reaction_arrhenius.csv")
    assert a[0, 1] == 0.0
    assert np.all(np.diff(a[1:, 1]) >= 0)


def test_reruns_are_byte_identical(tmp_path):
    for sub in ("one", "two"):
        (tmp_path / sub).mkdir()
        assert run(tmp_path / sub, "build-diffusivity", "--n", "60") == 0
        assert run(tmp_path / sub, "solve", "--preset", "2") == 0
    for name in ("diffusivity.csv", "diffusivity.json", "solve_p2.csv"):
        assert (tmp_path / "one" / name).read_bytes() == (tmp_path / "two" / name).read_bytes()


def test_build_diffusivity_output(tmp_path):
    assert run(tmp_path, "build-diffusivity", "--n", "120") == 0
    head, a = numeric(tmp_path / "diffusivity.csv")
    assert head == ["theta", "u", "D", "D_oracle", "D1", "D2"]
    theta, D, D1 = a[:, 0], a[:, 2], a[:, 4]
    assert D.max() <= dsolve.dm_bound(1.0)
    np.testing.assert_allclose(D1, 1 / (1 - np.exp(-1 / theta) / theta), rtol=1e-12)
    np.testing.assert_allclose(a[:, 3], D, rtol=1e-9)
    doc = json.loads((tmp_path / "diffusivity.json").read_text())
    assert doc["format"] == "arrhenius-rd/piecewise-diffusivity"


def test_solve_preset2_vanishes_at_r1(tmp_path):
    assert run(tmp_path, "solve", "--preset", "2") == 0
    head, a = numeric(tmp_path / "solve_p2.csv")
    assert head[0] == "r"
    ucols = [i for i, h in enumerate(head) if h.startswith("u(")]
    assert ucols
    assert np.max(np.abs(a[-1, ucols])) < 1e-12


def test_solve_preset6_shape(tmp_path):
    assert run(tmp_path, "solve", "--preset", "6", "--variant", "square_2", "--grid", "41,3") == 0
    head, a = numeric(tmp_path / "solve_p6_square_2.csv")
    assert a.shape[0] == 41
    assert len(head) == 1 + a.shape[1] - 1
    assert np.all(np.isfinite(a))


def test_solve_from_scenario_file(tmp_path):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"schema": "arrhenius-rd/scenario", "version": 1, "preset": 3,
                               "outputs": ["theta"], "grid": {"nr": 11, "nt": 2}}))
    assert run(tmp_path, "solve", "--config", str(cfg)) == 0
    head, a = numeric(tmp_path / "solve_p3.csv")
    assert a.shape[0] == 11 and all(h == "r" or h.startswith("theta(") for h in head)


def test_verify_passes_and_corrupt_fails(tmp_path, capsys):
    assert run(tmp_path, "verify", "--preset", "3", "--grid", "400,16") == 0
    head, body = table(tmp_path / "verify_p3.csv")
    assert head == ["quantity", "value"]
    vals = {k: float(v) for k, v in body}
    assert vals["relative_residual"] <= 1e-5
    assert run(tmp_path, "verify", "--preset", "3", "--grid", "400,16", "--corrupt", "1.1") == cli.EXIT_TOLERANCE
    assert (tmp_path / "verify_p3_corrupt.csv").exists()
    assert "r =" in capsys.readouterr().err


def test_stability_exit_codes(tmp_path, capsys):
    assert run(tmp_path, "stability") == 0
    out = capsys.readouterr().out
    assert "2.8424479" in out
    assert run(tmp_path, "stability", "--R0", "5") == cli.EXIT_TOLERANCE


def test_stability_experiment_small(tmp_path):
    code = run(tmp_path, "stability", "--experiment", "--grid", "32,16", "--modes", "1,1", "--t-end", "2")
    assert code == 0
    head, body = table(tmp_path / "stability.csv")
    assert head[-1] == "verdict" and body[0][-1] == "pass"


@pytest.mark.parametrize("argv", [
    ("solve", "--preset", "9"),
    ("solve", "--preset", "6", "--variant", "bogus"),
    ("solve",),
    ("verify", "--preset", "3", "--grid", "3,x"),
    ("construct-reaction", "--row", "z"),
])
def test_invalid_input_exit_code(tmp_path, argv):
    assert run(tmp_path, *argv) == cli.EXIT_INVALID


def test_invalid_config_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(tmp_path, "solve", "--config", str(bad)) == cli.EXIT_INVALID
    bad.write_text(json.dumps({"schema": "arrhenius-rd/scenario", "version": 1, "preset": 2, "colour": 1}))
    assert run(tmp_path, "solve", "--config", str(bad)) == cli.EXIT_INVALID


def test_run_file_fills_options(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"schema": cli.RUN_SCHEMA, "version": 1, "command": "construct-reaction",
                               "options": {"row": "b", "A": -1.0, "kappa": 1.0, "n": 11}}))
    assert run(tmp_path, "construct-reaction", "--config", str(cfg)) == 0
    _, a = numeric(tmp_path / "reaction_b.csv")
    assert a.shape[0] == 11
    cfg.write_text(json.dumps({"schema": cli.RUN_SCHEMA, "version": 1, "options": {"speed": 3}}))
    assert run(tmp_path, "construct-reaction", "--config", str(cfg)) == cli.EXIT_INVALID


def test_csv_formatting_round_trips():
    x = math.pi / 7
    text = cli.csv_text({"k": "v"}, ["x"], [(x,)])
    assert text.splitlines()[1] == "# k: v"
    assert float(text.splitlines()[-1]) == x
