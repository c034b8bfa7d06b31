from pathlib import Path

import pytest

from potqp.cli import main

PROBLEMS = Path(__file__).resolve().parents[1] / "demos" / "problems"


def run(tmp_path, *args):
    cmd, name, *rest = args
    return main([cmd, str(PROBLEMS / name), *rest, "--out-dir", str(tmp_path)])


def report(tmp_path, name):
    return dict(line.split(" = ", 1) for line in (tmp_path / name).read_text().splitlines()
                if " = " in line)


def test_solve_equilibrium(tmp_path):
    assert run(tmp_path, "solve", "equilibrium_log.json") == 0
    val = float(report(tmp_path, "report.txt")["value"])
    assert abs(val - 0.6931471805599453) <= 2e-2
    assert (tmp_path / "measure.csv").exists()


def test_missing_kernel_is_a_parse_error(tmp_path, capsys):
    assert run(tmp_path, "solve", "missing_kernel.json") == 2
    assert "$.kernel" in capsys.readouterr().err


def test_unreadable_file_is_a_parse_error(tmp_path):
    assert main(["solve", str(tmp_path / "nope.json")]) == 2


def test_cutting_plane_infeasible_targets(tmp_path):
    assert run(tmp_path, "solve", "laplace_infeasible.json") == 3


def test_chain_on_identity(tmp_path):
    assert run(tmp_path, "verify", "identity_chain.json", "--chain") == 0
    rep = report(tmp_path, "verify_report.txt")
    assert float(rep["abs_w_minus_q"]) <= 1e-15 and float(rep["abs_M_minus_w"]) <= 1e-15
    assert (tmp_path / "qbar.csv").read_text().splitlines()[0] == "m,qbar,mode"


def test_frostman_on_equilibrium(tmp_path):
    assert run(tmp_path, "verify", "equilibrium_log.json", "--frostman", "--grid-n", "500") == 0
    assert report(tmp_path, "verify_report.txt")["result"] == "pass"


def test_swap_exit_codes(tmp_path):
    assert run(tmp_path, "verify", "swap_infeasible.json", "--swap") == 3
    assert run(tmp_path, "verify", "swap_desk.json", "--swap") == 0


@pytest.mark.parametrize("name,code", [("monomial_feasible.json", 0),
                                       ("monomial_infeasible.json", 3),
                                       ("generic_infeasible.json", 3)])
def test_feasible(tmp_path, name, code):
    assert run(tmp_path, "feasible", name) == code
    text = (tmp_path / "feasibility_report.txt").read_text()
    if name == "monomial_infeasible.json":
        assert "(1, 1)" in text


def test_outputs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert run(d, "solve", "laplace_uniform.json", "--grid-n", "120", "--z-grid-n", "60") == 0
    for name in ("measure.csv", "trace.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
