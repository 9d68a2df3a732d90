import json
import subprocess
import sys
from io import StringIO

import pytest

from conslaw.cli import EXIT_FAIL, EXIT_PASS, EXIT_UNSUPPORTED, EXIT_USAGE, main


def run(*argv):
    out = StringIO()
    code = main(list(argv), out=out)
    return code, out.getvalue()


def run_json(*argv):
    code, text = run("--json", *argv)
    return code, json.loads(text)


@pytest.mark.parametrize(
    "argv, code, needle",
    [
        (("div-test", "u_t + u*u_x"), EXIT_PASS, "true"),
        (("div-test", "u_x*u_t"), EXIT_FAIL, "false"),
        (("phi", "corpus:heat", "1", "0"), EXIT_PASS, "x"),
        (("euler", "corpus:heat", "u*u_xx"), EXIT_PASS, "2*u_xx"),
        (("reduce", "corpus:heat", "u_tt"), EXIT_PASS, "u_xxxx"),
        (("check-cv", "corpus:heat", "u", "-u_x"), EXIT_PASS, "true"),
        (("check-cv", "corpus:heat", "u^2", "-u_x"), EXIT_FAIL, "false"),
        (("verify-char", "corpus:heat", "u", "-u_x", "1"), EXIT_PASS, "true"),
        (("cosym", "corpus:heat", "h"), EXIT_PASS, "true"),
        (("cosym", "corpus:heat", "u"), EXIT_FAIL, "false"),
        (("char", "corpus:burgers", "u", "-u_x-u^2"), EXIT_PASS, "L: 1"),
        (("char", "corpus:b0", "v1", "-IntA", "--on", "B0gen"), EXIT_PASS, "v1_t: 1"),
        (("purity", "corpus:u2diff", "sigma_v", "-sigma_t*u^-1"), EXIT_PASS, "PurelyPotential"),
        (("purity", "corpus:b0", "1", "0", "--on", "B0gen", "--cv", "(v1, -IntA)"), EXIT_PASS, "witness"),
        (("potentialize", "corpus:heat", "--kind", "2d", "--cv", "F0"), EXIT_PASS, "v1_x = u"),
        (("homotopy", "u*u_t + u_x*u_xx"), EXIT_PASS, "1/2*u^2"),
        (("corpus", "--filter", "heat/*"), EXIT_PASS, "claims pass"),
    ],
)
def test_commands(argv, code, needle):
    got, text = run(*argv)
    assert got == code, text
    assert needle in text


def test_negative_leading_arguments_are_not_options():
    code, text = run("check-cv", "corpus:b0", "x*u", "-x*A*u_x + IntA")
    assert code == EXIT_PASS, text


def test_json_payload_shape():
    code, data = run_json("purity", "corpus:u2diff", "sigma_v", "-sigma_t*u^-1")
    assert code == EXIT_PASS
    assert data["command"] == "purity" and data["status"] == "pass"
    assert data["result"]["verdict"] == "PurelyPotential"
    assert data["result"]["potential_atoms"] == ["v"]


def test_weights_flag_anywhere():
    code, data = run_json("potentialize", "corpus:b0", "--kind", "2d", "--cv", "F0", "--weights")
    assert code == EXIT_PASS
    assert data["weights"] == {"u": 0, "v1": 0}


def test_incompatible_fluxes_report_the_residual():
    code, data = run_json("potentialize", "corpus:heat", "--kind", "abelian", "--flux", "v", "t=u", "x=u")
    assert code == EXIT_FAIL
    assert data["status"] == "error"
    assert data["error"]["code"] == "incompatible-fluxes"
    assert data["error"]["residual"] in ("-u_x + u_xx", "u_xx - u_x")


def test_parse_error_positions(tmp_path):
    f = tmp_path / "bad.sys"
    f.write_text("indep t x\ndep u\neq u_t = u_xx +\n")
    code, data = run_json("check-cv", str(f), "u", "-u_x")
    assert code == EXIT_USAGE
    assert data["error"]["code"] == "parse-error"
    assert data["error"]["line"] == 3


@pytest.mark.parametrize(
    "argv, code",
    [
        (("homotopy", "u^-2*u_x"), EXIT_UNSUPPORTED),
        (("phi", "corpus:heat", "exp(x)*(exp(x)+1)^-1", "0"), EXIT_UNSUPPORTED),
        (("check-cv", "corpus:heat", "u"), EXIT_USAGE),
        (("check-cv", "/nonexistent/file.sys", "u", "0"), EXIT_USAGE),
        (("frobnicate",), EXIT_USAGE),
        ((), EXIT_USAGE),
        (("purity", "corpus:heat", "1"), EXIT_USAGE),
    ],
)
def test_error_exit_codes(argv, code):
    got, text = run(*argv)
    assert got == code, text


def test_system_file_from_disk(tmp_path):
    f = tmp_path / "kdv.sys"
    f.write_text("indep t x\ndep u\neq u_t = u_xxx + 6*u*u_x label KdV\n")
    code, text = run("check-cv", str(f), "u", "-u_xx - 3*u^2")
    assert code == EXIT_PASS, text
    code, text = run("char", str(f), "u^2/2", "-u*u_xx + u_x^2/2 - 2*u^3")
    assert code == EXIT_PASS and "KdV: u" in text


def test_console_script_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "conslaw", "div-test", "u_x*u_t"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == EXIT_FAIL
    assert proc.stdout.strip() == "false"
