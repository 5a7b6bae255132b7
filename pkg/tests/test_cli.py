import json
from importlib import resources

import jsonschema
import pytest

from breuil_tame.cli import main


@pytest.fixture(scope="module")
def schema():
    text = resources.files("breuil_tame").joinpath("schema/output-1.0.json").read_text()
    return json.loads(text)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def run_json(capsys, schema, *argv):
    code, out = run(capsys, *argv)
    doc = json.loads(out)
    jsonschema.validate(doc, schema)
    return code, doc["result"]


def test_solve_element_frozen_coefficients(capsys, schema):
    code, res = run_json(capsys, schema, "solve-element", "--p", "3", "--kind", "V",
                         "--x", "1", "--w", "1", "--j", "2", "--terms", "13")
    assert code == 0
    assert res["residual_zero"]
    assert res["series"]["components"][0] == {"0": "1", "6": "6", "12": "240"}


def test_boundary_V_exits_inadmissible(capsys):
    code, out = run(capsys, "solve-element", "--p", "3", "--kind", "V", "--x", "1", "--w", "1", "--j", "1")
    assert code == 2 and out == ""


def test_missing_root_exits_inadmissible(capsys):
    code, _ = run(capsys, "solve-element", "--p", "5", "--kind", "W", "--b", "1", "--w", "1", "--i", "p")
    assert code == 2


@pytest.mark.parametrize("argv", [
    ("reduce", "--p", "4", "--tau", "prin"),
    ("reduce", "--p", "5", "--tau", "prin", "--x1", "2"),
    ("classify", "--p", "5", "--tau", "prin:1"),
    ("defring", "--p", "5", "--tau", "prin:0,2", "--rhobar", "niveau2b"),
    ("modform", "--p", "5", "--j", "1", "--slope", "0"),
])
def test_usage_errors(capsys, argv):
    code, _ = run(capsys, *argv)
    assert code == 64


def test_argparse_errors_exit_64(capsys):
    with pytest.raises(SystemExit) as info:
        main(["reduce", "--p", "5"])
    assert info.value.code == 64
    capsys.readouterr()


def test_reduce_principal(capsys, schema):
    code, res = run_json(capsys, schema, "reduce", "--p", "5", "--tau", "prin",
                         "--x1", "2", "--x2", "5", "--j", "2")
    assert code == 0
    (rep,) = res["reports"]
    assert rep["shape"] == "triangular_nonsplit"
    assert rep["extension_nonzero"] is True


def test_reduce_supercuspidal_half_valuation(capsys, schema):
    code, res = run_json(capsys, schema, "reduce", "--p", "5", "--tau", "super", "--m", "8",
                         "--b", "0.5-valuation", "--w", "1")
    assert code == 0
    assert all(r["shape"] == "niveau2_irreducible" for r in res["reports"])
    assert sorted(res["reports"][0]["niveau2_exponents"]) == [13, 17]


def test_output_is_byte_identical(capsys):
    argv = ("classify", "--p", "5", "--tau", "super:7")
    _, a = run(capsys, *argv)
    _, b = run(capsys, *argv)
    assert a == b and a.endswith("}\n")


def test_precision_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("BREUIL_PRECISION", "3")
    _, out = run(capsys, "reduce", "--p", "5", "--tau", "prin", "--x1", "2", "--x2", "5", "--j", "2")
    assert json.loads(out)["result"]["reports"][0]["certified"]["p_digits"] == 3


@pytest.mark.parametrize("slope,shape", [("0", "triangular_nonsplit"), ("1", "triangular_nonsplit"),
                                         ("1/2", "niveau2_irreducible")])
def test_modform(capsys, schema, slope, shape):
    code, res = run_json(capsys, schema, "modform", "--p", "5", "--j", "1", "--slope", slope, "--ap", "2")
    assert code == 0 and res["shape"] == shape


def test_defring(capsys, schema):
    code, res = run_json(capsys, schema, "defring", "--p", "5", "--tau", "prin:0,2",
                         "--rhobar", "niveau2", "--no-check")
    assert code == 0
    assert res["ring"] == "X1X2_quadric" and res["mu_gal"] == 2
    code, res = run_json(capsys, schema, "defring", "--p", "5", "--tau", "prin:0,2",
                         "--rhobar", "other", "--no-check")
    assert res["ring"] == "zero" and res["mu_gal"] == 0


def test_wadm_and_mutant(capsys, schema):
    code, res = run_json(capsys, schema, "wadm", "--p", "5", "--tau", "prin", "--x1", "1", "--x2", "5")
    assert code == 0 and res["admissible"]
    code, res = run_json(capsys, schema, "wadm", "--p", "5", "--tau", "super", "--m", "7",
                         "--w", "1", "--a", "1")
    assert code == 0


def test_hom_standard_modules(capsys, schema):
    code, res = run_json(capsys, schema, "hom", "--p", "3", "--source", "std:F1:1:0",
                         "--target", "std:F1:1:0")
    assert code == 0 and res["dimension_Fp"] == 1


def test_table_format(capsys):
    code, out = run(capsys, "verify-sdm", "--p", "5", "--variant", "prin_case1",
                    "--values", "x1=2,x2=5,j=2", "--format", "table")
    assert code == 0
    assert not out.lstrip().startswith("{")


def test_descent_corruption_fails(capsys):
    code, out = run(capsys, "descent", "--p", "3", "--family", "Y1", "--corruption", "drop_nilpotent")
    assert code == 1
    assert json.loads(out)["result"]["status"] == "FAIL"
