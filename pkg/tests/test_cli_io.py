import csv
import json
import math

import pytest

from metastab import compile_expression, dump_family, load_family, parse_family
from metastab.cli import main
from metastab.errors import NegativeRate, ParseError, UnknownState
from metastab.report import from_json, to_json

FAMILY = """\
label = "three-state"
states = [-1, 0, 1]
n_grid = [10, 32, 100, 316, 1000]
theta = "2"

[[rate]]
from = -1
to = 0
value = "1"

[[rate]]
from = 1
to = 0
value = "1"

[[rate]]
from = 0
to = -1
value = "N"

[[rate]]
from = 0
to = 1
value = "N"

[[valley]]
well = [-1]
basin = [-1, 0]
xi = -1

[[well]]
label = 1
states = [-1]
attractor = -1

[[well]]
label = 2
states = [1]
attractor = 1
"""


@pytest.mark.parametrize("text, N, value", [
    ("N", 10, 10.0), ("N^-2", 10, 0.01), ("N**3", 2, 8.0), ("2*N - 1", 5, 9.0),
    ("(N + 1) / 2", 3, 2.0), ("-N^2", 3, -9.0), ("1e-3 * N", 1000, 1.0), ("N^(-1)", 4, 0.25),
])
def test_expression_values(text, N, value):
    assert compile_expression(text)(N) == pytest.approx(value, rel=1e-15)


@pytest.mark.parametrize("text", ["N^", "N^0.5", "2^N", "log(N)", "M", "N; 1", "'a'", "N[0]", ""])
def test_expression_rejects(text):
    with pytest.raises(ParseError):
        compile_expression(text)


def test_parse_and_roundtrip():
    defn = parse_family(FAMILY)
    assert defn.states == (-1, 0, 1)
    assert len(defn.rates) == 4
    again = parse_family(dump_family(defn))
    assert again == defn


def test_builtin_roundtrip():
    defn = parse_family('builtin = "torus2"\nn_grid = [4, 8, 16, 32]\ntheta = "N^3"\n[params]\nd = 2\n')
    assert parse_family(dump_family(defn)) == defn


def test_unknown_state_in_rate():
    bad = FAMILY.replace("from = 1\nto = 0", "from = 7\nto = 0")
    with pytest.raises(UnknownState):
        parse_family(bad)


def test_negative_rate_at_grid_point():
    bad = FAMILY.replace('value = "1"', 'value = "1 - N / 50"', 1)
    with pytest.raises(NegativeRate) as info:
        parse_family(bad)
    assert info.value.exit_code == 2


def test_parse_error_has_line():
    bad = FAMILY.replace('value = "N"', 'value = "N^"', 1)
    with pytest.raises(ParseError) as info:
        parse_family(bad)
    assert info.value.line == FAMILY.splitlines().index('value = "N"') + 1


def test_malformed_toml():
    with pytest.raises(ParseError):
        parse_family("states = [1, 2\n")


def test_unknown_key():
    with pytest.raises(ParseError):
        parse_family("foo = 1\n" + FAMILY)
    with pytest.raises(ParseError):
        parse_family(FAMILY + "\nfoo = 1\n")


def test_loaded_family_matches_builtin(tmp_path):
    path = tmp_path / "fam.toml"
    path.write_text(FAMILY)
    _, fx = load_family(str(path))
    _, ref = load_family("ex2")
    N = 100
    assert fx.family.chain(N).rates.toarray().tolist() == ref.family.chain(N).rates.toarray().tolist()


def test_json_nonfinite_roundtrip():
    text = to_json({"a": math.inf, "b": -math.inf, "c": math.nan, "d": (1, 2), "e": {3, 1}})
    back = from_json(text)
    assert back == {"a": "inf", "b": "-inf", "c": "nan", "d": [1, 2], "e": [1, 3]}


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out), out


def test_cli_tunneling_ex7(capsys):
    code, rep, _ = run(capsys, "tunneling", "--family", "ex7")
    assert code == 0
    limits = {(x, y): f["limit"] for x, y, f in rep["results"]["tunneling"]["fits"]}
    assert limits[(1, 2)] == pytest.approx(0.5, abs=5e-3)


def test_cli_reports_deterministic(capsys):
    args = ("tunneling", "--family", "ex5", "--n-grid", "10,32,100,316")
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args)
    a.pop("timing")
    b.pop("timing")
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_cli_simulation_deterministic(capsys):
    args = ("simulate", "--family", "ex6", "--N", "20", "--theta", "2", "--reps", "200", "--seed", "4")
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args)
    assert a["results"] == b["results"]
    assert a["results"]["note"] == "consistency check only"


def test_cli_valley_file(capsys, tmp_path):
    path = tmp_path / "fam.toml"
    path.write_text(FAMILY)
    code, rep, _ = run(capsys, "valley", "--file", str(path))
    assert code == 0
    assert rep["results"]["valleys"][0]["depth"][-1] == pytest.approx(2, rel=5e-3)


def test_cli_capacities(capsys):
    code, rep, _ = run(capsys, "capacities", "--family", "ex2", "--N", "10", "--pair=-1:1")
    assert code == 0
    cap = rep["results"]["capacities"][0]["capacity"]
    assert cap * 21 == pytest.approx(5.0, rel=1e-12)


def test_cli_identities_ex5(capsys):
    code, rep, _ = run(capsys, "identities", "--family", "ex5", "--N", "100")
    assert code == 0
    assert rep["results"]["passed"]


def test_cli_refuses_simulation_only(capsys):
    code, rep, _ = run(capsys, "tunneling", "--family", "ex8")
    assert code == 2
    assert rep["error"]["error"] == "SimulationOnly"


@pytest.mark.parametrize("argv, code", [
    (["tunneling", "--family", "nope"], 2),
    (["tunneling"], 2),
    (["bogus"], 2),
    (["valley", "--family", "ex2", "--well", "9", "--xi", "9"], 2),
    (["tunneling", "--family", "ex7", "--theta", "N^"], 2),
    (["capacities", "--file", "/nonexistent/fam.toml"], 2),
])
def test_cli_input_errors(capsys, argv, code):
    got = main(argv)
    captured = capsys.readouterr()
    assert got == code
    rep = json.loads(captured.out)
    assert rep["error"]["exit_code"] == code
    assert captured.err.startswith("metastab:")


def test_cli_numeric_error(capsys, tmp_path):
    # reducible family: the stationary solve cannot proceed
    path = tmp_path / "red.toml"
    path.write_text('states = [0, 1, 2, 3]\nn_grid = [10, 100, 1000, 10000]\n'
                    '[[rate]]\nfrom = 0\nto = 1\nvalue = "1"\n[[rate]]\nfrom = 1\nto = 0\nvalue = "1"\n'
                    '[[rate]]\nfrom = 2\nto = 3\nvalue = "N"\n[[rate]]\nfrom = 3\nto = 2\nvalue = "1"\n')
    code = main(["capacities", "--file", str(path), "--pair", "0:1"])
    rep = json.loads(capsys.readouterr().out)
    assert code == rep["error"]["exit_code"]
    assert code in (2, 3)
    assert rep["error"]["error"] == "NotIrreducible"


def test_cli_tables(capsys, tmp_path):
    out = tmp_path / "tables"
    code = main(["tunneling", "--family", "ex7", "--tables", str(out), "--out", str(tmp_path / "r.json")])
    assert code == 0
    rows = list(csv.reader((out / "tunneling_limits.csv").open()))
    assert rows[0] == ["x", "y", "limit", "exponent", "verdict"]
    assert len(rows) == 7
    assert json.loads((tmp_path / "r.json").read_text())["command"] == "tunneling"


def test_cli_verify_example_pass(capsys):
    code, rep, _ = run(capsys, "verify-example", "--family", "ex7")
    assert code == 0 and rep["results"]["passed"]


def test_cli_verify_example_verdict_failure(capsys):
    # the ex1 mean annulus occupation (about 1/2) misses its stated window
    code, rep, _ = run(capsys, "verify-example", "--family", "ex1", "--reps", "2000")
    assert code == 4
    assert not rep["results"]["passed"]
