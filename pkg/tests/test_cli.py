import io
import json
import subprocess
import sys

import pytest

from gwprune.cli import DEFAULT_SEED, main, parse_grid
from gwprune.tree import parse

BIN = "finite:[0.5,0,0.5]"


def run(*argv, stdin=None):
    out = io.StringIO()
    code = main(list(argv), stdout=out, stdin=io.StringIO(stdin) if stdin is not None else None)
    lines = out.getvalue().splitlines()
    return code, lines


def body(lines):
    return lines[1:]


def test_extinction_and_conjugate():
    code, lines = run("extinction", "--dist", BIN, "--u", "1.5")
    assert code == 0
    head = json.loads(lines[0])
    assert head["command"] == "extinction" and head["seed"] == DEFAULT_SEED
    assert head["dist"] == "finite:[0.5,0.0,0.5]"
    assert float(lines[1]) == pytest.approx(1.0 / 3.0, abs=1e-13)
    assert lines[1].startswith("0.333333333333")
    code, lines = run("conjugate", "--dist", BIN, "--u", "1.5")
    assert code == 0 and float(lines[1]) == pytest.approx(0.5, abs=1e-13)


def test_sample_is_reproducible():
    argv = ("sample", "--dist", "geometric:0.5", "--u", "0.8", "--n", "1000", "--seed", "42")
    code, a = run(*argv)
    _, b = run(*argv)
    assert code == 0 and a == b
    assert len(body(a)) == 1000
    for line in body(a):
        parse(line)
    _, c = run(*argv[:-1], "43")
    assert body(c) != body(a)


def test_threads_do_not_change_output():
    argv = ["sample", "--dist", BIN, "--u", "0.7", "--n", "9000", "--seed", "5"]
    _, one = run(*argv)
    _, four = run(*argv, "--threads", "4")
    assert one == four


def test_env_seed(monkeypatch):
    monkeypatch.setenv("GWPRUNE_SEED", "77")
    code, lines = run("sample", "--dist", BIN, "--u", "0.5", "--n", "3")
    assert json.loads(lines[0])["seed"] == 77
    _, explicit = run("sample", "--dist", BIN, "--u", "0.5", "--n", "3", "--seed", "77")
    assert lines == explicit
    monkeypatch.setenv("GWPRUNE_SEED", "nope")
    assert run("sample", "--dist", BIN, "--u", "0.5")[0] == 2


def test_sample_json_format_and_truncation():
    code, lines = run("sample", "--dist", BIN, "--u", "0.5", "--n", "5", "--format", "json")
    assert code == 0
    for line in body(lines):
        assert isinstance(json.loads(line), list)
    code, lines = run("sample", "--dist", BIN, "--u", "1.9", "--n", "50", "--max-nodes", "20")
    assert code == 0
    assert any(x.startswith("TRUNCATED ") for x in body(lines))


def test_sample_modified():
    code, lines = run("sample", "--dist", BIN, "--alpha", "0.3", "--beta", "0.3", "--n", "4")
    assert code == 0 and body(lines) == ["()"] * 4
    assert run("sample", "--dist", BIN, "--alpha", "0.3", "--n", "4")[0] == 2


def test_prune_from_stdin():
    code, lines = run("prune", "--u", "1.0", "--n", "2", stdin="(()())\n# comment\n((()())())\n")
    assert code == 0
    assert body(lines) == ["(()())", "(()())", "((()())())", "((()())())"]
    assert run("prune", "--u", "0.5", stdin="(()\n")[0] == 2


def test_law():
    code, lines = run("law", "--dist", BIN, "--u", "0.5", "--max-nodes", "3")
    assert code == 0
    recs = [json.loads(x) for x in body(lines)]
    assert recs[0] == {"tree": "()", "probability": 0.75}
    assert recs[1]["tree"] == "(()())"
    assert recs[-1]["covered_mass"] == pytest.approx(0.890625)
    code, lines = run("law", "--dist", BIN, "--u", "0.5", "--max-nodes", "3", "--mode", "gstar")
    assert json.loads(lines[1]) == {"tree": "()", "probability": pytest.approx(0.5)}


def test_pretty_mode():
    code, lines = run("law", "--dist", BIN, "--u", "0.5", "--max-nodes", "3", "--pretty")
    assert code == 0 and lines[0].startswith("# ")
    assert lines[-1].startswith("# covered mass")


def test_ascension_modes():
    code, lines = run("ascension", "--dist", BIN, "--mode", "time", "--n", "20")
    assert code == 0 and all(1.0 <= float(x) <= 2.0 for x in body(lines))
    code, lines = run("ascension", "--dist", BIN, "--mode", "path", "--grid", "0.5:2.0:0.5", "--n", "3")
    assert code == 0
    recs = [json.loads(x) for x in body(lines)]
    assert [r["u"] for r in recs[:4]] == [0.5, 1.0, 1.5, 2.0] or len(recs) == 12
    assert {r["path"] for r in recs} == {0, 1, 2}
    assert all(r["state"] == "INF" for r in recs if r["u"] == 2.0)
    code, lines = run("ascension", "--dist", BIN, "--mode", "pretree", "--u", "1.5", "--n", "5")
    assert code == 0 and len(body(lines)) == 5
    assert run("ascension", "--dist", BIN, "--mode", "pretree")[0] == 2
    assert run("ascension", "--dist", BIN, "--mode", "path")[0] == 2


def test_kesten_and_gstar():
    code, lines = run("kesten", "--dist", BIN, "--height", "2", "--n", "3")
    assert code == 0 and all(" spine:[" in x for x in body(lines))
    code, lines = run("gstar", "--dist", BIN, "--u", "0.5", "--n", "4")
    assert code == 0 and len(body(lines)) == 4
    assert run("gstar", "--dist", BIN, "--u", "1.0")[0] == 2
    assert run("kesten", "--dist", BIN, "--height", "-1")[0] == 2


def test_enumerate():
    code, lines = run("enumerate", "--max-nodes", "4")
    assert code == 0 and len(body(lines)) == 1 + 1 + 2 + 5
    code, lines = run("enumerate", "--max-nodes", "5", "--max-arity", "2")
    assert len(body(lines)) == 1 + 1 + 2 + 4 + 9
    assert run("enumerate", "--max-nodes", "15")[0] == 2


def test_verify_martingale():
    code, lines = run("verify", "--suite", "martingale", "--dist", BIN, "--seed", "7")
    assert code == 0
    recs = [json.loads(x) for x in body(lines)]
    assert recs and all(r["pass"] for r in recs)
    assert {"name", "statistic", "threshold", "pass", "n", "notes"} <= set(recs[0])


def test_verify_failure_exit_code():
    # 200 samples cannot resolve a TV threshold of 0.01
    code, lines = run("verify", "--suite", "pruning", "--n", "200")
    assert code == 1


@pytest.mark.parametrize("argv", [
    ["law", "--u", "0.5"],
    ["extinction", "--dist", "finite:[0.5,0.6]", "--u", "1"],
    ["extinction", "--dist", "poisson:1", "--u", "1"],
    ["extinction", "--dist", BIN, "--u", "3"],
    ["sample", "--dist", BIN, "--u", "1.5"],
    ["sample", "--dist", BIN, "--bogus"],
    ["frobnicate"],
    ["sample", "--dist", BIN, "--seed", "-1"],
    ["verify", "--suite", "nope"],
])
def test_usage_errors(argv, capsys):
    assert run(*argv)[0] == 2


def test_budget_exhaustion_is_exit_3():
    code, _ = run("ascension", "--dist", BIN, "--mode", "path", "--grid", "0.5:1.9:0.2", "--n", "200",
                  "--max-nodes", "2")
    assert code == 3


def test_parse_grid():
    assert parse_grid("0.5:2.0:0.5") == [0.5, 1.0, 1.5, 2.0]
    assert parse_grid("0:1:0.3") == [0.0, 0.3, 0.6, 0.9, 1.0]


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "gwprune", "extinction", "--dist", BIN, "--u", "1.5", "--pretty"],
                       capture_output=True, text=True, check=True)
    assert r.stdout.splitlines()[1] == "0.3333333333"
