import json
import shutil
import subprocess

import pytest

from rtgkit.cli import decompose_main, experiment_main, lambda_main, rtg_main
from rtgkit.rtg import parse_grammar

from conftest import AMBIGUOUS_TEXT, G0_TEXT, G1_TEXT, PERIOD_TEXT, UNIT_TEXT


@pytest.fixture
def gfile(tmp_path):
    def write(text, name="g.rtg"):
        p = tmp_path / name
        p.write_text(text)
        return str(p)

    return write


def test_rtg_count(gfile, capsys):
    assert rtg_main(["count", gfile(G0_TEXT), "-N", "A", "-n", "9"]) == 0
    assert capsys.readouterr().out.strip() == "2"
    amb = gfile(AMBIGUOUS_TEXT, "amb.rtg")
    rtg_main(["count", amb, "-N", "A", "-n", "3", "--distinct"])
    assert capsys.readouterr().out.strip() == "1"


def test_rtg_count_noncanonical_input(gfile, capsys):
    # the count for an original nonterminal sums over its canonical pieces
    assert rtg_main(["count", gfile(UNIT_TEXT), "-N", "S", "-n", "5"]) == 0
    from rtgkit.rtg import enumerate_trees

    assert int(capsys.readouterr().out) == len(enumerate_trees(parse_grammar(UNIT_TEXT), "S", 5))


def test_rtg_sample_reproducible(gfile, capsys):
    path = gfile(G0_TEXT)
    rtg_main(["sample", path, "-N", "A", "-n", "13", "--count", "5", "--seed", "3"])
    first = capsys.readouterr().out
    rtg_main(["sample", path, "-N", "A", "-n", "13", "--count", "5", "--seed", "3"])
    assert capsys.readouterr().out == first
    assert len(first.splitlines()) == 5


def test_rtg_canonicalize(gfile, tmp_path, capsys):
    out, rep = tmp_path / "c.rtg", tmp_path / "r.json"
    assert rtg_main(["canonicalize", gfile(G1_TEXT), "-o", str(out), "--report", str(rep)]) == 0
    err = capsys.readouterr().err
    assert "unambiguous: verified" in err
    g = parse_grammar(out.read_text())
    assert g.is_canonical()
    report = json.loads(rep.read_text())
    assert set(report["Q"]) == {"A", "B"}
    assert set(report["hypotheses"]) == {"unambiguous", "essentially_strongly_connected"}


def test_rtg_canonicalize_budget(gfile, capsys):
    assert rtg_main(["canonicalize", gfile(UNIT_TEXT), "--rule-budget", "2"]) == 1
    assert capsys.readouterr().err.startswith("error:")


def test_rtg_period(gfile, capsys):
    assert rtg_main(["period", gfile(PERIOD_TEXT), "--json"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["period"] == 2
    assert out["residues"]["A=>B"] == 1 and out["residues"]["A=>A"] == 0
    assert rtg_main(["period", gfile(G0_TEXT)]) == 0
    assert capsys.readouterr().out.startswith("period 4")


def test_rtg_errors(gfile, tmp_path, capsys):
    assert rtg_main(["count", str(tmp_path / "missing.rtg"), "-N", "A", "-n", "3"]) == 1
    assert rtg_main(["count", gfile("terminal c 0\nrule A -> d\n"), "-N", "A", "-n", "3"]) == 1
    assert rtg_main(["count", gfile(G0_TEXT), "-N", "Z", "-n", "3"]) == 1
    err = capsys.readouterr().err
    assert err.count("error:") == 3


def test_decompose_cli(gfile, capsys):
    tree = "b(a(b(a(b(b(c)), b(a(b(c), b(c))))), c))"
    assert decompose_main(["--tree", tree, "-m", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines == ["b([[1:3]](a([[0:3]],b([[0:5]]))))", "a(b(_),c)", "b(b(c))", "a(b(c),b(c))"]
    g = gfile("terminal a 2\nterminal b 1\nterminal c 0\nrule A -> a(B,B)\nrule B -> b(A)\nrule B -> b(B)\nrule B -> c\n")
    assert decompose_main(["--tree", tree, "-m", "3", "--grammar", g, "-N", "B"]) == 0
    assert capsys.readouterr().out.splitlines()[0] == "b([[A=>A:3]](a([[=>B:3]],b([[=>A:5]]))))"
    assert decompose_main(["--tree", tree, "-m", "3", "--grammar", g, "-N", "A"]) == 1
    assert decompose_main(["--tree", "a(c", "-m", "3"]) == 1


def test_lambda_grammar_cli(tmp_path, capsys):
    out, mp = tmp_path / "g.rtg", tmp_path / "m.json"
    assert lambda_main(["grammar", "-d", "1", "-i", "1", "-x", "1", "-o", str(out), "--map", str(mp)]) == 0
    g = parse_grammar(out.read_text())
    assert len(g.rules) == 5
    names = json.loads(mp.read_text())
    assert names["N{x1:o|-o}"] == {"env": [["x1", "o"]], "type": "o"}
    assert lambda_main(["grammar", "-d", "0", "-i", "0", "-x", "0"]) == 1


def test_lambda_beta_and_explosive(capsys):
    assert lambda_main(["beta", "--term", r"(\x:o.x) y", "--env", "y:o"]) == 0
    assert capsys.readouterr().out.strip() == "beta = 1"
    lambda_main(["explosive", "-m", "1", "-k", "2"])
    term = capsys.readouterr().out.strip()
    lambda_main(["beta", "--term", term])
    assert capsys.readouterr().out.strip() == "beta = 15"
    lambda_main(["beta", "--term", term, "--budget", "3"])
    assert capsys.readouterr().out.strip().startswith("beta >= ")
    lambda_main(["explosive", "-m", "1", "-k", "2", "--emit", "tree"])
    assert capsys.readouterr().out.startswith("lam{x1:o}(app(app(lam{x1:o->o}(")
    assert lambda_main(["explosive", "-m", "0", "-k", "2"]) == 1
    assert lambda_main(["beta", "--term", r"\x:o.x x"]) == 1
    assert lambda_main(["beta", "--term", r"(\x:o.x) y"]) == 1
    assert lambda_main(["beta", "--term", "y", "--env", "y"]) == 1


def test_lambda_sample(capsys):
    assert lambda_main(["sample", "-d", "1", "-i", "1", "-x", "1", "-n", "8", "--count", "3", "--seed", "2"]) == 0
    rows = [line.split("\t") for line in capsys.readouterr().out.splitlines()]
    assert len(rows) == 3 and all(len(r) == 2 for r in rows)


def test_experiment_words(tmp_path, capsys):
    out = tmp_path / "w.csv"
    argv = ["words", "--sizes", "32,64", "--samples", "200", "--seed", "1", "--csv", str(out)]
    assert experiment_main(argv) == 0
    text = out.read_text()
    assert text.splitlines()[0] == "n,m,pattern_size,samples,contains,frequency,wilson_lo,wilson_hi,seed"
    assert experiment_main(argv[:-2] + ["--workers", "4"]) == 0
    assert capsys.readouterr().out == text


def test_experiment_containment(gfile, capsys):
    g = gfile(G0_TEXT)
    assert experiment_main(["containment", "--grammar", g, "-N", "A", "-n", "9", "--pattern", "b(_)", "--exact"]) == 0
    assert capsys.readouterr().out.strip() == "2/2 = 1.000000 (exact)"
    assert experiment_main(["containment", "--grammar", g, "-N", "A", "-n", "2", "--pattern", "_"]) == 1


def test_experiment_main_small(tmp_path, capsys):
    out = tmp_path / "m.csv"
    argv = ["main", "--sizes", "10,30", "--samples", "50", "--seed", "1", "--csv", str(out)]
    assert experiment_main(argv) == 0
    rows = out.read_text().splitlines()
    assert len(rows) == 3
    assert experiment_main(["main", "--samples", "0"]) == 1


def test_bad_arguments():
    with pytest.raises(SystemExit):
        experiment_main(["main", "--sizes", "a,b"])
    with pytest.raises(SystemExit):
        rtg_main([])


@pytest.mark.skipif(shutil.which("rtg") is None, reason="console scripts not installed")
def test_console_scripts(gfile):
    path = gfile(G0_TEXT)
    out = subprocess.run(["rtg", "count", path, "-N", "A", "-n", "5"], capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "1"
    for tool in ("decompose", "lambda", "experiment"):
        assert subprocess.run([tool, "--help"], capture_output=True).returncode == 0
