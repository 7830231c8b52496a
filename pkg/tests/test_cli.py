import json

import pytest

from bellcert.cli import run
from bellcert.core import chsh_functional, pr_box
from bellcert.io import read_distribution, read_functional, write_distribution, write_functional
from bellcert.quantum import eval_strategy, tsirelson_strategy


@pytest.fixture
def files(tmp_path):
    write_distribution(pr_box(), tmp_path / "pr.json")
    write_functional(chsh_functional(), tmp_path / "chsh.json")
    write_distribution(eval_strategy(tsirelson_strategy()).family, tmp_path / "q.json")
    return tmp_path


def test_nu_and_eff(files, capsys):
    assert run(["nu", "--p", str(files / "pr.json"), "--certificate", str(files / "nu.json")]) == 0
    out = capsys.readouterr().out
    assert "nu(p) = 2/1" in out
    assert read_functional(files / "nu.json").scenario == pr_box().scenario
    assert run(["eff", "--p", str(files / "pr.json"), "--dual-check"]) == 0
    out = capsys.readouterr().out
    assert "eff(p) = 2/1" in out and "standalone dual LP: 2" in out
    assert run(["eff", "--p", str(files / "pr.json"), "--eps", "1/4"]) == 0
    assert "eff_1/4(p) = 3/2" in capsys.readouterr().out


def test_ldet_max(files, capsys):
    assert run(["ldet", "max", "--b", str(files / "chsh.json"), "--with-abort"]) == 0
    out = capsys.readouterr().out
    assert "= 1/1" in out and "strategies: 81" in out


def test_transform_pipeline(files, capsys):
    out_path = files / "star.json"
    rc = run(["transform", "--pipeline", "resist", "--in", str(files / "chsh.json"),
              "--p", str(files / "pr.json"), "--out", str(out_path)])
    assert rc == 0
    assert "B(p) = 2/3" in capsys.readouterr().out
    assert read_functional(out_path).scenario.abort_allowed


def test_problem_and_corruption(files, capsys):
    d = files / "disj3"
    assert run(["problem", "gen", "disj", "--n", "3", "--out", str(d)]) == 0
    assert {p.name for p in d.iterdir()} == {"f.json", "p_f.json", "notes.json", "certificate.json"}
    cert = str(d / "certificate.json")
    assert run(["corruption", "verify", "--cert", cert]) == 0
    assert "rectangles checked: 65536" in capsys.readouterr().out
    assert run(["corruption", "tighten", "--cert", cert, "--gammas", "1/2,1"]) == 0
    assert "1/2\t1/12" in capsys.readouterr().out
    assert run(["corruption", "build", "--cert", cert, "--eps", "1/10", "--perturbations", "10"]) == 0
    out = capsys.readouterr().out
    assert "B(p_f) = 3/2" in out and "pass" in out


def test_corruption_verify_fails_on_small_g(files, capsys):
    d = files / "disj3"
    run(["problem", "gen", "disj", "--n", "3", "--out", str(d)])
    obj = json.loads((d / "certificate.json").read_text())
    obj["g"] = [1, 7]
    (d / "weak.json").write_text(json.dumps(obj))
    assert run(["corruption", "verify", "--cert", str(d / "weak.json")]) == 1
    assert "verdict: fail" in capsys.readouterr().out


def test_quantum_commands(files, capsys):
    ts = files / "ts.json"
    assert run(["quantum", "tsirelson", "--out", str(ts)]) == 0
    assert run(["quantum", "eval", "--strategy", str(ts), "--b", str(files / "chsh.json"),
                "--out", str(files / "q2.json")]) == 0
    out = capsys.readouterr().out
    assert "B(q) = 390050/275807" in out
    assert read_distribution(files / "q2.json") == read_distribution(files / "q.json")
    assert run(["eff", "--p", str(files / "pr.json"), "--certificate", str(files / "effb.json")]) == 0
    assert run(["quantum", "compile", "--p", str(files / "pr.json"), "--b", str(files / "effb.json"),
                "--beta", "2", "--ma", "2", "--mb", "2", "--out", str(files / "comp")]) == 0
    assert "K = 4" in capsys.readouterr().out


def test_report_is_deterministic(files, capsys):
    run(["eff", "--p", str(files / "pr.json"), "--certificate", str(files / "effb.json")])
    args = ["report", "violation", "--p", str(files / "pr.json"), "--b", str(files / "effb.json"),
            "--q", str(files / "q.json")]
    assert run(args + ["--out", str(files / "r1")]) == 0
    assert run(args + ["--out", str(files / "r2")]) == 0
    for name in ("report.txt", "report.tsv", "violation.png"):
        assert (files / "r1" / name).read_bytes() == (files / "r2" / name).read_bytes()
    tsv = (files / "r1" / "report.tsv").read_text().splitlines()
    header = tsv.index("quantity\texact\tdecimal\tverdict\tnote")
    ratio = [line for line in tsv[header:] if line.startswith("ratio")]
    assert ratio[0].split("\t")[3] == "pass"


def test_report_fails_without_violation(files):
    # the uniform family does not violate
    from bellcert.core import uniform_distribution

    write_distribution(uniform_distribution(pr_box().scenario), files / "u.json")
    rc = run(["report", "violation", "--b", str(files / "chsh.json"), "--q", str(files / "u.json")])
    assert rc == 1


def test_exit_codes(files, capsys, monkeypatch):
    assert run(["nu", "--p", str(files / "missing.json")]) == 2
    (files / "bad.json").write_text("{")
    assert run(["nu", "--p", str(files / "bad.json")]) == 2
    assert run(["ldet", "max", "--b", str(files / "chsh.json"), "--budget", "2"]) == 3
    monkeypatch.setenv("BELLCERT_BUDGET", "2")
    assert run(["ldet", "max", "--b", str(files / "chsh.json")]) == 3
    err = capsys.readouterr().err
    assert "budget" in err
