import json
import subprocess
import sys

import pytest

from condkernel.cli import main
from condkernel.parser import parse_term
from condkernel.typecheck import Checker
from conftest import CORPUS, NEGATIVE, POSITIVE, ctx_of, load_sig


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.mark.parametrize("path", POSITIVE, ids=lambda p: p.stem)
def test_check_positive(capsys, path):
    code, out, err = run(capsys, "check", str(path))
    assert code == 0 and "ok" in out and err == ""


EXPECTED_CODES = {
    "bad_circle": "ConfluenceViolation",
    "bad_endpoint": "ConfluenceViolation",
    "bad_pred": "ConfluenceViolation",
    "infer_universe": "UniverseHasNoType",
    "interval_split": "IllegalIntervalSplit",
    "missing_neg": "NotCovering",
    "self_condition": "UnknownName",
}


@pytest.mark.parametrize("path", NEGATIVE, ids=lambda p: p.stem)
def test_check_negative_json(capsys, path):
    code, out, _ = run(capsys, "check", "--json", str(path))
    assert code == 1
    lines = [json.loads(x) for x in out.splitlines()]
    assert [d["code"] for d in lines] == [EXPECTED_CODES[path.stem]]
    lo, hi = lines[0]["span"]
    assert 0 <= lo < hi <= len(path.read_bytes())


def test_check_text_diagnostic_goes_to_stderr(capsys):
    code, out, err = run(capsys, "check", str(CORPUS / "negative" / "bad_pred.cond"))
    assert code == 1 and out == ""
    assert "error[ConfluenceViolation]" in err and "bad_pred.cond:" in err


def test_check_missing_file(capsys, tmp_path):
    code, out, err = run(capsys, "check", str(tmp_path / "missing.cond"))
    assert code == 2 and "IOError" in err


def test_check_mixed_files_takes_worst_status(capsys, tmp_path):
    code, _, _ = run(capsys, "check", str(POSITIVE[0]), str(CORPUS / "negative" / "bad_pred.cond"), str(tmp_path / "x.cond"))
    assert code == 2


def test_check_parse_error(capsys, tmp_path):
    f = tmp_path / "broken.cond"
    f.write_text("data : U\n")
    code, out, _ = run(capsys, "check", "--json", str(f))
    assert code == 1 and json.loads(out)["code"] == "ParseError"


def test_json_spans_are_bytes(capsys, tmp_path):
    f = tmp_path / "utf.cond"
    f.write_text("-- é\nfunc u : U => U\n", encoding="utf-8")
    code, out, _ = run(capsys, "check", "--json", str(f))
    d = json.loads(out)
    assert code == 1 and d["code"] == "UniverseHasNoType"
    # the span covers the body U, counted in bytes rather than characters
    assert d["span"] == [len("-- é\nfunc u : U => ".encode()), len("-- é\nfunc u : U => U".encode())]


@pytest.mark.parametrize(
    "file, expr, ctx, expected",
    [
        ("int", "neg zero", None, "pos zero"),
        ("conat", "suc infty", None, "infty"),
        ("int", "pred (neg zero)", None, "neg (suc zero)"),
        ("int", "pred (pos zero)", None, "neg (suc zero)"),
        ("conat", "coe (\\i. Ninf) right zero", None, "zero"),
        ("circle", "loop left", None, "base"),
        ("circle", "loop right", None, "base"),
        ("torus", "face left j", "(j : I)", "line2 j"),
        ("torus", "face j left", "(j : I)", "line1 j"),
        ("path", "coe (\\i. A) j a", "(A : U) (a : A) (j : I)", "a"),
        ("path", "coe F left a", "(F : I -> U) (a : F left)", "a"),
        ("path", "left /\\ j", "(j : I)", "left"),
        ("path", "right /\\ j", "(j : I)", "j"),
        ("path", "j /\\ left", "(j : I)", "left"),
        ("path", "j /\\ right", "(j : I)", "j"),
        ("path", "p.at left", "(A : U) (a b : A) (p : Path (\\i. A) a b)", "a"),
    ],
)
def test_eval(capsys, file, expr, ctx, expected):
    argv = ["eval", str(CORPUS / f"{file}.cond"), "--expr", expr]
    if ctx:
        argv += ["--ctx", ctx]
    code, out, _ = run(capsys, *argv)
    assert code == 0
    assert out.strip() == expected


J_CTX = "(A : U) (x : A) (P : (y : A) -> Path (\\i. A) x y -> U) (p : P x (refl A x))"


def test_eval_trace(capsys):
    code, out, _ = run(
        capsys, "eval", str(CORPUS / "path.cond"), "--expr", "J A x x P p (refl A x)", "--ctx", J_CTX, "--trace"
    )
    normal, steps = out.splitlines()
    assert code == 0 and normal == "p"
    assert [s["rule"] for s in json.loads(steps)] == ["unfold J", "unfold refl", "projection", "regularity"]


def test_eval_json(capsys):
    code, out, _ = run(capsys, "eval", "--json", str(CORPUS / "int.cond"), "--expr", "neg zero")
    assert code == 0 and json.loads(out) == {"normal": "pos zero", "type": "Z"}


@pytest.mark.parametrize(
    "expr, code_name",
    [("pos (pos zero)", "TypeMismatch"), ("zero zero", "ArityMismatch"), ("nothing", "UnknownName"), ("(", "ParseError"), ("U", "UniverseHasNoType")],
)
def test_eval_errors(capsys, expr, code_name):
    code, out, _ = run(capsys, "eval", "--json", str(CORPUS / "int.cond"), "--expr", expr)
    assert code == 1 and json.loads(out.splitlines()[0])["code"] == code_name


def test_eval_fuel(capsys):
    code, out, _ = run(
        capsys, "eval", "--json", "--fuel", "3", str(CORPUS / "int.cond"), "--expr", "pred (pred (pred (neg zero)))"
    )
    assert code == 1 and json.loads(out)["code"] == "FuelExhausted"


def test_eval_on_broken_file(capsys):
    code, _, err = run(capsys, "eval", str(CORPUS / "negative" / "bad_pred.cond"), "--expr", "zero")
    assert code == 1 and "ConfluenceViolation" in err


@pytest.mark.parametrize(
    "file, expr, ctx",
    [
        ("int", "pred (succ (neg (suc zero)))", None),
        ("conat", "thm (suc zero)", None),
        ("intelim", "abs (neg (suc (suc zero)))", None),
        ("path", "pmap A A (\\x. x) a a (refl A a)", "(A : U) (a : A)"),
        ("circle", "elimS1 S1 base loopPath (loop i)", "(i : I)"),
    ],
)
def test_eval_output_rechecks(capsys, file, expr, ctx):
    argv = ["eval", "--json", str(CORPUS / f"{file}.cond"), "--expr", expr]
    if ctx:
        argv += ["--ctx", ctx]
    code, out, _ = run(capsys, *argv)
    res = json.loads(out)
    sig = load_sig(file)
    chk = Checker(sig)
    context = ctx_of(sig, ctx) if ctx else ()
    ty = chk.check_is_type(context, parse_term(res["type"]))
    chk.check(context, parse_term(res["normal"]), ty)
    chk.discharge()


@pytest.mark.parametrize("name", ["int", "conat"])
def test_fuzz(capsys, name):
    code, out, _ = run(capsys, "fuzz", str(CORPUS / f"{name}.cond"), "--seeds", "1000", "--seed", "0")
    rep = json.loads(out)
    assert code == 0 and rep["checked"] == 1000 and rep["disagreements"] == []


def test_fuzz_zero_seeds(capsys):
    code, out, _ = run(capsys, "fuzz", str(CORPUS / "int.cond"), "--seeds", "0")
    assert code == 0 and json.loads(out) == {"seeds": 0, "checked": 0, "disagreements": []}


def test_fuzz_broken_pred_needs_bypass(capsys):
    bad = str(CORPUS / "negative" / "bad_pred.cond")
    code, _, _ = run(capsys, "fuzz", bad)
    assert code == 1
    code, out, _ = run(capsys, "fuzz", bad, "--unsafe-skip-confluence", "--seeds", "1000")
    rep = json.loads(out)
    assert code == 1 and rep["disagreements"]
    assert set(rep["disagreements"][0]) == {"seed", "term", "normalA", "normalB"}


def test_json_output_is_byte_identical():
    argv = [sys.executable, "-m", "condkernel.cli"]
    outs = []
    for _ in range(2):
        p1 = subprocess.run(argv + ["check", "--json", *map(str, NEGATIVE)], capture_output=True)
        p2 = subprocess.run(argv + ["fuzz", str(CORPUS / "int.cond"), "--seeds", "200", "--seed", "3"], capture_output=True)
        outs.append((p1.returncode, p1.stdout, p2.returncode, p2.stdout))
    assert outs[0] == outs[1]
    assert outs[0][0] == 1 and outs[0][2] == 0


def test_console_script():
    p = subprocess.run(["condkernel", "check", str(CORPUS / "int.cond")], capture_output=True, text=True)
    assert p.returncode == 0


def test_usage_error(capsys):
    with pytest.raises(SystemExit) as ei:
        main(["eval", str(CORPUS / "int.cond")])
    assert ei.value.code == 2
