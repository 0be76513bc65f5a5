import pytest
from hypothesis import assume, given, settings

from condkernel.reduction import (
    RULE_ORDER,
    FuelExhausted,
    Reducer,
    Strategy,
    condition_reduce,
    convertible,
    normalize,
    projection_reduce,
    trace,
    whnf,
)
from condkernel.syntax import App, Coe, Con, Lam, Left, Proj, Right, Squeeze, Var, alpha_eq
from conftest import ctx_of, elab, load_sig
from strategies import kernel_terms

zero = Con("zero")


def nf_text(sig, text, tele=""):
    ctx = ctx_of(sig, tele) if tele else ()
    t, _ = elab(sig, text, ctx)
    return str(normalize(sig, t))


def whnf_text(sig, text, tele=""):
    ctx = ctx_of(sig, tele) if tele else ()
    t, _ = elab(sig, text, ctx)
    return str(whnf(sig, t))


# -- whnf


@pytest.mark.parametrize(
    "corpus, text, tele, expected",
    [
        ("int", "neg zero", "", "pos zero"),
        ("int", "neg (suc zero)", "", "neg (suc zero)"),
        ("conat", "suc infty", "", "infty"),
        ("conat", "suc (suc infty)", "", "infty"),
        ("path", "coe (\\i. A) j a", "(A : U) (a : A) (j : I)", "a"),
        ("path", "coe F left a", "(F : I -> U) (a : F left)", "a"),
        ("path", "right /\\ j", "(j : I)", "j"),
        ("path", "left /\\ j", "(j : I)", "left"),
        ("path", "j /\\ left", "(j : I)", "left"),
        ("path", "j /\\ right", "(j : I)", "j"),
        ("path", "i /\\ i", "(i : I)", "i /\\ i"),
        ("circle", "loop left", "", "base"),
        ("circle", "loop right", "", "base"),
        ("circle", "loop j", "(j : I)", "loop j"),
        ("torus", "face left j", "(j : I)", "line2 j"),
        ("torus", "face j left", "(j : I)", "line1 j"),
        ("torus", "face left left", "", "point"),
        ("int", "x", "(x : Z)", "x"),
    ],
)
def test_whnf_examples(corpus, text, tele, expected):
    assert whnf_text(load_sig(corpus), text, tele) == expected


def test_regularity_looks_at_the_normalized_family(path_sig):
    fam = Lam("i", App(Lam("k", Var("A")), Var("i")))
    assert whnf(path_sig, Coe(fam, Var("j"), Var("a"))) == Var("a")


def test_stuck_coe_is_a_normal_form(path_sig):
    out = nf_text(path_sig, "coe F j a", "(F : I -> U) (a : F left) (j : I)")
    assert out == "coe F j a"


def test_coe_family_dependent_on_its_variable_is_stuck(path_sig):
    ctx = ctx_of(path_sig, "(F : I -> U) (a : F left) (j : I)")
    t, _ = elab(path_sig, "coe (\\i. F i) j a", ctx)
    assert isinstance(whnf(path_sig, t), Coe)


# -- normalize


@pytest.mark.parametrize(
    "corpus, text, expected",
    [
        ("int", "pred (neg zero)", "neg (suc zero)"),
        ("int", "pred (pos zero)", "neg (suc zero)"),
        ("int", "succ (neg (suc zero))", "pos zero"),
        ("int", "negate (pos zero)", "pos zero"),
        ("int", "zero", "zero"),
        ("conat", "plus infty (suc zero)", "infty"),
        ("conat", "times (suc (suc zero)) (suc (suc zero))", "suc (suc (suc (suc zero)))"),
        ("intelim", "abs (neg (suc zero))", "suc zero"),
        ("intelim", "abs (neg zero)", "zero"),
    ],
)
def test_normalize_examples(corpus, text, expected):
    assert nf_text(load_sig(corpus), text) == expected


J_CTX = "(A : U) (x : A) (P : (y : A) -> Path (\\i. A) x y -> U) (p : P x (refl A x))"


def test_j_beta(path_sig):
    assert nf_text(path_sig, "J A x x P p (refl A x)", J_CTX) == "p"


def test_normalize_is_idempotent_on_corpus_examples(int_sig):
    t, _ = elab(int_sig, "pred (succ z)", ctx_of(int_sig, "(z : Z)"))
    n = normalize(int_sig, t)
    assert alpha_eq(normalize(int_sig, n), n)


def test_fuel_exhaustion():
    from condkernel.syntax import Signature

    omega = Lam("x", App(Var("x"), Var("x")))
    with pytest.raises(FuelExhausted) as ei:
        normalize(Signature(), App(omega, omega), fuel=1000)
    assert ei.value.code == "FuelExhausted"


# -- conditionReduce


def test_condition_reduce_fires(int_sig):
    assert condition_reduce(int_sig, "neg", [], [zero]) == Con("pos", (), (zero,))


def test_condition_reduce_canonical(int_sig):
    assert condition_reduce(int_sig, "neg", [], [Con("suc", (), (zero,))]) is None


def test_condition_reduce_torus(torus_sig):
    out = condition_reduce(torus_sig, "face", [], [Left(), Var("j")])
    assert out == Con("line2", (), (Var("j"),))


def test_condition_reduce_neutral_interval(circle_sig):
    assert condition_reduce(circle_sig, "loop", [], [Var("i")]) is None


# -- convertible


def test_convertible_condition(int_sig):
    assert convertible(int_sig, Con("neg", (), (zero,)), Con("pos", (), (zero,)))


def test_convertible_alpha(int_sig):
    assert convertible(int_sig, Lam("x", Var("x")), Lam("y", Var("y")))


def test_not_convertible(int_sig):
    assert not convertible(int_sig, Con("neg", (), (Con("suc", (), (zero,)),)), Con("pos", (), (zero,)))


def test_convertible_under_record_fields(conat_sig):
    a, _ = elab(conat_sig, "new Path (\\i. Ninf) infty infty { at => \\i. suc infty }")
    b, _ = elab(conat_sig, "new Path (\\i. Ninf) infty infty { at => \\i. infty }")
    assert convertible(conat_sig, a, b)


# -- projectionReduce

PATH_CTX = "(A : U) (a b : A) (p : Path (\\i. A) a b) (f : I -> A) (j : I)"


def _proj(sig, text, tele=PATH_CTX):
    t, _ = elab(sig, text, ctx_of(sig, tele))
    return t


def test_projection_on_literal(path_sig):
    t = _proj(path_sig, "(new Path (\\i. A) (f left) (f right) { at => f }).at j")
    out = projection_reduce(path_sig, t.fn, t.arg)
    assert out == App(Var("f"), Var("j"))


@pytest.mark.parametrize("end, expected", [("left", "a"), ("right", "b")])
def test_projection_cocondition(path_sig, end, expected):
    t = _proj(path_sig, f"p.at {end}")
    assert isinstance(t.fn, Proj)
    assert projection_reduce(path_sig, t.fn, t.arg) == Var(expected)


def test_projection_stuck(path_sig):
    t = _proj(path_sig, "p.at j")
    assert projection_reduce(path_sig, t.fn, t.arg) is None


def test_path_application_substitutes(path_sig):
    out = nf_text(path_sig, "(path (\\i. A) (\\i. f (i /\\ j))).at right", PATH_CTX)
    assert out == "f j"


# -- traces


def test_j_trace_rules(path_sig):
    t, _ = elab(path_sig, "J A x x P p (refl A x)", ctx_of(path_sig, J_CTX))
    steps = trace(path_sig, t)
    assert [s.rule for s in steps] == ["unfold J", "unfold refl", "projection", "regularity"]
    assert steps[-1].after == Var("p")


@pytest.mark.parametrize(
    "corpus, text",
    [
        ("int", "pred (neg zero)"),
        ("int", "succ (pred (pos (suc zero)))"),
        ("conat", "thm (suc zero)"),
        ("torus", "tid (face left right)"),
    ],
)
def test_trace_steps_chain(corpus, text):
    sig = load_sig(corpus)
    t, _ = elab(sig, text)
    steps = trace(sig, t)
    assert steps and alpha_eq(steps[0].before, t)
    for s, nxt in zip(steps, steps[1:]):
        assert alpha_eq(s.after, nxt.before)
    assert alpha_eq(steps[-1].after, normalize(sig, t))
    for s in steps:
        assert s.rule.split()[0] in RULE_ORDER + ("normalize",)


# -- properties

INT = load_sig("int")
TORUS = load_sig("torus")
CONAT = load_sig("conat")


def _whnf_idem(sig, t):
    r = Reducer(sig, fuel=50_000)
    try:
        w = r.whnf(t)
        assert alpha_eq(r.whnf(w), w)
    except FuelExhausted:
        assume(False)


@settings(max_examples=500, deadline=None)
@given(kernel_terms(INT))
def test_whnf_idempotent_int(t):
    _whnf_idem(INT, t)


@settings(max_examples=500, deadline=None)
@given(kernel_terms(TORUS))
def test_whnf_idempotent_torus(t):
    _whnf_idem(TORUS, t)


@settings(max_examples=500, deadline=None)
@given(kernel_terms(CONAT))
def test_normalize_idempotent_conat(t):
    r = Reducer(CONAT, fuel=50_000)
    try:
        n = r.normalize(t)
        assert alpha_eq(r.normalize(n), n)
    except FuelExhausted:
        assume(False)


def _depth(sig, t):
    r = Reducer(sig, fuel=50_000)
    try:
        r.normalize(t)
    except FuelExhausted:
        assume(False)
    assert r.max_condition_chain <= sig.constructor_count()
    return r.max_condition_chain


@settings(max_examples=500, deadline=None)
@given(kernel_terms(INT))
def test_condition_depth_int(t):
    _depth(INT, t)


@settings(max_examples=500, deadline=None)
@given(kernel_terms(TORUS))
def test_condition_depth_torus(t):
    _depth(TORUS, t)


def test_condition_depth_is_observed(torus_sig):
    r = Reducer(torus_sig)
    r.normalize(Con("face", (), (Left(), Right())))
    assert 1 <= r.max_condition_chain <= torus_sig.constructor_count()


@pytest.mark.parametrize("strategy", list(Strategy))
def test_strategies_agree_on_pred(int_sig, strategy):
    t, _ = elab(int_sig, "pred (neg zero)")
    assert str(Reducer(int_sig, strategy=strategy).normalize(t)) == "neg (suc zero)"


def test_squeeze_is_left_biased_on_endpoints(path_sig):
    assert whnf(path_sig, Squeeze(Left(), Right())) == Left()
    assert whnf(path_sig, Squeeze(Right(), Right())) == Right()
