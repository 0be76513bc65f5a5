import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from condkernel.parser import (
    CtorSyntax,
    DataSyntax,
    FuncSyntax,
    ParseFailed,
    RecordSyntax,
    parse_module,
    parse_term,
    pretty_term,
)
from condkernel.syntax import App, Coe, Con, Data, Lam, Pi, Proj, Squeeze, Var, alpha_eq
from conftest import load_sig
from strategies import terms


def _scope():
    sig = load_sig("path")
    for d in load_sig("int").decls:
        sig = sig.extend(d)
    return sig


SCOPE = _scope()


@pytest.fixture
def scope():
    return SCOPE


def test_parse_z_declaration():
    mod = parse_module("data Z : U | pos N | neg N with { zero => pos zero }")
    (d,) = mod.declarations
    assert isinstance(d, DataSyntax) and d.name == "Z"
    pos, neg = d.ctors
    assert isinstance(pos, CtorSyntax) and pos.clauses == ()
    assert [p.name for p in neg.clauses[0].patterns] == ["zero"]


def test_unbraced_condition_matches_braced():
    a = parse_module("data Z : U | pos N | neg N with zero => pos zero").declarations[0]
    b = parse_module("data Z : U | pos N | neg N with { zero => pos zero }").declarations[0]
    pa, pb = a.ctors[1].clauses[0].patterns, b.ctors[1].clauses[0].patterns
    assert [(p.name, p.args) for p in pa] == [(p.name, p.args) for p in pb]
    assert alpha_eq(a.ctors[1].clauses[0].body, b.ctors[1].clauses[0].body)


def test_empty_module():
    assert parse_module("").declarations == ()


def test_comments_only_module():
    assert parse_module("-- nothing here\n").declarations == ()


def test_missing_name_is_parse_error():
    with pytest.raises(ParseFailed) as ei:
        parse_module("data : U")
    diags = ei.value.diagnostics
    assert diags and all(d.code == "ParseError" for d in diags)
    assert all(d.span is not None for d in diags)


def test_errors_are_collected_across_declarations():
    with pytest.raises(ParseFailed) as ei:
        parse_module("data : U\nfunc f : U => )\ndata N : U | zero")
    assert len(ei.value.diagnostics) == 2


def test_declaration_order_and_kinds():
    text = (
        "data N : U | zero | suc N\n"
        "record R (A : U) : U | fst : A\n"
        "func one : N => suc zero\n"
    )
    mod = parse_module(text)
    assert [type(d) for d in mod.declarations] == [DataSyntax, RecordSyntax, FuncSyntax]
    assert [d.name for d in mod.declarations] == ["N", "R", "one"]
    for d in mod.declarations:
        lo, hi = d.span
        assert 0 <= lo < hi <= len(text)


def test_multi_parameter_patterns():
    mod = parse_module("data T : U | p | f (i j : I) with { left, i => p | i, right => p }")
    f = mod.declarations[0].ctors[1]
    assert [len(c.patterns) for c in f.clauses] == [2, 2]


@pytest.mark.parametrize(
    "text, expected",
    [
        ("(x : A) -> B", Pi("x", Var("A"), Var("B"))),
        ("coe (\\i. A) j a", Coe(Lam("i", Var("A")), Var("j"), Var("a"))),
        ("f a b", App(App(Var("f"), Var("a")), Var("b"))),
        ("A -> B -> C", Pi("_", Var("A"), Pi("_", Var("B"), Var("C")))),
        ("i /\\ j /\\ k", Squeeze(Squeeze(Var("i"), Var("j")), Var("k"))),
        ("p.at i", App(Proj(Var("p"), "", (), "at"), Var("i"))),
    ],
)
def test_parse_term_examples(text, expected):
    assert alpha_eq(parse_term(text), expected)


def test_neg_zero_resolves_to_constructor(scope):
    assert parse_term("neg zero", scope) == Con("neg", (), (Con("zero"),))


def test_data_resolves_with_params(scope):
    t = parse_term("Path (\\i. N) zero zero", scope)
    assert isinstance(t, Data) and len(t.params) == 3


@pytest.mark.parametrize("text", ["(", "\\. x", "case (f x) { }", "coe a b", "x .at", "new { }"])
def test_parse_term_errors(text):
    with pytest.raises(ParseFailed):
        parse_term(text)


@pytest.mark.parametrize(
    "t, expected",
    [
        (Con("pos", (), (Con("zero"),)), "pos zero"),
        (Pi("x", Data("N"), Data("N")), "N -> N"),
        (Pi("x", Data("N"), Var("x")), "(x : N) -> x"),
        (Lam("x", Lam("y", Var("x"))), "\\x y. x"),
        (Squeeze(Var("i"), Squeeze(Var("j"), Var("k"))), "i /\\ (j /\\ k)"),
    ],
)
def test_pretty_examples(t, expected):
    assert pretty_term(t) == expected


@settings(max_examples=500)
@given(terms())
def test_round_trip(t):
    text = pretty_term(t)
    assert alpha_eq(parse_term(text, SCOPE), t), text


@settings(max_examples=500)
@given(st.text(alphabet="dataU:|=>(){}\\.xyz ->,/", max_size=40))
def test_parsing_is_total(text):
    try:
        mod = parse_module(text)
    except ParseFailed as e:
        assert e.diagnostics and all(d.code == "ParseError" for d in e.diagnostics)
    else:
        assert mod.declarations is not None
