"""Concrete syntax: lexer, recursive-descent parser and pretty-printer.

Example module::

    data N : U | zero | suc N
    data Z : U | pos N | neg N with { zero => pos zero }
    func pred : Z -> Z => \\x. case x {
      | neg n => neg (suc n)
      | pos n => case n { zero => neg (suc zero) | suc m => pos m } }
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from .diagnostics import Diagnostic, KernelError, Span, fail
from .syntax import (
    App,
    Case,
    Clause,
    Coe,
    Con,
    Data,
    FuncRef,
    Interval,
    Lam,
    Left,
    Pi,
    Proj,
    RecordLit,
    Right,
    Signature,
    Squeeze,
    Telescope,
    Term,
    Universe,
    Var,
    free_vars,
    spine,
)

KEYWORDS = {"data", "record", "func", "case", "new", "with", "coe", "U", "I", "left", "right"}
DECL_KEYWORDS = {"data", "record", "func"}

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>--[^\n]*)
  | (?P<sym>=>|->|/\\|\\|λ|[(){}|:.,])
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "ident", "kw", "sym", "eof"
    value: str
    start: int
    end: int


def tokenize(text: str) -> list[Token]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise fail("ParseError", f"unexpected character {text[pos]!r}", (pos, pos + 1))
        kind = m.lastgroup
        if kind == "ident":
            v = m.group()
            toks.append(Token("kw" if v in KEYWORDS else "ident", v, m.start(), m.end()))
        elif kind == "sym":
            v = "\\" if m.group() == "λ" else m.group()
            toks.append(Token("sym", v, m.start(), m.end()))
        pos = m.end()
    toks.append(Token("eof", "", len(text), len(text)))
    return toks


# ---------------------------------------------------------------------------
# Surface declarations


@dataclass(frozen=True)
class PatternSyntax:
    name: str
    args: tuple[str, ...]
    span: Span


@dataclass(frozen=True)
class CondClause:
    patterns: tuple[PatternSyntax, ...]
    body: Term
    span: Span


@dataclass(frozen=True)
class CtorSyntax:
    name: str
    params: Telescope
    clauses: tuple[CondClause, ...]
    span: Span


@dataclass(frozen=True)
class FieldSyntax:
    name: str
    type: Term
    clauses: tuple[CondClause, ...]
    span: Span


@dataclass(frozen=True)
class DataSyntax:
    name: str
    params: Telescope
    ctors: tuple[CtorSyntax, ...]
    span: Span


@dataclass(frozen=True)
class RecordSyntax:
    name: str
    params: Telescope
    fields: tuple[FieldSyntax, ...]
    span: Span


@dataclass(frozen=True)
class FuncSyntax:
    name: str
    type: Term
    body: Term
    span: Span


SurfaceDecl = DataSyntax | RecordSyntax | FuncSyntax


@dataclass
class SourceModule:
    path: str
    text: str
    declarations: tuple[SurfaceDecl, ...]
    spans: dict[int, Span] = field(default_factory=dict, repr=False)

    def span_of(self, t: Term) -> Span | None:
        return self.spans.get(id(t))


class ParseFailed(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(d.message for d in diagnostics))
        self.diagnostics = diagnostics


# ---------------------------------------------------------------------------
# Parser


class Parser:
    def __init__(self, text: str):
        self.text = text
        self.toks = tokenize(text)
        self.pos = 0
        self.spans: dict[int, Span] = {}
        self._anon = 0

    # token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def at(self, value: str) -> bool:
        t = self.tok
        return t.kind in ("sym", "kw") and t.value == value

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.pos += 1
        return t

    def expect(self, value: str) -> Token:
        if not self.at(value):
            raise self.error(f"expected {value!r}")
        return self.advance()

    def ident(self) -> Token:
        if self.tok.kind != "ident":
            raise self.error("expected identifier")
        return self.advance()

    def error(self, msg: str) -> KernelError:
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.value)
        return fail("ParseError", f"{msg}, found {found}", (t.start, max(t.end, t.start + 1)))

    def mark(self, t: Term, start: int) -> Term:
        end = self.toks[self.pos - 1].end if self.pos else start
        self.spans[id(t)] = (start, end)
        return t

    # module

    def module(self, path: str = "<input>") -> SourceModule:
        decls = []
        diags = []
        while self.tok.kind != "eof":
            try:
                decls.append(self.decl())
            except KernelError as e:
                diags.append(e.diag)
                self.advance()
                while self.tok.kind != "eof" and not (self.tok.kind == "kw" and self.tok.value in DECL_KEYWORDS):
                    self.pos += 1
        if diags:
            raise ParseFailed(diags)
        return SourceModule(path, self.text, tuple(decls), self.spans)

    def decl(self) -> SurfaceDecl:
        start = self.tok.start
        if self.at("data"):
            self.advance()
            name = self.ident().value
            params = self.telescope()
            self.expect(":")
            self.expect("U")
            ctors = []
            while self.at("|"):
                ctors.append(self.ctor())
            return DataSyntax(name, params, tuple(ctors), (start, self.toks[self.pos - 1].end))
        if self.at("record"):
            self.advance()
            name = self.ident().value
            params = self.telescope()
            self.expect(":")
            self.expect("U")
            fields = []
            while self.at("|"):
                fstart = self.advance().start
                fname = self.ident().value
                self.expect(":")
                ty = self.term()
                clauses = self.cond_body() if self.at("with") else ()
                fields.append(FieldSyntax(fname, ty, clauses, (fstart, self.toks[self.pos - 1].end)))
            return RecordSyntax(name, params, tuple(fields), (start, self.toks[self.pos - 1].end))
        if self.at("func"):
            self.advance()
            name = self.ident().value
            self.expect(":")
            ty = self.term()
            self.expect("=>")
            body = self.term()
            if not (self.tok.kind == "eof" or (self.tok.kind == "kw" and self.tok.value in DECL_KEYWORDS)):
                raise self.error("expected end of declaration")
            return FuncSyntax(name, ty, body, (start, self.toks[self.pos - 1].end))
        raise self.error("expected 'data', 'record' or 'func'")

    def telescope(self) -> Telescope:
        out = []
        while self.at("(") and self.binder_group_ahead():
            out.extend(self.binder_group())
        return tuple(out)

    def binder_group_ahead(self) -> bool:
        k = 1
        if self.peek(k).kind != "ident":
            return False
        while self.peek(k).kind == "ident":
            k += 1
        t = self.peek(k)
        return t.kind == "sym" and t.value == ":"

    def binder_group(self) -> list[tuple[str, Term]]:
        self.expect("(")
        names = [self.ident().value]
        while self.tok.kind == "ident":
            names.append(self.advance().value)
        self.expect(":")
        ty = self.term()
        self.expect(")")
        return [(x, ty) for x in names]

    def ctor(self) -> CtorSyntax:
        start = self.expect("|").start
        name = self.ident().value
        params = []
        while True:
            if self.at("(") and self.binder_group_ahead():
                params.extend(self.binder_group())
            elif self.starts_atom():
                self._anon += 1
                params.append((f"_{self._anon}", self.postfix()))
            else:
                break
        clauses = self.cond_body() if self.at("with") else ()
        return CtorSyntax(name, tuple(params), clauses, (start, self.toks[self.pos - 1].end))

    def cond_body(self) -> tuple[CondClause, ...]:
        self.expect("with")
        if self.at("{"):
            self.advance()
            if self.at("|"):
                self.advance()
            clauses = [self.cond_clause()]
            while self.at("|"):
                self.advance()
                clauses.append(self.cond_clause())
            self.expect("}")
            return tuple(clauses)
        return (self.cond_clause(),)

    def cond_clause(self) -> CondClause:
        start = self.tok.start
        pats = [self.pattern()]
        while self.at(","):
            self.advance()
            pats.append(self.pattern())
        self.expect("=>")
        body = self.term()
        return CondClause(tuple(pats), body, (start, self.toks[self.pos - 1].end))

    def pattern(self) -> PatternSyntax:
        t = self.tok
        if self.at("left") or self.at("right"):
            self.advance()
            return PatternSyntax(t.value, (), (t.start, t.end))
        if self.at("("):
            self.advance()
            p = self.pattern()
            self.expect(")")
            return p
        name = self.ident().value
        args = []
        while self.tok.kind == "ident":
            args.append(self.advance().value)
        return PatternSyntax(name, tuple(args), (t.start, self.toks[self.pos - 1].end))

    # terms

    def term(self) -> Term:
        start = self.tok.start
        if self.at("\\"):
            self.advance()
            names = [self.ident().value]
            while self.tok.kind == "ident":
                names.append(self.advance().value)
            self.expect(".")
            body = self.term()
            for x in reversed(names):
                body = self.mark(Lam(x, body), start)
            return body
        if self.at("(") and self.binder_group_ahead():
            groups = []
            while self.at("(") and self.binder_group_ahead():
                groups.extend(self.binder_group())
            self.expect("->")
            cod = self.term()
            for x, ty in reversed(groups):
                cod = self.mark(Pi(x, ty, cod), start)
            return cod
        lhs = self.squeeze()
        if self.at("->"):
            self.advance()
            cod = self.term()
            x = _unused_name(cod)
            return self.mark(Pi(x, lhs, cod), start)
        return lhs

    def squeeze(self) -> Term:
        start = self.tok.start
        t = self.app()
        while self.at("/\\"):
            self.advance()
            t = self.mark(Squeeze(t, self.app()), start)
        return t

    def starts_atom(self) -> bool:
        t = self.tok
        if t.kind == "ident":
            return True
        if t.kind == "kw":
            return t.value in ("U", "I", "left", "right", "case", "new")
        return t.kind == "sym" and t.value == "("

    def app(self) -> Term:
        start = self.tok.start
        if self.at("coe"):
            self.advance()
            args = []
            for _ in range(3):
                if not self.starts_atom():
                    raise self.error("coe expects a family, a point and an argument")
                args.append(self.postfix())
            head = self.mark(Coe(*args), start)
        elif self.starts_atom():
            head = self.postfix()
        else:
            raise self.error("expected a term")
        while self.starts_atom():
            head = self.mark(App(head, self.postfix()), start)
        return head

    def postfix(self) -> Term:
        start = self.tok.start
        t = self.atom()
        while self.at(".") and self.tok.start == self.toks[self.pos - 1].end and self.peek().kind == "ident":
            self.advance()
            f = self.advance().value
            t = self.mark(Proj(t, "", (), f), start)
        return t

    def atom(self) -> Term:
        t = self.tok
        start = t.start
        if t.kind == "ident":
            self.advance()
            return self.mark(Var(t.value), start)
        if self.at("U"):
            self.advance()
            return self.mark(Universe(), start)
        if self.at("I"):
            self.advance()
            return self.mark(Interval(), start)
        if self.at("left"):
            self.advance()
            return self.mark(Left(), start)
        if self.at("right"):
            self.advance()
            return self.mark(Right(), start)
        if self.at("("):
            self.advance()
            inner = self.term()
            self.expect(")")
            return inner
        if self.at("case"):
            self.advance()
            vt = self.ident()
            scrut = Var(vt.value)
            self.spans[id(scrut)] = (vt.start, vt.end)
            self.expect("{")
            clauses = []
            if self.at("|"):
                self.advance()
            if not self.at("}"):
                clauses.append(self.case_clause())
                while self.at("|"):
                    self.advance()
                    clauses.append(self.case_clause())
            self.expect("}")
            return self.mark(Case(scrut, tuple(clauses)), start)
        if self.at("new"):
            self.advance()
            rec = self.ident().value
            params = []
            while not self.at("{"):
                if not self.starts_atom():
                    raise self.error("expected record parameters or '{'")
                params.append(self.postfix())
            self.expect("{")
            fields = []
            if self.at("|"):
                self.advance()
            if not self.at("}"):
                fields.append(self.field_def())
                while self.at("|"):
                    self.advance()
                    fields.append(self.field_def())
            self.expect("}")
            return self.mark(RecordLit(rec, tuple(params), tuple(fields)), start)
        raise self.error("expected a term")

    def case_clause(self) -> Clause:
        t = self.tok
        if self.at("left") or self.at("right"):
            self.advance()
            con = t.value
        else:
            con = self.ident().value
        binders = []
        while self.tok.kind == "ident":
            binders.append(self.advance().value)
        self.expect("=>")
        return Clause(con, tuple(binders), self.term())

    def field_def(self) -> tuple[str, Term]:
        name = self.ident().value
        self.expect("=>")
        return name, self.term()


def _unused_name(cod: Term) -> str:
    fv = free_vars(cod)
    x = "_"
    k = 0
    while x in fv:
        k += 1
        x = f"_{k}"
    return x


def parse_module(text: str, path: str = "<input>") -> SourceModule:
    """Parse a whole module. Raises ``ParseFailed`` with every diagnostic."""
    try:
        return Parser(text).module(path)
    except KernelError as e:  # lexer errors
        raise ParseFailed([e.diag]) from None


def parse_term(text: str, scope: Signature | None = None) -> Term:
    """Parse a single term. With ``scope``, global names are resolved."""
    try:
        p = Parser(text)
        t = p.term()
        if p.tok.kind != "eof":
            raise p.error("unexpected trailing input")
    except KernelError as e:
        raise ParseFailed([e.diag]) from None
    return resolve(t, scope) if scope is not None else t


def parse_telescope(text: str) -> Telescope:
    try:
        p = Parser(text)
        tele = p.telescope()
        if p.tok.kind != "eof":
            raise p.error("expected a binder group '(x : A)'")
    except KernelError as e:
        raise ParseFailed([e.diag]) from None
    return tele


# ---------------------------------------------------------------------------
# Name resolution against a signature


def resolve(t: Term, sig: Signature, bound: frozenset[str] = frozenset()) -> Term:
    """Turn identifiers naming constructors, types and functions into their nodes.

    Parameter instantiations stay empty; the checker fills them in.
    """
    match t:
        case Var(x):
            if x in bound:
                return t
            if sig.func(x):
                return FuncRef(x)
            if sig.data(x) or sig.record(x):
                return Data(x, ())
            if sig.constructor(x):
                return Con(x, (), ())
            return t
        case App():
            head, args = spine(t)
            h = resolve(head, sig, bound)
            rargs = [resolve(a, sig, bound) for a in args]
            if isinstance(head, (Var, Con, Data)) and isinstance(h, Con):
                return Con(h.name, h.params, h.args + tuple(rargs))
            if isinstance(head, (Var, Data)) and isinstance(h, Data):
                return Data(h.name, h.params + tuple(rargs))
            out = h
            for a in rargs:
                out = App(out, a)
            return out
        case Pi(x, a, b):
            return Pi(x, resolve(a, sig, bound), resolve(b, sig, bound | {x}))
        case Lam(x, b):
            return Lam(x, resolve(b, sig, bound | {x}))
        case Data(n, ps):
            return Data(n, tuple(resolve(p, sig, bound) for p in ps))
        case Con(n, ps, args):
            return Con(n, tuple(resolve(p, sig, bound) for p in ps), tuple(resolve(a, sig, bound) for a in args))
        case Case(s, cs):
            return Case(
                resolve(s, sig, bound),
                tuple(Clause(c.con, c.binders, resolve(c.body, sig, bound | set(c.binders))) for c in cs),
            )
        case RecordLit(r, ps, fs):
            return RecordLit(r, tuple(resolve(p, sig, bound) for p in ps), tuple((f, resolve(b, sig, bound)) for f, b in fs))
        case Proj(a, r, ps, f):
            return Proj(resolve(a, sig, bound), r, tuple(resolve(p, sig, bound) for p in ps), f)
        case Coe(f, i, a):
            return Coe(resolve(f, sig, bound), resolve(i, sig, bound), resolve(a, sig, bound))
        case Squeeze(a, b):
            return Squeeze(resolve(a, sig, bound), resolve(b, sig, bound))
    return t


# ---------------------------------------------------------------------------
# Pretty-printing

_TERM, _SQ, _APP, _ATOM = range(4)


def pretty_term(t: Term) -> str:
    return _pp(t, _TERM)


def _paren(s: str, needed: bool) -> str:
    return f"({s})" if needed else s


def _pp(t: Term, prec: int) -> str:
    match t:
        case Var(x) | FuncRef(x):
            return x
        case Universe():
            return "U"
        case Interval():
            return "I"
        case Left():
            return "left"
        case Right():
            return "right"
        case Lam():
            names = []
            while isinstance(t, Lam):
                names.append(t.name)
                t = t.body
            return _paren(f"\\{' '.join(names)}. {_pp(t, _TERM)}", prec > _TERM)
        case Pi(x, a, b):
            if x in free_vars(b):
                s = f"({x} : {_pp(a, _TERM)}) -> {_pp(b, _TERM)}"
            else:
                s = f"{_pp(a, _SQ)} -> {_pp(b, _TERM)}"
            return _paren(s, prec > _TERM)
        case Squeeze(a, b):
            return _paren(f"{_pp(a, _SQ)} /\\ {_pp(b, _APP)}", prec > _SQ)
        case App():
            head, args = spine(t)
            s = " ".join([_pp(head, _APP)] + [_pp(a, _ATOM) for a in args])
            return _paren(s, prec > _APP)
        case Data(n, ps) | Con(n, _, ps):
            if not ps:
                return n
            return _paren(" ".join([n] + [_pp(p, _ATOM) for p in ps]), prec > _APP)
        case Coe(f, i, a):
            return _paren(f"coe {_pp(f, _ATOM)} {_pp(i, _ATOM)} {_pp(a, _ATOM)}", prec > _APP)
        case Proj(a, _, _, f):
            return f"{_pp(a, _ATOM)}.{f}"
        case Case(s, cs):
            body = " | ".join(" ".join([c.con, *c.binders, "=>", _pp(c.body, _TERM)]) for c in cs)
            out = f"case {_pp(s, _ATOM)} {{ {body} }}" if cs else f"case {_pp(s, _ATOM)} {{ }}"
            return _paren(out, prec > _APP)
        case RecordLit(r, ps, fs):
            head = " ".join(["new", r] + [_pp(p, _ATOM) for p in ps])
            body = " | ".join(f"{f} => {_pp(b, _TERM)}" for f, b in fs)
            out = f"{head} {{ {body} }}" if fs else f"{head} {{ }}"
            return _paren(out, prec > _APP)
    raise TypeError(f"not a term: {t!r}")


def pretty_telescope(tele: Telescope) -> str:
    return " ".join(f"({x} : {pretty_term(ty)})" for x, ty in tele)
