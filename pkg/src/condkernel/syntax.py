"""Core term language, declarations and the structural operations on them.

Terms use named binders. Substitution renames binders on capture, and
``alpha_eq`` compares binders positionally, so two terms that differ only
in bound names are equal under it.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence


class Term:
    __slots__ = ()

    def __str__(self) -> str:
        from .parser import pretty_term

        return pretty_term(self)


@dataclass(frozen=True, slots=True)
class Var(Term):
    name: str


@dataclass(frozen=True, slots=True)
class Pi(Term):
    name: str
    dom: Term
    cod: Term


@dataclass(frozen=True, slots=True)
class Lam(Term):
    name: str
    body: Term


@dataclass(frozen=True, slots=True)
class App(Term):
    fn: Term
    arg: Term


@dataclass(frozen=True, slots=True)
class Data(Term):
    """Fully applied type former; ``name`` is a data or a record declaration."""

    name: str
    params: tuple[Term, ...] = ()


@dataclass(frozen=True, slots=True)
class Con(Term):
    """Fully applied constructor.

    ``params`` holds the data type's parameter instantiation. Surface terms
    leave it empty and elaboration fills it in.
    """

    name: str
    params: tuple[Term, ...] = ()
    args: tuple[Term, ...] = ()


@dataclass(frozen=True, slots=True)
class Clause:
    con: str
    binders: tuple[str, ...]
    body: Term


@dataclass(frozen=True, slots=True)
class Case(Term):
    scrutinee: Term
    clauses: tuple[Clause, ...]

    def clause_for(self, con: str) -> Clause | None:
        for cl in self.clauses:
            if cl.con == con:
                return cl
        return None


@dataclass(frozen=True, slots=True)
class RecordLit(Term):
    record: str
    params: tuple[Term, ...]
    fields: tuple[tuple[str, Term], ...]

    def field_body(self, name: str) -> Term | None:
        for f, body in self.fields:
            if f == name:
                return body
        return None


@dataclass(frozen=True, slots=True)
class Proj(Term):
    target: Term
    record: str
    params: tuple[Term, ...]
    field: str


@dataclass(frozen=True, slots=True)
class Interval(Term):
    pass


@dataclass(frozen=True, slots=True)
class Left(Term):
    pass


@dataclass(frozen=True, slots=True)
class Right(Term):
    pass


@dataclass(frozen=True, slots=True)
class Coe(Term):
    family: Term
    point: Term
    arg: Term


@dataclass(frozen=True, slots=True)
class Squeeze(Term):
    lhs: Term
    rhs: Term


@dataclass(frozen=True, slots=True)
class Universe(Term):
    pass


@dataclass(frozen=True, slots=True)
class FuncRef(Term):
    name: str


Telescope = tuple[tuple[str, Term], ...]

ENDPOINTS = ("left", "right")


# ---------------------------------------------------------------------------
# Declarations


@dataclass(frozen=True)
class ConstructorDef:
    """A constructor with its parameter telescope.

    ``conditions`` lists alternative partial matchings; each one is a term
    of type ``params -> D (vars Δ)``. More than one alternative arises when
    a multi-parameter condition splits on different parameters (Torus).
    """

    name: str
    params: Telescope
    conditions: tuple[Term, ...] = ()

    @property
    def condition(self) -> Term | None:
        return self.conditions[0] if self.conditions else None


@dataclass(frozen=True)
class FieldDef:
    name: str
    type: Term
    coconditions: tuple[Term, ...] = ()

    @property
    def cocondition(self) -> Term | None:
        return self.coconditions[0] if self.coconditions else None


@dataclass(frozen=True)
class DataDef:
    name: str
    params: Telescope
    constructors: tuple[ConstructorDef, ...]

    def constructor(self, name: str) -> ConstructorDef | None:
        for c in self.constructors:
            if c.name == name:
                return c
        return None


@dataclass(frozen=True)
class RecordDef:
    name: str
    params: Telescope
    fields: tuple[FieldDef, ...]

    def field_index(self, name: str) -> int | None:
        for k, f in enumerate(self.fields):
            if f.name == name:
                return k
        return None


@dataclass(frozen=True)
class FuncDef:
    name: str
    type: Term
    body: Term | None  # None while the body is still being checked


Declaration = DataDef | RecordDef | FuncDef


@dataclass(frozen=True)
class Signature:
    """Ordered list of checked declarations with name lookups.

    ``extend`` returns a new signature; an existing one is never mutated.
    """

    decls: tuple[Declaration, ...] = ()
    _by_name: Mapping[str, Declaration] = field(default_factory=dict, repr=False)
    _cons: Mapping[str, tuple[DataDef, ConstructorDef]] = field(default_factory=dict, repr=False)

    def extend(self, decl: Declaration, replace: bool = False) -> "Signature":
        decls = list(self.decls)
        if replace:
            decls = [d for d in decls if d.name != decl.name]
        elif decl.name in self._by_name:
            raise ValueError(f"duplicate declaration {decl.name}")
        decls.append(decl)
        by_name = dict(self._by_name)
        by_name[decl.name] = decl
        cons = {k: v for k, v in self._cons.items() if v[0].name != decl.name}
        if isinstance(decl, DataDef):
            for c in decl.constructors:
                cons[c.name] = (decl, c)
        return Signature(tuple(decls), by_name, cons)

    def lookup(self, name: str) -> Declaration | None:
        return self._by_name.get(name)

    def data(self, name: str) -> DataDef | None:
        d = self._by_name.get(name)
        return d if isinstance(d, DataDef) else None

    def record(self, name: str) -> RecordDef | None:
        d = self._by_name.get(name)
        return d if isinstance(d, RecordDef) else None

    def func(self, name: str) -> FuncDef | None:
        d = self._by_name.get(name)
        return d if isinstance(d, FuncDef) else None

    def constructor(self, name: str) -> tuple[DataDef, ConstructorDef] | None:
        return self._cons.get(name)

    def constructor_count(self) -> int:
        return len(self._cons)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name or name in self._cons

    def prefix(self, n: int) -> "Signature":
        sig = Signature()
        for d in self.decls[:n]:
            sig = sig.extend(d)
        return sig


# ---------------------------------------------------------------------------
# Free variables, fresh names


def free_vars(t: Term) -> frozenset[str]:
    out: set[str] = set()
    _fv(t, frozenset(), out)
    return frozenset(out)


def _fv(t: Term, bound: frozenset[str], out: set[str]) -> None:
    match t:
        case Var(x):
            if x not in bound:
                out.add(x)
        case Pi(x, a, b):
            _fv(a, bound, out)
            _fv(b, bound | {x}, out)
        case Lam(x, b):
            _fv(b, bound | {x}, out)
        case App(f, a):
            _fv(f, bound, out)
            _fv(a, bound, out)
        case Data(_, ps):
            for p in ps:
                _fv(p, bound, out)
        case Con(_, ps, args):
            for p in ps:
                _fv(p, bound, out)
            for a in args:
                _fv(a, bound, out)
        case Case(s, clauses):
            _fv(s, bound, out)
            for cl in clauses:
                _fv(cl.body, bound | set(cl.binders), out)
        case RecordLit(_, ps, fields):
            for p in ps:
                _fv(p, bound, out)
            for _, b in fields:
                _fv(b, bound, out)
        case Proj(target, _, ps, _):
            _fv(target, bound, out)
            for p in ps:
                _fv(p, bound, out)
        case Coe(f, i, a):
            _fv(f, bound, out)
            _fv(i, bound, out)
            _fv(a, bound, out)
        case Squeeze(l, r):
            _fv(l, bound, out)
            _fv(r, bound, out)
        case Interval() | Left() | Right() | Universe() | FuncRef():
            pass
        case _:
            raise TypeError(f"not a term: {t!r}")


_SUFFIX = re.compile(r"^(.*?)(\d*)$")


def fresh(base: str, avoid: Iterable[str]) -> str:
    """A name derived from ``base`` that is not in ``avoid``."""
    avoid = set(avoid)
    if base not in avoid:
        return base
    stem = _SUFFIX.match(base).group(1) or "x"
    k = 1
    while f"{stem}{k}" in avoid:
        k += 1
    return f"{stem}{k}"


# ---------------------------------------------------------------------------
# Substitution


def subst(t: Term, mapping: Mapping[str, Term]) -> Term:
    """Simultaneous capture-avoiding substitution."""
    if not mapping:
        return t
    fvs: set[str] = set()
    for v in mapping.values():
        fvs |= free_vars(v)
    return _subst(t, dict(mapping), frozenset(fvs))


def subst1(t: Term, name: str, value: Term) -> Term:
    return subst(t, {name: value})


def _binder(x: str, body_terms: Sequence[Term], mapping: dict, fvs: frozenset[str]):
    """Decide how to cross binder ``x``: returns (new name, inner mapping)."""
    inner = {k: v for k, v in mapping.items() if k != x}
    if not inner:
        return x, inner
    if x in fvs:
        avoid = set(fvs) | set(inner)
        for b in body_terms:
            avoid |= free_vars(b)
        y = fresh(x, avoid)
        inner[x] = Var(y)
        return y, inner
    return x, inner


def _subst(t: Term, m: dict, fvs: frozenset[str]) -> Term:
    # Nodes whose children come back unchanged are returned as-is, so that
    # untouched subterms keep their identity (and with it their source span).
    match t:
        case Var(x):
            return m.get(x, t)
        case Pi(x, a, b):
            a2 = _subst(a, m, fvs)
            y, inner = _binder(x, [b], m, fvs)
            b2 = _subst(b, inner, _extend_fvs(fvs, inner, y, x)) if inner else b
            return t if (a2 is a and b2 is b and y == x) else Pi(y, a2, b2)
        case Lam(x, b):
            y, inner = _binder(x, [b], m, fvs)
            b2 = _subst(b, inner, _extend_fvs(fvs, inner, y, x)) if inner else b
            return t if (b2 is b and y == x) else Lam(y, b2)
        case App(f, a):
            f2, a2 = _subst(f, m, fvs), _subst(a, m, fvs)
            return t if (f2 is f and a2 is a) else App(f2, a2)
        case Data(n, ps):
            ps2 = _subst_all(ps, m, fvs)
            return t if ps2 is ps else Data(n, ps2)
        case Con(n, ps, args):
            ps2, args2 = _subst_all(ps, m, fvs), _subst_all(args, m, fvs)
            return t if (ps2 is ps and args2 is args) else Con(n, ps2, args2)
        case Case(s, clauses):
            s2 = _subst(s, m, fvs)
            cs2 = tuple(_subst_clause(cl, m, fvs) for cl in clauses)
            if s2 is s and all(a is b for a, b in zip(cs2, clauses)):
                return t
            return Case(s2, cs2)
        case RecordLit(r, ps, fields):
            ps2 = _subst_all(ps, m, fvs)
            fs2 = tuple((f, _subst(b, m, fvs)) for f, b in fields)
            if ps2 is ps and all(a[1] is b[1] for a, b in zip(fs2, fields)):
                return t
            return RecordLit(r, ps2, fs2)
        case Proj(target, r, ps, f):
            t2, ps2 = _subst(target, m, fvs), _subst_all(ps, m, fvs)
            return t if (t2 is target and ps2 is ps) else Proj(t2, r, ps2, f)
        case Coe(f, i, a):
            f2, i2, a2 = _subst(f, m, fvs), _subst(i, m, fvs), _subst(a, m, fvs)
            return t if (f2 is f and i2 is i and a2 is a) else Coe(f2, i2, a2)
        case Squeeze(l, r):
            l2, r2 = _subst(l, m, fvs), _subst(r, m, fvs)
            return t if (l2 is l and r2 is r) else Squeeze(l2, r2)
        case Interval() | Left() | Right() | Universe() | FuncRef():
            return t
    raise TypeError(f"not a term: {t!r}")


def _subst_all(ts: tuple, m: dict, fvs: frozenset[str]) -> tuple:
    out = tuple(_subst(x, m, fvs) for x in ts)
    return ts if all(a is b for a, b in zip(out, ts)) else out


def _extend_fvs(fvs: frozenset[str], inner: dict, new: str, old: str) -> frozenset[str]:
    return fvs | {new} if new != old else fvs


def _subst_clause(cl: Clause, m: dict, fvs: frozenset[str]) -> Clause:
    inner = {k: v for k, v in m.items() if k not in cl.binders}
    if not inner:
        return cl
    names = []
    avoid = set(fvs) | set(inner) | free_vars(cl.body)
    for x in cl.binders:
        if x in fvs:
            y = fresh(x, avoid | set(names))
            inner[x] = Var(y)
            names.append(y)
        else:
            names.append(x)
    avoid_fvs = fvs | set(names)
    body = _subst(cl.body, inner, frozenset(avoid_fvs))
    if body is cl.body and tuple(names) == cl.binders:
        return cl
    return Clause(cl.con, tuple(names), body)


class Substitution:
    """An ordered list of single-variable replacements applied in sequence."""

    __slots__ = ("pairs",)

    def __init__(self, pairs: Iterable[tuple[str, Term]] = ()):
        self.pairs: tuple[tuple[str, Term], ...] = tuple(pairs)

    def apply(self, t: Term) -> Term:
        for x, v in self.pairs:
            t = subst1(t, x, v)
        return t

    def compose(self, other: "Substitution") -> "Substitution":
        """``self`` first, then ``other``."""
        return Substitution(self.pairs + other.pairs)

    def __len__(self) -> int:
        return len(self.pairs)

    def __repr__(self) -> str:
        inner = ", ".join(f"{v}/{x}" for x, v in self.pairs)
        return f"[{inner}]"


def compose(first: Mapping[str, Term], then: Mapping[str, Term]) -> dict[str, Term]:
    """Simultaneous substitution equal to applying ``first`` and then ``then``."""
    out = {x: subst(v, then) for x, v in first.items()}
    for y, v in then.items():
        out.setdefault(y, v)
    return out


def substitute(t: Term, sigma: Substitution | Sequence[tuple[str, Term]]) -> Term:
    if not isinstance(sigma, Substitution):
        sigma = Substitution(sigma)
    return sigma.apply(t)


def instantiate(t: Term, names: Sequence[str], values: Sequence[Term]) -> Term:
    """``t[values/names]``, simultaneous."""
    return subst(t, dict(zip(names, values)))


# ---------------------------------------------------------------------------
# Telescopes


class LengthMismatch(ValueError):
    pass


def tele_vars(tele: Telescope) -> list[str]:
    return [x for x, _ in tele]


def replace(tele: Telescope, names: Sequence[str]) -> Telescope:
    """Rename the binders of ``tele`` to ``names``, rewriting later types."""
    if len(tele) != len(names):
        raise LengthMismatch(f"telescope has {len(tele)} bindings, got {len(names)} names")
    out = []
    rest = list(tele)
    for k, new in enumerate(names):
        old, ty = rest[k]
        out.append((new, ty))
        if new != old:
            for j in range(k + 1, len(rest)):
                y, b = rest[j]
                rest[j] = (y, subst1(b, old, Var(new)))
    return tuple(out)


def subst_tele(tele: Telescope, mapping: Mapping[str, Term]) -> Telescope:
    """Substitute into the types of a telescope, respecting its own binders."""
    out = []
    m = dict(mapping)
    for x, ty in tele:
        out.append((x, subst(ty, m)))
        m.pop(x, None)
        if not m:
            out.extend(tele[len(out):])
            break
    return tuple(out)


def instantiate_tele(tele: Telescope, values: Sequence[Term], base: Mapping[str, Term] = {}) -> list[Term]:
    """Types of ``tele`` with earlier binders replaced by ``values``."""
    m = dict(base)
    types = []
    for (x, ty), v in zip(tele, values):
        types.append(subst(ty, m))
        m[x] = v
    return types


def pi_tele(tele: Telescope, cod: Term) -> Term:
    for x, ty in reversed(tele):
        cod = Pi(x, ty, cod)
    return cod


# ---------------------------------------------------------------------------
# Spines and equality


def spine(t: Term) -> tuple[Term, list[Term]]:
    args = []
    while isinstance(t, App):
        args.append(t.arg)
        t = t.fn
    args.reverse()
    return t, args


def apply(head: Term, args: Iterable[Term]) -> Term:
    for a in args:
        head = App(head, a)
    return head


def lams(names: Sequence[str], body: Term) -> Term:
    for x in reversed(names):
        body = Lam(x, body)
    return body


def alpha_eq(t: Term, u: Term) -> bool:
    return _alpha(t, u, {}, {}, 0)


def _alpha(t: Term, u: Term, lt: dict, lu: dict, depth: int) -> bool:
    if t is u and not lt and not lu:
        return True
    match t, u:
        case Var(x), Var(y):
            ix, iy = lt.get(x), lu.get(y)
            if ix is None and iy is None:
                return x == y
            return ix == iy
        case Pi(x, a, b), Pi(y, c, d):
            return _alpha(a, c, lt, lu, depth) and _alpha(b, d, {**lt, x: depth}, {**lu, y: depth}, depth + 1)
        case Lam(x, b), Lam(y, d):
            return _alpha(b, d, {**lt, x: depth}, {**lu, y: depth}, depth + 1)
        case App(f, a), App(g, b):
            return _alpha(f, g, lt, lu, depth) and _alpha(a, b, lt, lu, depth)
        case Data(n, ps), Data(m, qs):
            return n == m and _alpha_all(ps, qs, lt, lu, depth)
        case Con(n, ps, a), Con(m, qs, b):
            return n == m and _alpha_all(ps, qs, lt, lu, depth) and _alpha_all(a, b, lt, lu, depth)
        case Case(s, cs), Case(r, ds):
            if not _alpha(s, r, lt, lu, depth) or len(cs) != len(ds):
                return False
            for c1, c2 in zip(cs, ds):
                if c1.con != c2.con or len(c1.binders) != len(c2.binders):
                    return False
                l2, u2, d = dict(lt), dict(lu), depth
                for x, y in zip(c1.binders, c2.binders):
                    l2[x] = d
                    u2[y] = d
                    d += 1
                if not _alpha(c1.body, c2.body, l2, u2, d):
                    return False
            return True
        case RecordLit(r, ps, fs), RecordLit(q, qs, gs):
            if r != q or len(fs) != len(gs) or not _alpha_all(ps, qs, lt, lu, depth):
                return False
            return all(f == g and _alpha(a, b, lt, lu, depth) for (f, a), (g, b) in zip(fs, gs))
        case Proj(a, r, ps, f), Proj(b, q, qs, g):
            return r == q and f == g and _alpha(a, b, lt, lu, depth) and _alpha_all(ps, qs, lt, lu, depth)
        case Coe(f, i, a), Coe(g, j, b):
            return _alpha(f, g, lt, lu, depth) and _alpha(i, j, lt, lu, depth) and _alpha(a, b, lt, lu, depth)
        case Squeeze(a, b), Squeeze(c, d):
            return _alpha(a, c, lt, lu, depth) and _alpha(b, d, lt, lu, depth)
        case FuncRef(n), FuncRef(m):
            return n == m
        case (Interval(), Interval()) | (Left(), Left()) | (Right(), Right()) | (Universe(), Universe()):
            return True
    return False


def _alpha_all(ts, us, lt, lu, depth) -> bool:
    return len(ts) == len(us) and all(_alpha(a, b, lt, lu, depth) for a, b in zip(ts, us))


def term_size(t: Term) -> int:
    match t:
        case Var() | Interval() | Left() | Right() | Universe() | FuncRef():
            return 1
        case Pi(_, a, b):
            return 1 + term_size(a) + term_size(b)
        case Lam(_, b):
            return 1 + term_size(b)
        case App(f, a):
            return 1 + term_size(f) + term_size(a)
        case Data(_, ps):
            return 1 + sum(map(term_size, ps))
        case Con(_, ps, args):
            return 1 + sum(map(term_size, ps)) + sum(map(term_size, args))
        case Case(s, cs):
            return 1 + term_size(s) + sum(term_size(c.body) for c in cs)
        case RecordLit(_, ps, fs):
            return 1 + sum(map(term_size, ps)) + sum(term_size(b) for _, b in fs)
        case Proj(a, _, ps, _):
            return 1 + term_size(a) + sum(map(term_size, ps))
        case Coe(f, i, a):
            return 1 + term_size(f) + term_size(i) + term_size(a)
        case Squeeze(a, b):
            return 1 + term_size(a) + term_size(b)
    raise TypeError(f"not a term: {t!r}")


def subterms(t: Term) -> Iterable[Term]:
    """Every subterm of ``t``, ``t`` first."""
    yield t
    match t:
        case Pi(_, a, b):
            yield from subterms(a)
            yield from subterms(b)
        case Lam(_, b):
            yield from subterms(b)
        case App(f, a):
            yield from subterms(f)
            yield from subterms(a)
        case Data(_, ps):
            for p in ps:
                yield from subterms(p)
        case Con(_, ps, args):
            for p in ps + args:
                yield from subterms(p)
        case Case(s, cs):
            yield from subterms(s)
            for c in cs:
                yield from subterms(c.body)
        case RecordLit(_, ps, fs):
            for p in ps:
                yield from subterms(p)
            for _, b in fs:
                yield from subterms(b)
        case Proj(a, _, ps, _):
            yield from subterms(a)
            for p in ps:
                yield from subterms(p)
        case Coe(f, i, a):
            yield from subterms(f)
            yield from subterms(i)
            yield from subterms(a)
        case Squeeze(a, b):
            yield from subterms(a)
            yield from subterms(b)
