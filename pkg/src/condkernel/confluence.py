"""Confluence obligations for conditions and coconditions, and a fuzzing oracle.

A split over a conditioned constructor has to agree with the condition: the
clause body for ``c x̄`` and the clause selected by whatever the condition
reduces ``c x̄`` to must be convertible. The walk below follows the shape of
a condition term (lambdas, partial case splits, then a constructor) and
emits one conversion check per leaf.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable

from .diagnostics import Span, fail
from .reduction import DEFAULT_FUEL, FuelExhausted, Reducer, Strategy
from .syntax import (
    Case,
    Clause,
    Con,
    Data,
    DataDef,
    FuncDef,
    FuncRef,
    Interval,
    Lam,
    Left,
    Pi,
    Right,
    Signature,
    Telescope,
    Term,
    Var,
    alpha_eq,
    apply,
    free_vars,
    fresh,
    instantiate,
    replace,
    subst1,
    subst_tele,
    term_size,
    tele_vars,
)

Ctx = tuple[tuple[str, Term], ...]


def ctx_names(ctx: Ctx) -> set[str]:
    return {x for x, _ in ctx}


def ctx_lookup(ctx: Ctx, x: str) -> Term | None:
    for y, ty in reversed(ctx):
        if y == x:
            return ty
    return None


def split_ctx(ctx: Ctx, y: str, pat: Term, bindings: Telescope) -> Ctx:
    """Replace ``y`` by ``bindings`` and rewrite later types with ``y := pat``."""
    out = []
    found = False
    for x, ty in ctx:
        if x == y and not found:
            out.extend(bindings)
            found = True
        elif found:
            out.append((x, subst1(ty, y, pat)))
        else:
            out.append((x, ty))
    return tuple(out)


@dataclass(frozen=True)
class ConfluenceObligation:
    """One conditioned constructor of one case split.

    ``params`` is the constructor's telescope, renamed to the clause's
    binders so that ``body`` (the clause body) can mention them.
    """

    context: Ctx
    params: Telescope
    condition: Term
    body: Term
    clauses: tuple[Clause, ...]
    result_type: Term
    constructor: str = ""
    span: Span | None = None


@dataclass(frozen=True)
class CoconditionObligation:
    context: Ctx
    field_body: Term
    cocondition: Term
    columns: Telescope
    field_name: str
    span: Span | None = None


def check_confluence(sig: Signature, ob: ConfluenceObligation, fuel: int = DEFAULT_FUEL) -> int:
    """Discharge ``ob``; returns the number of conversion checks performed."""
    red = Reducer(sig, fuel)
    pattern = Con(ob.constructor, (), tuple(Var(x) for x, _ in ob.params))

    def leaf(ctx: Ctx, w: Term, v: Term, pat: Term) -> None:
        if isinstance(w, Con):
            cl = next((c for c in ob.clauses if c.con == w.name), None)
            if cl is None:
                raise fail(
                    "ConfluenceViolation",
                    f"{pat} reduces to {w} by its condition, but the split has no clause for {w.name}",
                    ob.span,
                )
            rhs = instantiate(cl.body, cl.binders, w.args)
        elif isinstance(w, (Left, Right)):
            name = "left" if isinstance(w, Left) else "right"
            cl = next((c for c in ob.clauses if c.con == name), None)
            if cl is None:
                raise fail("ConfluenceViolation", f"no clause for {name}", ob.span)
            rhs = cl.body
        else:
            rhs = Case(w, ob.clauses)
        _compare(red, ctx, v, rhs, pat, ob.span)

    n = 0
    for cond in _alternatives(ob.condition):
        n += _walk(red, ob.context, ob.params, cond, ob.body, pattern, leaf, ob.span)
    return n


def check_cocondition_confluence(sig: Signature, ob: CoconditionObligation, fuel: int = DEFAULT_FUEL) -> int:
    """Dual check: the field body must agree with every cocondition clause."""
    red = Reducer(sig, fuel)
    avoid = ctx_names(ob.context) | free_vars(ob.field_body) | free_vars(ob.cocondition)
    names = []
    for x, _ in ob.columns:
        y = fresh(x, avoid | set(names))
        names.append(y)
    cols = replace(ob.columns, names)
    pattern = Var(f".{ob.field_name}")

    def leaf(ctx: Ctx, w: Term, v: Term, pat: Term) -> None:
        _compare(red, ctx, v, w, pat, ob.span)

    body = ob.field_body
    v = apply(body, [Var(x) for x in names])
    pat = apply(pattern, [Var(x) for x in names])
    return _walk(red, ob.context, cols, ob.cocondition, v, pat, leaf, ob.span)


def _alternatives(cond) -> tuple[Term, ...]:
    return cond if isinstance(cond, tuple) else (cond,)


def _walk(red: Reducer, ctx: Ctx, delta: Telescope, cond: Term, v: Term, pat: Term, leaf: Callable, span) -> int:
    w = red.whnf(cond)
    if delta and isinstance(w, Lam):
        # abstraction: the condition binds the next parameter
        (x, ty), rest = delta[0], delta[1:]
        return _walk(red, ctx + ((x, ty),), rest, subst1(w.body, w.name, Var(x)), v, pat, leaf, span)
    if isinstance(w, Case) and isinstance(w.scrutinee, Var) and ctx_lookup(ctx, w.scrutinee.name) is not None:
        # split: one branch per clause the condition defines
        x = w.scrutinee.name
        xty = red.whnf(ctx_lookup(ctx, x))
        n = 0
        for cl in w.clauses:
            if isinstance(xty, Interval):
                p = Left() if cl.con == "left" else Right()
                bindings: Telescope = ()
            else:
                if not isinstance(xty, Data) or red.sig.data(xty.name) is None:
                    raise fail("InternalShape", f"condition splits on {x} of non-data type {xty}", span)
                dd = red.sig.data(xty.name)
                cd = dd.constructor(cl.con)
                tele = subst_tele(cd.params, dict(zip(tele_vars(dd.params), xty.params)))
                avoid = ctx_names(ctx) | set(tele_vars(delta)) | free_vars(v) | free_vars(cond)
                names = []
                for b in cl.binders:
                    names.append(fresh(b, avoid | set(names)))
                bindings = replace(tele, names)
                p = Con(cl.con, xty.params, tuple(Var(b) for b in names))
            ctx2 = split_ctx(ctx, x, p, bindings)
            delta2 = subst_tele(delta, {x: p})
            n += _walk(red, ctx2, delta2, subst1(w, x, p), subst1(v, x, p), subst1(pat, x, p), leaf, span)
        return n
    if delta:
        raise fail("InternalShape", f"condition {w} is not a lambda, split or constructor", span)
    leaf(ctx, w, v, pat)
    return 1


def _compare(red: Reducer, ctx: Ctx, lhs: Term, rhs: Term, pat: Term, span) -> None:
    scope = ctx_names(ctx)
    for side in (lhs, rhs):
        stray = free_vars(side) - scope
        if stray:
            raise fail("InternalShape", f"confluence check met unbound variables {sorted(stray)}", span)
    if red.convertible(lhs, rhs):
        return
    a, b = red.normalize(lhs), red.normalize(rhs)
    raise fail(
        "ConfluenceViolation",
        f"at {pat}: the clause gives {a} but the condition gives {b}",
        span,
        expected=str(b),
        actual=str(a),
    )


# ---------------------------------------------------------------------------
# Reduction-order oracle


@dataclass
class OracleReport:
    seeds: int
    checked: int = 0
    disagreements: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.disagreements


def _ground_types(sig: Signature) -> list[str]:
    """Parameterless data types whose constructors only take ground or I arguments."""
    names = {d.name for d in sig.decls if isinstance(d, DataDef) and not d.params}
    changed = True
    while changed:
        changed = False
        for n in list(names):
            for c in sig.data(n).constructors:
                if not all(_is_ground(ty, names) for _, ty in c.params):
                    names.discard(n)
                    changed = True
                    break
    return sorted(names, key=lambda n: [d.name for d in sig.decls].index(n))


def _is_ground(ty: Term, names) -> bool:
    return isinstance(ty, Interval) or (isinstance(ty, Data) and ty.name in names and not ty.params)


def _ground_funcs(sig: Signature, names) -> dict[str, list[tuple[str, list[Term]]]]:
    out: dict[str, list] = {}
    for d in sig.decls:
        if not isinstance(d, FuncDef) or d.body is None:
            continue
        doms = []
        t = d.type
        while isinstance(t, Pi):
            if t.name in free_vars(t.cod) or not _is_ground(t.dom, names):
                break
            doms.append(t.dom)
            t = t.cod
        else:
            if doms and isinstance(t, Data) and t.name in names:
                out.setdefault(t.name, []).append((d.name, doms))
    return out


class TermGenerator:
    """Random closed terms over the ground data types of a signature."""

    def __init__(self, sig: Signature, func_prob: float = 0.3):
        self.sig = sig
        self.types = _ground_types(sig)
        self.funcs = _ground_funcs(sig, set(self.types))
        self.func_prob = func_prob
        self.min_size = self._min_sizes()

    def _min_sizes(self) -> dict[str, float]:
        inf = float("inf")
        m = {n: inf for n in self.types}
        changed = True
        while changed:
            changed = False
            for n in self.types:
                for c in self.sig.data(n).constructors:
                    s = 1 + sum(self._arg_min(ty, m) for _, ty in c.params)
                    if s < m[n]:
                        m[n] = s
                        changed = True
        return m

    @staticmethod
    def _arg_min(ty: Term, m) -> float:
        return 1 if isinstance(ty, Interval) else m[ty.name]

    def roots(self) -> list[str]:
        return [n for n in self.types if self.min_size[n] != float("inf")]

    def term(self, rng: random.Random, max_size: int, root: str | None = None, tries: int = 8) -> Term:
        """One term of size at most ``max_size``.

        Uniform constructor choice favours tiny terms, so a size target is
        drawn first and the largest of a few samples not above it is kept.
        """
        roots = self.roots()
        if root is None:
            with_funcs = [n for n in roots if n in self.funcs]
            root = rng.choice(with_funcs or roots)
        target = rng.randint(int(self.min_size[root]), max(int(self.min_size[root]), max_size))
        best = None
        for _ in range(tries):
            t = self._gen(rng, root, target)
            if best is None or term_size(t) > term_size(best):
                best = t
            if term_size(best) == target:
                break
        return best

    def _gen(self, rng: random.Random, ty: str, budget: int) -> Term:
        m = self.min_size
        funcs = [(f, doms) for f, doms in self.funcs.get(ty, []) if 1 + len(doms) + sum(self._arg_min(d, m) for d in doms) <= budget]
        if funcs and rng.random() < self.func_prob:
            f, doms = rng.choice(funcs)
            args = self._gen_args(rng, doms, budget - 1 - len(doms))
            return apply(FuncRef(f), args)
        cons = [c for c in self.sig.data(ty).constructors if 1 + sum(self._arg_min(t, m) for _, t in c.params) <= budget]
        c = rng.choice(cons)
        args = self._gen_args(rng, [t for _, t in c.params], budget - 1)
        return Con(c.name, (), tuple(args))

    def _gen_args(self, rng: random.Random, tys, budget: int) -> list[Term]:
        mins = [self._arg_min(t, self.min_size) for t in tys]
        out = []
        for k, ty in enumerate(tys):
            rest = sum(mins[k + 1:])
            b = rng.randint(int(mins[k]), int(budget - rest))
            if isinstance(ty, Interval):
                out.append(rng.choice((Left(), Right())))
                b = 1
            else:
                out.append(self._gen(rng, ty.name, b))
            budget -= term_size(out[-1])
        return out


def reduction_order_oracle(
    sig: Signature, seeds: int = 1000, max_size: int = 20, seed: int = 0, fuel: int = DEFAULT_FUEL
) -> OracleReport:
    """Normalize random closed terms arguments-first and clause-first; collect mismatches."""
    report = OracleReport(seeds)
    gen = TermGenerator(sig)
    if not gen.roots():
        return report
    a = Reducer(sig, fuel, Strategy.ARGS_FIRST)
    b = Reducer(sig, fuel, Strategy.CLAUSE_FIRST)
    for i in range(seeds):
        s = seed + i
        t = gen.term(random.Random(s), max_size)
        na, nb = _safe_nf(a, t), _safe_nf(b, t)
        report.checked += 1
        if isinstance(na, str) or isinstance(nb, str) or not alpha_eq(na, nb):
            report.disagreements.append({"seed": s, "term": str(t), "normalA": str(na), "normalB": str(nb)})
    return report


def _safe_nf(red: Reducer, t: Term):
    try:
        return red.normalize(t)
    except FuelExhausted:
        return "<fuel exhausted>"
