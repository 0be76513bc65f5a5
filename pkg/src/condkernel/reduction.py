"""Untyped reduction: weak head normal form, full normalization and conversion.

Conditions fire when a conditioned constructor is evaluated and its partial
matching reaches a result; a conditioned constructor whose matching gets
stuck is left alone ("canonical if stuck"). Coconditions fire on stuck
projections applied to arguments that match one of their clauses.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

from .diagnostics import Diagnostic, KernelError
from .syntax import (
    App,
    Case,
    Clause,
    Coe,
    Con,
    Data,
    FuncRef,
    Lam,
    Left,
    Pi,
    Proj,
    RecordLit,
    Right,
    Signature,
    Squeeze,
    Term,
    alpha_eq,
    apply,
    free_vars,
    instantiate,
    spine,
    subst,
    subst1,
    tele_vars,
)

DEFAULT_FUEL = 1_000_000


class FuelExhausted(KernelError):
    def __init__(self, limit: int):
        super().__init__(Diagnostic("FuelExhausted", f"reduction exceeded the step budget of {limit}"))


class Strategy(enum.Enum):
    LAZY = "lazy"
    ARGS_FIRST = "args-first"  # normalize arguments, fire conditions before dispatch
    CLAUSE_FIRST = "clause-first"  # dispatch on the raw constructor, fire only if no clause


def lam_arity(t: Term) -> int:
    n = 0
    while isinstance(t, Lam):
        n += 1
        t = t.body
    return n


def is_stuck(t: Term) -> bool:
    """A whnf that still has an unreduced case at its head."""
    head, _ = spine(t)
    return isinstance(head, Case)


class Reducer:
    def __init__(self, sig: Signature, fuel: int = DEFAULT_FUEL, strategy: Strategy = Strategy.LAZY):
        self.sig = sig
        self.fuel = fuel
        self.strategy = strategy
        self.steps = 0
        self.max_condition_chain = 0

    # -- public entry points reset the step budget

    def whnf(self, t: Term) -> Term:
        self.steps = 0
        return self._whnf(t)

    def normalize(self, t: Term) -> Term:
        self.steps = 0
        return self._nf(t)

    def convertible(self, t: Term, u: Term) -> bool:
        if alpha_eq(t, u):
            return True
        return alpha_eq(self.normalize(t), self.normalize(u))

    def condition_reduce(self, name: str, params, args) -> Term | None:
        self.steps = 0
        return self._fire_condition(Con(name, tuple(params), tuple(args)))

    def projection_reduce(self, proj: Proj, arg: Term) -> Term | None:
        self.steps = 0
        tgt = self._whnf(proj.target)
        if isinstance(tgt, RecordLit):
            body = tgt.field_body(proj.field)
            return None if body is None else self._whnf(App(body, arg))
        res = self._fire_cocondition(Proj(tgt, proj.record, proj.params, proj.field), [arg])
        return None if res is None else self._whnf(res)

    # -- internals

    def _tick(self) -> None:
        self.steps += 1
        if self.steps > self.fuel:
            raise FuelExhausted(self.fuel)

    def _whnf(self, t: Term, fire: bool = True) -> Term:
        chain = 0
        while True:
            match t:
                case App():
                    head, args = spine(t)
                    h = self._whnf(head)
                    match h:
                        case Lam(x, body):
                            self._tick()
                            arg = self._nf(args[0]) if self.strategy is Strategy.ARGS_FIRST else args[0]
                            t = apply(subst1(body, x, arg), args[1:])
                            continue
                        case FuncRef(name):
                            res = self._delta(name, args)
                            if res is None:
                                return apply(h, args)
                            t = res
                            continue
                        case Proj():
                            res = self._fire_cocondition(h, args)
                            if res is None:
                                return apply(h, args)
                            t = res
                            continue
                        case App():
                            # the head unfolded to a partial application; merge spines
                            t = apply(h, args)
                            continue
                    return apply(h, args)
                case FuncRef(name):
                    res = self._delta(name, [])
                    if res is None:
                        return t
                    t = res
                case Case(scrut, clauses):
                    strict = self.strategy is not Strategy.CLAUSE_FIRST
                    s = self._whnf(scrut, fire=strict)
                    cl = _select(s, clauses)
                    if cl is None and not strict and isinstance(s, Con):
                        fired = self._fire_condition(s)
                        if fired is not None:
                            s = self._whnf(fired)
                            cl = _select(s, clauses)
                    if cl is None:
                        return Case(s, clauses)
                    self._tick()
                    args = s.args if isinstance(s, Con) else ()
                    t = instantiate(cl.body, cl.binders, args)
                case Con(name, params, args):
                    if self.strategy is Strategy.ARGS_FIRST:
                        t = Con(name, params, tuple(self._nf(a) for a in args))
                    if not fire:
                        return t
                    fired = self._fire_condition(t)
                    if fired is None:
                        return t
                    chain += 1
                    self.max_condition_chain = max(self.max_condition_chain, chain)
                    t = fired
                case Proj(target, rec, params, field):
                    tgt = self._whnf(target)
                    if isinstance(tgt, RecordLit):
                        body = tgt.field_body(field)
                        if body is not None:
                            self._tick()
                            t = body
                            continue
                    return Proj(tgt, rec, params, field)
                case Coe(fam, point, arg):
                    p = self._whnf(point)
                    if isinstance(p, Left):
                        self._tick()
                        t = arg
                        continue
                    f = self._whnf(fam)
                    if isinstance(f, Lam) and f.name not in free_vars(self._nf(f.body)):
                        self._tick()
                        t = arg
                        continue
                    return Coe(f, p, arg)
                case Squeeze(lhs, rhs):
                    a = self._whnf(lhs)
                    if isinstance(a, Left):
                        return a
                    if isinstance(a, Right):
                        self._tick()
                        t = rhs
                        continue
                    b = self._whnf(rhs)
                    if isinstance(b, Left):
                        return b
                    if isinstance(b, Right):
                        return a
                    return Squeeze(a, b)
                case _:
                    return t

    def _delta(self, name: str, args) -> Term | None:
        """Unfold ``name args``; ``None`` when the unfolding gets stuck."""
        fd = self.sig.func(name)
        if fd is None or fd.body is None:
            return None
        self._tick()
        r = self._whnf(apply(fd.body, args))
        if isinstance(r, Lam) or is_stuck(r):
            return None
        return r

    def _fire_condition(self, con: Con) -> Term | None:
        found = self.sig.constructor(con.name)
        if found is None:
            return None
        dd, cd = found
        if not cd.conditions or len(con.args) != len(cd.params):
            return None
        pmap = dict(zip(tele_vars(dd.params), con.params))
        for cond in cd.conditions:
            r = self._whnf(apply(subst(cond, pmap), con.args))
            if not is_stuck(r):
                self._tick()
                return r
        return None

    def _fire_cocondition(self, proj: Proj, args) -> Term | None:
        rd = self.sig.record(proj.record)
        if rd is None:
            return None
        k = rd.field_index(proj.field)
        if k is None or not rd.fields[k].coconditions or len(proj.params) != len(rd.params):
            return None
        m = dict(zip(tele_vars(rd.params), proj.params))
        for f in rd.fields[:k]:
            m[f.name] = Proj(proj.target, proj.record, proj.params, f.name)
        for cocond in rd.fields[k].coconditions:
            n = lam_arity(cocond)
            if len(args) < n:
                continue
            r = self._whnf(apply(subst(cocond, m), args[:n]))
            if not is_stuck(r):
                self._tick()
                return apply(r, args[n:])
        return None

    def _nf(self, t: Term) -> Term:
        w = self._whnf(t)
        match w:
            case App():
                head, args = spine(w)
                return apply(self._nf_head(head), [self._nf(a) for a in args])
            case Lam(x, b):
                return Lam(x, self._nf(b))
            case Pi(x, a, b):
                return Pi(x, self._nf(a), self._nf(b))
            case Con(n, ps, args):
                return Con(n, tuple(self._nf(p) for p in ps), tuple(self._nf(a) for a in args))
            case Data(n, ps):
                return Data(n, tuple(self._nf(p) for p in ps))
            case RecordLit(r, ps, fs):
                return RecordLit(r, tuple(self._nf(p) for p in ps), tuple((f, self._nf(b)) for f, b in fs))
            case _:
                return self._nf_head(w)

    def _nf_head(self, w: Term) -> Term:
        """Normalize the inside of a neutral head without re-running whnf on it."""
        match w:
            case Case(s, cs):
                return Case(self._nf(s), tuple(Clause(c.con, c.binders, self._nf(c.body)) for c in cs))
            case Proj(a, r, ps, f):
                return Proj(self._nf(a), r, tuple(self._nf(p) for p in ps), f)
            case Coe(f, i, a):
                return Coe(self._nf(f), self._nf(i), self._nf(a))
            case Squeeze(a, b):
                return Squeeze(self._nf(a), self._nf(b))
        return w


def _select(s: Term, clauses) -> Clause | None:
    match s:
        case Con(name, _, args):
            for cl in clauses:
                if cl.con == name and len(cl.binders) == len(args):
                    return cl
        case Left() | Right():
            name = "left" if isinstance(s, Left) else "right"
            for cl in clauses:
                if cl.con == name and not cl.binders:
                    return cl
    return None


# ---------------------------------------------------------------------------
# Functional wrappers


def whnf(sig: Signature, t: Term, fuel: int = DEFAULT_FUEL) -> Term:
    return Reducer(sig, fuel).whnf(t)


def normalize(sig: Signature, t: Term, fuel: int = DEFAULT_FUEL, strategy: Strategy = Strategy.LAZY) -> Term:
    return Reducer(sig, fuel, strategy).normalize(t)


def convertible(sig: Signature, t: Term, u: Term, fuel: int = DEFAULT_FUEL) -> bool:
    return Reducer(sig, fuel).convertible(t, u)


def condition_reduce(sig: Signature, name: str, params, args, fuel: int = DEFAULT_FUEL) -> Term | None:
    return Reducer(sig, fuel).condition_reduce(name, params, args)


def projection_reduce(sig: Signature, proj: Proj, arg: Term, fuel: int = DEFAULT_FUEL) -> Term | None:
    return Reducer(sig, fuel).projection_reduce(proj, arg)


# ---------------------------------------------------------------------------
# Step-by-step traces


@dataclass(frozen=True)
class TraceStep:
    rule: str
    before: Term
    after: Term

    def to_dict(self) -> dict:
        return {"rule": self.rule, "before": str(self.before), "after": str(self.after)}


RULE_ORDER = ("beta", "unfold", "projection", "cocondition", "condition", "case", "squeeze", "coe-left", "regularity")


def trace(sig: Signature, t: Term, fuel: int = DEFAULT_FUEL, max_steps: int = 10_000) -> list[TraceStep]:
    """Rewrite ``t`` one rule class at a time until no rule applies.

    Each step contracts every redex of the highest-priority class that has
    one, then clears the beta redexes this created. Unfolding picks the
    leftmost-outermost function call that does not get stuck and expands
    every occurrence of that function. If the result differs from
    ``normalize`` a final ``normalize`` step closes the gap.
    """
    red = Reducer(sig, fuel)
    steps: list[TraceStep] = []
    cur = t
    for _ in range(max_steps):
        nxt = None
        for rule in RULE_ORDER:
            if rule == "beta":
                cand = _beta_nf(cur)
                label = "beta"
            elif rule == "unfold":
                name = _first_unfoldable(red, cur)
                if name is None:
                    continue
                cand = _beta_nf(_rewrite(cur, lambda u: _unfold_one(sig, name, u)))
                label = f"unfold {name}"
            else:
                cand = _beta_nf(_rewrite(cur, lambda u, r=rule: _contract(sig, red, r, u)))
                label = rule
            if not alpha_eq(cand, cur):
                nxt = TraceStep(label, cur, cand)
                break
        if nxt is None:
            break
        steps.append(nxt)
        cur = nxt.after
    final = red.normalize(t)
    if not alpha_eq(final, cur):
        steps.append(TraceStep("normalize", cur, final))
    return steps


def _rewrite(t: Term, contract) -> Term:
    """Contract outermost redexes everywhere, in one parallel pass."""
    r = contract(t)
    if r is not None:
        return r
    match t:
        case App(f, a):
            return App(_rewrite(f, contract), _rewrite(a, contract))
        case Lam(x, b):
            return Lam(x, _rewrite(b, contract))
        case Pi(x, a, b):
            return Pi(x, _rewrite(a, contract), _rewrite(b, contract))
        case Con(n, ps, args):
            return Con(n, tuple(_rewrite(p, contract) for p in ps), tuple(_rewrite(a, contract) for a in args))
        case Data(n, ps):
            return Data(n, tuple(_rewrite(p, contract) for p in ps))
        case Case(s, cs):
            return Case(_rewrite(s, contract), tuple(Clause(c.con, c.binders, _rewrite(c.body, contract)) for c in cs))
        case RecordLit(r_, ps, fs):
            return RecordLit(r_, tuple(_rewrite(p, contract) for p in ps), tuple((f, _rewrite(b, contract)) for f, b in fs))
        case Proj(a, r_, ps, f):
            return Proj(_rewrite(a, contract), r_, tuple(_rewrite(p, contract) for p in ps), f)
        case Coe(f, i, a):
            return Coe(_rewrite(f, contract), _rewrite(i, contract), _rewrite(a, contract))
        case Squeeze(a, b):
            return Squeeze(_rewrite(a, contract), _rewrite(b, contract))
    return t


def _beta_nf(t: Term) -> Term:
    def beta(u):
        if isinstance(u, App) and isinstance(u.fn, Lam):
            return _beta_nf(subst1(u.fn.body, u.fn.name, u.arg))
        return None

    prev = None
    while prev is None or not alpha_eq(prev, t):
        prev, t = t, _rewrite(t, beta)
    return t


def _first_unfoldable(red: Reducer, t: Term) -> str | None:
    from .syntax import subterms

    for u in subterms(t):
        head, args = spine(u)
        if isinstance(head, FuncRef):
            red.steps = 0
            if red._delta(head.name, args) is not None:
                return head.name
    return None


def _unfold_one(sig: Signature, name: str, u: Term) -> Term | None:
    if isinstance(u, FuncRef) and u.name == name:
        return sig.func(name).body
    return None


def _contract(sig: Signature, red: Reducer, rule: str, u: Term) -> Term | None:
    red.steps = 0
    match rule, u:
        case "projection", Proj(RecordLit() as lit, _, _, f):
            return lit.field_body(f)
        case "cocondition", App():
            head, args = spine(u)
            if isinstance(head, Proj) and not isinstance(head.target, RecordLit):
                return red._fire_cocondition(head, args)
        case "condition", Con():
            return red._fire_condition(u)
        case "case", Case(s, cs):
            cl = _select(s, cs)
            if cl is not None:
                return instantiate(cl.body, cl.binders, s.args if isinstance(s, Con) else ())
        case "squeeze", Squeeze(Left(), _) | Squeeze(_, Left()):
            return Left()
        case "squeeze", Squeeze(Right(), b):
            return b
        case "squeeze", Squeeze(a, Right()):
            return a
        case "coe-left", Coe(_, Left(), a):
            return a
        case "regularity", Coe(Lam(x, body), _, a) if x not in free_vars(body):
            return a
    return None
