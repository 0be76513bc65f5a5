"""Bidirectional type checker and elaborator.

Surface terms come straight from the parser: global names are still plain
``Var`` nodes and constructor nodes have no parameter instantiation. The
checker resolves names, fills in parameters from the expected type, and
returns elaborated terms. Errors are raised as ``KernelError``; ``judge``
turns a call into an ``Ok``/``Err`` value for callers that prefer one.

Conditions are checked in a permissive mode: splits need not cover, and
``I`` may be split into ``left``/``right``. Confluence obligations are
queued while a declaration is checked and discharged once it is complete,
so that recursive clauses can already unfold.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .confluence import (
    CoconditionObligation,
    ConfluenceObligation,
    Ctx,
    check_cocondition_confluence,
    check_confluence,
    ctx_lookup,
    ctx_names,
    split_ctx,
)
from .diagnostics import Diagnostic, KernelError, Span, fail
from .parser import CondClause, DataSyntax, FuncSyntax, PatternSyntax, RecordSyntax, SourceModule
from .reduction import DEFAULT_FUEL, Reducer
from .syntax import (
    ENDPOINTS,
    App,
    Case,
    Clause,
    Coe,
    Con,
    ConstructorDef,
    Data,
    DataDef,
    FieldDef,
    FuncDef,
    FuncRef,
    Interval,
    Lam,
    Left,
    Pi,
    Proj,
    RecordDef,
    RecordLit,
    Right,
    Signature,
    Squeeze,
    Telescope,
    Term,
    Universe,
    Var,
    apply,
    free_vars,
    fresh,
    lams,
    pi_tele,
    replace,
    spine,
    subst,
    subst1,
    subst_tele,
    tele_vars,
)

U = Universe()
I = Interval()


@dataclass(frozen=True)
class Ok:
    term: Term | None
    type: Term | None = None


@dataclass(frozen=True)
class Err:
    diagnostics: list[Diagnostic]


JudgmentResult = Ok | Err


def judge(thunk: Callable[[], object]) -> JudgmentResult:
    """Run a checker call, folding its outcome into ``Ok``/``Err``."""
    try:
        r = thunk()
    except KernelError as e:
        return Err([e.diag])
    if isinstance(r, tuple) and len(r) == 2:
        return Ok(r[0], r[1])
    return Ok(r)


@dataclass
class _Pat:
    kind: str  # "con" or "var"
    name: str
    args: tuple[str, ...] = ()


class Checker:
    def __init__(
        self,
        sig: Signature | None = None,
        *,
        fuel: int = DEFAULT_FUEL,
        check_confluence: bool = True,
        spans: dict[int, Span] | None = None,
    ):
        self.sig = sig if sig is not None else Signature()
        self.fuel = fuel
        self.confluence_enabled = check_confluence
        self.spans = spans if spans is not None else {}
        self.pending: list = []
        self.obligations_seen = 0

    # -- reduction helpers

    @property
    def red(self) -> Reducer:
        return Reducer(self.sig, self.fuel)

    def whnf(self, t: Term) -> Term:
        return self.red.whnf(t)

    def nf(self, t: Term) -> Term:
        return self.red.normalize(t)

    def conv(self, a: Term, b: Term) -> bool:
        return self.red.convertible(a, b)

    def _mismatch(self, msg: str, expected: Term, actual: Term) -> KernelError:
        return fail("TypeMismatch", msg, expected=str(self.nf(expected)), actual=str(self.nf(actual)))

    def _attach(self, e: KernelError, t) -> None:
        if e.diag.span is None:
            sp = self.spans.get(id(t))
            if sp is not None:
                e.diag.span = sp

    def _global(self, x: str) -> str | None:
        if self.sig.func(x):
            return "func"
        if self.sig.constructor(x):
            return "con"
        if self.sig.data(x) or self.sig.record(x):
            return "type"
        return None

    def _bind(self, ctx: Ctx, x: str, ty: Term, body: Term) -> tuple[Ctx, str, Term]:
        """Extend ``ctx`` with ``x : ty``, renaming ``x`` in ``body`` if it clashes."""
        names = ctx_names(ctx)
        if x in names:
            y = fresh(x, names | free_vars(body))
            return ctx + ((y, ty),), y, subst1(body, x, Var(y))
        return ctx + ((x, ty),), x, body

    # -- types and telescopes

    def check_is_type(self, ctx: Ctx, a: Term) -> Term:
        try:
            match a:
                case Universe() | Interval():
                    return a
                case Pi(x, dom, cod):
                    dom2 = self.check_is_type(ctx, dom)
                    ctx2, x2, cod = self._bind(ctx, x, dom2, cod)
                    return Pi(x2, dom2, self.check_is_type(ctx2, cod))
            return self.check(ctx, a, U)
        except KernelError as e:
            self._attach(e, a)
            raise

    def check_telescope(self, ctx: Ctx, tele: Telescope) -> Telescope:
        out = []
        cur = ctx
        ren: dict[str, Term] = {}
        for x, ty in tele:
            ty2 = self.check_is_type(cur, subst(ty, ren) if ren else ty)
            y = x
            if x in ctx_names(cur):
                y = fresh(x, ctx_names(cur) | {n for n, _ in tele})
                ren[x] = Var(y)
            out.append((y, ty2))
            cur = cur + ((y, ty2),)
        return tuple(out)

    def check_args(self, ctx: Ctx, args, tele: Telescope) -> tuple[Term, ...]:
        if len(args) != len(tele):
            raise fail("ArityMismatch", f"expected {len(tele)} arguments, got {len(args)}")
        m: dict[str, Term] = {}
        out = []
        for (x, ty), a in zip(tele, args):
            a2 = self.check(ctx, a, subst(ty, m))
            m[x] = a2
            out.append(a2)
        return tuple(out)

    # -- synthesis

    def infer(self, ctx: Ctx, t: Term) -> tuple[Term, Term]:
        try:
            return self._infer(ctx, t)
        except KernelError as e:
            self._attach(e, t)
            raise

    def _infer(self, ctx: Ctx, t: Term) -> tuple[Term, Term]:
        match t:
            case Var(x):
                ty = ctx_lookup(ctx, x)
                if ty is not None:
                    return t, ty
                match self._global(x):
                    case "func":
                        return FuncRef(x), self.sig.func(x).type
                    case "con":
                        return self._con(ctx, x, (), (), None)
                    case "type":
                        return self._type_former(ctx, x, [])
                raise fail("UnknownName", f"unknown name {x}")
            case FuncRef(x):
                fd = self.sig.func(x)
                if fd is None:
                    raise fail("UnknownName", f"unknown function {x}")
                return t, fd.type
            case App():
                head, args = spine(t)
                if isinstance(head, Var) and ctx_lookup(ctx, head.name) is None:
                    kind = self._global(head.name)
                    if kind == "con":
                        return self._con(ctx, head.name, (), args, None)
                    if kind == "type":
                        return self._type_former(ctx, head.name, args)
                if isinstance(head, Con):
                    return self._con(ctx, head.name, head.params, head.args + tuple(args), None)
                if isinstance(head, Data):
                    return self._type_former(ctx, head.name, list(head.params) + args)
                h, hty = self.infer(ctx, head)
                for a in args:
                    w = self.whnf(hty)
                    if not isinstance(w, Pi):
                        raise fail("TypeMismatch", f"{h} has type {w} and cannot be applied", actual=str(w))
                    a2 = self.check(ctx, a, w.dom)
                    h = App(h, a2)
                    hty = subst1(w.cod, w.name, a2)
                return h, hty
            case Pi(x, a, b):
                a2 = self.check(ctx, a, U)
                ctx2, x2, b = self._bind(ctx, x, a2, b)
                return Pi(x2, a2, self.check(ctx2, b, U)), U
            case Data(n, ps):
                return self._type_former(ctx, n, list(ps))
            case Con(n, ps, args):
                return self._con(ctx, n, ps, args, None)
            case Interval():
                return t, U
            case Left() | Right():
                return t, I
            case Universe():
                raise fail("UniverseHasNoType", "U is a type but does not have a type")
            case Coe(f, i, a):
                f2 = self.check(ctx, f, Pi("_", I, U))
                i2 = self.check(ctx, i, I)
                a2 = self.check(ctx, a, _beta(App(f2, Left())))
                return Coe(f2, i2, a2), _beta(App(f2, i2))
            case Squeeze(a, b):
                return Squeeze(self.check(ctx, a, I), self.check(ctx, b, I)), I
            case Proj(target, _, _, fname):
                t2, tty = self.infer(ctx, target)
                w = self.whnf(tty)
                rd = self.sig.record(w.name) if isinstance(w, Data) else None
                if rd is None:
                    raise fail("TypeMismatch", f"cannot project .{fname} out of a value of type {w}", actual=str(w))
                k = rd.field_index(fname)
                if k is None:
                    raise fail("UnknownName", f"record {rd.name} has no field {fname}")
                return Proj(t2, rd.name, w.params, fname), field_type(rd, k, w.params, t2)
            case RecordLit(r, ps, _):
                rd = self.sig.record(r)
                if rd is None:
                    raise fail("UnknownName", f"unknown record {r}")
                if not ps and rd.params:
                    raise fail("TypeMismatch", f"cannot infer the parameters of this {r} literal; give them after the record name")
                ps2 = self.check_args(ctx, ps, rd.params)
                a = Data(r, ps2)
                return self.check_record_literal(ctx, t, a), a
            case Lam():
                raise fail("TypeMismatch", "cannot infer the type of a lambda here")
            case Case():
                raise fail("TypeMismatch", "cannot infer the type of a case split here")
        raise fail("InternalShape", f"unexpected term {t!r}")

    def _type_former(self, ctx: Ctx, name: str, args) -> tuple[Term, Term]:
        decl = self.sig.data(name) or self.sig.record(name)
        if len(args) != len(decl.params):
            raise fail("ArityMismatch", f"{name} takes {len(decl.params)} parameters, got {len(args)}")
        return Data(name, self.check_args(ctx, args, decl.params)), U

    def _con(self, ctx: Ctx, name: str, params, args, expected: Term | None) -> tuple[Term, Term]:
        found = self.sig.constructor(name)
        if found is None:
            raise fail("UnknownName", f"unknown constructor {name}")
        dd, cd = found
        n = len(cd.params)
        if len(args) > n:
            raise fail("ArityMismatch", f"constructor {name} takes {n} arguments, got {len(args)}")
        if expected is not None:
            w = self.whnf(expected)
            if len(args) < n and isinstance(w, Pi):
                avoid = ctx_names(ctx).union(*(free_vars(a) for a in args))
                names = []
                for _ in range(n - len(args)):
                    names.append(fresh("x", avoid | set(names)))
                raw = lams(names, Con(name, tuple(params), tuple(args) + tuple(Var(x) for x in names)))
                return self.check(ctx, raw, expected), expected
            if not (isinstance(w, Data) and w.name == dd.name):
                raise self._mismatch(f"constructor {name} builds a {dd.name}", expected, Data(dd.name, ()))
            ps = w.params
        elif not dd.params:
            ps = ()
        elif len(params) == len(dd.params):
            ps = self.check_args(ctx, params, dd.params)
        else:
            raise fail("AmbiguousConstructor", f"cannot tell the parameters of {dd.name} for {name}; use it where the type is known")
        if len(args) < n:
            raise fail("ArityMismatch", f"constructor {name} takes {n} arguments, got {len(args)}")
        tele = subst_tele(cd.params, dict(zip(tele_vars(dd.params), ps)))
        args2 = self.check_args(ctx, args, tele)
        return Con(name, tuple(ps), args2), Data(dd.name, tuple(ps))

    # -- checking

    def check(self, ctx: Ctx, t: Term, a: Term, cond: bool = False) -> Term:
        try:
            return self._check(ctx, t, a, cond)
        except KernelError as e:
            self._attach(e, t)
            raise

    def check_condition(self, ctx: Ctx, t: Term, a: Term) -> Term:
        """Checking under the condition judgment: partial splits, I splits allowed."""
        return self.check(ctx, t, a, cond=True)

    def _check(self, ctx: Ctx, t: Term, a: Term, cond: bool) -> Term:
        match t:
            case Lam(x, body):
                w = self.whnf(a)
                if not isinstance(w, Pi):
                    raise fail("TypeMismatch", f"a lambda cannot have type {self.nf(a)}", expected=str(self.nf(a)))
                ctx2, x2, body = self._bind(ctx, x, w.dom, body)
                return Lam(x2, self.check(ctx2, body, subst1(w.cod, w.name, Var(x2)), cond))
            case Case(Var(y), clauses):
                if ctx_lookup(ctx, y) is None:
                    if self._global(y) is None and isinstance(self.whnf(a), Pi):
                        return self.check(ctx, Lam(y, t), a, cond)
                    raise fail("UnknownName", f"case split on unknown variable {y}")
                return self.check_case_split(ctx, y, clauses, a, cond, self.spans.get(id(t)))
            case RecordLit():
                return self.check_record_literal(ctx, t, a, cond)
        head, args = spine(t)
        if isinstance(head, Var) and ctx_lookup(ctx, head.name) is None and self._global(head.name) == "con":
            return self._con(ctx, head.name, (), args, a)[0]
        if isinstance(head, Con):
            return self._con(ctx, head.name, head.params, head.args + tuple(args), a)[0]
        t2, ty = self.infer(ctx, t)
        if not self.conv(ty, a):
            raise self._mismatch(f"{t} has the wrong type", a, ty)
        return t2

    # -- case splits

    def check_case_split(self, ctx: Ctx, y: str, clauses, a: Term, cond: bool = False, span: Span | None = None) -> Term:
        yty = self.whnf(ctx_lookup(ctx, y))
        seen: set[str] = set()
        for cl in clauses:
            if cl.con in seen:
                raise fail("DuplicateClause", f"two clauses for {cl.con}", span)
            seen.add(cl.con)
        if isinstance(yty, Interval):
            if not cond:
                raise fail("IllegalIntervalSplit", f"{y} : I cannot be split outside a condition", span)
            out = []
            for cl in clauses:
                if cl.con not in ENDPOINTS:
                    raise fail("UnknownName", f"{cl.con} is not an endpoint of I", span)
                if cl.binders:
                    raise fail("ArityMismatch", f"{cl.con} takes no arguments", span)
                p = Left() if cl.con == "left" else Right()
                body = self.check(split_ctx(ctx, y, p, ()), subst1(cl.body, y, p), subst1(a, y, p), cond)
                out.append(Clause(cl.con, (), body))
            return Case(Var(y), tuple(out))
        dd = self.sig.data(yty.name) if isinstance(yty, Data) else None
        if dd is None:
            raise fail("TypeMismatch", f"cannot split {y} of type {self.nf(yty)}", span, actual=str(self.nf(yty)))
        for cl in clauses:
            if dd.constructor(cl.con) is None:
                raise fail("UnknownName", f"{cl.con} is not a constructor of {dd.name}", span)
        if not cond:
            missing = [c.name for c in dd.constructors if c.name not in seen]
            if missing:
                raise fail("NotCovering", f"split on {y} is missing clauses for {', '.join(missing)}", span)
        pm = dict(zip(tele_vars(dd.params), yty.params))
        out = []
        conditioned = []
        for cl in clauses:
            cd = dd.constructor(cl.con)
            if len(cl.binders) != len(cd.params):
                raise fail("ArityMismatch", f"{cl.con} takes {len(cd.params)} arguments, the clause binds {len(cl.binders)}", span)
            names, ren = [], {}
            taken = ctx_names(ctx)
            for b in cl.binders:
                if b in taken or b in names:
                    b2 = fresh(b, taken | free_vars(cl.body) | set(names) | set(cl.binders))
                    ren[b] = Var(b2)
                    names.append(b2)
                else:
                    names.append(b)
            tele = replace(subst_tele(cd.params, pm), names)
            p = Con(cl.con, yty.params, tuple(Var(x) for x in names))
            ctx2 = split_ctx(ctx, y, p, tele)
            a2 = subst1(a, y, p)
            body = self.check(ctx2, subst(cl.body, {**ren, y: p}), a2, cond)
            out.append(Clause(cl.con, tuple(names), body))
            if cd.conditions:
                conditioned.append((cd, ctx2, tele, body, a2))
        clauses2 = tuple(out)
        for cd, ctx2, tele, body, a2 in conditioned:
            conds = tuple(subst(c, pm) for c in cd.conditions)
            self.obligations_seen += 1
            self.pending.append(ConfluenceObligation(ctx2, tele, conds, body, clauses2, a2, cd.name, span))
        return Case(Var(y), clauses2)

    # -- record literals

    def check_record_literal(self, ctx: Ctx, lit: RecordLit, a: Term, cond: bool = False) -> Term:
        w = self.whnf(a)
        rd = self.sig.record(w.name) if isinstance(w, Data) else None
        if rd is None:
            raise self._mismatch(f"a {lit.record} literal is not a value of this type", a, Data(lit.record, ()))
        if lit.record != rd.name:
            raise self._mismatch(f"a {lit.record} literal is not a {rd.name}", a, Data(lit.record, ()))
        if lit.params:
            ps = self.check_args(ctx, lit.params, rd.params)
            if not self.conv(Data(rd.name, ps), w):
                raise self._mismatch("record literal parameters disagree with the expected type", w, Data(rd.name, ps))
        given: dict[str, Term] = {}
        for f, body in lit.fields:
            if f in given:
                raise fail("DuplicateField", f"field {f} given twice")
            if rd.field_index(f) is None:
                raise fail("UnknownName", f"record {rd.name} has no field {f}")
            given[f] = body
        m: dict[str, Term] = dict(zip(tele_vars(rd.params), w.params))
        out = []
        for fd in rd.fields:
            if fd.name not in given:
                raise fail("MissingField", f"field {fd.name} is missing")
            b2 = self.check(ctx, given[fd.name], subst(fd.type, m), cond)
            ftype = subst(fd.type, m)
            cols, _ = pi_split(ftype)
            for cc in fd.coconditions:
                self.obligations_seen += 1
                self.pending.append(
                    CoconditionObligation(ctx, b2, subst(cc, m), cols, fd.name, self.spans.get(id(lit)))
                )
            m[fd.name] = b2
            out.append((fd.name, b2))
        return RecordLit(rd.name, w.params, tuple(out))

    # -- obligations

    def discharge(self) -> int:
        """Check every queued confluence obligation; returns how many conversions ran."""
        pending, self.pending = self.pending, []
        if not self.confluence_enabled:
            return 0
        n = 0
        for ob in pending:
            if isinstance(ob, ConfluenceObligation):
                n += check_confluence(self.sig, ob, self.fuel)
            else:
                n += check_cocondition_confluence(self.sig, ob, self.fuel)
        return n

    # -- conditions

    def check_conditions(self, ctx: Ctx, columns: Telescope, clauses: tuple[CondClause, ...], result: Term) -> tuple[Term, ...]:
        """Elaborate condition clauses into one lambda/case-tree per split pattern.

        Clauses that split the same set of columns share one tree. Two trees
        that can both fire on a common instance must agree there.
        """
        names = []
        taken = ctx_names(ctx)
        for x, _ in columns:
            names.append(fresh(x, taken | set(names)))
        cols = replace(columns, names)
        result = subst(result, {x: Var(y) for (x, _), y in zip(columns, names) if x != y})
        target = pi_tele(cols, result)
        col_types = []
        for k, (x, ty) in enumerate(cols):
            col_types.append(self.whnf(ty))

        groups: dict[tuple[int, ...], list[tuple[list[_Pat], Term, CondClause]]] = {}
        for cc in clauses:
            if len(cc.patterns) != len(cols):
                raise fail("ArityMismatch", f"condition clause has {len(cc.patterns)} patterns for {len(cols)} parameters", cc.span)
            pats = [self._classify(p, ty) for p, ty in zip(cc.patterns, col_types)]
            key = tuple(k for k, p in enumerate(pats) if p.kind == "con")
            groups.setdefault(key, []).append((pats, cc.body, cc))

        alts = []
        rows_of = []
        for key, rows in groups.items():
            prepared = []
            seen = set()
            for pats, body, cc in rows:
                sig_ = tuple((pats[k].name,) for k in key)
                if sig_ in seen:
                    raise fail("DuplicateClause", "two condition clauses with the same patterns", cc.span)
                seen.add(sig_)
                prepared.append(self._prepare_row(pats, body, names, ctx))
            tree = _build_tree(prepared, list(key), names)
            try:
                alts.append(self.check(ctx, lams(names, tree), target, cond=True))
            except KernelError as e:
                if e.diag.span is None:
                    e.diag.span = rows[0][2].span
                raise
            rows_of.append([r[0] for r in rows])
        self._check_overlaps(ctx, alts, rows_of, cols)
        return tuple(alts)

    def _classify(self, p: PatternSyntax, ty: Term) -> _Pat:
        if isinstance(ty, Interval):
            if p.name in ENDPOINTS and not p.args:
                return _Pat("con", p.name)
            if p.args or self.sig.constructor(p.name) or p.name in ENDPOINTS:
                raise fail("UnknownName", f"{p.name} is not an endpoint of I", p.span)
            return _Pat("var", p.name)
        dd = self.sig.data(ty.name) if isinstance(ty, Data) else None
        if dd is not None and dd.constructor(p.name) is not None:
            cd = dd.constructor(p.name)
            if len(p.args) != len(cd.params):
                raise fail("ArityMismatch", f"{p.name} takes {len(cd.params)} arguments", p.span)
            return _Pat("con", p.name, p.args)
        if p.args or self.sig.constructor(p.name) or p.name in ENDPOINTS:
            raise fail("UnknownName", f"{p.name} is not a constructor of {ty}", p.span)
        return _Pat("var", p.name)

    def _prepare_row(self, pats: list[_Pat], body: Term, names: list[str], ctx: Ctx):
        """Rename pattern variables to column names and binders to fresh names."""
        m: dict[str, Term] = {}
        avoid = set(names) | ctx_names(ctx) | free_vars(body)
        out = []
        for p, col in zip(pats, names):
            if p.kind == "var":
                m[p.name] = Var(col)
                out.append(p)
            else:
                args = []
                for b in p.args:
                    b2 = fresh(b, avoid | set(args)) if (b in names or b in ctx_names(ctx)) else b
                    if b2 != b:
                        m[b] = Var(b2)
                    args.append(b2)
                    avoid.add(b2)
                out.append(_Pat("con", p.name, tuple(args)))
        return out, subst(body, m)

    def _check_overlaps(self, ctx: Ctx, alts, rows_of, cols: Telescope) -> None:
        for g1 in range(len(alts)):
            for g2 in range(g1 + 1, len(alts)):
                for r1 in rows_of[g1]:
                    for r2 in rows_of[g2]:
                        inst = self._unify_rows(ctx, r1, r2, cols)
                        if inst is None:
                            continue
                        lhs, rhs = apply(alts[g1], inst), apply(alts[g2], inst)
                        if not self.conv(lhs, rhs):
                            raise fail(
                                "ConfluenceViolation",
                                f"overlapping condition clauses disagree: {self.nf(lhs)} vs {self.nf(rhs)}",
                                expected=str(self.nf(lhs)),
                                actual=str(self.nf(rhs)),
                            )

    def _unify_rows(self, ctx: Ctx, r1: list[_Pat], r2: list[_Pat], cols: Telescope) -> list[Term] | None:
        inst: list[Term] = []
        m: dict[str, Term] = {}
        avoid = set(ctx_names(ctx))
        for (p, q), (x, ty) in zip(zip(r1, r2), cols):
            pat = p if p.kind == "con" else q
            if p.kind == "con" and q.kind == "con" and p.name != q.name:
                return None
            if pat.kind == "var":
                v = Var(fresh(x, avoid))
                avoid.add(v.name)
            elif pat.name in ENDPOINTS:
                v = Left() if pat.name == "left" else Right()
            else:
                w = self.whnf(subst(ty, m))
                args = []
                for b in pat.args:
                    args.append(Var(fresh(b, avoid)))
                    avoid.add(args[-1].name)
                v = Con(pat.name, w.params, tuple(args))
            m[x] = v
            inst.append(v)
        return inst

    # -- declarations

    def _fresh_name(self, name: str, span: Span | None) -> None:
        if name in self.sig:
            raise fail("DuplicateDeclaration", f"{name} is already declared", span)

    def check_data_decl(self, d: DataSyntax) -> DataDef:
        self._fresh_name(d.name, d.span)
        base = self.sig
        params = self.check_telescope((), d.params)
        ctors: list[ConstructorDef] = []
        try:
            for c in d.ctors:
                if c.name in base or c.name == d.name or any(k.name == c.name for k in ctors):
                    raise fail("DuplicateDeclaration", f"{c.name} is already declared", c.span)
                # only the constructors before this one are in scope
                self.sig = base.extend(DataDef(d.name, params, tuple(ctors)))
                try:
                    tele = self.check_telescope(params, c.params)
                    conds: tuple[Term, ...] = ()
                    if c.clauses:
                        result = Data(d.name, tuple(Var(x) for x, _ in params))
                        conds = self.check_conditions(params, tele, c.clauses, result)
                        self.discharge()
                except KernelError as e:
                    if e.diag.span is None:
                        e.diag.span = c.span
                    raise
                ctors.append(ConstructorDef(c.name, tele, conds))
        finally:
            self.sig = base
            self.pending.clear()
        dd = DataDef(d.name, params, tuple(ctors))
        self.sig = base.extend(dd)
        return dd

    def check_record_decl(self, r: RecordSyntax) -> RecordDef:
        self._fresh_name(r.name, r.span)
        params = self.check_telescope((), r.params)
        ctx: Ctx = params
        fields: list[FieldDef] = []
        for f in r.fields:
            try:
                if any(g.name == f.name for g in fields) or f.name in ctx_names(params):
                    raise fail("DuplicateField", f"field {f.name} is declared twice")
                ty = self.check_is_type(ctx, f.type)
                coconds: tuple[Term, ...] = ()
                if f.clauses:
                    cols, cod = pi_split(ty)
                    if not cols:
                        raise fail("ArityMismatch", f"field {f.name} is not a function, so it cannot have a cocondition")
                    coconds = self.check_conditions(ctx, cols, f.clauses, cod)
                    self.discharge()
            except KernelError as e:
                self.pending.clear()
                if e.diag.span is None:
                    e.diag.span = f.span
                raise
            fields.append(FieldDef(f.name, ty, coconds))
            ctx = ctx + ((f.name, ty),)
        rd = RecordDef(r.name, params, tuple(fields))
        self.sig = self.sig.extend(rd)
        return rd

    def check_func_decl(self, f: FuncSyntax) -> FuncDef:
        self._fresh_name(f.name, f.span)
        ty = self.check_is_type((), f.type)
        base = self.sig
        self.sig = base.extend(FuncDef(f.name, ty, None))
        try:
            body = self.check((), f.body, ty)
            if any(isinstance(u, FuncRef) and u.name == f.name for u in _walk_terms(body)):
                self.termination_check(f.name, body)
            fd = FuncDef(f.name, ty, body)
            self.sig = base.extend(fd)
            self.discharge()
        except BaseException:
            self.sig = base
            self.pending.clear()
            raise
        return fd

    def termination_check(self, name: str, body: Term) -> None:
        """Every recursive call must shrink one common argument structurally."""
        params = []
        t = body
        while isinstance(t, Lam):
            params.append(t.name)
            t = t.body
        calls: list[set[int]] = []
        _scan_calls(name, t, {x: k for k, x in enumerate(params)}, {}, calls)
        if not calls:
            return
        common = set(range(len(params)))
        for c in calls:
            common &= c
        if not common:
            raise fail("TerminationFailure", f"recursive calls of {name} do not decrease a common argument")

    def check_module(self, mod: SourceModule) -> Signature:
        self.spans = mod.spans
        for d in mod.declarations:
            try:
                match d:
                    case DataSyntax():
                        self.check_data_decl(d)
                    case RecordSyntax():
                        self.check_record_decl(d)
                    case FuncSyntax():
                        self.check_func_decl(d)
            except KernelError as e:
                if e.diag.span is None:
                    e.diag.span = d.span
                raise
        return self.sig

    def elaborate_closed(self, t: Term, ctx: Ctx = ()) -> tuple[Term, Term]:
        """Infer ``t`` in ``ctx`` and discharge any obligations it raised."""
        t2, ty = self.infer(ctx, t)
        self.discharge()
        return t2, ty


# ---------------------------------------------------------------------------
# helpers


def field_type(rd: RecordDef, k: int, params, target: Term) -> Term:
    m: dict[str, Term] = dict(zip(tele_vars(rd.params), params))
    for f in rd.fields[:k]:
        m[f.name] = Proj(target, rd.name, tuple(params), f.name)
    return subst(rd.fields[k].type, m)


def pi_split(t: Term) -> tuple[Telescope, Term]:
    cols = []
    while isinstance(t, Pi):
        cols.append((t.name, t.dom))
        t = t.cod
    return tuple(cols), t


def _beta(t: Term) -> Term:
    if isinstance(t, App) and isinstance(t.fn, Lam):
        return subst1(t.fn.body, t.fn.name, t.arg)
    return t


def _build_tree(rows, cols: list[int], names: list[str]) -> Term:
    if not cols:
        return rows[0][1]
    k = cols[0]
    order: dict[str, list] = {}
    for pats, body in rows:
        order.setdefault(pats[k].name, []).append((pats, body))
    clauses = []
    for con, rs in order.items():
        binders = rs[0][0][k].args
        renamed = []
        for pats, body in rs:
            own = pats[k].args
            if own != binders:
                body = subst(body, {a: Var(b) for a, b in zip(own, binders) if a != b})
            renamed.append((pats, body))
        clauses.append(Clause(con, binders, _build_tree(renamed, cols[1:], names)))
    return Case(Var(names[k]), tuple(clauses))


def _walk_terms(t: Term):
    from .syntax import subterms

    return subterms(t)


def _scan_calls(name: str, t: Term, params: dict[str, int], smaller: dict[str, frozenset[int]], calls: list[set[int]]) -> None:
    def drop(d: dict, xs) -> dict:
        return {k: v for k, v in d.items() if k not in xs} if any(x in d for x in xs) else d

    match t:
        case App() | FuncRef():
            head, args = spine(t)
            if isinstance(head, FuncRef) and head.name == name:
                dec = set()
                for k, a in enumerate(args):
                    if isinstance(a, Var) and k in smaller.get(a.name, frozenset()):
                        dec.add(k)
                calls.append(dec)
            elif not isinstance(head, FuncRef):
                _scan_calls(name, head, params, smaller, calls)
            for a in args:
                _scan_calls(name, a, params, smaller, calls)
        case Case(Var(y), clauses):
            base = smaller.get(y, frozenset())
            if y in params:
                base = base | {params[y]}
            for cl in clauses:
                p2 = drop(params, cl.binders)
                s2 = dict(smaller)
                for b in cl.binders:
                    s2[b] = base
                _scan_calls(name, cl.body, p2, s2, calls)
        case Lam(x, b):
            _scan_calls(name, b, drop(params, [x]), drop(smaller, [x]), calls)
        case Pi(x, a, b):
            _scan_calls(name, a, params, smaller, calls)
            _scan_calls(name, b, drop(params, [x]), drop(smaller, [x]), calls)
        case Case(s, clauses):
            _scan_calls(name, s, params, smaller, calls)
            for cl in clauses:
                _scan_calls(name, cl.body, drop(params, cl.binders), drop(smaller, cl.binders), calls)
        case Con(_, ps, args):
            for u in ps + args:
                _scan_calls(name, u, params, smaller, calls)
        case Data(_, ps):
            for u in ps:
                _scan_calls(name, u, params, smaller, calls)
        case RecordLit(_, ps, fs):
            for u in ps:
                _scan_calls(name, u, params, smaller, calls)
            for _, u in fs:
                _scan_calls(name, u, params, smaller, calls)
        case Proj(a, _, ps, _):
            for u in (a,) + ps:
                _scan_calls(name, u, params, smaller, calls)
        case Coe(f, i, a):
            for u in (f, i, a):
                _scan_calls(name, u, params, smaller, calls)
        case Squeeze(a, b):
            _scan_calls(name, a, params, smaller, calls)
            _scan_calls(name, b, params, smaller, calls)


def check_source(text: str, path: str = "<input>", **kw) -> Signature:
    """Parse and check a whole module; raises on the first error."""
    from .parser import parse_module

    return Checker(**kw).check_module(parse_module(text, path))
