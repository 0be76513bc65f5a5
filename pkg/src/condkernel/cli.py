"""Command-line driver: ``condkernel check|eval|fuzz``.

Exit status is 0 on success, 1 when a file fails to check (or the oracle
finds a disagreement) and 2 when an input cannot be read.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass

from .confluence import reduction_order_oracle
from .diagnostics import Diagnostic, KernelError
from .parser import ParseFailed, parse_module, parse_telescope, parse_term
from .reduction import DEFAULT_FUEL, Reducer, trace
from .syntax import Signature
from .typecheck import Checker

EXIT_OK, EXIT_ERROR, EXIT_IO = 0, 1, 2


@dataclass
class Loaded:
    sig: Signature | None
    diags: list[Diagnostic]
    text: str
    status: int


def _emit(diags: list[Diagnostic], path: str, text: str | None, as_json: bool) -> None:
    for d in diags:
        if as_json:
            print(d.to_json(text))
        else:
            print(d.render(path, text), file=sys.stderr)


def load(path: str, fuel: int, check_confluence: bool = True) -> Loaded:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as e:
        return Loaded(None, [Diagnostic("IOError", f"cannot read {path}: {e}")], "", EXIT_IO)
    try:
        mod = parse_module(text, path)
    except ParseFailed as e:
        return Loaded(None, e.diagnostics, text, EXIT_ERROR)
    checker = Checker(fuel=fuel, check_confluence=check_confluence)
    try:
        sig = checker.check_module(mod)
    except KernelError as e:
        return Loaded(None, [e.diag], text, EXIT_ERROR)
    return Loaded(sig, [], text, EXIT_OK)


def run_check(args) -> int:
    status = EXIT_OK
    for path in args.files:
        res = load(path, args.fuel)
        _emit(res.diags, path, res.text or None, args.json)
        if res.status == EXIT_OK and not args.json:
            print(f"{path}: ok ({len(res.sig.decls)} declarations)")
        status = max(status, res.status)
    return status


def run_eval(args) -> int:
    res = load(args.file, args.fuel)
    if res.status != EXIT_OK:
        _emit(res.diags, args.file, res.text or None, args.json)
        return res.status
    checker = Checker(res.sig, fuel=args.fuel)
    source = args.expr
    try:
        ctx: tuple = ()
        if args.ctx:
            source = args.ctx
            ctx = checker.check_telescope((), parse_telescope(args.ctx))
            source = args.expr
        term, ty = checker.elaborate_closed(parse_term(args.expr), ctx)
        red = Reducer(res.sig, args.fuel)
        nf = red.normalize(term)
        steps = trace(res.sig, term, args.fuel) if args.trace else None
    except ParseFailed as e:
        _emit(e.diagnostics, "<expr>", source, args.json)
        return EXIT_ERROR
    except KernelError as e:
        _emit([e.diag], "<expr>", source, args.json)
        return EXIT_ERROR
    if args.json:
        out = {"normal": str(nf), "type": str(red.normalize(ty))}
        if steps is not None:
            out["trace"] = [s.to_dict() for s in steps]
        print(json.dumps(out, ensure_ascii=False))
    else:
        print(nf)
        if steps is not None:
            print(json.dumps([s.to_dict() for s in steps], ensure_ascii=False))
    return EXIT_OK


def run_fuzz(args) -> int:
    res = load(args.file, args.fuel, check_confluence=not args.unsafe_skip_confluence)
    if res.status != EXIT_OK:
        _emit(res.diags, args.file, res.text or None, args.json)
        return res.status
    report = reduction_order_oracle(res.sig, args.seeds, args.max_size, args.seed, args.fuel)
    print(json.dumps(
        {"seeds": report.seeds, "checked": report.checked, "disagreements": report.disagreements},
        ensure_ascii=False,
    ))
    return EXIT_OK if report.ok else EXIT_ERROR


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--fuel", type=int, default=DEFAULT_FUEL, help="reduction step budget (default %(default)s)")
    common.add_argument("--json", action="store_true", help="machine-readable output")

    p = argparse.ArgumentParser(prog="condkernel", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", parents=[common], help="type-check source files")
    c.add_argument("files", nargs="+")
    c.set_defaults(run=run_check)

    e = sub.add_parser("eval", parents=[common], help="normalize a term in a file's scope")
    e.add_argument("file")
    e.add_argument("--expr", required=True, help="term to evaluate")
    e.add_argument("--ctx", help="binders for free variables, e.g. '(A : U) (a : A)'")
    e.add_argument("--trace", action="store_true", help="also print the rewrite steps as JSON")
    e.set_defaults(run=run_eval)

    f = sub.add_parser("fuzz", parents=[common], help="compare reduction orders on random terms")
    f.add_argument("file")
    f.add_argument("--seeds", type=int, default=1000)
    f.add_argument("--max-size", type=int, default=20)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--unsafe-skip-confluence", action="store_true", help=argparse.SUPPRESS)
    f.set_defaults(run=run_fuzz)
    return p


def main(argv: list[str] | None = None) -> int:
    sys.setrecursionlimit(max(sys.getrecursionlimit(), 10_000))
    args = build_parser().parse_args(argv)
    return args.run(args)


if __name__ == "__main__":
    sys.exit(main())
