"""A small dependent type theory kernel with conditions, coconditions and an interval."""
from .diagnostics import CODES, Diagnostic, KernelError
from .parser import ParseFailed, parse_module, parse_term, pretty_term
from .reduction import Reducer, Strategy, convertible, normalize, trace, whnf
from .syntax import Signature, alpha_eq, free_vars, replace, substitute, tele_vars
from .typecheck import Checker, check_source

__all__ = [
    "CODES",
    "Checker",
    "Diagnostic",
    "KernelError",
    "ParseFailed",
    "Reducer",
    "Signature",
    "Strategy",
    "alpha_eq",
    "check_source",
    "convertible",
    "free_vars",
    "normalize",
    "parse_module",
    "parse_term",
    "pretty_term",
    "replace",
    "substitute",
    "tele_vars",
    "trace",
    "whnf",
]
