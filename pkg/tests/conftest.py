import sys
from functools import lru_cache
from pathlib import Path

import pytest

from condkernel.parser import parse_module, parse_term
from condkernel.typecheck import Checker

sys.setrecursionlimit(10000)

ROOT = Path(__file__).resolve().parent.parent
CORPUS = ROOT / "corpus"
POSITIVE = sorted(CORPUS.glob("*.cond"))
NEGATIVE = sorted((CORPUS / "negative").glob("*.cond"))


@lru_cache(maxsize=None)
def load_sig(name: str):
    """Checked signature of a corpus file, cached across tests."""
    path = CORPUS / f"{name}.cond"
    return Checker().check_module(parse_module(path.read_text(), str(path)))


def sig_from(text: str, **kw):
    return Checker(**kw).check_module(parse_module(text))


def elab(sig, text: str, ctx=()):
    """Parse ``text`` and infer it in ``ctx``; returns (term, type)."""
    return Checker(sig).elaborate_closed(parse_term(text), ctx)


def ctx_of(sig, tele_text: str):
    """Check a telescope written like ``(A : U) (x : A)``."""
    from condkernel.parser import parse_telescope

    return Checker(sig).check_telescope((), parse_telescope(tele_text))


@pytest.fixture(scope="session")
def int_sig():
    return load_sig("int")


@pytest.fixture(scope="session")
def conat_sig():
    return load_sig("conat")


@pytest.fixture(scope="session")
def path_sig():
    return load_sig("path")


@pytest.fixture(scope="session")
def circle_sig():
    return load_sig("circle")


@pytest.fixture(scope="session")
def torus_sig():
    return load_sig("torus")


@pytest.fixture(scope="session")
def intelim_sig():
    return load_sig("intelim")
