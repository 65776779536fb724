import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from rtgkit.lam import build_lambda_grammar, restrict_reachable  # noqa: E402
from rtgkit.rtg import parse_grammar  # noqa: E402

G0_TEXT = """
terminal a 2
terminal b 1
terminal c 0
rule A -> a(B,B)
rule A -> c
rule B -> b(A)
"""

# two leftmost derivations of a(c,c)
AMBIGUOUS_TEXT = """
terminal a 2
terminal c 0
rule A -> a(B,C)
rule A -> a(D,E)
rule B -> c
rule C -> c
rule D -> c
rule E -> c
"""

G1_TEXT = """
terminal a 2
terminal b 1
terminal c 0
rule A -> a(c,A)
rule A -> b(B)
rule B -> b(B)
rule B -> c
"""

# unary a, b, c so that A -> c(C) is canonical; C's leaf is e
PERIOD_TEXT = """
terminal a 1
terminal b 1
terminal c 1
terminal e 0
rule A -> a(B)
rule B -> b(A)
rule A -> c(C)
rule C -> e
"""

PERIOD_EXTENSION = """
rule A -> a(A1)
rule A1 -> a(A2)
rule A2 -> a(A)
"""

SPLIT_TEXT = """
terminal a 2
terminal b 1
terminal c 0
rule N -> b(c)
rule N -> a(N,N)
"""

# unit rules and a nested right-hand side
UNIT_TEXT = """
terminal a 2
terminal b 1
terminal c 0
rule S -> T
rule S -> b(b(S))
rule T -> a(S,c)
rule T -> c
"""


@pytest.fixture(scope="session")
def g0():
    return parse_grammar(G0_TEXT)


@pytest.fixture(scope="session")
def ambiguous():
    return parse_grammar(AMBIGUOUS_TEXT)


@pytest.fixture(scope="session")
def g1():
    return parse_grammar(G1_TEXT)


@pytest.fixture(scope="session")
def period_grammar():
    return parse_grammar(PERIOD_TEXT)


@pytest.fixture(scope="session")
def period_extended():
    return parse_grammar(PERIOD_TEXT + PERIOD_EXTENSION)


@pytest.fixture(scope="session")
def lam111():
    return build_lambda_grammar(1, 1, 1)


@pytest.fixture(scope="session")
def lam221():
    return build_lambda_grammar(2, 2, 1)


@pytest.fixture(scope="session")
def lam222():
    return build_lambda_grammar(2, 2, 2)


@pytest.fixture(scope="session")
def e222(lam222):
    return restrict_reachable(lam222)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.report_lines():
        terminalreporter.write_line(line)
