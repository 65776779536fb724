"""Acceptance criteria 1 to 10.

Each test records a PASS or FAIL line; the lines are printed in the pytest
terminal summary, or directly when this file is run as a script.
"""

import functools
import itertools
import math
import time
from collections import Counter

import pytest

from rtgkit.counting import build_counts, detect_period, sample_uniform, stream_rng
from rtgkit.decomposition import Decomposition, decompose, decompose_aux, good_for, recompose, verify_bijection
from rtgkit.experiments import ExperimentConfig, monkey_words, repeat_pattern, run_main_experiment
from rtgkit.lam import (
    Arrow,
    O,
    beta_max_len,
    build_lambda_grammar,
    exp_tower,
    explosive,
    num_vars,
    restrict_reachable,
    strategy_length,
    term_size,
    typecheck,
)
from rtgkit.normalize import full_pipeline
from rtgkit.rtg import enumerate_trees, is_strongly_connected, parse_grammar, reachable
from rtgkit.trees import HOLE_TREE, fill

from conftest import AMBIGUOUS_TEXT, G0_TEXT, G1_TEXT, PERIOD_EXTENSION, PERIOD_TEXT, SPLIT_TEXT, UNIT_TEXT
from oracles import count_bounded_closed_terms, naive_beta, to_db
from test_counting import _assert_counts_match_enumeration, _check_residue_laws
from test_decomposition import ABC, R, _all_trees_upto, _good_pool
from test_normalize import NESTED_TEXT, _assert_language_partition

RESULTS: dict[int, tuple[str, str, float, str]] = {}


def criterion(num: int, title: str):
    def deco(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            start = time.perf_counter()
            try:
                fn(*args, **kwargs)
            except BaseException as exc:
                RESULTS[num] = ("FAIL", title, time.perf_counter() - start, f"{type(exc).__name__}: {exc}"[:200])
                raise
            RESULTS[num] = ("PASS", title, time.perf_counter() - start, "")

        return run

    return deco


def report_lines() -> list[str]:
    lines = []
    for num in sorted(RESULTS):
        status, title, secs, why = RESULTS[num]
        line = f"criterion {num:2d}: {status}  {title}  ({secs:.1f} s)"
        lines.append(line + (f"  [{why}]" if why else ""))
    return lines


@criterion(1, "counting equals enumeration, n <= 12, four grammars, under 60 s")
def test_criterion_1_counting_oracle():
    start = time.perf_counter()
    _assert_counts_match_enumeration(parse_grammar(G0_TEXT), 12)
    _assert_counts_match_enumeration(parse_grammar(AMBIGUOUS_TEXT), 12, distinct=True)
    _assert_counts_match_enumeration(build_lambda_grammar(1, 1, 1).grammar, 12)
    _assert_counts_match_enumeration(build_lambda_grammar(2, 2, 1).grammar, 12)
    assert time.perf_counter() - start < 60


@criterion(2, "closed (2,2,2) terms: grammar counts equal brute force, n <= 8")
def test_criterion_2_bijection_counts():
    lg = build_lambda_grammar(2, 2, 2)
    table = build_counts(lg.grammar, 8, contexts=False)
    for n in range(1, 9):
        grammar_side = sum(table.count_trees(N, n) for N in lg.closed_nonterminals())
        assert grammar_side == count_bounded_closed_terms(n, 2, 2, 2), n


@criterion(3, "decomposition suite, size <= 12, m in 1..4, replacement stability at size <= 10")
def test_criterion_3_decomposition():
    for t in _all_trees_upto(12):
        for m in (1, 2, 3, 4):
            u, _, _ = decompose_aux(t, m)
            assert u.holes == 1 and u.size < m and fill(u, [HOLE_TREE]) == u
            d = decompose(t, m)
            assert recompose(d.frame, d.parts) == t
            for part in d.parts:
                assert good_for(part, m)
                assert m <= part.size <= R * (m - 1) + 1
            if m <= t.size:
                assert 2 * R * m * len(d.parts) >= t.size
    cache: dict = {}
    frames = {(decompose(t, m).frame, m) for t in _all_trees_upto(10) for m in (1, 2, 3, 4)}
    for e, m in frames:
        pools = [_good_pool(h.arity, h.size, m, cache) for h in e.holes()]
        for combo in itertools.product(*pools):
            assert decompose(recompose(e, combo), m) == Decomposition(e, tuple(combo))
    assert ABC == {"a": 2, "b": 1, "c": 0}


@criterion(4, "verify_bijection on G0 (n <= 11, m = 2, 3) and G(1,1,1) (n <= 9, m = 2)")
def test_criterion_4_product_coproduct():
    g0 = parse_grammar(G0_TEXT)
    for n in range(1, 12):
        for m in (2, 3):
            rep = verify_bijection(g0, "A", n, m)
            assert rep.passed, rep.counterexample
    lg = build_lambda_grammar(1, 1, 1)
    for n in range(1, 10):
        rep = verify_bijection(lg.grammar, "N{|-o->o}", n, 2)
        assert rep.passed, rep.counterexample


@criterion(5, "canonicalization preserves languages up to size 10, Q_N disjoint")
def test_criterion_5_canonicalization():
    for text in (SPLIT_TEXT, UNIT_TEXT, G1_TEXT, NESTED_TEXT):
        g = parse_grammar(text)
        res = full_pipeline(g)
        assert res.grammar.is_canonical()
        _assert_language_partition(g, res, 10)


@criterion(6, "period fixture c = 2 with residues 0/1, c = 1 after extension, residue additivity")
def test_criterion_6_periodicity():
    base = parse_grammar(PERIOD_TEXT)
    rep = detect_period(base)
    assert rep.period == 2
    assert rep.residue("A", "A") == rep.residue("B", "B") == 0
    assert rep.residue("A", "B") == rep.residue("B", "A") == 1
    ext = parse_grammar(PERIOD_TEXT + PERIOD_EXTENSION)
    assert detect_period(ext).period == 1
    fixtures = [
        parse_grammar(G0_TEXT), base, ext,
        build_lambda_grammar(1, 1, 1).grammar, build_lambda_grammar(2, 2, 1).grammar,
    ]
    for g in fixtures:
        _check_residue_laws(g, detect_period(g, max_size=24), 24)


@criterion(7, "explosive terms: size, typing, variables, beta(Expl_1), beta(Expl_2), beta(Expl_3) >= 256 in 10 s")
def test_criterion_7_explosive():
    for m in range(1, 6):
        for k in range(2, 6):
            t = explosive(m, k)
            assert term_size(t) == 8 * m + 8 * k - 2
            j = typecheck(t)
            assert j.env == () and j.type == Arrow(O, O)
            assert j.order == k and j.iar == k
            assert num_vars(t) == 2
    b1, b2 = beta_max_len(explosive(1, 2)), beta_max_len(explosive(2, 2))
    assert b1.exact and b2.exact
    assert b1.length >= exp_tower(2, 1) and b2.length >= exp_tower(2, 2)
    assert b1.length == naive_beta(to_db(explosive(1, 2)))
    start = time.perf_counter()
    assert strategy_length(explosive(3, 2)) >= exp_tower(2, 3)
    assert time.perf_counter() - start < 10


@criterion(8, "E(2,2,2) strongly connected, L_n(closed o->o) non-empty for 5 <= n <= 30")
def test_criterion_8_e222():
    e = restrict_reachable(build_lambda_grammar(2, 2, 2))
    g = e.grammar
    assert is_strongly_connected(g)
    root = "N{|-o->o}"
    for N in g.nonterminals:
        assert reachable(g, root, N) and reachable(g, N, root)
    table = build_counts(g, 30, contexts=False)
    assert all(table.count_trees(root, n) > 0 for n in range(5, 31))


def _sampling_fixtures():
    return {
        "g0": parse_grammar(G0_TEXT),
        "g1": full_pipeline(parse_grammar(G1_TEXT)).grammar,
        "period": parse_grammar(PERIOD_TEXT),
        "period+ext": parse_grammar(PERIOD_TEXT + PERIOD_EXTENSION),
        "G(1,1,1)": build_lambda_grammar(1, 1, 1).grammar,
        "G(2,2,1)": build_lambda_grammar(2, 2, 1).grammar,
    }


@criterion(9, "sampler within 5 sigma on every slice with |L_n| <= 30, CSV identical for 1/2/8 workers")
def test_criterion_9_sampler_uniformity():
    draws = 30000
    slices = 0
    for name, g in _sampling_fixtures().items():
        table = build_counts(g, 30, contexts=False)
        for N in sorted(g.nonterminals):
            for n in range(1, 31):
                k = table.count_trees(N, n)
                if not 1 <= k <= 30:
                    continue
                support = enumerate_trees(g, N, n)
                assert len(support) == k, (name, N, n)
                rng = stream_rng(2024, slices)
                hist = Counter(sample_uniform(table, N, n, rng) for _ in range(draws if k > 1 else 50))
                assert set(hist) <= support
                if k > 1:
                    p = 1 / k
                    sigma = math.sqrt(draws * p * (1 - p))
                    for t in support:
                        assert abs(hist[t] - draws * p) <= 5 * sigma, (name, N, n, t)
                slices += 1
    assert slices > 100
    words = {
        w: monkey_words("ab", repeat_pattern("ab"), [64, 128], 1000, seed=9, workers=w, chunk=64).to_csv()
        for w in (1, 2, 8)
    }
    e = restrict_reachable(build_lambda_grammar(2, 2, 2))
    table = build_counts(e.grammar, 60, contexts=False)
    trend = {
        w: run_main_experiment(ExperimentConfig(seed=5, samples=300, sizes=(30, 60), workers=w, chunk=40), table).to_csv()
        for w in (1, 2, 8)
    }
    assert len(set(words.values())) == 1
    assert len(set(trend.values())) == 1


@pytest.mark.slow
@criterion(10, "trend experiment (2,2,2,2), p = 0.15, 2000 samples, sizes 50..400, under 10 min")
def test_criterion_10_trend(tmp_path):
    start = time.perf_counter()
    cfg = ExperimentConfig(seed=0, samples=2000, sizes=(50, 100, 200, 400), p=0.15, k=2, output=str(tmp_path / "t.csv"))
    rep = run_main_experiment(cfg)
    elapsed = time.perf_counter() - start
    print(rep.to_csv())
    assert [r.samples for r in rep.rows] == [2000] * 4
    assert rep.trend_violations() == []
    assert elapsed < 600


if __name__ == "__main__":
    import sys
    import tempfile
    from pathlib import Path

    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn(Path(tempfile.mkdtemp())) if name.endswith("trend") else fn()
            except BaseException:
                pass
    print("\n".join(report_lines()))
    sys.exit(0 if all(v[0] == "PASS" for v in RESULTS.values()) else 1)
