"""Command-line entry points: rtg, decompose, lambda, experiment."""

from __future__ import annotations

import argparse
import json
import sys
from collections.abc import Callable, Sequence

from .counting import build_counts, detect_period, is_aperiodic, stream_rng
from .decomposition import decompose, frame_literal, refine
from .experiments import (
    ExperimentConfig,
    containment_probability,
    monkey_words,
    repeat_pattern,
    run_main_experiment,
    sample_coproduct,
)
from .lam import (
    beta_max_len,
    build_lambda_grammar,
    embed,
    explosive,
    parse_term,
    parse_type,
    rename_canonical,
    restrict_reachable,
    term_str,
    type_str,
    typecheck,
)
from .normalize import full_pipeline
from .rtg import (
    Grammar,
    GrammarError,
    is_essentially_strongly_connected,
    load_grammar,
    unambiguous_up_to,
)
from .trees import TreeError, parse_tree, to_literal

_ERRORS = (GrammarError, TreeError, ValueError, RuntimeError, TypeError, IndexError, OSError)


def _sizes(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None


def _run(parser: argparse.ArgumentParser, argv: Sequence[str] | None) -> int:
    args = parser.parse_args(argv)
    try:
        return args.func(args) or 0
    except _ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _canonical(g: Grammar, N: str) -> tuple[Grammar, list[str]]:
    """A canonical grammar and the nonterminals whose languages partition L(N)."""
    if g.is_canonical():
        if N not in g.nonterminals:
            raise GrammarError(f"unknown nonterminal {N!r}")
        return g, [N]
    res = full_pipeline(g)
    if N not in res.name_map:
        raise GrammarError(f"unknown nonterminal {N!r}")
    return res.grammar, sorted(res.q(N))


# ---------------------------------------------------------------------------
# rtg

def _rtg_canonicalize(a) -> int:
    g = load_grammar(a.grammar)
    res = full_pipeline(g, rule_budget=a.rule_budget)
    text = res.grammar.to_text()
    if a.output:
        with open(a.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    unamb = unambiguous_up_to(res.grammar, a.check_size)
    conn = is_essentially_strongly_connected(res.grammar)
    status = {
        "unambiguous": f"{'verified' if unamb else 'violated'} up to size {a.check_size}",
        "essentially_strongly_connected": "verified" if conn else "unverified",
    }
    for k, v in status.items():
        print(f"{k}: {v}", file=sys.stderr)
    if a.report:
        report = {"Q": {N: sorted(q) for N, q in res.name_map.items()}, "hypotheses": status}
        with open(a.report, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def _rtg_count(a) -> int:
    g, roots = _canonical(load_grammar(a.grammar), a.N)
    table = build_counts(g, a.n, contexts=False, distinct=a.distinct)
    print(sum(table.count_trees(N, a.n) for N in roots))
    return 0


def _rtg_sample(a) -> int:
    g, roots = _canonical(load_grammar(a.grammar), a.N)
    table = build_counts(g, a.n, contexts=False)
    rng = stream_rng(a.seed, 0)
    for _ in range(a.count):
        _, t = sample_coproduct(table, roots, a.n, rng)
        print(to_literal(t))
    return 0


def _rtg_period(a) -> int:
    g = load_grammar(a.grammar)
    if not g.is_canonical():
        g = full_pipeline(g).grammar
    table = build_counts(g, a.max_size, contexts=True)
    rep = detect_period(g, max_size=a.max_size, table=table)
    verdicts = {N: is_aperiodic(table, N) for N in rep.scope}
    if a.json:
        out = {
            "period": rep.period,
            "residues": {f"{N}=>{N2}": d for (N, N2), d in sorted(rep.residues.items())},
            "n0_observed": rep.n0_estimate,
            "max_size": rep.max_size,
            "aperiodic": {N: {"kind": v.kind, "n0": v.n0} for N, v in verdicts.items()},
        }
        print(json.dumps(out, indent=2, sort_keys=True))
    else:
        print(f"period {rep.period} (observed from size {rep.n0_estimate} up to {rep.max_size})")
        for (N, N2), d in sorted(rep.residues.items()):
            print(f"d[{N},{N2}] = {d}")
        for N, v in verdicts.items():
            print(f"{N}: {v.kind}" + (f" from {v.n0}" if v.n0 is not None else ""))
    return 0


def rtg_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rtg", description="Regular tree grammar tools.")
    sub = p.add_subparsers(dest="cmd", required=True)

    c = sub.add_parser("canonicalize", help="convert to canonical form")
    c.add_argument("grammar")
    c.add_argument("-o", "--output")
    c.add_argument("--report", help="JSON report with Q_N per original nonterminal")
    c.add_argument("--rule-budget", type=int, default=200_000)
    c.add_argument("--check-size", type=int, default=12, help="bound for the unambiguity check")
    c.set_defaults(func=_rtg_canonicalize)

    c = sub.add_parser("count", help="|L_n(N)|")
    c.add_argument("grammar")
    c.add_argument("-N", required=True)
    c.add_argument("-n", type=int, required=True)
    c.add_argument("--distinct", action="store_true", help="count trees, not derivations")
    c.set_defaults(func=_rtg_count)

    c = sub.add_parser("sample", help="uniform samples from L_n(N)")
    c.add_argument("grammar")
    c.add_argument("-N", required=True)
    c.add_argument("-n", type=int, required=True)
    c.add_argument("--count", type=int, default=1)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=_rtg_sample)

    c = sub.add_parser("period", help="basic period and residues")
    c.add_argument("grammar")
    c.add_argument("--max-size", type=int, default=30)
    c.add_argument("--json", action="store_true")
    c.set_defaults(func=_rtg_period)
    return p


def rtg_main(argv: Sequence[str] | None = None) -> int:
    return _run(rtg_parser(), argv)


# ---------------------------------------------------------------------------
# decompose

def _decompose(a) -> int:
    t = parse_tree(a.tree)
    if a.grammar:
        if not a.N:
            raise GrammarError("--grammar needs -N")
        g = load_grammar(a.grammar)
        if not g.is_canonical():
            raise GrammarError("typed decomposition needs a canonical grammar (see rtg canonicalize)")
        d = refine(g, a.N, t, a.m)
    else:
        d = decompose(t, a.m)
    print(frame_literal(d.frame))
    for p in d.parts:
        print(to_literal(p))
    return 0


def decompose_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="decompose", description="Split a tree into a frame and good parts.")
    p.add_argument("--tree", required=True)
    p.add_argument("-m", type=int, required=True)
    p.add_argument("--grammar")
    p.add_argument("-N")
    p.set_defaults(func=_decompose)
    return p


def decompose_main(argv: Sequence[str] | None = None) -> int:
    return _run(decompose_parser(), argv)


# ---------------------------------------------------------------------------
# lambda

def _lambda_grammar(a) -> int:
    lg = build_lambda_grammar(a.d, a.i, a.x)
    if a.reachable:
        lg = restrict_reachable(lg)
    text = lg.grammar.to_text()
    if a.output:
        with open(a.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if a.map:
        out = {
            N: {"env": [[x, type_str(t)] for x, t in env], "type": type_str(ty)}
            for N, (env, ty) in sorted(lg.nt_map.items())
        }
        with open(a.map, "w", encoding="utf-8") as fh:
            json.dump(out, fh, indent=2)
            fh.write("\n")
    return 0


def _env(text: str) -> dict:
    env = {}
    for item in filter(None, (s.strip() for s in text.split(","))):
        name, _, ty = item.partition(":")
        if not ty:
            raise ValueError(f"bad binding {item!r}, expected name:type")
        env[name.strip()] = parse_type(ty)
    return env


def _lambda_beta(a) -> int:
    t = parse_term(a.term)
    typecheck(t, _env(a.env))  # typable terms normalize, so the search terminates
    r = beta_max_len(t, budget=a.budget)
    print(f"beta {'=' if r.exact else '>='} {r.length}")
    return 0


def _lambda_explosive(a) -> int:
    t = explosive(a.m, a.k)
    print(term_str(t) if a.emit == "term" else to_literal(rename_canonical(t)))
    return 0


def _lambda_sample(a) -> int:
    lg = restrict_reachable(build_lambda_grammar(a.d, a.i, a.x))
    table = build_counts(lg.grammar, a.n, contexts=False)
    rng = stream_rng(a.seed, 0)
    roots = lg.closed_nonterminals()
    for _ in range(a.count):
        _, t = sample_coproduct(table, roots, a.n, rng)
        print(f"{to_literal(t)}\t{term_str(embed(t))}")
    return 0


def lambda_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lambda", description="Bounded simply-typed λ-terms.")
    sub = p.add_subparsers(dest="cmd", required=True)

    def bounds(c):
        c.add_argument("-d", type=int, required=True, help="order bound")
        c.add_argument("-i", type=int, required=True, help="internal arity bound")
        c.add_argument("-x", type=int, required=True, help="variable bound")

    c = sub.add_parser("grammar", help="emit G(d,i,x)")
    bounds(c)
    c.add_argument("-o", "--output")
    c.add_argument("--map", help="JSON map from nonterminal to environment and type")
    c.add_argument("--reachable", action="store_true", help="keep only the part reachable from closed types")
    c.set_defaults(func=_lambda_grammar)

    c = sub.add_parser("beta", help="longest β-reduction length")
    c.add_argument("--term", required=True)
    c.add_argument("--budget", type=int, default=10**6)
    c.add_argument("--env", default="", help="types of free variables, e.g. 'y:o,f:o->o'")
    c.set_defaults(func=_lambda_beta)

    c = sub.add_parser("explosive", help="print Expl_m^k")
    c.add_argument("-m", type=int, required=True)
    c.add_argument("-k", type=int, required=True)
    c.add_argument("--emit", choices=("term", "tree"), default="term")
    c.set_defaults(func=_lambda_explosive)

    c = sub.add_parser("sample", help="uniform closed terms of size n")
    bounds(c)
    c.add_argument("-n", type=int, required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--count", type=int, default=1)
    c.set_defaults(func=_lambda_sample)
    return p


def lambda_main(argv: Sequence[str] | None = None) -> int:
    return _run(lambda_parser(), argv)


# ---------------------------------------------------------------------------
# experiment

def _emit(csv_text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(csv_text)
    else:
        sys.stdout.write(csv_text)


def _exp_words(a) -> int:
    rep = monkey_words(a.alphabet, repeat_pattern(a.unit), a.sizes, a.samples, a.seed, a.p, a.workers)
    _emit(rep.to_csv(), a.csv)
    return 0


def _exp_containment(a) -> int:
    g, roots = _canonical(load_grammar(a.grammar), a.N)
    if len(roots) != 1:
        raise GrammarError(f"{a.N} splits into {len(roots)} canonical nonterminals; pass a canonical grammar")
    table = build_counts(g, a.n, contexts=False)
    res = containment_probability(
        table, roots[0], a.n, parse_tree(a.pattern), a.samples, a.seed,
        exact=a.exact, exact_bound=a.exact_bound, workers=a.workers,
    )
    print(f"{res.contains}/{res.samples} = {res.frequency:.6f}" + (" (exact)" if res.exact else ""))
    return 0


def _exp_main(a) -> int:
    cfg = ExperimentConfig(
        seed=a.seed, samples=a.samples, sizes=a.sizes, p=a.p, k=a.k,
        bounds=(a.d, a.i, a.x), output=a.csv, workers=a.workers,
    )
    rep = run_main_experiment(cfg)
    if not a.csv:
        sys.stdout.write(rep.to_csv())
    bad = rep.trend_violations()
    if bad:
        print(f"trend: decreasing beyond the 95% band at {bad}", file=sys.stderr)
    return 0


def experiment_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="experiment", description="Monte-Carlo containment experiments.")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(c, sizes: str | None = None):
        c.add_argument("--samples", type=int, default=2000)
        c.add_argument("--seed", type=int, default=0)
        c.add_argument("--workers", type=int, default=1)
        if sizes is not None:
            c.add_argument("--sizes", type=_sizes, default=_sizes(sizes))
            c.add_argument("--csv")

    c = sub.add_parser("words", help="factor frequency in uniform words")
    c.add_argument("--alphabet", default="ab")
    c.add_argument("--unit", default="ab", help="pattern(m) repeats this word floor(m/|unit|) times")
    c.add_argument("-p", type=float, default=1.0)
    common(c, "64,128,256,512")
    c.set_defaults(func=_exp_words)

    c = sub.add_parser("containment", help="subcontext frequency in L_n(N)")
    c.add_argument("--grammar", required=True)
    c.add_argument("-N", required=True)
    c.add_argument("-n", type=int, required=True)
    c.add_argument("--pattern", required=True)
    c.add_argument("--exact", action="store_true")
    c.add_argument("--exact-bound", type=int, default=100_000)
    common(c)
    c.set_defaults(func=_exp_containment)

    c = sub.add_parser("main", help="explosive-pattern trend in closed λ-terms")
    c.add_argument("-d", type=int, default=2)
    c.add_argument("-i", type=int, default=2)
    c.add_argument("-x", type=int, default=2)
    c.add_argument("-k", type=int, default=2)
    c.add_argument("-p", type=float, default=0.15)
    common(c, "50,100,200,400")
    c.set_defaults(func=_exp_main)
    return p


def experiment_main(argv: Sequence[str] | None = None) -> int:
    return _run(experiment_parser(), argv)


def _entry(fn: Callable[[Sequence[str] | None], int]) -> Callable[[], None]:
    def run() -> None:
        sys.exit(fn(None))

    return run


rtg = _entry(rtg_main)
decompose_cli = _entry(decompose_main)
lambda_cli = _entry(lambda_main)
experiment = _entry(experiment_main)
