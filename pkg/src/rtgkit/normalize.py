"""Grammar normalization: pruning, semi-canonical splitting, unit-rule closure
into canonical form, and removal of finite-language nonterminals."""

from __future__ import annotations

import itertools
from collections.abc import Iterable
from dataclasses import dataclass, field

from .rtg import (
    ContextType,
    productive_nonterminals,
    EmptyLanguageError,
    EnumerationBudgetError,
    Grammar,
    GrammarError,
    Rule,
    _closure,
    context_form_table,
    infinite_nonterminals,
    language_table,
)
from .trees import Tree, fill, HOLE_TREE


class RuleBudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class CanonicalizationResult:
    grammar: Grammar
    name_map: dict[str, frozenset[str]]
    notes: tuple[str, ...] = field(default=())

    def q(self, nonterminal: str) -> frozenset[str]:
        return self.name_map[nonterminal]


def prune_empty(g: Grammar) -> Grammar:
    """Drop nonterminals with empty language and every rule mentioning them."""
    keep = productive_nonterminals(g)
    if not keep:
        raise EmptyLanguageError("every nonterminal has an empty language")
    rules = [
        r for r in g.rules if r.lhs in keep and all(L in keep for L in g.nonterminal_leaves(r.rhs))
    ]
    return g.with_rules(rules)


def _base_name(nt: str) -> str:
    return nt.split("$", 1)[0]


class _Fresh:
    def __init__(self, taken: Iterable[str]):
        self.taken = set(taken)
        self.counter = 0

    def __call__(self, orig: str) -> str:
        while True:
            self.counter += 1
            name = f"{_base_name(orig)}${self.counter}"
            if name not in self.taken:
                self.taken.add(name)
                return name


def rule_measure(g: Grammar, r: Rule) -> int:
    """max(|C| - 1, 0) for a rule N -> C[N1..Nk]."""
    return max(g.rhs_terminal_size(r.rhs) - 1, 0)


def grammar_measure(g: Grammar) -> int:
    return sum(rule_measure(g, r) for r in g.rules)


def to_semi_canonical(g: Grammar, trace: list[int] | None = None) -> Grammar:
    """Split rules N -> a(..T..) whose argument T is not a nonterminal.

    Each step moves one non-nonterminal argument into a fresh rule
    ``<orig>$k -> T``.  When `trace` is given, the grammar measure after every
    step is appended to it.
    """
    fresh = _Fresh(set(g.nonterminals) | set(g.alphabet))
    pending = list(g.rules)
    done: list[Rule] = []
    names = set(g.nonterminals)
    measure = grammar_measure(g)
    if trace is not None:
        trace.append(measure)
    while pending:
        r = pending.pop(0)
        if r.rhs.label in names:
            done.append(r)
            continue
        kids = list(r.rhs.children)
        idx = next((i for i, c in enumerate(kids) if c.label not in names), None)
        if idx is None:
            done.append(r)
            continue
        new = fresh(r.lhs)
        names.add(new)
        split_off = Rule(new, kids[idx])
        kids[idx] = Tree(new)
        pending.insert(0, split_off)
        pending.insert(0, Rule(r.lhs, Tree(r.rhs.label, kids)))
        measure -= 1
        if trace is not None:
            trace.append(measure)
    return g.with_rules(done)


def unit_closure(g: Grammar) -> dict[str, set[str]]:
    """N -> {N' | N ->* N' using unit rules only} (reflexive)."""
    edges: dict[str, set[str]] = {N: set() for N in g.nonterminals}
    for r in g.rules:
        if g.is_unit(r):
            edges[r.lhs].add(r.rhs.label)
    return {N: _closure(edges, N) for N in g.nonterminals}


def to_canonical(g: Grammar, rule_budget: int = 200_000) -> CanonicalizationResult:
    """Eliminate unit rules of a semi-canonical grammar.

    Kept nonterminals are those owning a non-unit rule; N0 -> a(N1'..Nk') is
    added whenever N0 -> a(N1..Nk) and Ni ->* Ni' by unit rules.
    """
    if not g.is_semi_canonical():
        raise GrammarError("to_canonical expects a semi-canonical grammar")
    closure = unit_closure(g)
    kept = {r.lhs for r in g.rules if not g.is_unit(r)}
    rules: list[Rule] = []
    for r in g.rules:
        if g.is_unit(r):
            continue
        options = [sorted(closure[c.label] & kept) for c in r.rhs.children]
        total = 1
        for o in options:
            total *= len(o)
        if len(rules) + total > rule_budget:
            raise RuleBudgetError(f"unit closure exceeds the rule budget of {rule_budget}")
        for combo in itertools.product(*options):
            rules.append(Rule(r.lhs, Tree(r.rhs.label, [Tree(n) for n in combo])))
    if not rules:
        raise EmptyLanguageError("no canonical rules remain")
    out = g.with_rules(rules)
    name_map = {N: frozenset(closure[N] & set(out.nonterminals)) for N in g.nonterminals}
    return CanonicalizationResult(out, name_map)


def finite_languages(g: Grammar, names: Iterable[str], budget: int = 100_000) -> dict[str, list[Tree]]:
    """Languages of finite-language nonterminals, by enumeration up to their bound."""
    names = list(names)
    if not names:
        return {}
    sub = g.with_rules([r for r in g.rules if r.lhs in set(names)])
    # Largest tree size per nonterminal; the rule graph below finite-language
    # nonterminals is acyclic apart from unit rules, so this settles.
    biggest = {N: 0 for N in sub.nonterminals}
    for _ in range(len(biggest) + 1):
        for r in sub.rules:
            s = sub.rhs_terminal_size(r.rhs) + sum(biggest[L] for L in sub.nonterminal_leaves(r.rhs))
            biggest[r.lhs] = max(biggest[r.lhs], s)
    bound = max(biggest.values())
    try:
        table = language_table(sub, bound, budget)
    except EnumerationBudgetError as exc:
        raise EnumerationBudgetError(f"finite-language expansion exceeds budget: {exc}") from None
    return {N: sorted(set().union(*table[N])) for N in names}


def eliminate_inessential(g: Grammar, budget: int = 100_000) -> Grammar:
    """Inline every finite-language nonterminal by cartesian expansion."""
    g = prune_empty(g)
    inf = infinite_nonterminals(g)
    if not inf:
        raise EmptyLanguageError("no nonterminal has an infinite language")
    finite = [N for N in g.nonterminals if N not in inf]
    if not finite:
        return g
    langs = finite_languages(g, finite, budget)
    rules: list[Rule] = []
    for r in g.rules:
        if r.lhs not in inf:
            continue
        slots = g.nonterminal_leaves(r.rhs)
        options = [langs[L] if L in langs else [Tree(L)] for L in slots]
        ctx = _cut(g, r.rhs)
        for combo in itertools.product(*options):
            rules.append(Rule(r.lhs, fill(ctx, combo)))
            if len(rules) > budget:
                raise EnumerationBudgetError("inessential expansion exceeds budget")
    return g.with_rules(rules)


def _cut(g: Grammar, t: Tree) -> Tree:
    if g.is_nonterminal(t.label):
        return HOLE_TREE
    return Tree(t.label, [_cut(g, c) for c in t.children])


def full_pipeline(g: Grammar, rule_budget: int = 200_000) -> CanonicalizationResult:
    """prune_empty, then to_semi_canonical, then to_canonical."""
    pruned = prune_empty(g)
    semi = to_semi_canonical(pruned)
    result = to_canonical(semi, rule_budget)
    name_map = {N: result.name_map[N] for N in g.nonterminals if N in result.name_map}
    for N in g.nonterminals:
        name_map.setdefault(N, frozenset())
    return CanonicalizationResult(result.grammar, name_map)


def check_context_inclusion(g: Grammar, result: CanonicalizationResult, max_size: int) -> list[str]:
    """Bounded check of ctx(G) ⊆ ctx^inf(G') on 1-contexts up to `max_size`.

    Returns human-readable violations (empty when the inclusion holds).
    """
    g2 = result.grammar
    inf2 = infinite_nonterminals(g2)
    src = context_form_table(prune_empty(g), max_size, 1)
    dst = context_form_table(g2, max_size, 1)
    dst_index: set[tuple[Tree, str, str]] = set()
    for outer in g2.nonterminals:
        if outer not in inf2:
            continue
        for s in range(max_size + 1):
            for c, hs in dst[outer][s]:
                if len(hs) == 1 and hs[0] in inf2:
                    dst_index.add((c, hs[0], outer))
    problems: list[str] = []
    for outer in src:
        for s in range(max_size + 1):
            for c, hs in src[outer][s]:
                if len(hs) != 1:
                    continue
                inner = hs[0]
                ok = any(
                    (c, i2, o2) in dst_index
                    for i2 in result.name_map.get(inner, ())
                    for o2 in result.name_map.get(outer, ())
                )
                if not ok:
                    problems.append(f"{c} : {ContextType((inner,), outer)}")
    return problems
