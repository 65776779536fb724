"""Regular tree grammars: parsing, brute-force language enumeration, derivation
counting, reachability and strong connectivity."""

from __future__ import annotations

import itertools
import re
from collections import defaultdict
from collections.abc import Iterable, Iterator, Mapping, Sequence
from dataclasses import dataclass

from .trees import (
    HOLE_TREE,
    RankedAlphabet,
    Tree,
    LiteralSyntaxError,
    fill,
    parse_tree,
    preorder,
    to_literal,
)


class GrammarError(ValueError):
    pass


class GrammarSyntaxError(GrammarError):
    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class RankMismatchError(GrammarError):
    def __init__(self, symbol: str, expected: int, got: int):
        self.symbol = symbol
        super().__init__(f"symbol {symbol!r} has rank {expected} but is used with {got} children")


class EnumerationBudgetError(RuntimeError):
    pass


class EmptyLanguageError(GrammarError):
    pass


@dataclass(frozen=True, order=True)
class Rule:
    lhs: str
    rhs: Tree

    def __str__(self) -> str:
        return f"{self.lhs} -> {to_literal(self.rhs)}"


@dataclass(frozen=True)
class ContextType:
    """N1..Nk => N: the k-contexts C with N ->* C[N1..Nk]."""

    args: tuple[str, ...]
    result: str

    def __str__(self) -> str:
        return f"{','.join(self.args)}=>{self.result}"


def _rule_key(r: Rule) -> tuple[str, str]:
    return (r.lhs, to_literal(r.rhs))


class Grammar:
    """A regular tree grammar over a ranked alphabet.

    Rules are deduplicated and kept in lexicographic order so that every
    derived computation is deterministic.
    """

    def __init__(self, terminals: Mapping[str, int], rules: Iterable[Rule]):
        self.alphabet = terminals if isinstance(terminals, RankedAlphabet) else RankedAlphabet(terminals)
        uniq = {_rule_key(r): r for r in rules}
        self.rules: tuple[Rule, ...] = tuple(uniq[k] for k in sorted(uniq))
        self.nonterminals: tuple[str, ...] = tuple(sorted({r.lhs for r in self.rules}))
        nts = set(self.nonterminals)
        for nt in nts:
            if nt in self.alphabet:
                raise GrammarError(f"{nt!r} is both a terminal and a nonterminal")
        by_lhs: dict[str, list[Rule]] = defaultdict(list)
        for r in self.rules:
            for node in preorder(r.rhs):
                if node.is_hole:
                    raise GrammarError(f"rule {r} contains a hole")
                if node.label in self.alphabet:
                    if self.alphabet[node.label] != len(node.children):
                        raise RankMismatchError(node.label, self.alphabet[node.label], len(node.children))
                elif node.label in nts:
                    if node.children:
                        raise GrammarError(f"nonterminal {node.label!r} used with children in {r}")
                else:
                    raise GrammarError(f"undeclared symbol {node.label!r} in rule {r}")
            by_lhs[r.lhs].append(r)
        self.rules_by_lhs: dict[str, tuple[Rule, ...]] = {n: tuple(by_lhs[n]) for n in self.nonterminals}
        self._nts = nts

    @property
    def terminals(self) -> RankedAlphabet:
        return self.alphabet

    def is_nonterminal(self, label: str) -> bool:
        return label in self._nts

    def nonterminal_leaves(self, t: Tree) -> list[str]:
        return [n.label for n in preorder(t) if n.label in self._nts]

    def rhs_terminal_size(self, t: Tree) -> int:
        return sum(1 for n in preorder(t) if n.label not in self._nts)

    def is_unit(self, r: Rule) -> bool:
        return r.rhs.label in self._nts

    def is_canonical(self) -> bool:
        return all(
            r.rhs.label in self.alphabet and all(c.label in self._nts for c in r.rhs.children)
            for r in self.rules
        )

    def is_semi_canonical(self) -> bool:
        return all(
            self.is_unit(r) or all(c.label in self._nts for c in r.rhs.children) for r in self.rules
        )

    def with_rules(self, rules: Iterable[Rule]) -> Grammar:
        return Grammar(self.alphabet, rules)

    def to_text(self) -> str:
        lines = [f"terminal {a} {self.alphabet[a]}" for a in self.alphabet]
        lines += [f"rule {r}" for r in self.rules]
        return "\n".join(lines) + "\n"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Grammar):
            return NotImplemented
        return dict(self.alphabet) == dict(other.alphabet) and self.rules == other.rules

    def __hash__(self) -> int:
        return hash(self.rules)

    def __repr__(self) -> str:
        return f"Grammar({len(self.nonterminals)} nonterminals, {len(self.rules)} rules)"


# ---------------------------------------------------------------------------
# text format

_TERMINAL = re.compile(r"terminal\s+(\S+)\s+(\S+)\s*$")
_RULE = re.compile(r"rule\s+(\S+)\s*->\s*(.*?)\s*$")
_NAME = re.compile(r"[A-Za-z][A-Za-z0-9_$]*(?:\{[^{}]*\})?$")


def parse_grammar(text: str) -> Grammar:
    """Parse the line-oriented grammar format.

    ``terminal <name> <rank>`` declares a terminal, ``rule <NT> -> <literal>``
    adds a rule; every other rhs identifier is a nonterminal and must own a rule.
    """
    terminals: dict[str, int] = {}
    raw_rules: list[tuple[str, Tree, int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0]
        stripped = line.strip()
        if not stripped:
            continue
        indent = len(line) - len(line.lstrip()) + 1
        if stripped.startswith("terminal"):
            m = _TERMINAL.match(stripped)
            if not m:
                raise GrammarSyntaxError("expected 'terminal <name> <rank>'", lineno, indent)
            name, rank = m.group(1), m.group(2)
            if not _NAME.match(name):
                raise GrammarSyntaxError(f"bad terminal name {name!r}", lineno, indent + m.start(1))
            if not rank.isdigit():
                raise GrammarSyntaxError(f"bad rank {rank!r}", lineno, indent + m.start(2))
            if name in terminals and terminals[name] != int(rank):
                raise RankMismatchError(name, terminals[name], int(rank))
            terminals[name] = int(rank)
        elif stripped.startswith("rule"):
            m = _RULE.match(stripped)
            if not m:
                raise GrammarSyntaxError("expected 'rule <NT> -> <tree>'", lineno, indent)
            lhs, body = m.group(1), m.group(2)
            if not _NAME.match(lhs):
                raise GrammarSyntaxError(f"bad nonterminal name {lhs!r}", lineno, indent + m.start(1))
            try:
                rhs = parse_tree(body)
            except LiteralSyntaxError as exc:
                raise GrammarSyntaxError(str(exc), lineno, indent + m.start(2) + exc.pos) from None
            raw_rules.append((lhs, rhs, lineno, indent + m.start(2)))
        else:
            raise GrammarSyntaxError(f"unknown directive {stripped.split()[0]!r}", lineno, indent)
    if not terminals:
        raise GrammarError("no terminals declared")
    lhs_names = {lhs for lhs, *_ in raw_rules}
    for lhs, rhs, lineno, col in raw_rules:
        if lhs in terminals:
            raise GrammarSyntaxError(f"{lhs!r} is a terminal and cannot be a rule head", lineno, col)
        for node in preorder(rhs):
            if node.is_hole:
                raise GrammarSyntaxError("holes are not allowed in rules", lineno, col)
            if node.label in terminals:
                if terminals[node.label] != len(node.children):
                    raise RankMismatchError(node.label, terminals[node.label], len(node.children))
            elif node.children:
                raise GrammarSyntaxError(f"undeclared terminal {node.label!r}", lineno, col)
            elif node.label not in lhs_names:
                raise GrammarSyntaxError(f"undeclared symbol {node.label!r}", lineno, col)
    return Grammar(terminals, [Rule(lhs, rhs) for lhs, rhs, *_ in raw_rules])


def load_grammar(path: str) -> Grammar:
    with open(path, encoding="utf-8") as fh:
        return parse_grammar(fh.read())


# ---------------------------------------------------------------------------
# brute-force enumeration of sentential forms

def _split(total: int, k: int, minimum: int) -> Iterator[tuple[int, ...]]:
    if k == 0:
        if total == 0:
            yield ()
        return
    if k == 1:
        if total >= minimum:
            yield (total,)
        return
    for first in range(minimum, total - minimum * (k - 1) + 1):
        for rest in _split(total - first, k - 1, minimum):
            yield (first,) + rest


class _Budget:
    def __init__(self, limit: int):
        self.limit = limit
        self.used = 0

    def spend(self, k: int = 1) -> None:
        self.used += k
        if self.used > self.limit:
            raise EnumerationBudgetError(f"enumeration budget of {self.limit} exceeded")


def _rhs_context(g: Grammar, rhs: Tree) -> tuple[Tree, list[str]]:
    leaves = g.nonterminal_leaves(rhs)
    nts = g._nts

    def go(node: Tree) -> Tree:
        if node.label in nts:
            return HOLE_TREE
        return Tree(node.label, [go(c) for c in node.children])

    return go(rhs), leaves


def language_table(g: Grammar, n: int, budget: int = 2_000_000) -> dict[str, list[set[Tree]]]:
    """L_s(G, N) for every nonterminal and every 0 <= s <= n, by brute force."""
    spend = _Budget(budget)
    shapes = [(r, *_rhs_context(g, r.rhs)) for r in g.rules]
    table: dict[str, list[set[Tree]]] = {N: [set()] for N in g.nonterminals}
    for s in range(1, n + 1):
        level = {N: set() for N in g.nonterminals}
        for r, ctx, leaves in shapes:
            if g.is_unit(r):
                continue
            rest = s - ctx.size
            for sizes in _split(rest, len(leaves), 1):
                pools = [table[L][k] for L, k in zip(leaves, sizes)]
                if any(not p for p in pools):
                    continue
                for combo in itertools.product(*pools):
                    level[r.lhs].add(fill(ctx, combo))
                    spend.spend()
        _close_units(g, level)
        for N in g.nonterminals:
            table[N].append(level[N])
    return table


def _close_units(g: Grammar, level: dict[str, set]) -> None:
    units = [(r.lhs, r.rhs.label) for r in g.rules if g.is_unit(r)]
    changed = True
    while changed and units:
        changed = False
        for lhs, target in units:
            before = len(level[lhs])
            level[lhs] |= level[target]
            changed |= len(level[lhs]) != before


def enumerate_trees(g: Grammar, n0: str, n: int, budget: int = 2_000_000) -> set[Tree]:
    """Exactly L_n(G, n0), computed by exhaustive derivation."""
    if n0 not in g.rules_by_lhs:
        raise GrammarError(f"unknown nonterminal {n0!r}")
    if n <= 0:
        return set()
    return set(language_table(g, n, budget)[n0][n])


def context_form_table(
    g: Grammar, n: int, max_holes: int, budget: int = 2_000_000
) -> dict[str, list[set[tuple[Tree, tuple[str, ...]]]]]:
    """Pairs (C, (N1..Nk)) with N ->* C[N1..Nk], |C| = s, k <= max_holes."""
    spend = _Budget(budget)
    shapes = [(r, *_rhs_context(g, r.rhs)) for r in g.rules]
    table: dict[str, list[set]] = {N: [] for N in g.nonterminals}
    for s in range(0, n + 1):
        level: dict[str, set] = {N: set() for N in g.nonterminals}
        if max_holes >= 1 and s == 0:
            for N in g.nonterminals:
                level[N].add((HOLE_TREE, (N,)))
        for r, ctx, leaves in shapes:
            if g.is_unit(r):
                continue
            rest = s - ctx.size
            if rest < 0:
                continue
            for sizes in _split(rest, len(leaves), 0):
                pools = [table[L][k] for L, k in zip(leaves, sizes)]
                if any(not p for p in pools):
                    continue
                for combo in itertools.product(*pools):
                    holes = sum(len(hs) for _, hs in combo)
                    if holes > max_holes:
                        continue
                    filled = fill(ctx, [c for c, _ in combo])
                    level[r.lhs].add((filled, tuple(itertools.chain.from_iterable(hs for _, hs in combo))))
                    spend.spend()
        _close_units(g, level)
        for N in g.nonterminals:
            table[N].append(level[N])
    return table


def enumerate_contexts(g: Grammar, kappa: ContextType, n: int, budget: int = 2_000_000) -> set[Tree]:
    """Exactly L_n(G, kappa), the k-contexts of size n of type kappa."""
    if kappa.result not in g.rules_by_lhs:
        raise GrammarError(f"unknown nonterminal {kappa.result!r}")
    if n < 0:
        return set()
    table = context_form_table(g, n, len(kappa.args), budget)
    return {c for c, hs in table[kappa.result][n] if hs == kappa.args}


# ---------------------------------------------------------------------------
# derivation counting

def _bind(g: Grammar, pattern: Tree, node: Tree) -> list[tuple[str, Tree]] | None:
    out: list[tuple[str, Tree]] = []
    stack = [(pattern, node)]
    while stack:
        p, t = stack.pop()
        if p.label in g._nts:
            out.append((p.label, t))
            continue
        if p.label != t.label or len(p.children) != len(t.children):
            return None
        stack.extend(zip(p.children, t.children))
    return out


def count_derivations(
    g: Grammar, n0: str, t: Tree, cap: int = 2, hole_args: Sequence[str] = ()
) -> int:
    """Number of leftmost derivations n0 ->* t[hole_args], saturating at `cap`.

    Leftmost derivations correspond one-to-one with derivation trees, so the
    count is computed bottom-up over the subtrees of `t`.
    """
    if t.holes != len(hole_args):
        raise GrammarError(f"{t.holes} holes but {len(hole_args)} hole types")
    # Give each hole a distinct marker leaf so equal-looking holes stay apart.
    markers: list[Tree] = [Tree(f"\x00{i}") for i in range(len(hole_args))]
    subject = fill(t, markers) if markers else t
    marker_nt = {m.label: nt for m, nt in zip(markers, hole_args)}

    rules = [r for r in g.rules if not g.is_unit(r)]
    units = [(r.lhs, r.rhs.label) for r in g.rules if g.is_unit(r)]
    memo: dict[Tree, dict[str, int]] = {}

    order: list[Tree] = []
    seen: set[Tree] = set()
    stack: list[tuple[Tree, bool]] = [(subject, False)]
    while stack:
        node, done = stack.pop()
        if done:
            if node not in seen:
                seen.add(node)
                order.append(node)
            continue
        if node in seen:
            continue
        stack.append((node, True))
        stack.extend((c, False) for c in node.children)

    for node in order:
        counts: dict[str, int] = defaultdict(int)
        if node.label in marker_nt:
            counts[marker_nt[node.label]] = 1
        else:
            for r in rules:
                if r.rhs.label != node.label:
                    continue
                binding = _bind(g, r.rhs, node)
                if binding is None:
                    continue
                prod = 1
                for nt, sub in binding:
                    if sub is node:
                        prod = 0
                        break
                    prod *= memo[sub].get(nt, 0)
                    if prod == 0:
                        break
                if prod:
                    counts[r.lhs] = min(cap, counts[r.lhs] + prod)
        if units:
            base = dict(counts)
            current = dict(counts)
            for _ in range((cap + 1) * (len(g.nonterminals) + 1)):
                nxt = dict(base)
                for lhs, target in units:
                    v = current.get(target, 0)
                    if v:
                        nxt[lhs] = min(cap, nxt.get(lhs, 0) + v)
                if nxt == current:
                    break
                current = nxt
            counts = current
        memo[node] = dict(counts)
    return min(cap, memo[subject].get(n0, 0))


def count_leftmost_derivations(g: Grammar, n0: str, t: Tree, cap: int = 2) -> int:
    return count_derivations(g, n0, t, cap)


def derives(g: Grammar, n0: str, c: Tree, hole_args: Sequence[str] = ()) -> bool:
    """Whether n0 ->* c[hole_args]."""
    return count_derivations(g, n0, c, 1, hole_args) >= 1


def unambiguous_up_to(g: Grammar, n: int, budget: int = 2_000_000) -> bool:
    """Bounded unambiguity check: every tree of size <= n has one derivation."""
    table = language_table(g, n, budget)
    for N in g.nonterminals:
        for s in range(1, n + 1):
            for t in table[N][s]:
                if count_derivations(g, N, t, 2) != 1:
                    return False
    return True


# ---------------------------------------------------------------------------
# emptiness, reachability, connectivity

def productive_nonterminals(g: Grammar) -> set[str]:
    productive: set[str] = set()
    changed = True
    while changed:
        changed = False
        for r in g.rules:
            if r.lhs in productive:
                continue
            if all(L in productive for L in g.nonterminal_leaves(r.rhs)):
                productive.add(r.lhs)
                changed = True
    return productive


def _require_pruned(g: Grammar) -> None:
    empty = set(g.nonterminals) - productive_nonterminals(g)
    if empty:
        raise GrammarError(
            f"nonterminals with empty language must be pruned first: {sorted(empty)}"
        )


def occurrence_graph(g: Grammar) -> dict[str, set[str]]:
    edges: dict[str, set[str]] = {N: set() for N in g.nonterminals}
    for r in g.rules:
        edges[r.lhs].update(g.nonterminal_leaves(r.rhs))
    return edges


def _closure(edges: Mapping[str, set[str]], start: str) -> set[str]:
    seen = {start}
    stack = [start]
    while stack:
        u = stack.pop()
        for v in edges[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return seen


def reachability(g: Grammar) -> dict[str, set[str]]:
    """For each N, the set of N' with L(G, N' => N) non-empty (pruned grammars)."""
    _require_pruned(g)
    edges = occurrence_graph(g)
    return {N: _closure(edges, N) for N in g.nonterminals}


def reachable(g: Grammar, frm: str, to: str) -> bool:
    """Whether some 1-context S has frm ->* S[to]."""
    _require_pruned(g)
    for N in (frm, to):
        if N not in g.rules_by_lhs:
            raise GrammarError(f"unknown nonterminal {N!r}")
    return to in _closure(occurrence_graph(g), frm)


def infinite_nonterminals(g: Grammar) -> set[str]:
    """N^inf: the nonterminals with an infinite language."""
    _require_pruned(g)
    reach = {N: _closure(occurrence_graph(g), N) for N in g.nonterminals}
    pumping: set[str] = set()
    for r in g.rules:
        if g.is_unit(r):
            continue
        for L in g.nonterminal_leaves(r.rhs):
            if r.lhs in reach[L]:
                pumping.add(r.lhs)
    return {N for N in g.nonterminals if reach[N] & pumping}


def is_strongly_connected(g: Grammar) -> bool:
    reach = reachability(g)
    everything = set(g.nonterminals)
    return all(reach[N] >= everything for N in g.nonterminals)


def is_essentially_strongly_connected(g: Grammar) -> bool:
    reach = reachability(g)
    inf = infinite_nonterminals(g)
    return all(reach[N] >= inf for N in inf)
