"""Exact size-indexed counting of trees and 1-contexts, uniform sampling,
period detection and aperiodicity checks for canonical grammars."""

from __future__ import annotations

import math
import random
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from operator import mul

from .rtg import Grammar, GrammarError, infinite_nonterminals
from .trees import Tree

MASK64 = (1 << 64) - 1


class EmptySliceError(ValueError):
    pass


class InsufficientDataError(ValueError):
    pass


class PeriodValidationError(AssertionError):
    pass


# ---------------------------------------------------------------------------
# random streams

RNG_FAMILY = "mt19937"  # must match [tool.rtgkit] rng_family in pyproject.toml


def splitmix64(x: int) -> int:
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def stream_rng(seed: int, stream: int) -> random.Random:
    """Generator for stream `stream`: Mersenne Twister seeded with seed XOR splitmix64(stream)."""
    return random.Random((seed & MASK64) ^ splitmix64(stream))


# ---------------------------------------------------------------------------
# convolution helpers

def _dot(a: Sequence[int], b: Sequence[int], s: int) -> int:
    """sum_{t=1}^{s-1} a[t] * b[s-t]; both sequences vanish at index 0."""
    if s < 2:
        return 0
    return sum(map(mul, a[1:s], b[s - 1 : 0 : -1]))


def _conv_at(seqs: Sequence[Sequence[int]], s: int) -> int:
    """Coefficient s of the product of the given sequences (index 0 allowed)."""
    if len(seqs) == 1:
        return seqs[0][s] if 0 <= s < len(seqs[0]) else 0
    head, rest = seqs[0], seqs[1:]
    total = 0
    for t in range(0, s + 1):
        if head[t]:
            total += head[t] * _conv_at(rest, s - t)
    return total


# ---------------------------------------------------------------------------
# count tables

@dataclass(frozen=True)
class CountTable:
    """Counts of trees and 1-contexts by size, for one canonical grammar.

    ``ctx_counts[(outer, inner)][n]`` counts the 1-contexts S of size n with
    outer ->* S[inner].  With ``distinct=False`` the numbers count derivations,
    which equal tree counts exactly when the grammar is unambiguous.
    """

    grammar: Grammar
    max_size: int
    tree_counts: dict[str, tuple[int, ...]]
    ctx_counts: dict[tuple[str, str], tuple[int, ...]] | None
    distinct: bool
    rule_weights: tuple[tuple[int, ...], ...] = field(repr=False, default=())
    rule_suffixes: tuple[tuple[tuple[int, ...], ...], ...] = field(repr=False, default=())
    _plan: dict = field(init=False, repr=False, compare=False, default_factory=dict)

    def sampling_plan(self) -> tuple[dict[str, list[int]], list[tuple[str, tuple[str, ...]]]]:
        """Rule indices per nonterminal and (label, children) per rule, built once."""
        if not self._plan:
            rules = self.grammar.rules
            index = {r: i for i, r in enumerate(rules)}
            self._plan["by_lhs"] = {
                M: [index[r] for r in self.grammar.rules_by_lhs[M]] for M in self.grammar.nonterminals
            }
            self._plan["shapes"] = [(r.rhs.label, tuple(c.label for c in r.rhs.children)) for r in rules]
        return self._plan["by_lhs"], self._plan["shapes"]

    def count_trees(self, N: str, n: int) -> int:
        if n > self.max_size:
            raise IndexError(f"size {n} beyond table bound {self.max_size}")
        if N not in self.tree_counts:
            raise GrammarError(f"unknown nonterminal {N!r}")
        return self.tree_counts[N][n] if n >= 0 else 0

    def count_contexts(self, outer: str, inner: str, n: int) -> int:
        if self.ctx_counts is None:
            raise ValueError("context counts were not built")
        if n > self.max_size:
            raise IndexError(f"size {n} beyond table bound {self.max_size}")
        return self.ctx_counts[(outer, inner)][n] if n >= 0 else 0


def _require_canonical(g: Grammar) -> None:
    if not g.is_canonical():
        raise GrammarError("counting requires a canonical grammar (rules N -> a(N1..Nk))")


def build_counts(g: Grammar, max_size: int, contexts: bool = True, distinct: bool = False) -> CountTable:
    """Build the count table up to `max_size`.

    The default DP sums, for every rule N -> a(N1..Nk), the convolution of the
    children's counts.  `distinct=True` instead runs the subset construction of
    the bottom-up automaton so that each tree is counted once even in an
    ambiguous grammar; it is exponential in the worst case.
    """
    _require_canonical(g)
    if max_size < 0:
        raise ValueError("max_size must be non-negative")
    if distinct:
        trees, ctx = _distinct_counts(g, max_size, contexts)
        return CountTable(g, max_size, trees, ctx, True)
    trees, weights, suffixes = _derivation_counts(g, max_size)
    ctx = _derivation_context_counts(g, max_size, trees) if contexts else None
    return CountTable(g, max_size, trees, ctx, False, weights, suffixes)


def _derivation_counts(g: Grammar, M: int):
    c = {N: [0] * (M + 1) for N in g.nonterminals}
    kids = [tuple(ch.label for ch in r.rhs.children) for r in g.rules]
    lhs = [r.lhs for r in g.rules]
    weights = [[0] * (M + 1) for _ in g.rules]
    suffixes = [[[0] * (M + 1) for _ in range(max(0, len(k) - 2))] for k in kids]
    for n in range(1, M + 1):
        s = n - 1
        for idx, ch in enumerate(kids):
            k = len(ch)
            if k == 0:
                w = 1 if n == 1 else 0
            elif k == 1:
                w = c[ch[0]][s]
            else:
                nxt = c[ch[-1]]
                for j in range(k - 2, 0, -1):
                    arr = suffixes[idx][j - 1]
                    arr[s] = _dot(c[ch[j]], nxt, s)
                    nxt = arr
                w = _dot(c[ch[0]], nxt, s)
            weights[idx][n] = w
        for idx in range(len(kids)):
            if weights[idx][n]:
                c[lhs[idx]][n] += weights[idx][n]
    return (
        {N: tuple(v) for N, v in c.items()},
        tuple(tuple(w) for w in weights),
        tuple(tuple(tuple(a) for a in sfx) for sfx in suffixes),
    )


def _derivation_context_counts(g: Grammar, M: int, trees: dict[str, tuple[int, ...]]):
    out: dict[tuple[str, str], tuple[int, ...]] = {}
    shapes = [(r.lhs, tuple(ch.label for ch in r.rhs.children)) for r in g.rules]
    for inner in g.nonterminals:
        x = {N: [0] * (M + 1) for N in g.nonterminals}
        x[inner][0] = 1
        for n in range(1, M + 1):
            s = n - 1
            for head, ch in shapes:
                for i in range(len(ch)):
                    seqs = [x[ch[j]] if j == i else trees[ch[j]] for j in range(len(ch))]
                    v = _conv_at(seqs, s)
                    if v:
                        x[head][n] += v
        for outer in g.nonterminals:
            out[(outer, inner)] = tuple(x[outer])
    return out


def _rules_by_symbol(g: Grammar):
    index: dict[str, list[tuple[str, tuple[str, ...]]]] = {}
    for r in g.rules:
        index.setdefault(r.rhs.label, []).append((r.lhs, tuple(ch.label for ch in r.rhs.children)))
    return index


def _delta(index, a: str, states: Sequence[frozenset[str]]) -> frozenset[str]:
    return frozenset(
        lhs for lhs, ch in index.get(a, ()) if all(c in S for c, S in zip(ch, states))
    )


def _tuples(pool: list, k: int):
    if k == 0:
        yield ()
        return
    for first in pool:
        for rest in _tuples(pool, k - 1):
            yield (first,) + rest


def _distinct_counts(g: Grammar, M: int, contexts: bool):
    index = _rules_by_symbol(g)
    ranks = {a: g.alphabet[a] for a in index}
    states: list[frozenset[str]] = []
    seen: set[frozenset[str]] = set()
    changed = True
    while changed:
        changed = False
        for a, k in ranks.items():
            for combo in _tuples(list(states), k):
                S = _delta(index, a, combo)
                if S and S not in seen:
                    seen.add(S)
                    states.append(S)
                    changed = True
    transitions = []
    for a, k in ranks.items():
        for combo in _tuples(states, k):
            S = _delta(index, a, combo)
            if S:
                transitions.append((S, combo))
    cnt = {S: [0] * (M + 1) for S in states}
    for n in range(1, M + 1):
        for S, combo in transitions:
            if not combo:
                v = 1 if n == 1 else 0
            else:
                v = _conv_at([cnt[T] for T in combo], n - 1)
            cnt[S][n] += v
    trees = {N: tuple(sum(cnt[S][n] for S in states if N in S) for n in range(M + 1)) for N in g.nonterminals}
    if not contexts:
        return trees, None
    ctx: dict[tuple[str, str], tuple[int, ...]] = {}
    for inner in g.nonterminals:
        base = frozenset([inner])
        cstates: list[frozenset[str]] = [base]
        cseen = {base}
        ctrans = []
        frontier = True
        while frontier:
            frontier = False
            for a, k in ranks.items():
                for i in range(k):
                    for C in list(cstates):
                        for others in _tuples(states, k - 1):
                            combo = others[:i] + (C,) + others[i:]
                            T = _delta(index, a, combo)
                            if T and T not in cseen:
                                cseen.add(T)
                                cstates.append(T)
                                frontier = True
        for a, k in ranks.items():
            for i in range(k):
                for C in cstates:
                    for others in _tuples(states, k - 1):
                        combo = others[:i] + (C,) + others[i:]
                        T = _delta(index, a, combo)
                        if T:
                            ctrans.append((T, i, combo))
        cc = {T: [0] * (M + 1) for T in cstates}
        cc[base][0] = 1
        for n in range(1, M + 1):
            for T, i, combo in ctrans:
                seqs = [cc[combo[j]] if j == i else cnt[combo[j]] for j in range(len(combo))]
                cc[T][n] += _conv_at(seqs, n - 1)
        for outer in g.nonterminals:
            ctx[(outer, inner)] = tuple(
                sum(cc[T][n] for T in cstates if outer in T) for n in range(M + 1)
            )
    return trees, ctx


def count_trees(table: CountTable, N: str, n: int) -> int:
    return table.count_trees(N, n)


def count_contexts(table: CountTable, outer: str, inner: str, n: int) -> int:
    return table.count_contexts(outer, inner, n)


# ---------------------------------------------------------------------------
# uniform sampling

def _split_order(s: int):
    """Sizes 1..s-1 for the first child, alternating from both ends."""
    lo, hi = 1, s - 1
    while lo <= hi:
        yield lo
        if hi != lo:
            yield hi
        lo += 1
        hi -= 1


def sample_uniform(table: CountTable, N: str, n: int, rng: random.Random) -> Tree:
    """A tree drawn uniformly from the derivations of size n from N.

    For unambiguous grammars this is the uniform distribution on L_n(G, N).
    """
    if table.distinct:
        raise ValueError("sampling needs a derivation-count table (distinct=False)")
    if n < 0 or n > table.max_size:
        raise IndexError(f"size {n} outside 0..{table.max_size}")
    if table.count_trees(N, n) == 0:
        raise EmptySliceError(f"L_{n}({N}) is empty")
    by_lhs, shapes = table.sampling_plan()
    counts = table.tree_counts
    weights = table.rule_weights
    labels: list[tuple[str, int]] = []
    todo: list[tuple[str, int]] = [(N, n)]
    while todo:
        nt, size = todo.pop()
        r = rng.randrange(counts[nt][size])
        chosen = -1
        for idx in by_lhs[nt]:
            w = weights[idx][size]
            if r < w:
                chosen = idx
                break
            r -= w
        label, ch = shapes[chosen]
        labels.append((label, len(ch)))
        sizes = _child_sizes(table, chosen, ch, size - 1, rng)
        for child, cs in reversed(list(zip(ch, sizes))):
            todo.append((child, cs))
    return _from_preorder(labels)


def _child_sizes(table: CountTable, idx: int, ch: list[str], s: int, rng: random.Random) -> list[int]:
    k = len(ch)
    if k == 0:
        return []
    if k == 1:
        return [s]
    counts = table.tree_counts
    suffixes = table.rule_suffixes[idx]
    sizes = []
    remaining = s
    for j in range(k - 1):
        rest = counts[ch[-1]] if j + 1 == k - 1 else suffixes[j]
        head = counts[ch[j]]
        total = table.rule_weights[idx][remaining + 1] if j == 0 else suffixes[j - 1][remaining]
        r = rng.randrange(total)
        for t in _split_order(remaining):
            w = head[t] * rest[remaining - t]
            if r < w:
                break
            r -= w
        sizes.append(t)
        remaining -= t
    sizes.append(remaining)
    return sizes


def _from_preorder(labels: list[tuple[str, int]]) -> Tree:
    stack: list[Tree] = []
    for label, arity in reversed(labels):
        if arity:
            kids = stack[-arity:][::-1]
            del stack[-arity:]
            stack.append(Tree(label, kids))
        else:
            stack.append(Tree(label))
    return stack[0]


# ---------------------------------------------------------------------------
# periodicity

@dataclass(frozen=True)
class PeriodReport:
    period: int
    residues: dict[tuple[str, str], int]
    n0_estimate: int
    scope: tuple[str, ...]
    max_size: int

    def residue(self, N: str, N2: str) -> int:
        return self.residues[(N, N2)]


def detect_period(g: Grammar, scope: Iterable[str] | None = None, max_size: int = 30,
                  table: CountTable | None = None) -> PeriodReport:
    """Basic period c and residues d_{N,N'} of the context-size spectra.

    ``residues[(N, N2)]`` is the residue of sizes of contexts in L(G, N => N2),
    i.e. of the S with N2 ->* S[N].  The computed data is validated against
    d_{N,N} = 0, additivity, and the residue of every observed context size;
    n0_estimate is only the observation up to `max_size`.
    """
    if table is None or table.ctx_counts is None or table.max_size < max_size:
        table = build_counts(g, max_size, contexts=True)
    scope = tuple(sorted(scope if scope is not None else infinite_nonterminals(g)))
    if not scope:
        raise InsufficientDataError("empty scope: no infinite nonterminals")
    spectra: dict[tuple[str, str], list[int]] = {}
    c = 0
    for N in scope:
        for N2 in scope:
            sizes = [n for n in range(max_size + 1) if table.count_contexts(N2, N, n) > 0]
            if len(sizes) < 2:
                raise InsufficientDataError(
                    f"fewer than two context sizes for {N} => {N2} up to {max_size}"
                )
            spectra[(N, N2)] = sizes
            for x in sizes[1:]:
                c = math.gcd(c, x - sizes[0])
    if c == 0:
        raise InsufficientDataError("no size differences observed")
    residues = {}
    for pair, sizes in spectra.items():
        d = sizes[0] % c
        if any(x % c != d for x in sizes):
            raise PeriodValidationError(f"sizes of {pair} are not in one residue class mod {c}")
        residues[pair] = d
    for N in scope:
        if residues[(N, N)] != 0:
            raise PeriodValidationError(f"d_({N},{N}) = {residues[(N, N)]} != 0")
        for N2 in scope:
            for N3 in scope:
                if (residues[(N, N2)] + residues[(N2, N3)] - residues[(N, N3)]) % c:
                    raise PeriodValidationError(f"residues not additive on {N}, {N2}, {N3}")
    n0 = max_size + 1
    for n in range(max_size, -1, -1):
        ok = all(
            (table.count_contexts(N2, N, n) > 0) == (n % c == residues[(N, N2)])
            for N in scope
            for N2 in scope
        )
        if not ok:
            break
        n0 = n
    return PeriodReport(c, residues, n0, scope, max_size)


@dataclass(frozen=True)
class AperiodicityVerdict:
    kind: str  # "aperiodic", "periodic-with-gaps" or "inconclusive"
    n0: int | None
    max_size: int

    @property
    def aperiodic(self) -> bool:
        return self.kind == "aperiodic"


def is_aperiodic(table: CountTable, N: str, max_size: int | None = None) -> AperiodicityVerdict:
    """Least n0 with L_n(N) non-empty for every n0 <= n <= M, when one exists."""
    M = table.max_size if max_size is None else max_size
    counts = [table.count_trees(N, n) for n in range(M + 1)]
    positive = [n for n, v in enumerate(counts) if v > 0]
    if counts[M] > 0:
        n0 = M
        while n0 > 0 and counts[n0 - 1] > 0:
            n0 -= 1
        if M - n0 + 1 >= 2:
            return AperiodicityVerdict("aperiodic", n0, M)
    if len(positive) >= 2:
        return AperiodicityVerdict("periodic-with-gaps", None, M)
    return AperiodicityVerdict("inconclusive", None, M)
