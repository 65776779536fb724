"""Ranked trees, k-contexts, filling, the subcontext relation and affine serialization.

A context is a `Tree` whose leaves may carry the hole label ``_``.  Holes are
numbered in depth-first left-to-right preorder, and a hole contributes 0 to the
size of a context.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Iterator, Mapping, Sequence

HOLE = "_"

Word = tuple


class TreeError(ValueError):
    pass


class ArityError(TreeError):
    pass


class LiteralSyntaxError(TreeError):
    def __init__(self, message: str, text: str, pos: int):
        self.text = text
        self.pos = pos
        super().__init__(f"{message} at offset {pos} in {text!r}")


class Tree:
    """An immutable ranked tree node; a node labelled ``_`` is a hole."""

    __slots__ = ("label", "children", "size", "holes", "_hash")

    def __init__(self, label: str, children: Iterable[Tree] = ()):
        children = tuple(children)
        if label == HOLE and children:
            raise TreeError("a hole has no children")
        self.label = label
        self.children = children
        if label == HOLE:
            self.size, self.holes = 0, 1
        else:
            self.size = 1 + sum(c.size for c in children)
            self.holes = sum(c.holes for c in children)
        self._hash = hash((label, tuple(c._hash for c in children)))

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, Tree):
            return NotImplemented
        if self._hash != other._hash or self.size != other.size:
            return False
        stack = [(self, other)]
        while stack:
            a, b = stack.pop()
            if a is b:
                continue
            if a.label != b.label or len(a.children) != len(b.children) or a._hash != b._hash:
                return False
            stack.extend(zip(a.children, b.children))
        return True

    def __lt__(self, other: Tree) -> bool:
        return to_literal(self) < to_literal(other)

    def __repr__(self) -> str:
        return f"Tree({to_literal(self)!r})"

    def __str__(self) -> str:
        return to_literal(self)

    @property
    def is_hole(self) -> bool:
        return self.label == HOLE


HOLE_TREE = Tree(HOLE)


def leaf(label: str) -> Tree:
    return Tree(label)


class RankedAlphabet(Mapping):
    """Finite map from terminal names to ranks."""

    def __init__(self, symbols: Mapping[str, int]):
        if not symbols:
            raise TreeError("a ranked alphabet must be non-empty")
        for name, rank in symbols.items():
            if not isinstance(rank, int) or rank < 0:
                raise TreeError(f"bad rank {rank!r} for symbol {name!r}")
            if name == HOLE:
                raise TreeError("'_' is reserved for holes")
        self._symbols = dict(symbols)
        self.max_rank = max(self._symbols.values())

    def __getitem__(self, name: str) -> int:
        return self._symbols[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._symbols)

    def __len__(self) -> int:
        return len(self._symbols)

    def __repr__(self) -> str:
        return f"RankedAlphabet({self._symbols!r})"

    def check(self, t: Tree) -> None:
        """Raise if `t` uses an unknown symbol or a symbol at the wrong rank."""
        for node in preorder(t):
            if node.is_hole:
                continue
            if node.label not in self._symbols:
                raise TreeError(f"unknown symbol {node.label!r}")
            if self._symbols[node.label] != len(node.children):
                raise ArityError(
                    f"symbol {node.label!r} has rank {self._symbols[node.label]} "
                    f"but is used with {len(node.children)} children"
                )


# ---------------------------------------------------------------------------
# literals

_TOKEN = re.compile(
    r"\s*(?:(?P<name>[A-Za-z][A-Za-z0-9_$]*(?:\{[^{}]*\})?)|(?P<hole>_(?![A-Za-z0-9_]))|(?P<punct>[(),]))"
)


def _tokens(text: str) -> list[tuple[str, str, int]]:
    out = []
    pos = 0
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise LiteralSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    return out


def parse_tree(text: str) -> Tree:
    """Parse a tree or context literal such as ``a(b(_), c)``.

    Names are ``[A-Za-z][A-Za-z0-9_$]*`` optionally followed by a brace block
    (``lam{x1:o->o}``), which lets generated grammars use structured names.
    """
    toks = _tokens(text)
    if not toks:
        raise LiteralSyntaxError("empty literal", text, 0)
    i = 0

    def node() -> Tree:
        nonlocal i
        if i >= len(toks):
            raise LiteralSyntaxError("unexpected end of input", text, len(text))
        kind, val, pos = toks[i]
        if kind == "hole":
            i += 1
            return HOLE_TREE
        if kind != "name":
            raise LiteralSyntaxError(f"expected a symbol, got {val!r}", text, pos)
        i += 1
        children: list[Tree] = []
        if i < len(toks) and toks[i][1] == "(":
            i += 1
            if i < len(toks) and toks[i][1] == ")":
                i += 1
                return Tree(val)
            children.append(node())
            while i < len(toks) and toks[i][1] == ",":
                i += 1
                children.append(node())
            if i >= len(toks) or toks[i][1] != ")":
                where = toks[i][2] if i < len(toks) else len(text)
                raise LiteralSyntaxError("expected ')'", text, where)
            i += 1
        return Tree(val, children)

    t = node()
    if i != len(toks):
        raise LiteralSyntaxError(f"trailing input {toks[i][1]!r}", text, toks[i][2])
    return t


def to_literal(t: Tree) -> str:
    parts: list[str] = []
    stack: list[object] = [t]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            parts.append(item)
            continue
        node = item
        parts.append(node.label)
        if node.children:
            stack.append(")")
            for j in range(len(node.children) - 1, -1, -1):
                stack.append(node.children[j])
                if j:
                    stack.append(",")
            stack.append("(")
    return "".join(parts)


# ---------------------------------------------------------------------------
# traversal and basic measures

def preorder(t: Tree) -> Iterator[Tree]:
    stack = [t]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children))


def size(c: Tree) -> int:
    return c.size


def hole_count(c: Tree) -> int:
    return c.holes


def is_tree(c: Tree) -> bool:
    return c.holes == 0


def is_affine(c: Tree) -> bool:
    return c.holes <= 1


def is_linear(c: Tree) -> bool:
    return c.holes == 1


def depth(t: Tree) -> int:
    best = 0
    stack = [(t, 1)]
    while stack:
        node, d = stack.pop()
        best = max(best, d)
        stack.extend((c, d + 1) for c in node.children)
    return best


# ---------------------------------------------------------------------------
# filling

def fill(c: Tree, parts: Sequence[Tree]) -> Tree:
    """Replace the i-th hole of `c` (preorder) with ``parts[i]``."""
    parts = list(parts)
    if len(parts) != c.holes:
        raise ArityError(f"context has {c.holes} holes but {len(parts)} parts were given")
    if not parts:
        return c
    it = iter(parts)

    def go(node: Tree) -> Tree:
        if node.holes == 0:
            return node
        if node.is_hole:
            return next(it)
        return Tree(node.label, [go(ch) for ch in node.children])

    return go(c)


def fill_at(c: Tree, part: Tree, i: int) -> Tree:
    """Replace only hole number `i` (1-based, preorder) with `part`."""
    if not 1 <= i <= c.holes:
        raise IndexError(f"hole index {i} out of range 1..{c.holes}")

    def go(node: Tree, k: int) -> Tree:
        if node.is_hole:
            return part
        kids = list(node.children)
        for j, ch in enumerate(kids):
            if k <= ch.holes:
                kids[j] = go(ch, k)
                break
            k -= ch.holes
        return Tree(node.label, kids)

    return go(c, i)


def replace_holes(c: Tree, label: str) -> Tree:
    """Replace every hole by a leaf named `label` (e.g. a nonterminal)."""
    return fill(c, [Tree(label)] * c.holes)


# ---------------------------------------------------------------------------
# subcontext relation

def _matches_at(pattern: Tree, node: Tree) -> bool:
    stack = [(pattern, node)]
    while stack:
        p, t = stack.pop()
        if p.is_hole:
            continue
        if p.holes == 0:
            if p != t:
                return False
            continue
        if t.is_hole or p.label != t.label or len(p.children) != len(t.children):
            return False
        if t.size < p.size:
            return False
        stack.extend(zip(p.children, t.children))
    return True


def is_subcontext(c: Tree, c2: Tree) -> bool:
    """Decide whether ``c2 = C0[c[C1..Ck]]_i`` for some C0, C1..Ck and i.

    Every node of `c2` is tried as the anchor; holes of `c` cut arbitrary
    subtrees (including holes) of `c2`.
    """
    if c.is_hole:
        return True
    if c.size > c2.size:
        return False
    for node in preorder(c2):
        if node.label == c.label and node.size >= c.size and _matches_at(c, node):
            return True
    return False


# ---------------------------------------------------------------------------
# affine serialization over the tag alphabet

SQUARE = "▢"


def open_tag(a: str) -> str:
    return f"⟨{a}⟩"


def close_tag(a: str) -> str:
    return f"⟨/{a}⟩"


def serialize_affine(u: Tree) -> Word:
    if u.holes > 1:
        raise ArityError(f"affine serialization needs at most one hole, got {u.holes}")
    out: list[str] = []
    stack: list[object] = [u]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            out.append(item)
        elif item.is_hole:
            out.append(SQUARE)
        else:
            out.append(open_tag(item.label))
            stack.append(close_tag(item.label))
            stack.extend(reversed(item.children))
    return tuple(out)


def tag_alphabet(alphabet: Iterable[str]) -> list[str]:
    syms = list(alphabet)
    return [open_tag(a) for a in syms] + [close_tag(a) for a in syms] + [SQUARE]


def serialization_bound(alphabet_size: int) -> int:
    """The constant (|A|+1)^3 bounding the growth of affine contexts, |A| = 2|Σ|+1."""
    return (2 * alphabet_size + 2) ** 3


def find_subword(w: Sequence, pattern: Sequence) -> bool:
    if isinstance(w, str) and isinstance(pattern, str):
        return pattern in w
    w, pattern = tuple(w), tuple(pattern)
    m = len(pattern)
    if m == 0:
        return True
    first = pattern[0]
    for i in range(len(w) - m + 1):
        if w[i] == first and w[i : i + m] == pattern:
            return True
    return False


# ---------------------------------------------------------------------------
# enumeration helpers (small-scale oracles)

def all_trees(alphabet: Mapping[str, int], n: int) -> list[Tree]:
    """Every tree of size exactly `n` over `alphabet`, in a fixed order."""
    return all_contexts(alphabet, n, max_holes=0)


def all_contexts(alphabet: Mapping[str, int], n: int, max_holes: int = 1) -> list[Tree]:
    """Every context of size `n` with at most `max_holes` holes."""
    memo: dict[tuple[int, int], list[Tree]] = {}

    def ctxs(s: int, h: int) -> list[Tree]:
        key = (s, h)
        if key in memo:
            return memo[key]
        out: list[Tree] = []
        if s == 0 and h >= 1:
            out.append(HOLE_TREE)
        for a in sorted(alphabet):
            k = alphabet[a]
            for kids in _forests(k, s - 1, h):
                out.append(Tree(a, kids))
        memo[key] = out
        return out

    def _forests(k: int, s: int, h: int) -> Iterator[tuple[Tree, ...]]:
        if s < 0:
            return
        if k == 0:
            if s == 0:
                yield ()
            return
        for s1 in range(s + 1):
            for first in ctxs(s1, h):
                for rest in _forests(k - 1, s - s1, h - first.holes):
                    yield (first,) + rest

    return [c for c in ctxs(n, max_holes) if c.holes <= max_holes]
