"""Second-order contexts and the decomposition of trees into good affine parts.

A frame is a tree whose nodes are either terminals or second-order holes
``[[k:n]]`` (optionally typed ``[[N1,..,Nk=>N:n]]``) that expect a k-context of
exact size n.  A hole with arity k has k frame children, which fill the
holes of the context placed there.
"""

from __future__ import annotations

import itertools
import re
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

from .rtg import ContextType, Grammar, GrammarError, derives, enumerate_contexts, enumerate_trees
from .trees import HOLE_TREE, ArityError, LiteralSyntaxError, Tree, to_literal


class DecompositionError(ValueError):
    pass


class PartMismatchError(DecompositionError):
    def __init__(self, index: int, message: str):
        self.index = index
        super().__init__(f"part {index}: {message}")


class NotInLanguageError(GrammarError):
    pass


@dataclass(frozen=True)
class SOHole:
    arity: int
    size: int
    ctype: ContextType | None = None

    def __str__(self) -> str:
        if self.ctype is None:
            return f"[[{self.arity}:{self.size}]]"
        return f"[[{','.join(self.ctype.args)}=>{self.ctype.result}:{self.size}]]"

    def untyped(self) -> SOHole:
        return SOHole(self.arity, self.size)


class Frame:
    """A second-order context node: a terminal label or an `SOHole` head."""

    __slots__ = ("head", "children", "size", "shn", "_hash")

    def __init__(self, head: str | SOHole, children: Sequence[Frame] = ()):
        children = tuple(children)
        if isinstance(head, SOHole):
            if len(children) != head.arity:
                raise ArityError(f"hole of arity {head.arity} given {len(children)} children")
            own, holes = head.size, 1
        else:
            own, holes = 1, 0
        self.head = head
        self.children = children
        self.size = own + sum(c.size for c in children)
        self.shn = holes + sum(c.shn for c in children)
        self._hash = hash((head, tuple(c._hash for c in children)))

    @property
    def is_hole(self) -> bool:
        return isinstance(self.head, SOHole)

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Frame):
            return NotImplemented
        return self._hash == other._hash and self.head == other.head and self.children == other.children

    def __str__(self) -> str:
        return frame_literal(self)

    def __repr__(self) -> str:
        return f"Frame({frame_literal(self)!r})"

    @staticmethod
    def of_tree(t: Tree) -> Frame:
        if t.holes:
            raise DecompositionError("a frame cannot contain first-order holes")
        return Frame(t.label, [Frame.of_tree(c) for c in t.children])

    def to_tree(self) -> Tree:
        if self.shn:
            raise DecompositionError("frame still has second-order holes")
        return Tree(self.head, [c.to_tree() for c in self.children])

    def holes(self) -> list[SOHole]:
        """Second-order holes in depth-first left-to-right order."""
        out: list[SOHole] = []
        stack = [self]
        while stack:
            node = stack.pop()
            if node.is_hole:
                out.append(node.head)
            stack.extend(reversed(node.children))
        return out

    def forget(self) -> Frame:
        """Drop type annotations."""
        head = self.head.untyped() if self.is_hole else self.head
        return Frame(head, [c.forget() for c in self.children])


def frame_literal(e: Frame) -> str:
    head = str(e.head)
    if not e.children:
        return head
    return head + "(" + ",".join(frame_literal(c) for c in e.children) + ")"


_FRAME_TOKEN = re.compile(
    r"\s*(?:(?P<hole>\[\[[^\]]*\]\])|(?P<name>[A-Za-z][A-Za-z0-9_$]*(?:\{[^{}]*\})?)|(?P<punct>[(),]))"
)
_HOLE_BODY = re.compile(r"^\[\[\s*(?:(?P<k>\d+)|(?P<args>[^=\]]*)=>(?P<res>[^:\]]+))\s*:\s*(?P<n>\d+)\s*\]\]$")


def parse_frame(text: str) -> Frame:
    """Parse a frame literal such as ``b([[1:3]](a([[0:3]],b([[0:5]]))))``."""
    toks = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _FRAME_TOKEN.match(text, pos)
        if not m:
            raise LiteralSyntaxError(f"unexpected character {text[pos]!r}", text, pos)
        toks.append((m.lastgroup, m.group(m.lastgroup), m.start(m.lastgroup)))
        pos = m.end()
    i = 0

    def node() -> Frame:
        nonlocal i
        if i >= len(toks):
            raise LiteralSyntaxError("unexpected end of input", text, len(text))
        kind, val, at = toks[i]
        i += 1
        if kind == "hole":
            hm = _HOLE_BODY.match(val)
            if not hm:
                raise LiteralSyntaxError(f"bad hole {val!r}", text, at)
            if hm.group("k") is not None:
                head: str | SOHole = SOHole(int(hm.group("k")), int(hm.group("n")))
            else:
                args = tuple(a.strip() for a in hm.group("args").split(",") if a.strip())
                head = SOHole(len(args), int(hm.group("n")), ContextType(args, hm.group("res").strip()))
        elif kind == "name":
            head = val
        else:
            raise LiteralSyntaxError(f"expected a symbol, got {val!r}", text, at)
        kids: list[Frame] = []
        if i < len(toks) and toks[i][1] == "(":
            i += 1
            kids.append(node())
            while i < len(toks) and toks[i][1] == ",":
                i += 1
                kids.append(node())
            if i >= len(toks) or toks[i][1] != ")":
                raise LiteralSyntaxError("expected ')'", text, toks[i][2] if i < len(toks) else len(text))
            i += 1
        return Frame(head, kids)

    e = node()
    if i != len(toks):
        raise LiteralSyntaxError(f"trailing input {toks[i][1]!r}", text, toks[i][2])
    return e


# ---------------------------------------------------------------------------
# filling

def _plug(c: Tree, frames: Sequence[Frame]) -> Frame:
    """The frame C[E1..Ek] for a first-order context C and frames Ei."""
    it = iter(frames)

    def go(node: Tree) -> Frame:
        if node.is_hole:
            return next(it)
        return Frame(node.label, [go(ch) for ch in node.children])

    return go(c)


def recompose(e: Frame, parts: Sequence[Tree], grammar: Grammar | None = None) -> Frame | Tree:
    """Fill second-order holes leftmost first with `parts`.

    Each part must have as many holes as the hole's arity and exactly its
    declared size; when the hole is typed and `grammar` is given, the part must
    also belong to the hole's context type.  Returns a `Tree` once every hole
    is filled, otherwise the partially filled frame.
    """
    parts = list(parts)
    if len(parts) > e.shn:
        raise ArityError(f"frame has {e.shn} holes but {len(parts)} parts were given")
    it = iter(enumerate(parts, 1))
    remaining = [len(parts)]

    def go(node: Frame) -> Frame:
        if node.shn == 0 or remaining[0] == 0:
            return node
        if not node.is_hole:
            return Frame(node.head, [go(ch) for ch in node.children])
        idx, part = next(it)
        remaining[0] -= 1
        h = node.head
        if part.holes != h.arity:
            raise PartMismatchError(idx, f"has {part.holes} holes, hole expects arity {h.arity}")
        if part.size != h.size:
            raise PartMismatchError(idx, f"has size {part.size}, hole expects {h.size}")
        if h.ctype is not None and grammar is not None:
            if not derives(grammar, h.ctype.result, part, h.ctype.args):
                raise PartMismatchError(idx, f"{to_literal(part)} is not of type {h.ctype}")
        kids = [go(ch) for ch in node.children]
        return _plug(part, kids)

    out = go(e)
    return out.to_tree() if out.shn == 0 else out


# ---------------------------------------------------------------------------
# goodness and the decomposition

def good_for(u: Tree, m: int) -> bool:
    if u.holes > 1:
        raise ArityError(f"goodness is defined for affine contexts, got {u.holes} holes")
    if u.is_hole:
        return False
    return u.size >= m and all(c.size < m for c in u.children)


def decompose_aux(t: Tree, m: int) -> tuple[Tree, Frame, list[Tree]]:
    """The auxiliary decomposition (U, E, P) of `t` for threshold `m`."""
    if m < 1:
        raise ValueError("m must be at least 1")
    if t.holes:
        raise DecompositionError("decomposition applies to trees, not contexts")
    if t.size < m:
        return HOLE_TREE, Frame.of_tree(t), []
    subs = [decompose_aux(c, m) for c in t.children]
    large = [i for i, c in enumerate(t.children) if c.size >= m]
    if len(large) >= 2:
        frame = Frame(t.label, [_plug(u, [e]) for (u, e, _) in subs])
        parts = [p for (_, _, ps) in subs for p in ps]
        return HOLE_TREE, frame, parts
    if len(large) == 1:
        i = large[0]
        ui, ei, pi = subs[i]
        kids = list(t.children)
        kids[i] = ui
        shell = Tree(t.label, kids)
        if shell.size >= m:
            return HOLE_TREE, Frame(SOHole(1, shell.size), [ei]), [shell] + pi
        return shell, ei, pi
    return HOLE_TREE, Frame(SOHole(0, t.size)), [t]


@dataclass(frozen=True)
class Decomposition:
    frame: Frame
    parts: tuple[Tree, ...]

    def __str__(self) -> str:
        return frame_literal(self.frame) + " | " + " . ".join(to_literal(p) for p in self.parts)


def decompose(t: Tree, m: int) -> Decomposition:
    u, e, p = decompose_aux(t, m)
    return Decomposition(_plug(u, [e]), tuple(p))


# ---------------------------------------------------------------------------
# grammar-respecting refinement

def _states(g: Grammar, t: Tree, memo: dict[Tree, frozenset[str]]) -> frozenset[str]:
    """Nonterminals deriving `t` (canonical grammar); hole-marker leaves map via memo."""
    if t in memo:
        return memo[t]
    order: list[Tree] = []
    stack = [(t, False)]
    while stack:
        node, done = stack.pop()
        if node in memo:
            continue
        if done:
            order.append(node)
            continue
        stack.append((node, True))
        stack.extend((c, False) for c in node.children)
    by_symbol = _index(g)
    for node in order:
        if node in memo:
            continue
        kids = [memo[c] for c in node.children]
        memo[node] = frozenset(
            lhs for lhs, ch in by_symbol.get(node.label, ()) if all(n in s for n, s in zip(ch, kids))
        )
    return memo[t]


_INDEX_CACHE: dict[int, tuple[Grammar, dict]] = {}


def _index(g: Grammar) -> dict[str, list[tuple[str, tuple[str, ...]]]]:
    hit = _INDEX_CACHE.get(id(g))
    if hit is not None and hit[0] is g:
        return hit[1]
    if not g.is_canonical():
        raise GrammarError("a canonical grammar is required")
    idx: dict[str, list[tuple[str, tuple[str, ...]]]] = {}
    for r in g.rules:
        idx.setdefault(r.rhs.label, []).append((r.lhs, tuple(c.label for c in r.rhs.children)))
    _INDEX_CACHE[id(g)] = (g, idx)
    return idx


def _unique_rule(g: Grammar, N: str, label: str, kid_states: Sequence[frozenset[str]]) -> tuple[str, ...]:
    found = [
        ch
        for lhs, ch in _index(g).get(label, ())
        if lhs == N and len(ch) == len(kid_states) and all(n in s for n, s in zip(ch, kid_states))
    ]
    if not found:
        raise NotInLanguageError(f"no rule {N} -> {label}(..) matches")
    if len(found) > 1:
        raise GrammarError(f"ambiguous: several rules {N} -> {label}(..) match")
    return found[0]


def infer_child_types(
    g: Grammar, c: Tree, subtrees: Sequence[Tree], n0: str, memo: dict | None = None
) -> list[str]:
    """The unique (N1..Nk) with c in L(N1..Nk => n0) and subtrees[i] in L(Ni)."""
    if len(subtrees) != c.holes:
        raise ArityError(f"context has {c.holes} holes but {len(subtrees)} subtrees were given")
    memo = {} if memo is None else memo
    sub_states = [_states(g, s, memo) for s in subtrees]
    # Bottom-up states for the nodes of c, then a top-down unique choice.
    states_of: list[tuple[Tree, frozenset[str]]] = []

    def annotate(node: Tree) -> tuple:
        if node.is_hole:
            s = sub_states[len(states_of)]
            states_of.append((node, s))
            return ("hole", len(states_of) - 1, s)
        if node.holes == 0:
            return ("tree", node, _states(g, node, memo))
        kids = [annotate(ch) for ch in node.children]
        s = frozenset(
            lhs for lhs, ch in _index(g).get(node.label, ()) if all(n in kk[2] for n, kk in zip(ch, kids))
        )
        return ("node", node.label, s, kids)

    root = annotate(c)
    root_states = root[2]
    if n0 not in root_states:
        raise NotInLanguageError(f"the filled context is not derivable from {n0}")
    out: list[str | None] = [None] * len(subtrees)
    stack = [(root, n0)]
    while stack:
        item, N = stack.pop()
        if item[0] == "hole":
            out[item[1]] = N
        elif item[0] == "node":
            kids = item[3]
            ch = _unique_rule(g, N, item[1], [kk[2] for kk in kids])
            stack.extend(zip(kids, ch))
    return out  # type: ignore[return-value]


def refine(g: Grammar, N: str, t: Tree, m: int) -> Decomposition:
    """The typed refinement of the closed decomposition of `t` for `N`."""
    memo: dict[Tree, frozenset[str]] = {}
    if N not in _states(g, t, memo):
        raise NotInLanguageError(f"{to_literal(t)} is not in L({N})")
    d = decompose(t, m)
    parts = list(d.parts)
    pos = [0]

    def tree_of(e: Frame, start: int) -> Tree:
        return recompose(e, parts[start : start + e.shn]) if e.shn else e.to_tree()

    def go(e: Frame, nt: str) -> Frame:
        if e.is_hole:
            idx = pos[0]
            pos[0] += 1
            part = parts[idx]
            offsets = []
            cur = pos[0]
            for ch in e.children:
                offsets.append(cur)
                cur += ch.shn
            fills = [tree_of(ch, off) for ch, off in zip(e.children, offsets)]
            args = infer_child_types(g, part, fills, nt, memo)
            kids = [go(ch, a) for ch, a in zip(e.children, args)]
            return Frame(SOHole(e.head.arity, e.head.size, ContextType(tuple(args), nt)), kids)
        if e.shn == 0:
            return e
        offsets = []
        cur = pos[0]
        for ch in e.children:
            offsets.append(cur)
            cur += ch.shn
        kid_states = [_states(g, tree_of(ch, off), memo) for ch, off in zip(e.children, offsets)]
        ch_types = _unique_rule(g, nt, e.head, kid_states)
        return Frame(e.head, [go(ch, a) for ch, a in zip(e.children, ch_types)])

    typed = go(d.frame, N)
    return Decomposition(typed, d.parts)


def typecheck_frame(g: Grammar, e: Frame, N: str) -> bool:
    """Derivability of |- e : N under the hole and terminal rules."""
    idx = _index(g)

    def ok(node: Frame, nt: str) -> bool:
        if node.is_hole:
            ct = node.head.ctype
            if ct is None or ct.result != nt or len(ct.args) != len(node.children):
                return False
            return all(ok(ch, a) for ch, a in zip(node.children, ct.args))
        return any(
            lhs == nt and len(ch) == len(node.children) and all(ok(c, a) for c, a in zip(node.children, ch))
            for lhs, ch in idx.get(node.head, ())
        )

    return ok(e, N)


def parts_match(g: Grammar, e: Frame, parts: Sequence[Tree]) -> int | None:
    """Index (1-based) of the first part not matching its hole, or None."""
    holes = e.holes()
    if len(holes) != len(parts):
        return min(len(holes), len(parts)) + 1
    for i, (h, p) in enumerate(zip(holes, parts), 1):
        if p.holes != h.arity or p.size != h.size:
            return i
        if h.ctype is not None and not derives(g, h.ctype.result, p, h.ctype.args):
            return i
    return None


# ---------------------------------------------------------------------------
# bijection harness

@dataclass
class BijectionReport:
    passed: bool
    trees: int
    frames: int
    product_total: int
    counterexample: str | None = None
    details: dict = field(default_factory=dict)


Decomposer = Callable[[Grammar, str, Tree, int], Decomposition]


def verify_bijection(
    g: Grammar, N: str, n: int, m: int, decomposer: Decomposer | None = None, budget: int = 2_000_000
) -> BijectionReport:
    """Check the grammar-respecting decomposition on all of L_n(G, N).

    Verifies injectivity and the round trip, that parts inhabit their holes,
    that each frame's part tuples form the full product of the good contexts
    of each hole type, and that the cardinalities add up.
    """
    decomposer = decomposer or refine
    trees = sorted(enumerate_trees(g, N, n, budget))
    seen: dict[tuple[Frame, tuple[Tree, ...]], Tree] = {}
    groups: dict[Frame, set[tuple[Tree, ...]]] = {}

    def fail(msg: str) -> BijectionReport:
        return BijectionReport(False, len(trees), len(groups), 0, msg)

    for t in trees:
        d = decomposer(g, N, t, m)
        key = (d.frame, d.parts)
        if key in seen:
            return fail(f"{d} is the image of both {seen[key]} and {t}")
        seen[key] = t
        if not typecheck_frame(g, d.frame, N):
            return fail(f"frame {frame_literal(d.frame)} of {t} does not have type {N}")
        bad = parts_match(g, d.frame, d.parts)
        if bad is not None:
            return fail(f"part {bad} of {t} does not match its hole in {d}")
        if any(not good_for(p, m) for p in d.parts):
            return fail(f"a part of {t} is not good for {m}")
        back = recompose(d.frame, d.parts)
        if back != t:
            return fail(f"recomposing {d} gives {back}, not {t}")
        groups.setdefault(d.frame, set()).add(d.parts)

    comp_cache: dict[tuple[ContextType, int], frozenset[Tree]] = {}

    def component(h: SOHole) -> frozenset[Tree]:
        key = (h.ctype, h.size)
        if key not in comp_cache:
            if h.arity == 0:
                pool = enumerate_trees(g, h.ctype.result, h.size, budget)
            else:
                pool = enumerate_contexts(g, h.ctype, h.size, budget)
            comp_cache[key] = frozenset(u for u in pool if u.holes == h.arity and good_for(u, m))
        return comp_cache[key]

    total = 0
    for frame, tuples in groups.items():
        comps = [component(h) for h in frame.holes()]
        expected = 1
        for c in comps:
            expected *= len(c)
        total += expected
        if len(tuples) != expected:
            missing = next(
                (combo for combo in itertools.product(*[sorted(c) for c in comps]) if combo not in tuples),
                None,
            )
            shown = " . ".join(map(to_literal, missing)) if missing else "?"
            return BijectionReport(
                False, len(trees), len(groups), total,
                f"frame {frame_literal(frame)}: {len(tuples)} part tuples, product has {expected}; "
                f"missing {shown}",
            )
    if total != len(trees):
        return BijectionReport(False, len(trees), len(groups), total, f"{total} != {len(trees)} trees")
    return BijectionReport(True, len(trees), len(groups), total)
