import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtgkit.trees import (
    HOLE_TREE,
    ArityError,
    LiteralSyntaxError,
    RankedAlphabet,
    Tree,
    TreeError,
    all_contexts,
    all_trees,
    fill,
    fill_at,
    find_subword,
    is_subcontext,
    parse_tree,
    preorder,
    serialization_bound,
    serialize_affine,
    tag_alphabet,
    to_literal,
)

from oracles import trees_of_size

ABC = {"a": 2, "b": 1, "c": 0}
T = parse_tree


def contexts(max_size=7, max_holes=2):
    leaves = st.sampled_from([T("c"), HOLE_TREE] if max_holes else [T("c")])

    def grow(children):
        return st.one_of(
            st.builds(lambda x: Tree("b", [x]), children),
            st.builds(lambda x, y: Tree("a", [x, y]), children, children),
        )

    return st.recursive(leaves, grow, max_leaves=max_size).filter(lambda c: c.holes <= max_holes)


trees = contexts(max_holes=0)


def test_size_examples():
    assert T("a(b(c), c)").size == 4
    assert HOLE_TREE.size == 0
    assert T("a(a(_,c), b(_))").size == 4
    assert T("a(a(_,c), b(_))").holes == 2


def test_fill_examples():
    c = T("a(_, a(_,_))")
    assert fill(c, [T("b(_)"), T("c"), HOLE_TREE]) == T("a(b(_), a(c,_))")
    assert fill(HOLE_TREE, [T("a(c,c)")]) == T("a(c,c)")
    assert fill(T("a(_,_)"), [T("c"), T("c")]) == T("a(c,c)")
    with pytest.raises(ArityError):
        fill(c, [T("c")])


def test_fill_at_examples():
    c = T("a(_, a(_,_))")
    assert fill_at(c, T("b(_)"), 2) == T("a(_, a(b(_), _))")
    assert fill_at(HOLE_TREE, T("c"), 1) == T("c")
    assert fill_at(T("a(_,_)"), HOLE_TREE, 1) == T("a(_,_)")
    with pytest.raises(IndexError):
        fill_at(c, T("c"), 4)
    with pytest.raises(IndexError):
        fill_at(c, T("c"), 0)


def test_literal_syntax():
    assert T(" a( b(c) , c ) ") == T("a(b(c),c)")
    assert T("c()") == T("c")
    assert to_literal(T("a(_,b(c))")) == "a(_,b(c))"
    for bad in ["a(b,", "a(,c)", "(c)", "a(c))", "", "1a"]:
        with pytest.raises(LiteralSyntaxError):
            T(bad)
    with pytest.raises(TreeError):
        Tree("_", [T("c")])


def test_ranked_alphabet():
    sigma = RankedAlphabet(ABC)
    assert sigma.max_rank == 2
    sigma.check(T("a(b(c),_)"))
    with pytest.raises(ArityError):
        sigma.check(T("b(c,c)"))
    with pytest.raises(TreeError):
        sigma.check(T("d"))
    with pytest.raises(TreeError):
        RankedAlphabet({})
    with pytest.raises(TreeError):
        RankedAlphabet({"a": -1})


@given(contexts())
def test_literal_round_trip(c):
    assert T(to_literal(c)) == c


@given(contexts(), st.data())
def test_fill_size_and_holes(c, data):
    parts = [data.draw(contexts(4)) for _ in range(c.holes)]
    out = fill(c, parts)
    assert out.size == c.size + sum(p.size for p in parts)
    assert out.holes == sum(p.holes for p in parts)


@given(contexts(), st.data())
def test_fill_at_agrees_with_fill(c, data):
    if not c.holes:
        return
    i = data.draw(st.integers(1, c.holes))
    part = data.draw(contexts(3))
    parts = [HOLE_TREE] * c.holes
    parts[i - 1] = part
    assert fill_at(c, part, i) == fill(c, parts)


def test_subcontext_examples():
    assert is_subcontext(T("a(b(_),_)"), T("a(_, a(b(_), c))"))
    assert not is_subcontext(T("b(b(_))"), T("a(b(c), c)"))
    t = T("a(b(c),c)")
    assert is_subcontext(t, t)
    assert is_subcontext(HOLE_TREE, T("c"))
    assert not is_subcontext(T("a(c,c)"), T("c"))


def _generalizations(t: Tree) -> set:
    """All contexts obtained from t by cutting any set of disjoint subtrees to holes."""
    if t.is_hole:
        return {HOLE_TREE}
    out = {HOLE_TREE}
    for kids in itertools.product(*[_generalizations(c) for c in t.children]):
        out.add(Tree(t.label, kids))
    return out


def _subcontext_oracle(c: Tree, t: Tree) -> bool:
    return any(c in _generalizations(node) for node in preorder(t))


def test_subcontext_matches_definition_exhaustively():
    pats = [p for n in range(0, 4) for p in all_contexts(ABC, n, 2)]
    targets = [x for n in range(1, 6) for x in all_contexts(ABC, n, 1)]
    for p in pats:
        for x in targets:
            assert is_subcontext(p, x) == _subcontext_oracle(p, x), (p, x)


@given(contexts(5), contexts(5), st.data())
def test_subcontext_of_constructed(c, c0, data):
    if not c0.holes:
        c0 = Tree("a", [c0, HOLE_TREE])
    parts = [data.draw(contexts(3)) for _ in range(c.holes)]
    i = data.draw(st.integers(1, c0.holes))
    assert is_subcontext(c, fill_at(c0, fill(c, parts), i))


@settings(max_examples=60)
@given(contexts(4, 1), contexts(4, 1), contexts(4, 1))
def test_subcontext_transitive(x, y, z):
    if is_subcontext(x, y) and is_subcontext(y, z):
        assert is_subcontext(x, z)


def _spine(word: str) -> Tree:
    t = Tree("e")
    for ch in reversed(word):
        t = Tree(ch, [t])
    return t


def _open_spine(word: str) -> Tree:
    t = HOLE_TREE
    for ch in reversed(word):
        t = Tree(ch, [t])
    return t


@given(st.text("ab", max_size=8), st.text("ab", max_size=4))
def test_unary_subcontext_is_subword(w, p):
    assert is_subcontext(_open_spine(p), _spine(w)) == find_subword(w, p)


def test_serialize_examples():
    assert serialize_affine(T("c")) == ("⟨c⟩", "⟨/c⟩")
    assert serialize_affine(HOLE_TREE) == ("▢",)
    assert serialize_affine(T("b(_)")) == ("⟨b⟩", "▢", "⟨/b⟩")
    with pytest.raises(ArityError):
        serialize_affine(T("a(_,_)"))


def test_serialize_injective_and_bounded():
    seen = {}
    gamma = serialization_bound(len(ABC))
    assert len(tag_alphabet(ABC)) == 2 * len(ABC) + 1
    for n in range(0, 9):
        level = all_contexts(ABC, n, 1)
        for u in level:
            w = serialize_affine(u)
            assert len(w) == 2 * u.size + u.holes
            assert seen.setdefault(w, u) == u
        total = sum(len(all_contexts(ABC, k, 1)) for k in range(n + 1))
        assert total <= gamma**n


def test_all_trees_matches_independent_enumeration():
    for n in range(1, 10):
        mine = {to_literal(t) for t in all_trees(ABC, n)}
        ref = trees_of_size(ABC, n)

        def lit(x):
            return x[0] if len(x) == 1 else f"{x[0]}({','.join(lit(y) for y in x[1:])})"

        assert mine == {lit(x) for x in ref}
        assert len(all_trees(ABC, n)) == len(ref)


def test_find_subword_examples():
    assert find_subword("abba", "bb")
    assert find_subword("", "")
    assert find_subword("abab", "aba")
    assert not find_subword("ab", "abc")
    assert find_subword(("x", "y", "z"), ("y", "z"))
