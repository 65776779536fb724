"""Simply-typed λ-terms with unused binders, minimal-environment typing,
β-reduction lengths, explosive terms, and the tree grammar G(δ,ι,ξ) of
bounded closed terms."""

from __future__ import annotations

import itertools
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field

from .rtg import EmptyLanguageError, Grammar, GrammarError, Rule, occurrence_graph, _closure
from .trees import Tree

# ---------------------------------------------------------------------------
# types

O = "o"


@dataclass(frozen=True)
class Arrow:
    arg: object
    res: object

    def __str__(self) -> str:
        return type_str(self)


Type = object  # "o" or Arrow


def arrow(*ts: Type) -> Type:
    """arrow(t1, .., tn, r) = t1 -> .. -> tn -> r."""
    out = ts[-1]
    for t in reversed(ts[:-1]):
        out = Arrow(t, out)
    return out


def type_str(t: Type) -> str:
    if t == O:
        return O
    a = type_str(t.arg)
    if isinstance(t.arg, Arrow):
        a = f"({a})"
    return f"{a}->{type_str(t.res)}"


def uncurry(t: Type) -> tuple[list[Type], Type]:
    args = []
    while isinstance(t, Arrow):
        args.append(t.arg)
        t = t.res
    return args, t


def order(t: Type) -> int:
    args, _ = uncurry(t)
    return max([0] + [order(a) + 1 for a in args])


def iar(t: Type) -> int:
    args, _ = uncurry(t)
    return max([len(args)] + [iar(a) for a in args])


def twice_type(j: int) -> Type:
    t: Type = O
    for _ in range(j):
        t = Arrow(t, t)
    return t


def types_up_to(delta: int, iota: int) -> list[Type]:
    """Types(δ, ι): all τ with order <= δ and internal arity <= ι."""
    if delta < 0:
        return []
    if delta == 0:
        return [O]
    smaller = types_up_to(delta - 1, iota)
    out: list[Type] = []
    for n in range(iota + 1):
        for args in itertools.product(smaller, repeat=n):
            out.append(arrow(*args, O))
    return sorted(set(out), key=lambda t: (len(type_str(t)), type_str(t)))


class LambdaSyntaxError(ValueError):
    pass


_TYPE_TOKEN = re.compile(r"\s*(o|->|\(|\))")


def parse_type(text: str) -> Type:
    toks = []
    pos = 0
    text = text.strip()
    while pos < len(text):
        m = _TYPE_TOKEN.match(text, pos)
        if not m:
            raise LambdaSyntaxError(f"bad type {text!r} at offset {pos}")
        toks.append(m.group(1))
        pos = m.end()
        while pos < len(text) and text[pos].isspace():
            pos += 1
    i = 0

    def ty() -> Type:
        nonlocal i
        a = atom()
        if i < len(toks) and toks[i] == "->":
            i += 1
            return Arrow(a, ty())
        return a

    def atom() -> Type:
        nonlocal i
        if i >= len(toks):
            raise LambdaSyntaxError(f"unexpected end of type {text!r}")
        tok = toks[i]
        i += 1
        if tok == O:
            return O
        if tok == "(":
            t = ty()
            if i >= len(toks) or toks[i] != ")":
                raise LambdaSyntaxError(f"expected ')' in type {text!r}")
            i += 1
            return t
        raise LambdaSyntaxError(f"unexpected {tok!r} in type {text!r}")

    t = ty()
    if i != len(toks):
        raise LambdaSyntaxError(f"trailing input in type {text!r}")
    return t


# ---------------------------------------------------------------------------
# terms

@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Lam:
    var: str | None  # None is the unused binder *
    ty: Type | None
    body: object


@dataclass(frozen=True)
class App:
    fn: object
    arg: object


Term = object


def term_size(t: Term) -> int:
    if isinstance(t, Var):
        return 1
    if isinstance(t, Lam):
        return 1 + term_size(t.body)
    return 1 + term_size(t.fn) + term_size(t.arg)


def free_vars(t: Term) -> frozenset[str]:
    if isinstance(t, Var):
        return frozenset([t.name])
    if isinstance(t, Lam):
        fv = free_vars(t.body)
        return fv - {t.var} if t.var is not None else fv
    return free_vars(t.fn) | free_vars(t.arg)


def var_set(t: Term) -> set[str]:
    """V(t): named variables occurring in t, binders included, * excluded."""
    if isinstance(t, Var):
        return {t.name}
    if isinstance(t, Lam):
        s = var_set(t.body)
        if t.var is not None:
            s.add(t.var)
        return s
    return var_set(t.fn) | var_set(t.arg)


def term_str(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Lam):
        b = "*" if t.var is None else t.var
        ann = "" if t.ty is None else ":" + type_str(t.ty)
        return f"\\{b}{ann}.{term_str(t.body)}"
    f = term_str(t.fn)
    if isinstance(t.fn, Lam):
        f = f"({f})"
    a = term_str(t.arg)
    if isinstance(t.arg, (Lam, App)):
        a = f"({a})"
    return f"{f} {a}"


_TERM_TOKEN = re.compile(r"\s*(\\|λ|->|\.|:|\(|\)|\*|[A-Za-z][A-Za-z0-9_']*)")


def parse_term(text: str) -> Term:
    r"""Parse ``\x:o.x``, ``\*:o->o.y``, applications by juxtaposition."""
    toks: list[tuple[str, int]] = []
    pos = 0
    while pos < len(text):
        if text[pos].isspace():
            pos += 1
            continue
        m = _TERM_TOKEN.match(text, pos)
        if not m:
            raise LambdaSyntaxError(f"unexpected character {text[pos]!r} at offset {pos}")
        toks.append((m.group(1), m.start(1)))
        pos = m.end()
    i = 0

    def peek() -> str | None:
        return toks[i][0] if i < len(toks) else None

    def expect(tok: str) -> None:
        nonlocal i
        if peek() != tok:
            where = toks[i][1] if i < len(toks) else len(text)
            raise LambdaSyntaxError(f"expected {tok!r} at offset {where}")
        i += 1

    def term() -> Term:
        if peek() in ("\\", "λ"):
            return lam()
        t = atom()
        while peek() is not None and peek() != ")":
            if peek() in ("\\", "λ"):
                t = App(t, lam())
                break
            t = App(t, atom())
        return t

    def lam() -> Term:
        nonlocal i
        i += 1
        b = peek()
        if b is None or not (b == "*" or b[0].isalpha()):
            raise LambdaSyntaxError("expected a binder after lambda")
        i += 1
        ty = None
        if peek() == ":":
            i += 1
            start = toks[i][1] if i < len(toks) else len(text)
            depth = 0
            j = i
            # The annotation runs up to the '.' at depth 0.
            while j < len(toks) and not (toks[j][0] == "." and depth == 0):
                if toks[j][0] == "(":
                    depth += 1
                elif toks[j][0] == ")":
                    depth -= 1
                j += 1
            if j >= len(toks):
                raise LambdaSyntaxError("missing '.' after binder type")
            ty = parse_type(text[start : toks[j][1]])
            i = j
        expect(".")
        return Lam(None if b == "*" else b, ty, term())

    def atom() -> Term:
        nonlocal i
        tok = peek()
        if tok is None:
            raise LambdaSyntaxError("unexpected end of term")
        if tok == "(":
            i += 1
            t = term()
            expect(")")
            return t
        if tok[0].isalpha():
            i += 1
            return Var(tok)
        raise LambdaSyntaxError(f"unexpected {tok!r} at offset {toks[i][1]}")

    t = term()
    if i != len(toks):
        raise LambdaSyntaxError(f"trailing input at offset {toks[i][1]}")
    _check_unused(t)
    return t


def _check_unused(t: Term) -> None:
    if isinstance(t, Var) and t.name == "*":
        raise LambdaSyntaxError("the unused binder * cannot occur in a body")
    if isinstance(t, Lam):
        _check_unused(t.body)
    elif isinstance(t, App):
        _check_unused(t.fn)
        _check_unused(t.arg)


# ---------------------------------------------------------------------------
# typing

class LambdaTypeError(TypeError):
    pass


class TypeClashError(LambdaTypeError):
    pass


class NotTypableError(LambdaTypeError):
    pass


@dataclass(frozen=True)
class Judgment:
    env: tuple[tuple[str, Type], ...]
    term: Term
    type: Type
    order: int
    iar: int

    def env_dict(self) -> dict[str, Type]:
        return dict(self.env)

    def __str__(self) -> str:
        env = ", ".join(f"{x}:{type_str(t)}" for x, t in self.env)
        return f"{env} |- {term_str(self.term)} : {type_str(self.type)}"


def typecheck(t: Term, env: Mapping[str, Type] | None = None) -> Judgment:
    """The minimal-environment judgment for `t`.

    Free variables take their types from `env`; the judgment's environment is
    restricted to the free variables.  Binders must carry type annotations.
    """
    env = dict(env or {})

    def go(u: Term, scope: dict[str, Type]) -> tuple[Type, int, int]:
        if isinstance(u, Var):
            if u.name not in scope:
                raise NotTypableError(f"free variable {u.name} has no type")
            ty = scope[u.name]
            return ty, order(ty), iar(ty)
        if isinstance(u, Lam):
            if u.ty is None:
                raise NotTypableError("binder without a type annotation")
            inner = scope
            if u.var is not None:
                inner = dict(scope)
                inner[u.var] = u.ty
            body_ty, o, a = go(u.body, inner)
            ty = Arrow(u.ty, body_ty)
            return ty, max(o, order(ty)), max(a, iar(ty))
        fn_ty, o1, a1 = go(u.fn, scope)
        arg_ty, o2, a2 = go(u.arg, scope)
        if not isinstance(fn_ty, Arrow):
            raise NotTypableError(f"{term_str(u.fn)} : {type_str(fn_ty)} is applied but is not a function")
        if fn_ty.arg != arg_ty:
            raise TypeClashError(
                f"{term_str(u.fn)} expects {type_str(fn_ty.arg)} but {term_str(u.arg)} : {type_str(arg_ty)}"
            )
        ty = fn_ty.res
        return ty, max(o1, o2, order(ty)), max(a1, a2, iar(ty))

    ty, o, a = go(t, env)
    fv = free_vars(t)
    return Judgment(tuple(sorted((x, env[x]) for x in fv)), t, ty, o, a)


def judgment_order(j: Judgment) -> int:
    return j.order


def judgment_iar(j: Judgment) -> int:
    return j.iar


# ---------------------------------------------------------------------------
# α-equivalence and variable counting

def debruijn(t: Term, typed: bool = True, _bound: tuple = ()) -> object:
    """Nameless form: bound variables are indices, free ones ("free", name)."""
    if isinstance(t, Var):
        for i, x in enumerate(_bound):
            if x == t.name:
                return i
        return ("free", t.name)
    if isinstance(t, Lam):
        body = debruijn(t.body, typed, (t.var,) + _bound)
        return ("L", t.ty if typed else None, body)
    return ("A", debruijn(t.fn, typed, _bound), debruijn(t.arg, typed, _bound))


def alpha_eq(t1: Term, t2: Term) -> bool:
    return debruijn(t1) == debruijn(t2)


class TooManyVariablesError(ValueError):
    pass


def pool_name(i: int) -> str:
    return f"x{i}"


_POOL = re.compile(r"^x([1-9][0-9]*)$")


def _rn(t: Term, ren: dict[str, str], xi: int | None) -> Term:
    if isinstance(t, Var):
        return Var(ren[t.name])
    if isinstance(t, App):
        return App(_rn(t.fn, ren, xi), _rn(t.arg, ren, xi))
    fv_body = free_vars(t.body)
    if t.var is None or t.var not in fv_body:
        inner = {x: ren[x] for x in fv_body if x != t.var}
        return Lam(None, t.ty, _rn(t.body, inner, xi))
    used = {ren[x] for x in fv_body if x != t.var}
    i = 1
    while pool_name(i) in used:
        i += 1
    if xi is not None and i > xi:
        raise TooManyVariablesError(f"renaming needs more than {xi} variables")
    inner = {x: ren[x] for x in fv_body if x != t.var}
    inner[t.var] = pool_name(i)
    return Lam(pool_name(i), t.ty, _rn(t.body, inner, xi))


def rename_term(t: Term, xi: int | None = None) -> Term:
    """The canonical α-variant: least fresh pool name at each used binder,
    unused binders replaced by *.  Free pool names are kept; other free
    names are mapped to the least unused pool names in sorted order."""
    fv = sorted(free_vars(t))
    ren: dict[str, str] = {}
    taken = {x for x in fv if _POOL.match(x)}
    for x in fv:
        if x in taken:
            ren[x] = x
    i = 1
    for x in fv:
        if x in ren:
            continue
        while pool_name(i) in taken:
            i += 1
        ren[x] = pool_name(i)
        taken.add(ren[x])
    if xi is not None and any(int(_POOL.match(v).group(1)) > xi for v in ren.values()):
        raise TooManyVariablesError(f"free variables do not fit in x1..x{xi}")
    return _rn(t, ren, xi)


def num_vars(t: Term) -> int:
    """#V(t): the least number of variable names of an α-variant of t."""
    return len(var_set(rename_term(t)))


# tree encoding

APP = "app"


def lam_label(var: str | None, ty: Type) -> str:
    return f"lam{{{'*' if var is None else var}:{type_str(ty)}}}"


_LAM_LABEL = re.compile(r"^lam\{(\*|[A-Za-z][A-Za-z0-9_]*):(.+)\}$")


def term_to_tree(t: Term) -> Tree:
    if isinstance(t, Var):
        return Tree(t.name)
    if isinstance(t, Lam):
        if t.ty is None:
            raise NotTypableError("tree encoding needs typed binders")
        return Tree(lam_label(t.var, t.ty), [term_to_tree(t.body)])
    return Tree(APP, [term_to_tree(t.fn), term_to_tree(t.arg)])


def embed(tree: Tree) -> Term:
    """The syntax-tree reading e of a λ-alphabet tree."""
    if tree.label == APP:
        if len(tree.children) != 2:
            raise LambdaSyntaxError("app takes two children")
        return App(embed(tree.children[0]), embed(tree.children[1]))
    m = _LAM_LABEL.match(tree.label)
    if m:
        if len(tree.children) != 1:
            raise LambdaSyntaxError("a lambda node takes one child")
        var = None if m.group(1) == "*" else m.group(1)
        return Lam(var, parse_type(m.group(2)), embed(tree.children[0]))
    if tree.children:
        raise LambdaSyntaxError(f"variable {tree.label} with children")
    return Var(tree.label)


def rename_canonical(t: Term, xi: int | None = None) -> Tree:
    """rn: the grammar tree representing the α-class of `t`."""
    return term_to_tree(rename_term(t, xi))


# ---------------------------------------------------------------------------
# β-reduction on named terms

def _fresh(avoid: set[str], base: str) -> str:
    i = 1
    while f"{base}_{i}" in avoid:
        i += 1
    return f"{base}_{i}"


def substitute(t: Term, x: str, s: Term) -> Term:
    """Capture-avoiding t[s/x]."""
    fv_s = free_vars(s)

    def go(u: Term) -> Term:
        if isinstance(u, Var):
            return s if u.name == x else u
        if isinstance(u, App):
            return App(go(u.fn), go(u.arg))
        if u.var == x:
            return u
        if x not in free_vars(u.body):
            return u
        if u.var is not None and u.var in fv_s:
            new = _fresh(fv_s | free_vars(u.body) | {x}, u.var)
            body = substitute(u.body, u.var, Var(new))
            return Lam(new, u.ty, go(body))
        return Lam(u.var, u.ty, go(u.body))

    return go(t)


def contract(redex: App) -> Term:
    lam = redex.fn
    if lam.var is None:
        return lam.body
    return substitute(lam.body, lam.var, redex.arg)


def beta_step_all(t: Term) -> list[Term]:
    """Every one-step β-reduct of `t`, one per redex position, distinct up to α."""
    out: list[Term] = []

    def go(u: Term) -> list[Term]:
        res: list[Term] = []
        if isinstance(u, Var):
            return res
        if isinstance(u, Lam):
            return [Lam(u.var, u.ty, b) for b in go(u.body)]
        if isinstance(u.fn, Lam):
            res.append(contract(u))
        res.extend(App(f, u.arg) for f in go(u.fn))
        res.extend(App(u.fn, a) for a in go(u.arg))
        return res

    seen = set()
    for r in go(t):
        key = debruijn(r)
        if key not in seen:
            seen.add(key)
            out.append(r)
    return out


# ---------------------------------------------------------------------------
# β-reduction lengths on nameless terms
#
# Nameless terms: int (bound index, or free when >= depth), ("L", body) or
# ("A", fn, arg).  Binder types do not affect reduction.

def nameless(t: Term) -> object:
    fv = sorted(free_vars(t))

    def go(u: Term, bound: tuple) -> object:
        if isinstance(u, Var):
            for i, x in enumerate(bound):
                if x == u.name:
                    return i
            return len(bound) + fv.index(u.name)
        if isinstance(u, Lam):
            return ("L", go(u.body, (u.var,) + bound))
        return ("A", go(u.fn, bound), go(u.arg, bound))

    return go(t, ())


def _shift(t, d: int, cutoff: int = 0):
    if isinstance(t, int):
        return t + d if t >= cutoff else t
    if t[0] == "L":
        return ("L", _shift(t[1], d, cutoff + 1))
    return ("A", _shift(t[1], d, cutoff), _shift(t[2], d, cutoff))


def _subst(t, j: int, s):
    """t[s/j], where s is already valid at t's top level."""
    if isinstance(t, int):
        return s if t == j else t
    if t[0] == "L":
        return ("L", _subst(t[1], j + 1, _shift(s, 1)))
    return ("A", _subst(t[1], j, s), _subst(t[2], j, s))


def _beta(body, arg):
    return _shift(_subst(body, 0, _shift(arg, 1)), -1)


def _occurs(t, j: int) -> bool:
    stack = [(t, j)]
    while stack:
        u, k = stack.pop()
        if isinstance(u, int):
            if u == k:
                return True
        elif u[0] == "L":
            stack.append((u[1], k + 1))
        else:
            stack.append((u[1], k))
            stack.append((u[2], k))
    return False


def _is_normal(t) -> bool:
    stack = [t]
    while stack:
        u = stack.pop()
        if isinstance(u, int):
            continue
        if u[0] == "L":
            stack.append(u[1])
        else:
            if not isinstance(u[1], int) and u[1][0] == "L":
                return False
            stack.append(u[1])
            stack.append(u[2])
    return True


def _spine(t):
    args = []
    while not isinstance(t, int) and t[0] == "A":
        args.append(t[2])
        t = t[1]
    args.reverse()
    return t, args


def _apply(head, args):
    for a in args:
        head = ("A", head, a)
    return head


def _reducts(t):
    """All one-step reducts of a nameless term."""
    if isinstance(t, int):
        return []
    if t[0] == "L":
        return [("L", b) for b in _reducts(t[1])]
    out = []
    if not isinstance(t[1], int) and t[1][0] == "L":
        out.append(_beta(t[1][1], t[2]))
    out.extend(("A", f, t[2]) for f in _reducts(t[1]))
    out.extend(("A", t[1], a) for a in _reducts(t[2]))
    return out


class BetaBudgetExceeded(RuntimeError):
    def __init__(self, lower_bound: int, states: int):
        self.lower_bound = lower_bound
        self.states = states
        super().__init__(f"state budget exceeded after {states} states; beta >= {lower_bound}")


@dataclass(frozen=True)
class BetaResult:
    length: int
    exact: bool
    states: int

    def __str__(self) -> str:
        return str(self.length) if self.exact else f">= {self.length} (lower bound)"


class _OutOfBudget(Exception):
    pass


def _longest(t, memo: dict, budget: int) -> int:
    """Maximal reduction length of a strongly normalizing nameless term.

    Each clause is exact:
      beta(\\P) = beta(P) and beta(x R1..Rn) = sum beta(Ri), the parts being independent;
      (\\P) Q R with the variable unused in P: 1 + beta(Q) + beta(P R), since
      steps in Q are discarded by the contraction and steps elsewhere commute;
      (\\P) Q R with the variable used: 1 + beta(P[Q] R).  Steps in P or R
      commute with the contraction, and a step in Q taken first is matched by
      at least one step in the copies of Q inside P[Q], so contracting first
      is never shorter.
    Head positions are followed in a loop, so deep reductions do not recurse.
    """
    chain: list[tuple[object, int]] = []
    acc = 0
    u = t
    while True:
        hit = memo.get(u)
        if hit is not None:
            acc += hit
            break
        if len(memo) + len(chain) >= budget:
            raise _OutOfBudget
        chain.append((u, acc))
        if isinstance(u, int):
            break
        if u[0] == "L":
            u = u[1]
            continue
        head, args = _spine(u)
        if isinstance(head, int):
            acc += sum(_longest(a, memo, budget) for a in args)
            break
        body, q, rest = head[1], args[0], args[1:]
        if _occurs(body, 0):
            acc += 1
            u = _apply(_beta(body, q), rest)
        else:
            acc += 1 + _longest(q, memo, budget)
            u = _apply(_shift(body, -1, 1), rest)
    for term, before in chain:
        memo[term] = acc - before
    return acc


def _perpetual_step(t):
    """One step of the leftmost perpetual strategy, or None at a normal form."""
    if isinstance(t, int):
        return None
    if t[0] == "L":
        b = _perpetual_step(t[1])
        return None if b is None else ("L", b)
    head, args = _spine(t)
    if isinstance(head, int):
        for i, a in enumerate(args):
            a2 = _perpetual_step(a)
            if a2 is not None:
                return _apply(head, args[:i] + [a2] + args[i + 1 :])
        return None
    body, q, rest = head[1], args[0], args[1:]
    if _occurs(body, 0) or _is_normal(q):
        return _apply(_beta(body, q), rest)
    return _apply(("A", head, _perpetual_step(q)), rest)


def strategy_length(t: Term | object, max_steps: int = 10**7) -> int:
    """Length of the leftmost perpetual reduction of `t` to normal form."""
    u = t if isinstance(t, (int, tuple)) else nameless(t)
    steps = 0
    while steps < max_steps:
        u = _perpetual_step(u)
        if u is None:
            return steps
        steps += 1
    return steps


def beta_max_len(t: Term, budget: int = 10**6, strict: bool = False) -> BetaResult:
    """β(t), the maximum length of a β-reduction sequence from `t`.

    Exact via memoized search while at most `budget` distinct states are
    visited; otherwise the perpetual-strategy length is returned as a lower
    bound (or raised with `strict`).
    """
    u = nameless(t)
    memo: dict = {}
    try:
        return BetaResult(_longest(u, memo, budget), True, len(memo))
    except _OutOfBudget:
        lb = strategy_length(u)
        if strict:
            raise BetaBudgetExceeded(lb, len(memo)) from None
        return BetaResult(lb, False, len(memo))


def exp_tower(k: int, x: int) -> int:
    """exp_k(x): exp_0(x) = x, exp_{k+1}(x) = 2 ** exp_k(x)."""
    for _ in range(k):
        x = 2**x
    return x


# ---------------------------------------------------------------------------
# explosive terms

def twice(k: int) -> Term:
    """Tw_k = \\f:τ_{k-1}. \\x:τ_{k-2}. f (f x)."""
    if k < 2:
        raise ValueError("Tw_k is defined for k >= 2")
    return Lam("f", twice_type(k - 1), Lam("x", twice_type(k - 2), App(Var("f"), App(Var("f"), Var("x")))))


def duplicator() -> Term:
    return Lam("x", O, App(App(Lam("x", O, Lam(None, O, Var("x"))), Var("x")), Var("x")))


def identity() -> Term:
    return Lam("x", O, Var("x"))


def fold_app(t: Term, n: int, base: Term) -> Term:
    """t(t(..(t base))) with n copies of t."""
    out = base
    for _ in range(n):
        out = App(t, out)
    return out


def explosive(m: int, k: int) -> Term:
    """Expl_m^k; for k = 2 the chain Tw_{k-1} .. Tw_2 is empty: \\x.(Tw_2^m D)(I x)."""
    if m < 1 or k < 2:
        raise ValueError("explosive terms need m >= 1 and k >= 2")
    ix = App(identity(), Var("x"))
    if k == 2:
        body = App(fold_app(twice(2), m, duplicator()), ix)
        return Lam("x", O, body)
    head = fold_app(twice(k), m, twice(k - 1))
    for j in range(k - 2, 1, -1):
        head = App(head, twice(j))
    return Lam("x", O, App(App(head, duplicator()), ix))


# ---------------------------------------------------------------------------
# the grammar G(δ,ι,ξ)

Env = tuple  # sorted tuple of (pool name, Type)


def nt_name(env: Env, ty: Type) -> str:
    binds = ",".join(f"{x}:{type_str(t)}" for x, t in env)
    return f"N{{{binds}|-{type_str(ty)}}}"


def _env_key(env: Iterable[tuple[str, Type]]) -> Env:
    return tuple(sorted(env, key=lambda b: int(b[0][1:])))


@dataclass(frozen=True)
class LambdaGrammar:
    grammar: Grammar
    nt_map: dict[str, tuple[Env, Type]]
    params: tuple[int, int, int]
    notes: tuple[str, ...] = field(default=())

    def closed_nonterminals(self) -> list[str]:
        return sorted(n for n, (env, _) in self.nt_map.items() if not env)

    def nonterminal(self, env: Iterable[tuple[str, Type]], ty: Type) -> str:
        return nt_name(_env_key(env), ty)


class NonterminalCapError(RuntimeError):
    pass


def build_lambda_grammar(delta: int, iota: int, xi: int, nt_cap: int = 100_000) -> LambdaGrammar:
    """G(δ,ι,ξ): nonterminals N_{Γ|-τ} with non-empty term sets."""
    tys = types_up_to(delta, iota)
    tyset = set(tys)
    bind_tys = types_up_to(delta - 1, iota)
    pool = [pool_name(i) for i in range(1, xi + 1)]
    envs: list[Env] = []
    for choice in itertools.product([None] + bind_tys, repeat=xi):
        envs.append(tuple((x, t) for x, t in zip(pool, choice) if t is not None))
    if len(envs) * len(tys) > nt_cap:
        raise NonterminalCapError(f"{len(envs) * len(tys)} candidate nonterminals exceed the cap {nt_cap}")

    # Candidate rules as (lhs, label, children) over (env, type) pairs.
    cand: list[tuple[tuple[Env, Type], str, tuple[tuple[Env, Type], ...]]] = []
    for env in envs:
        dom = {x for x, _ in env}
        for ty in tys:
            lhs = (env, ty)
            if len(env) == 1 and env[0][1] == ty:
                cand.append((lhs, env[0][0], ()))
            if isinstance(ty, Arrow):
                sigma, tau = ty.arg, ty.res
                cand.append((lhs, lam_label(None, sigma), ((env, tau),)))
                free = [x for x in pool if x not in dom]
                if free:
                    x = free[0]
                    cand.append((lhs, lam_label(x, sigma), ((_env_key(env + ((x, sigma),)), tau),)))
            for sigma in tys:
                fn_ty = Arrow(sigma, ty)
                if fn_ty not in tyset:
                    continue
                # Each binding goes left, right, or both.
                for split in itertools.product((1, 2, 3), repeat=len(env)):
                    g1 = tuple(b for b, s in zip(env, split) if s & 1)
                    g2 = tuple(b for b, s in zip(env, split) if s & 2)
                    cand.append((lhs, APP, ((g1, fn_ty), (g2, sigma))))

    nonempty: set[tuple[Env, Type]] = set()
    changed = True
    while changed:
        changed = False
        for lhs, _, kids in cand:
            if lhs not in nonempty and all(k in nonempty for k in kids):
                nonempty.add(lhs)
                changed = True
    if not nonempty:
        raise EmptyLanguageError(f"G({delta},{iota},{xi}) has no non-empty nonterminal")
    terminals: dict[str, int] = {APP: 2}
    for x in pool:
        terminals[x] = 0
    for sigma in bind_tys:
        terminals[lam_label(None, sigma)] = 1
        for x in pool:
            terminals[lam_label(x, sigma)] = 1
    rules = []
    for lhs, label, kids in cand:
        if lhs in nonempty and all(k in nonempty for k in kids):
            rules.append(Rule(nt_name(*lhs), Tree(label, [Tree(nt_name(*k)) for k in kids])))
    g = Grammar(terminals, rules)
    nt_map = {nt_name(*p): p for p in nonempty}
    return LambdaGrammar(g, nt_map, (delta, iota, xi))


def restrict_reachable(lg: LambdaGrammar) -> LambdaGrammar:
    """E(δ,ι,ξ): nonterminals reachable from some closed-environment nonterminal."""
    g = lg.grammar
    edges = occurrence_graph(g)
    keep: set[str] = set()
    for n in lg.closed_nonterminals():
        keep |= _closure(edges, n)
    rules = [r for r in g.rules if r.lhs in keep]
    g2 = Grammar(dict(g.alphabet), rules)
    return LambdaGrammar(g2, {n: p for n, p in lg.nt_map.items() if n in keep}, lg.params, lg.notes)


def term_nonterminal(lg: LambdaGrammar, t: Term) -> str:
    """The nonterminal N_{Γ|-τ} whose language holds rn(t), for a closed or pool-named term."""
    j = typecheck(t)
    name = nt_name(_env_key(j.env), j.type)
    if name not in lg.nt_map:
        raise GrammarError(f"{term_str(t)} lies outside G{lg.params}")
    return name


__all__ = [
    "O", "Arrow", "arrow", "type_str", "parse_type", "order", "iar", "types_up_to", "twice_type",
    "Var", "Lam", "App", "term_size", "free_vars", "var_set", "term_str", "parse_term",
    "Judgment", "typecheck", "judgment_order", "judgment_iar", "LambdaTypeError", "TypeClashError",
    "NotTypableError", "LambdaSyntaxError", "debruijn", "alpha_eq", "num_vars", "rename_term",
    "rename_canonical", "embed", "term_to_tree", "TooManyVariablesError", "substitute", "beta_step_all",
    "nameless", "beta_max_len", "BetaResult", "BetaBudgetExceeded", "strategy_length", "exp_tower",
    "twice", "duplicator", "identity", "fold_app", "explosive", "nt_name", "LambdaGrammar",
    "build_lambda_grammar", "restrict_reachable", "term_nonterminal", "NonterminalCapError",
]
