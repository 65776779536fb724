"""Monte-Carlo harness: random words against growing patterns, subcontext
containment in uniformly sampled trees, and the explosive-pattern trend
experiment over bounded λ-terms."""

from __future__ import annotations

import csv
import io
import math
import warnings
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .counting import CountTable, EmptySliceError, build_counts, sample_uniform, stream_rng
from .lam import build_lambda_grammar, explosive, rename_canonical, restrict_reachable, term_size
from .rtg import enumerate_trees
from .trees import Tree, find_subword, is_subcontext

CSV_HEADER = ("n", "m", "pattern_size", "samples", "contains", "frequency", "wilson_lo", "wilson_hi", "seed")

DEFAULT_CHUNK = 250


class ConfigError(ValueError):
    pass


class PatternNotInLanguageWarning(UserWarning):
    pass


def wilson(k: int, n: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for k successes out of n."""
    if n <= 0:
        return (0.0, 1.0)
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return (lo, hi)


def pattern_scale(n: int, p: float) -> int:
    """m = ceil(p * log2 n)."""
    return math.ceil(p * math.log2(n)) if n > 1 else 0


@dataclass(frozen=True)
class TrendRow:
    n: int
    m: int
    pattern_size: int
    samples: int
    contains: int
    seed: int

    @property
    def frequency(self) -> float | None:
        return self.contains / self.samples if self.samples else None

    @property
    def wilson(self) -> tuple[float, float]:
        return wilson(self.contains, self.samples)

    def csv_fields(self) -> list[str]:
        if not self.samples:
            return [str(self.n), str(self.m), str(self.pattern_size), "0", "0", "", "", "", str(self.seed)]
        lo, hi = self.wilson
        return [
            str(self.n), str(self.m), str(self.pattern_size), str(self.samples), str(self.contains),
            f"{self.frequency:.6f}", f"{lo:.6f}", f"{hi:.6f}", str(self.seed),
        ]


@dataclass
class TrendReport:
    rows: list[TrendRow] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow(r.csv_fields())
        return buf.getvalue()

    def write_csv(self, path: str) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())

    def trend_violations(self) -> list[tuple[int, int]]:
        """Consecutive sampled sizes whose frequency drops with disjoint 95% intervals."""
        rows = [r for r in self.rows if r.samples]
        bad = []
        for a, b in zip(rows, rows[1:]):
            if b.frequency < a.frequency and b.wilson[1] < a.wilson[0]:
                bad.append((a.n, b.n))
        return bad


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    samples: int = 2000
    sizes: tuple[int, ...] = (50, 100, 200, 400)
    p: float = 0.15
    k: int = 2
    bounds: tuple[int, int, int] = (2, 2, 2)
    output: str | None = None
    workers: int = 1
    chunk: int = DEFAULT_CHUNK

    def __post_init__(self):
        if self.samples < 1:
            raise ConfigError("samples must be at least 1")
        if not self.sizes or list(self.sizes) != sorted(set(self.sizes)):
            raise ConfigError("sizes must be a non-empty ascending list")
        if not self.p > 0:
            raise ConfigError("p must be positive")
        if self.k < 2:
            raise ConfigError("k must be at least 2")
        if self.workers < 1 or self.chunk < 1:
            raise ConfigError("workers and chunk must be positive")


# ---------------------------------------------------------------------------
# deterministic parallel counting

def _stream_id(tag: int, chunk: int) -> int:
    return (tag << 32) | chunk


def parallel_count(
    total: int, trial: Callable[[object], bool], seed: int, tag: int = 0,
    workers: int = 1, chunk: int = DEFAULT_CHUNK,
) -> int:
    """Number of successful trials among `total`.

    Trial i belongs to chunk i // chunk; each chunk draws from its own stream
    (seed, tag, chunk index), so the result does not depend on `workers`.
    """
    bounds = [(c, min(chunk, total - c * chunk)) for c in range((total + chunk - 1) // chunk)]

    def run(job: tuple[int, int]) -> int:
        c, count = job
        rng = stream_rng(seed, _stream_id(tag, c))
        return sum(1 for _ in range(count) if trial(rng))

    if workers == 1 or len(bounds) <= 1:
        return sum(map(run, bounds))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return sum(pool.map(run, bounds))


# ---------------------------------------------------------------------------
# words

def monkey_words(
    alphabet: Sequence[str], pattern_family: Callable[[int], Sequence[str]], sizes: Sequence[int],
    samples: int, seed: int, p: float = 1.0, workers: int = 1, chunk: int = DEFAULT_CHUNK,
) -> TrendReport:
    """Frequency of pattern(ceil(p log2 n)) as a factor of uniform words of length n."""
    if samples < 1:
        raise ConfigError("samples must be at least 1")
    letters = list(alphabet)
    report = TrendReport()
    for n in sizes:
        m = pattern_scale(n, p)
        pat = tuple(pattern_family(m))

        def trial(rng, n=n, pat=pat) -> bool:
            w = tuple(rng.choice(letters) for _ in range(n))
            return find_subword(w, pat)

        hits = parallel_count(samples, trial, seed, n, workers, chunk)
        report.rows.append(TrendRow(n, m, len(pat), samples, hits, seed))
    return report


def repeat_pattern(unit: Sequence[str]) -> Callable[[int], tuple[str, ...]]:
    """m -> unit repeated floor(m / len(unit)) times, e.g. "ab" * (m // 2)."""
    unit = tuple(unit)

    def family(m: int) -> tuple[str, ...]:
        return unit * (m // len(unit)) if unit else ()

    return family


# ---------------------------------------------------------------------------
# trees

@dataclass(frozen=True)
class ContainmentResult:
    contains: int
    samples: int
    exact: bool

    @property
    def frequency(self) -> float:
        return self.contains / self.samples if self.samples else 0.0


def containment_probability(
    table: CountTable, N: str, n: int, pattern: Tree, samples: int = 1000, seed: int = 0,
    exact: bool = False, exact_bound: int = 100_000, workers: int = 1, chunk: int = DEFAULT_CHUNK,
) -> ContainmentResult:
    """Share of L_n(G, N) containing `pattern` as a subcontext.

    With `exact`, all of L_n is enumerated (refused above `exact_bound` trees);
    otherwise `samples` uniform draws are tested.
    """
    total = table.count_trees(N, n)
    if total == 0:
        raise EmptySliceError(f"L_{n}({N}) is empty")
    if exact:
        if total > exact_bound:
            raise ValueError(f"|L_{n}({N})| = {total} exceeds the exact-mode bound {exact_bound}")
        trees = enumerate_trees(table.grammar, N, n)
        return ContainmentResult(sum(1 for t in trees if is_subcontext(pattern, t)), len(trees), True)
    if samples < 1:
        raise ConfigError("samples must be at least 1")

    def trial(rng) -> bool:
        return is_subcontext(pattern, sample_uniform(table, N, n, rng))

    return ContainmentResult(parallel_count(samples, trial, seed, n, workers, chunk), samples, False)


def sample_coproduct(table: CountTable, roots: Sequence[str], n: int, rng) -> tuple[str, Tree]:
    """A uniform element of the disjoint union of L_n(N) over `roots`."""
    weights = [table.count_trees(N, n) for N in roots]
    total = sum(weights)
    if total == 0:
        raise EmptySliceError(f"no tree of size {n}")
    r = rng.randrange(total)
    for N, w in zip(roots, weights):
        if r < w:
            return N, sample_uniform(table, N, n, rng)
        r -= w
    raise AssertionError("unreachable")


def explosive_pattern(m: int, k: int, xi: int) -> Tree:
    return rename_canonical(explosive(m, k), xi)


def run_main_experiment(cfg: ExperimentConfig, table: CountTable | None = None) -> TrendReport:
    """Containment frequency of the explosive pattern in uniform closed terms of size n."""
    delta, iota, xi = cfg.bounds
    if min(delta, iota) < cfg.k or xi < 2:
        warnings.warn(
            f"Expl^{cfg.k} lies outside the terms bounded by {cfg.bounds}; frequencies will be 0",
            PatternNotInLanguageWarning,
            stacklevel=2,
        )
    if table is None:
        lg = restrict_reachable(build_lambda_grammar(delta, iota, xi))
        table = build_counts(lg.grammar, max(cfg.sizes), contexts=False)
        roots = lg.closed_nonterminals()
    else:
        roots = sorted(N for N in table.grammar.nonterminals if N.startswith("N{|-"))
    report = TrendReport()
    for n in cfg.sizes:
        m = pattern_scale(n, cfg.p)
        term = explosive(max(m, 1), cfg.k)
        try:
            pattern = rename_canonical(term, xi)
        except ValueError:
            pattern = None
        psize = term_size(term)
        if sum(table.count_trees(N, n) for N in roots) == 0:
            report.rows.append(TrendRow(n, m, psize, 0, 0, cfg.seed))
            continue
        if pattern is None:
            report.rows.append(TrendRow(n, m, psize, cfg.samples, 0, cfg.seed))
            continue

        def trial(rng, n=n, pattern=pattern) -> bool:
            _, t = sample_coproduct(table, roots, n, rng)
            return is_subcontext(pattern, t)

        hits = parallel_count(cfg.samples, trial, cfg.seed, n, cfg.workers, cfg.chunk)
        report.rows.append(TrendRow(n, m, psize, cfg.samples, hits, cfg.seed))
    if cfg.output:
        report.write_csv(cfg.output)
    return report
