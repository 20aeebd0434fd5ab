"""Pair selection over the compatibility matrix.

The main strategy solves maximum-weight perfect matching on the complete
bipartite graph of generated x retrieved passages with an O(n^3)
Hungarian algorithm (shortest augmenting paths over dual potentials,
weights negated internally). Unequal pools are first equalized by cyclic
duplication so every passage is used at least once. Greedy, random, and
same-answer-oracle strategies are provided as baselines.

Determinism contract: equal-weight matchings resolve to the
lexicographically smallest (lp_index, rp_index) sequence, and the final
pair list is sorted by combined score, descending, ties by index. All
weight totals are exactly-rounded sums (math.fsum), so equality
comparisons do not depend on summation order.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .corpus import QAExample, contains_answer
from .errors import ContractViolation
from .scoring import CompatibilityMatrix, PairType, classify_pair

Pair = tuple[int, int, float]


class Strategy(Enum):
    OPTIMAL = "optimal"
    GREEDY = "greedy"
    RANDOM = "random"
    SAME_ANSWER = "same-answer"


@dataclass(frozen=True)
class PairMatching:
    question_id: str
    strategy: Strategy
    pairs: tuple[Pair, ...]
    total_weight: float

    def to_record(self) -> dict:
        return {
            "question_id": self.question_id,
            "strategy": self.strategy.value,
            "pairs": [[i, j, s] for i, j, s in self.pairs],
            "total_weight": self.total_weight,
        }


@dataclass(frozen=True)
class WeightedBipartiteGraph:
    """Complete bipartite weight grid, plus the original index of every
    (possibly duplicated) row and column."""

    m: int
    n: int
    weights: tuple[tuple[float, ...], ...]
    row_origin: tuple[int, ...]
    col_origin: tuple[int, ...]

    @classmethod
    def from_weights(cls, weights: Sequence[Sequence[float]]) -> "WeightedBipartiteGraph":
        rows = tuple(tuple(float(w) for w in row) for row in weights)
        m = len(rows)
        if m == 0 or any(len(row) != len(rows[0]) for row in rows):
            raise ContractViolation("weight grid must be non-empty and rectangular")
        n = len(rows[0])
        return cls(m=m, n=n, weights=rows, row_origin=tuple(range(m)), col_origin=tuple(range(n)))

    @property
    def is_square(self) -> bool:
        return self.m == self.n


def _cyclic(k: int, size: int) -> tuple[int, ...]:
    return tuple(i % size for i in range(k))


def equalize_weights(weights: Sequence[Sequence[float]]) -> WeightedBipartiteGraph:
    """Cyclically replicate rows (M<N) or columns (M>N) until square."""
    m, n = len(weights), len(weights[0])
    k = max(m, n)
    row_origin = _cyclic(k, m)
    col_origin = _cyclic(k, n)
    grid = tuple(tuple(float(weights[ri][cj]) for cj in col_origin) for ri in row_origin)
    return WeightedBipartiteGraph(m=k, n=k, weights=grid, row_origin=row_origin, col_origin=col_origin)


def equalize_pools(matrix: CompatibilityMatrix) -> WeightedBipartiteGraph:
    if not matrix.complete:
        raise ContractViolation(f"{matrix.question_id}: cannot match an incomplete matrix")
    return equalize_weights(matrix.combined_grid())


def equalize_pair_types(matrix: CompatibilityMatrix) -> tuple[tuple[PairType, ...], ...]:
    """Pair-type grid expanded with the same cyclic duplication as the weights."""
    if not matrix.complete:
        raise ContractViolation(f"{matrix.question_id}: cannot classify an incomplete matrix")
    k = max(matrix.m, matrix.n)
    row_origin = _cyclic(k, matrix.m)
    col_origin = _cyclic(k, matrix.n)
    return tuple(
        tuple(classify_pair(matrix.cell(ri, cj)) for cj in col_origin) for ri in row_origin
    )


def _sorted_pairs(pairs: Sequence[Pair]) -> tuple[Pair, ...]:
    return tuple(sorted(pairs, key=lambda p: (-p[2], p[0], p[1])))


def _solve_min_assignment(cost: Sequence[Sequence[float]]):
    """Square assignment problem, minimization.

    Shortest-augmenting-path Hungarian with potentials; O(n^3). Returns
    (cols_by_row, u, v) where u/v are the final dual potentials indexed
    from 0. Matched edges are tight (cost - u - v == 0) up to float
    rounding; the duals certify optimality.
    """
    n = len(cost)
    INF = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)  # p[j]: 1-based row matched to 1-based column j
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = INF
            j1 = -1
            row = cost[i0 - 1]
            ui = u[i0]
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - ui - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    cols_by_row = [0] * n
    for j in range(1, n + 1):
        if p[j]:
            cols_by_row[p[j] - 1] = j - 1
    return cols_by_row, [u[i] for i in range(1, n + 1)], [v[j] for j in range(1, n + 1)]


def _tight_perfect_matching(rows, cols, tight):
    """Perfect matching of ``rows`` into ``cols`` using only tight edges
    (Kuhn's augmenting paths), or None. Columns are tried in ascending
    order for determinism."""
    match_col: dict[int, int] = {}

    def try_assign(r: int, visited: set[int]) -> bool:
        for c in cols:
            if c in visited or not tight[r][c]:
                continue
            visited.add(c)
            if c not in match_col or try_assign(match_col[c], visited):
                match_col[c] = r
                return True
        return False

    for r in rows:
        if not try_assign(r, set()):
            return None
    return {r: c for c, r in match_col.items()}


def match_optimal(graph: WeightedBipartiteGraph, question_id: str = "") -> PairMatching:
    """Maximum-weight perfect matching with deterministic tie-breaking.

    After the Hungarian solve, ties are resolved row by row toward the
    lexicographically smallest column sequence: a smaller column is
    adopted only when a perfect matching on dual-tight edges completes it
    to the same exactly-rounded total. Under exact arithmetic this yields
    the true lexicographic minimum; float dust can only make the result
    fall back to the (still optimal, still deterministic) base solution.
    """
    if not graph.is_square:
        raise ContractViolation(f"matching requires a square graph, got {graph.m}x{graph.n}")
    k = graph.m
    weights = graph.weights
    cost = [[-w for w in row] for row in weights]
    base_cols, u, v = _solve_min_assignment(cost)
    wstar = math.fsum(weights[i][base_cols[i]] for i in range(k))
    tight = [[cost[i][j] - u[i] - v[j] == 0.0 for j in range(k)] for i in range(k)]

    assign = list(base_cols)
    avail = set(range(k))
    chosen = [0] * k
    prefix: list[float] = []
    for i in range(k):
        c0 = assign[i]
        pick = c0
        for c in sorted(avail):
            if c >= c0:
                break
            if not tight[i][c]:
                continue
            rest_rows = list(range(i + 1, k))
            rest_cols = sorted(avail - {c})
            completion = _tight_perfect_matching(rest_rows, rest_cols, tight)
            if completion is None:
                continue
            total = math.fsum(
                prefix + [weights[i][c]] + [weights[r][completion[r]] for r in rest_rows]
            )
            if total == wstar:
                pick = c
                for r in rest_rows:
                    assign[r] = completion[r]
                break
        chosen[i] = pick
        prefix.append(weights[i][pick])
        avail.discard(pick)

    pairs = [
        (graph.row_origin[i], graph.col_origin[chosen[i]], weights[i][chosen[i]])
        for i in range(k)
    ]
    return PairMatching(
        question_id=question_id,
        strategy=Strategy.OPTIMAL,
        pairs=_sorted_pairs(pairs),
        total_weight=wstar,
    )


_GREEDY_TYPE_ORDER = (PairType.COMPATIBLE, PairType.CONFLICTING, PairType.NON_EVIDENTIAL)


def match_greedy(
    graph: WeightedBipartiteGraph,
    types: Sequence[Sequence[PairType]],
    question_id: str = "",
) -> PairMatching:
    """Type-staged greedy baseline: compatible pairs first, then
    conflicting, then non-evidential; within a stage, highest score first
    among rows/columns not used by an earlier pair."""
    if not graph.is_square:
        raise ContractViolation(f"matching requires a square graph, got {graph.m}x{graph.n}")
    k = graph.m
    if len(types) != k or any(len(row) != k for row in types):
        raise ContractViolation("type grid shape must match the graph")
    used_rows: set[int] = set()
    used_cols: set[int] = set()
    selected: list[tuple[int, int]] = []
    for stage in _GREEDY_TYPE_ORDER:
        cells = [
            (i, j)
            for i in range(k)
            for j in range(k)
            if types[i][j] is stage
        ]
        cells.sort(key=lambda ij: (-graph.weights[ij[0]][ij[1]], ij[0], ij[1]))
        for i, j in cells:
            if i not in used_rows and j not in used_cols:
                used_rows.add(i)
                used_cols.add(j)
                selected.append((i, j))
    pairs = [
        (graph.row_origin[i], graph.col_origin[j], graph.weights[i][j]) for i, j in selected
    ]
    return PairMatching(
        question_id=question_id,
        strategy=Strategy.GREEDY,
        pairs=_sorted_pairs(pairs),
        total_weight=math.fsum(graph.weights[i][j] for i, j in selected),
    )


def match_random(m: int, n: int, seed: int, question_id: str = "") -> PairMatching:
    """Pair duplicated rows with a seeded uniform permutation of columns.

    Scores are zero (no matrix is consulted); use ``score_matching`` to
    attribute weights from a grid afterwards.
    """
    if m < 1 or n < 1:
        raise ContractViolation("match_random requires m, n >= 1")
    k = max(m, n)
    row_origin = _cyclic(k, m)
    col_origin = _cyclic(k, n)
    perm = list(range(k))
    random.Random(seed).shuffle(perm)
    pairs = tuple((row_origin[i], col_origin[perm[i]], 0.0) for i in range(k))
    return PairMatching(
        question_id=question_id, strategy=Strategy.RANDOM, pairs=pairs, total_weight=0.0
    )


def match_same_answer(example: QAExample, seed: int) -> PairMatching:
    """Oracle baseline: pair passages that both contain a gold alias
    (ascending index order), pair the rest uniformly at random, and rank
    the answer-bearing pairs first."""
    m, n = example.m, example.n
    if m < 1 or n < 1:
        raise ContractViolation(f"{example.question_id}: same-answer matching needs both pools")
    lp_has = [contains_answer(c, example.answers) for c in example.generated]
    rp_has = [contains_answer(c, example.answers) for c in example.retrieved]
    k = max(m, n)
    row_origin = _cyclic(k, m)
    col_origin = _cyclic(k, n)
    answer_cols = [q for q in range(k) if rp_has[col_origin[q]]]
    ptr = 0
    used_cols: set[int] = set()
    answer_pairs: list[Pair] = []
    rest_rows: list[int] = []
    for p in range(k):
        if lp_has[row_origin[p]] and ptr < len(answer_cols):
            q = answer_cols[ptr]
            ptr += 1
            used_cols.add(q)
            answer_pairs.append((row_origin[p], col_origin[q], 0.0))
        else:
            rest_rows.append(p)
    rest_cols = [q for q in range(k) if q not in used_cols]
    random.Random(seed).shuffle(rest_cols)
    rest_pairs = [(row_origin[p], col_origin[q], 0.0) for p, q in zip(rest_rows, rest_cols)]
    return PairMatching(
        question_id=example.question_id,
        strategy=Strategy.SAME_ANSWER,
        pairs=tuple(answer_pairs + rest_pairs),
        total_weight=0.0,
    )


def score_matching(
    matching: PairMatching, weights: Sequence[Sequence[float]], resort: bool = True
) -> PairMatching:
    """Attribute weights from an original M x N grid to an existing
    matching (used to evaluate random/oracle baselines on the same
    instance the optimal strategy saw)."""
    pairs = [(i, j, float(weights[i][j])) for i, j, _ in matching.pairs]
    out = _sorted_pairs(pairs) if resort else tuple(pairs)
    return PairMatching(
        question_id=matching.question_id,
        strategy=matching.strategy,
        pairs=out,
        total_weight=math.fsum(s for _, _, s in pairs),
    )
