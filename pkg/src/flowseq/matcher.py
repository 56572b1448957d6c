"""Sequence matching on a weighted edit graph.

Two sequences P (length m, horizontal axis) and Q (length n, vertical axis)
span a lattice of nodes V_ij, i in [0, m], j in [0, n]. Horizontal and
vertical steps cost 1; a free diagonal step into (i, j) exists wherever
elements i of P and j of Q match. The minimum-cost path from V_00 to V_mn
then realizes a longest common subsequence: its diagonal steps are the
matched pairs, and similarity is their count over max(m, n).

Forcing an "important" position k of P works by raising every horizontal
edge entering column k to cost m + n. Whenever Q contains an element
matching position k, cheap paths must take that column's diagonal, which
constrains the rest of the alignment; if Q has no such element, the path
pays the inflated edge once and the search degrades gracefully.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .dictionary import Cluster, GestureDictionary, mahalanobis
from .errors import InvalidInputError

# matches(i, j) over 1-based positions of P and Q; must be deterministic and
# side-effect free.
MatchRelation = Callable[[int, int], bool]


def equality_relation(xs: Sequence, ys: Sequence) -> MatchRelation:
    """Symbol equality over two concrete sequences."""
    xs = list(xs)
    ys = list(ys)

    def rel(i: int, j: int) -> bool:
        return xs[i - 1] == ys[j - 1]

    return rel


def cluster_relation(
    clusters: Sequence[Cluster],
    features: Sequence[np.ndarray],
    threshold: float,
) -> MatchRelation:
    """Cluster-feature matching: Mahalanobis distance within ``threshold``."""
    cl = list(clusters)
    fs = [np.asarray(f, dtype=np.float64).ravel() for f in features]

    def rel(i: int, j: int) -> bool:
        return mahalanobis(cl[i - 1], fs[j - 1]) <= threshold

    return rel


@dataclass(frozen=True, eq=False)
class MatchGraph:
    """Edit-graph lattice with match diagonals and important-column costs."""

    m: int
    n: int
    matches: np.ndarray          # (m, n) bool, matches[i-1, j-1]
    important: frozenset[int] = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "important", frozenset(int(i) for i in self.important))
        mat = np.ascontiguousarray(np.asarray(self.matches, dtype=bool))
        if mat.shape != (self.m, self.n):
            raise InvalidInputError("match matrix shape must be (m, n)")
        mat.setflags(write=False)
        object.__setattr__(self, "matches", mat)

    def horizontal_cost(self, i: int) -> int:
        """Cost of any horizontal edge entering column ``i`` (1-based)."""
        return self.m + self.n if i in self.important else 1

    def has_diagonal(self, i: int, j: int) -> bool:
        return bool(self.matches[i - 1, j - 1])

    def diagonals(self) -> Iterable[tuple[int, int]]:
        for i, j in zip(*np.nonzero(self.matches)):
            yield int(i) + 1, int(j) + 1


@dataclass(frozen=True)
class MatchResult:
    """Outcome of one min-cost path search."""

    lcs_length: int
    matched_pairs: tuple[tuple[int, int], ...]
    total_cost: int
    similarity: float
    importance_satisfied: bool


def build_graph(
    m: int,
    n: int,
    relation: MatchRelation,
    important: Iterable[int] = (),
) -> MatchGraph:
    """Evaluate the match relation over the full lattice and fix edge costs."""
    if m < 1 or n < 1:
        raise InvalidInputError("sequence lengths must be >= 1")
    imp = frozenset(int(i) for i in important)
    bad = sorted(i for i in imp if not 1 <= i <= m)
    if bad:
        raise InvalidInputError(f"important indices {bad} outside [1, {m}]")
    matches = np.zeros((m, n), dtype=bool)
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            matches[i - 1, j - 1] = bool(relation(i, j))
    return MatchGraph(m, n, matches, imp)


def similarity(p_len: int, q_len: int, lcs_length: int) -> float:
    """LCS length normalized by the longer sequence length."""
    if p_len < 1 or q_len < 1:
        raise InvalidInputError("sequence lengths must be >= 1")
    if not 0 <= lcs_length <= min(p_len, q_len):
        raise InvalidInputError(
            f"lcs_length {lcs_length} outside [0, {min(p_len, q_len)}]"
        )
    return lcs_length / max(p_len, q_len)


def min_cost_path(g: MatchGraph) -> MatchResult:
    """Dijkstra search for the min-cost corner-to-corner path.

    Runs Dijkstra from V_mn over reversed edges, yielding the cost-to-target
    of every node, then walks forward from V_00 greedily preferring diagonal
    over horizontal over vertical among cost-preserving moves. That order
    makes the witness path the lexicographically smallest move sequence among
    all minimum-cost paths, so results are deterministic.
    """
    m, n = g.m, g.n
    matches = g.matches
    hcost = [0] * (m + 1)
    for i in range(1, m + 1):
        hcost[i] = g.horizontal_cost(i)

    inf = float("inf")
    dist = [[inf] * (n + 1) for _ in range(m + 1)]
    dist[m][n] = 0
    heap = [(0, m, n)]
    while heap:
        d, i, j = heapq.heappop(heap)
        if d > dist[i][j]:
            continue
        if i > 0:
            nd = d + hcost[i]
            if nd < dist[i - 1][j]:
                dist[i - 1][j] = nd
                heapq.heappush(heap, (nd, i - 1, j))
        if j > 0:
            nd = d + 1
            if nd < dist[i][j - 1]:
                dist[i][j - 1] = nd
                heapq.heappush(heap, (nd, i, j - 1))
        if i > 0 and j > 0 and matches[i - 1, j - 1]:
            if d < dist[i - 1][j - 1]:
                dist[i - 1][j - 1] = d
                heapq.heappush(heap, (d, i - 1, j - 1))

    pairs: list[tuple[int, int]] = []
    i = j = 0
    while (i, j) != (m, n):
        if i < m and j < n and matches[i, j] and dist[i + 1][j + 1] == dist[i][j]:
            pairs.append((i + 1, j + 1))
            i += 1
            j += 1
        elif i < m and hcost[i + 1] + dist[i + 1][j] == dist[i][j]:
            i += 1
        else:
            j += 1

    matched_columns = {p[0] for p in pairs}
    return MatchResult(
        lcs_length=len(pairs),
        matched_pairs=tuple(pairs),
        total_cost=int(dist[0][0]),
        similarity=similarity(m, n, len(pairs)),
        importance_satisfied=g.important <= matched_columns,
    )


def recognize(
    dictionary: GestureDictionary,
    features: Sequence[np.ndarray],
) -> list[tuple[str, MatchResult]]:
    """Match a feature sequence against every dictionary entry.

    Returns entries sorted by similarity descending, ties broken by name
    ascending.
    """
    if not dictionary.entries:
        raise InvalidInputError("dictionary has no entries")
    fs = [np.asarray(f, dtype=np.float64).ravel() for f in features]
    if not fs:
        raise InvalidInputError("query feature sequence is empty")
    k = dictionary.eigenspace.k
    if any(f.size != k for f in fs):
        raise InvalidInputError(f"query features must have dimension k={k}")

    results = []
    for entry in dictionary.entries:
        rel = cluster_relation(entry.clusters, fs, dictionary.match_threshold)
        graph = build_graph(len(entry.clusters), len(fs), rel, entry.important)
        results.append((entry.name, min_cost_path(graph)))
    results.sort(key=lambda item: (-item[1].similarity, item[0]))
    return results


def match_result_json(name: str, result: MatchResult) -> dict:
    """JSON-ready form of one ranked result."""
    return {
        "name": name,
        "similarity": result.similarity,
        "lcs_length": result.lcs_length,
        "pairs": [list(p) for p in result.matched_pairs],
        "cost": result.total_cost,
        "important_ok": result.importance_satisfied,
    }
