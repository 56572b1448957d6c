import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowseq import (
    Cluster,
    EigenspaceModel,
    GestureDictionary,
    GestureEntry,
    InvalidInputError,
    build_graph,
    cluster_relation,
    equality_relation,
    fit_cluster,
    match_result_json,
    min_cost_path,
    recognize,
    similarity,
)

X = list("ABCAEFG")
Y = list("AHCIFJ")


def dp_lcs_length(m, n, rel):
    """Classic dynamic-programming LCS oracle under an arbitrary relation."""
    table = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            if rel(i, j):
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    return table[m][n]


def random_pair(rng, max_len=25, alphabet=4):
    xs = rng.integers(0, alphabet, size=rng.integers(1, max_len + 1)).tolist()
    ys = rng.integers(0, alphabet, size=rng.integers(1, max_len + 1)).tolist()
    return xs, ys


class TestBuildGraph:
    def test_reference_diagonals(self):
        g = build_graph(7, 6, equality_relation(X, Y))
        assert set(g.diagonals()) == {(1, 1), (4, 1), (3, 3), (6, 5)}

    def test_important_column_costs(self):
        g = build_graph(7, 6, equality_relation(X, Y), important={4})
        assert g.horizontal_cost(4) == 13  # m + n
        assert all(g.horizontal_cost(i) == 1 for i in (1, 2, 3, 5, 6, 7))

    def test_important_out_of_range(self):
        with pytest.raises(InvalidInputError):
            build_graph(3, 3, equality_relation("abc", "abc"), important={4})

    def test_min_lengths(self):
        with pytest.raises(InvalidInputError):
            build_graph(0, 3, lambda i, j: False)


class TestMinCostPath:
    def test_reference_unfocused(self):
        g = build_graph(7, 6, equality_relation(X, Y))
        res = min_cost_path(g)
        assert res.lcs_length == 3
        assert res.matched_pairs == ((1, 1), (3, 3), (6, 5))
        assert [X[i - 1] for i, _ in res.matched_pairs] == ["A", "C", "F"]
        assert res.similarity == 3 / 7
        assert res.total_cost == 7 + 6 - 2 * 3

    def test_reference_focused_fourth_element(self):
        g = build_graph(7, 6, equality_relation(X, Y), important={4})
        res = min_cost_path(g)
        assert res.lcs_length == 2
        assert res.matched_pairs == ((4, 1), (6, 5))
        assert [X[i - 1] for i, _ in res.matched_pairs] == ["A", "F"]
        assert res.similarity == 2 / 7
        assert res.importance_satisfied

    def test_single_cell_no_match(self):
        g = build_graph(1, 1, lambda i, j: False)
        res = min_cost_path(g)
        assert res.lcs_length == 0
        assert res.total_cost == 2
        assert res.similarity == 0.0
        assert res.importance_satisfied  # vacuous

    def test_identical_sequences_all_diagonal(self):
        seq = list("HELLO")
        g = build_graph(5, 5, equality_relation(seq, seq))
        res = min_cost_path(g)
        assert res.lcs_length == 5
        assert res.total_cost == 0
        assert res.similarity == 1.0
        assert res.matched_pairs == tuple((i, i) for i in range(1, 6))

    def test_lexicographic_tiebreak(self):
        # P=[A,B], Q=[B,A]: two cost-2 witnesses; moves HDV beat VDH, so the
        # matched pair must be (2, 1).
        g = build_graph(2, 2, equality_relation("AB", "BA"))
        res = min_cost_path(g)
        assert res.total_cost == 2
        assert res.matched_pairs == ((2, 1),)

    def test_oracle_equivalence_random(self):
        rng = np.random.default_rng(100)
        for _ in range(300):
            xs, ys = random_pair(rng)
            rel = equality_relation(xs, ys)
            res = min_cost_path(build_graph(len(xs), len(ys), rel))
            oracle = dp_lcs_length(len(xs), len(ys), rel)
            assert res.lcs_length == oracle
            assert res.total_cost == len(xs) + len(ys) - 2 * oracle

    @given(st.data())
    @settings(max_examples=150, deadline=None)
    def test_oracle_equivalence_hypothesis(self, data):
        xs = data.draw(st.lists(st.integers(0, 3), min_size=1, max_size=15))
        ys = data.draw(st.lists(st.integers(0, 3), min_size=1, max_size=15))
        rel = equality_relation(xs, ys)
        res = min_cost_path(build_graph(len(xs), len(ys), rel))
        assert res.lcs_length == dp_lcs_length(len(xs), len(ys), rel)

    def test_matched_pairs_strictly_increasing(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            xs, ys = random_pair(rng, max_len=12, alphabet=3)
            imp = set()
            if len(xs) > 1 and rng.random() < 0.5:
                imp = {int(rng.integers(1, len(xs) + 1))}
            res = min_cost_path(
                build_graph(len(xs), len(ys), equality_relation(xs, ys), imp)
            )
            pairs = res.matched_pairs
            assert all(a[0] < b[0] and a[1] < b[1] for a, b in zip(pairs, pairs[1:]))
            assert res.lcs_length == len(pairs)

    def test_importance_never_increases_lcs_vs_unfocused(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            xs, ys = random_pair(rng, max_len=15, alphabet=3)
            rel = equality_relation(xs, ys)
            base = min_cost_path(build_graph(len(xs), len(ys), rel)).lcs_length
            count = int(rng.integers(1, min(3, len(xs)) + 1))
            imp = set(rng.choice(len(xs), size=count, replace=False) + 1)
            focused = min_cost_path(build_graph(len(xs), len(ys), rel, imp)).lcs_length
            assert focused <= base

    def test_single_important_with_match_is_satisfied(self):
        rng = np.random.default_rng(13)
        for _ in range(200):
            xs, ys = random_pair(rng, max_len=12, alphabet=3)
            rel = equality_relation(xs, ys)
            k = int(rng.integers(1, len(xs) + 1))
            res = min_cost_path(build_graph(len(xs), len(ys), rel, {k}))
            has_match = any(rel(k, j) for j in range(1, len(ys) + 1))
            if has_match:
                assert res.importance_satisfied
            if not res.importance_satisfied:
                assert res.total_cost >= len(xs) + len(ys)

    def test_swap_symmetry_without_importance(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            xs, ys = random_pair(rng, max_len=12, alphabet=3)
            a = min_cost_path(build_graph(len(xs), len(ys), equality_relation(xs, ys)))
            b = min_cost_path(build_graph(len(ys), len(xs), equality_relation(ys, xs)))
            assert a.lcs_length == b.lcs_length


class TestSimilarity:
    def test_reference_ratio(self):
        assert similarity(7, 6, 3) == 3 / 7

    def test_full_match(self):
        assert similarity(5, 5, 5) == 1.0

    def test_no_match(self):
        assert similarity(5, 5, 0) == 0.0

    def test_bounds_validation(self):
        with pytest.raises(InvalidInputError):
            similarity(0, 5, 0)
        with pytest.raises(InvalidInputError):
            similarity(5, 5, 6)


def feature_dictionary(tau=3.0):
    """Three well-separated entries in a 2-D feature space."""
    model = EigenspaceModel(
        mean=np.zeros(2), basis=np.eye(2), eigenvalues=np.array([2.0, 1.0])
    )
    rng = np.random.default_rng(0)

    def entry(name, centers, important=()):
        clusters = tuple(
            fit_cluster([np.array(c) + 0.1 * rng.normal(size=2) for _ in range(5)],
                        ridge=0.01)
            for c in centers
        )
        return GestureEntry(name, clusters, frozenset(important))

    entries = (
        entry("circle", [(0, 0), (10, 0), (20, 0)]),
        entry("slash", [(0, 40), (10, 40)]),
        entry("wave", [(0, 80), (10, 80), (20, 80), (30, 80)]),
    )
    return GestureDictionary(model, entries, tau)


class TestRecognize:
    def test_own_means_rank_first(self):
        d = feature_dictionary()
        for entry in d.entries:
            q = [c.mean for c in entry.clusters]
            ranked = recognize(d, q)
            assert ranked[0][0] == entry.name
            assert ranked[0][1].similarity == 1.0

    def test_far_query_scores_zero(self):
        d = feature_dictionary()
        q = [np.array([1000.0, -1000.0]), np.array([-1000.0, 1000.0])]
        ranked = recognize(d, q)
        assert all(res.similarity == 0.0 for _, res in ranked)
        # all-zero similarities rank by name
        assert [name for name, _ in ranked] == ["circle", "slash", "wave"]

    def test_flagged_absent_action_cannot_score_higher(self):
        # Same clusters; B flags a position missing from the query.
        model = EigenspaceModel(np.zeros(2), np.eye(2), np.array([2.0, 1.0]))
        rng = np.random.default_rng(4)
        centers = [(0.0, 0.0), (6.0, 0.0), (12.0, 0.0)]
        clusters = tuple(
            fit_cluster([np.array(c) + 0.05 * rng.normal(size=2) for _ in range(5)],
                        ridge=0.01)
            for c in centers
        )
        d = GestureDictionary(
            model,
            (
                GestureEntry("plain", clusters),
                GestureEntry("flagged", clusters, frozenset({2})),
            ),
            3.0,
        )
        # Query visits clusters 1 and 3 but skips flagged cluster 2.
        q = [clusters[0].mean, clusters[2].mean]
        ranked = dict(recognize(d, q))
        assert ranked["flagged"].similarity <= ranked["plain"].similarity
        assert not ranked["flagged"].importance_satisfied

    def test_empty_dictionary_rejected(self):
        model = EigenspaceModel(np.zeros(2), np.eye(2), np.array([2.0, 1.0]))
        d = GestureDictionary.__new__(GestureDictionary)
        object.__setattr__(d, "eigenspace", model)
        object.__setattr__(d, "entries", ())
        object.__setattr__(d, "match_threshold", 3.0)
        with pytest.raises(InvalidInputError):
            recognize(d, [np.zeros(2)])

    def test_empty_query_rejected(self):
        with pytest.raises(InvalidInputError):
            recognize(feature_dictionary(), [])

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            recognize(feature_dictionary(), [np.zeros(3)])

    def test_cluster_relation_threshold(self):
        c = fit_cluster([np.zeros(2), np.array([0.2, 0.0]),
                         np.array([0.0, 0.2]), np.array([0.2, 0.2])], ridge=0.01)
        rel = cluster_relation([c], [c.mean, c.mean + 100.0], threshold=3.0)
        assert rel(1, 1)
        assert not rel(1, 2)

    def test_result_json_shape(self):
        d = feature_dictionary()
        q = [c.mean for c in d.entries[0].clusters]
        name, res = recognize(d, q)[0]
        obj = match_result_json(name, res)
        assert set(obj) == {"name", "similarity", "lcs_length", "pairs", "cost",
                            "important_ok"}
        assert obj["pairs"] == [[1, 1], [2, 2], [3, 3]]
