import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from bine.centrality import CentralityScores
from bine.graph import BipartiteGraph, HomogeneousProjection, project_second_order
from bine.walks import (
    Corpus,
    WalkConfig,
    cooccurrence_counts,
    generate_corpus,
    generate_corpus_two_step,
    power_law_slope,
    walk_counts,
)


def projection_from_dense(dense, side="U") -> HomogeneousProjection:
    return HomogeneousProjection(side=side, matrix=sp.csr_matrix(np.asarray(dense, dtype=float)))


def uniform_centrality(n, side="U") -> CentralityScores:
    return CentralityScores(side, np.ones(n))


class TestWalkCounts:
    def test_full_score_gets_max_walks(self):
        counts = walk_counts(
            CentralityScores("U", np.array([1.0])), WalkConfig(max_walks=32)
        )
        assert counts[0] == 32

    def test_zero_score_gets_min_walks(self):
        counts = walk_counts(
            CentralityScores("U", np.array([0.0])), WalkConfig(min_walks=1)
        )
        assert counts[0] == 1

    def test_ceiling_rounds_up(self):
        counts = walk_counts(
            CentralityScores("U", np.array([0.01])), WalkConfig(max_walks=32)
        )
        assert counts[0] == 1


class TestGenerateCorpus:
    def test_two_vertex_alternation_and_length(self):
        proj = projection_from_dense([[0, 5], [5, 0]])
        config = WalkConfig(max_walks=50_000, min_walks=1, stop_prob=0.5, seed=3)
        corpus = generate_corpus(proj, uniform_centrality(2), config)
        assert len(corpus.sequences) == 100_000
        lengths = []
        for seq in corpus.sequences:
            assert all(a != b for a, b in zip(seq, seq[1:]))
            assert set(seq) <= {0, 1}
            lengths.append(len(seq))
        # Expected length 2 + (1 - p)/p = 3; sd of the mean ~ 0.0045.
        assert np.mean(lengths) == pytest.approx(3.0, abs=0.02)

    def test_walks_start_at_their_vertex_with_budget(self):
        proj = projection_from_dense([[1, 2, 0], [2, 4, 1], [0, 1, 9]])
        cent = CentralityScores("U", np.array([1.0, 0.5, 0.0]))
        config = WalkConfig(max_walks=10, min_walks=2, stop_prob=0.5, seed=0)
        corpus = generate_corpus(proj, cent, config)
        starts = np.array([seq[0] for seq in corpus.sequences])
        assert (starts == 0).sum() == 10
        assert (starts == 1).sum() == 5
        assert (starts == 2).sum() == 2

    def test_minimum_length_two_and_cap(self):
        proj = projection_from_dense([[0, 1], [1, 0]])
        config = WalkConfig(max_walks=200, stop_prob=0.05, max_len=7, seed=1)
        corpus = generate_corpus(proj, uniform_centrality(2), config)
        lengths = {len(s) for s in corpus.sequences}
        assert min(lengths) >= 2
        assert max(lengths) == 7

    def test_self_loops_never_taken(self):
        proj = projection_from_dense([[100, 1], [1, 100]])
        config = WalkConfig(max_walks=50, stop_prob=0.3, seed=2)
        corpus = generate_corpus(proj, uniform_centrality(2), config)
        for seq in corpus.sequences:
            assert all(a != b for a, b in zip(seq, seq[1:]))

    def test_isolated_vertex_contributes_no_walks(self):
        proj = projection_from_dense([[0, 1, 0], [1, 0, 0], [0, 0, 4.0]])
        corpus = generate_corpus(
            proj, uniform_centrality(3), WalkConfig(max_walks=5, seed=0)
        )
        assert all(seq[0] != 2 and 2 not in seq for seq in corpus.sequences)

    def test_zero_offdiagonal_warns_empty(self):
        proj = projection_from_dense([[3.0, 0], [0, 2.0]])
        with pytest.warns(RuntimeWarning):
            corpus = generate_corpus(
                proj, uniform_centrality(2), WalkConfig(seed=0)
            )
        assert corpus.sequences == ()

    def test_deterministic_for_fixed_seed(self):
        proj = projection_from_dense([[0, 1, 2], [1, 0, 1], [2, 1, 0]])
        config = WalkConfig(max_walks=7, stop_prob=0.25, seed=42)
        a = generate_corpus(proj, uniform_centrality(3), config)
        b = generate_corpus(proj, uniform_centrality(3), config)
        assert a == b
        c = generate_corpus(
            proj, uniform_centrality(3), WalkConfig(max_walks=7, stop_prob=0.25, seed=43)
        )
        assert a != c

    def test_transition_frequencies_proportional_to_weight(self):
        proj = projection_from_dense([[0, 3, 1], [3, 0, 0], [1, 0, 0]])
        config = WalkConfig(max_walks=4000, stop_prob=0.5, seed=9)
        corpus = generate_corpus(proj, uniform_centrality(3), config)
        from_zero = [seq[1] for seq in corpus.sequences if seq[0] == 0]
        frac_to_one = np.mean([x == 1 for x in from_zero])
        assert frac_to_one == pytest.approx(0.75, abs=0.03)


class TestTwoStepWalks:
    def test_sequences_stay_on_one_side(self):
        g = BipartiteGraph(3, 2, ((0, 0, 1.0), (1, 0, 2.0), (1, 1, 1.0), (2, 1, 3.0)))
        corpus = generate_corpus_two_step(
            g, "U", uniform_centrality(3), WalkConfig(max_walks=5, seed=1)
        )
        for seq in corpus.sequences:
            assert all(0 <= x < 3 for x in seq)
            assert len(seq) >= 2

    def test_two_step_reaches_shared_neighbor_vertices_only(self):
        # u0 and u1 share v0; u2 is connected through v1 to u1 only.
        g = BipartiteGraph(3, 2, ((0, 0, 1.0), (1, 0, 1.0), (1, 1, 1.0), (2, 1, 1.0)))
        corpus = generate_corpus_two_step(
            g, "U", uniform_centrality(3), WalkConfig(max_walks=20, stop_prob=0.4, seed=3)
        )
        for seq in corpus.sequences:
            for a, b in zip(seq, seq[1:]):
                # consecutive vertices share at least one neighbor (or repeat)
                na = set(g.u_neighbors(a)[0])
                nb = set(g.u_neighbors(b)[0])
                assert na & nb


class TestCooccurrence:
    def test_hand_window_enumeration(self):
        corpus = Corpus(side="U", sequences=((0, 1, 2),))
        stats = cooccurrence_counts(corpus, window=1, n_vertices=3)
        m = stats.pair_counts.toarray()
        expected = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
        np.testing.assert_array_equal(m, expected)

    def test_window_covering_sequence_counts_all_ordered_pairs(self):
        corpus = Corpus(side="U", sequences=((0, 1, 2, 3),))
        stats = cooccurrence_counts(corpus, window=10, n_vertices=4)
        m = stats.pair_counts.toarray()
        np.testing.assert_array_equal(m, np.ones((4, 4)) - np.eye(4))

    def test_empty_corpus_all_zero(self):
        stats = cooccurrence_counts(Corpus("U", ()), window=3, n_vertices=5)
        assert stats.total_pairs == 0
        assert stats.center_counts.sum() == 0
        assert stats.occurrences.sum() == 0

    def test_repeated_vertex_counts_accumulate(self):
        corpus = Corpus(side="U", sequences=((0, 1, 0),))
        stats = cooccurrence_counts(corpus, window=2, n_vertices=2)
        m = stats.pair_counts.toarray()
        # pairs: (0,1)x2 directions x2 visits of 0, (0,0) at distance 2 both ways
        assert m[0, 1] == 2 and m[1, 0] == 2
        assert m[0, 0] == 2
        assert stats.occurrences[0] == 2 and stats.occurrences[1] == 1

    def test_center_counts_are_row_sums(self):
        rng = np.random.default_rng(0)
        seqs = tuple(
            tuple(rng.integers(0, 6, size=rng.integers(2, 9)).tolist())
            for _ in range(20)
        )
        stats = cooccurrence_counts(Corpus("U", seqs), window=3, n_vertices=6)
        np.testing.assert_array_equal(
            stats.center_counts, stats.pair_counts.toarray().sum(axis=1)
        )
        assert stats.total_pairs == stats.pair_counts.sum()


def window_pairs_bruteforce(seqs, window, n):
    counts = np.zeros((n, n), dtype=np.int64)
    for seq in seqs:
        for t, center in enumerate(seq):
            for off in range(1, window + 1):
                if t - off >= 0:
                    counts[center, seq[t - off]] += 1
                if t + off < len(seq):
                    counts[center, seq[t + off]] += 1
    return counts


@given(
    st.lists(
        st.lists(st.integers(0, 4), min_size=1, max_size=12),
        min_size=0,
        max_size=8,
    ),
    st.integers(1, 5),
)
@settings(max_examples=60, deadline=None)
def test_cooccurrence_matches_bruteforce(seqs, window):
    corpus = Corpus("U", tuple(tuple(s) for s in seqs))
    stats = cooccurrence_counts(corpus, window=window, n_vertices=5)
    expected = window_pairs_bruteforce(seqs, window, 5)
    np.testing.assert_array_equal(stats.pair_counts.toarray(), expected)


class TestPowerLawSlope:
    def test_exact_line_recovers_slope(self):
        freqs = [1] * 64 + [2] * 16 + [4] * 4 + [8] * 1
        assert power_law_slope(freqs) == pytest.approx(-2.0, abs=1e-9)

    def test_uniform_histogram_slope_zero(self):
        assert power_law_slope([1, 1, 2, 2, 3, 3]) == pytest.approx(0.0, abs=1e-12)

    def test_too_few_distinct_values(self):
        with pytest.raises(ValueError):
            power_law_slope([3, 3, 5, 5])

    def test_nonpositive_rejected(self):
        with pytest.raises(ValueError):
            power_law_slope([0, 1, 2, 3])
