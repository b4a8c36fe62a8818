import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bine.graph import (
    BipartiteGraph,
    GraphFormatError,
    edge_probability,
    load_edge_list,
    project_second_order,
    write_edge_list,
)


def load(text: str) -> BipartiteGraph:
    return load_edge_list(io.StringIO(text))


class TestLoadEdgeList:
    def test_single_edge(self):
        g = load("a\tx\t2.0\n")
        assert (g.u_count, g.v_count) == (1, 1)
        assert g.edges == ((0, 0, 2.0),)

    def test_duplicate_lines_sum(self):
        g = load("a\tx\t1\na\tx\t2\n")
        assert g.edges == ((0, 0, 3.0),)

    def test_missing_weight_defaults_to_one(self):
        g = load("a\tx\n")
        assert g.edges[0][2] == 1.0

    def test_whitespace_fallback_when_no_tab(self):
        g = load("a x 2.5\n")
        assert g.edges == ((0, 0, 2.5),)

    def test_negative_weight_reports_line_number(self):
        with pytest.raises(GraphFormatError, match="line 1"):
            load("a\tx\t-1\n")

    def test_malformed_weight_reports_line_number(self):
        with pytest.raises(GraphFormatError, match="line 2"):
            load("a\tx\t1\nb\ty\tnope\n")

    def test_wrong_field_count(self):
        with pytest.raises(GraphFormatError, match="line 1"):
            load("justonetoken\n")

    def test_non_finite_weight(self):
        with pytest.raises(GraphFormatError, match="line 1"):
            load("a\tx\tinf\n")

    def test_empty_input(self):
        with pytest.raises(GraphFormatError):
            load("")

    def test_comments_and_blanks_skipped(self):
        g = load("# header\n\na\tx\t1\n  # indented comment\nb\ty\t2\n")
        assert len(g.edges) == 2

    def test_first_appearance_ids(self):
        g = load("b\ty\t1\na\tx\t1\nb\tx\t1\n")
        assert g.u_tokens == ("b", "a")
        assert g.v_tokens == ("y", "x")
        assert g.edges == ((0, 0, 1.0), (1, 1, 1.0), (0, 1, 1.0))

    def test_zero_weight_aggregate_not_stored(self):
        g = load("a\tx\t0\nb\tx\t1\n")
        assert all(w > 0 for _, _, w in g.edges)
        assert g.u_count == 2  # the token is still interned

    def test_round_trip_identical_edge_multiset(self):
        g = load("a\tx\t1.5\nb\ty\t0.25\na\ty\t3\n")
        buf = io.StringIO()
        write_edge_list(g, buf)
        g2 = load(buf.getvalue())
        assert g2.edges == g.edges
        assert g2.u_tokens == g.u_tokens and g2.v_tokens == g.v_tokens


@st.composite
def edge_lists(draw):
    n_edges = draw(st.integers(1, 30))
    entries = draw(
        st.lists(
            st.tuples(
                st.integers(0, 6),
                st.integers(0, 6),
                st.floats(0.01, 100, allow_nan=False, allow_infinity=False),
            ),
            min_size=n_edges,
            max_size=n_edges,
        )
    )
    return "".join(f"u{u}\tv{v}\t{w!r}\n" for u, v, w in entries)


@given(edge_lists())
@settings(max_examples=50, deadline=None)
def test_round_trip_property(text):
    g = load(text)
    buf = io.StringIO()
    write_edge_list(g, buf)
    g2 = load(buf.getvalue())
    assert sorted(g.edges) == sorted(g2.edges)


def projection_bruteforce(graph: BipartiteGraph, side: str) -> np.ndarray:
    """Direct double loop over shared neighbors."""
    w = graph.weight_matrix.toarray()
    if side == "V":
        w = w.T
    n = w.shape[0]
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            out[i, j] = sum(w[i, k] * w[j, k] for k in range(w.shape[1]))
    return out


class TestProjection:
    def test_hand_example(self):
        g = BipartiteGraph(2, 2, ((0, 0, 1.0), (1, 0, 2.0), (1, 1, 1.0)))
        proj = project_second_order(g, "U")
        assert proj.matrix[0, 1] == 2.0

    def test_single_u_vertex_no_offdiagonal(self):
        g = BipartiteGraph(1, 3, ((0, 0, 1.0), (0, 1, 2.0), (0, 2, 1.0)))
        proj = project_second_order(g, "U")
        assert proj.offdiagonal().nnz == 0
        assert proj.matrix[0, 0] == pytest.approx(1 + 4 + 1)

    def test_disjoint_neighborhoods_give_zero(self):
        g = BipartiteGraph(2, 2, ((0, 0, 1.0), (1, 1, 1.0)))
        proj = project_second_order(g, "U")
        assert proj.matrix[0, 1] == 0.0

    @pytest.mark.parametrize("side", ["U", "V"])
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_bruteforce(self, side, seed):
        rng = np.random.default_rng(seed)
        n_u, n_v = rng.integers(2, 26, size=2)
        mask = rng.random((n_u, n_v)) < 0.3
        weights = rng.uniform(0.1, 5.0, size=(n_u, n_v)) * mask
        edges = tuple(
            (int(i), int(j), float(weights[i, j]))
            for i, j in zip(*np.nonzero(weights))
        )
        if not edges:
            pytest.skip("empty draw")
        g = BipartiteGraph(int(n_u), int(n_v), edges)
        proj = project_second_order(g, side)
        expected = projection_bruteforce(g, side)
        np.testing.assert_allclose(proj.matrix.toarray(), expected, rtol=1e-12)

    def test_symmetry_exact(self):
        rng = np.random.default_rng(3)
        weights = rng.uniform(0, 2, size=(10, 8)) * (rng.random((10, 8)) < 0.4)
        edges = tuple(
            (int(i), int(j), float(weights[i, j])) for i, j in zip(*np.nonzero(weights))
        )
        proj = project_second_order(BipartiteGraph(10, 8, edges), "U")
        dense = proj.matrix.toarray()
        assert np.array_equal(dense, dense.T)

    def test_degree_views(self):
        g = BipartiteGraph(2, 2, ((0, 0, 1.0), (1, 0, 2.0), (1, 1, 1.0)))
        proj = project_second_order(g, "U")
        np.testing.assert_allclose(proj.degrees, [1 + 2, 2 + 5])
        np.testing.assert_allclose(proj.walk_degrees, [2, 2])


class TestEdgeProbability:
    def test_single_edge_carries_all_mass(self):
        g = BipartiteGraph(1, 1, ((0, 0, 7.0),))
        assert edge_probability(g, 0, 0) == 1.0

    def test_hand_normalization(self):
        g = BipartiteGraph(2, 1, ((0, 0, 1.0), (1, 0, 3.0)))
        assert edge_probability(g, 0, 0) == pytest.approx(0.25)
        assert edge_probability(g, 1, 0) == pytest.approx(0.75)

    def test_probabilities_sum_to_one(self):
        rng = np.random.default_rng(9)
        weights = rng.uniform(0.5, 4, size=(6, 5)) * (rng.random((6, 5)) < 0.5)
        edges = tuple(
            (int(i), int(j), float(weights[i, j])) for i, j in zip(*np.nonzero(weights))
        )
        g = BipartiteGraph(6, 5, edges)
        total = sum(edge_probability(g, u, v) for u, v, _ in g.edges)
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_missing_edge_raises(self):
        g = BipartiteGraph(2, 2, ((0, 0, 1.0),))
        with pytest.raises(KeyError):
            edge_probability(g, 1, 1)
