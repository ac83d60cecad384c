#!/usr/bin/env python3
"""Tests for bipartite message graphs and the nearly semi-regular check."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from bigraph import (
    BipartiteGraph,
    EdgeSampler,
    SemiRegularParams,
    bin_count,
    check_nearly_semi_regular,
    degrees,
    edge_marginals,
    graph_parameters,
    rate_conditions,
    uniform_edge_sampler,
)
from errors import ArgumentError
from json_utils import read_csv_rows

edge_sets = st.sets(
    st.tuples(st.integers(0, 4), st.integers(0, 5)), min_size=1, max_size=30
)


class TestConstruction:
    def test_duplicate_edges_rejected_without_dedupe(self):
        with pytest.raises(ArgumentError):
            BipartiteGraph.from_edges(2, 2, [(0, 0), (0, 0)], dedupe=False)

    def test_dedupe_collapses_duplicates(self):
        g = BipartiteGraph.from_edges(2, 2, [(0, 0), (0, 0), (1, 1)])
        assert g.edge_count == 2

    def test_out_of_range_endpoint_rejected(self):
        with pytest.raises(ArgumentError):
            BipartiteGraph.from_edges(2, 2, [(0, 2)])

    def test_membership_and_neighbors(self, ref_graphs):
        cycle = ref_graphs["cycle"]
        assert cycle.has_edge(0, 1)
        assert not cycle.has_edge(0, 2)
        assert not cycle.has_edge(5, 0)
        assert cycle.neighbors1(2).tolist() == [0, 2]
        assert sorted(cycle.neighbors2(0).tolist()) == [0, 2]

    def test_csv_round_trip(self, ref_graphs, temp_dir):
        path = temp_dir / "edges.csv"
        ref_graphs["cycle"].to_csv(path, "abc", 3)
        assert path.read_text().startswith("# corrbin")
        assert read_csv_rows(path)[0] == {"side1": "0", "side2": "0"}
        loaded = BipartiteGraph.from_csv(path, 3, 3)
        assert np.array_equal(loaded.edges, ref_graphs["cycle"].edges)

    def test_summary(self, ref_graphs):
        summary = ref_graphs["matching"].summary()
        assert summary == {
            "n1": 3,
            "n2": 3,
            "edges": 3,
            "min_degree1": 1,
            "max_degree1": 1,
            "min_degree2": 1,
            "max_degree2": 1,
        }


class TestDegrees:
    @pytest.mark.parametrize(
        "name, expected", [("complete", 3), ("cycle", 2), ("matching", 1)]
    )
    def test_reference_graph_degrees(self, ref_graphs, name, expected):
        deg1, deg2 = degrees(ref_graphs[name])
        assert deg1.tolist() == [expected] * 3
        assert deg2.tolist() == [expected] * 3

    @given(edge_sets)
    @settings(max_examples=60, deadline=None)
    def test_handshake(self, edges):
        g = BipartiteGraph.from_edges(5, 6, edges)
        deg1, deg2 = degrees(g)
        assert deg1.sum() == deg2.sum() == g.edge_count == len(edges)

    def test_edge_marginals_proportional_to_degree(self):
        g = BipartiteGraph.from_edges(2, 2, [(0, 0), (0, 1), (1, 1)])
        p1, p2 = edge_marginals(g)
        assert np.allclose(p1, [2 / 3, 1 / 3])
        assert np.allclose(p2, [1 / 3, 2 / 3])


class TestNearlySemiRegular:
    def test_complete_graph_exact(self, ref_graphs):
        assert check_nearly_semi_regular(ref_graphs["complete"], SemiRegularParams(3, 3, 3, 3, 1)).ok

    def test_cycle_graph(self, ref_graphs):
        assert check_nearly_semi_regular(ref_graphs["cycle"], SemiRegularParams(3, 3, 2, 2, 1)).ok

    def test_star_names_violating_vertices(self):
        star = BipartiteGraph.from_edges(3, 3, [(0, 0), (0, 1), (0, 2)])
        report = check_nearly_semi_regular(star, SemiRegularParams(3, 3, 1, 1, 1))
        assert not report.ok
        assert report.violating_vertices(1) == [0, 1, 2]
        assert report.violating_vertices(2) == []
        assert "degree 3" in report.to_dict()["violations"][0]

    def test_size_mismatch_reported(self, ref_graphs):
        report = check_nearly_semi_regular(ref_graphs["cycle"], SemiRegularParams(4, 3, 2, 2, 1))
        assert not report.ok
        assert report.violations[0].kind == "size1"

    def test_removed_edge_needs_slack(self):
        edges = [(i, j) for i in range(3) for j in range(3) if (i, j) != (0, 0)]
        g = BipartiteGraph.from_edges(3, 3, edges)
        assert not check_nearly_semi_regular(g, SemiRegularParams(3, 3, 3, 3, 1)).ok
        assert check_nearly_semi_regular(g, SemiRegularParams(3, 3, 3, 3, 1.5)).ok

    def test_power_of_two_window_is_exact(self):
        # degrees 1 and 4 sit exactly on [2/2, 2*2]
        g = BipartiteGraph.from_edges(
            2, 4, [(0, 0), (1, 0), (1, 1), (1, 2), (1, 3)]
        )
        p = SemiRegularParams(2, 4, 4, 2, 2)
        report = check_nearly_semi_regular(g, p)
        assert report.violating_vertices(1) == []

    @given(edge_sets, st.floats(min_value=1.0, max_value=4.0), st.floats(min_value=0.0, max_value=4.0))
    @settings(max_examples=60, deadline=None)
    def test_monotone_in_mu(self, edges, mu, extra):
        g = BipartiteGraph.from_edges(5, 6, edges)
        if check_nearly_semi_regular(g, SemiRegularParams(5, 6, 2.0, 2.0, mu)).ok:
            assert check_nearly_semi_regular(g, SemiRegularParams(5, 6, 2.0, 2.0, mu + extra)).ok

    def test_params_validation(self):
        with pytest.raises(ArgumentError):
            SemiRegularParams(3, 3, 2, 2, 0.5)
        with pytest.raises(ArgumentError):
            SemiRegularParams(0, 3, 2, 2, 1)


class TestSampling:
    def test_single_edge_graph(self):
        g = BipartiteGraph.from_edges(2, 2, [(1, 0)])
        for seed in range(5):
            assert uniform_edge_sampler(g, seed) == (1, 0)

    def test_deterministic_given_seed(self, ref_graphs):
        a = EdgeSampler(ref_graphs["cycle"], 42).draw_many(20)
        b = EdgeSampler(ref_graphs["cycle"], 42).draw_many(20)
        assert np.array_equal(a, b)

    def test_empty_graph_rejected(self):
        with pytest.raises(ArgumentError):
            EdgeSampler(BipartiteGraph.from_edges(2, 2, []), 0)

    @pytest.mark.parametrize("name, edges", [("matching", 3), ("cycle", 6)])
    def test_edge_frequencies_uniform(self, ref_graphs, name, edges):
        g = ref_graphs[name]
        draws = EdgeSampler(g, 2024).draw_many(6000)
        index = {tuple(e): k for k, e in enumerate(g.edges.tolist())}
        counts = np.bincount([index[tuple(e)] for e in draws.tolist()], minlength=edges)
        assert np.allclose(counts / 6000, 1 / edges, atol=0.03)
        assert stats.chisquare(counts).pvalue > 0.001

    def test_vertex_marginal_matches_degree_share(self):
        g = BipartiteGraph.from_edges(2, 2, [(0, 0), (0, 1), (1, 1)])
        draws = EdgeSampler(g, 5).draw_many(9000)
        share = np.mean(draws[:, 0] == 0)
        assert share == pytest.approx(2 / 3, abs=0.03)


class TestRateHelpers:
    def test_bin_count_keeps_integers(self):
        assert bin_count(8, 0.5) == 16
        assert bin_count(8, 0.51) == 32
        assert bin_count(8, 0.0) == 1

    def test_graph_parameters(self):
        p = graph_parameters(8, (0.5, 0.25, 0.5, 0.25), 0.125)
        assert p.as_tuple() == (16, 4, 16.0, 4.0, 2.0)

    def test_rate_conditions(self):
        p = graph_parameters(8, (0.5, 0.25, 0.5, 0.25), 0.125)
        report = rate_conditions(p, 8, (0.5, 0.25, 0.5, 0.25), 0.2)
        assert all(entry["ok"] for entry in report.values())
        tight = rate_conditions(p, 8, (0.5, 0.25, 0.5, 0.25), 0.1)
        assert not tight["mu"]["ok"]
