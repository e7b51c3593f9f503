import itertools
import json
from math import comb

import pytest

from conftest import brute_alpha_words
from whsyn.constraints import (ConstraintError, InadmissibleLabel, Kind, WHConstraint, WHGraph, admits, advance,
                               alpha_to_mu, build_graph, convert, initial_node, is_isomorphic, language, minimize,
                               mu_to_alpha, predicted_label_counts, predicted_size)


class TestConstraint:
    def test_validation(self):
        with pytest.raises(ConstraintError):
            WHConstraint.any_miss(5, 5)
        with pytest.raises(ConstraintError):
            WHConstraint.any_miss(-1, 3)
        with pytest.raises(ConstraintError):
            WHConstraint.any_hit(0, 3)
        with pytest.raises(ConstraintError):
            WHConstraint.any_hit(4, 3)
        with pytest.raises(ConstraintError):
            WHConstraint.row_miss(-1)

    def test_rowhit_rejected(self):
        with pytest.raises(ConstraintError, match="RowHit"):
            WHConstraint.from_dict({"kind": "RowHit", "h": 1, "s": 2})

    def test_dict_roundtrip(self):
        for c in (WHConstraint.any_miss(3, 5), WHConstraint.any_hit(2, 5), WHConstraint.row_miss(2)):
            assert WHConstraint.from_dict(c.to_dict()) == c

    def test_str(self):
        assert str(WHConstraint.any_miss(3, 5)) == "AnyMiss<3,5>"
        assert str(WHConstraint.row_miss(2)) == "RowMiss<2>"


class TestAdmits:
    def test_examples(self):
        c = WHConstraint.any_miss(3, 5)
        assert admits((1, 0, 0, 1, 1, 0, 1), c)
        assert admits((1, 1, 1, 1), c)
        assert not admits((1, 0, 0, 0, 0), c)

    def test_short_sequence_is_one_window(self):
        c = WHConstraint.any_miss(1, 5)
        assert admits((1, 0), c)
        assert not admits((1, 0, 0), c)

    def test_matches_window_scan(self):
        for r, s in [(1, 3), (2, 4), (3, 5)]:
            c = WHConstraint.any_miss(r, s)
            for bits in itertools.product((0, 1), repeat=9):
                mu = (1,) + bits
                windows = [mu[i:i + s] for i in range(max(1, len(mu) - s + 1))]
                expect = all(w.count(0) <= r for w in windows)
                assert admits(mu, c) == expect


class TestConvert:
    def test_examples(self):
        assert convert(WHConstraint.any_hit(2, 5)) == WHConstraint.any_miss(3, 5)
        assert convert(WHConstraint.any_miss(3, 5)) == WHConstraint.any_miss(3, 5)
        assert convert(WHConstraint.row_miss(2)) == WHConstraint.any_miss(2, 3)

    @pytest.mark.parametrize("s", range(1, 7))
    def test_anyhit_language(self, s):
        for h in range(1, s + 1):
            c = WHConstraint.any_hit(h, s)
            am = convert(c)
            for n in range(1, 2 * s + 1):
                for mu in itertools.product((0, 1), repeat=n):
                    windows = [mu[i:i + s] for i in range(max(1, n - s + 1))]
                    # at least h hits per full window; a short prefix may still be completed by hits
                    direct = all(w.count(1) + (s - len(w)) >= h for w in windows)
                    assert admits(mu, am) == direct

    @pytest.mark.parametrize("r", range(0, 5))
    def test_rowmiss_language(self, r):
        am = convert(WHConstraint.row_miss(r))
        for n in range(1, 2 * (r + 1) + 1):
            for mu in itertools.product((0, 1), repeat=n):
                run = best = 0
                for b in mu:
                    run = run + 1 if b == 0 else 0
                    best = max(best, run)
                assert admits(mu, am) == (best <= r)


class TestGraph:
    def test_fig4_graph(self):
        g = build_graph(WHConstraint.any_miss(3, 5))
        assert (g.n_nodes, g.n_edges) == (4, 10)
        out_labels = sorted(sorted(g.successors(v)) for v in g.nodes)
        assert out_labels == [[0], [0, 1], [0, 1, 2], [0, 1, 2, 3]]
        n1 = initial_node(g)
        assert sorted(g.successors(n1)) == [0, 1, 2, 3]
        assert advance(g, n1, 0) == n1
        n2 = advance(g, n1, 3)
        assert sorted(g.successors(n2)) == [0]
        with pytest.raises(InadmissibleLabel):
            advance(g, n2, 3)

    def test_trivial_graphs(self):
        g = build_graph(WHConstraint.any_miss(0, 1))
        assert (g.n_nodes, g.n_edges) == (1, 1)
        assert g.edges == ((0, 0, 0),)
        g = build_graph(WHConstraint.any_miss(0, 4))
        assert (g.n_nodes, g.n_edges) == (1, 1)

    def test_size_law(self):
        for s in range(1, 11):
            for r in range(s):
                c = WHConstraint.any_miss(r, s)
                g = build_graph(c)
                assert (g.n_nodes, g.n_edges) == predicted_size(c) == (comb(s - 1, r), comb(s, r))
                counts = {}
                for (_, _, l) in g.edges:
                    counts[l] = counts.get(l, 0) + 1
                assert counts == predicted_label_counts(c)
                g.check()

    def test_converted_inputs(self):
        assert (build_graph(WHConstraint.any_hit(2, 5)).n_nodes) == 4
        assert build_graph(WHConstraint.row_miss(2)).n_edges == comb(3, 2)

    @pytest.mark.parametrize("s", range(1, 9))
    def test_language_equals_brute_force(self, s):
        for r in range(s):
            g = build_graph(WHConstraint.any_miss(r, s))
            assert language(g, 6) == brute_alpha_words(r, s, 6)

    def test_language_examples(self):
        g = build_graph(WHConstraint.any_miss(1, 2))
        assert language(g, 2) == {(), (0,), (1,), (0, 0), (0, 1), (1, 0), (1, 1)}
        assert language(g, 0) == {()}
        g = build_graph(WHConstraint.any_miss(0, 1))
        assert language(g, 3) == {(), (0,), (0, 0), (0, 0, 0)}
        with pytest.raises(ValueError):
            language(g, 13)

    def test_initial_node_examples(self):
        g = build_graph(WHConstraint.any_miss(1, 3))
        v = g.nodes[-1]
        for _ in range(3):
            v = advance(g, v, 0)
        assert v == initial_node(g) == g.initial

    def test_minimization_idempotent(self):
        for r, s in [(1, 3), (3, 5), (2, 6), (7, 10)]:
            g = build_graph(WHConstraint.any_miss(r, s))
            assert is_isomorphic(minimize(g), g)

    def test_isomorphism_rejects_relabelled_edges(self):
        g = build_graph(WHConstraint.any_miss(3, 5))
        edges = list(g.edges)
        i, j, l = edges[-1]
        edges[-1] = (i, g.initial, l) if j != g.initial else (i, g.nodes[-1], l)
        other = WHGraph(g.nodes, tuple(edges), g.initial, g.constraint)
        assert not is_isomorphic(g, other)

    def test_canonical_numbering_is_deterministic(self):
        a = build_graph(WHConstraint.any_miss(4, 8)).dumps()
        b = build_graph(WHConstraint.any_miss(4, 8)).dumps()
        assert a == b

    def test_json_roundtrip_and_dot(self):
        g = build_graph(WHConstraint.any_miss(3, 5))
        d = json.loads(g.dumps())
        assert set(d) >= {"constraint", "nodes", "initial", "edges"}
        assert {"from", "to", "label"} == set(d["edges"][0])
        g2 = WHGraph.from_json(d)
        assert g2.edges == g.edges and g2.initial == g.initial
        dot = g.to_dot()
        assert dot.startswith("digraph") and dot.count("->") == g.n_edges + 1

    def test_user_graph_is_checked(self):
        with pytest.raises(ValueError):
            WHGraph((0, 1), ((0, 1, 0), (0, 0, 0)), 0, None)  # two label-0 edges at node 0

    def test_alpha_mu_roundtrip(self):
        for alpha in [(), (0,), (2, 0, 1), (3, 3, 0)]:
            assert tuple(mu_to_alpha(alpha_to_mu(alpha))) == alpha
