import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings

from levi_amr.graph import (
    AmrGraph,
    CyclicGraphWarning,
    Entry,
    GraphError,
    LeviGraph,
    LeviNode,
    MalformedLevi,
    Mode,
    NodeKind,
    NodeSequence,
    OrphanLabelWarning,
    from_levi,
    isomorphic,
    linearize,
    restore,
    to_levi,
)

from conftest import amr_graphs, random_amr


def edge_set(g):
    return sorted(e.as_tuple() for e in g.edges)


class TestAmrGraph:
    def test_rejects_missing_endpoint(self):
        with pytest.raises(GraphError):
            AmrGraph.build(["a"], [(0, 1, "ARG0")])

    def test_rejects_duplicate_triple(self):
        with pytest.raises(GraphError, match="duplicate"):
            AmrGraph.build(["a", "b"], [(0, 1, "ARG0"), (0, 1, "ARG0")])

    def test_parallel_edges_with_distinct_labels_allowed(self):
        g = AmrGraph.build(["a", "b"], [(0, 1, "ARG0"), (0, 1, "ARG2")])
        assert len(g.edges) == 2

    def test_rejects_bad_root_and_empty_name(self):
        with pytest.raises(GraphError):
            AmrGraph.build(["a"], root=3)
        with pytest.raises(GraphError):
            AmrGraph.build([""])

    def test_strict_requires_connection(self):
        with pytest.raises(GraphError, match="not connected"):
            AmrGraph.build(["a", "b"], [], strict=True)

    def test_equality_ignores_edge_order(self):
        a = AmrGraph.build(["x", "y", "z"], [(0, 1, "A"), (0, 2, "B")])
        b = AmrGraph.build(["x", "y", "z"], [(0, 2, "B"), (0, 1, "A")])
        assert a == b

    def test_cycle_detection_warns(self):
        g = AmrGraph.build(["a", "b"], [(0, 1, "A"), (1, 0, "B")])
        assert g.has_cycle()
        with pytest.warns(CyclicGraphWarning):
            g.warn_if_cyclic()

    def test_json_roundtrip(self, boy_girl):
        data = json.loads(json.dumps(boy_girl.to_dict()))
        assert AmrGraph.from_dict(data) == boy_girl


class TestLevi:
    def test_boy_girl_has_eight_nodes(self, boy_girl):
        lv = to_levi(boy_girl)
        assert len(lv.nodes) == 8
        assert sum(n.kind is NodeKind.LABEL for n in lv.nodes) == 4

    def test_no_edges_means_no_labels(self):
        g = AmrGraph.build(["alpha"])
        lv = to_levi(g)
        assert [n.name for n in lv.nodes] == ["alpha"] and lv.arcs == ()
        assert from_levi(lv) == g

    def test_parallel_edges_become_two_label_nodes(self):
        g = AmrGraph.build(["want", "boy"], [(0, 1, "ARG0"), (0, 1, "ARG2")])
        lv = to_levi(g)
        paths = set()
        for k, node in enumerate(lv.nodes):
            if node.kind is NodeKind.LABEL:
                (src,) = [a for a, b in lv.arcs if b == k]
                (dst,) = [b for a, b in lv.arcs if a == k]
                paths.add((lv.nodes[src].name, node.name, lv.nodes[dst].name))
        assert paths == {("want", "ARG0", "boy"), ("want", "ARG2", "boy")}

    def test_reversed_label_flips_direction(self):
        nodes = [LeviNode(NodeKind.CONCEPT, "a"), LeviNode(NodeKind.CONCEPT, "b"), LeviNode(NodeKind.LABEL, "ARG0_R", True)]
        lv = LeviGraph(nodes, [(0, 2), (2, 1)])
        assert edge_set(from_levi(lv)) == [(1, 0, "ARG0")]

    def test_reversed_flag_must_match_suffix(self):
        with pytest.raises(GraphError):
            LeviNode(NodeKind.LABEL, "ARG0", True)

    @pytest.mark.parametrize(
        "arcs, bad",
        [([(0, 2)], 2), ([(0, 2), (2, 1), (1, 2)], 2), ([(0, 1)], 1)],
    )
    def test_malformed_levi_reports_index(self, arcs, bad):
        nodes = [LeviNode(NodeKind.CONCEPT, "a"), LeviNode(NodeKind.CONCEPT, "b"), LeviNode(NodeKind.LABEL, "ARG0")]
        with pytest.raises(MalformedLevi) as info:
            from_levi(LeviGraph(nodes, arcs))
        assert info.value.index == bad

    @settings(max_examples=200, deadline=None)
    @given(amr_graphs())
    def test_roundtrip_and_degrees(self, g):
        lv = to_levi(g)
        assert len(lv.nodes) == len(g.concepts) + len(g.edges)
        for k, node in enumerate(lv.nodes):
            if node.kind is NodeKind.LABEL:
                assert sum(b == k for _, b in lv.arcs) == 1
                assert sum(a == k for a, _ in lv.arcs) == 1
        back = from_levi(lv)
        assert back == g.canonical()
        assert isomorphic(back, g)

    def test_json_roundtrip(self, boy_girl):
        lv = to_levi(boy_girl)
        assert LeviGraph.from_dict(json.loads(json.dumps(lv.to_dict()))) == lv

    def test_cyclic_graph_tolerated(self):
        g = AmrGraph.build(["a", "b", "c"], [(0, 1, "A"), (1, 2, "B"), (2, 0, "C")])
        with pytest.warns(CyclicGraphWarning):
            lv = to_levi(g)
        with pytest.warns(CyclicGraphWarning):
            assert isomorphic(from_levi(lv), g)


class TestLinearize:
    def test_levi_order(self, boy_girl):
        seq = linearize(boy_girl, Mode.LEVI)
        assert seq.names[1:] == ["want-01", "believe-01", "ARG1", "boy", "ARG1", "ARG0", "girl", "ARG0"]
        assert seq.entries[0].kind is NodeKind.ROOT

    def test_levi_arcs_connect_label_to_both_concepts(self, boy_girl):
        seq = linearize(boy_girl, Mode.LEVI)
        assert seq.arcs[3] == frozenset({1, 2})  # ARG1 between want and believe
        # boy is reached by two labels (re-entrancy)
        labels_to_boy = [t for t, arcs in enumerate(seq.arcs) if 4 in arcs]
        assert labels_to_boy == [5, 6]

    def test_single_concept_concepts_mode(self):
        seq = linearize(AmrGraph.build(["alpha"]), Mode.CONCEPTS)
        assert [e.name for e in seq.entries][1:] == ["alpha"]
        assert all(not a for a in seq.arcs)

    def test_concepts_mode_reversal_tag(self):
        # the later node is the gold head -> plain label; later node is the dependent -> _R
        g = AmrGraph.build(["a", "b"], [(0, 1, "ARG0")])
        seq = linearize(g, Mode.CONCEPTS)
        assert seq.labels[2] == {1: ("ARG0_R",)}

    def test_lower_triangular(self, boy_girl):
        for mode in Mode:
            seq = linearize(boy_girl, mode)
            for t, arcs in enumerate(seq.arcs):
                assert all(j < t for j in arcs)

    def test_disconnected_strict_raises(self):
        with pytest.raises(GraphError):
            linearize(AmrGraph.build(["a", "b"]), Mode.LEVI)

    @settings(max_examples=200, deadline=None)
    @given(amr_graphs())
    def test_restore_inverts_linearize(self, g):
        for mode in Mode:
            seq = linearize(g, mode)
            for t, arcs in enumerate(seq.arcs):
                assert all(j < t for j in arcs)
            back = restore(seq, mode)
            assert back == g.canonical()
            assert isomorphic(back, g)


class TestRestore:
    def test_trivial(self):
        seq = NodeSequence((Entry(NodeKind.ROOT, "<root>"), Entry(NodeKind.CONCEPT, "alpha")), (frozenset(), frozenset()), Mode.LEVI)
        assert restore(seq) == AmrGraph.build(["alpha"])

    def _two(self, label):
        entries = (
            Entry(NodeKind.ROOT, "<root>"),
            Entry(NodeKind.CONCEPT, "a"),
            Entry(NodeKind.CONCEPT, "b"),
            Entry(NodeKind.LABEL, label),
        )
        return NodeSequence(entries, (frozenset(), frozenset(), frozenset(), frozenset({1, 2})), Mode.LEVI)

    def test_reversed_label_flips_edge(self):
        assert edge_set(restore(self._two("ARG0"))) == [(0, 1, "ARG0")]
        assert edge_set(restore(self._two("ARG0_R"))) == [(1, 0, "ARG0")]

    def test_orphan_label_dropped_and_logged(self):
        entries = (Entry(NodeKind.ROOT, "<root>"), Entry(NodeKind.CONCEPT, "a"), Entry(NodeKind.LABEL, "ARG0"))
        seq = NodeSequence(entries, (frozenset(), frozenset(), frozenset()), Mode.LEVI)
        log = []
        with pytest.warns(OrphanLabelWarning):
            g = restore(seq, repairs=log)
        assert g.edges == () and len(log) == 1

    def test_label_with_three_endpoints_gives_one_edge_per_head(self):
        entries = (
            Entry(NodeKind.ROOT, "<root>"),
            Entry(NodeKind.CONCEPT, "a"),
            Entry(NodeKind.CONCEPT, "b"),
            Entry(NodeKind.CONCEPT, "c"),
            Entry(NodeKind.LABEL, "mod"),
        )
        arcs = (frozenset(), frozenset(), frozenset(), frozenset(), frozenset({1, 2, 3}))
        log = []
        g = restore(NodeSequence(entries, arcs, Mode.LEVI), repairs=log)
        assert edge_set(g) == [(0, 2, "mod"), (1, 2, "mod")]
        assert log

    def test_cycle_tolerated(self):
        g = AmrGraph.build(["a", "b"], [(0, 1, "A"), (1, 0, "B")])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", CyclicGraphWarning)
            seq = linearize(g, Mode.LEVI)
            assert restore(seq) == g.canonical()

    def test_sequence_validation(self):
        with pytest.raises(GraphError):
            NodeSequence((Entry(NodeKind.CONCEPT, "a"),), (frozenset(),), Mode.LEVI)
        with pytest.raises(GraphError):
            NodeSequence(
                (Entry(NodeKind.ROOT, "<root>"), Entry(NodeKind.CONCEPT, "a")), (frozenset(), frozenset({1})), Mode.LEVI
            )


def test_thousand_random_graphs_roundtrip_quickly():
    rng = np.random.default_rng(11)
    for _ in range(300):
        g = random_amr(rng)
        assert from_levi(to_levi(g)) == g.canonical()
