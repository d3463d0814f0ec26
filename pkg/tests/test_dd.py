"""Diagram construction and query tests, anchored on the worked 3-variable
l1 instance: box [-7, 8]^3, budget 4, sub-intervals {[-7,-2], [-2,3], [3,8]}
per variable."""

import numpy as np
import pytest

from ddscale import dd
from ddscale.dd import Box, PartitionScheme
from ddscale.scale import L0, SeparableScale


@pytest.fixture
def l1_instance():
    scale = SeparableScale.lp_power(3, 1.0)
    box = Box.cube(3, -7.0, 8.0)
    parts = PartitionScheme.from_intervals([[(-7, -2), (-2, 3), (3, 8)]] * 3)
    return scale, box, parts


@pytest.fixture
def l1_diagram(l1_instance):
    scale, box, parts = l1_instance
    return dd.build(scale, box, parts, 4.0)


class TestBoxAndPartitions:
    def test_box_validation(self):
        with pytest.raises(ValueError):
            Box(np.array([1.0]), np.array([0.0]))

    def test_split_shares_endpoint(self):
        box = Box.cube(2, -1.0, 1.0)
        left, right = box.split(1, 0.25)
        assert left.upper[1] == right.lower[1] == 0.25
        assert left.lower[1] == -1.0 and right.upper[1] == 1.0
        assert left.lower[0] == right.lower[0] == -1.0

    def test_uniform_partition_covers(self):
        box = Box.cube(2, -3.0, 5.0)
        parts = PartitionScheme.uniform(box, 4)
        assert parts.covers(box)
        assert parts.counts() == [4, 4]

    def test_uniform_on_infinite_interval_single_piece(self):
        box = Box(np.array([-np.inf]), np.array([np.inf]))
        parts = PartitionScheme.uniform(box, 7)
        assert parts.counts() == [1]

    def test_intervals_must_chain(self):
        with pytest.raises(ValueError):
            PartitionScheme.from_intervals([[(0, 1), (2, 3)]])

    def test_partition_must_cover(self, l1_instance):
        scale, box, _ = l1_instance
        narrow = PartitionScheme.from_intervals([[(-7, 8)], [(-7, 8)], [(-2, 8)]])
        with pytest.raises(ValueError):
            dd.build(scale, box, narrow, 4.0)


class TestBuild:
    def test_layer_states_match_hand_trace(self, l1_diagram):
        assert list(l1_diagram.states[1]) == [0.0, 2.0, 3.0]
        assert list(l1_diagram.states[2]) == [0.0, 2.0, 3.0, 4.0, 5.0, 6.0]

    def test_sizes_match_hand_trace(self, l1_diagram):
        assert [layer.num_arcs for layer in l1_diagram.arcs] == [6, 18, 14]
        assert l1_diagram.num_nodes == 11
        assert l1_diagram.num_paths() == 80

    def test_every_point_respects_budget_through_interval_bounds(
            self, l1_instance, l1_diagram):
        scale, _, parts = l1_instance
        pts = dd.enumerate_paths(l1_diagram, 100)
        edges = parts.edges[0]
        lows, highs = edges[:-1], edges[1:]
        gammas = np.array([
            scale.components[0].interval_lower_bound(lo, hi)
            for lo, hi in zip(lows, highs)
        ])
        for x in pts:
            total = 0.0
            for coord in x:
                fits = [g for lo, hi, g in zip(lows, highs, gammas)
                        if coord in (lo, hi)]
                assert fits, "label is not a sub-interval endpoint"
                total += min(fits)
            assert total <= 4.0 + 1e-12

    def test_infeasible_budget_gives_empty_diagram(self):
        scale = SeparableScale.lp_power(1, 1.0)
        box = Box.cube(1, 1.0, 2.0)
        d = dd.build(scale, box, PartitionScheme.uniform(box, 1), 0.5)
        assert d.is_empty()
        assert d.num_paths() == 0

    def test_zero_budget_straddling_box(self):
        scale = SeparableScale.scad(3, 1.0, 3.0)
        box = Box.cube(3, -1.0, 1.0)
        d = dd.build(scale, box, PartitionScheme.uniform(box, 1), 0.0)
        assert d.num_paths() == 2 ** 3
        for layer_states in d.states:
            assert np.all(layer_states == 0.0)

    def test_single_variable_runs_terminal_block_only(self):
        scale = SeparableScale.lp_power(1, 1.0)
        box = Box.cube(1, 1.0, 2.0)
        d = dd.build(scale, box, PartitionScheme.uniform(box, 1), 10.0)
        assert len(d.states) == 2
        assert list(dd.enumerate_paths(d, 10).ravel()) == [1.0, 2.0]

    def test_states_finite_with_infinite_box(self):
        scale = SeparableScale.scad(2, 1.0, 3.0)
        box = Box(np.array([-np.inf, 0.0]), np.array([np.inf, np.inf]))
        d = dd.build(scale, box, PartitionScheme.uniform(box, 1), 5.0)
        for layer_states in d.states:
            assert np.isfinite(layer_states).all()

    def test_every_interior_node_has_incoming_arc(self, l1_diagram):
        for k, layer in enumerate(l1_diagram.arcs):
            covered = np.zeros(l1_diagram.states[k + 1].size, dtype=bool)
            covered[layer.heads] = True
            if k < len(l1_diagram.arcs) - 1:
                assert covered.all()

    def test_arcs_come_in_endpoint_pairs(self, l1_diagram):
        for layer in l1_diagram.arcs:
            assert layer.num_arcs % 2 == 0
            assert np.all(layer.tails[0::2] == layer.tails[1::2])
            assert np.all(layer.heads[0::2] == layer.heads[1::2])
            assert np.all(layer.labels[0::2] <= layer.labels[1::2])


class TestRelaxWidth:
    def test_noop_when_within_limit(self, l1_diagram):
        relaxed = dd.relax_width(l1_diagram, 10)
        assert relaxed.dump() == l1_diagram.dump()

    def test_merged_state_is_minimum(self):
        scale = SeparableScale.lp_power(2, 1.0)
        box = Box.cube(2, 2.0, 3.0)
        parts = PartitionScheme.from_intervals(
            [[(2.0, 3.0)], [(2.0, 2.5), (2.5, 3.0)]])
        d = dd.build(scale, box, parts, 100.0)
        assert list(d.states[1]) == [2.0]
        # Force a wider second layer via the other variable order.
        parts2 = PartitionScheme.from_intervals(
            [[(2.0, 2.5), (2.5, 3.0)], [(2.0, 3.0)]])
        d2 = dd.build(scale, box, parts2, 100.0)
        assert list(d2.states[1]) == [2.0, 2.5]
        merged = dd.relax_width(d2, 1)
        assert list(merged.states[1]) == [2.0]

    def test_paths_preserved(self, l1_diagram):
        relaxed = dd.relax_width(l1_diagram, 2, buckets=2)
        assert relaxed.width() <= 2
        original = {tuple(p) for p in dd.enumerate_paths(l1_diagram, 1000)}
        widened = {tuple(p) for p in dd.enumerate_paths(relaxed, 5000)}
        assert original <= widened

    def test_inline_width_limit_matches_post_relaxation_soundness(
            self, l1_instance):
        scale, box, parts = l1_instance
        exact = dd.build(scale, box, parts, 4.0)
        limited = dd.build(scale, box, parts, 4.0, width_limit=2, merge_buckets=2)
        assert limited.width() <= 2
        original = {tuple(p) for p in dd.enumerate_paths(exact, 1000)}
        widened = {tuple(p) for p in dd.enumerate_paths(limited, 5000)}
        assert original <= widened


class TestEpigraph:
    def test_terminal_arcs_filtered_by_t_interval(self):
        scale = SeparableScale.lp_power(1, 1.0)
        box = Box.cube(1, 1.0, 2.0)
        d = dd.build_epigraph(scale, box, PartitionScheme.uniform(box, 1),
                              0.0, 3.0, 3)
        # accumulated state is 1; sub-intervals [0,1], [1,2], [2,3] all
        # have upper endpoints >= 1 so all three connect
        t_labels = sorted(set(d.arcs[-1].labels))
        assert t_labels == [0.0, 1.0, 2.0, 3.0]
        assert d.arcs[-1].num_arcs == 6
        # with a tighter ceiling only the intervals above 1 survive
        d2 = dd.build_epigraph(scale, box, PartitionScheme.uniform(box, 1),
                               0.0, 0.9, 3)
        assert d2.is_empty()

    def test_l0_straddling_connects_everything(self):
        scale = SeparableScale.l0(2)
        box = Box.cube(2, -1.0, 1.0)
        d = dd.build_epigraph(scale, box, PartitionScheme.uniform(box, 1),
                              0.0, 2.0, 4)
        assert d.arcs[-1].num_arcs == 2 * 4

    def test_epigraph_flag_and_dimensions(self):
        scale = SeparableScale.mcp(2, 1.0, 3.0)
        box = Box.cube(2, -2.0, 2.0)
        d = dd.build_epigraph(scale, box, PartitionScheme.uniform(box, 2),
                              0.0, 4.0, 2)
        assert d.epigraph
        assert d.num_vars == 3


class TestLongestPath:
    def test_zero_weights(self, l1_diagram):
        weights = [np.zeros(layer.num_arcs) for layer in l1_diagram.arcs]
        point, value = dd.longest_path(l1_diagram, weights)
        assert value == 0.0
        # deterministic tie-break: smallest label per layer backwards
        point2, _ = dd.longest_path(l1_diagram, weights)
        assert np.array_equal(point, point2)

    def test_matches_enumeration(self, l1_diagram):
        coeffs = np.array([1.0, -2.0, 0.5])
        weights = dd.coordinate_weights(l1_diagram, coeffs)
        point, value = dd.longest_path(l1_diagram, weights)
        pts = dd.enumerate_paths(l1_diagram, 100)
        best = float(np.max(pts @ coeffs))
        assert value == pytest.approx(best, abs=1e-12)
        assert point @ coeffs == pytest.approx(best, abs=1e-12)

    def test_single_path(self):
        scale = SeparableScale.lp_power(1, 1.0)
        box = Box.cube(1, 2.0, 2.0)
        d = dd.build(scale, box, PartitionScheme.uniform(box, 1), 5.0)
        point, value = dd.longest_path(
            d, [np.full(d.arcs[0].num_arcs, 7.0)])
        assert point[0] == 2.0
        assert value == 7.0

    def test_empty_diagram_raises(self):
        scale = SeparableScale.lp_power(1, 1.0)
        box = Box.cube(1, 1.0, 2.0)
        d = dd.build(scale, box, PartitionScheme.uniform(box, 1), 0.5)
        with pytest.raises(dd.EmptyDiagramError):
            dd.longest_path(d, [np.zeros(0)])

    def test_infinite_labels_rejected(self):
        scale = SeparableScale.l0(1)
        box = Box(np.array([-np.inf]), np.array([np.inf]))
        d = dd.build(scale, box, PartitionScheme.uniform(box, 1), 2.0)
        with pytest.raises(ValueError):
            dd.longest_path(d, [np.zeros(d.arcs[0].num_arcs)])


class TestEnumerate:
    def test_empty(self):
        scale = SeparableScale.lp_power(1, 1.0)
        box = Box.cube(1, 1.0, 2.0)
        d = dd.build(scale, box, PartitionScheme.uniform(box, 1), 0.5)
        assert dd.enumerate_paths(d, 10).shape == (0, 1)

    def test_cap_overflow(self, l1_diagram):
        with pytest.raises(dd.PathOverflowError):
            dd.enumerate_paths(l1_diagram, 79)

    def test_lexicographic_order(self, l1_diagram):
        pts = dd.enumerate_paths(l1_diagram, 100)
        as_tuples = [tuple(p) for p in pts]
        assert as_tuples == sorted(as_tuples)


class TestDump:
    def test_golden_single_variable(self):
        scale = SeparableScale.lp_power(1, 1.0)
        box = Box.cube(1, 1.0, 2.0)
        d = dd.build(scale, box, PartitionScheme.uniform(box, 1), 10.0)
        assert d.dump() == (
            "layer 1: 0(0) -> [1 -> 0]\n"
            "layer 1: 0(0) -> [2 -> 0]\n"
            "layer 2: 0(terminal)"
        )

    def test_golden_worked_instance_head(self, l1_diagram):
        lines = l1_diagram.dump().splitlines()
        assert lines[0] == "layer 1: 0(0) -> [-7 -> 1]"
        assert lines[1] == "layer 1: 0(0) -> [-2 -> 1]"
        assert lines[-1] == "layer 4: 0(terminal)"
