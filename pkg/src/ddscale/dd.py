"""Layered decision diagrams for norm-bounding constraints.

A diagram is a layered DAG whose root-to-terminal paths encode candidate
points: the arc chosen at layer k carries that point's k-th coordinate as a
label.  Nodes accumulate a state value, the sum over previous layers of the
exact minimum of each penalty term over the chosen sub-interval, so state
values under-estimate the penalty everywhere on the corresponding boxes.
The final layer keeps only transitions whose accumulated state respects the
budget, which makes the diagram's solution set a relaxation of the feasible
region it was built from.

Construction is vectorized per layer: candidate states are deduplicated by
exact value, and layers wider than a requested limit can be merged by
bucketing the state range and keeping the per-bucket minimum, which
preserves every path of the unmerged diagram.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .scale import SeparableScale

__all__ = [
    "Box",
    "PartitionScheme",
    "ArcLayer",
    "Diagram",
    "EmptyDiagramError",
    "PathOverflowError",
    "build",
    "build_epigraph",
    "relax_width",
    "longest_path",
    "longest_path_by_coeffs",
    "coordinate_weights",
    "enumerate_paths",
]


class EmptyDiagramError(RuntimeError):
    """Raised when an operation needs at least one root-terminal path."""


class PathOverflowError(RuntimeError):
    """Raised when a diagram has more paths than the enumeration cap."""


@dataclass(frozen=True)
class Box:
    """Per-variable closed intervals; endpoints may be infinite."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        up = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        if lo.ndim != 1 or lo.shape != up.shape:
            raise ValueError("lower and upper must be 1-d arrays of equal length")
        if np.any(np.isnan(lo)) or np.any(np.isnan(up)):
            raise ValueError("box endpoints cannot be NaN")
        if np.any(lo > up):
            raise ValueError("box has an empty interval")

    @classmethod
    def from_bounds(cls, bounds: Sequence[tuple[float, float]]) -> "Box":
        lo = np.array([b[0] for b in bounds], dtype=float)
        up = np.array([b[1] for b in bounds], dtype=float)
        return cls(lo, up)

    @classmethod
    def cube(cls, dim: int, lo: float, hi: float) -> "Box":
        return cls(np.full(dim, float(lo)), np.full(dim, float(hi)))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.lower).all() and np.isfinite(self.upper).all())

    def contains(self, x, tol: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def clip(self, x) -> np.ndarray:
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def split(self, index: int, at: float) -> tuple["Box", "Box"]:
        if not self.lower[index] <= at <= self.upper[index]:
            raise ValueError("split point outside the interval")
        lo2 = self.lower.copy()
        up1 = self.upper.copy()
        up1[index] = at
        lo2[index] = at
        return Box(self.lower.copy(), up1), Box(lo2, self.upper.copy())


@dataclass(frozen=True)
class PartitionScheme:
    """Per-variable sub-interval edges spanning a box.

    ``edges[i]`` is a non-decreasing array whose consecutive pairs are the
    sub-intervals of variable i; adjacent sub-intervals share an endpoint by
    construction.
    """

    edges: tuple[np.ndarray, ...]

    def __post_init__(self):
        cleaned = []
        for e in self.edges:
            e = np.asarray(e, dtype=float)
            if e.ndim != 1 or e.size < 2:
                raise ValueError("each variable needs at least one sub-interval")
            if np.any(np.isnan(e)) or np.any(np.diff(e) < 0):
                raise ValueError("sub-interval edges must be non-decreasing")
            cleaned.append(e)
        object.__setattr__(self, "edges", tuple(cleaned))

    @property
    def dim(self) -> int:
        return len(self.edges)

    def counts(self) -> list[int]:
        return [e.size - 1 for e in self.edges]

    def covers(self, box: Box) -> bool:
        if box.dim != self.dim:
            return False
        for e, lo, up in zip(self.edges, box.lower, box.upper):
            for edge, bound in ((e[0], lo), (e[-1], up)):
                if math.isinf(bound) or math.isinf(edge):
                    if edge != bound:
                        return False
                elif abs(edge - bound) > 1e-9 * max(1.0, abs(bound)):
                    return False
        return True

    @classmethod
    def uniform(cls, box: Box, count) -> "PartitionScheme":
        """Split each interval into ``count`` equal pieces.

        Infinite or zero-width intervals get a single sub-interval whatever
        the requested count.
        """
        counts = np.broadcast_to(np.asarray(count, dtype=int), (box.dim,))
        edges = []
        for lo, up, k in zip(box.lower, box.upper, counts):
            if k < 1:
                raise ValueError("sub-interval count must be positive")
            if not (math.isfinite(lo) and math.isfinite(up)) or up == lo or k == 1:
                edges.append(np.array([lo, up]))
            else:
                edges.append(np.linspace(lo, up, k + 1))
        return cls(tuple(edges))

    @classmethod
    def from_intervals(cls, intervals: Sequence[Sequence[tuple[float, float]]]):
        edges = []
        for ivs in intervals:
            if not ivs:
                raise ValueError("each variable needs at least one sub-interval")
            e = [ivs[0][0]]
            for lo, hi in ivs:
                if lo != e[-1]:
                    raise ValueError("consecutive sub-intervals must share endpoints")
                if hi < lo:
                    raise ValueError("sub-interval with negative width")
                e.append(hi)
            edges.append(np.array(e, dtype=float))
        return cls(tuple(edges))


@dataclass
class ArcLayer:
    """Arcs between two adjacent node layers; parallel arcs are allowed."""

    tails: np.ndarray
    heads: np.ndarray
    labels: np.ndarray
    _grouped: Optional[tuple] = field(default=None, repr=False, compare=False)

    @property
    def num_arcs(self) -> int:
        return self.tails.shape[0]

    def grouped_by_head(self, num_heads: int):
        """Cached (order, starts, tails[order], labels[order]).

        Arcs are ordered by (head, label, creation index), so within a head
        group the first position attaining a maximum is also the
        smallest-label, earliest-created one.
        """
        if self._grouped is None or self._grouped[4] != num_heads:
            order = np.lexsort((np.arange(self.num_arcs), self.labels,
                                self.heads))
            sorted_heads = self.heads[order]
            starts = np.searchsorted(sorted_heads, np.arange(num_heads + 1))
            self._grouped = (
                order,
                starts,
                self.tails[order],
                self.labels[order],
                num_heads,
            )
        return self._grouped[:4]


@dataclass
class Diagram:
    """Immutable after construction; queries are read-only.

    ``states[0]`` is the root layer, ``states[-1]`` the terminal layer, and
    ``arcs[k]`` connects layer k to layer k+1.  ``num_vars`` counts encoded
    coordinates (the epigraph variant appends one).
    """

    states: list[np.ndarray]
    arcs: list[ArcLayer]
    box: Box
    budget: Optional[float]
    epigraph: bool = False

    @property
    def num_vars(self) -> int:
        return len(self.arcs)

    @property
    def num_nodes(self) -> int:
        return sum(s.size for s in self.states)

    @property
    def num_arcs(self) -> int:
        return sum(layer.num_arcs for layer in self.arcs)

    def width(self) -> int:
        return max(s.size for s in self.states)

    def num_paths(self) -> float:
        """Number of root-terminal paths (exact in float64 up to 2**53)."""
        counts = np.ones(1)
        for k in range(len(self.arcs) - 1, -1, -1):
            layer = self.arcs[k]
            prev = np.zeros(self.states[k].size)
            np.add.at(prev, layer.tails, counts[layer.heads])
            counts = prev
        return float(counts[0])

    def is_empty(self) -> bool:
        return self.arcs[-1].num_arcs == 0 if self.arcs else True

    def node_offsets(self) -> np.ndarray:
        sizes = [s.size for s in self.states]
        return np.concatenate([[0], np.cumsum(sizes)])

    def dump(self) -> str:
        """Deterministic text dump, one arc per line."""
        lines = []
        for k, layer in enumerate(self.arcs):
            seen = np.zeros(self.states[k].size, dtype=bool)
            for t, h, lab in zip(layer.tails, layer.heads, layer.labels):
                seen[t] = True
                state = self.states[k][t]
                lines.append(
                    f"layer {k + 1}: {t}({state:.12g}) -> [{lab:.12g} -> {h}]"
                )
            for t in np.flatnonzero(~seen):
                lines.append(f"layer {k + 1}: {t}({self.states[k][t]:.12g}) -> []")
        lines.append(f"layer {len(self.arcs) + 1}: 0(terminal)")
        return "\n".join(lines)


def _stage_bounds(component, edges: np.ndarray) -> np.ndarray:
    lows, highs = edges[:-1], edges[1:]
    return np.array(
        [component.interval_lower_bound(lo, hi) for lo, hi in zip(lows, highs)]
    )


def _paired_arcs(tails, lows_sel, highs_sel, heads):
    k = tails.shape[0]
    tails2 = np.repeat(tails, 2)
    heads2 = np.repeat(heads, 2)
    labels = np.empty(2 * k)
    labels[0::2] = lows_sel
    labels[1::2] = highs_sel
    return ArcLayer(tails2.astype(np.int64), heads2.astype(np.int64), labels)


def _merge_states(states: np.ndarray, buckets: int):
    """Merge sorted distinct states into at most ``buckets`` nodes.

    Returns (merged_states, remap) where ``remap[old] = new``; each merged
    node keeps the minimum state of its bucket, so merged states still
    under-estimate every path they absorb.
    """
    lo, hi = states[0], states[-1]
    span = hi - lo
    if span <= 0:
        return states[:1].copy(), np.zeros(states.size, dtype=np.int64)
    idx = np.minimum((buckets * (states - lo) / span).astype(np.int64), buckets - 1)
    uniq, remap = np.unique(idx, return_inverse=True)
    firsts = np.searchsorted(idx, uniq)
    return states[firsts], remap.astype(np.int64)


def _limit_width(states: np.ndarray, width_limit: Optional[int],
                 buckets: Optional[int]):
    """Repeated bucket merges until the layer respects the width limit."""
    remap_total = None
    if width_limit is None:
        return states, None
    k = buckets if buckets is not None else 10 * width_limit
    while states.size > width_limit:
        k = max(1, min(k, states.size - 1))
        states, remap = _merge_states(states, k)
        remap_total = remap if remap_total is None else remap[remap_total]
        k = max(1, k // 2)
    return states, remap_total


def _check_build_args(scale: SeparableScale, box: Box, parts: PartitionScheme):
    if box.dim != scale.dim or parts.dim != scale.dim:
        raise ValueError(
            f"dimension mismatch: scale {scale.dim}, box {box.dim}, parts {parts.dim}"
        )
    if not parts.covers(box):
        raise ValueError("partition scheme does not cover the box")


def build(scale: SeparableScale, box: Box, parts: PartitionScheme, budget: float,
          width_limit: Optional[int] = None,
          merge_buckets: Optional[int] = None) -> Diagram:
    """Top-down construction of the relaxed diagram for ``scale(x) <= budget``.

    Layers before the last create one node per distinct accumulated state;
    the last layer connects to the terminal only when the accumulated state
    stays within the budget.  The result may have no root-terminal path.
    When ``width_limit`` is given, layers wider than it are merged on the
    fly by the min-state bucket rule.
    """
    _check_build_args(scale, box, parts)
    if not math.isfinite(budget):
        raise ValueError("budget must be finite")
    n = scale.dim
    states: list[np.ndarray] = [np.zeros(1)]
    arcs: list[ArcLayer] = []
    cur = states[0]
    for i in range(n):
        edges = parts.edges[i]
        lows, highs = edges[:-1], edges[1:]
        gam = _stage_bounds(scale.components[i], edges)
        m, J = cur.size, lows.size
        tail_idx = np.repeat(np.arange(m), J)
        j_idx = np.tile(np.arange(J), m)
        cand = (cur[:, None] + gam[None, :]).ravel()
        if i == n - 1:
            keep = cand <= budget
            heads = np.zeros(int(keep.sum()), dtype=np.int64)
            arcs.append(
                _paired_arcs(tail_idx[keep], lows[j_idx[keep]],
                             highs[j_idx[keep]], heads)
            )
            states.append(np.zeros(1))
        else:
            uniq, inv = np.unique(cand, return_inverse=True)
            uniq, remap = _limit_width(uniq, width_limit, merge_buckets)
            if remap is not None:
                inv = remap[inv]
            arcs.append(_paired_arcs(tail_idx, lows[j_idx], highs[j_idx], inv))
            states.append(uniq)
            cur = uniq
    return Diagram(states=states, arcs=arcs, box=box, budget=float(budget))


def build_epigraph(scale: SeparableScale, box: Box, parts: PartitionScheme,
                   t_lo: float, t_hi: float, t_parts: int,
                   width_limit: Optional[int] = None,
                   merge_buckets: Optional[int] = None) -> Diagram:
    """Diagram over (x, t) whose hull contains every (x, t) with
    ``scale(x) <= t`` for x in the box and t in [t_lo, t_hi].

    The coordinate layers run exactly as in :func:`build` with no budget;
    the final layer encodes t with ``t_parts`` uniform sub-intervals, and a
    node connects to the terminal through a t sub-interval exactly when its
    accumulated state does not exceed the sub-interval's upper endpoint.
    The caller must supply ``t_hi`` at least as large as the reachable
    penalty bound or epigraph points may be lost.
    """
    _check_build_args(scale, box, parts)
    if not (math.isfinite(t_lo) and math.isfinite(t_hi)):
        raise ValueError("t range must be finite")
    if t_lo > t_hi:
        raise ValueError(f"invalid t range [{t_lo}, {t_hi}]")
    if t_parts < 1:
        raise ValueError("t_parts must be positive")
    n = scale.dim
    states: list[np.ndarray] = [np.zeros(1)]
    arcs: list[ArcLayer] = []
    cur = states[0]
    for i in range(n):
        edges = parts.edges[i]
        lows, highs = edges[:-1], edges[1:]
        gam = _stage_bounds(scale.components[i], edges)
        m, J = cur.size, lows.size
        tail_idx = np.repeat(np.arange(m), J)
        j_idx = np.tile(np.arange(J), m)
        cand = (cur[:, None] + gam[None, :]).ravel()
        uniq, inv = np.unique(cand, return_inverse=True)
        uniq, remap = _limit_width(uniq, width_limit, merge_buckets)
        if remap is not None:
            inv = remap[inv]
        arcs.append(_paired_arcs(tail_idx, lows[j_idx], highs[j_idx], inv))
        states.append(uniq)
        cur = uniq
    t_edges = np.linspace(t_lo, t_hi, t_parts + 1) if t_hi > t_lo \
        else np.array([t_lo, t_hi])
    t_lows, t_highs = t_edges[:-1], t_edges[1:]
    m, J = cur.size, t_lows.size
    tail_idx = np.repeat(np.arange(m), J)
    j_idx = np.tile(np.arange(J), m)
    keep = cur[tail_idx] <= t_highs[j_idx]
    heads = np.zeros(int(keep.sum()), dtype=np.int64)
    arcs.append(
        _paired_arcs(tail_idx[keep], t_lows[j_idx[keep]], t_highs[j_idx[keep]],
                     heads)
    )
    states.append(np.zeros(1))
    return Diagram(states=states, arcs=arcs, box=box, budget=None, epigraph=True)


def relax_width(diagram: Diagram, width_limit: int,
                buckets: Optional[int] = None) -> Diagram:
    """Merge interior layers wider than ``width_limit``.

    Bucket count defaults to ten times the limit and is halved until each
    layer fits.  Every root-terminal path of the input remains one of the
    output, so the result relaxes the input.
    """
    if width_limit < 1:
        raise ValueError("width limit must be positive")
    states = [s.copy() for s in diagram.states]
    arcs = [
        ArcLayer(l.tails.copy(), l.heads.copy(), l.labels.copy())
        for l in diagram.arcs
    ]
    for k in range(1, len(states) - 1):
        if states[k].size <= width_limit:
            continue
        merged, remap = _limit_width(states[k], width_limit, buckets)
        states[k] = merged
        arcs[k - 1].heads = remap[arcs[k - 1].heads]
        arcs[k].tails = remap[arcs[k].tails]
    return Diagram(states=states, arcs=arcs, box=diagram.box,
                   budget=diagram.budget, epigraph=diagram.epigraph)


def coordinate_weights(diagram: Diagram, coeffs) -> list[np.ndarray]:
    """Arc weights ``label * coeffs[k]`` for each layer k."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (diagram.num_vars,):
        raise ValueError(
            f"expected {diagram.num_vars} coefficients, got {coeffs.shape}"
        )
    return [layer.labels * c for layer, c in zip(diagram.arcs, coeffs)]


def longest_path(diagram: Diagram, weights: Sequence[np.ndarray]):
    """Maximum-weight root-terminal path by one forward pass per layer.

    Ties are broken toward the smaller arc label and then the earlier
    created arc, which makes the result deterministic.  Labels must be
    finite.  Returns ``(point, value)`` where ``point`` is the encoded
    coordinate vector of the winning path.
    """
    if len(weights) != len(diagram.arcs):
        raise ValueError("one weight array per arc layer required")
    ordered = []
    for k, layer in enumerate(diagram.arcs):
        w = np.asarray(weights[k], dtype=float)
        if w.shape != layer.tails.shape:
            raise ValueError(f"weight array {k} does not match the arc layer")
        order, *_ = layer.grouped_by_head(diagram.states[k + 1].size)
        ordered.append(w[order])
    return _longest_path_ordered(diagram, ordered)


def _longest_path_ordered(diagram: Diagram, ordered_weights):
    """Core pass; weights are already in each layer's grouped arc order."""
    if diagram.is_empty():
        raise EmptyDiagramError("diagram has no root-terminal path")
    for layer in diagram.arcs:
        if not np.isfinite(layer.labels).all():
            raise ValueError("longest path requires finite arc labels")
    values = [np.zeros(1)]
    grouped = []
    for k, layer in enumerate(diagram.arcs):
        num_heads = diagram.states[k + 1].size
        _, starts, tails_o, labels_o = layer.grouped_by_head(num_heads)
        grouped.append((starts, tails_o, labels_o))
        cand = values[k][tails_o] + ordered_weights[k]
        values.append(np.maximum.reduceat(cand, starts[:-1]))
    total = float(values[-1][0])
    # Backward pass touching one head group per layer; argmax lands on the
    # smallest-label, earliest-created arc among exact ties.
    point = np.empty(diagram.num_vars)
    node = 0
    for k in range(len(diagram.arcs) - 1, -1, -1):
        starts, tails_o, labels_o = grouped[k]
        lo, hi = starts[node], starts[node + 1]
        cand = values[k][tails_o[lo:hi]] + ordered_weights[k][lo:hi]
        pick = lo + int(np.argmax(cand))
        point[k] = labels_o[pick]
        node = tails_o[pick]
    return point, total


def longest_path_by_coeffs(diagram: Diagram, coeffs):
    """Longest path with arc weights ``label * coeffs[k]``.

    Equivalent to :func:`longest_path` with :func:`coordinate_weights` but
    without re-indexing per call, which matters inside separation loops.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (diagram.num_vars,):
        raise ValueError(
            f"expected {diagram.num_vars} coefficients, got {coeffs.shape}"
        )
    ordered = []
    for k, layer in enumerate(diagram.arcs):
        _, _, _, labels_o = layer.grouped_by_head(diagram.states[k + 1].size)
        ordered.append(labels_o * coeffs[k])
    return _longest_path_ordered(diagram, ordered)


def _reach_masks(diagram: Diagram) -> list[np.ndarray]:
    masks = [np.ones(1, dtype=bool)]
    for k in range(len(diagram.arcs) - 1, -1, -1):
        layer = diagram.arcs[k]
        mask = np.zeros(diagram.states[k].size, dtype=bool)
        ok = masks[0][layer.heads]
        mask[layer.tails[ok]] = True
        masks.insert(0, mask)
    return masks


def enumerate_paths(diagram: Diagram, cap: int) -> np.ndarray:
    """All encoded points in lexicographic order.

    Exceeding ``cap`` raises :class:`PathOverflowError` before any point is
    materialized; paths are never silently truncated.  Duplicate points
    appear once per encoding path.
    """
    total = diagram.num_paths()
    if total > cap:
        raise PathOverflowError(f"{total:.0f} paths exceed cap {cap}")
    if total == 0:
        return np.empty((0, diagram.num_vars))
    reach = _reach_masks(diagram)
    points = []
    # Depth-first over arc layers, restricted to terminal-reaching heads.
    stack = [(0, 0, [])]
    while stack:
        k, node, prefix = stack.pop()
        if k == len(diagram.arcs):
            points.append(prefix)
            continue
        layer = diagram.arcs[k]
        sel = np.flatnonzero(layer.tails == node)
        for a in sel:
            if reach[k + 1][layer.heads[a]]:
                stack.append((k + 1, layer.heads[a], prefix + [layer.labels[a]]))
    pts = np.array(points, dtype=float)
    order = np.lexsort(pts.T[::-1])
    return pts[order]
