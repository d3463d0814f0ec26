"""Spatial branch-and-cut over box partitions of the coefficient space.

Nodes are processed best-dual-bound-first.  Each node rebuilds its penalty
diagram on its own box with fresh uniform partitions, runs the
outer-approximation loop for a dual bound, updates the incumbent by
evaluating the node's master point in the true objective, and either prunes
or splits its box at that point along the coordinate whose value lies
closest to the middle of its interval (normalized by width).  Children
inherit all parent cuts: gradient cuts are globally valid and diagram cuts
stay valid because the child's feasible set only shrinks.

The solve is deterministic for a fixed configuration; with the
``deterministic`` flag the report's wall time is zeroed so that repeated
runs serialize identically.
"""

from __future__ import annotations

import heapq
import json
import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import dd, hull, oa
from .dd import Box, PartitionScheme
from .regress import BUDGET_FORM, PENALTY_FORM, RegressionProblem

__all__ = [
    "SolverConfig",
    "BnbNode",
    "SolveReport",
    "solve",
    "branch",
    "primal_from_point",
    "initial_box",
]

REPORT_SCHEMA = 1

STATUS_GAP = "gap_reached"
STATUS_OPTIMAL = "optimal"
STATUS_TIME = "time_limit"
STATUS_NODES = "node_limit"


@dataclass
class SolverConfig:
    """Solver settings; the defaults are the desk-scale profile."""

    gap: float = 0.05
    abs_gap: float = 1e-6
    width_limit: int = 1000
    partitions: int = 64
    t_partitions: Optional[int] = None
    merge_buckets: Optional[int] = None
    subgradient_iters: int = 50
    subgrad_early_exit: Optional[float] = None
    oa_iters: int = 100
    eps: float = 1e-6
    stall_window: int = 10
    stall_rel: float = 1e-7
    time_limit: Optional[float] = None
    node_limit: int = 100_000
    seed: int = 0
    deterministic: bool = False
    threads: int = 1
    box_scale: float = 10.0
    ridge: float = 1e-3
    prune_tol: float = 1e-9

    @classmethod
    def paper_profile(cls, **overrides) -> "SolverConfig":
        """The settings used for the published benchmark runs."""
        base = dict(width_limit=10_000, partitions=2500)
        base.update(overrides)
        return cls(**base)


@dataclass
class BnbNode:
    """One box of the spatial partition with its inherited state."""

    box: Box
    depth: int
    cuts: list
    dual: float
    diagram: Optional[dd.Diagram] = None
    t_bounds: Optional[tuple[float, float]] = None


@dataclass
class SolveReport:
    """Final bounds plus run accounting; serializes to one JSON line."""

    name: str
    num_features: int
    num_samples: int
    primal: float
    dual: float
    gap: float
    beta: np.ndarray
    node_count: int
    cuts_gradient: int
    cuts_subgradient: int
    cuts_exact: int
    wall_time: float
    status: str
    provenance: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "schema": REPORT_SCHEMA,
            "name": self.name,
            "p": self.num_features,
            "n": self.num_samples,
            "primal": self.primal,
            "dual": self.dual,
            "gap": self.gap,
            "beta": [float(b) for b in self.beta],
            "nodes": self.node_count,
            "cuts": {
                "objective-gradient": self.cuts_gradient,
                "subgradient": self.cuts_subgradient,
                "exact-lp": self.cuts_exact,
            },
            "time": self.wall_time,
            "status": self.status,
            "provenance": self.provenance,
        }
        return json.dumps(payload, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "SolveReport":
        d = json.loads(text)
        if d.get("schema") != REPORT_SCHEMA:
            raise ValueError(f"unsupported report schema {d.get('schema')!r}")
        return cls(
            name=d["name"], num_features=d["p"], num_samples=d["n"],
            primal=d["primal"], dual=d["dual"], gap=d["gap"],
            beta=np.array(d["beta"], dtype=float), node_count=d["nodes"],
            cuts_gradient=d["cuts"]["objective-gradient"],
            cuts_subgradient=d["cuts"]["subgradient"],
            cuts_exact=d["cuts"]["exact-lp"],
            wall_time=d["time"], status=d["status"],
            provenance=d.get("provenance", {}),
        )

    def table_row(self) -> str:
        return (
            f"{self.name:<28} {self.num_features:>5} {self.num_samples:>7} "
            f"{self.primal:>14.6g} {self.dual:>14.6g} {self.wall_time:>9.2f}"
        )

    @staticmethod
    def table_header() -> str:
        return (
            f"{'name':<28} {'p':>5} {'n':>7} "
            f"{'primal':>14} {'dual':>14} {'time (s)':>9}"
        )


def relative_gap(primal: float, dual: float, abs_gap: float = 1e-6) -> float:
    """(primal - dual) / |dual|, with an absolute fallback around zero."""
    if not math.isfinite(primal) or not math.isfinite(dual):
        return math.inf
    diff = primal - dual
    if abs(dual) > 1e-12:
        return diff / abs(dual)
    return 0.0 if diff <= abs_gap else math.inf


def initial_box(problem: RegressionProblem, config: SolverConfig) -> Box:
    """Bounds believed to contain every optimal coefficient vector.

    A user-supplied box passes through unchanged except that infinite
    entries are tightened at the root from the incumbent at zero.  The
    default heuristic combines a ridge solve with per-column response
    bounds: ``kappa * (|ridge_i| + ||y|| / ||X_i||)``.
    """
    if problem.box is not None:
        box = problem.box
        if box.dim != problem.dim:
            raise ValueError("box dimension does not match the problem")
        if box.is_finite():
            return box
        return _tighten_infinite(problem, box)
    X, y = problem.dataset.X, problem.dataset.y
    p = problem.dim
    gram = X.T @ X + config.ridge * np.eye(p)
    ridge_coef = np.linalg.solve(gram, X.T @ y)
    col_norms = np.linalg.norm(X, axis=0)
    ynorm = float(np.linalg.norm(y))
    response = np.where(col_norms > 0, ynorm / np.where(col_norms > 0, col_norms, 1.0), 0.0)
    radius = config.box_scale * (np.abs(ridge_coef) + response)
    return Box(-radius, radius)


def _tighten_infinite(problem: RegressionProblem, box: Box) -> Box:
    """Replace infinite bounds using the incumbent objective at zero."""
    upper_obj = problem.objective(np.zeros(problem.dim))
    X = problem.dataset.X
    ynorm = float(np.linalg.norm(problem.dataset.y))
    sing = np.linalg.svd(X, compute_uv=False)
    sigma_min = float(sing[-1]) if sing.size else 0.0
    loss_radius = math.inf
    if sigma_min > 1e-10:
        # loss(b) >= (||Xb|| - ||y||)^2, so at the optimum
        # ||b|| <= (||y|| + sqrt(upper_obj)) / sigma_min.
        loss_radius = (ynorm + math.sqrt(max(upper_obj, 0.0))) / sigma_min
    lower = box.lower.copy()
    upper = box.upper.copy()
    for i in range(problem.dim):
        comp = problem.components[i]
        pen_radius = math.inf
        if problem.form == PENALTY_FORM and comp is not None:
            pen_radius = _penalty_radius(comp, upper_obj)
        radius = min(loss_radius, pen_radius)
        if not math.isfinite(lower[i]):
            if not math.isfinite(radius):
                raise ValueError(
                    "cannot bound coordinate "
                    f"{i}: rank-deficient design and non-coercive penalty"
                )
            lower[i] = -radius
        if not math.isfinite(upper[i]):
            if not math.isfinite(radius):
                raise ValueError(
                    "cannot bound coordinate "
                    f"{i}: rank-deficient design and non-coercive penalty"
                )
            upper[i] = radius
    return Box(lower, upper)


def _penalty_radius(comp, bound: float) -> float:
    # Smallest r with comp(r) > bound, by doubling then bisection; only the
    # coercive kinds yield a finite radius.
    hi = 1.0
    for _ in range(200):
        if float(comp.value(hi)) > bound:
            break
        hi *= 2.0
    else:
        return math.inf
    lo = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if float(comp.value(mid)) > bound:
            hi = mid
        else:
            lo = mid
    return hi


def branch(node: BnbNode, beta: np.ndarray, candidates=None) -> tuple[Box, Box]:
    """Split the node box at the master point.

    Among the candidate coordinates (every positive-width one by default)
    the branching coordinate is the one whose value sits closest to the
    middle of its interval, normalized by interval width; a value within
    1e-6 of an endpoint falls back to the midpoint so the split always
    reduces volume.  Zero-width coordinates never branch.
    """
    box = node.box
    widths = box.widths()
    mids = box.midpoint()
    beta = box.clip(beta)
    if candidates is None:
        candidates = np.flatnonzero(widths > 0)
    candidates = np.asarray(candidates, dtype=int)
    candidates = candidates[widths[candidates] > 0]
    if candidates.size == 0:
        raise ValueError("cannot branch on a zero-volume box")
    scores = np.abs(beta[candidates] - mids[candidates]) / widths[candidates]
    index = int(candidates[int(np.argmin(scores))])
    at = float(beta[index])
    w = float(widths[index])
    if at - box.lower[index] < 1e-6 * w or box.upper[index] - at < 1e-6 * w:
        at = float(mids[index])
    return box.split(index, at)


def _branch_candidates(problem: RegressionProblem, node: BnbNode,
                       beta: np.ndarray, config: SolverConfig) -> np.ndarray:
    """Coordinates worth branching on.

    Splitting only improves the penalty relaxation along coordinates whose
    current sub-interval under-estimates the penalty at the master point,
    so coordinates with negligible slack are filtered out first; the
    middle-point rule then decides among the rest.  Without that filter a
    coordinate whose optimum hugs its box middle can soak up every split
    while the loose coordinate never improves.
    """
    widths = node.box.widths()
    positive = np.flatnonzero(widths > 0)
    if positive.size == 0 or problem.dd_scale is None:
        return positive
    beta = node.box.clip(beta)
    slack = np.zeros(problem.dim)
    idx = problem.penalized_index
    sub = Box(node.box.lower[idx], node.box.upper[idx])
    parts = PartitionScheme.uniform(sub, config.partitions)
    for pos, i in enumerate(idx):
        comp = problem.components[i]
        edges = parts.edges[pos]
        j = int(np.clip(np.searchsorted(edges, beta[i]) - 1, 0,
                        edges.size - 2))
        gamma = comp.interval_lower_bound(edges[j], edges[j + 1])
        slack[i] = float(comp.value(beta[i])) - gamma
    best = slack[positive].max()
    if best <= 1e-9:
        return positive
    keep = positive[slack[positive] >= 0.1 * best]
    return keep if keep.size else positive


def primal_from_point(problem: RegressionProblem, beta) -> float:
    """Objective value of a feasible point recovered from ``beta``."""
    value, _ = _primal_candidate(problem, beta)
    return value


def _primal_candidate(problem: RegressionProblem, beta) -> tuple[float, np.ndarray]:
    beta = np.asarray(beta, dtype=float)
    if problem.form == PENALTY_FORM:
        return problem.objective(beta), beta
    if problem.is_budget_feasible(beta):
        return problem.loss(beta), beta
    repaired = _repair_budget(problem, beta)
    return problem.loss(repaired), repaired


def _repair_budget(problem: RegressionProblem, beta: np.ndarray) -> np.ndarray:
    """Pull a point back inside the penalty budget.

    Pure indicator penalties keep the largest coordinates; otherwise the
    penalized block is scaled down, which is monotone for every penalty
    kind, so bisection finds a feasible scaling.
    """
    from .scale import L0

    idx = problem.penalized_index
    comps = [problem.components[i] for i in idx]
    repaired = beta.copy()
    if all(isinstance(c, L0) for c in comps):
        order = np.argsort(-np.abs(repaired[idx]), kind="stable")
        keep = repaired.copy()
        keep[idx] = 0.0
        budget = problem.budget
        for pos in order:
            i = idx[pos]
            cost = comps[pos].weight
            if cost <= budget + 1e-12 and repaired[i] != 0.0:
                keep[i] = repaired[i]
                budget -= cost
        return keep
    lo, hi = 0.0, 1.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        trial = repaired.copy()
        trial[idx] = mid * repaired[idx]
        if problem.is_budget_feasible(trial):
            lo = mid
        else:
            hi = mid
    repaired[idx] = lo * repaired[idx]
    return repaired


def _build_node_diagram(problem: RegressionProblem, node: BnbNode,
                        config: SolverConfig):
    scale = problem.dd_scale
    if scale is None:
        node.diagram = None
        node.t_bounds = None
        return
    idx = problem.penalized_index
    sub = Box(node.box.lower[idx], node.box.upper[idx])
    parts = PartitionScheme.uniform(sub, config.partitions)
    if problem.form == BUDGET_FORM:
        node.diagram = dd.build(
            scale, sub, parts, problem.budget,
            width_limit=config.width_limit, merge_buckets=config.merge_buckets,
        )
        node.t_bounds = None
    else:
        t_lo = scale.min_over_box(sub.lower, sub.upper)
        t_hi = scale.max_over_box(sub.lower, sub.upper)
        t_parts = config.t_partitions or config.partitions
        node.diagram = dd.build_epigraph(
            scale, sub, parts, t_lo, t_hi, t_parts,
            width_limit=config.width_limit, merge_buckets=config.merge_buckets,
        )
        node.t_bounds = (t_lo, t_hi)


def solve(problem: RegressionProblem, config: Optional[SolverConfig] = None,
          name: str = "instance") -> SolveReport:
    """Run spatial branch-and-cut to the requested relative gap."""
    if config is None:
        config = SolverConfig()
    t_start = time.monotonic()
    box = initial_box(problem, config)

    incumbent, best_beta = math.inf, np.zeros(problem.dim)
    for warm_point in (np.zeros(problem.dim), problem.least_squares_point()):
        value, feas = _primal_candidate(problem, box.clip(warm_point))
        if value < incumbent:
            incumbent, best_beta = value, feas

    counter = 0
    heap: list[tuple[float, int, BnbNode]] = []
    root = BnbNode(box=box, depth=0, cuts=[], dual=-math.inf)
    heapq.heappush(heap, (root.dual, counter, root))
    counter += 1

    nodes_processed = 0
    cut_counts = {hull.ORIGIN_GRADIENT: 0, hull.ORIGIN_SUBGRADIENT: 0,
                  hull.ORIGIN_EXACT: 0}
    status = STATUS_OPTIMAL

    def current_gap() -> float:
        dual = heap[0][0] if heap else incumbent
        dual = min(dual, incumbent)
        return relative_gap(incumbent, dual, config.abs_gap)

    while heap:
        if config.time_limit is not None and \
                time.monotonic() - t_start > config.time_limit:
            status = STATUS_TIME
            break
        if nodes_processed >= config.node_limit:
            status = STATUS_NODES
            break
        if current_gap() <= config.gap:
            status = STATUS_GAP
            break
        _, _, node = heapq.heappop(heap)
        if node.dual >= incumbent - config.prune_tol:
            continue
        _build_node_diagram(problem, node, config)
        result = oa.run_node(problem, node, config)
        nodes_processed += 1
        for origin, count in result.cuts_added.items():
            cut_counts[origin] = cut_counts.get(origin, 0) + count

        if result.beta is not None:
            value, feas_beta = _primal_candidate(problem, result.beta)
            if value < incumbent:
                incumbent, best_beta = value, feas_beta
        if math.isfinite(result.dual_bound):
            node.dual = max(node.dual, result.dual_bound)

        if result.status == oa.STATUS_INFEASIBLE:
            continue
        if result.status == oa.STATUS_FEASIBLE:
            continue
        if node.dual >= incumbent - config.prune_tol:
            continue
        branch_point = result.beta if result.beta is not None \
            else node.box.midpoint()
        if not np.any(node.box.widths() > 0):
            continue  # point box: nothing left to split
        candidates = _branch_candidates(problem, node, branch_point, config)
        left, right = branch(node, branch_point, candidates)
        for child_box in (left, right):
            child = BnbNode(box=child_box, depth=node.depth + 1,
                            cuts=list(node.cuts), dual=node.dual)
            heapq.heappush(heap, (child.dual, counter, child))
            counter += 1

    if not heap and status == STATUS_OPTIMAL:
        dual_final = incumbent
    else:
        dual_final = min(heap[0][0], incumbent) if heap else incumbent
    gap = relative_gap(incumbent, dual_final, config.abs_gap)
    wall = 0.0 if config.deterministic else time.monotonic() - t_start
    provenance = dict(problem.dataset.provenance)
    provenance["form"] = problem.form
    provenance["deterministic"] = bool(config.deterministic)
    return SolveReport(
        name=name,
        num_features=problem.dim,
        num_samples=problem.dataset.num_samples,
        primal=float(incumbent),
        dual=float(dual_final),
        gap=float(gap),
        beta=np.asarray(best_beta, dtype=float),
        node_count=nodes_processed,
        cuts_gradient=cut_counts[hull.ORIGIN_GRADIENT],
        cuts_subgradient=cut_counts[hull.ORIGIN_SUBGRADIENT],
        cuts_exact=cut_counts[hull.ORIGIN_EXACT],
        wall_time=float(wall),
        status=status,
        provenance=provenance,
    )
