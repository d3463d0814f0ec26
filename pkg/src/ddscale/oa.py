"""Outer approximation at a single branch-and-cut node.

The master problem is a pure LP over the coefficient block plus two
epigraph scalars: ``z`` under-estimates the convex loss through supporting
hyperplanes, and ``t`` under-estimates the penalty through valid
inequalities for the node's epigraph diagram.  Each iteration solves the
master, then adds whichever of the two cut families the master optimum
violates; the loop stops when the optimum is feasible (node solved), no cut
is violated beyond tolerance, the objective stalls, or the iteration cap is
reached.  The last master objective is always a valid dual bound for the
node because every row added is valid for the node's true feasible set.

The master is solved through its dual: adding a primal row appends a dual
column, so the previous basis stays feasible and re-solves are warm.  The
recovered primal point is verified against the rows and bounds and falls
back to a direct primal solve if the check fails.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import hull, lp
from .hull import Cut

__all__ = [
    "MasterState",
    "NodeResult",
    "gradient_cut",
    "run_node",
    "STATUS_FEASIBLE",
    "STATUS_INFEASIBLE",
    "STATUS_CUT_EXHAUSTED",
    "STATUS_NUMERICAL",
]

STATUS_FEASIBLE = "feasible"
STATUS_INFEASIBLE = "infeasible"
STATUS_CUT_EXHAUSTED = "cut-exhausted"
STATUS_NUMERICAL = "numerical-failure"


def gradient_cut(problem, beta) -> Cut:
    """Supporting hyperplane of the loss at ``beta``.

    Read as ``z >= loss(beta) + grad(beta) . (b - beta)``; the implicit
    coefficient on ``z`` is -1, carried by the cut's origin tag.
    """
    beta = np.asarray(beta, dtype=float)
    grad = problem.loss_grad(beta)
    rhs = float(grad @ beta - problem.loss(beta))
    return Cut(coeffs=grad, t_coeff=0.0, rhs=rhs, origin=hull.ORIGIN_GRADIENT)


@dataclass
class MasterState:
    """LP master over (beta, z[, t]) with its accumulated cut rows."""

    box_lower: np.ndarray
    box_upper: np.ndarray
    t_bounds: Optional[tuple[float, float]]
    penalized_index: np.ndarray
    cuts: list[Cut] = field(default_factory=list)
    basis: Optional[lp.Basis] = None
    basis_cut_count: int = 0
    last_outcome: Optional[lp.LpOutcome] = None

    @property
    def dim(self) -> int:
        return self.box_lower.shape[0]

    @property
    def num_vars(self) -> int:
        return self.dim + (2 if self.t_bounds is not None else 1)

    def _objective(self) -> np.ndarray:
        g = np.zeros(self.num_vars)
        g[self.dim] = 1.0  # z
        if self.t_bounds is not None:
            g[self.dim + 1] = 1.0  # t
        return g

    def _bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lower = np.concatenate([self.box_lower, [0.0]])
        upper = np.concatenate([self.box_upper, [np.inf]])
        if self.t_bounds is not None:
            lower = np.append(lower, self.t_bounds[0])
            upper = np.append(upper, self.t_bounds[1])
        return lower, upper

    def _row_for(self, cut: Cut) -> tuple[np.ndarray, float]:
        row = np.zeros(self.num_vars)
        if cut.origin == hull.ORIGIN_GRADIENT:
            row[: self.dim] = cut.coeffs
            row[self.dim] = -1.0
        else:
            row[self.penalized_index] = cut.coeffs
            if self.t_bounds is not None:
                row[self.dim + 1] = cut.t_coeff
        rhs = cut.rhs
        norm = float(np.linalg.norm(row))
        return row / norm, rhs / norm

    def add_cut(self, cut: Cut):
        self.cuts.append(cut)

    def solve(self) -> tuple[str, Optional[np.ndarray], Optional[float]]:
        """Solve the master; returns (status, point, objective)."""
        g = self._objective()
        lower, upper = self._bounds()
        rows = [self._row_for(c) for c in self.cuts]
        status, v, obj, basis = _solve_via_dual(
            g, lower, upper, rows, self.basis
            if self.basis is not None and self.basis_cut_count <= len(rows)
            else None,
            self.basis_cut_count,
        )
        self.basis = basis
        self.basis_cut_count = len(rows)
        if status == lp.OPTIMAL:
            v = np.clip(v, lower, upper)
        return status, v, obj


def _extend_basis(basis: lp.Basis, structural_old: int,
                  added: int) -> lp.Basis:
    # Appending dual columns shifts slack indices up by the column count.
    basic = basis.basic.copy()
    basic[basic >= structural_old] += added
    at_upper = np.concatenate([
        basis.at_upper[:structural_old],
        np.zeros(added, dtype=bool),
        basis.at_upper[structural_old:],
    ])
    return lp.Basis(basic=basic, at_upper=at_upper)


def _solve_via_dual(g, lower, upper, rows, warm, warm_cut_count):
    """Minimize ``g'v`` over box bounds and ``row . v <= rhs`` cuts.

    Solved as the dual so that cut rows become columns; the primal point is
    recovered from the dual row multipliers and verified by substitution.
    """
    q = g.size
    cols = []
    dvals = []
    for i in range(q):
        if np.isfinite(lower[i]):
            e = np.zeros(q)
            e[i] = 1.0
            cols.append(e)
            dvals.append(lower[i])
    num_lb = len(cols)
    for i in range(q):
        if np.isfinite(upper[i]):
            e = np.zeros(q)
            e[i] = -1.0
            cols.append(e)
            dvals.append(-upper[i])
    num_bound_cols = len(cols)
    for row, rhs in rows:
        cols.append(-row)
        dvals.append(-rhs)
    A = np.column_stack(cols) if cols else np.zeros((q, 0))
    K = len(cols)
    dual = lp.LpProblem(
        sense="max", c=np.array(dvals), A=A, relations=[lp.EQUAL] * q,
        b=g, lower=np.zeros(K), upper=np.full(K, np.inf),
    )
    warm_basis = None
    if warm is not None:
        added = len(rows) - warm_cut_count
        if added >= 0:
            warm_basis = _extend_basis(warm, num_bound_cols + warm_cut_count,
                                       added)
    outcome = lp.solve(dual, warm=warm_basis)
    if outcome.status == lp.UNBOUNDED:
        return lp.INFEASIBLE, None, None, None
    if outcome.status == lp.INFEASIBLE:
        # The primal is box-bounded below, so a dual without a feasible
        # point means the primal has none either.
        return lp.INFEASIBLE, None, None, None
    if outcome.status != lp.OPTIMAL:
        return lp.NUMERICAL_FAILURE, None, None, None
    v = outcome.row_duals
    obj = float(outcome.objective)
    if _primal_ok(v, obj, g, lower, upper, rows):
        return lp.OPTIMAL, v, obj, outcome.basis
    # Rare numerical mismatch: fall back to the direct primal formulation.
    m = len(rows)
    A_p = np.array([r for r, _ in rows]) if m else np.zeros((0, q))
    b_p = np.array([r for _, r in rows])
    primal = lp.LpProblem(sense="min", c=g, A=A_p,
                          relations=[lp.LESS_EQUAL] * m, b=b_p,
                          lower=lower, upper=upper)
    direct = lp.solve(primal)
    if direct.status == lp.OPTIMAL:
        return lp.OPTIMAL, direct.x, float(direct.objective), None
    if direct.status == lp.INFEASIBLE:
        return lp.INFEASIBLE, None, None, None
    return lp.NUMERICAL_FAILURE, None, None, None


def _primal_ok(v, obj, g, lower, upper, rows, tol=1e-6):
    if v is None or not np.isfinite(v).all():
        return False
    if np.any(v < lower - tol) or np.any(v > upper + tol):
        return False
    for row, rhs in rows:
        if row @ v > rhs + tol:
            return False
    return abs(float(g @ v) - obj) <= tol * (1.0 + abs(obj))


@dataclass
class NodeResult:
    status: str
    dual_bound: float
    beta: Optional[np.ndarray]
    t_value: Optional[float]
    iterations: int
    cuts_added: dict = field(default_factory=dict)
    objectives: list = field(default_factory=list)


def run_node(problem, node, config) -> NodeResult:
    """Outer-approximation loop over one node's master LP.

    ``node`` supplies the box, the inherited cuts, the node's diagram and
    (in penalty form) the epigraph variable bounds; a node without any
    penalized coordinate carries no diagram and degenerates to cutting
    planes for the loss alone.  Returns the node's dual bound, the last
    master point, and how the loop ended.
    """
    has_epi = node.t_bounds is not None
    has_dd = node.diagram is not None
    budget_form = getattr(problem, "budget", None) is not None
    if has_dd and node.diagram.is_empty():
        return NodeResult(STATUS_INFEASIBLE, np.inf, None, None, 0, {})
    master = MasterState(
        box_lower=node.box.lower.copy(),
        box_upper=node.box.upper.copy(),
        t_bounds=node.t_bounds,
        penalized_index=problem.penalized_index,
        cuts=list(node.cuts),
    )
    eps = config.eps
    added_counts = {hull.ORIGIN_GRADIENT: 0, hull.ORIGIN_SUBGRADIENT: 0}
    for anchor in _seed_points(problem, node.box):
        master.add_cut(gradient_cut(problem, anchor))
        added_counts[hull.ORIGIN_GRADIENT] += 1
    best_bound = -np.inf
    beta = None
    t_val = None
    history: list[float] = []
    status = STATUS_CUT_EXHAUSTED
    iterations = 0
    for it in range(config.oa_iters):
        iterations = it + 1
        lp_status, v, obj = master.solve()
        if lp_status == lp.INFEASIBLE:
            node.cuts = master.cuts
            return NodeResult(STATUS_INFEASIBLE, np.inf, None, None,
                              iterations, added_counts)
        if lp_status != lp.OPTIMAL:
            status = STATUS_NUMERICAL
            break
        beta = v[: problem.dim]
        z_val = float(v[problem.dim])
        t_val = float(v[problem.dim + 1]) if has_epi else None
        best_bound = max(best_bound, obj)
        history.append(obj)

        loss_val = problem.loss(beta)
        if has_epi:
            pen_ok = t_val >= problem.penalty_value(beta) - eps
        elif budget_form:
            pen_ok = problem.penalty_value(beta) <= problem.budget + eps
        else:
            pen_ok = True
        if z_val >= loss_val - eps and pen_ok:
            status = STATUS_FEASIBLE
            break

        added = False
        if z_val < loss_val - eps:
            master.add_cut(gradient_cut(problem, beta))
            added_counts[hull.ORIGIN_GRADIENT] += 1
            added = True
        if has_dd:
            sep_point = beta[problem.penalized_index]
            sep_t = 0.0
            if has_epi:
                sep_t = t_val
                sep_point = np.append(sep_point, t_val)
            cut = hull.separate_subgradient(
                node.diagram, sep_point,
                max_iters=config.subgradient_iters,
                early_exit_violation=config.subgrad_early_exit,
            )
            if cut is not None and cut.violation(
                    sep_point[:-1] if has_epi else sep_point, t=sep_t) > eps:
                master.add_cut(cut)
                added_counts[hull.ORIGIN_SUBGRADIENT] += 1
                added = True
        if not added:
            status = STATUS_CUT_EXHAUSTED
            break
        if _stalled(history, config.stall_window, config.stall_rel):
            status = STATUS_CUT_EXHAUSTED
            break
    node.cuts = master.cuts
    return NodeResult(status, best_bound, beta, t_val, iterations,
                      added_counts, objectives=history)


def _seed_points(problem, box) -> list[np.ndarray]:
    """Anchor points for initial loss cuts: the clipped unpenalized
    minimizer, the box midpoint and the clipped origin."""
    candidates = [
        box.clip(problem.least_squares_point()),
        box.midpoint(),
        box.clip(np.zeros(problem.dim)),
    ]
    seeds: list[np.ndarray] = []
    for cand in candidates:
        if not any(np.array_equal(cand, s) for s in seeds):
            seeds.append(cand)
    return seeds


def _stalled(history, window: int, rel: float) -> bool:
    if window <= 0 or len(history) <= window:
        return False
    gain = history[-1] - history[-1 - window]
    return gain < max(1e-9, rel * max(1.0, abs(history[-1])))
