"""Convexification of a diagram's solution set.

Three routes into the same convex hull:

* ``flow_lp`` writes the network model whose projection onto the coordinate
  variables is exactly the hull: one flow variable per arc, unit supply from
  root to terminal, and per-layer linking rows tying weighted flow to each
  coordinate.
* ``separate_exact`` solves the dual-side projection cone as an LP (with the
  coefficients boxed to [-1, 1] so a violated inequality shows up as a
  positive optimum instead of a recession ray).
* ``separate_subgradient`` runs the derivative-free projected-subgradient
  scheme whose inner oracle is a longest-path computation, returning the
  best violated inequality seen.

Valid inequalities are returned as :class:`Cut` objects normalized to unit
coefficient norm.  For an epigraph diagram the last encoded coordinate is
the epigraph variable and lands in ``t_coeff``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import lp
from .dd import Diagram, EmptyDiagramError, longest_path_by_coeffs

__all__ = [
    "Cut",
    "SeparationState",
    "SeparationError",
    "flow_lp",
    "membership",
    "separate_exact",
    "separate_subgradient",
    "default_step_rule",
]

ORIGIN_EXACT = "exact-lp"
ORIGIN_SUBGRADIENT = "subgradient"
ORIGIN_GRADIENT = "objective-gradient"


class SeparationError(RuntimeError):
    """Raised when the exact separation LP fails numerically."""


@dataclass(frozen=True)
class Cut:
    """A linear inequality ``coeffs . x + t_coeff * t <= rhs``."""

    coeffs: np.ndarray
    t_coeff: float
    rhs: float
    origin: str

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        object.__setattr__(self, "coeffs", c)
        full = np.append(c, self.t_coeff)
        if not np.isfinite(full).all() or not math.isfinite(self.rhs):
            raise ValueError("cut entries must be finite")
        # Gradient cuts carry an implicit -1 on the loss epigraph variable,
        # so an all-zero coefficient block is meaningful for them alone.
        if np.all(full == 0.0) and self.origin != ORIGIN_GRADIENT:
            raise ValueError("cut coefficients cannot all be zero")

    def normalized(self) -> "Cut":
        scale = float(np.linalg.norm(np.append(self.coeffs, self.t_coeff)))
        return Cut(self.coeffs / scale, self.t_coeff / scale, self.rhs / scale,
                   self.origin)

    def violation(self, x, t: float = 0.0) -> float:
        """Positive when (x, t) lies strictly outside the inequality."""
        return float(self.coeffs @ np.asarray(x, dtype=float)
                     + self.t_coeff * t - self.rhs)


@dataclass
class SeparationState:
    """Trace of the subgradient separation iterations."""

    best_iteration: int = 0
    best_violation: float = 0.0
    best_point: Optional[np.ndarray] = None
    best_coeffs: Optional[np.ndarray] = None
    iterate_norms: list[float] = field(default_factory=list)
    iterations: int = 0


def default_step_rule(tau: int) -> float:
    """Diminishing steps compatible with projected-subgradient convergence."""
    return 1.0 / math.sqrt(tau + 1.0)


def _require_usable(diagram: Diagram):
    if diagram.is_empty():
        raise EmptyDiagramError("diagram has no root-terminal path")
    for layer in diagram.arcs:
        if not np.isfinite(layer.labels).all():
            raise ValueError("separation requires finite arc labels")


def _split_coeffs(diagram: Diagram, gamma: np.ndarray, rhs: float,
                  origin: str) -> Cut:
    if diagram.epigraph:
        cut = Cut(gamma[:-1], float(gamma[-1]), rhs, origin)
    else:
        cut = Cut(gamma, 0.0, rhs, origin)
    return cut.normalized()


def flow_lp(diagram: Diagram, point=None) -> lp.LpProblem:
    """Network model of the diagram as a feasibility LP.

    Rows: one balance row per node (unit supply at the root, unit demand at
    the terminal) and one linking row per coordinate layer.  Columns: one
    non-negative flow variable per arc.  With ``point`` given, the linking
    rows pin the coordinates to it, so feasibility decides hull membership.
    """
    offsets = diagram.node_offsets()
    num_nodes = int(offsets[-1])
    num_arcs = diagram.num_arcs
    n = diagram.num_vars
    A = np.zeros((num_nodes + n, num_arcs))
    col = 0
    for k, layer in enumerate(diagram.arcs):
        for t, h, lab in zip(layer.tails, layer.heads, layer.labels):
            A[offsets[k] + t, col] = 1.0
            A[offsets[k + 1] + h, col] = -1.0
            A[num_nodes + k, col] = lab
            col += 1
    b = np.zeros(num_nodes + n)
    b[0] = 1.0
    b[num_nodes - 1] = -1.0
    if point is not None:
        point = np.asarray(point, dtype=float)
        if point.shape != (n,):
            raise ValueError(f"point has shape {point.shape}, expected ({n},)")
        b[num_nodes:] = point
    return lp.LpProblem(
        sense="min",
        c=np.zeros(num_arcs),
        A=A,
        relations=[lp.EQUAL] * (num_nodes + n),
        b=b,
        lower=np.zeros(num_arcs),
        upper=np.full(num_arcs, np.inf),
    )


def membership(diagram: Diagram, point, tol: float = 1e-7) -> bool:
    """True when the point lies in the hull of the diagram's solution set."""
    _require_usable(diagram)
    problem = flow_lp(diagram, point)
    outcome = lp.solve(problem, feas_tol=tol)
    if outcome.status == lp.NUMERICAL_FAILURE:
        raise SeparationError("flow LP failed numerically")
    return outcome.status == lp.OPTIMAL


def separate_exact(diagram: Diagram, point, tol: float = 1e-7) -> Optional[Cut]:
    """Exact separation through the projection-cone LP.

    Returns ``None`` when the point is inside the hull; otherwise a valid
    inequality strictly violated at the point.  The cone is truncated by
    boxing the coordinate multipliers to [-1, 1]: a violated inequality then
    appears as a strictly positive optimum (same hyperplane up to positive
    scaling as the recession ray of the untruncated cone).
    """
    _require_usable(diagram)
    point = np.asarray(point, dtype=float)
    n = diagram.num_vars
    if point.shape != (n,):
        raise ValueError(f"point has shape {point.shape}, expected ({n},)")
    offsets = diagram.node_offsets()
    num_nodes = int(offsets[-1])
    # Variables: one multiplier per node, then one per coordinate.
    num_vars = num_nodes + n
    rows = []
    for k, layer in enumerate(diagram.arcs):
        for t, h, lab in zip(layer.tails, layer.heads, layer.labels):
            row = np.zeros(num_vars)
            row[offsets[k] + t] += 1.0
            row[offsets[k + 1] + h] -= 1.0
            row[num_nodes + k] += lab
            rows.append(row)
    A = np.array(rows)
    c = np.zeros(num_vars)
    c[num_nodes:] = point
    c[num_nodes - 1] = -1.0  # terminal multiplier enters the objective
    lower = np.full(num_vars, -np.inf)
    upper = np.full(num_vars, np.inf)
    lower[0] = upper[0] = 0.0  # root multiplier pinned
    lower[num_nodes:] = -1.0
    upper[num_nodes:] = 1.0
    problem = lp.LpProblem(
        sense="max", c=c, A=A, relations=[lp.LESS_EQUAL] * A.shape[0],
        b=np.zeros(A.shape[0]), lower=lower, upper=upper,
    )
    outcome = lp.solve(problem)
    if outcome.status != lp.OPTIMAL:
        raise SeparationError(f"separation LP ended with {outcome.status}")
    if outcome.objective <= tol:
        return None
    gamma = outcome.x[num_nodes:]
    rhs = float(outcome.x[num_nodes - 1])
    return _split_coeffs(diagram, gamma, rhs, ORIGIN_EXACT)


def _initial_direction(diagram: Diagram, point: np.ndarray) -> np.ndarray:
    # Aim away from the per-layer label midpoints; fall back to the first
    # coordinate axis when the point sits exactly there.
    mids = np.array(
        [0.5 * (layer.labels.min() + layer.labels.max()) for layer in diagram.arcs]
    )
    direction = point - mids
    norm = np.linalg.norm(direction)
    if norm < 1e-12:
        direction = np.zeros(diagram.num_vars)
        direction[0] = 1.0
        return direction
    return direction / norm


def separate_subgradient(
    diagram: Diagram,
    point,
    max_iters: int = 50,
    step_rule: Optional[Callable[[int], float]] = None,
    early_exit_violation: Optional[float] = None,
    state: Optional[SeparationState] = None,
) -> Optional[Cut]:
    """Projected-subgradient search for a violated valid inequality.

    Each iteration weights arcs with the current multipliers, takes a
    longest path, measures the violation of the induced inequality at the
    point, follows the subgradient and projects back onto the unit ball.
    Returns the best inequality found if any violation was positive, else
    ``None``.  ``early_exit_violation`` stops as soon as the best violation
    clears that threshold; by default all ``max_iters`` iterations run.
    """
    _require_usable(diagram)
    point = np.asarray(point, dtype=float)
    n = diagram.num_vars
    if point.shape != (n,):
        raise ValueError(f"point has shape {point.shape}, expected ({n},)")
    if step_rule is None:
        step_rule = default_step_rule
    if state is None:
        state = SeparationState()
    gamma = _initial_direction(diagram, point)
    # Grouped arc views, fixed for the life of the diagram: one longest-path
    # pass per iteration is a reduceat per layer plus one backward argmax.
    layers = len(diagram.arcs)
    starts_l, tails_l, labels_l = [], [], []
    for k, layer in enumerate(diagram.arcs):
        _, starts, tails_o, labels_o = layer.grouped_by_head(
            diagram.states[k + 1].size)
        starts_l.append(starts)
        tails_l.append(tails_o)
        labels_l.append(labels_o)
    values = [np.zeros(1)] + [None] * layers
    cands = [None] * layers
    best_violation = 0.0
    best_gamma = None
    best_path_point = None
    for tau in range(max_iters):
        for k in range(layers):
            cand = values[k][tails_l[k]] + gamma[k] * labels_l[k]
            cands[k] = cand
            values[k + 1] = np.maximum.reduceat(cand, starts_l[k][:-1])
        path_point = np.empty(layers)
        node = 0
        for k in range(layers - 1, -1, -1):
            lo, hi = starts_l[k][node], starts_l[k][node + 1]
            pick = lo + int(np.argmax(cands[k][lo:hi]))
            path_point[k] = labels_l[k][pick]
            node = tails_l[k][pick]
        gap = point - path_point
        violation = float(gamma @ gap)
        if violation > max(0.0, best_violation):
            best_violation = violation
            best_gamma = gamma.copy()
            best_path_point = path_point
            state.best_iteration = tau
            state.best_violation = violation
            state.best_point = path_point
            state.best_coeffs = best_gamma
        state.iterations = tau + 1
        if (early_exit_violation is not None
                and best_violation > early_exit_violation):
            break
        phi = gamma + step_rule(tau) * gap
        gamma = phi / max(1.0, float(np.sqrt(phi @ phi)))
        state.iterate_norms.append(float(np.sqrt(gamma @ gamma)))
    if best_violation <= 0.0:
        return None
    rhs = float(best_gamma @ best_path_point)
    return _split_coeffs(diagram, best_gamma, rhs, ORIGIN_SUBGRADIENT)
