"""Dense bounded-variable linear programming.

A self-contained two-phase revised simplex over problems of the form

    min/max  c'x   subject to   A x {<=, ==, >=} b,   lower <= x <= upper,

with infinite bounds allowed.  Rows are turned into equalities with bounded
slacks, phase 1 runs on artificial columns, and the basis inverse is kept
explicitly with periodic refactorization.  Pivoting is deterministic:
Dantzig pricing with smallest-index tie-breaks, switching to Bland's rule
after a run of degenerate pivots.

Outcomes carry certificates: an optimal point, an improving recession ray,
or Farkas row multipliers, each verifiable by direct substitution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

__all__ = [
    "LpProblem",
    "LpOutcome",
    "Basis",
    "solve",
    "LESS_EQUAL",
    "EQUAL",
    "GREATER_EQUAL",
]

LESS_EQUAL = "<="
EQUAL = "=="
GREATER_EQUAL = ">="

_RELATIONS = (LESS_EQUAL, EQUAL, GREATER_EQUAL)

# Statuses
OPTIMAL = "optimal"
UNBOUNDED = "unbounded"
INFEASIBLE = "infeasible"
NUMERICAL_FAILURE = "numerical_failure"

_RC_TOL = 1e-9
_PIVOT_TOL = 1e-10
_BOUND_TOL = 1e-9
_DEGEN_STEP = 1e-11
_REFACTOR_EVERY = 100


@dataclass
class LpProblem:
    """A dense LP.  ``relations`` holds one of "<=", "==", ">=" per row."""

    sense: str
    c: np.ndarray
    A: np.ndarray
    relations: list[str]
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        n = self.c.shape[0]
        if self.A.ndim != 2:
            if self.A.size == 0:
                self.A = self.A.reshape(0, n)
            else:
                raise ValueError("A must be a matrix")
        m = self.A.shape[0]
        if self.A.shape[1] != n:
            raise ValueError(f"A has shape {self.A.shape}, expected ({m}, {n})")
        if self.b.shape != (m,):
            raise ValueError(f"b has shape {self.b.shape}, expected ({m},)")
        if len(self.relations) != m:
            raise ValueError("one relation required per row")
        for rel in self.relations:
            if rel not in _RELATIONS:
                raise ValueError(f"unknown relation {rel!r}")
        if self.lower.shape != (n,) or self.upper.shape != (n,):
            raise ValueError("bound vectors must match the variable count")
        if not (np.isfinite(self.A).all() and np.isfinite(self.b).all()
                and np.isfinite(self.c).all()):
            raise ValueError("matrix, rhs and objective entries must be finite")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @property
    def num_vars(self) -> int:
        return self.c.shape[0]

    @property
    def num_rows(self) -> int:
        return self.A.shape[0]


@dataclass
class Basis:
    """Warm-start handle: basic column per row plus nonbasic bound side.

    Column indices refer to the augmented (structural + slack) system; a
    basis from a solve of one problem restarts a problem with the same rows
    plus appended ones only if the caller extends it accordingly.
    """

    basic: np.ndarray
    at_upper: np.ndarray


@dataclass
class LpOutcome:
    status: str
    x: Optional[np.ndarray] = None
    objective: Optional[float] = None
    ray: Optional[np.ndarray] = None
    certificate: Optional[np.ndarray] = None
    row_duals: Optional[np.ndarray] = None
    basis: Optional[Basis] = None
    pivots: int = 0


def _slack_bounds(rel: str) -> tuple[float, float]:
    if rel == LESS_EQUAL:
        return 0.0, np.inf
    if rel == GREATER_EQUAL:
        return -np.inf, 0.0
    return 0.0, 0.0


class _NumericalTrouble(Exception):
    pass


class _PivotLimit(Exception):
    pass


class _Simplex:
    """Bounded-variable simplex over an equality system ``M z = b``."""

    def __init__(self, M, b, lower, upper, max_pivots):
        self.M = M
        self.b = b
        self.lo = lower
        self.up = upper
        self.m, self.N = M.shape
        self.max_pivots = max_pivots
        self.pivots = 0
        self.degenerate_run = 0
        self.bland = False
        self.basic = np.empty(self.m, dtype=int)
        self.in_basis = np.zeros(self.N, dtype=bool)
        self.at_upper = np.zeros(self.N, dtype=bool)
        self.x = np.zeros(self.N)
        self.Binv = np.eye(self.m)
        self._since_refactor = 0

    def set_basis(self, basic, at_upper):
        self.basic = np.array(basic, dtype=int)
        self.in_basis[:] = False
        self.in_basis[self.basic] = True
        self.at_upper = np.array(at_upper, dtype=bool)
        self.at_upper[self.basic] = False
        self._set_nonbasic_values()
        self.refactor()

    def _set_nonbasic_values(self):
        for j in range(self.N):
            if self.in_basis[j]:
                continue
            if self.at_upper[j] and np.isfinite(self.up[j]):
                self.x[j] = self.up[j]
            elif np.isfinite(self.lo[j]):
                self.x[j] = self.lo[j]
            elif np.isfinite(self.up[j]):
                self.x[j] = self.up[j]
                self.at_upper[j] = True
            else:
                self.x[j] = 0.0

    def refactor(self):
        B = self.M[:, self.basic]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise _NumericalTrouble("singular basis") from exc
        if not np.isfinite(self.Binv).all():
            raise _NumericalTrouble("non-finite basis inverse")
        self._recompute_basic_values()
        self._since_refactor = 0

    def _recompute_basic_values(self):
        nb = ~self.in_basis
        rhs = self.b - self.M[:, nb] @ self.x[nb]
        self.x[self.basic] = self.Binv @ rhs

    def basic_feasible(self, tol=_BOUND_TOL):
        xb = self.x[self.basic]
        return bool(
            np.all(xb >= self.lo[self.basic] - tol)
            and np.all(xb <= self.up[self.basic] + tol)
        )

    def duals(self, cost):
        return self.Binv.T @ cost[self.basic]

    def reduced_costs(self, cost):
        y = self.duals(cost)
        return cost - self.M.T @ y

    def _entering(self, d, allowed):
        # Direction +1 increases the variable away from its lower bound,
        # -1 decreases it away from its upper bound.
        best = -1
        best_dir = 0
        best_score = _RC_TOL
        for j in range(self.N):
            if self.in_basis[j] or not allowed[j]:
                continue
            if self.lo[j] == self.up[j]:
                continue
            dj = d[j]
            free = not np.isfinite(self.lo[j]) and not np.isfinite(self.up[j])
            if self.at_upper[j]:
                cand_dir = -1 if dj > _RC_TOL else 0
            elif free:
                cand_dir = 1 if dj < -_RC_TOL else (-1 if dj > _RC_TOL else 0)
            else:
                cand_dir = 1 if dj < -_RC_TOL else 0
            if cand_dir == 0:
                continue
            if self.bland:
                return j, cand_dir
            score = abs(dj)
            if score > best_score + 1e-15:
                best, best_dir, best_score = j, cand_dir, score
        return (best, best_dir) if best >= 0 else (-1, 0)

    def _ratio_test(self, j, direction, w):
        # Entering step limited by its own opposite bound and by each basic
        # variable hitting a finite bound.
        span = self.up[j] - self.lo[j]
        best_step = span if np.isfinite(span) else np.inf
        leave_pos = -1
        rates = direction * w
        xb = self.x[self.basic]
        for i in range(self.m):
            r = rates[i]
            if r > _PIVOT_TOL:
                if not np.isfinite(self.lo[self.basic[i]]):
                    continue
                step = (xb[i] - self.lo[self.basic[i]]) / r
            elif r < -_PIVOT_TOL:
                if not np.isfinite(self.up[self.basic[i]]):
                    continue
                step = (self.up[self.basic[i]] - xb[i]) / (-r)
            else:
                continue
            step = max(step, 0.0)
            if step < best_step - 1e-12:
                best_step = step
                leave_pos = i
            elif step <= best_step + 1e-12 and leave_pos >= 0:
                if self.bland:
                    if self.basic[i] < self.basic[leave_pos]:
                        leave_pos = i
                elif abs(w[i]) > abs(w[leave_pos]):
                    leave_pos = i
        return best_step, leave_pos

    def _pivot(self, j, direction, step, leave_pos, w):
        self.x[self.basic] -= direction * step * w
        self.x[j] += direction * step
        if leave_pos < 0:
            # Bound flip: variable crosses to its other bound.
            self.at_upper[j] = direction > 0
            return
        leaving = self.basic[leave_pos]
        self.in_basis[leaving] = False
        rate = direction * w[leave_pos]
        # Leaving variable lands on the bound that blocked the step.
        if rate > 0:
            self.at_upper[leaving] = False
            self.x[leaving] = self.lo[leaving]
        else:
            self.at_upper[leaving] = True
            self.x[leaving] = self.up[leaving]
        self.basic[leave_pos] = j
        self.in_basis[j] = True
        self.at_upper[j] = False
        piv = w[leave_pos]
        if abs(piv) < _PIVOT_TOL:
            raise _NumericalTrouble("tiny pivot element")
        row = self.Binv[leave_pos] / piv
        self.Binv -= np.outer(w, row)
        self.Binv[leave_pos] = row
        self._since_refactor += 1
        if self._since_refactor >= _REFACTOR_EVERY:
            self.refactor()

    def optimize(self, cost, allowed=None):
        """Run simplex to optimality for ``min cost'z``; returns True, or
        False when an unbounded improving ray was found (stored on self)."""
        if allowed is None:
            allowed = np.ones(self.N, dtype=bool)
        bland_trigger = 10 * (self.m + self.N)
        self.ray = None
        while True:
            d = self.reduced_costs(cost)
            j, direction = self._entering(d, allowed)
            if j < 0:
                return True
            w = self.Binv @ self.M[:, j]
            step, leave_pos = self._ratio_test(j, direction, w)
            if not np.isfinite(step):
                ray = np.zeros(self.N)
                ray[j] = direction
                ray[self.basic] -= direction * w
                self.ray = ray
                return False
            self.pivots += 1
            if self.pivots > self.max_pivots:
                raise _PivotLimit
            if step < _DEGEN_STEP:
                self.degenerate_run += 1
                if self.degenerate_run >= bland_trigger:
                    self.bland = True
            else:
                self.degenerate_run = 0
            self._pivot(j, direction, step, leave_pos, w)


def _solve_unconstrained(problem: LpProblem, c_min: np.ndarray) -> LpOutcome:
    # No rows: optimize each variable against its own bounds.
    n = problem.num_vars
    x = np.zeros(n)
    for j in range(n):
        if c_min[j] > 0:
            if not np.isfinite(problem.lower[j]):
                ray = np.zeros(n)
                ray[j] = -1.0
                return LpOutcome(status=UNBOUNDED, ray=ray)
            x[j] = problem.lower[j]
        elif c_min[j] < 0:
            if not np.isfinite(problem.upper[j]):
                ray = np.zeros(n)
                ray[j] = 1.0
                return LpOutcome(status=UNBOUNDED, ray=ray)
            x[j] = problem.upper[j]
        else:
            if np.isfinite(problem.lower[j]):
                x[j] = problem.lower[j]
            elif np.isfinite(problem.upper[j]):
                x[j] = problem.upper[j]
    obj = float(problem.c @ x)
    return LpOutcome(
        status=OPTIMAL,
        x=x,
        objective=obj,
        row_duals=np.zeros(0),
        basis=Basis(basic=np.zeros(0, dtype=int), at_upper=np.zeros(n, dtype=bool)),
    )


def solve(problem: LpProblem, warm: Optional[Basis] = None,
          max_pivots: int = 1_000_000, feas_tol: float = 1e-7) -> LpOutcome:
    """Solve an LP; deterministic for a fixed input.

    Hitting the pivot cap or losing the factorization numerically yields
    status ``numerical_failure`` rather than a wrong answer.
    """
    n, m = problem.num_vars, problem.num_rows
    sign = 1.0 if problem.sense == "min" else -1.0
    c_min = sign * problem.c
    if m == 0:
        return _solve_unconstrained(problem, c_min)

    slack_lo = np.empty(m)
    slack_up = np.empty(m)
    for i, rel in enumerate(problem.relations):
        slack_lo[i], slack_up[i] = _slack_bounds(rel)
    M = np.hstack([problem.A, np.eye(m)])
    lo = np.concatenate([problem.lower, slack_lo])
    up = np.concatenate([problem.upper, slack_up])
    N = n + m

    try:
        if warm is not None and warm.basic.shape[0] == m and \
                warm.basic.size and warm.basic.max() < N and \
                warm.at_upper.shape[0] == N:
            core = _Simplex(M, problem.b, lo, up, max_pivots)
            try:
                core.set_basis(warm.basic, warm.at_upper)
                if core.basic_feasible():
                    return _phase_two(problem, core, c_min, n, m, feas_tol)
            except _NumericalTrouble:
                pass
        return _cold_solve(problem, M, lo, up, c_min, n, m, max_pivots, feas_tol)
    except (_NumericalTrouble, _PivotLimit):
        return LpOutcome(status=NUMERICAL_FAILURE)


def _cold_solve(problem, M, lo, up, c_min, n, m, max_pivots, feas_tol):
    N = n + m
    # Start every structural/slack variable on a finite bound (or zero when
    # free) and cover the residual with one artificial column per row.
    start = np.zeros(N)
    start_upper = np.zeros(N, dtype=bool)
    for j in range(N):
        if np.isfinite(lo[j]):
            start[j] = lo[j]
        elif np.isfinite(up[j]):
            start[j] = up[j]
            start_upper[j] = True
    resid = problem.b - M @ start
    art_sign = np.where(resid >= 0, 1.0, -1.0)
    M_aug = np.hstack([M, np.diag(art_sign)])
    lo_aug = np.concatenate([lo, np.zeros(m)])
    up_aug = np.concatenate([up, np.full(m, np.inf)])

    core = _Simplex(M_aug, problem.b, lo_aug, up_aug, max_pivots)
    core.at_upper[:N] = start_upper
    core.set_basis(np.arange(N, N + m), core.at_upper)

    cost1 = np.zeros(N + m)
    cost1[N:] = 1.0
    core.optimize(cost1)  # Phase-1 objective is bounded below by zero.
    infeas = float(cost1 @ core.x)
    if infeas > feas_tol:
        y = core.duals(cost1)
        return LpOutcome(status=INFEASIBLE, certificate=y, pivots=core.pivots)

    _evict_artificials(core, N)
    # Artificials stay pinned at zero through phase 2.
    core.up[N:] = 0.0
    core.x[N:] = np.where(core.in_basis[N:], core.x[N:], 0.0)
    return _phase_two(problem, core, c_min, n, m, feas_tol)


def _evict_artificials(core, N):
    for pos in range(core.m):
        j = core.basic[pos]
        if j < N:
            continue
        row = core.Binv[pos] @ core.M[:, :N]
        candidates = np.flatnonzero(~core.in_basis[:N] & (np.abs(row) > 1e-8))
        if candidates.size == 0:
            continue  # redundant row; artificial stays basic at zero
        enter = int(candidates[0])
        w = core.Binv @ core.M[:, enter]
        core._pivot(enter, 1, 0.0, pos, w)


def _phase_two(problem, core, c_min, n, m, feas_tol):
    cost = np.zeros(core.N)
    cost[:n] = c_min
    bounded = core.optimize(cost)
    if not bounded:
        # The internal direction improves the minimized cost, which improves
        # the original objective in either sense.
        return LpOutcome(status=UNBOUNDED, ray=core.ray[:n], pivots=core.pivots)
    x = core.x[:n].copy()
    if m:
        resid = problem.A @ x - problem.b
        for i, rel in enumerate(problem.relations):
            bad = (rel == LESS_EQUAL and resid[i] > 10 * feas_tol) or \
                  (rel == GREATER_EQUAL and resid[i] < -10 * feas_tol) or \
                  (rel == EQUAL and abs(resid[i]) > 10 * feas_tol)
            if bad:
                raise _NumericalTrouble("row residual drift")
    obj = float(problem.c @ x)
    y_int = core.duals(cost)[:m]
    row_duals = y_int if problem.sense == "min" else -y_int
    keep = core.basic < n + m
    if np.all(keep):
        basis = Basis(basic=core.basic.copy(), at_upper=core.at_upper[: n + m].copy())
    else:
        basis = None  # redundant rows left an artificial basic; not reusable
    return LpOutcome(status=OPTIMAL, x=x, objective=obj, row_duals=row_duals,
                     basis=basis, pivots=core.pivots)
