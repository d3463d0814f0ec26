"""Simplex tests: examples, certificates by substitution, a rational
vertex-enumeration oracle, a HiGHS cross-check, and anti-cycling."""

import itertools
from fractions import Fraction

import numpy as np
import pytest
from scipy.optimize import linprog

from ddscale import lp


def make(sense, c, A, rels, b, lo, up):
    return lp.LpProblem(sense, np.asarray(c, float),
                        np.asarray(A, float).reshape(len(rels), -1)
                        if len(rels) else np.zeros((0, len(c))),
                        list(rels), np.asarray(b, float),
                        np.asarray(lo, float), np.asarray(up, float))


def augmented(problem):
    m = problem.num_rows
    slack_lo = np.empty(m)
    slack_up = np.empty(m)
    for i, rel in enumerate(problem.relations):
        if rel == lp.LESS_EQUAL:
            slack_lo[i], slack_up[i] = 0.0, np.inf
        elif rel == lp.GREATER_EQUAL:
            slack_lo[i], slack_up[i] = -np.inf, 0.0
        else:
            slack_lo[i], slack_up[i] = 0.0, 0.0
    M = np.hstack([problem.A, np.eye(m)])
    lo = np.concatenate([problem.lower, slack_lo])
    up = np.concatenate([problem.upper, slack_up])
    return M, lo, up


def verify_farkas(problem, y, tol=1e-7):
    """Certificate check by substitution: y'b exceeds the sup of y'Az."""
    M, lo, up = augmented(problem)
    d = M.T @ y
    sup = 0.0
    for j, dj in enumerate(d):
        if dj > 1e-9:
            if not np.isfinite(up[j]):
                return False
            sup += dj * up[j]
        elif dj < -1e-9:
            if not np.isfinite(lo[j]):
                return False
            sup += dj * lo[j]
    return y @ problem.b - sup > tol


def verify_ray(problem, ray, tol=1e-7):
    r = problem.A @ ray
    for i, rel in enumerate(problem.relations):
        if rel == lp.LESS_EQUAL and r[i] > tol:
            return False
        if rel == lp.GREATER_EQUAL and r[i] < -tol:
            return False
        if rel == lp.EQUAL and abs(r[i]) > tol:
            return False
    for j, dj in enumerate(ray):
        if dj > 1e-9 and np.isfinite(problem.upper[j]):
            return False
        if dj < -1e-9 and np.isfinite(problem.lower[j]):
            return False
    improvement = problem.c @ ray
    return improvement < -1e-9 if problem.sense == "min" else improvement > 1e-9


def verify_optimal(problem, outcome, tol=1e-7):
    x = outcome.x
    assert np.all(x >= problem.lower - tol)
    assert np.all(x <= problem.upper + tol)
    r = problem.A @ x - problem.b
    for i, rel in enumerate(problem.relations):
        if rel == lp.LESS_EQUAL:
            assert r[i] <= tol
        elif rel == lp.GREATER_EQUAL:
            assert r[i] >= -tol
        else:
            assert abs(r[i]) <= tol
    assert outcome.objective == pytest.approx(float(problem.c @ x), abs=1e-9)


def oracle_vertex_enumeration(problem):
    """Exact optimum of a fully bounded LP by rational basis enumeration.

    Every vertex of the augmented equality system picks m basic columns and
    parks each nonbasic column on one of its finite bounds; all data must
    be rational (here: exactly representable floats).
    """
    M, lo, up = augmented(problem)
    m, N = M.shape
    Mf = [[Fraction(x).limit_denominator(10**6) for x in row] for row in M]
    best = None
    sense = 1 if problem.sense == "min" else -1
    cf = [Fraction(x).limit_denominator(10**6) * sense for x in problem.c]
    cf += [Fraction(0)] * m
    bf = [Fraction(x).limit_denominator(10**6) for x in problem.b]
    for basic in itertools.combinations(range(N), m):
        nonbasic = [j for j in range(N) if j not in basic]
        choices = []
        for j in nonbasic:
            opts = []
            if np.isfinite(lo[j]):
                opts.append(Fraction(lo[j]).limit_denominator(10**6))
            if np.isfinite(up[j]) and up[j] != lo[j]:
                opts.append(Fraction(up[j]).limit_denominator(10**6))
            if not opts:
                opts = [None]  # free nonbasic: no vertex through this basis
            choices.append(opts)
        if any(c == [None] for c in choices):
            continue
        Bf = [[Mf[i][j] for j in basic] for i in range(m)]
        for assignment in itertools.product(*choices):
            rhs = list(bf)
            for j, val in zip(nonbasic, assignment):
                for i in range(m):
                    rhs[i] -= Mf[i][j] * val
            xb = _frac_solve(Bf, rhs)
            if xb is None:
                continue
            point = {}
            for j, val in zip(nonbasic, assignment):
                point[j] = val
            feasible = True
            for pos, j in enumerate(basic):
                v = xb[pos]
                if np.isfinite(lo[j]) and v < Fraction(lo[j]).limit_denominator(10**6):
                    feasible = False
                    break
                if np.isfinite(up[j]) and v > Fraction(up[j]).limit_denominator(10**6):
                    feasible = False
                    break
                point[j] = v
            if not feasible:
                continue
            obj = sum(cf[j] * point[j] for j in range(N))
            if best is None or obj < best:
                best = obj
        # free basic variables are covered: they sit in the basis
    if best is None:
        return None
    return float(best) * sense


def _frac_solve(B, rhs):
    m = len(B)
    aug = [row[:] + [rhs[i]] for i, row in enumerate(B)]
    for col in range(m):
        piv = None
        for r in range(col, m):
            if aug[r][col] != 0:
                piv = r
                break
        if piv is None:
            return None
        aug[col], aug[piv] = aug[piv], aug[col]
        pval = aug[col][col]
        aug[col] = [v / pval for v in aug[col]]
        for r in range(m):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [a - factor * b for a, b in zip(aug[r], aug[col])]
    return [aug[i][m] for i in range(m)]


class TestExamples:
    def test_bounded_max(self):
        p = make("max", [1.0], [[1.0]], ["<="], [2.0], [0.0], [10.0])
        out = lp.solve(p)
        assert out.status == lp.OPTIMAL
        assert out.x[0] == pytest.approx(2.0)
        assert out.objective == pytest.approx(2.0)

    def test_unbounded_with_ray(self):
        p = make("max", [1.0], np.zeros((0, 1)), [], [], [0.0], [np.inf])
        out = lp.solve(p)
        assert out.status == lp.UNBOUNDED
        assert out.ray[0] > 0

    def test_infeasible_with_certificate(self):
        p = make("max", [1.0], [[1.0]], ["<="], [-1.0], [0.0], [np.inf])
        out = lp.solve(p)
        assert out.status == lp.INFEASIBLE
        assert verify_farkas(p, out.certificate)

    def test_equality_with_free_variable(self):
        p = make("min", [1.0, 0.0], [[1.0, 1.0]], ["=="], [3.0],
                 [-np.inf, 0.0], [np.inf, 2.0])
        out = lp.solve(p)
        assert out.status == lp.OPTIMAL
        assert out.objective == pytest.approx(1.0)


class TestAntiCycling:
    def test_beale_terminates_optimal(self):
        A = [[0.25, -60.0, -1.0 / 25, 9.0],
             [0.5, -90.0, -1.0 / 50, 3.0],
             [0.0, 0.0, 1.0, 0.0]]
        c = [-0.75, 150.0, -1.0 / 50, 6.0]
        p = make("min", c, A, ["<=", "<=", "<="], [0.0, 0.0, 1.0],
                 [0.0] * 4, [np.inf] * 4)
        out = lp.solve(p)
        assert out.status == lp.OPTIMAL
        assert out.objective == pytest.approx(-0.05, abs=1e-9)


class TestRationalOracle:
    def test_matches_vertex_enumeration(self):
        # Fully bounded integral LPs small enough for exact enumeration.
        rng = np.random.default_rng(11)
        solved = 0
        for _ in range(500):
            n = int(rng.integers(1, 5))
            m = int(rng.integers(1, 4))
            A = rng.integers(-4, 5, (m, n)).astype(float)
            b = rng.integers(-8, 9, m).astype(float)
            c = rng.integers(-5, 6, n).astype(float)
            lo = rng.integers(-6, 1, n).astype(float)
            up = (lo + rng.integers(1, 9, n)).astype(float)
            rels = [["<=", "==", ">="][i] for i in rng.integers(0, 3, m)]
            sense = "min" if rng.random() < 0.5 else "max"
            p = make(sense, c, A, rels, b, lo, up)
            out = lp.solve(p)
            ref = oracle_vertex_enumeration(p)
            if ref is None:
                assert out.status == lp.INFEASIBLE
                assert verify_farkas(p, out.certificate)
            else:
                solved += 1
                assert out.status == lp.OPTIMAL
                assert out.objective == pytest.approx(ref, abs=1e-6)
                verify_optimal(p, out)
        assert solved >= 100  # corpus must exercise the optimal path


class TestAgainstHighs:
    def test_mixed_relations_and_bounds(self):
        rng = np.random.default_rng(5)
        statuses = {lp.OPTIMAL: 0, lp.INFEASIBLE: 0, lp.UNBOUNDED: 0}
        for _ in range(250):
            n = int(rng.integers(1, 31))
            m = int(rng.integers(1, 13))
            A = rng.integers(-4, 5, (m, n)).astype(float)
            b = rng.integers(-8, 9, m).astype(float)
            c = rng.integers(-5, 6, n).astype(float)
            lo = rng.integers(-6, 1, n).astype(float)
            up = (lo + rng.integers(0, 9, n)).astype(float)
            for j in range(n):
                r = rng.random()
                if r < 0.15:
                    lo[j] = -np.inf
                if r > 0.85:
                    up[j] = np.inf
            rels = [["<=", "==", ">="][i] for i in rng.integers(0, 3, m)]
            sense = "min" if rng.random() < 0.5 else "max"
            p = make(sense, c, A, rels, b, lo, up)
            out = lp.solve(p)
            statuses[out.status] += 1
            Aub, bub, Aeq, beq = [], [], [], []
            for row, rel, rhs in zip(A, rels, b):
                if rel == "<=":
                    Aub.append(row)
                    bub.append(rhs)
                elif rel == ">=":
                    Aub.append(-row)
                    bub.append(-rhs)
                else:
                    Aeq.append(row)
                    beq.append(rhs)
            cc = c if sense == "min" else -c
            ref = linprog(
                cc,
                A_ub=np.array(Aub) if Aub else None,
                b_ub=np.array(bub) if bub else None,
                A_eq=np.array(Aeq) if Aeq else None,
                b_eq=np.array(beq) if beq else None,
                bounds=list(zip(lo, up)), method="highs",
            )
            if ref.status == 0:
                assert out.status == lp.OPTIMAL
                want = ref.fun if sense == "min" else -ref.fun
                assert out.objective == pytest.approx(want, rel=1e-6, abs=1e-6)
                verify_optimal(p, out)
            elif ref.status == 2:
                # HiGHS folds unbounded-after-presolve into this status;
                # certificates settle which verdict is right.
                if out.status == lp.UNBOUNDED:
                    assert verify_ray(p, out.ray)
                else:
                    assert out.status == lp.INFEASIBLE
                    assert verify_farkas(p, out.certificate)
            elif ref.status == 3:
                assert out.status == lp.UNBOUNDED
                assert verify_ray(p, out.ray)
        assert statuses[lp.OPTIMAL] >= 50


class TestWarmStart:
    def test_restart_from_own_basis(self):
        rng = np.random.default_rng(9)
        A = rng.integers(-3, 4, (4, 6)).astype(float)
        b = rng.integers(1, 9, 4).astype(float)
        c = rng.integers(-5, 6, 6).astype(float)
        p = make("min", c, A, ["<="] * 4, b, [-5.0] * 6, [5.0] * 6)
        cold = lp.solve(p)
        assert cold.status == lp.OPTIMAL
        warm = lp.solve(p, warm=cold.basis)
        assert warm.status == lp.OPTIMAL
        assert warm.objective == pytest.approx(cold.objective, abs=1e-9)
        assert warm.pivots <= cold.pivots

    def test_appended_slack_row(self):
        p = make("min", [1.0, 1.0], [[1.0, 0.0]], [">="], [1.0],
                 [0.0, 0.0], [10.0, 10.0])
        first = lp.solve(p)
        assert first.status == lp.OPTIMAL
        # Append a non-binding row; extend the basis with its slack.
        p2 = make("min", [1.0, 1.0], [[1.0, 0.0], [1.0, 1.0]], [">=", "<="],
                  [1.0, 50.0], [0.0, 0.0], [10.0, 10.0])
        basic = np.append(first.basis.basic, 2 + 1)  # new slack column
        at_upper = np.append(first.basis.at_upper, False)
        warm = lp.solve(p2, warm=lp.Basis(basic=basic, at_upper=at_upper))
        assert warm.status == lp.OPTIMAL
        assert warm.objective == pytest.approx(first.objective, abs=1e-9)
