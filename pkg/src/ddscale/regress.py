"""Penalized least-squares problems: data ingestion and the model object.

The model minimizes ``||y - X b||_2^2`` plus a separable penalty, either in
the objective (penalty form) or as a budget constraint on the penalty
(budget form).  Coordinates may be left unpenalized (weight zero on the
command line, or an appended intercept column); those coordinates never
enter a diagram and are handled by the loss alone.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dd import Box
from .scale import L0, LpPower, Mcp, Scad, ScaleComponent, SeparableScale

__all__ = [
    "Dataset",
    "RegressionProblem",
    "load_csv",
    "synth",
    "make_problem",
]


@dataclass
class Dataset:
    """A numeric design matrix with its response vector."""

    X: np.ndarray
    y: np.ndarray
    feature_names: list[str]
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2:
            raise ValueError("X must be a matrix")
        n, p = self.X.shape
        if n < 1 or p < 1:
            raise ValueError("need at least one row and one column")
        if self.y.shape != (n,):
            raise ValueError(f"y has shape {self.y.shape}, expected ({n},)")
        if not (np.isfinite(self.X).all() and np.isfinite(self.y).all()):
            raise ValueError("dataset contains non-finite entries")
        if len(self.feature_names) != p:
            raise ValueError("one feature name per column required")

    @property
    def num_samples(self) -> int:
        return self.X.shape[0]

    @property
    def num_features(self) -> int:
        return self.X.shape[1]


def load_csv(path, response_col: str, standardize: bool = True) -> Dataset:
    """Read a numeric CSV with a header row.

    The response column becomes ``y``; every other column becomes a feature.
    With ``standardize`` each feature column is z-scored and the response is
    centered, which is recorded in the dataset provenance.  A non-numeric
    cell fails with its row and column; a constant column cannot be z-scored
    and fails explicitly.
    """
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if response_col not in header:
            raise ValueError(
                f"{path}: response column {response_col!r} not in header {header}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ValueError(
                    f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}"
                )
            parsed = []
            for colname, cell in zip(header, row):
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise ValueError(
                        f"{path}:{lineno}: column {colname!r}: "
                        f"non-numeric cell {cell.strip()!r}"
                    ) from None
            rows.append(parsed)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    table = np.array(rows, dtype=float)
    resp_idx = header.index(response_col)
    y = table[:, resp_idx]
    X = np.delete(table, resp_idx, axis=1)
    names = [h for i, h in enumerate(header) if i != resp_idx]
    provenance = {"source": str(path), "response": response_col,
                  "standardize": bool(standardize)}
    if standardize:
        mean = X.mean(axis=0)
        sd = X.std(axis=0)
        dead = np.flatnonzero(sd == 0.0)
        if dead.size:
            raise ValueError(
                f"{path}: constant column {names[dead[0]]!r} cannot be standardized"
            )
        X = (X - mean) / sd
        y = y - y.mean()
    return Dataset(X=X, y=y, feature_names=names, provenance=provenance)


def synth(seed: int, n: int, p: int, sparsity: int,
          noise_sd: float) -> tuple[Dataset, np.ndarray]:
    """Gaussian design with a +-1 sparse coefficient vector.

    Deterministic per seed; the true coefficients are returned alongside.
    """
    if not 0 <= sparsity <= p:
        raise ValueError("sparsity must lie in [0, p]")
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    if sparsity:
        support = rng.choice(p, size=sparsity, replace=False)
        beta[support] = rng.choice([-1.0, 1.0], size=sparsity)
    y = X @ beta + noise_sd * rng.standard_normal(n)
    ds = Dataset(
        X=X, y=y, feature_names=[f"x{i}" for i in range(p)],
        provenance={"source": "synthetic", "seed": int(seed), "n": int(n),
                    "p": int(p), "sparsity": int(sparsity),
                    "noise_sd": float(noise_sd), "standardize": False},
    )
    return ds, beta


PENALTY_FORM = "penalty"
BUDGET_FORM = "budget"


class RegressionProblem:
    """Least-squares loss plus a separable penalty over the coefficients.

    ``components[i]`` is the penalty term for coordinate i or ``None`` for
    an unpenalized coordinate.  In budget form the penalty moves to the
    constraint ``penalty(b) <= budget`` and the objective is the loss alone.
    """

    def __init__(self, dataset: Dataset,
                 components: Sequence[Optional[ScaleComponent]],
                 form: str = PENALTY_FORM,
                 budget: Optional[float] = None,
                 box: Optional[Box] = None):
        comps = tuple(components)
        if len(comps) != dataset.num_features:
            raise ValueError(
                f"{len(comps)} penalty components for {dataset.num_features} features"
            )
        if form not in (PENALTY_FORM, BUDGET_FORM):
            raise ValueError(f"unknown form {form!r}")
        if form == BUDGET_FORM:
            if budget is None or not math.isfinite(budget):
                raise ValueError("budget form needs a finite budget")
        elif budget is not None:
            raise ValueError("budget only applies to budget form")
        self.dataset = dataset
        self.components = comps
        self.form = form
        self.budget = None if budget is None else float(budget)
        self.box = box
        self.penalized_index = np.array(
            [i for i, c in enumerate(comps) if c is not None], dtype=int
        )
        if form == BUDGET_FORM and self.penalized_index.size == 0:
            raise ValueError("budget form needs at least one penalized coordinate")
        self._dd_scale = (
            SeparableScale([comps[i] for i in self.penalized_index])
            if self.penalized_index.size
            else None
        )
        X, y = dataset.X, dataset.y
        self._gram = X.T @ X
        self._xty = X.T @ y
        self._yty = float(y @ y)
        self._ls_point: Optional[np.ndarray] = None

    @property
    def dim(self) -> int:
        return self.dataset.num_features

    @property
    def dd_scale(self) -> Optional[SeparableScale]:
        """Scale function over the penalized coordinates only."""
        return self._dd_scale

    def least_squares_point(self) -> np.ndarray:
        """Minimum-norm unpenalized minimizer (cached)."""
        if self._ls_point is None:
            sol, *_ = np.linalg.lstsq(self.dataset.X, self.dataset.y, rcond=None)
            self._ls_point = sol
        return self._ls_point

    def loss(self, beta) -> float:
        beta = self._check(beta)
        return float(beta @ self._gram @ beta - 2.0 * self._xty @ beta + self._yty)

    def loss_grad(self, beta) -> np.ndarray:
        beta = self._check(beta)
        return 2.0 * (self._gram @ beta - self._xty)

    def penalty_value(self, beta) -> float:
        beta = self._check(beta)
        return float(
            sum(c.value(beta[i])
                for i, c in enumerate(self.components) if c is not None)
        )

    def objective(self, beta) -> float:
        value = self.loss(beta)
        if self.form == PENALTY_FORM:
            value += self.penalty_value(beta)
        return value

    def is_budget_feasible(self, beta, tol: float = 1e-9) -> bool:
        if self.form != BUDGET_FORM:
            return True
        return self.penalty_value(beta) <= self.budget + tol

    def _check(self, beta) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.dim,):
            raise ValueError(f"beta has shape {beta.shape}, expected ({self.dim},)")
        return beta


def _component_for(kind: str, lam: float, gamma: float, power: float,
                   weight: float) -> Optional[ScaleComponent]:
    if weight == 0.0 or (kind in ("scad", "mcp") and lam == 0.0):
        return None
    if kind == "scad":
        return Scad(lam=lam, gamma=gamma)
    if kind == "mcp":
        return Mcp(lam=lam, gamma=gamma)
    if kind == "l0":
        return L0(weight=weight)
    if kind == "lp":
        return LpPower(power=power, weight=weight)
    raise ValueError(f"unknown penalty kind {kind!r}")


def make_problem(dataset: Dataset, penalty: str = "scad", lam: float = 1.0,
                 gamma: float = 3.0, power: float = 1.0, weight: float = 1.0,
                 form: str = PENALTY_FORM, budget: Optional[float] = None,
                 intercept: bool = False,
                 box: Optional[Box] = None) -> RegressionProblem:
    """Assemble a :class:`RegressionProblem` from flat penalty settings.

    ``lam == 0`` (for scad/mcp) or ``weight == 0`` leaves every coordinate
    unpenalized.  ``intercept`` appends an all-ones unpenalized column.
    """
    ds = dataset
    if intercept:
        X = np.hstack([ds.X, np.ones((ds.num_samples, 1))])
        ds = Dataset(X=X, y=ds.y, feature_names=ds.feature_names + ["intercept"],
                     provenance={**ds.provenance, "intercept": True})
    comps: list[Optional[ScaleComponent]] = [
        _component_for(penalty, lam, gamma, power, weight)
        for _ in range(dataset.num_features)
    ]
    if intercept:
        comps.append(None)
    return RegressionProblem(ds, comps, form=form, budget=budget, box=box)
