"""Separable penalty terms and the per-interval bounds that drive diagram states.

A penalty component is a univariate function that is zero exactly at zero,
non-decreasing on [0, inf) and non-increasing on (-inf, 0].  Because of that
monotonicity, its minimum over an interval sits at the endpoint closest to
zero (or is zero when the interval straddles the origin), which is what
``interval_lower_bound`` computes.

SCAD and MCP are defined through integrals of clipped linear functions; the
closed forms below are the piecewise integrals of those integrands and are
pinned against adaptive quadrature in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "ScaleComponent",
    "LpPower",
    "L0",
    "Scad",
    "Mcp",
    "SeparableScale",
]


def _eval_shaped(raw, x):
    """Return a float for scalar input, an ndarray otherwise."""
    if np.ndim(x) == 0:
        return float(raw[0])
    return raw


class ScaleComponent:
    """Base class for univariate penalty terms.

    Instances are immutable after construction and safe to share between
    threads.  Subclasses implement ``value`` for scalars and arrays.
    """

    def value(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)

    def interval_lower_bound(self, lo: float, hi: float) -> float:
        """Exact minimum of the term over [lo, hi].

        Endpoints may be infinite as long as the minimizing endpoint is
        finite; an interval that straddles zero has minimum 0 regardless of
        its endpoints.
        """
        if not lo <= hi:
            raise ValueError(f"invalid interval [{lo}, {hi}]")
        if hi <= 0.0:
            endpoint = hi
        elif lo >= 0.0:
            endpoint = lo
        else:
            return 0.0
        if not math.isfinite(endpoint):
            raise ValueError(
                f"interval [{lo}, {hi}] has a non-finite minimizing endpoint"
            )
        return float(self.value(endpoint))

    def interval_upper_bound(self, lo: float, hi: float) -> float:
        """Exact maximum of the term over [lo, hi] (may be +inf).

        Monotonicity on each sign half-line puts the maximum at one of the
        two endpoints.
        """
        if not lo <= hi:
            raise ValueError(f"invalid interval [{lo}, {hi}]")
        return max(float(self.value(lo)), float(self.value(hi)))


@dataclass(frozen=True)
class LpPower(ScaleComponent):
    """``weight * |x| ** power`` with ``power > 0``.

    ``power=1`` gives an absolute-value term, ``power=2`` a quadratic one,
    and powers in (0, 1) give the familiar nonconvex bridge terms.
    """

    power: float
    weight: float = 1.0

    def __post_init__(self):
        if not self.power > 0:
            raise ValueError(f"power must be positive, got {self.power}")
        if not self.weight > 0:
            raise ValueError(f"weight must be positive, got {self.weight}")

    def value(self, x):
        a = np.abs(np.atleast_1d(np.asarray(x, dtype=float)))
        return _eval_shaped(self.weight * a**self.power, x)


@dataclass(frozen=True)
class L0(ScaleComponent):
    """Indicator of a nonzero entry: 0 at zero, ``weight`` elsewhere."""

    weight: float = 1.0

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError(f"weight must be positive, got {self.weight}")

    def value(self, x):
        a = np.atleast_1d(np.asarray(x, dtype=float))
        return _eval_shaped(np.where(a == 0.0, 0.0, self.weight), x)


@dataclass(frozen=True)
class Scad(ScaleComponent):
    """Smoothly clipped absolute deviation penalty.

    Defined as ``lam * integral_0^|x| min(1, (gamma - y/lam)_+ / (gamma-1)) dy``
    with ``lam > 0`` and ``gamma > 2``.  Piecewise integration gives:

    * ``lam*|x|``                                    for ``|x| <= lam``
    * ``(2*gamma*lam*|x| - x^2 - lam^2) / (2*(gamma-1))``
      for ``lam < |x| <= gamma*lam``
    * ``lam^2 * (gamma+1) / 2``                      beyond ``gamma*lam``
    """

    lam: float
    gamma: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if not self.gamma > 2:
            raise ValueError(f"gamma must exceed 2, got {self.gamma}")

    def value(self, x):
        lam, g = self.lam, self.gamma
        a = np.abs(np.atleast_1d(np.asarray(x, dtype=float)))
        out = np.full(a.shape, lam * lam * (g + 1.0) / 2.0)
        low = a <= lam
        mid = ~low & (a <= g * lam)
        out[low] = lam * a[low]
        am = a[mid]
        out[mid] = (2.0 * g * lam * am - am * am - lam * lam) / (2.0 * (g - 1.0))
        return _eval_shaped(out, x)


@dataclass(frozen=True)
class Mcp(ScaleComponent):
    """Minimax concave penalty.

    Defined as ``lam * integral_0^|x| (1 - y/(lam*gamma))_+ dy`` with
    ``lam > 0`` and ``gamma > 0``; integrates to ``lam*|x| - x^2/(2*gamma)``
    on ``|x| <= gamma*lam`` and saturates at ``gamma*lam^2/2``.
    """

    lam: float
    gamma: float

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    def value(self, x):
        lam, g = self.lam, self.gamma
        a = np.abs(np.atleast_1d(np.asarray(x, dtype=float)))
        out = np.full(a.shape, g * lam * lam / 2.0)
        low = a <= g * lam
        al = a[low]
        out[low] = lam * al - al * al / (2.0 * g)
        return _eval_shaped(out, x)


def _per_coordinate(value, dim: int, name: str) -> list[float]:
    if np.ndim(value) == 0:
        return [float(value)] * dim
    vals = [float(v) for v in value]
    if len(vals) != dim:
        raise ValueError(f"{name} has length {len(vals)}, expected {dim}")
    return vals


class SeparableScale:
    """A coordinate-wise sum of penalty components.

    ``value(x)`` is the sum of the per-coordinate terms; all components
    vanish at zero, so the total does too.
    """

    def __init__(self, components: Sequence[ScaleComponent]):
        comps = tuple(components)
        if not comps:
            raise ValueError("need at least one component")
        for c in comps:
            if not isinstance(c, ScaleComponent):
                raise TypeError(f"not a ScaleComponent: {c!r}")
        self.components = comps

    @property
    def dim(self) -> int:
        return len(self.components)

    def __len__(self) -> int:
        return len(self.components)

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.dim},)")
        return float(sum(c.value(xi) for c, xi in zip(self.components, x)))

    def __call__(self, x) -> float:
        return self.value(x)

    def value_columns(self, X: np.ndarray) -> np.ndarray:
        """Row-wise totals for a (m, dim) array of points."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ValueError(f"expected (m, {self.dim}) array, got {X.shape}")
        out = np.zeros(X.shape[0])
        for i, c in enumerate(self.components):
            out += c.value(X[:, i])
        return out

    def interval_lower_bounds(self, lowers, uppers) -> np.ndarray:
        lowers = np.asarray(lowers, dtype=float)
        uppers = np.asarray(uppers, dtype=float)
        return np.array(
            [
                c.interval_lower_bound(lo, hi)
                for c, lo, hi in zip(self.components, lowers, uppers)
            ]
        )

    def min_over_box(self, lowers, uppers) -> float:
        return float(self.interval_lower_bounds(lowers, uppers).sum())

    def max_over_box(self, lowers, uppers) -> float:
        return float(
            sum(
                c.interval_upper_bound(lo, hi)
                for c, lo, hi in zip(self.components, lowers, uppers)
            )
        )

    @classmethod
    def lp_power(cls, dim: int, power, weight=1.0) -> "SeparableScale":
        powers = _per_coordinate(power, dim, "power")
        weights = _per_coordinate(weight, dim, "weight")
        return cls([LpPower(p, w) for p, w in zip(powers, weights)])

    @classmethod
    def l0(cls, dim: int, weight=1.0) -> "SeparableScale":
        weights = _per_coordinate(weight, dim, "weight")
        return cls([L0(w) for w in weights])

    @classmethod
    def scad(cls, dim: int, lam, gamma) -> "SeparableScale":
        lams = _per_coordinate(lam, dim, "lam")
        gammas = _per_coordinate(gamma, dim, "gamma")
        return cls([Scad(l, g) for l, g in zip(lams, gammas)])

    @classmethod
    def mcp(cls, dim: int, lam, gamma) -> "SeparableScale":
        lams = _per_coordinate(lam, dim, "lam")
        gammas = _per_coordinate(gamma, dim, "gamma")
        return cls([Mcp(l, g) for l, g in zip(lams, gammas)])
