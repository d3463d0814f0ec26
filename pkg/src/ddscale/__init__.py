"""Decision-diagram convexification for separable nonconvex penalties.

The package globally solves least-squares problems regularized by SCAD,
MCP, l0 or lp terms (or constrained by a budget on them): each branch-and-
cut node convexifies the penalty through a layered decision diagram whose
hull is tapped by subgradient separation, and a spatial search over boxes
closes the gap between primal and dual bounds.
"""

from .dd import Box, Diagram, PartitionScheme
from .estimator import ScalePenalizedRegressor
from .hull import Cut
from .regress import Dataset, RegressionProblem, load_csv, make_problem, synth
from .sbc import SolveReport, SolverConfig, solve
from .scale import L0, LpPower, Mcp, Scad, ScaleComponent, SeparableScale

__version__ = "0.1.0"

__all__ = [
    "Box",
    "Cut",
    "Dataset",
    "Diagram",
    "L0",
    "LpPower",
    "Mcp",
    "PartitionScheme",
    "RegressionProblem",
    "Scad",
    "ScaleComponent",
    "ScalePenalizedRegressor",
    "SeparableScale",
    "SolveReport",
    "SolverConfig",
    "load_csv",
    "make_problem",
    "solve",
    "synth",
    "__version__",
]
