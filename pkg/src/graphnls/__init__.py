"""Ground states of NLS energies with vertex nonlinearities on metric graphs."""

from .analytic_line import LineConstants, NonlinearityParams, exponents, soliton_eval, soliton_frequency, theta
from .discretize import Discretization, EnergyBreakdown, GraphFunction, GridSpec, evaluate, project_mass
from .graph_model import MetricGraph, TopologyReport, check_assumption_H, classify
from .solver import SolveConfig, SolveReport, minimize

__all__ = [
    "Discretization",
    "EnergyBreakdown",
    "GraphFunction",
    "GridSpec",
    "LineConstants",
    "MetricGraph",
    "NonlinearityParams",
    "SolveConfig",
    "SolveReport",
    "TopologyReport",
    "check_assumption_H",
    "classify",
    "evaluate",
    "exponents",
    "minimize",
    "project_mass",
    "soliton_eval",
    "soliton_frequency",
    "theta",
]
__version__ = "0.1.0"
