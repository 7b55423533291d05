"""Approximate Pareto solutions of robust interval-valued multiobjective problems.

Certify, classify and construct approximate solutions of problems whose
objectives are interval-valued and whose constraints carry data uncertainty,
evaluated through their worst-case (robust) counterpart.
"""

__version__ = "0.1.0"

from .interval import Interval
from .model import Grid, GroundSet, Precision, Problem, ProblemFileError, Tolerances, load_problem, parse_problem
from .classify import classify_point, lemma32_check
from .kkt import check_kkt_pair
from .penalty import PenaltyOptions, solve_penalty
from .convexity import certify
from .wolfe import DualPoint, dual_classify, dual_objective, in_Omega_D, make_config
from .saddle import check_saddle, lagrangian, saddle_implies_solution

__all__ = [
    "Interval", "Grid", "GroundSet", "Precision", "Problem", "ProblemFileError", "Tolerances",
    "load_problem", "parse_problem", "classify_point", "lemma32_check", "check_kkt_pair",
    "PenaltyOptions", "solve_penalty", "certify", "DualPoint", "dual_classify", "dual_objective",
    "in_Omega_D", "make_config", "check_saddle", "lagrangian", "saddle_implies_solution",
]
