"""
spde-uniq-lab - spectral simulation and verification of weak uniqueness for SPDEs with additive noise.
"""

__version__ = "0.1.0"

from .admissibility import Family, Route, ScenarioParams, Verdict, classify
from .config import ScenarioFile, parse_scenario, serialize_scenario
from .core import build_scenario, run_compare, run_kolmogorov, run_simulate
from .galerkin import Scenario, simulate_ensemble
from .kolmogorov import ProjectedProblem, solve_mild, verify_smoothing
from .laws import compare_laws, laplace_functional
from .noise import NoiseKind, NoiseSpec
from .spectral import Boundary, Spectrum, build_spectrum

__all__ = [
    "Boundary",
    "Family",
    "NoiseKind",
    "NoiseSpec",
    "ProjectedProblem",
    "Route",
    "Scenario",
    "ScenarioFile",
    "ScenarioParams",
    "Spectrum",
    "Verdict",
    "build_scenario",
    "build_spectrum",
    "classify",
    "compare_laws",
    "laplace_functional",
    "parse_scenario",
    "run_compare",
    "run_kolmogorov",
    "run_simulate",
    "serialize_scenario",
    "simulate_ensemble",
    "solve_mild",
    "verify_smoothing",
]
