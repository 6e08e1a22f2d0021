"""Regions of the real complement of a hypersurface, from an explicit polynomial
or from a projection presented by pseudo-witness sets."""

from .algebra import Polynomial, PolynomialSystem, parse_polynomial
from .errors import ChambercutError
from .oracle import LineOracle
from .pwitness import PseudoWitnessSet, initial_pseudo_witness
from .routing import (ExplicitBackend, OracleBackend, RoutingFunction, build_routing,
                      classify_real, critical_points)
from .regions import compute_regions, membership
from .pipeline import JobSpec, run_regions

__version__ = "0.1.0"

__all__ = ["Polynomial", "PolynomialSystem", "parse_polynomial", "ChambercutError",
           "LineOracle", "PseudoWitnessSet", "initial_pseudo_witness", "ExplicitBackend",
           "OracleBackend", "RoutingFunction", "build_routing", "classify_real",
           "critical_points", "compute_regions", "membership", "JobSpec", "run_regions"]
