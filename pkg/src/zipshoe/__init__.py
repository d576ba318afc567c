"""Zip shift spaces and N-to-1 horseshoe verification."""

from ._kernels import BACKEND
from .conjugacy import (Box, CodedPoint, conjugacy_check, decode, entropy_estimate, itinerary,
                        periodic_orbit_solve)
from .errors import (AlphabetError, CapExceededError, ConfigError, ConvergenceError, DomainError,
                     EscapeError, PerturbationTooLargeError, PreconditionError, ZipshoeError)
from .geometry import (LipschitzCurve, Strip, curve_intersection, intersection_gap_bound,
                       nested_limit, strip_width)
from .horseshoe_model import (HorseshoeModel, HorseshoeParams, RefinementTree, apply, apply_inverse,
                              build_horseshoe, refine, verify_assumption1, verify_cones)
from .stability import PerturbedModel, Shape, match_conjugacy, perturb, verify_perturbed
from .symbolic_core import (CylinderSpec, ZipSequence, ZipSystem, cylinder_contains,
                            dense_orbit_prefix, distance, enumerate_periodic, expansivity_witness,
                            periodic_point_in_cylinder, preimages, shift, tau_apply)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Box", "CodedPoint", "conjugacy_check", "decode", "entropy_estimate", "itinerary",
    "periodic_orbit_solve", "AlphabetError", "CapExceededError", "ConfigError", "ConvergenceError",
    "DomainError", "EscapeError", "PerturbationTooLargeError", "PreconditionError", "ZipshoeError",
    "LipschitzCurve", "Strip", "curve_intersection", "intersection_gap_bound", "nested_limit",
    "strip_width", "HorseshoeModel", "HorseshoeParams", "RefinementTree", "apply", "apply_inverse",
    "build_horseshoe", "refine", "verify_assumption1", "verify_cones", "PerturbedModel", "Shape",
    "match_conjugacy", "perturb", "verify_perturbed", "CylinderSpec", "ZipSequence", "ZipSystem",
    "cylinder_contains", "dense_orbit_prefix", "distance", "enumerate_periodic",
    "expansivity_witness", "periodic_point_in_cylinder", "preimages", "shift", "tau_apply",
]
