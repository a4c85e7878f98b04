"""Numerical laboratory for c-convex geometry and regularity of optimal transport maps."""

from .cexp import c_segment, cexp, cexp_many, check_cconvex, coord_image, dilate, momentum
from .cfunc import (CFunction, Grid, Region, SemidiscretePotential, c_cone, c_polar_dual, c_subdifferential,
                    map_of_cones_check, subdiff_image_volume, sublevel_set)
from .conditions import (MTWQuery, check_condition, check_glp, estimate_fpp_constant, estimate_qconv_M,
                         mtw_value, normalized_mtw)
from .config import DEFAULT_TOL, Tolerances, rng
from .cost import CostModel, audit_structure, derivatives, metric
from .errors import CConvexError, ConfigError
from .estimates import (aleksandrov_check, chopping_family, dual_segment_family, estimate_sweep,
                        sharp_growth_check, strict_convexity_cone, trapping_basis)
from .geometry import (Polytope, bishop_phelps, convex_hull, dual_volume_bound, inward_normal, john_ellipsoid,
                       normal_cone, polar_dual, property_battery)
from .reports import ConditionReport, EstimateReport
from .solver import (SourceMeasure, TargetAtoms, quantize, regularity_refinement_study, solve_semidiscrete,
                     transport_map)

__version__ = "0.1.0"

__all__ = [
    "CConvexError", "CFunction", "ConditionReport", "ConfigError", "CostModel", "DEFAULT_TOL", "EstimateReport",
    "Grid", "MTWQuery", "Polytope", "Region", "SemidiscretePotential", "SourceMeasure", "TargetAtoms",
    "Tolerances", "aleksandrov_check", "audit_structure", "bishop_phelps", "c_cone", "c_polar_dual",
    "c_segment", "c_subdifferential", "cexp", "cexp_many", "check_cconvex", "check_condition", "check_glp",
    "chopping_family", "convex_hull", "coord_image", "derivatives", "dilate", "dual_segment_family",
    "dual_volume_bound", "estimate_fpp_constant", "estimate_qconv_M", "estimate_sweep", "inward_normal",
    "john_ellipsoid", "map_of_cones_check", "metric", "momentum", "mtw_value", "normal_cone", "normalized_mtw",
    "polar_dual", "property_battery", "quantize", "regularity_refinement_study", "rng", "sharp_growth_check",
    "solve_semidiscrete", "strict_convexity_cone", "subdiff_image_volume", "sublevel_set", "transport_map",
    "trapping_basis",
]
