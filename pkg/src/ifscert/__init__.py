"""Chain metrics on sampled continua and certificate checks for iterated function systems."""

from .geometry import (
    ContinuumModel,
    GraphCurve,
    PointCloud,
    Polyline,
    polar_to_cartesian,
    polyline_length,
    sample_graph_curve,
    sample_polyline,
    self_intersects,
)
from .metric import (
    ChainMetricProfile,
    EpsGraph,
    MonotonicityResult,
    chain_distance,
    chain_distance_on_graph,
    chain_profile,
    eps_graph,
    hausdorff,
    monotonicity_check,
)
from .continua import (
    NeedleModel,
    PModel,
    build_needle,
    build_P,
    build_zigzag_ln,
    default_needle_base,
    needle_from_model,
    needle_h1,
    needle_h2,
    needle_map,
    needle_wave,
    p_from_model,
    verify_P,
)
from .ifs import (
    AttractorResult,
    ContractionVerdict,
    IfsSpec,
    MapSpec,
    affine_map,
    attractor,
    certified_lipschitz,
    classify_contraction,
    closed_form_map,
    composed_map,
    eval_map,
    hutchinson,
    interval_image,
    lipschitz_estimate,
    ripple_map,
    squeeze_map,
)
from .certify import (
    Certificate,
    CertificationError,
    fixed_set_check,
    image_length_bound,
    length_budget,
    needle_dichotomy_check,
    p_point_coverage,
)
from . import formats, svg

__version__ = "0.1.0"

__all__ = [
    "AttractorResult",
    "Certificate",
    "CertificationError",
    "ChainMetricProfile",
    "ContinuumModel",
    "ContractionVerdict",
    "EpsGraph",
    "GraphCurve",
    "IfsSpec",
    "MapSpec",
    "MonotonicityResult",
    "NeedleModel",
    "PModel",
    "PointCloud",
    "Polyline",
    "affine_map",
    "attractor",
    "build_P",
    "build_needle",
    "build_zigzag_ln",
    "certified_lipschitz",
    "chain_distance",
    "chain_distance_on_graph",
    "chain_profile",
    "classify_contraction",
    "closed_form_map",
    "composed_map",
    "default_needle_base",
    "eps_graph",
    "eval_map",
    "fixed_set_check",
    "formats",
    "hausdorff",
    "hutchinson",
    "image_length_bound",
    "interval_image",
    "length_budget",
    "lipschitz_estimate",
    "monotonicity_check",
    "needle_dichotomy_check",
    "needle_from_model",
    "needle_h1",
    "needle_h2",
    "needle_map",
    "needle_wave",
    "p_from_model",
    "p_point_coverage",
    "polar_to_cartesian",
    "polyline_length",
    "ripple_map",
    "sample_graph_curve",
    "sample_polyline",
    "self_intersects",
    "squeeze_map",
    "svg",
    "verify_P",
]
