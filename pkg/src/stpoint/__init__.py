"""Spatio-temporal point pattern analysis on planar windows and linear networks.

Simulation (Poisson, ETAS, LGCP), first-order intensity fitting through
weighted Poisson regression on a cubature scheme, second-order summary
statistics (K and pair correlation, global and per-event), minimum
contrast estimation, permutation tests and goodness-of-fit diagnostics.
"""

__version__ = "0.1.0"

from .core import (
    MarkColumn,
    PointPattern,
    SpatialWindow,
    TimeInterval,
    pattern_from_table,
    temporal_multiplicity,
)
from .covariates import CovariateGrid, interpolate_idw, lookup_nearest
from .diagnostics import (
    GlobalDiagResult,
    LocalDiagResult,
    LocalTestResult,
    globaldiag,
    infl,
    localdiag,
    localtest,
)
from .fit import (
    DivergenceError,
    FitError,
    FittedPoissonModel,
    GlmResult,
    LocalPoissonFit,
    Quadrature,
    RankDeficiencyError,
    SeparableFit,
    fit_glm,
    locstppm,
    make_quadrature,
    predict_intensity,
    sep_fit,
    stppm,
)
from .formula import (
    DesignMatrix,
    Formula,
    FormulaError,
    build_design,
    parse_formula,
)
from .lgcp import (
    COV_FAMILIES,
    LgcpFit,
    MinContrastResult,
    cov_eval,
    min_contrast,
    sim_lgcp,
    stlgcppm,
)
from .network import (
    LinearNetwork,
    NetworkPoint,
    equidistant_count,
    equidistant_counts,
    network_distance,
    pairwise_network_distances,
    point_vertex_distances,
    snap_to_network,
)
from .optimize import MinimizeResult, nelder_mead
from .simulate import (
    EtasParams,
    IntensitySpec,
    branching_ratio,
    gr_magnitudes,
    omori_times,
    radial_displacements,
    sim_etas,
    sim_poisson,
)
from .summaries import (
    ListaSet,
    SummaryConfig,
    SummarySurface,
    resolve_config,
    second_order_global,
    second_order_local,
)

__all__ = [
    "__version__",
    "MarkColumn",
    "PointPattern",
    "SpatialWindow",
    "TimeInterval",
    "pattern_from_table",
    "temporal_multiplicity",
    "CovariateGrid",
    "interpolate_idw",
    "lookup_nearest",
    "GlobalDiagResult",
    "LocalDiagResult",
    "LocalTestResult",
    "globaldiag",
    "infl",
    "localdiag",
    "localtest",
    "DivergenceError",
    "FitError",
    "FittedPoissonModel",
    "GlmResult",
    "LocalPoissonFit",
    "Quadrature",
    "RankDeficiencyError",
    "SeparableFit",
    "fit_glm",
    "locstppm",
    "make_quadrature",
    "predict_intensity",
    "sep_fit",
    "stppm",
    "DesignMatrix",
    "Formula",
    "FormulaError",
    "build_design",
    "parse_formula",
    "COV_FAMILIES",
    "LgcpFit",
    "MinContrastResult",
    "cov_eval",
    "min_contrast",
    "sim_lgcp",
    "stlgcppm",
    "LinearNetwork",
    "NetworkPoint",
    "equidistant_count",
    "equidistant_counts",
    "network_distance",
    "pairwise_network_distances",
    "point_vertex_distances",
    "snap_to_network",
    "MinimizeResult",
    "nelder_mead",
    "EtasParams",
    "IntensitySpec",
    "branching_ratio",
    "gr_magnitudes",
    "omori_times",
    "radial_displacements",
    "sim_etas",
    "sim_poisson",
    "ListaSet",
    "SummaryConfig",
    "SummarySurface",
    "resolve_config",
    "second_order_global",
    "second_order_local",
]
