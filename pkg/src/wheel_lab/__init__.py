"""wheel_lab: LFPP geodesic trees on a grid and the space-filling loop they generate."""

from .errors import (
    AmbiguityError,
    ConfigurationError,
    DecodeError,
    DegenerateMergeError,
    DegeneratePathError,
    DependencyError,
    EmbeddingError,
    EmptyAnnulusError,
    InputError,
    InvalidSizeError,
    OracleInfeasibleError,
    ParameterError,
    StructuralError,
    VertexIndexError,
    WheelLabError,
)
from .field import AreaMeasure, FieldMode, GridField, area_measure, covariance_report, sample_field
from .metric import GeodesicPath, MetricGrid, build_metric, default_xi, distance, geodesic, metric_ball
from .tree import (
    PlanarTree,
    Subtree,
    build_geodesic_tree,
    compare_root_modes,
    confluence_radius,
    crossing_set,
    hairy_check,
    short_hair_subtree,
    verify_half_zipper,
)
from .wheel import (
    DualTree,
    WheelCurve,
    area_parametrization,
    contour_exploration,
    disk_check,
    dual_tree,
    recover_trees,
    visit_order_predicate,
)
from .pipeline import RunConfig, RunReport, emit_report, run_pipeline

__version__ = "0.1.0"
