"""Spatial clustering and colocalization statistics for marked point
patterns, replacing Monte Carlo permutation nulls of Ripley's K with
closed-form moments of the label-permutation distribution."""

from ._version import __version__
from ._kernels import HAS_NUMBA, active_backend, set_backend, use_backend
from .errors import (
    DegeneratePairError,
    EmptySampleError,
    EnumerationTooLargeError,
    GridMismatchError,
    IdenticalMarksError,
    InfeasibleAbundanceError,
    IngestError,
    InsufficientPointsError,
    InternalConsistencyError,
    KampError,
    MissingColumnError,
    RadiusNotOnGridError,
    RowParseError,
)
from .geometry import (
    EdgeCorrection,
    PairStream,
    PointPattern,
    Window,
    neighbor_pairs,
    translation_weight,
    window_area,
)
from .kstat import (
    KCurve,
    MarkQuery,
    RadiusGrid,
    k_bivariate,
    k_univariate,
    theoretical_csr,
)
from .moments import (
    ConditionDiagnostics,
    MomentPair,
    RStatistics,
    accumulate_r_statistics,
    condition_diagnostics,
    expectation_k,
    permutation_moments,
    variance_k_bivariate,
    variance_k_univariate,
)
from .inference import (
    KampResult,
    degree_of_clustering,
    p_value_upper,
    run_kamp,
    run_kamp_lite,
    run_theoretical,
    thin_pattern,
    z_statistic,
)
from .permutation import (
    PermNullSummary,
    exact_moments_small,
    perm_null,
    permute_labels,
)
from .simulate import (
    BACKGROUND,
    IMMUNE,
    IMMUNE1,
    IMMUNE2,
    Condition,
    SimScenario,
    sim_hom_clustered,
    sim_hom_null,
    sim_inhom_clustered,
    sim_inhom_null,
    simulate,
)
from .io import CellTable, ColumnMap, ingest_csv, read_window_file
from .batch import (
    BenchConfig,
    RunConfig,
    derive_seed,
    extract_covariate,
    run_batch,
    run_benchmark,
)

__all__ = [
    "__version__",
    "HAS_NUMBA",
    "active_backend",
    "set_backend",
    "use_backend",
    "KampError",
    "InsufficientPointsError",
    "IdenticalMarksError",
    "GridMismatchError",
    "RadiusNotOnGridError",
    "DegeneratePairError",
    "InfeasibleAbundanceError",
    "InternalConsistencyError",
    "EnumerationTooLargeError",
    "IngestError",
    "MissingColumnError",
    "EmptySampleError",
    "RowParseError",
    "Window",
    "PointPattern",
    "PairStream",
    "EdgeCorrection",
    "window_area",
    "translation_weight",
    "neighbor_pairs",
    "RadiusGrid",
    "MarkQuery",
    "KCurve",
    "k_univariate",
    "k_bivariate",
    "theoretical_csr",
    "RStatistics",
    "MomentPair",
    "ConditionDiagnostics",
    "accumulate_r_statistics",
    "expectation_k",
    "variance_k_univariate",
    "variance_k_bivariate",
    "permutation_moments",
    "condition_diagnostics",
    "KampResult",
    "z_statistic",
    "p_value_upper",
    "degree_of_clustering",
    "thin_pattern",
    "run_kamp",
    "run_kamp_lite",
    "run_theoretical",
    "PermNullSummary",
    "permute_labels",
    "perm_null",
    "exact_moments_small",
    "Condition",
    "SimScenario",
    "simulate",
    "sim_hom_null",
    "sim_inhom_null",
    "sim_hom_clustered",
    "sim_inhom_clustered",
    "BACKGROUND",
    "IMMUNE",
    "IMMUNE1",
    "IMMUNE2",
    "CellTable",
    "ColumnMap",
    "ingest_csv",
    "read_window_file",
    "RunConfig",
    "BenchConfig",
    "run_batch",
    "extract_covariate",
    "run_benchmark",
    "derive_seed",
]
