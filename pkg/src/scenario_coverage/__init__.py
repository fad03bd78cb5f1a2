"""Coverage-based sizing of scenario datasets from mining and generation."""

__version__ = "0.1.0"

from .errors import (
    ContractViolation,
    DomainError,
    ExtrapolationError,
    FitError,
    InsufficientDataError,
    InsufficientSignalError,
    MetamodelFitError,
    ScenarioCoverageError,
    UnreachableTargetError,
)
from .geometry import (
    CoverageKernel,
    ParameterSpace,
    ReferenceVolume,
    SampleCloud,
    VolumeEstimate,
    build_reference_volume,
    contains,
    coverage_curve,
    ellipsoid_volume,
    kernels_for,
    union_volume,
)
from .fitting import (
    FitDiagnostics,
    WeibullCoverageModel,
    bootstrap_fit,
    coverage_coefficient,
    fit_weibull,
    required_count,
    required_count_for_volume,
    residual_sum_of_squares,
)
from .metamodel import (
    GENERATION,
    MINING,
    AcquisitionMetaModel,
    CostAttributes,
    ErrorRateFunction,
    evaluate_error_rate,
    fit_generation_metamodel,
    measure_error_rate,
    mining_metamodel,
)
from .economics import (
    AcquisitionPlan,
    CheckPlan,
    QualityRequirements,
    SweepRow,
    cochran_sample,
    corrected_sample,
    evaluate_entry_points,
    improvement_count,
    optimize_acquisition,
    optimize_check,
    sensitivity_sweep,
)
from .synthetic import (
    DegradableGenerator,
    ReplayGenerator,
    SyntheticSource,
    degradable_generator,
    draw,
)

__all__ = sorted(
    name for name, value in globals().items()
    if not name.startswith("_") and not isinstance(value, type(errors))
)
