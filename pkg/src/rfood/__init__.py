"""Random-feature ridgeless regression under benign spectra and covariate shift."""

from rfood.errors import ConfigError, DomainError
from rfood.spectra import (
    BenignDiagnostics,
    HighDimDiagnostics,
    Spectrum,
    benign_diagnostics,
    critical_index,
    effective_rank,
    highdim_diagnostics,
    make_example_spectrum,
)
from rfood.datagen import (
    GroundTruth,
    NoiseModel,
    ShiftModel,
    build_shift_model,
    sample_inputs,
    sample_labels,
    sample_shift,
    validate_shift,
)
from rfood.features import (
    EnsembleModel,
    FeatureModel,
    FittedModel,
    feature_map,
    fit_min_norm,
    estimate_theta_star,
    predict,
    sample_feature_model,
)

__version__ = "0.1.0"

__all__ = [
    "BenignDiagnostics",
    "ConfigError",
    "DomainError",
    "EnsembleModel",
    "FeatureModel",
    "FittedModel",
    "GroundTruth",
    "HighDimDiagnostics",
    "NoiseModel",
    "ShiftModel",
    "Spectrum",
    "benign_diagnostics",
    "build_shift_model",
    "critical_index",
    "effective_rank",
    "estimate_theta_star",
    "feature_map",
    "fit_min_norm",
    "highdim_diagnostics",
    "make_example_spectrum",
    "predict",
    "sample_feature_model",
    "sample_inputs",
    "sample_labels",
    "sample_shift",
    "validate_shift",
]
