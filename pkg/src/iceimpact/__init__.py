"""Feature impact metrics for black-box tabular models, built on ICE curves."""

from .dataset import (
    Dataset,
    FeatureMeta,
    SamplingConfig,
    feature_std,
    from_arrays,
    load_csv,
    sample_rows,
    save_csv,
)
from .phantom import PhantomGrid, build_grid
from .impact import (
    FeatureImpactResult,
    SegmentDerivatives,
    analyze_feature,
    analyze_features,
    feature_impact,
    feature_impact_directional,
    heterogeneity,
    in_distribution_impact,
    likelihood,
    non_linearity,
    segment_derivatives,
)
from .predictors import (
    BatchTimeout,
    ExternalChildFailure,
    ExternalPredictor,
    ExternalPredictorError,
    FittedLinearModel,
    ForestModel,
    LogisticModel,
    MalformedResponse,
    PredictionCountMismatch,
    RankDeficiencyError,
    external_predictor,
    fit_forest,
    fit_logistic,
    fit_ols,
    predict,
)
from .comparison import (
    ImpactReport,
    MetricVector,
    impurity_importance,
    normalize,
    pearson,
    permutation_importance,
    report,
)
from .plotdata import Curve, CurveSet, c_ice_curves, curves_to_csv, curves_to_dict, ice_curves

__version__ = "0.1.0"

__all__ = [
    "Dataset", "FeatureMeta", "SamplingConfig", "load_csv", "save_csv",
    "from_arrays", "feature_std", "sample_rows",
    "PhantomGrid", "build_grid",
    "SegmentDerivatives", "FeatureImpactResult", "segment_derivatives",
    "feature_impact", "feature_impact_directional", "likelihood",
    "in_distribution_impact", "heterogeneity", "non_linearity",
    "analyze_feature", "analyze_features",
    "FittedLinearModel", "LogisticModel", "ForestModel", "ExternalPredictor",
    "fit_ols", "fit_logistic", "fit_forest", "external_predictor", "predict",
    "RankDeficiencyError", "ExternalPredictorError", "ExternalChildFailure",
    "MalformedResponse", "PredictionCountMismatch", "BatchTimeout",
    "MetricVector", "ImpactReport", "normalize", "pearson",
    "permutation_importance", "impurity_importance", "report",
    "Curve", "CurveSet", "ice_curves", "c_ice_curves", "curves_to_csv",
    "curves_to_dict",
]
