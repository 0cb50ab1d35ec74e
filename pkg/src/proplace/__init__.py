"""proplace: provably robust and plausible counterfactual explanations.

Given a binary ReLU classifier and an input, the library searches for a
minimally changed input that (a) is certified to stay in class 1 under
every bounded shift of the model's parameters and (b) lies in the convex
hull of the input and its k robust nearest neighbours from the data.
"""

from .errors import (
    CertificationTimeoutError,
    CsvParseError,
    DegenerateDataError,
    InputShapeError,
    InsufficientReferenceError,
    InsufficientRobustNeighboursError,
    InternalConsistencyError,
    InvalidShiftError,
    LpParseError,
    MilpEncodingError,
    NoCandidatesError,
    NoFeasibleCeError,
    NonConvergenceError,
    NumericError,
    ProplaceError,
)
from .explain import (
    CeResult,
    Explainer,
    InnerResult,
    ProplaceConfig,
    generate_counterfactual,
    inner_maximisation,
    outer_minimisation,
)
from .interval_cert import (
    CertificationResult,
    IntervalNetwork,
    ModelShiftSet,
    OutputBound,
    abstract,
    certify_delta_robust,
    propagate_bounds,
)
from .metrics import (
    MetricsReport,
    compute_report,
    l1_distance,
    local_outlier_factor,
    lof10,
    v_delta_rate,
    validity_rate,
)
from .neighbors import (
    CachingCertifier,
    KdTree,
    PlausibleRegion,
    build_tree,
    make_region,
    robust_knn,
)
from .nn_core import (
    Dataset,
    ReluNetwork,
    TrainConfig,
    forward_logit,
    forward_logit_batch,
    init_network,
    load_dataset,
    load_network,
    node_values,
    predict_class,
    predict_class_batch,
    retrain_ensemble,
    save_dataset,
    save_network,
    train,
)
from .synth import two_blobs, two_moons

__version__ = "0.1.0"

__all__ = [
    "CachingCertifier",
    "CeResult",
    "CertificationResult",
    "CertificationTimeoutError",
    "CsvParseError",
    "Dataset",
    "DegenerateDataError",
    "Explainer",
    "InnerResult",
    "InputShapeError",
    "InsufficientReferenceError",
    "InsufficientRobustNeighboursError",
    "InternalConsistencyError",
    "IntervalNetwork",
    "InvalidShiftError",
    "KdTree",
    "LpParseError",
    "MetricsReport",
    "MilpEncodingError",
    "ModelShiftSet",
    "NoCandidatesError",
    "NoFeasibleCeError",
    "NonConvergenceError",
    "NumericError",
    "OutputBound",
    "PlausibleRegion",
    "ProplaceConfig",
    "ProplaceError",
    "ReluNetwork",
    "TrainConfig",
    "abstract",
    "build_tree",
    "certify_delta_robust",
    "compute_report",
    "forward_logit",
    "forward_logit_batch",
    "generate_counterfactual",
    "init_network",
    "inner_maximisation",
    "l1_distance",
    "load_dataset",
    "load_network",
    "node_values",
    "local_outlier_factor",
    "lof10",
    "make_region",
    "outer_minimisation",
    "predict_class",
    "predict_class_batch",
    "propagate_bounds",
    "retrain_ensemble",
    "robust_knn",
    "save_dataset",
    "save_network",
    "train",
    "two_blobs",
    "two_moons",
    "v_delta_rate",
    "validity_rate",
]
