"""Multiresolution bases from greedy pairwise rotations.

The transform walks up a cluster tree over variables: at each level the two
most similar active coordinates are rotated to decorrelate them, the
lower-variance result is frozen as a detail coordinate, and the other
continues upward. Truncating at any level gives an orthonormal basis of
scaling and detail functions adapted to the covariance of the data.
"""

from ._backend import DEFAULT_BACKEND, HAVE_COMPILED
from .basis import (
    Coefficients,
    FeatureSet,
    TreeletBasis,
    basis_at_level,
    forward,
    inverse,
    top_k_features,
    transform_rows,
)
from .build import (
    RotationRecord,
    TreeletTree,
    build_tree,
    build_tree_naive,
    pair_rotation,
)
from .data import DataMatrix
from .errors import InputError, InvariantError, TreeletError
from .io import read_csv, read_tree, serialize_tree, write_csv, write_tree
from .models import (
    BlockModelSpec,
    MinSampleResult,
    RecoveryResult,
    loglog_slope,
    min_sample_experiment,
    population_covariance,
    recovery_score,
    sample,
)
from .pipelines import (
    CvSelection,
    PipelineConfig,
    TwoWayResult,
    cv_select,
    two_branch_cut,
    two_way_classify,
)
from .similarity import (
    SimilarityState,
    compute_state,
    max_similar_pair,
    merge_update,
    similarity,
    state_from_covariance,
)

__version__ = "0.1.0"

__all__ = [
    "BlockModelSpec",
    "Coefficients",
    "CvSelection",
    "DEFAULT_BACKEND",
    "DataMatrix",
    "FeatureSet",
    "HAVE_COMPILED",
    "InputError",
    "InvariantError",
    "MinSampleResult",
    "PipelineConfig",
    "RecoveryResult",
    "RotationRecord",
    "SimilarityState",
    "TreeletBasis",
    "TreeletTree",
    "TreeletError",
    "TwoWayResult",
    "basis_at_level",
    "build_tree",
    "build_tree_naive",
    "compute_state",
    "cv_select",
    "forward",
    "inverse",
    "loglog_slope",
    "max_similar_pair",
    "merge_update",
    "min_sample_experiment",
    "pair_rotation",
    "population_covariance",
    "read_csv",
    "read_tree",
    "recovery_score",
    "sample",
    "serialize_tree",
    "similarity",
    "state_from_covariance",
    "top_k_features",
    "transform_rows",
    "two_branch_cut",
    "two_way_classify",
    "write_csv",
    "write_tree",
    "__version__",
]
