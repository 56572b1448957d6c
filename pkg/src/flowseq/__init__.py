"""Optical-flow gesture recognition with important-action focusing.

Pipeline: flow sequences are segmented into partial actions, vectorized and
projected into a shared eigenspace, matched against a dictionary of Gaussian
cluster sequences via a weighted edit graph whose minimum-cost path yields
the longest common subsequence, with designated important actions enforced
through edge-cost inflation.
"""

from .errors import (
    CorruptDictionaryError,
    DegenerateDataError,
    FlowseqError,
    InvalidInputError,
)
from .flow import (
    BlobTrack,
    FlowField,
    FlowParams,
    FlowSequence,
    GrayFrame,
    SyntheticGestureSpec,
    angle_between,
    compute_flow,
    load_flows,
    read_pgm,
    save_flows,
    synthesize,
)
from .segmentation import (
    LabeledFlowField,
    PartialActionImage,
    PartialActionSequence,
    SegmentationParams,
    load_pas,
    propagate_labels,
    save_pas,
    segment,
    spatial_label,
)
from .eigenspace import (
    EigenspaceModel,
    fit,
    load_eig,
    project,
    save_eig,
    vectorize,
)
from .dictionary import (
    Cluster,
    GestureDictionary,
    GestureEntry,
    density,
    fit_cluster,
    fit_entry,
    load_dictionary,
    mahalanobis,
    save_dictionary,
    strip_importance,
)
from .matcher import (
    MatchGraph,
    MatchResult,
    build_graph,
    cluster_relation,
    equality_relation,
    match_result_json,
    min_cost_path,
    recognize,
    similarity,
)

__all__ = [
    "BlobTrack",
    "Cluster",
    "CorruptDictionaryError",
    "DegenerateDataError",
    "EigenspaceModel",
    "FlowField",
    "FlowParams",
    "FlowSequence",
    "FlowseqError",
    "GestureDictionary",
    "GestureEntry",
    "GrayFrame",
    "InvalidInputError",
    "LabeledFlowField",
    "MatchGraph",
    "MatchResult",
    "PartialActionImage",
    "PartialActionSequence",
    "SegmentationParams",
    "SyntheticGestureSpec",
    "angle_between",
    "build_graph",
    "cluster_relation",
    "compute_flow",
    "density",
    "equality_relation",
    "fit",
    "fit_cluster",
    "fit_entry",
    "load_dictionary",
    "load_eig",
    "load_flows",
    "load_pas",
    "mahalanobis",
    "match_result_json",
    "min_cost_path",
    "project",
    "propagate_labels",
    "read_pgm",
    "recognize",
    "save_dictionary",
    "save_eig",
    "save_flows",
    "save_pas",
    "segment",
    "similarity",
    "spatial_label",
    "strip_importance",
    "synthesize",
    "vectorize",
]

__version__ = "0.1.0"
