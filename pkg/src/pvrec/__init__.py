"""pvrec: PVR recording-log event extraction and implicit-feedback top-n recommendation."""

from .core import (
    Event,
    Frame,
    ParseError,
    Periodicity,
    Recording,
    Timing,
    next_occurrence,
    parse_recordings,
    timing_distance,
)
from .extraction import (
    Cluster,
    ExtractionConfig,
    aggregate,
    choose_title,
    cluster_batch,
    collapse,
    elect_centroid,
    run_pipeline,
)
from .similarity import (
    InteractionMatrix,
    Metric,
    SimilarityGraph,
    build_item_graph,
    build_user_graph,
    extend_second_level,
    similarity,
)
from .recommenders import (
    FactorModel,
    ScoredList,
    als_gradient,
    als_objective,
    als_score,
    als_train,
    item_knn,
    most_popular,
    oracle_rec,
    random_rec,
    recommend_topn,
    user_knn,
)
from .evaluation import (
    AlgoSpec,
    EvalReport,
    EvalRow,
    TemporalSplit,
    evaluate,
    make_split,
    precision_recall,
)
from .synthgen import Program, SynthWorld, WorldConfig, generate

__version__ = "0.1.0"

__all__ = [
    "AlgoSpec", "Cluster", "EvalReport", "EvalRow", "Event", "ExtractionConfig",
    "FactorModel", "Frame", "InteractionMatrix", "Metric", "ParseError", "Periodicity",
    "Program", "Recording", "ScoredList", "SimilarityGraph", "SynthWorld", "TemporalSplit",
    "Timing", "WorldConfig", "aggregate", "als_gradient", "als_objective", "als_score",
    "als_train", "build_item_graph", "build_user_graph", "choose_title", "cluster_batch",
    "collapse", "elect_centroid", "evaluate", "extend_second_level", "generate",
    "item_knn", "make_split", "most_popular", "next_occurrence", "oracle_rec",
    "parse_recordings", "precision_recall", "random_rec", "recommend_topn",
    "run_pipeline", "similarity", "timing_distance", "user_knn",
]
