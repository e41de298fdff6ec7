"""Graph-based embedding clustering with a learned neighbor boundary."""

from ._core import (
    Error,
    benchmark,
    benchmark_names,
    build_knn,
    connected_components,
    edge_probs,
    evaluate,
    generate,
    map_cluster,
    map_codelength,
    normalize,
    prob_sigmoid,
    refine,
    round_topk,
    run_pipeline,
)

__all__ = [
    "Error",
    "benchmark",
    "benchmark_names",
    "build_knn",
    "connected_components",
    "edge_probs",
    "evaluate",
    "generate",
    "map_cluster",
    "map_codelength",
    "normalize",
    "prob_sigmoid",
    "refine",
    "round_topk",
    "run_pipeline",
]
