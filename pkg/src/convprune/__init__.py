"""Structured filter pruning for small CNNs.

Filters are selected by sparse approximation (greedy forward selection or
backward elimination with closed-form error updates), removed filters are
folded into a 1x1 compensation map, and layers are pruned in greedy rounds
driven by layerwise or final-output error on calibration data.
"""
from .compensation import (
    CompensationUpdate,
    apply_pruning,
    compensate_input,
    compensate_output,
    identity_comp,
)
from .metrics import ModelStats, count_stats, param_reduction, reduction_report
from .modelio import (
    ModelIOError,
    PruneReport,
    SchemaError,
    TensorFormatError,
    build_report,
    heatmap_csv,
    read_dataset,
    read_model,
    read_report,
    read_tensor,
    write_model,
    write_report,
    write_tensor,
)
from .nets import (
    ConvLayer,
    DimensionError,
    Network,
    conv_forward,
    conv_forward_linear,
    forward_all_layers,
)
from .search import (
    PruneConfig,
    PruneResult,
    PruneRound,
    PropagationBuffer,
    candidate_for_layer,
    collect_layer_outputs,
    finetune_identity,
    hbgs,
    hbgts,
    propagate_tree,
    random_baseline,
    relative_error_hbgs,
    relative_output_error,
    run_selector,
    uniform_baseline,
)
from .selection import (
    FilterMatrix,
    GramInverse,
    SelectionResult,
    SingularGramError,
    ConsistencyError,
    downdate_gram,
    elimination_scores,
    flatten_filters,
    fp_backward,
    fp_omp,
    gram_inverse,
    least_squares_coeffs,
    reconstruction_error,
    retained_count,
)
from .synth import make_dataset, planted_network

__version__ = "0.1.0"

__all__ = [
    "CompensationUpdate",
    "ConsistencyError",
    "ConvLayer",
    "DimensionError",
    "FilterMatrix",
    "GramInverse",
    "ModelIOError",
    "ModelStats",
    "Network",
    "PropagationBuffer",
    "PruneConfig",
    "PruneReport",
    "PruneResult",
    "PruneRound",
    "SchemaError",
    "SelectionResult",
    "SingularGramError",
    "TensorFormatError",
    "apply_pruning",
    "build_report",
    "candidate_for_layer",
    "collect_layer_outputs",
    "compensate_input",
    "compensate_output",
    "conv_forward",
    "conv_forward_linear",
    "count_stats",
    "downdate_gram",
    "elimination_scores",
    "finetune_identity",
    "flatten_filters",
    "forward_all_layers",
    "fp_backward",
    "fp_omp",
    "gram_inverse",
    "hbgs",
    "hbgts",
    "heatmap_csv",
    "identity_comp",
    "least_squares_coeffs",
    "make_dataset",
    "param_reduction",
    "planted_network",
    "propagate_tree",
    "random_baseline",
    "read_dataset",
    "read_model",
    "read_report",
    "read_tensor",
    "reconstruction_error",
    "reduction_report",
    "relative_error_hbgs",
    "relative_output_error",
    "retained_count",
    "run_selector",
    "uniform_baseline",
    "write_model",
    "write_report",
    "write_tensor",
]
