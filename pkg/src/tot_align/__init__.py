"""Temporal-order-preserving optimal transport for cross-modal sequence alignment."""

from .estimator import TemporalOTAligner
from .geometry import (
    combined_cost_beta,
    combined_cost_kl,
    cosine_cost,
    gaussian_prior,
    near_diagonal_mass,
    temporal_distance,
)
from .sinkhorn import (
    PRESETS,
    Coupling,
    SinkhornConfig,
    SinkhornOverflowError,
    entropy,
    kl_divergence,
    ot_objective,
    sinkhorn,
    tot_coupling,
    tot_cost,
    tot_objective,
)
from .transfer import (
    AdapterWeights,
    LossReport,
    TokenSequence,
    adapter_forward,
    alignment_loss,
    ctc_loss,
    evaluate_pair,
    project,
    softmax_predict,
    total_loss,
)

__version__ = "0.1.0"

__all__ = [
    "TemporalOTAligner",
    "combined_cost_beta",
    "combined_cost_kl",
    "cosine_cost",
    "gaussian_prior",
    "near_diagonal_mass",
    "temporal_distance",
    "PRESETS",
    "Coupling",
    "SinkhornConfig",
    "SinkhornOverflowError",
    "entropy",
    "kl_divergence",
    "ot_objective",
    "sinkhorn",
    "tot_coupling",
    "tot_cost",
    "tot_objective",
    "AdapterWeights",
    "LossReport",
    "TokenSequence",
    "adapter_forward",
    "alignment_loss",
    "ctc_loss",
    "evaluate_pair",
    "project",
    "softmax_predict",
    "total_loss",
]
