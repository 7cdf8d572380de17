"""Self-supervised graph representation learning by predicting topology
perturbations: edge flips are sampled on node pairs, a shared-weight graph
encoder represents the original and perturbed graphs, and a linear decoder
classifies each pair's transformation type from the representation shift."""

from .errors import DataError, NumericalError, TrainingDiverged
from .graph_core import (
    CsrMatrix,
    Graph,
    build_graph,
    normalized_adjacency,
    propagate_k,
    spmm,
)
from .model import (
    DecoderParams,
    GcnLayer,
    GcnStack,
    GinLayer,
    GinStack,
    Model,
    SgcParams,
    load_checkpoint,
    save_checkpoint,
)
from .training import TrainConfig, backward, count_parameters, grad_check, pretrain

__all__ = [
    "CsrMatrix",
    "DataError",
    "DecoderParams",
    "GcnLayer",
    "GcnStack",
    "GinLayer",
    "GinStack",
    "Graph",
    "Model",
    "NumericalError",
    "SgcParams",
    "TrainConfig",
    "TrainingDiverged",
    "backward",
    "build_graph",
    "count_parameters",
    "grad_check",
    "load_checkpoint",
    "normalized_adjacency",
    "pretrain",
    "propagate_k",
    "save_checkpoint",
    "spmm",
]

__version__ = "0.1.0"
