from .adam import Adam, clip_global_norm
from .bilstm import (
    BiLstmModel,
    DimensionMismatch,
    EmptyWindow,
    backward_batch,
    forward,
    forward_batch,
    init_model,
    layer_dims,
    load_model,
    param_shapes,
    save_model,
)
from .config import TrainingConfig
from .gradcheck import gradient_check
from .metrics import EvalMetrics, evaluate, metrics_from_scores, rank_auc
from .train import GRAD_CLIP_NORM, EmptyDataset, NonFiniteLoss, train

__all__ = [
    "Adam",
    "BiLstmModel",
    "DimensionMismatch",
    "EmptyDataset",
    "EmptyWindow",
    "EvalMetrics",
    "GRAD_CLIP_NORM",
    "NonFiniteLoss",
    "TrainingConfig",
    "backward_batch",
    "clip_global_norm",
    "evaluate",
    "forward",
    "forward_batch",
    "gradient_check",
    "init_model",
    "layer_dims",
    "load_model",
    "metrics_from_scores",
    "param_shapes",
    "rank_auc",
    "save_model",
    "train",
]
