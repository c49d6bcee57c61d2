"""Spatio-temporal transformer memorability predictor."""

from .config import ModelConfig, FrameSamplerMode
from .network import (
    AttentionResult,
    extract_attention,
    forward,
    fourier_temporal_embeddings,
    init_params,
    load_checkpoint,
    loss_and_grads,
    predict,
    sample_segments,
    save_checkpoint,
    trainable_names,
    zeroed_position_embeddings,
)
from .train import TrainSettings, VideoExample, train

__all__ = [
    "AttentionResult",
    "FrameSamplerMode",
    "ModelConfig",
    "TrainSettings",
    "VideoExample",
    "extract_attention",
    "forward",
    "fourier_temporal_embeddings",
    "init_params",
    "load_checkpoint",
    "loss_and_grads",
    "predict",
    "sample_segments",
    "save_checkpoint",
    "train",
    "trainable_names",
    "zeroed_position_embeddings",
]
