"""From-scratch transformer: autograd engine, layers, Adam, training."""

from . import autograd
from .autograd import Tensor, backward, zero_grads
from .optim import AdamState, adam_step
from .training import TrainConfig, TrainItem, predict_mel, train_transducer
from .transformer import (
    TransformerConfig,
    TransformerParams,
    decoder_forward,
    encoder_forward,
    init_encoder_params,
    recognition_preset,
    relpos_bias,
    scaled_dot_product_attention,
    toy_preset,
    transduction_loss,
    transduction_preset,
)

__all__ = [
    "autograd",
    "Tensor",
    "backward",
    "zero_grads",
    "AdamState",
    "adam_step",
    "TrainConfig",
    "TrainItem",
    "predict_mel",
    "train_transducer",
    "TransformerConfig",
    "TransformerParams",
    "decoder_forward",
    "encoder_forward",
    "init_encoder_params",
    "recognition_preset",
    "relpos_bias",
    "scaled_dot_product_attention",
    "toy_preset",
    "transduction_loss",
    "transduction_preset",
]
