"""Training loop for the EMG-to-mel transducer.

One utterance per step over seeded shuffles; forward, exact backward,
Adam.  Both vocalized utterances (true mel targets) and silent
utterances (transferred pseudo-targets) are plain (features, target)
items here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptyInputError, TrainingDivergenceError
from . import autograd as ag
from .optim import AdamState, adam_step
from .transformer import TransformerParams, encoder_forward, transduction_loss


@dataclass
class TrainItem:
    features: np.ndarray  # frames x d_in
    target: np.ndarray  # frames x n_mels
    session_id: str = "default"
    mode: str = "vocalized"  # target provenance: vocalized=true mel, silent=pseudo


@dataclass
class TrainConfig:
    steps: int = 200
    lr: float = 1e-3
    loss_kind: str = "euclidean"  # or "mse"
    seed: int = 0


def train_transducer(
    items: list[TrainItem], params: TransformerParams, cfg: TrainConfig | None = None
) -> tuple[TransformerParams, list[float]]:
    """Run cfg.steps optimizer steps and return (params, per-step losses).

    Deterministic given cfg.seed: utterance order and dropout masks come
    from one generator.  steps=0 leaves the initialization untouched.
    """
    cfg = cfg or TrainConfig()
    if not items:
        raise EmptyInputError("training corpus is empty")
    rng = np.random.default_rng(cfg.seed)
    state = AdamState(lr=cfg.lr)
    losses: list[float] = []
    order: list[int] = []
    for _ in range(cfg.steps):
        if not order:
            order = list(rng.permutation(len(items)))
        item = items[order.pop(0)]
        ag.zero_grads(params.tensors)
        pred = encoder_forward(
            item.features, params, session_id=item.session_id, training=True, rng=rng
        )
        loss = transduction_loss(pred, item.target, kind=cfg.loss_kind)
        if not np.isfinite(loss.data):
            raise TrainingDivergenceError(f"loss became {float(loss.data)!r}")
        ag.backward(loss)
        grads = {k: t.grad for k, t in params.tensors.items() if t.grad is not None}
        adam_step(params.numpy(), grads, state)
        losses.append(float(loss.data))
    return params, losses


def predict_mel(features: np.ndarray, params: TransformerParams, session_id: str) -> np.ndarray:
    """Eval-mode transduction of one utterance."""
    out = encoder_forward(features, params, session_id=session_id, training=False)
    return out.data
