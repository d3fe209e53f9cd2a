"""Transformer building blocks on top of the autograd engine.

Pre-norm layers with multi-head self-attention, learned per-head
relative-position logit biases (clipped to a window), feedforward
sublayers, additive session embeddings, and an optional decoder stack
with causal self-attention plus cross-attention for recognition.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ParameterError, UnknownSessionError
from . import autograd as ag
from .autograd import Tensor

LN_EPS = 1e-5


@dataclass
class TransformerConfig:
    d_model: int = 768
    n_heads: int = 8
    d_ff: int = 3072
    n_enc_layers: int = 6
    n_dec_layers: int = 0
    dropout: float = 0.2
    relpos_clip: int = 100
    session_dim: int = 32
    seed: int = 0

    def validate(self) -> None:
        if self.d_model % self.n_heads != 0:
            raise ParameterError("d_model must be divisible by n_heads")
        if min(self.d_model, self.n_heads, self.d_ff, self.n_enc_layers) < 1:
            raise ParameterError("model dimensions and layer counts must be >= 1")
        if self.n_dec_layers < 0 or self.relpos_clip < 0 or self.session_dim < 1:
            raise ParameterError("invalid decoder/relpos/session configuration")
        if not (0.0 <= self.dropout < 1.0):
            raise ParameterError("dropout must be in [0, 1)")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads


def transduction_preset(seed: int = 0) -> TransformerConfig:
    """EMG-to-mel encoder: 6 layers, 8 heads, 768/3072, dropout 0.2."""
    return TransformerConfig(768, 8, 3072, 6, 0, 0.2, 100, 32, seed)


def recognition_preset(seed: int = 0) -> TransformerConfig:
    """Mel-to-text encoder-decoder: 6+6 layers, 8 heads, 512/2048, dropout 0.1."""
    return TransformerConfig(512, 8, 2048, 6, 6, 0.1, 100, 32, seed)


def toy_preset(seed: int = 0, n_dec_layers: int = 0) -> TransformerConfig:
    """Desk-scale config for tests and the synthetic pipeline."""
    return TransformerConfig(32, 4, 64, 2, n_dec_layers, 0.1, 16, 8, seed)


@dataclass
class TransformerParams:
    """All learnable tensors plus the config and session id table."""

    config: TransformerConfig
    tensors: dict[str, Tensor]
    session_ids: list[str] = field(default_factory=lambda: ["default"])

    def session_index(self, session_id: str) -> int:
        try:
            return self.session_ids.index(session_id)
        except ValueError:
            raise UnknownSessionError(
                f"unknown session id {session_id!r}; known: {self.session_ids}"
            ) from None

    def numpy(self) -> dict[str, np.ndarray]:
        return {k: t.data for k, t in self.tensors.items()}

    def copy(self) -> "TransformerParams":
        return TransformerParams(
            config=self.config,
            tensors={k: ag.parameter(t.data.copy()) for k, t in self.tensors.items()},
            session_ids=list(self.session_ids),
        )


def _uniform_init(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


def _attention_block(rng, prefix: str, cfg: TransformerConfig, tensors, relpos: bool):
    d = cfg.d_model
    for name in ("wq", "wk", "wv", "wo"):
        tensors[f"{prefix}.{name}"] = ag.parameter(_uniform_init(rng, (d, d), d))
    for name in ("bq", "bk", "bv", "bo"):
        tensors[f"{prefix}.{name}"] = ag.parameter(np.zeros(d))
    tensors[f"{prefix}.ln_g"] = ag.parameter(np.ones(d))
    tensors[f"{prefix}.ln_b"] = ag.parameter(np.zeros(d))
    if relpos:
        tensors[f"{prefix}.relpos"] = ag.parameter(
            _uniform_init(rng, (cfg.n_heads, 2 * cfg.relpos_clip + 1), d)
        )


def _ffn_block(rng, prefix: str, cfg: TransformerConfig, tensors):
    d, dff = cfg.d_model, cfg.d_ff
    tensors[f"{prefix}.w1"] = ag.parameter(_uniform_init(rng, (d, dff), d))
    tensors[f"{prefix}.b1"] = ag.parameter(np.zeros(dff))
    tensors[f"{prefix}.w2"] = ag.parameter(_uniform_init(rng, (dff, d), dff))
    tensors[f"{prefix}.b2"] = ag.parameter(np.zeros(d))
    tensors[f"{prefix}.ln_g"] = ag.parameter(np.ones(d))
    tensors[f"{prefix}.ln_b"] = ag.parameter(np.zeros(d))


def init_encoder_params(
    cfg: TransformerConfig,
    d_in: int,
    d_out: int,
    session_ids: list[str] | None = None,
    vocab_size: int | None = None,
) -> TransformerParams:
    """Initialize every tensor of an encoder(+decoder) model.

    d_out is the encoder output projection width (mel bands for the
    transducer).  With cfg.n_dec_layers > 0 and a vocab_size, decoder
    tensors and the token embedding/output head are added and d_out is
    ignored in favour of the vocabulary logits.
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)
    session_ids = list(session_ids) if session_ids else ["default"]
    tensors: dict[str, Tensor] = {}
    d = cfg.d_model
    tensors["enc.in.w"] = ag.parameter(_uniform_init(rng, (d_in, d), d_in))
    tensors["enc.in.b"] = ag.parameter(np.zeros(d))
    tensors["session.table"] = ag.parameter(
        _uniform_init(rng, (len(session_ids), cfg.session_dim), cfg.session_dim)
    )
    tensors["session.proj"] = ag.parameter(
        _uniform_init(rng, (cfg.session_dim, d), cfg.session_dim)
    )
    for i in range(cfg.n_enc_layers):
        _attention_block(rng, f"enc{i}.attn", cfg, tensors, relpos=True)
        _ffn_block(rng, f"enc{i}.ffn", cfg, tensors)
    tensors["enc.final_ln_g"] = ag.parameter(np.ones(d))
    tensors["enc.final_ln_b"] = ag.parameter(np.zeros(d))
    if cfg.n_dec_layers > 0:
        if vocab_size is None:
            raise ParameterError("decoder layers require a vocab_size")
        tensors["dec.embed"] = ag.parameter(_uniform_init(rng, (vocab_size, d), d))
        for i in range(cfg.n_dec_layers):
            _attention_block(rng, f"dec{i}.self", cfg, tensors, relpos=True)
            _attention_block(rng, f"dec{i}.cross", cfg, tensors, relpos=False)
            _ffn_block(rng, f"dec{i}.ffn", cfg, tensors)
        tensors["dec.final_ln_g"] = ag.parameter(np.ones(d))
        tensors["dec.final_ln_b"] = ag.parameter(np.zeros(d))
        tensors["dec.out.w"] = ag.parameter(_uniform_init(rng, (d, vocab_size), d))
        tensors["dec.out.b"] = ag.parameter(np.zeros(vocab_size))
    else:
        tensors["enc.out.w"] = ag.parameter(_uniform_init(rng, (d, d_out), d))
        tensors["enc.out.b"] = ag.parameter(np.zeros(d_out))
    return TransformerParams(config=cfg, tensors=tensors, session_ids=session_ids)


def scaled_dot_product_attention(
    q: Tensor, k: Tensor, v: Tensor, bias: Tensor | None = None, blocked=None
) -> Tensor:
    """softmax(q k^T / sqrt(d_k) + bias, masked) v.

    blocked is a boolean n x m matrix, True meaning the position may not
    be attended; blocked weights are exactly zero.
    """
    d_k = q.data.shape[-1]
    if k.data.shape[-1] != d_k:
        raise ParameterError("q and k must share their last dimension")
    if v.data.shape[0] != k.data.shape[0]:
        raise ParameterError("k and v must share their row count")
    logits = ag.scale(ag.matmul(q, ag.transpose(k)), 1.0 / np.sqrt(d_k))
    if bias is not None:
        logits = ag.add(logits, bias)
    weights = ag.masked_softmax(logits, blocked=blocked)
    return ag.matmul(weights, v)


def _flatten_row(t2d: Tensor) -> Tensor:
    """View a 1 x w tensor as a flat w tensor (for 1-D table gathers)."""
    out = Tensor(t2d.data.reshape(-1), parents=(t2d,))

    def backward(g):
        if t2d.requires_grad:
            t2d._accumulate(g.reshape(t2d.data.shape))

    out._backward = backward
    return out


def relpos_bias(n: int, m: int, table: Tensor, clip: int) -> Tensor:
    """n x m bias: bias[i, j] = table[clamp(j - i, -clip, clip) + clip]."""
    if table.data.ndim != 1 or table.data.shape[0] != 2 * clip + 1:
        raise ParameterError("relpos table must be flat with 2*clip+1 entries")
    offsets = np.arange(m)[None, :] - np.arange(n)[:, None]
    idx = np.clip(offsets, -clip, clip) + clip
    return ag.gather(table, idx)


def _multi_head_attention(
    x_q: Tensor,
    x_kv: Tensor,
    params: TransformerParams,
    prefix: str,
    blocked=None,
    use_relpos: bool = True,
) -> Tensor:
    cfg = params.config
    t = params.tensors
    q = ag.add(ag.matmul(x_q, t[f"{prefix}.wq"]), t[f"{prefix}.bq"])
    k = ag.add(ag.matmul(x_kv, t[f"{prefix}.wk"]), t[f"{prefix}.bk"])
    v = ag.add(ag.matmul(x_kv, t[f"{prefix}.wv"]), t[f"{prefix}.bv"])
    n, m = q.data.shape[0], k.data.shape[0]
    heads = []
    dh = cfg.d_head
    for h in range(cfg.n_heads):
        lo, hi = h * dh, (h + 1) * dh
        bias = None
        if use_relpos:
            head_row = _flatten_row(ag.gather_rows(t[f"{prefix}.relpos"], np.array([h])))
            bias = relpos_bias(n, m, head_row, cfg.relpos_clip)
        heads.append(
            scaled_dot_product_attention(
                ag.slice_cols(q, lo, hi),
                ag.slice_cols(k, lo, hi),
                ag.slice_cols(v, lo, hi),
                bias=bias,
                blocked=blocked,
            )
        )
    merged = ag.concat_cols(heads)
    return ag.add(ag.matmul(merged, t[f"{prefix}.wo"]), t[f"{prefix}.bo"])


def _ln(x: Tensor, params: TransformerParams, prefix: str) -> Tensor:
    t = params.tensors
    return ag.layer_norm(x, t[f"{prefix}.ln_g"], t[f"{prefix}.ln_b"], eps=LN_EPS)


def _ffn(x: Tensor, params: TransformerParams, prefix: str) -> Tensor:
    t = params.tensors
    h = ag.relu(ag.add(ag.matmul(x, t[f"{prefix}.w1"]), t[f"{prefix}.b1"]))
    return ag.add(ag.matmul(h, t[f"{prefix}.w2"]), t[f"{prefix}.b2"])


def encoder_forward(
    x,
    params: TransformerParams,
    session_id: str = "default",
    training: bool = False,
    rng: np.random.Generator | None = None,
    project_out: bool = True,
) -> Tensor:
    """Encode frames x d_in features to frames x d_model (or d_out).

    Input projection plus a broadcast session embedding, then pre-norm
    self-attention/FFN layers with relative-position biases, a final
    layer norm, and (for the transducer) the output projection.
    Dropout only fires in training mode with the caller's rng.
    """
    cfg = params.config
    t = params.tensors
    x = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
    if x.data.ndim != 2 or x.data.shape[0] < 1:
        raise ParameterError("encoder input must be a non-empty frames x dims matrix")
    if training and rng is None:
        raise ParameterError("training mode needs an rng for dropout")
    sidx = params.session_index(session_id)
    sess = ag.matmul(ag.gather_rows(t["session.table"], np.array([sidx])), t["session.proj"])
    h = ag.add(ag.add(ag.matmul(x, t["enc.in.w"]), t["enc.in.b"]), sess)
    for i in range(cfg.n_enc_layers):
        attn_in = _ln(h, params, f"enc{i}.attn")
        attn = _multi_head_attention(attn_in, attn_in, params, f"enc{i}.attn")
        attn = ag.dropout(attn, cfg.dropout, rng, training)
        h = ag.add(h, attn)
        ffn_in = _ln(h, params, f"enc{i}.ffn")
        ff = ag.dropout(_ffn(ffn_in, params, f"enc{i}.ffn"), cfg.dropout, rng, training)
        h = ag.add(h, ff)
    h = ag.layer_norm(h, t["enc.final_ln_g"], t["enc.final_ln_b"], eps=LN_EPS)
    if project_out and "enc.out.w" in t:
        h = ag.add(ag.matmul(h, t["enc.out.w"]), t["enc.out.b"])
    return h


def decoder_forward(
    token_ids,
    memory: Tensor,
    params: TransformerParams,
    training: bool = False,
    rng: np.random.Generator | None = None,
) -> Tensor:
    """Causally masked decoder over token ids attending to encoder memory.

    Returns positions x vocab log-probabilities (log-softmax rows).
    """
    cfg = params.config
    t = params.tensors
    token_ids = np.asarray(token_ids, dtype=int)
    if token_ids.ndim != 1 or token_ids.size < 1:
        raise ParameterError("decoder needs a non-empty 1-D token id sequence")
    if training and rng is None:
        raise ParameterError("training mode needs an rng for dropout")
    n = token_ids.size
    causal = np.triu(np.ones((n, n), dtype=bool), k=1)  # True = blocked future
    h = ag.gather_rows(t["dec.embed"], token_ids)
    for i in range(cfg.n_dec_layers):
        self_in = _ln(h, params, f"dec{i}.self")
        self_attn = _multi_head_attention(
            self_in, self_in, params, f"dec{i}.self", blocked=causal
        )
        h = ag.add(h, ag.dropout(self_attn, cfg.dropout, rng, training))
        cross_in = _ln(h, params, f"dec{i}.cross")
        cross = _multi_head_attention(
            cross_in, memory, params, f"dec{i}.cross", use_relpos=False
        )
        h = ag.add(h, ag.dropout(cross, cfg.dropout, rng, training))
        ffn_in = _ln(h, params, f"dec{i}.ffn")
        ff = ag.dropout(_ffn(ffn_in, params, f"dec{i}.ffn"), cfg.dropout, rng, training)
        h = ag.add(h, ff)
    h = ag.layer_norm(h, t["dec.final_ln_g"], t["dec.final_ln_b"], eps=LN_EPS)
    logits = ag.add(ag.matmul(h, t["dec.out.w"]), t["dec.out.b"])
    return ag.log_softmax(logits)


def transduction_loss(pred: Tensor, target, kind: str = "euclidean") -> Tensor:
    """Euclidean loss (mean per-frame L2 norm of the residual) or MSE."""
    target = target if isinstance(target, Tensor) else Tensor(np.asarray(target, dtype=np.float64))
    if pred.data.shape != target.data.shape:
        raise ParameterError(
            f"prediction shape {pred.data.shape} != target shape {target.data.shape}"
        )
    diff = ag.sub(pred, target)
    sq = ag.mul(diff, diff)
    if kind == "euclidean":
        per_frame = ag.sqrt(ag.tsum(sq, axis=1))
        return ag.tmean(per_frame)
    if kind == "mse":
        return ag.tmean(sq)
    raise ParameterError(f"unknown loss kind {kind!r}")
