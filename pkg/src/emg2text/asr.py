"""Encoder-decoder recognition over mel inputs with beam-search decoding.

Character-level vocabulary: the decoder emits one character per step,
WER is still scored over words downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .acoustic import MelSpectrogram
from .errors import (
    EmptyInputError,
    ParameterError,
    TrainingDivergenceError,
    VocabularyError,
)
from .nn import autograd as ag
from .nn.optim import AdamState, adam_step
from .nn.transformer import (
    TransformerParams,
    decoder_forward,
    encoder_forward,
)

BOS = "<bos>"
EOS = "<eos>"
PAD = "<pad>"


@dataclass
class Vocabulary:
    tokens: list[str]

    def __post_init__(self):
        if len(set(self.tokens)) != len(self.tokens):
            raise ParameterError("vocabulary tokens must be unique")
        if BOS not in self.tokens or EOS not in self.tokens:
            raise ParameterError("vocabulary must contain BOS and EOS")
        self._index = {tok: i for i, tok in enumerate(self.tokens)}

    @property
    def size(self) -> int:
        return len(self.tokens)

    @property
    def bos_id(self) -> int:
        return self._index[BOS]

    @property
    def eos_id(self) -> int:
        return self._index[EOS]

    def id_of(self, token: str) -> int:
        try:
            return self._index[token]
        except KeyError:
            raise VocabularyError(f"token {token!r} not in vocabulary") from None

    @classmethod
    def for_charset(cls, chars: str) -> "Vocabulary":
        """Control tokens plus one token per unique character, sorted."""
        return cls([PAD, BOS, EOS] + sorted(set(chars)))

    @classmethod
    def for_transcripts(cls, transcripts: list[str]) -> "Vocabulary":
        return cls.for_charset("".join(transcripts))


def tokenize(text: str, vocab: Vocabulary) -> list[int]:
    """BOS + one id per character + EOS."""
    return [vocab.bos_id] + [vocab.id_of(ch) for ch in text] + [vocab.eos_id]


def detokenize(token_ids, vocab: Vocabulary) -> str:
    """Concatenate character tokens, dropping BOS/EOS/PAD."""
    out = []
    control = {BOS, EOS, PAD}
    for tid in token_ids:
        tid = int(tid)
        if tid < 0 or tid >= vocab.size:
            raise VocabularyError(f"token id {tid} out of range")
        tok = vocab.tokens[tid]
        if tok not in control:
            out.append(tok)
    return "".join(out)


@dataclass(order=True)
class Hypothesis:
    sort_key: float = field(init=False, repr=False)
    tokens: list[int] = field(compare=False, default_factory=list)
    log_prob: float = field(compare=False, default=0.0)
    finished: bool = field(compare=False, default=False)

    def __post_init__(self):
        self.sort_key = self.log_prob


def asr_forward_all(
    mel: MelSpectrogram | np.ndarray,
    prefix: list[int],
    params: TransformerParams,
    vocab: Vocabulary,
) -> np.ndarray:
    """Next-token log-probabilities at every prefix position.

    Returns len(prefix) x V; row t conditions on prefix[..t].  The
    decoder self-attention is causally masked, cross-attention sees the
    whole encoded mel.
    """
    data = mel.data if isinstance(mel, MelSpectrogram) else np.asarray(mel, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] < 1:
        raise EmptyInputError("mel input must have at least one frame")
    if not prefix or prefix[0] != vocab.bos_id:
        raise ParameterError("prefix must start with BOS")
    memory = encoder_forward(data, params, training=False, project_out=False)
    logp = decoder_forward(np.asarray(prefix, dtype=int), memory, params, training=False)
    return logp.data


def asr_forward(
    mel, prefix: list[int], params: TransformerParams, vocab: Vocabulary
) -> np.ndarray:
    """Log-probability distribution of the next token after the prefix."""
    return asr_forward_all(mel, prefix, params, vocab)[-1]


def beam_search(
    mel,
    params: TransformerParams,
    vocab: Vocabulary,
    beam_width: int = 500,
    max_len: int = 128,
    length_normalize: bool = False,
    score_fn=None,
) -> list[Hypothesis]:
    """Breadth-limited best-first decoding.

    Expands every live hypothesis over the full vocabulary, keeps the
    top beam_width by log_prob, and retires hypotheses that emit EOS to
    a result pool.  A hypothesis reaching max_len tokens takes a forced
    EOS (with its actual log-probability), so at least one hypothesis is
    always returned.  Results are sorted by (optionally
    length-normalized) log_prob, best first.

    score_fn(prefix_ids) -> V log-probs may replace the transformer
    scorer (used by tests and toy setups).
    """
    if beam_width < 1 or max_len < 1:
        raise ParameterError("beam_width and max_len must be >= 1")
    if score_fn is None:
        data = mel.data if isinstance(mel, MelSpectrogram) else np.asarray(mel, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 1:
            raise EmptyInputError("mel input must have at least one frame")
        memory = encoder_forward(data, params, training=False, project_out=False)

        def score_fn(prefix_ids):
            logp = decoder_forward(np.asarray(prefix_ids, dtype=int), memory, params)
            return logp.data[-1]

    eos = vocab.eos_id
    live = [Hypothesis(tokens=[vocab.bos_id], log_prob=0.0)]
    pool: list[Hypothesis] = []
    for step in range(max_len):
        candidates: list[Hypothesis] = []
        for hyp in live:
            logp = score_fn(hyp.tokens)
            if step == max_len - 1:
                # last slot: only EOS keeps the hypothesis well formed
                candidates.append(
                    Hypothesis(
                        tokens=hyp.tokens + [eos],
                        log_prob=hyp.log_prob + float(logp[eos]),
                        finished=True,
                    )
                )
                continue
            for tid in range(vocab.size):
                candidates.append(
                    Hypothesis(
                        tokens=hyp.tokens + [tid],
                        log_prob=hyp.log_prob + float(logp[tid]),
                        finished=tid == eos,
                    )
                )
        candidates.sort(key=lambda h: (-h.log_prob, h.tokens))
        kept = candidates[:beam_width]
        pool.extend(h for h in kept if h.finished)
        live = [h for h in kept if not h.finished]
        if not live:
            break

    def rank_key(h: Hypothesis):
        score = h.log_prob / max(len(h.tokens) - 1, 1) if length_normalize else h.log_prob
        return (-score, h.tokens)

    pool.sort(key=rank_key)
    return pool


def score_tokens(mel, tokens: list[int], params, vocab) -> float:
    """Sum of stepwise log-probabilities of tokens[1:] given tokens[0]=BOS."""
    if len(tokens) < 2:
        raise ParameterError("need BOS plus at least one generated token")
    logp = asr_forward_all(mel, tokens[:-1], params, vocab)
    return float(sum(logp[t, tokens[t + 1]] for t in range(len(tokens) - 1)))


@dataclass
class AsrTrainItem:
    mel: np.ndarray  # frames x n_mels
    token_ids: list[int]  # BOS ... EOS


@dataclass
class AsrTrainConfig:
    steps: int = 400
    lr: float = 1e-3
    seed: int = 0


def train_asr(
    items: list[AsrTrainItem], params: TransformerParams, cfg: AsrTrainConfig | None = None
) -> tuple[TransformerParams, list[float]]:
    """Teacher-forced cross-entropy training of the encoder-decoder."""
    cfg = cfg or AsrTrainConfig()
    if not items:
        raise EmptyInputError("ASR training corpus is empty")
    rng = np.random.default_rng(cfg.seed)
    state = AdamState(lr=cfg.lr)
    losses: list[float] = []
    order: list[int] = []
    for _ in range(cfg.steps):
        if not order:
            order = list(rng.permutation(len(items)))
        item = items[order.pop(0)]
        ag.zero_grads(params.tensors)
        memory = encoder_forward(item.mel, params, training=True, rng=rng, project_out=False)
        logp = decoder_forward(
            np.asarray(item.token_ids[:-1], dtype=int), memory, params, training=True, rng=rng
        )
        targets = np.asarray(item.token_ids[1:], dtype=int)
        loss = ag.nll_of_targets(logp, targets)
        if not np.isfinite(loss.data):
            raise TrainingDivergenceError(f"loss became {float(loss.data)!r}")
        ag.backward(loss)
        grads = {k: t.grad for k, t in params.tensors.items() if t.grad is not None}
        adam_step(params.numpy(), grads, state)
        losses.append(float(loss.data))
    return params, losses
