# neural/models.py
"""Checkpoint type, sequence log-probabilities and training losses.

The language model is a single LSTM stack with a vocabulary projection.
The seq2seq model adds an encoder stack (no projection) whose final
per-layer state initializes the decoder.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import ConfigInvalid, ZeroLength
from loader import ModelConfig
from neural.batching import PairBatch, make_batch
from neural.lstm import LstmParams, LstmState, backward, forward, init_params, projection_loss

logger = logging.getLogger(__name__)

KINDS = ("lm", "seq2seq")
MAX_EXP = 709.0  # exp() overflows a double just above this


def exp_or_inf(x: float) -> float:
    return math.exp(x) if x < MAX_EXP else math.inf


@dataclass
class ModelCheckpoint:
    kind: str
    config: ModelConfig
    decoder: LstmParams
    encoder: Optional[LstmParams] = None
    vocab_refs: Dict[str, str] = field(default_factory=dict)
    epoch: int = 0
    valid_perplexity: float = math.inf
    train_perplexity: float = math.inf
    learning_rate: Optional[float] = None
    _evaluation: Optional[Tuple] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigInvalid(f"unknown model kind {self.kind!r}")
        if (self.kind == "seq2seq") != (self.encoder is not None):
            raise ConfigInvalid(f"a {self.kind} checkpoint {'needs' if self.kind == 'seq2seq' else 'has no'} encoder")
        if self.learning_rate is None:
            self.learning_rate = self.config.learning_rate

    def evaluation_params(self) -> Tuple[Optional[LstmParams], LstmParams]:
        """64-bit copies used for scoring, built once."""
        if self._evaluation is None:
            encoder = None if self.encoder is None else self.encoder.astype(np.float64)
            self._evaluation = (encoder, self.decoder.astype(np.float64))
        return self._evaluation

    def is_finite(self) -> bool:
        return self.decoder.is_finite() and (self.encoder is None or self.encoder.is_finite())


def new_checkpoint(kind: str, config: ModelConfig, comment_vocab_size: int,
                   method_vocab_size: Optional[int] = None, rng: Optional[np.random.Generator] = None,
                   dtype=np.float32, vocab_refs: Optional[Dict[str, str]] = None) -> ModelCheckpoint:
    """Randomly initialized model; ``rng`` defaults to one seeded from the config."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    decoder = init_params(config.hidden_size, comment_vocab_size, rng, config.num_layers,
                          scale=config.init_scale, dtype=dtype)
    encoder = None
    if kind == "seq2seq":
        if method_vocab_size is None:
            raise ConfigInvalid("a seq2seq model needs a method vocabulary size")
        encoder = init_params(config.hidden_size, method_vocab_size, rng, config.num_layers,
                              with_output=False, scale=config.init_scale, dtype=dtype)
    return ModelCheckpoint(kind, config, decoder, encoder, dict(vocab_refs or {}))


def initial_state(encoder: Optional[LstmParams], decoder: LstmParams, batch: PairBatch,
                  keep: float = 1.0, rng: Optional[np.random.Generator] = None):
    """Decoder start state: zeros for the LM, the encoder's final state otherwise."""
    zeros = LstmState.zeros(decoder.num_layers, batch.size, decoder.hidden_size, decoder.embedding.dtype)
    if encoder is None or batch.method_ids is None:
        return zeros, None
    _, final, trace = forward(encoder, batch.method_ids, batch.method_mask, zeros, keep, rng)
    return final, trace


def batch_loss(encoder: Optional[LstmParams], decoder: LstmParams, batch: PairBatch,
               grads: Optional[Tuple[Optional[LstmParams], LstmParams]] = None,
               keep: float = 1.0, rng: Optional[np.random.Generator] = None,
               scale: float = 1.0) -> Tuple[float, np.ndarray]:
    """Teacher-forced loss of padded independent sequences.

    Returns (scaled loss, per-position target log-probabilities). With
    ``grads`` set, gradients flow through the decoder into the encoder via
    the handed-over state.
    """
    state, encoder_trace = initial_state(encoder, decoder, batch, keep, rng)
    tops, _, trace = forward(decoder, batch.inputs, batch.mask, state, keep, rng)
    encoder_grads, decoder_grads = grads if grads is not None else (None, None)
    loss, target_logp, d_tops = projection_loss(decoder, tops, batch.targets, batch.mask, decoder_grads, scale)
    if grads is not None:
        d_initial = backward(decoder, trace, d_tops, None, decoder_grads)
        if encoder_trace is not None:
            backward(encoder, encoder_trace, None, d_initial, encoder_grads)
    return loss, target_logp


def window_loss(params: LstmParams, inputs: np.ndarray, targets: np.ndarray, loss_mask: np.ndarray,
                state: LstmState, grads: Optional[LstmParams] = None, keep: float = 1.0,
                rng: Optional[np.random.Generator] = None, scale: float = 1.0) -> Tuple[float, LstmState]:
    """One TBPTT window of the LM stream; the returned state seeds the next window."""
    state_mask = np.ones(inputs.shape, dtype=np.float64)
    tops, final, trace = forward(params, inputs, state_mask, state, keep, rng)
    loss, _, d_tops = projection_loss(params, tops, targets, loss_mask, grads, scale)
    if grads is not None:
        backward(params, trace, d_tops, None, grads)
    return loss, final


def sequence_log_probs(checkpoint: ModelCheckpoint, comments: Sequence[Sequence[int]],
                       methods: Optional[Sequence[Sequence[int]]] = None,
                       batch_size: int = 64) -> np.ndarray:
    """Natural-log probability of each BOS..EOS comment, dropout off, 64-bit."""
    encoder, decoder = checkpoint.evaluation_params()
    if checkpoint.kind == "lm":
        encoder, methods = None, None
    elif methods is None:
        raise ConfigInvalid("a seq2seq model scores comments against methods")
    out = np.empty(len(comments), dtype=np.float64)
    for start in range(0, len(comments), batch_size):
        chunk = slice(start, start + batch_size)
        batch = make_batch(comments[chunk], None if methods is None else methods[chunk])
        _, target_logp = batch_loss(encoder, decoder, batch)
        out[chunk] = (target_logp * batch.mask).sum(axis=0)
    return out


def lm_log_prob(checkpoint: ModelCheckpoint, comment_ids: Sequence[int]) -> float:
    if checkpoint.kind != "lm":
        raise ConfigInvalid("lm_log_prob needs a language model checkpoint")
    return float(sequence_log_probs(checkpoint, [comment_ids])[0])


def seq2seq_log_prob(checkpoint: ModelCheckpoint, method_ids: Sequence[int], comment_ids: Sequence[int]) -> float:
    """log P(comment | method); an empty method leaves the decoder at the zero state."""
    if checkpoint.kind != "seq2seq":
        raise ConfigInvalid("seq2seq_log_prob needs a seq2seq checkpoint")
    return float(sequence_log_probs(checkpoint, [comment_ids], [method_ids])[0])


@dataclass
class CorpusPerplexity:
    log_prob: float
    tokens: int

    @property
    def perplexity(self) -> float:
        return exp_or_inf(-self.log_prob / self.tokens)

    @property
    def cross_entropy(self) -> float:
        return -self.log_prob / (self.tokens * math.log(2))


def corpus_perplexity(checkpoint: ModelCheckpoint, comments: Sequence[Sequence[int]],
                      methods: Optional[Sequence[Sequence[int]]] = None,
                      batch_size: int = 64) -> CorpusPerplexity:
    """Token-weighted perplexity over a whole split (EOS counted, BOS not)."""
    tokens = sum(len(c) - 1 for c in comments)
    if tokens <= 0:
        raise ZeroLength("cannot compute the perplexity of an empty split")
    log_probs = sequence_log_probs(checkpoint, comments, methods, batch_size)
    return CorpusPerplexity(float(log_probs.sum()), tokens)


def zero_grads(checkpoint: ModelCheckpoint) -> Tuple[Optional[LstmParams], LstmParams]:
    encoder = None if checkpoint.encoder is None else checkpoint.encoder.zeros_like()
    return encoder, checkpoint.decoder.zeros_like()


def param_blocks(checkpoint: ModelCheckpoint) -> List[Tuple[str, np.ndarray]]:
    """(qualified name, array) for every block, encoder first."""
    named = []
    if checkpoint.encoder is not None:
        named += [(f"encoder.{name}", block) for name, block in checkpoint.encoder.blocks().items()]
    prefix = "decoder" if checkpoint.kind == "seq2seq" else "lm"
    named += [(f"{prefix}.{name}", block) for name, block in checkpoint.decoder.blocks().items()]
    return named
