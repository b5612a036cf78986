# neural/gradcheck.py
"""Central-difference check of the analytic LSTM gradients."""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from errors import ConfigInvalid
from loader import ModelConfig
from neural.batching import make_batch
from neural.models import ModelCheckpoint, batch_loss, new_checkpoint, param_blocks, zero_grads
from vocab import BOS, EOS, RESERVED

logger = logging.getLogger(__name__)

MAX_HIDDEN = 16
MAX_VOCAB = 32

Sample = Union[Sequence[int], Tuple[Sequence[int], Sequence[int]]]


@dataclass
class GradientCheckResult:
    max_relative_error: float
    block_errors: Dict[str, float] = field(default_factory=dict)
    parameters: int = 0
    error: Optional[str] = None

    @property
    def worst_block(self) -> Optional[str]:
        if not self.block_errors:
            return None
        return max(self.block_errors, key=self.block_errors.get)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    return np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))


def random_sample(kind: str, rng: np.random.Generator, vocab_size: int, method_vocab_size: int,
                  length: int = 5) -> Sample:
    """A BOS..EOS comment of ``length`` words (and a method of the same length for seq2seq)."""
    first = len(RESERVED)
    comment = [BOS] + rng.integers(first, vocab_size, size=length).tolist() + [EOS]
    if kind == "lm":
        return comment
    return rng.integers(first, method_vocab_size, size=length).tolist(), comment


def gradient_check(kind: str, hidden_size: int = 8, vocab_size: int = 20, method_vocab_size: int = 20,
                   sample: Optional[Sample] = None, seed: int = 0, step: float = 1e-4,
                   num_layers: int = 1, init_scale: float = 0.5) -> GradientCheckResult:
    """Compare float64 backprop against central differences on every parameter.

    The loss is the summed negative log-likelihood of a single sequence with
    dropout off. Finite differences run on an extended-precision copy of the
    model and subtract per-position log-probabilities before summing them.
    A comment with nothing to predict is reported, not raised.
    """
    if kind not in ("lm", "seq2seq"):
        raise ConfigInvalid(f"unknown model kind {kind!r}")
    if hidden_size > MAX_HIDDEN or max(vocab_size, method_vocab_size) > MAX_VOCAB:
        raise ConfigInvalid(f"gradient checks run on small models only (K <= {MAX_HIDDEN}, V <= {MAX_VOCAB})")

    rng = np.random.default_rng(seed)
    config = ModelConfig(hidden_size=hidden_size, vocab_size_comment=vocab_size,
                         vocab_size_method=method_vocab_size, num_layers=num_layers,
                         init_scale=init_scale, seed=seed).validate()
    checkpoint = new_checkpoint(kind, config, vocab_size, method_vocab_size if kind == "seq2seq" else None,
                                rng=rng, dtype=np.float64)
    if sample is None:
        sample = random_sample(kind, rng, vocab_size, method_vocab_size)
    if kind == "lm":
        methods, comment = None, list(sample)
    else:
        methods, comment = [list(sample[0])], list(sample[1])
    if len(comment) < 2:
        return GradientCheckResult(math.nan, error="comment sequence has no token to predict")

    batch = make_batch([comment], methods)
    mask = batch.mask.astype(np.longdouble)

    encoder_grads, decoder_grads = zero_grads(checkpoint)
    batch_loss(checkpoint.encoder, checkpoint.decoder, batch, (encoder_grads, decoder_grads))
    analytic = ModelCheckpoint(kind, config, decoder_grads, encoder_grads)

    reference = ModelCheckpoint(kind, config, checkpoint.decoder.astype(np.longdouble),
                                None if checkpoint.encoder is None else checkpoint.encoder.astype(np.longdouble))

    def target_log_probs() -> np.ndarray:
        return batch_loss(reference.encoder, reference.decoder, batch)[1]

    result = GradientCheckResult(0.0)
    for (name, block), (_, grad) in zip(param_blocks(reference), param_blocks(analytic)):
        numeric = np.zeros(block.shape, dtype=np.float64)
        for idx in np.ndindex(block.shape):
            saved = block[idx]
            block[idx] = saved + step
            plus = target_log_probs()
            block[idx] = saved - step
            minus = target_log_probs()
            block[idx] = saved
            numeric[idx] = float(-np.sum((plus - minus) * mask) / (2 * step))
        worst = float(relative_error(grad, numeric).max()) if block.size else 0.0
        result.block_errors[name] = worst
        result.parameters += block.size
        result.max_relative_error = max(result.max_relative_error, worst)
        logger.debug("%s: max relative error %.3e", name, worst)
    return result
