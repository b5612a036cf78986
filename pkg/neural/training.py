# neural/training.py
"""SGD training loops for the language model and the seq2seq model."""

import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from errors import ConfigInvalid, DivergenceDetected, EmptyStream
from loader import ModelConfig
from neural.batching import StreamBatcher, batch_indices, make_batch
from neural.lstm import LstmParams, LstmState
from neural.models import (ModelCheckpoint, batch_loss, corpus_perplexity, exp_or_inf, new_checkpoint,
                           window_loss, zero_grads)
from neural.schedule import DecaySchedule

logger = logging.getLogger(__name__)

Grads = Tuple[Optional[LstmParams], LstmParams]


@dataclass
class EpochReport:
    epoch: int
    learning_rate: float
    train_perplexity: float
    valid_perplexity: float
    improved: bool


def _blocks(grads: Grads) -> List[np.ndarray]:
    return [block for params in grads if params is not None for block in params.blocks().values()]


def global_norm(grads: Grads) -> float:
    return math.sqrt(sum(float(np.sum(np.square(block, dtype=np.float64))) for block in _blocks(grads)))


def clip_gradients(grads: Grads, clip_norm: float) -> float:
    """Rescale in place so the global norm is at most clip_norm; returns the norm before clipping."""
    norm = global_norm(grads)
    current = norm
    # float32 blocks can round back above the limit; shade down and re-measure
    while current > clip_norm:
        factor = clip_norm / current * (1.0 - 1e-6)
        for block in _blocks(grads):
            block *= factor
        current = global_norm(grads)
    return norm


def sgd_update(checkpoint: ModelCheckpoint, grads: Grads, learning_rate: float):
    pairs = []
    if checkpoint.encoder is not None:
        pairs.append((checkpoint.encoder, grads[0]))
    pairs.append((checkpoint.decoder, grads[1]))
    for params, g in pairs:
        for block, grad in zip(params.blocks().values(), g.blocks().values()):
            block -= learning_rate * grad


def _snapshot(live: ModelCheckpoint, **fields) -> ModelCheckpoint:
    return ModelCheckpoint(
        kind=live.kind,
        config=live.config,
        decoder=live.decoder.copy(),
        encoder=None if live.encoder is None else live.encoder.copy(),
        vocab_refs=dict(live.vocab_refs),
        **fields,
    )


def _start(kind: str, config: ModelConfig, resume: Optional[ModelCheckpoint], comment_vocab_size: int,
           method_vocab_size: Optional[int], vocab_refs) -> ModelCheckpoint:
    if resume is None:
        return new_checkpoint(kind, config, comment_vocab_size, method_vocab_size, vocab_refs=vocab_refs)
    if resume.kind != kind:
        raise ConfigInvalid(f"cannot resume {kind} training from a {resume.kind} checkpoint")
    if resume.decoder.vocab_size != comment_vocab_size or resume.decoder.hidden_size != config.hidden_size:
        raise ConfigInvalid("resumed checkpoint does not match the configured model shape")
    if vocab_refs and resume.vocab_refs and resume.vocab_refs != vocab_refs:
        raise ConfigInvalid("resumed checkpoint was trained on different vocabularies")
    logger.info("Resuming %s training after epoch %d (lr %.4f, best valid pp %.3f)",
                kind, resume.epoch, resume.learning_rate, resume.valid_perplexity)
    live = _snapshot(resume, epoch=resume.epoch, valid_perplexity=resume.valid_perplexity,
                     train_perplexity=resume.train_perplexity, learning_rate=resume.learning_rate)
    live.config = replace(config)
    return live


def _fit(live: ModelCheckpoint, config: ModelConfig, run_epoch, validate,
         on_epoch: Optional[Callable[[EpochReport], None]], progress: bool) -> ModelCheckpoint:
    schedule = DecaySchedule(live.learning_rate, config.decay_factor, live.valid_perplexity, live.epoch)
    schedule.add_decay_listener(
        lambda epoch, lr: logger.info("Epoch %d did not improve; learning rate now %.5f", epoch, lr))
    best = _snapshot(live, epoch=live.epoch, valid_perplexity=live.valid_perplexity,
                     train_perplexity=live.train_perplexity, learning_rate=live.learning_rate)

    for epoch in range(live.epoch + 1, config.max_epochs + 1):
        # per-epoch stream, independent of how earlier epochs ran
        rng = np.random.default_rng([config.seed, epoch])
        learning_rate = schedule.learning_rate
        nll, tokens = run_epoch(rng, learning_rate, progress, epoch)
        train_pp = exp_or_inf(nll / max(tokens, 1.0)) if math.isfinite(nll) else math.inf
        if not math.isfinite(train_pp) or not live.is_finite():
            raise DivergenceDetected(f"training loss diverged in epoch {epoch}")

        candidate = _snapshot(live, epoch=epoch, train_perplexity=train_pp)
        valid_pp = validate(candidate)
        if valid_pp is None:
            valid_pp = train_pp
        if not math.isfinite(valid_pp):
            raise DivergenceDetected(f"validation perplexity is {valid_pp} after epoch {epoch}")
        improved = schedule.end_epoch(valid_pp)
        if improved:
            candidate.valid_perplexity = valid_pp
            candidate.learning_rate = learning_rate
            best = candidate
        logger.info("Epoch %d: lr %.5f train pp %.3f valid pp %.3f%s", epoch, learning_rate,
                    train_pp, valid_pp, " (best)" if improved else "")
        if on_epoch is not None:
            on_epoch(EpochReport(epoch, learning_rate, train_pp, valid_pp, improved))
    return best


def train_lm(train: Sequence[Sequence[int]], valid: Sequence[Sequence[int]], config: ModelConfig,
             vocab_size: int, vocab_refs=None, resume: Optional[ModelCheckpoint] = None,
             on_epoch: Optional[Callable[[EpochReport], None]] = None,
             progress: bool = False) -> ModelCheckpoint:
    """Train the comment LM on BOS..EOS sentences with truncated BPTT.

    State is carried from each window to the next within an epoch and reset
    at epoch start. Returns the checkpoint with the best validation perplexity.
    """
    batcher = StreamBatcher(train, config.batch_size, config.tbptt_steps)
    if len(batcher) == 0:
        raise EmptyStream("the training stream is too short to form a single window")
    live = _start("lm", config, resume, vocab_size, None, vocab_refs)
    keep = config.keep_probability()
    rows = batcher.batch_size

    def run_epoch(rng, learning_rate, show, epoch):
        params = live.decoder
        state = LstmState.zeros(params.num_layers, rows, params.hidden_size, params.embedding.dtype)
        nll, tokens = 0.0, 0.0
        for inputs, targets, mask in tqdm(batcher, desc=f"lm epoch {epoch}", disable=not show, leave=False):
            grads = params.zeros_like()
            loss, state = window_loss(params, inputs, targets, mask, state, grads, keep, rng, scale=1.0 / rows)
            clip_gradients((None, grads), config.clip_norm)
            sgd_update(live, (None, grads), learning_rate)
            nll += loss * rows
            tokens += float(mask.sum())
        return nll, tokens

    def validate(candidate):
        if not valid:
            return None
        return corpus_perplexity(candidate, valid, batch_size=config.batch_size).perplexity

    return _fit(live, config, run_epoch, validate, on_epoch, progress)


def train_seq2seq(train: Sequence[Tuple[Sequence[int], Sequence[int]]],
                  valid: Sequence[Tuple[Sequence[int], Sequence[int]]], config: ModelConfig,
                  method_vocab_size: int, comment_vocab_size: int, vocab_refs=None,
                  resume: Optional[ModelCheckpoint] = None,
                  on_epoch: Optional[Callable[[EpochReport], None]] = None,
                  progress: bool = False) -> ModelCheckpoint:
    """Train encoder and decoder jointly on (method ids, BOS..EOS comment ids) pairs.

    Pairs are independent: every batch starts the encoder from zeros and
    PAD positions are masked out of the loss.
    """
    if not train:
        raise EmptyStream("no training pairs")
    live = _start("seq2seq", config, resume, comment_vocab_size, method_vocab_size, vocab_refs)
    keep = config.keep_probability()
    methods = [m for m, _ in train]
    comments = [c for _, c in train]

    def run_epoch(rng, learning_rate, show, epoch):
        nll, tokens = 0.0, 0.0
        batches = batch_indices(len(train), config.batch_size, rng)
        for idx in tqdm(batches, desc=f"s2s epoch {epoch}", disable=not show, leave=False):
            batch = make_batch([comments[i] for i in idx], [methods[i] for i in idx])
            grads = zero_grads(live)
            loss, _ = batch_loss(live.encoder, live.decoder, batch, grads, keep, rng, scale=1.0 / len(idx))
            clip_gradients(grads, config.clip_norm)
            sgd_update(live, grads, learning_rate)
            nll += loss * len(idx)
            tokens += float(batch.mask.sum())
        return nll, tokens

    def validate(candidate):
        if not valid:
            return None
        return corpus_perplexity(candidate, [c for _, c in valid], [m for m, _ in valid],
                                 batch_size=config.batch_size).perplexity

    return _fit(live, config, run_epoch, validate, on_epoch, progress)
