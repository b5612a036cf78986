"""Sequence log-probabilities of the LM and seq2seq checkpoints."""

import math

import numpy as np
import pytest

from conftest import small_checkpoint
from errors import ConfigInvalid, ZeroLength
from loader import ModelConfig
from neural.batching import StreamBatcher, make_batch, pad_sequences
from neural.lstm import LstmState, lstm_step, vocab_dist
from neural.models import (ModelCheckpoint, corpus_perplexity, lm_log_prob, param_blocks,
                           seq2seq_log_prob, sequence_log_probs)
from vocab import BOS, EOS, PAD


def oracle_log_prob(checkpoint: ModelCheckpoint, comment, method=()):
    """One example at a time through lstm_step and vocab_dist."""
    encoder, decoder = checkpoint.evaluation_params()
    k = decoder.hidden_size
    h, c = np.zeros(k), np.zeros(k)
    for token in method:
        h, c = lstm_step(encoder, h, c, token)
    total = 0.0
    for previous, target in zip(comment[:-1], comment[1:]):
        h, c = lstm_step(decoder, h, c, previous)
        total += math.log(vocab_dist(decoder, h)[target])
    return total


class TestUniformModel:

    @pytest.mark.parametrize("comment", [[BOS, EOS], [BOS, 5, EOS], [BOS, 4, 9, 7, 6, EOS]])
    def test_lm(self, comment):
        checkpoint = small_checkpoint("lm", vocab_size=10, zero=True)
        n = len(comment) - 1
        assert lm_log_prob(checkpoint, comment) == pytest.approx(-n * math.log(10), rel=1e-12)

    def test_seq2seq_ignores_method(self):
        checkpoint = small_checkpoint("seq2seq", vocab_size=10, zero=True)
        for method in ([], [4, 5], [11, 10, 9, 8]):
            assert seq2seq_log_prob(checkpoint, method, [BOS, 6, 7, EOS]) == pytest.approx(-3 * math.log(10))


class TestOracle:

    def test_lm_matches_scalar_steps(self):
        checkpoint = small_checkpoint("lm", hidden_size=4, vocab_size=10, seed=3)
        comment = [BOS, 4, 8, 6, EOS]
        assert lm_log_prob(checkpoint, comment) == pytest.approx(oracle_log_prob(checkpoint, comment), rel=1e-10)

    def test_seq2seq_matches_scalar_steps(self):
        checkpoint = small_checkpoint("seq2seq", hidden_size=4, vocab_size=10, method_vocab_size=12, seed=3)
        method, comment = [5, 11, 7], [BOS, 9, 4, EOS]
        expected = oracle_log_prob(checkpoint, comment, method)
        assert seq2seq_log_prob(checkpoint, method, comment) == pytest.approx(expected, rel=1e-10)

    def test_log_probs_are_non_positive(self):
        checkpoint = small_checkpoint("seq2seq", seed=8)
        rng = np.random.default_rng(0)
        comments = [[BOS] + rng.integers(4, 10, size=n).tolist() + [EOS] for n in range(6)]
        methods = [rng.integers(4, 12, size=n).tolist() for n in range(6)]
        assert np.all(sequence_log_probs(checkpoint, comments, methods) <= 0)


class TestConditioning:

    def test_methods_change_scores(self):
        checkpoint = small_checkpoint("seq2seq", seed=2)
        comment = [BOS, 5, 6, EOS]
        assert seq2seq_log_prob(checkpoint, [4, 4], comment) != seq2seq_log_prob(checkpoint, [9, 11], comment)

    def test_handoff_only_path(self):
        """Decoder weights on its own input zeroed: only the handed-over state can move the scores."""
        checkpoint = small_checkpoint("seq2seq", seed=2)
        checkpoint.decoder.embedding[:] = 0.0
        scores = {seq2seq_log_prob(checkpoint, method, [BOS, 5, EOS]) for method in ([4], [7], [10])}
        assert len(scores) == 3

    def test_lm_ignores_methods(self):
        checkpoint = small_checkpoint("lm", seed=2)
        comments = [[BOS, 5, 6, EOS]] * 2
        first = sequence_log_probs(checkpoint, comments, [[4], [8, 9]])
        np.testing.assert_array_equal(first, sequence_log_probs(checkpoint, comments))

    def test_deterministic(self):
        checkpoint = small_checkpoint("seq2seq", seed=2)
        assert seq2seq_log_prob(checkpoint, [4, 5], [BOS, 6, EOS]) == seq2seq_log_prob(checkpoint, [4, 5],
                                                                                        [BOS, 6, EOS])

    def test_wrong_kind(self):
        with pytest.raises(ConfigInvalid):
            lm_log_prob(small_checkpoint("seq2seq"), [BOS, EOS])
        with pytest.raises(ConfigInvalid):
            seq2seq_log_prob(small_checkpoint("lm"), [4], [BOS, EOS])


class TestPadding:

    def test_batch_mates_do_not_change_scores(self):
        checkpoint = small_checkpoint("seq2seq", seed=6)
        comments = [[BOS, 5, EOS], [BOS, 4, 6, 8, 7, 9, EOS]]
        methods = [[6, 7], [4, 5, 6, 7, 8, 9, 10]]
        together = sequence_log_probs(checkpoint, comments, methods, batch_size=2)
        alone = sequence_log_probs(checkpoint, comments, methods, batch_size=1)
        np.testing.assert_allclose(together, alone, rtol=1e-12)

    def test_pad_sequences(self):
        ids, mask = pad_sequences([[1, 2, 3], [4]])
        np.testing.assert_array_equal(ids, [[1, 4], [2, PAD], [3, PAD]])
        np.testing.assert_array_equal(mask, [[1, 1], [1, 0], [1, 0]])

    def test_make_batch_shifts_targets(self):
        batch = make_batch([[BOS, 5, 6, EOS]])
        assert batch.inputs[:, 0].tolist() == [BOS, 5, 6]
        assert batch.targets[:, 0].tolist() == [5, 6, EOS]


class TestStreamBatcher:

    def test_layout(self):
        sentences = [[BOS, 4, 5, EOS]] * 4
        batcher = StreamBatcher(sentences, batch_size=2, steps=3)
        windows = list(batcher)
        assert len(windows) == len(batcher) == 3
        inputs, targets, mask = windows[0]
        assert inputs.shape == (3, 2)
        np.testing.assert_array_equal(inputs[1:], targets[:-1])
        np.testing.assert_array_equal(mask, (targets != BOS).astype(float))

    def test_windows_chain(self):
        stream = [[BOS, 4, 5, 6, EOS]] * 3
        batcher = StreamBatcher(stream, batch_size=1, steps=4)
        inputs = np.concatenate([w[0][:, 0] for w in batcher])
        targets = np.concatenate([w[1][:, 0] for w in batcher])
        flat = [i for s in stream for i in s]
        assert inputs.tolist() == flat[:-1]
        assert targets.tolist() == flat[1:]

    def test_batch_shrinks_for_short_streams(self):
        assert StreamBatcher([[BOS, 4, EOS]], batch_size=64, steps=30).batch_size == 1


class TestCorpusPerplexity:

    def test_uniform(self):
        checkpoint = small_checkpoint("lm", vocab_size=10, zero=True)
        result = corpus_perplexity(checkpoint, [[BOS, 4, EOS], [BOS, 5, 6, 7, EOS]])
        assert result.tokens == 6
        assert result.perplexity == pytest.approx(10.0, rel=1e-9)
        assert 2 ** result.cross_entropy == pytest.approx(result.perplexity, rel=1e-9)

    def test_empty(self):
        with pytest.raises(ZeroLength):
            corpus_perplexity(small_checkpoint("lm"), [])


class TestCheckpoint:

    def test_kind_and_encoder_must_agree(self):
        lm = small_checkpoint("lm")
        with pytest.raises(ConfigInvalid):
            ModelCheckpoint("seq2seq", lm.config, lm.decoder)
        with pytest.raises(ConfigInvalid):
            ModelCheckpoint("lm", lm.config, lm.decoder, encoder=lm.decoder)

    def test_block_names(self):
        names = [name for name, _ in param_blocks(small_checkpoint("seq2seq"))]
        assert names[0] == "encoder.embedding"
        assert "decoder.w_vocab" in names
        assert not any(name.startswith("encoder.w_vocab") for name in names)
        assert [name for name, _ in param_blocks(small_checkpoint("lm"))][0] == "lm.embedding"

    def test_learning_rate_defaults_to_config(self):
        checkpoint = small_checkpoint("lm", learning_rate=0.25)
        assert checkpoint.learning_rate == 0.25
        assert isinstance(checkpoint.config, ModelConfig)

    def test_zero_state_shapes(self):
        state = LstmState.zeros(2, 3, 4)
        assert len(state.h) == 2 and state.h[0].shape == (3, 4)
