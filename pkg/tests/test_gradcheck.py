import math

import numpy as np
import pytest

from errors import ConfigInvalid
from neural.gradcheck import gradient_check, random_sample, relative_error
from vocab import BOS, EOS

TOLERANCE = 1e-4


class TestRelativeError:

    def test_formula(self):
        np.testing.assert_allclose(relative_error(np.array([1.0, 0.0]), np.array([3.0, 0.0])), [0.5, 0.0])

    def test_tiny_values_use_floor(self):
        assert relative_error(np.array([1e-12]), np.array([0.0]))[0] == pytest.approx(1e-4)


class TestGradientCheck:

    @pytest.mark.parametrize("seed", range(5))
    def test_lm(self, seed):
        result = gradient_check("lm", hidden_size=8, vocab_size=20, seed=seed)
        assert result.error is None
        assert result.max_relative_error < TOLERANCE, result.worst_block

    @pytest.mark.parametrize("seed", range(5))
    def test_seq2seq(self, seed):
        result = gradient_check("seq2seq", hidden_size=8, vocab_size=20, method_vocab_size=20, seed=seed)
        assert result.max_relative_error < TOLERANCE, result.worst_block
        assert any(name.startswith("encoder.") for name in result.block_errors)

    def test_lm_length_five(self):
        sample = [BOS, 4, 9, 13, 7, 18, EOS]
        result = gradient_check("lm", sample=sample, seed=3)
        assert result.max_relative_error < TOLERANCE

    def test_two_layers(self):
        result = gradient_check("seq2seq", hidden_size=4, vocab_size=10, method_vocab_size=10, num_layers=2)
        assert "encoder.layer1.w_forget" in result.block_errors
        assert result.max_relative_error < TOLERANCE

    def test_every_parameter_is_checked(self):
        result = gradient_check("lm", hidden_size=4, vocab_size=10, seed=1)
        k, v = 4, 10
        assert result.parameters == v * k + 4 * (2 * k * k + k) + k * v + v

    def test_zero_length_comment(self):
        result = gradient_check("lm", sample=[BOS])
        assert result.error
        assert math.isnan(result.max_relative_error)

    def test_too_large(self):
        with pytest.raises(ConfigInvalid):
            gradient_check("lm", hidden_size=32)

    def test_random_sample_shapes(self):
        method, comment = random_sample("seq2seq", np.random.default_rng(0), 20, 20, length=5)
        assert len(method) == 5 and comment[0] == BOS and comment[-1] == EOS and len(comment) == 7

    def test_lm_seed_with_tiny_forget_gradients(self):
        result = gradient_check("lm", hidden_size=8, vocab_size=20, seed=6)
        assert result.max_relative_error < TOLERANCE, result.worst_block

    def test_seq2seq_seed_with_tiny_forget_gradients(self):
        result = gradient_check("seq2seq", hidden_size=8, vocab_size=20, method_vocab_size=20, seed=19)
        assert result.max_relative_error < TOLERANCE, result.worst_block

    def test_two_layer_seq2seq_default_size(self):
        result = gradient_check("seq2seq", num_layers=2)
        assert result.block_errors["encoder.layer1.w_forget"] < TOLERANCE
        assert result.max_relative_error < TOLERANCE, result.worst_block

    def test_default_sample_has_five_words(self):
        comment = random_sample("lm", np.random.default_rng(2), 20, 20)
        assert len(comment) == 7

    @pytest.mark.slow
    @pytest.mark.parametrize("kind", ["lm", "seq2seq"])
    def test_twenty_seeds(self, kind):
        worst = max(gradient_check(kind, hidden_size=8, vocab_size=20, seed=seed).max_relative_error
                    for seed in range(20))
        assert worst < TOLERANCE
