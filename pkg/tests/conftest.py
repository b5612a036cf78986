from pathlib import Path

import numpy as np
import pytest

from loader import ModelConfig
from neural.models import new_checkpoint
from vocab import RESERVED, Vocabulary

FIXTURES = Path(__file__).resolve().parent.parent / "data" / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def read_fixture(relative: str) -> str:
    with open(FIXTURES / relative, "r", encoding="utf-8", newline="") as f:
        return f.read()


def word_vocab(count: int, prefix: str = "w") -> Vocabulary:
    """Reserved ids plus ``count`` tokens named prefix0, prefix1, ..."""
    return Vocabulary(RESERVED + [f"{prefix}{i}" for i in range(count)])


def small_checkpoint(kind: str, hidden_size: int = 4, vocab_size: int = 10, method_vocab_size: int = 12,
                     seed: int = 0, init_scale: float = 0.5, zero: bool = False, **config):
    model_config = ModelConfig(hidden_size=hidden_size, init_scale=init_scale, seed=seed, **config).validate()
    checkpoint = new_checkpoint(kind, model_config, vocab_size,
                                method_vocab_size if kind == "seq2seq" else None,
                                rng=np.random.default_rng(seed))
    if zero:
        checkpoint.decoder = checkpoint.decoder.zeros_like()
        if checkpoint.encoder is not None:
            checkpoint.encoder = checkpoint.encoder.zeros_like()
    return checkpoint
