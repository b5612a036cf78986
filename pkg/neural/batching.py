# neural/batching.py
"""Padded time-major batches and the TBPTT stream layout."""

from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from vocab import BOS, PAD


def pad_sequences(sequences: Sequence[Sequence[int]], pad: int = PAD) -> Tuple[np.ndarray, np.ndarray]:
    """(T, B) ids and a 0/1 mask; T is the longest sequence (possibly 0)."""
    longest = max((len(s) for s in sequences), default=0)
    ids = np.full((longest, len(sequences)), pad, dtype=np.int64)
    mask = np.zeros((longest, len(sequences)), dtype=np.float64)
    for b, seq in enumerate(sequences):
        ids[:len(seq), b] = seq
        mask[:len(seq), b] = 1.0
    return ids, mask


@dataclass
class PairBatch:
    """Encoder inputs plus teacher-forced decoder inputs and targets."""
    method_ids: Optional[np.ndarray]
    method_mask: Optional[np.ndarray]
    inputs: np.ndarray
    targets: np.ndarray
    mask: np.ndarray

    @property
    def size(self) -> int:
        return self.inputs.shape[1]


def make_batch(comments: Sequence[Sequence[int]],
               methods: Optional[Sequence[Sequence[int]]] = None) -> PairBatch:
    """Comments are full BOS..EOS sequences; the decoder reads [:-1] and predicts [1:]."""
    inputs, mask = pad_sequences([c[:-1] for c in comments])
    targets, _ = pad_sequences([c[1:] for c in comments])
    method_ids = method_mask = None
    if methods is not None:
        method_ids, method_mask = pad_sequences(methods)
    return PairBatch(method_ids, method_mask, inputs, targets, mask)


def batch_indices(count: int, batch_size: int, rng: Optional[np.random.Generator] = None) -> List[np.ndarray]:
    order = np.arange(count) if rng is None else rng.permutation(count)
    return [order[i:i + batch_size] for i in range(0, count, batch_size)]


class StreamBatcher:
    """Concatenated sentences cut into ``batch_size`` parallel rows.

    Windows of ``steps`` positions are yielded in order so the final state
    of one window can seed the next. Targets equal to BOS are masked: the
    start of a sentence is never charged as a prediction.
    """

    def __init__(self, sentences: Sequence[Sequence[int]], batch_size: int, steps: int):
        stream = np.fromiter((i for s in sentences for i in s), dtype=np.int64)
        self.batch_size = max(1, min(batch_size, len(stream) // 2))
        self.row_length = len(stream) // self.batch_size
        self.data = stream[:self.batch_size * self.row_length].reshape(self.batch_size, self.row_length)
        self.steps = steps

    def __len__(self) -> int:
        if self.row_length < 2:
            return 0
        return -(-(self.row_length - 1) // self.steps)

    def __iter__(self) -> Iterator[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
        for start in range(0, self.row_length - 1, self.steps):
            span = min(self.steps, self.row_length - 1 - start)
            inputs = self.data[:, start:start + span].T
            targets = self.data[:, start + 1:start + 1 + span].T
            yield inputs, targets, (targets != BOS).astype(np.float64)
