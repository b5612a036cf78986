# vocab.py

import hashlib
from collections import Counter
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

from errors import ConfigInvalid, EmptyStream

PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED = ["<pad>", "<bos>", "<eos>", "<unk>"]
HEADER = "craic-vocab v1"


class Vocabulary:
    """Frequency-ranked token <-> id table with reserved ids 0-3."""

    def __init__(self, tokens: Sequence[str]):
        self.token_of: List[str] = list(tokens)
        self.id_of: Dict[str, int] = {token: i for i, token in enumerate(self.token_of)}
        if len(self.id_of) != len(self.token_of):
            raise ConfigInvalid("vocabulary contains duplicate tokens")

    @property
    def size(self) -> int:
        return len(self.token_of)

    def __len__(self) -> int:
        return self.size

    def encode(self, tokens: Iterable[str], add_bos_eos: bool = False) -> List[int]:
        ids = [self.id_of.get(token, UNK) for token in tokens]
        if add_bos_eos:
            ids = [BOS] + ids + [EOS]
        return ids

    def decode(self, ids: Iterable[int]) -> List[str]:
        return [self.token_of[i] for i in ids]

    def serialize(self) -> str:
        lines = [f"{HEADER} {self.size}"] + self.token_of
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()

    def save(self, filepath: Path):
        with open(filepath, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.serialize())

    @classmethod
    def load(cls, filepath: Path) -> "Vocabulary":
        with open(filepath, "r", encoding="utf-8", newline="\n") as f:
            lines = f.read().split("\n")
        header = lines[0].split(" ")
        if " ".join(header[:2]) != HEADER or len(header) != 3:
            raise ConfigInvalid(f"{filepath} is not a vocabulary file")
        size = int(header[2])
        tokens = lines[1:size + 1]
        if len(tokens) != size or tokens[:4] != RESERVED:
            raise ConfigInvalid(f"{filepath} is truncated or has no reserved tokens")
        return cls(tokens)


def build_vocab(token_stream: Iterable[str], max_size: int) -> Vocabulary:
    """Keep the max_size - 4 most frequent tokens; ties broken lexicographically."""
    if max_size < 5:
        raise ConfigInvalid(f"vocabulary size must be at least 5, got {max_size}")
    counts = Counter(token_stream)
    for reserved in RESERVED:
        counts.pop(reserved, None)
    if not counts:
        raise EmptyStream("cannot build a vocabulary from an empty token stream")
    ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
    return Vocabulary(RESERVED + [token for token, _ in ranked[:max_size - len(RESERVED)]])
