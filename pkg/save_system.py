# save_system.py
"""Checkpoint files.

Layout: an ASCII header (magic line, ``key=value`` lines, ``end``), then one
block per parameter array: a ``name rows cols`` line followed by
rows*cols little-endian float32 values in row-major order.
"""

import logging
import os
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from errors import ConfigInvalid, MissingArtifact
from loader import ModelConfig
from neural.lstm import LstmParams
from neural.models import ModelCheckpoint, param_blocks

logger = logging.getLogger(__name__)


class SaveSystem:
    """Writes and reads model checkpoints."""

    MAGIC = "CRAIC1"
    FLOAT = np.dtype("<f4")

    @staticmethod
    def header(checkpoint: ModelCheckpoint) -> Dict[str, str]:
        items = {"kind": checkpoint.kind}
        for key, value in checkpoint.config.to_items().items():
            items[f"config.{key}"] = str(value)
        for side, digest in sorted(checkpoint.vocab_refs.items()):
            items[f"vocab.{side}"] = digest
        items["epoch"] = str(checkpoint.epoch)
        items["learning_rate"] = repr(float(checkpoint.learning_rate))
        items["best_valid_perplexity"] = repr(float(checkpoint.valid_perplexity))
        items["train_perplexity"] = repr(float(checkpoint.train_perplexity))
        return items

    @staticmethod
    def save(checkpoint: ModelCheckpoint, filepath: Path):
        """Write a checkpoint; the file is replaced atomically."""
        filepath = Path(filepath)
        filepath.parent.mkdir(parents=True, exist_ok=True)
        tmp = filepath.with_name(filepath.name + ".tmp")
        with open(tmp, 'wb') as f:
            lines = [SaveSystem.MAGIC] + [f"{k}={v}" for k, v in SaveSystem.header(checkpoint).items()] + ["end"]
            f.write(("\n".join(lines) + "\n").encode("ascii"))
            for name, block in param_blocks(checkpoint):
                matrix = block.reshape(1, -1) if block.ndim == 1 else block
                rows, cols = matrix.shape
                f.write(f"{name} {rows} {cols}\n".encode("ascii"))
                f.write(np.ascontiguousarray(matrix, dtype=SaveSystem.FLOAT).tobytes())
        os.replace(tmp, filepath)
        logger.info("Saved %s checkpoint (epoch %d) to %s", checkpoint.kind, checkpoint.epoch, filepath)

    @staticmethod
    def _read_line(data: bytes, pos: int) -> Tuple[str, int]:
        end = data.find(b"\n", pos)
        if end < 0:
            raise ConfigInvalid("checkpoint is truncated")
        return data[pos:end].decode("ascii"), end + 1

    @staticmethod
    def load(filepath: Path) -> ModelCheckpoint:
        """Read a checkpoint written by save()."""
        try:
            with open(filepath, 'rb') as f:
                data = f.read()
        except FileNotFoundError:
            raise MissingArtifact(f"checkpoint not found: {filepath}")

        line, pos = SaveSystem._read_line(data, 0)
        if line != SaveSystem.MAGIC:
            raise ConfigInvalid(f"{filepath} is not a {SaveSystem.MAGIC} checkpoint")
        items: Dict[str, str] = {}
        while True:
            line, pos = SaveSystem._read_line(data, pos)
            if line == "end":
                break
            key, _, value = line.partition("=")
            items[key] = value

        stacks: Dict[str, Dict[str, np.ndarray]] = {}
        while pos < len(data):
            line, pos = SaveSystem._read_line(data, pos)
            name, rows, cols = line.split(" ")
            count = int(rows) * int(cols)
            block = np.frombuffer(data, dtype=SaveSystem.FLOAT, count=count, offset=pos)
            pos += count * SaveSystem.FLOAT.itemsize
            stack, _, block_name = name.partition(".")
            stacks.setdefault(stack, {})[block_name] = block.reshape(int(rows), int(cols)).astype(np.float32)

        config = ModelConfig.from_items({k[len("config."):]: v for k, v in items.items() if k.startswith("config.")})
        kind = items.get("kind", "")

        def params(stack: str) -> LstmParams:
            if stack not in stacks:
                raise ConfigInvalid(f"{filepath} has no {stack} parameters")
            blocks = stacks[stack]
            vocab_size, hidden_size = blocks["embedding"].shape
            return LstmParams.from_blocks(hidden_size, vocab_size, blocks)

        return ModelCheckpoint(
            kind=kind,
            config=config,
            decoder=params("lm" if kind == "lm" else "decoder"),
            encoder=params("encoder") if kind == "seq2seq" else None,
            vocab_refs={k[len("vocab."):]: v for k, v in items.items() if k.startswith("vocab.")},
            epoch=int(items.get("epoch", 0)),
            valid_perplexity=float(items.get("best_valid_perplexity", "inf")),
            train_perplexity=float(items.get("train_perplexity", "inf")),
            learning_rate=float(items["learning_rate"]) if "learning_rate" in items else None,
        )
