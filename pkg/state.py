# state.py

import json
import logging
import os
from contextlib import contextmanager
from pathlib import Path
from typing import Dict, Iterable, Optional, Union

from errors import MissingArtifact, StaleArtifact, WorkDirLocked
from records import dump_line, file_digest

logger = logging.getLogger(__name__)


class WorkDir:
    """Artifact layout, stage manifests and the lock of one work directory."""

    LOCK_NAME = ".craic.lock"
    MANIFEST_VERSION = 1

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)

    @property
    def pairs_path(self) -> Path:
        return self.root / "pairs.jsonl"

    @property
    def sentences_path(self) -> Path:
        return self.root / "sentences.jsonl"

    @property
    def corpus_path(self) -> Path:
        return self.root / "corpus.jsonl"

    def vocab_path(self, side: str) -> Path:
        return self.root / f"vocab.{side}.txt"

    def model_path(self, name: str) -> Path:
        return self.root / "models" / f"{name}.ckpt"

    def report_path(self, name: str, suffix: str) -> Path:
        return self.root / "reports" / f"{name}.{suffix}"

    def manifest_path(self, stage: str) -> Path:
        return self.root / "stages" / f"{stage}.json"

    def relative(self, path: Path) -> str:
        path = Path(path)
        try:
            return path.resolve().relative_to(self.root.resolve()).as_posix()
        except ValueError:
            return str(path)

    def require(self, *paths: Path):
        for path in paths:
            if not Path(path).exists():
                raise MissingArtifact(f"missing {self.relative(path)}; run the stage that produces it first")

    @contextmanager
    def lock(self):
        """Exclusive use of the work directory for one command."""
        self.root.mkdir(parents=True, exist_ok=True)
        lock_path = self.root / self.LOCK_NAME
        try:
            fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise WorkDirLocked(f"{self.root} is in use by another command (remove {lock_path} if stale)")
        try:
            os.write(fd, str(os.getpid()).encode("ascii"))
            os.close(fd)
            yield self
        finally:
            lock_path.unlink(missing_ok=True)

    def _digests(self, paths: Dict[str, Union[Path, str]]) -> Dict[str, str]:
        digests = {}
        for name, value in paths.items():
            digests[name] = file_digest(value) if isinstance(value, Path) else value
        return digests

    def record_stage(self, stage: str, seed: int, inputs: Dict[str, Union[Path, str]],
                     outputs: Iterable[Path], settings: Optional[Dict] = None):
        """Write stages/<stage>.json; inputs map a name to a path or a precomputed digest."""
        manifest = {
            "stage": stage,
            "version": self.MANIFEST_VERSION,
            "seed": seed,
            "settings": settings or {},
            "inputs": self._digests(inputs),
            "outputs": {self.relative(p): file_digest(p) for p in outputs},
        }
        path = self.manifest_path(stage)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(dump_line(manifest) + "\n")

    def load_manifest(self, stage: str) -> Optional[Dict]:
        path = self.manifest_path(stage)
        if not path.exists():
            return None
        with open(path, 'r', encoding='utf-8') as f:
            return json.load(f)

    def _producer(self, path: Path) -> Optional[Dict]:
        key = self.relative(path)
        for manifest_path in sorted((self.root / "stages").glob("*.json")):
            manifest = self.load_manifest(manifest_path.stem)
            if manifest and key in manifest["outputs"]:
                return manifest
        return None

    def check_inputs(self, *paths: Path, force: bool = False):
        """Refuse inputs changed since they were produced, or built from inputs that changed since."""
        self.require(*paths)
        problems = []
        for path in paths:
            key = self.relative(path)
            producer = self._producer(path)
            if producer is None:
                continue
            if producer["outputs"][key] != file_digest(path):
                problems.append(f"{key} changed after the {producer['stage']} stage wrote it")
            for name, digest in producer["inputs"].items():
                source = self.root / name
                if source.exists() and file_digest(source) != digest:
                    problems.append(f"{key} was built from an older {name}")
        if not problems:
            return
        if force:
            for problem in problems:
                logger.warning("Ignoring stale input (--force): %s", problem)
            return
        raise StaleArtifact("; ".join(problems) + " (rerun the producing stage or pass --force)")
