# records.py
"""JSON-lines artifacts: a header object, then one record per line."""

import hashlib
import json
from pathlib import Path
from typing import Dict, Iterable, List, Tuple

from errors import ConfigInvalid, MissingArtifact

RECORDS_VERSION = 1


def dump_line(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def write_records(filepath: Path, artifact: str, seed: int, records: Iterable[Dict]) -> int:
    """Write header + records; returns the record count."""
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(filepath, 'w', encoding='utf-8', newline='\n') as f:
        f.write(dump_line({"craic": artifact, "version": RECORDS_VERSION, "seed": seed}) + "\n")
        for record in records:
            f.write(dump_line(record) + "\n")
            count += 1
    return count


def read_records(filepath: Path, artifact: str) -> Tuple[Dict, List[Dict]]:
    header, records = _open(filepath, artifact)
    return header, list(records)


def _open(filepath: Path, artifact: str):
    filepath = Path(filepath)
    if not filepath.exists():
        raise MissingArtifact(f"{artifact} file not found: {filepath}")
    f = open(filepath, 'r', encoding='utf-8')
    first = f.readline()
    try:
        header = json.loads(first)
    except json.JSONDecodeError:
        f.close()
        raise ConfigInvalid(f"{filepath} has no record header")
    if header.get("craic") != artifact:
        f.close()
        raise ConfigInvalid(f"{filepath} holds {header.get('craic')!r} records, expected {artifact!r}")

    def lines():
        with f:
            for line in f:
                if line.strip():
                    yield json.loads(line)

    return header, lines()


def file_digest(filepath: Path) -> str:
    sha = hashlib.sha256()
    with open(filepath, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            sha.update(chunk)
    return sha.hexdigest()
