# strip.py
"""Rewrite sources with low-perplexity (redundant) comment sentences removed."""

import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Set, Tuple

from extract import iter_java_files, make_comment, read_source
from lexer import TokenKind, lex_java
from score import ScoredSentence
from textprep import segment_sentences

logger = logging.getLogger(__name__)


@dataclass
class StripSummary:
    files: int
    sentences: int
    comments_removed: int


def _indent_before(pieces: List[str]) -> str:
    if not pieces:
        return ""
    tail = re.split(r"\r\n|\r|\n", pieces[-1])[-1]
    return tail if not tail.strip() else ""


def render_comment(sentences: List[str], javadoc: bool, indent: str, newline: str = "\n") -> str:
    opener = "/**" if javadoc else "/*"
    if len(sentences) == 1:
        return f"{opener} {sentences[0]} */"
    body = "".join(f"{newline}{indent} * {s}" for s in sentences)
    return f"{opener}{body}{newline}{indent} */"


def strip_source(source: str, removals: Dict[int, Set[str]]) -> Tuple[str, int, int]:
    """Drop the listed sentences from the block comments starting on the given lines.

    Returns (new source, sentences removed, comments removed). A comment
    left without sentences goes away with its indentation and line break.
    """
    newline = "\r\n" if "\r\n" in source else "\n"
    pieces: List[str] = []
    removed = emptied = 0
    skip_break = False
    for token in lex_java(source):
        if skip_break:
            skip_break = False
            if token.kind == TokenKind.WHITESPACE:
                rest = re.sub(r"^[ \t]*(?:\r\n|\r|\n)", "", token.text, count=1)
                if rest != token.text:
                    pieces.append(rest)
                    continue
        if token.kind != TokenKind.COMMENT or not token.text.startswith("/*") or token.line not in removals:
            pieces.append(token.text)
            continue

        comment = make_comment(token)
        sentences = [text for text, _ in segment_sentences(comment)]
        kept = [s for s in sentences if s not in removals[token.line]]
        if len(kept) == len(sentences):
            pieces.append(token.text)
            continue
        removed += len(sentences) - len(kept)
        indent = _indent_before(pieces)
        if kept:
            pieces.append(render_comment(kept, comment.is_javadoc_style, indent, newline))
        else:
            emptied += 1
            if indent and pieces:
                pieces[-1] = pieces[-1][:len(pieces[-1]) - len(indent)]
            skip_break = True
    return "".join(pieces), removed, emptied


def removal_plan(scored: Iterable[ScoredSentence], threshold: float) -> Dict[str, Dict[int, Set[str]]]:
    """file id -> comment line -> sentence texts with perplexity below threshold."""
    plan: Dict[str, Dict[int, Set[str]]] = {}
    for s in scored:
        if s.perplexity < threshold:
            plan.setdefault(s.file, {}).setdefault(s.line, set()).add(s.text)
    return plan


def strip_files(input_path: Path, scored: Iterable[ScoredSentence], threshold: float,
                out_dir: Path) -> StripSummary:
    """Write stripped copies of the affected files under out_dir."""
    plan = removal_plan(scored, threshold)
    summary = StripSummary(0, 0, 0)
    for path, file_id in iter_java_files(input_path):
        if file_id not in plan:
            continue
        source = read_source(path)
        if source is None:
            continue
        stripped, removed, emptied = strip_source(source, plan[file_id])
        if not removed:
            logger.warning("No planned sentence found in %s; was it edited after extraction?", file_id)
            continue
        target = Path(out_dir) / file_id
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, 'w', encoding='utf-8', newline='') as f:
            f.write(stripped)
        summary.files += 1
        summary.sentences += removed
        summary.comments_removed += emptied
    return summary
