# extract.py
"""Mine method / full-comment pairs from lexed Java files."""

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from errors import EmptyCorpus
from lexer import JAVA_KEYWORDS, LexIssue, SourceToken, TokenKind, lex_java

logger = logging.getLogger(__name__)

TYPE_KEYWORDS = frozenset(["class", "interface", "enum"])
MODIFIERS = frozenset([
    "public", "protected", "private", "static", "final", "abstract",
    "synchronized", "native", "strictfp", "default", "transient", "volatile",
])


@dataclass
class RawMethod:
    """A method as lexed: signature (annotations included) and braced body."""
    signature_tokens: List[SourceToken]
    body_tokens: List[SourceToken]
    name: str
    file_id: str
    start_line: int


@dataclass
class RawComment:
    """A block comment with delimiters and `*` gutters stripped."""
    text: str
    start_line: int
    is_javadoc_style: bool
    end_line: int = 0


@dataclass
class MethodFullCommentPair:
    method: RawMethod
    comment: RawComment
    file_methods: List[str] = field(default_factory=list)

    def to_record(self) -> Dict:
        return {
            "file": self.method.file_id,
            "line": self.method.start_line,
            "method_name": self.method.name,
            "signature_tokens": [t.text for t in self.method.signature_tokens],
            "body_tokens": [t.text for t in self.method.body_tokens],
            "comment_text": self.comment.text,
            "comment_line": self.comment.start_line,
            "javadoc_style": self.comment.is_javadoc_style,
            "file_methods": self.file_methods,
        }


@dataclass
class Quartiles:
    mean: float
    median: float
    q1: float
    q3: float


@dataclass
class LengthStats:
    """Table-2 style length statistics over methods and full comments."""
    pairs: int
    method: Quartiles
    comment: Quartiles


def strip_comment_delimiters(text: str) -> str:
    """Remove `/**`, `/*`, `*/` and the leading `*` gutter of every line."""
    if text.startswith("/**") and not text.startswith("/**/"):
        inner = text[3:]
    else:
        inner = text[2:]
    if inner.endswith("*/"):
        inner = inner[:-2]
    lines = re.split(r"\r\n|\r|\n", inner)
    lines = [re.sub(r"^[ \t]*\*+", "", line) for line in lines]
    stripped = "\n".join(lines)
    while "/*" in stripped or "*/" in stripped:
        stripped = stripped.replace("/*", "").replace("*/", "")
    return stripped


def make_comment(token: SourceToken) -> RawComment:
    return RawComment(
        text=strip_comment_delimiters(token.text),
        start_line=token.line,
        is_javadoc_style=token.text.startswith("/**") and not token.text.startswith("/**/"),
        end_line=token.end_line,
    )


class MethodMiner:
    """Finds method declarations by signature pattern and brace matching.

    Only members of type bodies are considered; anything inside a method
    body (local and anonymous classes, lambdas) belongs to that method.
    """

    def __init__(self, tokens: Sequence[SourceToken], file_id: str = ""):
        self.tokens = list(tokens)
        self.file_id = file_id
        # positions of significant tokens inside self.tokens
        self.index = [i for i, t in enumerate(self.tokens) if t.is_significant]
        self.sig = [self.tokens[i] for i in self.index]
        self.methods: List[Tuple[RawMethod, int]] = []
        self.skipped = 0

    def mine(self) -> List[MethodFullCommentPair]:
        self._scan()
        names = sorted({method.name for method, _ in self.methods})
        pairs = []
        for method, first in self.methods:
            comment = self._preceding_comment(first, method.start_line)
            if comment is not None:
                pairs.append(MethodFullCommentPair(method, comment, names))
        return pairs

    def _scan(self):
        classes: List[str] = []
        start = 0
        p = 0
        n = len(self.sig)
        while p < n:
            text = self.sig[p].text
            if text == ";":
                start = p + 1
            elif text == "}":
                if classes:
                    classes.pop()
                start = p + 1
            elif text == "{":
                decl = self.sig[start:p]
                kind, name = self._classify_block(decl, classes)
                if kind == "type":
                    classes.append(name)
                    start = p + 1
                    p += 1
                    continue
                close = self._matching_brace(p)
                resume = None
                if kind == "method":
                    resume = self._swallowed_member(p, close, classes)
                if close is None or resume is not None:
                    if kind == "method":
                        self.skipped += 1
                        logger.warning("BraceImbalance in %s at line %d; skipping method %s",
                                       self.file_id, self.sig[p].line, name)
                    if resume is None:
                        resume = p + 1
                    start = p = resume
                    continue
                if kind == "method":
                    self.methods.append((RawMethod(
                        signature_tokens=list(decl),
                        body_tokens=self.sig[p:close + 1],
                        name=name,
                        file_id=self.file_id,
                        start_line=decl[0].line,
                    ), self.index[start]))
                    start = close + 1
                elif not decl or [t.text for t in decl] == ["static"]:
                    start = close + 1
                p = close + 1
                continue
            p += 1

    def _swallowed_member(self, p: int, close: Optional[int], classes: List[str]) -> Optional[int]:
        """Start of a method declaration caught inside the body opened at p.

        Method declarations never sit directly in a method body, so one there
        means the body was left unclosed. Without any matching brace every
        depth is searched.
        """
        end = len(self.sig) if close is None else close
        depth = 0
        start = p + 1
        for q in range(p, end):
            text = self.sig[q].text
            if text == "{":
                if q > p and (depth == 1 or close is None):
                    if self._classify_block(self.sig[start:q], classes)[0] == "method":
                        return start
                depth += 1
                start = q + 1
            elif text == "}":
                depth -= 1
                start = q + 1
            elif text == ";":
                start = q + 1
        return None

    def _matching_brace(self, p: int) -> Optional[int]:
        depth = 0
        for q in range(p, len(self.sig)):
            text = self.sig[q].text
            if text == "{":
                depth += 1
            elif text == "}":
                depth -= 1
                if depth == 0:
                    return q
        return None

    def _classify_block(self, decl: List[SourceToken], classes: List[str]) -> Tuple[str, str]:
        i = _skip_annotations(decl)
        if i is None:
            return "other", ""
        rest = decl[i:]
        texts = [t.text for t in rest]

        for k, tok in enumerate(rest[:-1]):
            previous = texts[k - 1] if k > 0 else ""
            if previous in (".", "new"):
                continue
            declares_type = tok.text in TYPE_KEYWORDS or tok.text == "record"
            if declares_type and rest[k + 1].kind == TokenKind.IDENTIFIER:
                return "type", rest[k + 1].text

        if not classes or "(" not in texts:
            return "other", ""
        q = texts.index("(")
        if q == 0 or rest[q - 1].kind != TokenKind.IDENTIFIER:
            return "other", ""
        name = texts[q - 1]
        before = texts[:q - 1]
        if "=" in before or "new" in before or "->" in before:
            return "other", ""

        close = _matching_paren(texts, q)
        if close is None:
            return "other", ""
        tail = texts[close + 1:]
        if tail and tail[0] != "throws" and set(tail) - {"[", "]"}:
            return "other", ""

        type_tokens = _strip_type_parameters([t for t in before if t not in MODIFIERS])
        if not type_tokens and name != classes[-1]:
            return "other", ""
        return "method", name

    def _preceding_comment(self, first: int, start_line: int) -> Optional[RawComment]:
        j = first - 1
        while j >= 0 and self.tokens[j].kind == TokenKind.WHITESPACE:
            j -= 1
        if j < 0:
            return None
        token = self.tokens[j]
        if token.kind != TokenKind.COMMENT or not token.text.startswith("/*"):
            return None
        comment = make_comment(token)
        if comment.end_line >= start_line:
            return None
        return comment


def _skip_annotations(decl: List[SourceToken]) -> Optional[int]:
    i = 0
    while i + 1 < len(decl) and decl[i].text == "@" and decl[i + 1].kind == TokenKind.IDENTIFIER:
        i += 2
        while i + 1 < len(decl) and decl[i].text == "." and decl[i + 1].kind == TokenKind.IDENTIFIER:
            i += 2
        if i < len(decl) and decl[i].text == "(":
            close = _matching_paren([t.text for t in decl], i)
            if close is None:
                return None
            i = close + 1
    return i


def _matching_paren(texts: List[str], q: int) -> Optional[int]:
    depth = 0
    for k in range(q, len(texts)):
        if texts[k] == "(":
            depth += 1
        elif texts[k] == ")":
            depth -= 1
            if depth == 0:
                return k
    return None


def _strip_type_parameters(texts: List[str]) -> List[str]:
    """Drop a leading generic parameter list such as ``<T extends Foo>``."""
    if not texts or texts[0] != "<":
        return texts
    depth = 0
    for k, text in enumerate(texts):
        depth += text.count("<") - text.count(">") if set(text) <= {"<", ">"} else 0
        if depth <= 0:
            return texts[k + 1:]
    return []


def mine_pairs(tokens: Sequence[SourceToken], file_id: str = "") -> List[MethodFullCommentPair]:
    """One pair per method that has an immediately preceding block comment."""
    return MethodMiner(tokens, file_id).mine()


def mine_source(source: str, file_id: str = "",
                issues: Optional[List[LexIssue]] = None) -> List[MethodFullCommentPair]:
    return mine_pairs(lex_java(source, issues), file_id)


def iter_java_files(input_path: Path) -> Iterator[Tuple[Path, str]]:
    """Yield (path, file id) for a directory tree, a single file, or a manifest."""
    input_path = Path(input_path)
    if input_path.is_dir():
        for path in sorted(input_path.rglob("*.java")):
            yield path, path.relative_to(input_path).as_posix()
    elif input_path.suffix == ".java":
        yield input_path, input_path.name
    else:
        with open(input_path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if line:
                    yield Path(line), line


def read_source(path: Path) -> Optional[str]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            return f.read()
    except UnicodeDecodeError:
        logger.warning("Skipping %s: not valid UTF-8", path)
    except FileNotFoundError:
        logger.warning("Skipping %s: file not found", path)
    return None


def mine_files(files: Iterable[Tuple[Path, str]]) -> List[MethodFullCommentPair]:
    """Mine every file; output is ordered by (file id, method line)."""
    pairs: List[MethodFullCommentPair] = []
    for path, file_id in files:
        source = read_source(path)
        if source is None:
            continue
        pairs.extend(mine_source(source, file_id))
    pairs.sort(key=lambda pair: (pair.method.file_id, pair.method.start_line))
    return pairs


def _quartiles(lengths: List[int]) -> Quartiles:
    values = np.asarray(lengths, dtype=np.float64)
    return Quartiles(
        mean=float(np.mean(values)),
        median=float(np.median(values)),
        q1=float(np.percentile(values, 25, method="inverted_cdf")),
        q3=float(np.percentile(values, 75, method="inverted_cdf")),
    )


def corpus_stats(pairs: Sequence[MethodFullCommentPair]) -> LengthStats:
    return stats_from_records(pair.to_record() for pair in pairs)


def stats_from_records(records: Iterable[Dict]) -> LengthStats:
    """Length statistics over pair records (token strings only)."""
    from textprep import tokenize_comment

    method_lengths, comment_lengths = [], []
    for record in records:
        method_lengths.append(len(record["signature_tokens"]) + len(record["body_tokens"]))
        comment_lengths.append(len(tokenize_comment(record["comment_text"])))
    if not method_lengths:
        raise EmptyCorpus("no method/comment pairs to summarize")
    return LengthStats(len(method_lengths), _quartiles(method_lengths), _quartiles(comment_lengths))
