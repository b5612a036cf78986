# textprep.py
"""Comment sentence segmentation, comment tokenization and subtokenization."""

import logging
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import InsufficientPairs
from extract import MethodFullCommentPair, RawComment
from lexer import TokenKind, classify_lexeme

logger = logging.getLogger(__name__)

TAG_LINE_RE = re.compile(r"^\s*(@[a-zA-Z]+)")
INLINE_TAG_RE = re.compile(r"\{(@[a-zA-Z]+)")
COMMENT_TOKEN_RE = re.compile(r"@[a-zA-Z]+|[\w$]+|[^\w\s]")
# sentence-final punctuation followed by whitespace and an uppercase letter
BOUNDARY_RE = re.compile(r"[.?!](?=\s+[A-Z])")
LINE_END_RE = re.compile(r"(?<=[.?!])[ \t]*(?:\r\n|\r|\n)")
ABBREVIATIONS = ("e.g.", "i.e.", "etc.", "vs.")


@dataclass
class CommentSentence:
    tokens: List[str]
    javadoc_tag: Optional[str] = None
    source_pair_id: int = 0
    text: str = ""
    inline_tags: List[str] = field(default_factory=list)


@dataclass
class MethodCommentPair:
    """One method paired with one of its comment sentences."""
    pair_id: int
    method_tokens: List[str]
    signature_length: int
    sentence: CommentSentence
    file: str = ""
    line: int = 0
    comment_line: int = 0
    signature_raw: List[str] = field(default_factory=list)
    body_raw: List[str] = field(default_factory=list)
    file_methods: List[str] = field(default_factory=list)
    split: Optional[str] = None

    @property
    def signature_tokens(self) -> List[str]:
        return self.method_tokens[:self.signature_length]

    def to_record(self) -> Dict:
        return {
            "pair_id": self.pair_id,
            "file": self.file,
            "line": self.line,
            "comment_line": self.comment_line,
            "method_tokens": self.method_tokens,
            "signature_length": self.signature_length,
            "signature_raw": self.signature_raw,
            "body_raw": self.body_raw,
            "file_methods": self.file_methods,
            "sentence_tokens": self.sentence.tokens,
            "sentence_text": self.sentence.text,
            "javadoc_tag": self.sentence.javadoc_tag,
            "inline_tags": self.sentence.inline_tags,
            "full_pair_id": self.sentence.source_pair_id,
            "split": self.split,
        }

    @classmethod
    def from_record(cls, record: Dict) -> "MethodCommentPair":
        sentence = CommentSentence(
            tokens=record["sentence_tokens"],
            javadoc_tag=record.get("javadoc_tag"),
            source_pair_id=record.get("full_pair_id", 0),
            text=record.get("sentence_text", ""),
            inline_tags=record.get("inline_tags", []),
        )
        return cls(
            pair_id=record["pair_id"],
            method_tokens=record["method_tokens"],
            signature_length=record["signature_length"],
            sentence=sentence,
            file=record.get("file", ""),
            line=record.get("line", 0),
            comment_line=record.get("comment_line", 0),
            signature_raw=record.get("signature_raw", []),
            body_raw=record.get("body_raw", []),
            file_methods=record.get("file_methods", []),
            split=record.get("split"),
        )


def _char_class(ch: str) -> str:
    if ch.isalpha():
        return "upper" if ch.isupper() else "lower"
    if ch.isdigit():
        return "digit"
    if ch == "_":
        return "underscore"
    return "other"


def subtokenize(token: str, split_underscore_digit: bool = True) -> List[str]:
    """Split an identifier at camelCase, acronym, underscore and digit boundaries."""
    parts: List[str] = []
    current = ""
    for k, ch in enumerate(token):
        if ch == "_" and split_underscore_digit:
            if current:
                parts.append(current)
            current = ""
            continue
        if current:
            prev = _char_class(current[-1])
            cur = _char_class(ch)
            nxt = _char_class(token[k + 1]) if k + 1 < len(token) else ""
            letters = ("upper", "lower")
            boundary = (
                (prev == "lower" and cur == "upper")
                or (prev == "upper" and cur == "upper" and nxt == "lower")
                or (prev == "other") != (cur == "other")
            )
            if split_underscore_digit and (prev in letters and cur == "digit" or prev == "digit" and cur in letters):
                boundary = True
            if boundary:
                parts.append(current)
                current = ""
        current += ch
    if current:
        parts.append(current)
    if not parts:
        return [token.lower()]
    return [part.lower() for part in parts]


def tokenize_comment(text: str, split_underscore_digit: bool = True) -> List[str]:
    """Words and punctuation marks, `@tag` kept whole, words subtokenized."""
    tokens: List[str] = []
    for raw in COMMENT_TOKEN_RE.findall(text):
        if raw.startswith("@") and len(raw) > 1:
            tokens.append(raw.lower())
        elif raw[0].isalnum() or raw[0] in "_$":
            tokens.extend(subtokenize(raw, split_underscore_digit))
        else:
            tokens.append(raw)
    return tokens


def code_subtokens(tokens: Sequence[str], split_underscore_digit: bool = True) -> List[str]:
    """Lower-cased code subtokens; literals stay whole with whitespace collapsed."""
    out: List[str] = []
    for token in tokens:
        kind = classify_lexeme(token)
        if kind == TokenKind.IDENTIFIER:
            out.extend(subtokenize(token, split_underscore_digit))
        elif kind == TokenKind.LITERAL:
            out.append(re.sub(r"\s+", " ", token).lower())
        else:
            out.append(token)
    return out


def _is_abbreviation(text: str, end: int) -> bool:
    head = text[:end + 1]
    if any(head.lower().endswith(abbr) for abbr in ABBREVIATIONS):
        return True
    # an initial; "A" and "I" are words
    return re.search(r"(?:^|\s)[B-HJ-Z]\.$", head) is not None


def _line_groups(text: str) -> List[str]:
    """Split after sentence punctuation that ends a line, abbreviations excepted."""
    groups: List[str] = []
    start = 0
    for match in LINE_END_RE.finditer(text):
        if _is_abbreviation(text, match.start() - 1):
            continue
        groups.append(text[start:match.start()])
        start = match.end()
    groups.append(text[start:])
    return groups


def _split_free_text(text: str) -> List[str]:
    sentences: List[str] = []
    for line_group in _line_groups(text):
        start = 0
        for match in BOUNDARY_RE.finditer(line_group):
            end = match.start()
            if _is_abbreviation(line_group, end):
                continue
            sentences.append(line_group[start:end + 1])
            start = end + 1
        sentences.append(line_group[start:])
    return [s for s in (_normalize(s) for s in sentences) if s]


def _normalize(text: str) -> str:
    return " ".join(text.split())


def segment_sentences(comment: RawComment) -> List[Tuple[str, Optional[str]]]:
    """Javadoc-aware sentence segmentation, order preserved.

    Every line starting with `@tag` opens a group that runs to the next such
    line and is a single sentence; text before the first tag is split on
    sentence-final punctuation.
    """
    free: List[str] = []
    groups: List[Tuple[str, List[str]]] = []
    for line in re.split(r"\r\n|\r|\n", comment.text):
        match = TAG_LINE_RE.match(line)
        if match:
            groups.append((match.group(1), [line]))
        elif groups:
            groups[-1][1].append(line)
        else:
            free.append(line)

    sentences: List[Tuple[str, Optional[str]]] = [(s, None) for s in _split_free_text("\n".join(free))]
    for tag, lines in groups:
        sentences.append((_normalize(" ".join(lines)), tag))
    return sentences


def inline_tags(text: str) -> List[str]:
    return INLINE_TAG_RE.findall(text)


def build_pairs(pair: MethodFullCommentPair, first_pair_id: int = 0, full_pair_id: int = 0,
                split_underscore_digit: bool = True) -> List[MethodCommentPair]:
    """One MethodCommentPair per comment sentence, all sharing the method tokens."""
    signature = [t.text for t in pair.method.signature_tokens]
    body = [t.text for t in pair.method.body_tokens]
    return build_pairs_from_record({
        "file": pair.method.file_id,
        "line": pair.method.start_line,
        "comment_line": pair.comment.start_line,
        "signature_tokens": signature,
        "body_tokens": body,
        "comment_text": pair.comment.text,
        "file_methods": pair.file_methods,
    }, first_pair_id, full_pair_id, split_underscore_digit)


def build_pairs_from_record(record: Dict, first_pair_id: int = 0, full_pair_id: int = 0,
                            split_underscore_digit: bool = True) -> List[MethodCommentPair]:
    signature = code_subtokens(record["signature_tokens"], split_underscore_digit)
    body = code_subtokens(record["body_tokens"], split_underscore_digit)
    method_tokens = signature + body
    comment = RawComment(text=record["comment_text"], start_line=record.get("comment_line", 0),
                         is_javadoc_style=record.get("javadoc_style", False))

    pairs = []
    for text, tag in segment_sentences(comment):
        tokens = tokenize_comment(text, split_underscore_digit)
        if not tokens:
            continue
        sentence = CommentSentence(
            tokens=tokens,
            javadoc_tag=tag,
            source_pair_id=full_pair_id,
            text=text,
            inline_tags=inline_tags(text),
        )
        pairs.append(MethodCommentPair(
            pair_id=first_pair_id + len(pairs),
            method_tokens=list(method_tokens),
            signature_length=len(signature),
            sentence=sentence,
            file=record["file"],
            line=record["line"],
            comment_line=comment.start_line,
            signature_raw=list(record["signature_tokens"]),
            body_raw=list(record["body_tokens"]),
            file_methods=list(record.get("file_methods", [])),
        ))
    return pairs


def split_corpus(pairs: Sequence[MethodCommentPair], train_n: Optional[int], valid_n: int,
                 test_n: int, seed: int) -> Tuple[List[MethodCommentPair], List[MethodCommentPair],
                                                  List[MethodCommentPair]]:
    """Uniform draw without replacement into disjoint train/valid/test lists.

    ``train_n=None`` takes every pair left after the validation and test draws.
    """
    if train_n is None:
        train_n = len(pairs) - valid_n - test_n
    if min(train_n, valid_n, test_n) < 0 or train_n + valid_n + test_n > len(pairs):
        raise InsufficientPairs(
            f"requested {train_n}+{valid_n}+{test_n} pairs from a corpus of {len(pairs)}")
    order = np.random.RandomState(seed).permutation(len(pairs))
    train = [pairs[i] for i in order[:train_n]]
    valid = [pairs[i] for i in order[train_n:train_n + valid_n]]
    test = [pairs[i] for i in order[train_n + valid_n:train_n + valid_n + test_n]]
    return train, valid, test
