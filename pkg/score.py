# score.py
"""Perplexity scores for comment sentences, the ranked list and aggregate reports."""

import logging
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from compress import DEFAULT_MAX_TOKENS, Scheme, compress_pair, truncate_comment
from errors import UnknownPairId, VocabMismatch, ZeroLength
from neural.models import ModelCheckpoint, exp_or_inf, sequence_log_probs
from records import dump_line
from textprep import MethodCommentPair
from vocab import UNK, Vocabulary

logger = logging.getLogger(__name__)

NON_JAVADOC = "non-javadoc"
RANKED_COLUMNS = ["rank", "perplexity", "cross_entropy_bits", "unk_fraction",
                  "javadoc_tag", "file", "line", "sentence_text"]


def perplexity(log_prob: float, n_tokens: int) -> float:
    """exp(-log_prob / n_tokens) for a natural-log probability."""
    if n_tokens <= 0:
        raise ZeroLength("perplexity of an empty sequence")
    return exp_or_inf(-log_prob / n_tokens)


def cross_entropy(log_prob: float, n_tokens: int) -> float:
    """Bits per token; perplexity == 2 ** cross_entropy."""
    if n_tokens <= 0:
        raise ZeroLength("cross-entropy of an empty sequence")
    return -log_prob / (n_tokens * math.log(2))


@dataclass
class ScoredSentence:
    pair_id: int
    sentence_tokens: List[str]
    javadoc_tag: Optional[str]
    log_prob: float
    n_tokens: int
    perplexity: float
    rank: int = 0
    unk_fraction: float = 0.0
    file: str = ""
    line: int = 0
    text: str = ""
    inline_tags: List[str] = field(default_factory=list)
    empty_method: bool = False

    @property
    def cross_entropy(self) -> float:
        return cross_entropy(self.log_prob, self.n_tokens)

    @property
    def report_tag(self) -> str:
        """Block tag, else first inline tag, else non-javadoc."""
        if self.javadoc_tag:
            return self.javadoc_tag
        if self.inline_tags:
            return self.inline_tags[0]
        return NON_JAVADOC

    def to_record(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_record(cls, record: Dict) -> "ScoredSentence":
        return cls(**{k: v for k, v in record.items() if k in cls.__dataclass_fields__})


class Scorer:
    """Scores pairs against one checkpoint and its vocabularies."""

    def __init__(self, checkpoint: ModelCheckpoint, comment_vocab: Vocabulary,
                 method_vocab: Optional[Vocabulary] = None, scheme: Scheme = Scheme.BEGIN_END,
                 max_tokens: int = DEFAULT_MAX_TOKENS, comment_max_tokens: int = DEFAULT_MAX_TOKENS,
                 split_underscore_digit: bool = True):
        self.checkpoint = checkpoint
        self.comment_vocab = comment_vocab
        self.method_vocab = method_vocab
        self.scheme = Scheme(scheme)
        self.max_tokens = max_tokens
        self.comment_max_tokens = comment_max_tokens
        self.split_underscore_digit = split_underscore_digit
        self._check_vocabularies()

    def _check_vocabularies(self):
        expected = {"comment": self.comment_vocab}
        if self.checkpoint.kind == "seq2seq":
            if self.method_vocab is None:
                raise VocabMismatch("a seq2seq model needs the method vocabulary")
            expected["method"] = self.method_vocab
        for side, vocab in expected.items():
            ref = self.checkpoint.vocab_refs.get(side)
            if ref is not None and ref != vocab.digest():
                raise VocabMismatch(f"the checkpoint was trained with a different {side} vocabulary")
        if self.comment_vocab.size != self.checkpoint.decoder.vocab_size:
            raise VocabMismatch("comment vocabulary size differs from the model's output layer")
        if self.checkpoint.kind == "seq2seq" and self.method_vocab.size != self.checkpoint.encoder.vocab_size:
            raise VocabMismatch("method vocabulary size differs from the encoder's embedding")

    def encode(self, pair: MethodCommentPair):
        comment = self.comment_vocab.encode(
            truncate_comment(pair.sentence.tokens, self.comment_max_tokens), add_bos_eos=True)
        method: List[int] = []
        if self.checkpoint.kind == "seq2seq":
            compressed = compress_pair(pair, self.scheme, self.max_tokens, self.split_underscore_digit)
            method = self.method_vocab.encode(compressed.tokens)
        return method, comment

    def score_pairs(self, pairs: Sequence[MethodCommentPair], batch_size: int = 64,
                    progress: bool = False) -> List[ScoredSentence]:
        encoded = [self.encode(pair) for pair in pairs]
        scored: List[ScoredSentence] = []
        chunks = range(0, len(pairs), batch_size)
        for start in tqdm(chunks, desc="scoring", disable=not progress, leave=False):
            chunk = encoded[start:start + batch_size]
            methods = [m for m, _ in chunk] if self.checkpoint.kind == "seq2seq" else None
            log_probs = sequence_log_probs(self.checkpoint, [c for _, c in chunk], methods, batch_size)
            for pair, (method, comment), log_prob in zip(pairs[start:start + batch_size], chunk, log_probs):
                scored.append(self._scored(pair, method, comment, float(log_prob)))
        empty = sum(s.empty_method for s in scored)
        if empty:
            logger.warning("%d pairs had an empty method and were scored from the zero state", empty)
        return scored

    def score_pair(self, pair: MethodCommentPair) -> ScoredSentence:
        return self.score_pairs([pair])[0]

    def _scored(self, pair: MethodCommentPair, method: List[int], comment: List[int],
                log_prob: float) -> ScoredSentence:
        words = comment[1:-1]
        n_tokens = len(comment) - 1
        return ScoredSentence(
            pair_id=pair.pair_id,
            sentence_tokens=list(pair.sentence.tokens),
            javadoc_tag=pair.sentence.javadoc_tag,
            log_prob=log_prob,
            n_tokens=n_tokens,
            perplexity=perplexity(log_prob, n_tokens),
            unk_fraction=(words.count(UNK) / len(words)) if words else 0.0,
            file=pair.file,
            line=pair.comment_line or pair.line,
            text=pair.sentence.text or " ".join(pair.sentence.tokens),
            inline_tags=list(pair.sentence.inline_tags),
            empty_method=self.checkpoint.kind == "seq2seq" and not method,
        )


def score_pair(checkpoint: ModelCheckpoint, pair: MethodCommentPair, scheme: Scheme,
               comment_vocab: Vocabulary, method_vocab: Optional[Vocabulary] = None,
               max_tokens: int = DEFAULT_MAX_TOKENS) -> ScoredSentence:
    return Scorer(checkpoint, comment_vocab, method_vocab, scheme, max_tokens).score_pair(pair)


def rank_corpus(scored: Iterable[ScoredSentence]) -> List[ScoredSentence]:
    """Lowest perplexity first, ties by pair id; ranks are 1-based."""
    ordered = sorted(scored, key=lambda s: (s.perplexity, s.pair_id))
    return [replace(s, rank=k) for k, s in enumerate(ordered, start=1)]


@dataclass
class TagRow:
    tag: str
    count: int
    avg_perplexity: float


@dataclass
class TagReport:
    rows: List[TagRow]
    omitted: Dict[str, int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(row.count for row in self.rows) + sum(self.omitted.values())


def javadoc_report(scored: Sequence[ScoredSentence], min_count: int = 25) -> TagReport:
    """Mean per-sentence perplexity per Javadoc element; rare tags are omitted."""
    groups: Dict[str, List[float]] = {}
    for s in scored:
        groups.setdefault(s.report_tag, []).append(s.perplexity)

    rows, omitted = [], {}
    for tag in sorted(t for t in groups if t != NON_JAVADOC):
        if len(groups[tag]) < min_count:
            omitted[tag] = len(groups[tag])
        else:
            rows.append(TagRow(tag, len(groups[tag]), float(np.mean(groups[tag]))))
    if NON_JAVADOC in groups:
        rows.append(TagRow(NON_JAVADOC, len(groups[NON_JAVADOC]), float(np.mean(groups[NON_JAVADOC]))))
    return TagReport(rows, omitted)


@dataclass
class CategoryRow:
    category: str
    count: int
    mean: float
    stdev: float
    median: float


def lower_median(values: Sequence[float]) -> float:
    ordered = sorted(values)
    return ordered[math.ceil(len(ordered) / 2) - 1]


def category_report(scored: Sequence[ScoredSentence], labels: Dict[int, str]) -> List[CategoryRow]:
    """Count, mean, sample stdev and lower median perplexity per labeled category."""
    by_id = {s.pair_id: s for s in scored}
    groups: Dict[str, List[float]] = {}
    for pair_id, category in sorted(labels.items()):
        if pair_id not in by_id:
            raise UnknownPairId(f"label for pair {pair_id}, which was not scored")
        groups.setdefault(category, []).append(by_id[pair_id].perplexity)

    rows = []
    for category in sorted(groups):
        values = groups[category]
        stdev = float(np.std(values, ddof=1)) if len(values) > 1 else math.nan
        rows.append(CategoryRow(category, len(values), float(np.mean(values)), stdev, lower_median(values)))
    return rows


def _clean(text: str) -> str:
    return " ".join(str(text).split())


def ranked_row(s: ScoredSentence) -> Dict:
    return {
        "rank": s.rank,
        "perplexity": s.perplexity,
        "cross_entropy_bits": s.cross_entropy,
        "unk_fraction": s.unk_fraction,
        "javadoc_tag": s.javadoc_tag or "",
        "file": s.file,
        "line": s.line,
        "sentence_text": s.text,
    }


def write_ranked_tsv(ranked: Sequence[ScoredSentence], filepath: Path):
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    with open(filepath, 'w', encoding='utf-8', newline='\n') as f:
        f.write("\t".join(RANKED_COLUMNS) + "\n")
        for s in ranked:
            row = ranked_row(s)
            f.write("\t".join([
                str(row["rank"]),
                f"{row['perplexity']:.6f}",
                f"{row['cross_entropy_bits']:.6f}",
                f"{row['unk_fraction']:.4f}",
                row["javadoc_tag"],
                _clean(row["file"]),
                str(row["line"]),
                _clean(row["sentence_text"]),
            ]) + "\n")


def write_ranked_json(ranked: Sequence[ScoredSentence], filepath: Path):
    filepath = Path(filepath)
    filepath.parent.mkdir(parents=True, exist_ok=True)
    with open(filepath, 'w', encoding='utf-8', newline='\n') as f:
        for s in ranked:
            f.write(dump_line(ranked_row(s)) + "\n")
