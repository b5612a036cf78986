# commands.py
"""Pipeline stages: extract, prep, train, score, report, evaluate, gradcheck.

Every stage reads and writes artifacts in the work directory and records a
manifest of its input and output hashes under stages/.
"""

import hashlib
import logging
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from tqdm import tqdm

from compress import Scheme, compress_pair, truncate_comment
from errors import ConfigInvalid, EmptyCorpus, MissingArtifact
from extract import LengthStats, iter_java_files, mine_source, read_source, stats_from_records
from lexer import LexIssue
from loader import PipelineConfig, load_labels
from neural.gradcheck import GradientCheckResult, gradient_check
from neural.models import ModelCheckpoint, corpus_perplexity
from neural.training import EpochReport, train_lm, train_seq2seq
from records import read_records, write_records
from save_system import SaveSystem
from score import (CategoryRow, ScoredSentence, Scorer, TagReport, category_report, javadoc_report,
                   rank_corpus, write_ranked_json, write_ranked_tsv)
from state import WorkDir
from strip import strip_files
from textprep import MethodCommentPair, build_pairs_from_record, split_corpus
from vocab import Vocabulary, build_vocab

logger = logging.getLogger(__name__)

SPLITS = ("train", "valid", "test")
GRADIENT_TOLERANCE = 1e-4


@dataclass
class ExtractSummary:
    files: int
    pairs: int
    sentences: int
    lex_issues: int


def _sources_digest(files: Sequence[Tuple[Path, str]]) -> str:
    sha = hashlib.sha256()
    for path, file_id in files:
        sha.update(file_id.encode("utf-8") + b"\0")
        try:
            sha.update(Path(path).read_bytes())
        except OSError:
            pass
        sha.update(b"\0")
    return sha.hexdigest()


def cmd_extract(config: PipelineConfig, progress: bool = False) -> ExtractSummary:
    """Mine method/comment pairs and split their comments into sentences."""
    if not config.input:
        raise ConfigInvalid("extract needs an input source tree (--input)")
    if not Path(config.input).exists():
        raise MissingArtifact(f"input not found: {config.input}")
    wd = WorkDir(config.work)
    files = list(iter_java_files(Path(config.input)))

    full_records: List[Dict] = []
    issues: List[LexIssue] = []
    mined = []
    for path, file_id in tqdm(files, desc="extract", disable=not progress):
        source = read_source(path)
        if source is not None:
            mined.extend(mine_source(source, file_id, issues))
    mined.sort(key=lambda pair: (pair.method.file_id, pair.method.start_line))
    if not mined:
        raise EmptyCorpus(f"no commented methods found under {config.input}")

    sentences: List[MethodCommentPair] = []
    for full_pair_id, pair in enumerate(mined):
        record = pair.to_record()
        record["full_pair_id"] = full_pair_id
        full_records.append(record)
        sentences.extend(build_pairs_from_record(record, len(sentences), full_pair_id,
                                                 config.split_underscore_digit))

    write_records(wd.pairs_path, "pairs", config.seed, full_records)
    write_records(wd.sentences_path, "sentences", config.seed, (p.to_record() for p in sentences))
    wd.record_stage("extract", config.seed, {"sources": _sources_digest(files)},
                    [wd.pairs_path, wd.sentences_path],
                    {"split_underscore_digit": config.split_underscore_digit})

    for kind, count in sorted(Counter(issue.kind for issue in issues).items()):
        logger.warning("%d %s issues while lexing", count, kind)
    summary = ExtractSummary(len(files), len(full_records), len(sentences), len(issues))
    print(f"Extracted {summary.pairs} method/comment pairs ({summary.sentences} sentences) "
          f"from {summary.files} files")
    return summary


def cmd_prep(config: PipelineConfig, force: bool = False) -> Dict[str, int]:
    """Split sentence pairs, compress methods and build both vocabularies."""
    wd = WorkDir(config.work)
    wd.check_inputs(wd.sentences_path, force=force)
    _, records = read_records(wd.sentences_path, "sentences")
    pairs = [MethodCommentPair.from_record(r) for r in records]
    train, valid, test = split_corpus(pairs, config.train_size, config.valid_size, config.test_size, config.seed)

    rows = []
    for split, members in zip(SPLITS, (train, valid, test)):
        for pair in members:
            record = pair.to_record()
            record["split"] = split
            record["comment_tokens"] = truncate_comment(pair.sentence.tokens, config.comment_max_tokens)
            record["compressed"] = {
                scheme.value: compress_pair(pair, scheme, config.max_tokens, config.split_underscore_digit).tokens
                for scheme in Scheme
            }
            rows.append(record)

    train_rows = [r for r in rows if r["split"] == "train"]
    method_vocab = build_vocab((t for r in train_rows for t in r["method_tokens"]), config.s2s.vocab_size_method)
    comment_vocab = build_vocab((t for r in train_rows for t in r["comment_tokens"]), config.lm.vocab_size_comment)

    write_records(wd.corpus_path, "corpus", config.seed, rows)
    method_vocab.save(wd.vocab_path("method"))
    comment_vocab.save(wd.vocab_path("comment"))
    wd.record_stage("prep", config.seed, {wd.relative(wd.sentences_path): wd.sentences_path},
                    [wd.corpus_path, wd.vocab_path("method"), wd.vocab_path("comment")],
                    {"max_tokens": config.max_tokens, "comment_max_tokens": config.comment_max_tokens})

    sizes = {"train": len(train), "valid": len(valid), "test": len(test),
             "method_vocab": method_vocab.size, "comment_vocab": comment_vocab.size}
    print(f"Split {sizes['train']}/{sizes['valid']}/{sizes['test']} pairs; "
          f"vocabularies: method {method_vocab.size}, comment {comment_vocab.size}")
    return sizes


@dataclass
class Corpus:
    records: Dict[str, List[Dict]]
    method_vocab: Vocabulary
    comment_vocab: Vocabulary

    @property
    def vocab_refs(self) -> Dict[str, str]:
        return {"method": self.method_vocab.digest(), "comment": self.comment_vocab.digest()}

    def comments(self, split: str) -> List[List[int]]:
        return [self.comment_vocab.encode(r["comment_tokens"], add_bos_eos=True) for r in self.records[split]]

    def methods(self, split: str, scheme: str) -> List[List[int]]:
        return [self.method_vocab.encode(r["compressed"][scheme]) for r in self.records[split]]

    def pairs(self, split: str) -> List[MethodCommentPair]:
        members = self.records[split] if split != "all" else [r for s in SPLITS for r in self.records[s]]
        return [MethodCommentPair.from_record(r) for r in sorted(members, key=lambda r: r["pair_id"])]


def load_corpus(wd: WorkDir, force: bool = False) -> Corpus:
    wd.check_inputs(wd.corpus_path, wd.vocab_path("method"), wd.vocab_path("comment"), force=force)
    _, rows = read_records(wd.corpus_path, "corpus")
    records = {split: [r for r in rows if r["split"] == split] for split in SPLITS}
    return Corpus(records, Vocabulary.load(wd.vocab_path("method")), Vocabulary.load(wd.vocab_path("comment")))


def model_name(kind: str, scheme: str) -> str:
    return "lm" if kind == "lm" else f"s2s-{scheme}"


def _model_path(wd: WorkDir, model: str) -> Path:
    if model.endswith(".ckpt") or "/" in model:
        return Path(model)
    return wd.model_path(model)


def _print_epoch(report: EpochReport):
    marker = " *" if report.improved else ""
    print(f"{report.epoch:>5}  {report.learning_rate:>9.5f}  {report.train_perplexity:>10.3f}  "
          f"{report.valid_perplexity:>10.3f}{marker}")


def split_perplexities(checkpoint: ModelCheckpoint, corpus: Corpus) -> Dict[str, Optional[float]]:
    scheme = checkpoint.config.compression
    out: Dict[str, Optional[float]] = {}
    for split in SPLITS:
        comments = corpus.comments(split)
        if not comments:
            out[split] = None
            continue
        methods = corpus.methods(split, scheme) if checkpoint.kind == "seq2seq" else None
        out[split] = corpus_perplexity(checkpoint, comments, methods).perplexity
    return out


def _fmt(value: Optional[float]) -> str:
    return f"{value:>8.2f}" if value is not None else f"{'-':>8}"


def cmd_train(config: PipelineConfig, kind: str, resume: bool = False, force: bool = False,
              progress: bool = False) -> ModelCheckpoint:
    """Train the LM (kind "lm") or a seq2seq model (kind "s2s") on the prepared corpus."""
    if kind not in ("lm", "s2s"):
        raise ConfigInvalid(f"--model must be lm or s2s, got {kind!r}")
    wd = WorkDir(config.work)
    corpus = load_corpus(wd, force)
    model_config = config.model_config(kind)
    name = model_name(kind, config.compression)
    path = wd.model_path(name)

    previous = None
    if resume:
        if not path.exists():
            raise MissingArtifact(f"nothing to resume: {wd.relative(path)} does not exist")
        previous = SaveSystem.load(path)

    print(f"Training {name} (K={model_config.hidden_size}, up to {model_config.max_epochs} epochs)")
    print(f"{'Epoch':>5}  {'LR':>9}  {'Train pp':>10}  {'Valid pp':>10}")
    if kind == "lm":
        checkpoint = train_lm(corpus.comments("train"), corpus.comments("valid"), model_config,
                              corpus.comment_vocab.size, {"comment": corpus.comment_vocab.digest()},
                              previous, _print_epoch, progress)
    else:
        scheme = config.compression
        train = list(zip(corpus.methods("train", scheme), corpus.comments("train")))
        valid = list(zip(corpus.methods("valid", scheme), corpus.comments("valid")))
        checkpoint = train_seq2seq(train, valid, model_config, corpus.method_vocab.size,
                                   corpus.comment_vocab.size, corpus.vocab_refs, previous,
                                   _print_epoch, progress)

    SaveSystem.save(checkpoint, path)
    wd.record_stage(f"train.{name}", config.seed,
                    {wd.relative(p): p for p in (wd.corpus_path, wd.vocab_path("method"), wd.vocab_path("comment"))},
                    [path], {"epoch": checkpoint.epoch})

    pps = split_perplexities(checkpoint, corpus)
    print(f"{'Model':<22}{'Train':>8}{'Valid':>8}{'Test':>8}")
    print(f"{name:<22}{_fmt(pps['train'])}{_fmt(pps['valid'])}{_fmt(pps['test'])}")
    return checkpoint


def cmd_score(config: PipelineConfig, model: str, split: str = "all", write_json: bool = False,
              force: bool = False, progress: bool = False) -> List[ScoredSentence]:
    """Score and rank comment sentences, lowest perplexity first."""
    if split not in SPLITS + ("all",):
        raise ConfigInvalid(f"unknown split {split!r}")
    wd = WorkDir(config.work)
    path = _model_path(wd, model)
    wd.check_inputs(path, force=force)
    corpus = load_corpus(wd, force)
    checkpoint = SaveSystem.load(path)
    name = path.stem

    scorer = Scorer(checkpoint, corpus.comment_vocab, corpus.method_vocab, checkpoint.config.compression,
                    checkpoint.config.max_tokens, config.comment_max_tokens, config.split_underscore_digit)
    pairs = corpus.pairs(split)
    if not pairs:
        raise EmptyCorpus(f"no pairs in split {split!r}")
    ranked = rank_corpus(scorer.score_pairs(pairs, progress=progress))

    outputs = [wd.report_path(f"ranked.{name}", "tsv"), wd.report_path(f"scores.{name}", "jsonl")]
    write_ranked_tsv(ranked, outputs[0])
    write_records(outputs[1], "scores", config.seed, (s.to_record() for s in ranked))
    if write_json:
        outputs.append(wd.report_path(f"ranked.{name}", "jsonl"))
        write_ranked_json(ranked, outputs[-1])
    wd.record_stage(f"score.{name}", config.seed,
                    {wd.relative(p): p for p in (path, wd.corpus_path)}, outputs, {"split": split})
    print(f"Ranked {len(ranked)} sentences with {name} -> {wd.relative(outputs[0])}")

    if config.strip_threshold is not None:
        if not config.input:
            raise ConfigInvalid("--strip needs the input source tree (--input)")
        out_dir = wd.root / "stripped" / name
        summary = strip_files(Path(config.input), ranked, config.strip_threshold, out_dir)
        print(f"Removed {summary.sentences} sentences below perplexity {config.strip_threshold} "
              f"({summary.comments_removed} comments emptied) in {summary.files} files -> {wd.relative(out_dir)}")
    return ranked


def format_tag_report(report: TagReport) -> str:
    lines = [f"{'Element':<16}{'Sentences':>10}{'Avg pp':>10}"]
    for row in report.rows:
        lines.append(f"{row.tag:<16}{row.count:>10}{row.avg_perplexity:>10.2f}")
    if report.omitted:
        lines.append("omitted (below min count): " +
                     ", ".join(f"{tag} ({count})" for tag, count in sorted(report.omitted.items())))
    return "\n".join(lines)


def format_category_report(rows: Sequence[CategoryRow]) -> str:
    lines = [f"{'Category':<20}{'Count':>7}{'Avg pp':>10}{'Stdev':>10}{'Median':>10}"]
    for row in rows:
        stdev = f"{row.stdev:>10.2f}" if not math.isnan(row.stdev) else f"{'-':>10}"
        lines.append(f"{row.category:<20}{row.count:>7}{row.mean:>10.2f}{stdev}{row.median:>10.2f}")
    return "\n".join(lines)


def format_length_stats(stats: LengthStats) -> str:
    lines = [f"{stats.pairs} pairs", f"{'':<10}{'Mean':>8}{'Median':>8}{'Q1':>8}{'Q3':>8}"]
    for label, q in (("Methods", stats.method), ("Comments", stats.comment)):
        lines.append(f"{label:<10}{q.mean:>8.1f}{q.median:>8.1f}{q.q1:>8.1f}{q.q3:>8.1f}")
    return "\n".join(lines)


def _load_scores(wd: WorkDir, model: Optional[str], force: bool) -> List[ScoredSentence]:
    if not model:
        raise ConfigInvalid("this report needs --model NAME of a scored model")
    path = wd.report_path(f"scores.{Path(model).stem}", "jsonl")
    wd.check_inputs(path, force=force)
    _, records = read_records(path, "scores")
    return [ScoredSentence.from_record(r) for r in records]


def cmd_report(config: PipelineConfig, by: str, model: Optional[str] = None,
               labels: Optional[str] = None, force: bool = False) -> str:
    """Javadoc-element, category, or corpus length statistics table."""
    wd = WorkDir(config.work)
    if by == "stats":
        wd.check_inputs(wd.pairs_path, force=force)
        _, records = read_records(wd.pairs_path, "pairs")
        text = format_length_stats(stats_from_records(records))
    elif by == "javadoc":
        text = format_tag_report(javadoc_report(_load_scores(wd, model, force), config.min_count))
    elif by == "category":
        if not labels:
            raise ConfigInvalid("--by category needs --labels FILE")
        text = format_category_report(category_report(_load_scores(wd, model, force), load_labels(Path(labels))))
    else:
        raise ConfigInvalid(f"unknown report {by!r}")
    print(text)
    return text


def cmd_evaluate(config: PipelineConfig, models: Sequence[str], force: bool = False) -> Dict[str, Dict]:
    """One row of train/valid/test perplexity per checkpoint."""
    wd = WorkDir(config.work)
    corpus = load_corpus(wd, force)
    results = {}
    print(f"{'Model':<22}{'Train':>8}{'Valid':>8}{'Test':>8}{'Test xe':>9}")
    for model in models:
        path = _model_path(wd, model)
        wd.check_inputs(path, force=force)
        checkpoint = SaveSystem.load(path)
        pps = split_perplexities(checkpoint, corpus)
        xe = math.log2(pps["test"]) if pps["test"] else None
        results[path.stem] = {**pps, "test_cross_entropy": xe}
        xe_text = f"{xe:>9.3f}" if xe is not None else f"{'-':>9}"
        print(f"{path.stem:<22}{_fmt(pps['train'])}{_fmt(pps['valid'])}{_fmt(pps['test'])}{xe_text}")
    return results


def cmd_gradcheck(kind: str, hidden_size: int = 8, vocab_size: int = 20, seeds: int = 1,
                  num_layers: int = 1) -> List[GradientCheckResult]:
    """Central-difference gradient check on small random models."""
    model_kind = "seq2seq" if kind in ("s2s", "seq2seq") else kind
    results = []
    for seed in range(seeds):
        result = gradient_check(model_kind, hidden_size, vocab_size, vocab_size, seed=seed, num_layers=num_layers)
        results.append(result)
        if result.error:
            print(f"seed {seed}: {result.error}")
            continue
        status = "ok" if result.max_relative_error < GRADIENT_TOLERANCE else "FAIL"
        print(f"seed {seed}: max relative error {result.max_relative_error:.3e} over "
              f"{result.parameters} parameters [{status}]")
        for block, error in result.block_errors.items():
            logger.info("  %-28s %.3e", block, error)
    return results
