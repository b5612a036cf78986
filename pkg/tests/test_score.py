"""Per-sentence perplexity, ranking and the aggregate reports."""

import math

import pytest

from conftest import small_checkpoint, word_vocab
from errors import UnknownPairId, VocabMismatch, ZeroLength
from score import (NON_JAVADOC, RANKED_COLUMNS, ScoredSentence, Scorer, category_report, cross_entropy,
                   javadoc_report, lower_median, perplexity, rank_corpus, write_ranked_json, write_ranked_tsv)
from textprep import CommentSentence, MethodCommentPair


def scored(pair_id, pp, tag=None, inline=()):
    return ScoredSentence(pair_id=pair_id, sentence_tokens=["w"], javadoc_tag=tag, log_prob=-math.log(pp) * 2,
                          n_tokens=2, perplexity=pp, inline_tags=list(inline), text=f"sentence {pair_id}")


def make_pair(pair_id, words, method=("get", "name", "{", "return", "name", "}"), tag=None):
    return MethodCommentPair(pair_id=pair_id, method_tokens=list(method), signature_length=2,
                             sentence=CommentSentence(list(words), tag, text=" ".join(words)),
                             file="A.java", line=3 + pair_id)


class TestPerplexity:

    def test_uniform_model(self):
        assert perplexity(5 * math.log(1 / 50), 5) == pytest.approx(50.0)

    def test_certain_model(self):
        assert perplexity(0.0, 3) == 1.0

    def test_mixed_probabilities(self):
        assert perplexity(math.log(0.5) + math.log(0.125), 2) == pytest.approx(4.0)

    def test_cross_entropy_bits(self):
        assert cross_entropy(-2 * math.log(16), 2) == pytest.approx(4.0)
        log_prob = -3.7
        assert 2 ** cross_entropy(log_prob, 3) == pytest.approx(perplexity(log_prob, 3))

    def test_overflow_is_infinite(self):
        assert perplexity(-1e6, 2) == math.inf

    def test_zero_length(self):
        with pytest.raises(ZeroLength):
            perplexity(0.0, 0)
        with pytest.raises(ZeroLength):
            cross_entropy(0.0, 0)


class TestRanking:

    def test_ascending(self):
        ranked = rank_corpus([scored(1, 5.0), scored(2, 1.2), scored(3, 9.9)])
        assert [s.pair_id for s in ranked] == [2, 1, 3]
        assert [s.rank for s in ranked] == [1, 2, 3]

    def test_ties_by_pair_id(self):
        ranked = rank_corpus([scored(9, 2.0), scored(4, 2.0), scored(6, 1.0)])
        assert [s.pair_id for s in ranked] == [6, 4, 9]

    def test_report_tag_precedence(self):
        assert scored(1, 1.0, "@param", ["{@link}"]).report_tag == "@param"
        assert scored(1, 1.0, None, ["{@code}", "{@link}"]).report_tag == "{@code}"
        assert scored(1, 1.0).report_tag == NON_JAVADOC

    def test_record_round_trip_keeps_fields(self):
        s = scored(3, 2.5, "@return")
        assert ScoredSentence.from_record(s.to_record()) == s


class TestJavadocReport:

    @pytest.fixture
    def sentences(self):
        out = [scored(i, 2.0, "@param") for i in range(10)]
        out += [scored(10 + i, 4.0, "@return") for i in range(10)]
        out += [scored(20 + i, 8.0) for i in range(10)]
        return out

    def test_means(self, sentences):
        report = javadoc_report(sentences, min_count=5)
        assert [(r.tag, r.count) for r in report.rows] == [("@param", 10), ("@return", 10), (NON_JAVADOC, 10)]
        assert [r.avg_perplexity for r in report.rows] == [pytest.approx(2.0), pytest.approx(4.0),
                                                           pytest.approx(8.0)]

    def test_non_javadoc_last(self, sentences):
        sentences.append(scored(99, 3.0, "@throws"))
        assert javadoc_report(sentences, min_count=1).rows[-1].tag == NON_JAVADOC

    def test_rare_tags_omitted(self, sentences):
        sentences += [scored(40 + i, 1.0, "@since") for i in range(3)]
        report = javadoc_report(sentences, min_count=25)
        assert "@since" not in [r.tag for r in report.rows]
        assert report.omitted["@since"] == 3
        assert report.total == len(sentences)

    def test_non_javadoc_never_omitted(self):
        report = javadoc_report([scored(1, 3.0)], min_count=25)
        assert [r.tag for r in report.rows] == [NON_JAVADOC]


class TestCategoryReport:

    def test_statistics(self):
        report = category_report([scored(1, 1.0), scored(2, 3.0), scored(3, 7.0)], {1: "restate", 2: "restate"})
        (row,) = report
        assert row.count == 2
        assert row.mean == pytest.approx(2.0)
        assert row.stdev == pytest.approx(math.sqrt(2))
        assert row.median == 1.0

    def test_single_member_has_no_stdev(self):
        (row,) = category_report([scored(1, 4.0)], {1: "other"})
        assert math.isnan(row.stdev)

    def test_empty_labels(self):
        assert category_report([scored(1, 4.0)], {}) == []

    def test_unknown_pair(self):
        with pytest.raises(UnknownPairId):
            category_report([scored(1, 4.0)], {2: "restate"})

    def test_lower_median(self):
        assert lower_median([4.0, 1.0, 3.0, 2.0]) == 2.0
        assert lower_median([5.0, 1.0, 3.0]) == 3.0


class TestScorer:

    def test_zero_model_scores_vocab_size(self):
        checkpoint = small_checkpoint("seq2seq", vocab_size=10, method_vocab_size=12, zero=True)
        scorer = Scorer(checkpoint, word_vocab(6), word_vocab(8, "m"))
        s = scorer.score_pair(make_pair(1, ["w1", "w2", "zzz"]))
        assert s.n_tokens == 4
        assert s.perplexity == pytest.approx(10.0, rel=1e-6)
        assert s.unk_fraction == pytest.approx(1 / 3)

    def test_lm_ignores_method(self):
        scorer = Scorer(small_checkpoint("lm", vocab_size=10, seed=4), word_vocab(6))
        first = scorer.score_pair(make_pair(1, ["w0", "w3"]))
        second = scorer.score_pair(make_pair(1, ["w0", "w3"], method=("run", "{", "}")))
        assert first.perplexity == second.perplexity

    def test_batching_does_not_change_scores(self):
        scorer = Scorer(small_checkpoint("seq2seq", seed=5), word_vocab(6), word_vocab(8, "m"))
        pairs = [make_pair(i, ["w0", "w1", "w2"][:i + 1]) for i in range(3)]
        together = scorer.score_pairs(pairs, batch_size=3)
        alone = scorer.score_pairs(pairs, batch_size=1)
        assert [s.perplexity for s in together] == pytest.approx([s.perplexity for s in alone], rel=1e-9)

    def test_digest_mismatch(self):
        checkpoint = small_checkpoint("lm", vocab_size=10)
        checkpoint.vocab_refs = {"comment": word_vocab(6, "x").digest()}
        with pytest.raises(VocabMismatch):
            Scorer(checkpoint, word_vocab(6))

    def test_size_mismatch(self):
        with pytest.raises(VocabMismatch):
            Scorer(small_checkpoint("lm", vocab_size=10), word_vocab(3))

    def test_seq2seq_needs_method_vocab(self):
        with pytest.raises(VocabMismatch):
            Scorer(small_checkpoint("seq2seq"), word_vocab(6))


class TestRankedFiles:

    def test_tsv(self, tmp_path):
        ranked = rank_corpus([scored(1, 2.0, "@return"), scored(2, 1.5)])
        path = tmp_path / "ranked.tsv"
        write_ranked_tsv(ranked, path)
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0].split("\t") == RANKED_COLUMNS
        first = lines[1].split("\t")
        assert first[0] == "1" and first[1] == "1.500000" and first[4] == ""
        assert lines[2].split("\t")[4] == "@return"

    def test_json_lines(self, tmp_path):
        path = tmp_path / "ranked.json"
        write_ranked_json(rank_corpus([scored(1, 2.0), scored(2, 1.5)]), path)
        assert len(path.read_text(encoding="utf-8").splitlines()) == 2
