import io

import pytest

from vmtlab.errors import DataError
from vmtlab.metrics.terms import (
    EvalPair,
    TermAnnotation,
    evaluate,
    exact_match,
    find_subsequence,
    load_annotations,
    load_eval_pairs,
    load_stopwords,
    reference_term_positions,
    window_overlap,
)
from vmtlab.metrics.tokenizers import tokenize


def ann(variants, rid="r", src=("term",)):
    return TermAnnotation(
        record_id=rid, src_term=tuple(src),
        tgt_variants=tuple(tuple(v) for v in variants),
    )


def pair(hyp, ref, annotations=(), rid="r"):
    return EvalPair(
        record_id=rid,
        hyp_tokens=tuple(hyp.split()),
        ref_tokens=tuple(ref.split()),
        annotations=tuple(annotations),
    )


class TestAnnotation:
    def test_requires_variants(self):
        with pytest.raises(DataError, match="no target variants"):
            TermAnnotation("r", ("x",), ())

    def test_rejects_empty_variant(self):
        with pytest.raises(DataError, match="empty variant"):
            TermAnnotation("r", ("x",), ((),))


class TestFindSubsequence:
    def test_first_occurrence(self):
        assert find_subsequence(["a", "b", "a", "b"], ["a", "b"]) == 0
        assert find_subsequence(["a", "b", "a", "b"], ["a", "b"], start=1) == 2

    def test_absent(self):
        assert find_subsequence(["a", "b"], ["b", "a"]) == -1

    def test_empty_needle_never_matches(self):
        assert find_subsequence(["a"], []) == -1


class TestExactMatch:
    def test_counts_matched_terms(self):
        pairs = [
            pair("the red pill", "the red pill", [ann([("red",)])]),
            pair("the blue pill", "the red pill", [ann([("red",)])]),
        ]
        rate, outcomes = exact_match(pairs)
        assert rate == 0.5
        assert [o["matched"] for o in outcomes] == [True, False]

    def test_any_variant_counts(self):
        p = pair("take the lift up", "take the elevator up",
                 [ann([("elevator",), ("lift",)])])
        rate, _ = exact_match([p])
        assert rate == 1.0

    def test_multiword_variant(self):
        p = pair("a hot dog here", "a hot dog here", [ann([("hot", "dog")])])
        assert exact_match([p])[0] == 1.0

    def test_no_terms_errors(self):
        with pytest.raises(DataError, match="no terms"):
            exact_match([pair("a", "a")])


class TestWindowOverlap:
    def test_absent_term_scores_zero(self):
        p = pair("no match here", "the red pill", [ann([("red",)])])
        rate, _ = window_overlap([p], 2)
        assert rate == 0.0

    def test_identical_context_scores_one(self):
        p = pair("take the red pill now", "take the red pill now",
                 [ann([("red",)])])
        rate, _ = window_overlap([p], 2)
        assert rate == 1.0

    def test_denominator_is_reference_window(self):
        # hyp window around "red": {take, pill}; ref window capped at 2 per
        # side: {take} + {pill, now}.  Intersection 2 over the reference
        # window size 3.
        p = pair("take red pill", "take red pill now friend",
                 [ann([("red",)])])
        rate, _ = window_overlap([p], 2)
        assert rate == pytest.approx(2 / 3)

    def test_stopwords_excluded_from_windows(self):
        p = pair("the red pill", "a red pill", [ann([("red",)])])
        with_stop = window_overlap([p], 2, frozenset({"the", "a"}))[0]
        without = window_overlap([p], 2)[0]
        assert with_stop == 1.0  # both windows reduce to {pill}
        assert without == pytest.approx(1 / 2)

    def test_window_is_multiset(self):
        p = pair("b b red b b", "b b red b b", [ann([("red",)])])
        rate, _ = window_overlap([p], 2)
        assert rate == 1.0


class TestReferencePositions:
    def test_all_occurrences_covered(self):
        p = pair("x", "red fish and red meat", [ann([("red",)])])
        assert reference_term_positions(p) == {0, 3}

    def test_multiword_span(self):
        p = pair("x", "a hot dog here", [ann([("hot", "dog")])])
        assert reference_term_positions(p) == {1, 2}

    def test_variant_absent_from_reference(self):
        p = pair("x", "a b c", [ann([("zz",)])])
        assert reference_term_positions(p) == set()


class TestEvaluate:
    def test_unannotated_corpus_reports_bleu_only(self):
        report = evaluate([pair("a b c d", "a b c d")])
        assert report.bleu.bleu == 100.0
        assert report.term_scores is None

    def test_identity_with_terms(self):
        p = pair("take the red pill now", "take the red pill now",
                 [ann([("red",)])])
        report = evaluate([p])
        scores = report.term_scores
        assert scores.exact_match == 1.0
        assert scores.window_overlap_2 == 1.0
        assert scores.window_overlap_3 == 1.0
        assert scores.one_minus_term == 1.0
        assert scores.counts == {"pairs": 1, "terms": 1, "correct_terms": 1}

    def test_one_minus_term_is_mean_over_pairs(self):
        good = pair("a b", "a b", [ann([("a",)])], rid="g")
        bad = pair("x y", "a b", [ann([("a",)])], rid="b")
        report = evaluate([good, bad])
        # good pair rate 0; bad pair: sub a (cost 2) + sub b (cost 1) over
        # normalizer 3 -> rate 1, one_minus 0.
        assert report.term_scores.one_minus_term == pytest.approx(0.5)

    def test_per_record_breakdown(self):
        p = pair("take the red pill now", "take the red pill now",
                 [ann([("red",)])], rid="r9")
        report = evaluate([p], per_record=True)
        assert report.per_record[0]["record_id"] == "r9"
        assert report.per_record[0]["terms"][0]["exact"] is True

    def test_empty_corpus(self):
        with pytest.raises(DataError, match="empty corpus"):
            evaluate([])

    def test_shiftless_route_plumbed_through(self):
        p = pair("b a", "a b", [ann([("a",)])])
        with_shifts = evaluate([p], shifts=True).term_scores.one_minus_term
        without = evaluate([p], shifts=False).term_scores.one_minus_term
        assert with_shifts >= without


class TestLoaders:
    def test_annotations_string_and_list_forms(self):
        stream = io.StringIO(
            '{"record_id": "r1", "src_term": "big term", "tgt_variants": ["x y", "z"]}\n'
            '{"record_id": "r1", "src_term": ["t2"], "tgt_variants": [["q"]]}\n'
        )
        by_record = load_annotations(stream)
        assert len(by_record["r1"]) == 2
        assert by_record["r1"][0].tgt_variants == (("x", "y"), ("z",))
        assert by_record["r1"][1].src_term == ("t2",)

    def test_annotation_bad_json_names_line(self):
        with pytest.raises(DataError, match="line 2"):
            load_annotations(io.StringIO('{"record_id": "r", "tgt_variants": ["x"]}\n{oops\n'))

    def test_annotation_missing_fields(self):
        with pytest.raises(DataError, match="record_id"):
            load_annotations(io.StringIO('{"tgt_variants": ["x"]}\n'))

    def test_annotation_empty_variant_list(self):
        with pytest.raises(DataError, match="non-empty"):
            load_annotations(io.StringIO('{"record_id": "r", "tgt_variants": []}\n'))

    def test_eval_pairs_tokenize_and_attach(self):
        anns = {"r1": [ann([("b",)], rid="r1")]}
        pairs = load_eval_pairs(
            io.StringIO('{"record_id": "r1", "hyp": "a b", "ref": "a b"}\n'),
            tokenize, anns,
        )
        assert pairs[0].hyp_tokens == ("a", "b")
        assert len(pairs[0].annotations) == 1

    def test_eval_pairs_missing_field(self):
        with pytest.raises(DataError, match="'ref'"):
            load_eval_pairs(io.StringIO('{"record_id": "r", "hyp": "a"}\n'), tokenize)

    def test_blank_lines_skipped(self):
        pairs = load_eval_pairs(
            io.StringIO('\n{"record_id": "r", "hyp": "a", "ref": "a"}\n\n'), tokenize)
        assert len(pairs) == 1


class TestStopwords:
    def test_bundled_lists_exist(self):
        en = load_stopwords(lang="en")
        zh = load_stopwords(lang="zh")
        assert "the" in en
        assert "的" in zh
        assert load_stopwords() == en | zh

    def test_file_overrides_bundled(self, tmp_path):
        path = tmp_path / "stop.txt"
        path.write_text("foo\nbar\n\n", encoding="utf-8")
        assert load_stopwords(path=str(path)) == {"foo", "bar"}

    def test_unknown_lang(self):
        with pytest.raises(ValueError):
            load_stopwords(lang="fr")
