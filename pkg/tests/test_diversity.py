import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vmtlab.corpus import CorpusRecord
from vmtlab.diversity import (
    CategoryVote,
    NgramProfile,
    lexicon_tagger,
    ngram_profile,
    normalize_tokens,
    pos_profile,
    vote_category,
)
from vmtlab.errors import DataError


class TestNormalize:
    def test_lowercase_and_punct(self):
        assert normalize_tokens("Hello, World!") == ["hello", "world"]

    def test_keep_case(self):
        assert normalize_tokens("Hello World", lowercase=False) == ["Hello", "World"]

    def test_keep_punct(self):
        assert normalize_tokens("a, b", strip_punct=False) == ["a,", "b"]

    def test_digits_survive(self):
        assert normalize_tokens("room 101") == ["room", "101"]


class TestNgramProfile:
    def test_counts(self):
        profile = ngram_profile(["the cat sat", "the cat ran"], n_max=2)
        assert profile.total_count(1) == 6
        assert profile.unique_count(1) == 4
        assert profile.total_count(2) == 4
        assert profile.unique_count(2) == 3  # (the,cat) twice

    def test_short_text_has_no_high_order_grams(self):
        profile = ngram_profile(["word"], n_max=4)
        assert profile.total_count(1) == 1
        for n in (2, 3, 4):
            assert profile.total_count(n) == 0

    def test_report_shape(self):
        report = ngram_profile(["a b"], n_max=3).report()
        assert set(report) == {"1", "2", "3"}
        assert report["1"] == {"unique": 2, "total": 2}

    def test_merge_n_max_mismatch(self):
        with pytest.raises(ValueError):
            NgramProfile(2).merge(NgramProfile(3))


texts_strategy = st.lists(
    st.text(alphabet="abc ", min_size=0, max_size=20), min_size=0, max_size=6
)


@given(left=texts_strategy, right=texts_strategy)
@settings(max_examples=100, deadline=None)
def test_merge_equals_profile_of_concatenation(left, right):
    merged = ngram_profile(left, n_max=3).merge(ngram_profile(right, n_max=3))
    combined = ngram_profile(left + right, n_max=3)
    for n in (1, 2, 3):
        assert merged.counters[n] == combined.counters[n]


class TestPosProfile:
    def test_stub_lexicon_counts_types_not_tokens(self):
        texts = ["The dog can run", "run dog run", "a very big dog"]
        counts = pos_profile(texts)
        assert counts == {"verb": 1, "noun": 1, "adjective": 1, "adverb": 1}

    def test_unknown_words_ignored(self):
        assert pos_profile(["zzz qqq"]) == {
            "verb": 0, "noun": 0, "adjective": 0, "adverb": 0,
        }

    def test_tagger_is_pluggable(self):
        counts = pos_profile(["x y z"], tagger=lambda tok: "noun")
        assert counts["noun"] == 3

    def test_lexicon_tagger_fallback(self):
        assert lexicon_tagger("run") == "verb"
        assert lexicon_tagger("xylophone") == "other"


def _rec(i, src):
    return CorpusRecord(id=f"r{i}", video_id="v", clip_start_ms=i, clip_end_ms=i + 1,
                        src=src, tgt="t")


class TestVoteCategory:
    def test_majority_over_groups_of_five(self):
        records = [_rec(i, "music" if i < 10 else "news") for i in range(15)]
        labeler = lambda group: group[0]
        vote = vote_category(records, labeler, group_size=5)
        assert vote.group_labels == ("music", "music", "news")
        assert vote.winner == "music"

    def test_tie_goes_to_earliest_group(self):
        records = [_rec(i, "b" if i < 5 else "a") for i in range(10)]
        vote = vote_category(records, lambda g: g[0], group_size=5)
        assert vote.group_labels == ("b", "a")
        assert vote.winner == "b"

    def test_trailing_partial_group_still_votes(self):
        records = [_rec(i, "x") for i in range(7)]
        vote = vote_category(records, lambda g: f"n{len(g)}", group_size=5)
        assert vote.group_labels == ("n5", "n2")

    def test_empty_errors(self):
        with pytest.raises(DataError, match="no subtitles"):
            vote_category([], lambda g: "x")

    def test_bad_group_size(self):
        with pytest.raises(ValueError):
            vote_category([_rec(0, "a")], lambda g: "x", group_size=0)
