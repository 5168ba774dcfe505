import os
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

# Add engine to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config import ConceptCluster, PrepConfig
from corpus import DocumentRecord
from errors import ConfigError
from textprep import (
    NgramVocabulary,
    Token,
    build_vocabulary,
    detect_ngrams,
    merge_ngrams,
    normalize_phrase,
    preprocess,
    remove_stopwords,
    stem,
    stem_clusters,
    stopword_set,
    tokenize,
)


def doc(doc_id, text):
    return DocumentRecord(id=doc_id, text=text, author_id="a", group="customers")


def terms(tokens):
    return [t.term for t in tokens]


def toks(*words):
    return [Token(w, i, i + 1) for i, w in enumerate(words)]


NGRAM_WORDS = ["the", "of", "and", "service", "quality", "water", "brand"]


@pytest.fixture
def english():
    return PrepConfig(language="english", ngram_min_count=5)


class TestTokenize:
    def test_punctuation_and_case(self, english):
        assert terms(tokenize("We are honest, ethical, and trustworthy!", english)) == [
            "we", "are", "honest", "ethical", "and", "trustworthy",
        ]

    def test_urls_mentions_hashtags(self, english):
        assert terms(tokenize("Visit https://x.y #acqua @user", english)) == ["visit", "acqua"]

    def test_hashtag_body_can_be_dropped(self):
        cfg = PrepConfig(language="english", keep_hashtag_body=False)
        assert terms(tokenize("Visit #acqua", cfg)) == ["visit"]

    def test_mentions_kept_when_configured(self):
        cfg = PrepConfig(language="english", strip_mentions=False)
        assert terms(tokenize("thanks @TeamLead", cfg)) == ["thanks", "teamlead"]

    def test_empty(self, english):
        assert tokenize("", english) == []

    def test_spans_point_into_text(self, english):
        text = "Qualità del servizio"
        for token in tokenize(text, english):
            assert text[token.start:token.end].lower() == token.term

    @settings(max_examples=300, deadline=None)
    @given(st.text())
    def test_idempotent_normalization(self, text):
        cfg = PrepConfig(language="english")
        once = terms(tokenize(text, cfg))
        assert terms(tokenize(" ".join(once), cfg)) == once

    def test_dotted_capital_i(self, english):
        once = terms(tokenize("İstanbul office", english))
        assert once == ["istanbul", "office"]
        assert terms(tokenize(" ".join(once), english)) == once


class TestStopwords:
    def test_configured_list(self):
        cfg = PrepConfig(language="english", stopwords=("we", "are"))
        assert remove_stopwords(["we", "are", "honest"], cfg) == ["honest"]

    def test_empty_custom_list_is_identity(self):
        cfg = PrepConfig(language="english", stopwords=())
        assert remove_stopwords(["honest"], cfg) == ["honest"]

    def test_all_stopwords(self, english):
        assert remove_stopwords(["the", "and", "of"], english) == []

    def test_extra_stopwords_extend_shipped_list(self):
        cfg = PrepConfig(language="english", extra_stopwords=("honest",))
        assert remove_stopwords(["the", "honest", "firm"], cfg) == ["firm"]

    def test_unknown_language_list(self):
        cfg = PrepConfig(language="klingon")
        with pytest.raises(ConfigError):
            remove_stopwords(["x"], cfg)


class TestNgrams:
    def test_bigram_over_threshold(self, english):
        streams = [["service", "quality"]] * 7
        vocab = detect_ngrams(streams, english)
        assert ("service", "quality") in vocab
        assert vocab.counts[("service", "quality")] == 7

    def test_bigram_below_threshold(self, english):
        vocab = detect_ngrams([["service", "quality"]] * 3, english)
        assert ("service", "quality") not in vocab

    def test_unigram_mode_detects_nothing(self):
        cfg = PrepConfig(language="english", ngram_max=1)
        assert len(detect_ngrams([["service", "quality"]] * 9, cfg)) == 0

    def test_leftmost_longest_tiling(self):
        vocab = NgramVocabulary({("product", "service"): 5, ("service", "quality"): 9})
        merged = merge_ngrams(toks("product", "service", "quality"), vocab)
        assert terms(merged) == ["product_service", "quality"]

    def test_longest_match_wins(self):
        vocab = NgramVocabulary({("product", "service"): 5, ("product", "service", "quality"): 5})
        merged = merge_ngrams(toks("product", "service", "quality", "now"), vocab)
        assert terms(merged) == ["product_service_quality", "now"]
        assert (merged[0].start, merged[0].end) == (0, 3)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.lists(st.sampled_from(NGRAM_WORDS), max_size=10), min_size=1, max_size=12))
    def test_merge_never_grows_or_joins_stopwords(self, docs):
        cfg = PrepConfig(language="english", ngram_min_count=2)
        stops = stopword_set(cfg)
        streams = [remove_stopwords(toks(*words), cfg) for words in docs]
        vocab = detect_ngrams(streams, cfg)
        for tokens in streams:
            merged = merge_ngrams(tokens, vocab)
            assert len(merged) <= len(tokens)
            assert not any(set(t.term.split("_")) & stops for t in merged)

    def test_counts_after_stopword_removal(self, english):
        docs = [doc(str(i), "the quality of the service") for i in range(5)]
        vocab = build_vocabulary(docs, english)
        assert ("quality", "service") in vocab

    def test_cluster_phrases_are_forced(self, english):
        clusters = [ConceptCluster(orientation="customers", keywords=("service quality", "safety"))]
        vocab = build_vocabulary([doc("1", "service quality once")], english, clusters)
        assert ("service", "quality") in vocab
        stream = preprocess(doc("1", "service quality once"), english, vocab)
        assert stream.terms[0] == normalize_phrase("service quality", english)

    def test_vocabulary_rows_sorted(self):
        vocab = NgramVocabulary({("b", "c"): 5, ("a", "b"): 5, ("x", "y"): 9})
        assert vocab.rows() == [("x_y", 9), ("a_b", 5), ("b_c", 5)]


class TestStem:
    def test_reference_vectors(self):
        assert stem("responsabilità", "italian") == "responsabil"
        assert stem("acqua", "italian") == "acqua"
        assert stem("running", "english") == "run"

    def test_ngram_stemmed_component_wise(self):
        assert stem("service_quality", "english") == f"{stem('service', 'english')}_{stem('quality', 'english')}"

    def test_unsupported_language(self):
        with pytest.raises(ConfigError, match="unsupported"):
            stem("word", "klingon")


class TestPreprocess:
    def test_matches_composed_stages(self):
        cfg = PrepConfig()
        text = "La qualità del servizio è ottima"
        content = [t for t in remove_stopwords(tokenize(text, cfg), cfg) if len(t.term) >= cfg.min_token_len]
        expected = [stem(t.term, cfg.language) for t in merge_ngrams(content, NgramVocabulary())]

        stream = preprocess(doc("1", text), cfg, NgramVocabulary())
        assert stream.terms == expected
        assert stream.terms == [stem(w, "italian") for w in ("qualità", "servizio", "ottima")]
        assert stream.word_count == 6

    def test_url_only_document(self, english):
        stream = preprocess(doc("1", "https://example.com/x"), english, NgramVocabulary())
        assert stream.terms == []
        assert stream.word_count == 0

    def test_deterministic(self, english):
        d = doc("1", "Teamwork and career growth at the company")
        assert preprocess(d, english, NgramVocabulary()) == preprocess(d, english, NgramVocabulary())

    def test_aurora(self, english):
        stream = preprocess(doc("1", "aurora is beautiful"), english, NgramVocabulary())
        assert stream.terms == ["aurora", "beauti"]


class TestClusters:
    def test_keywords_stemmed_and_deduplicated(self, english):
        clusters = [ConceptCluster(orientation="employees", keywords=("Careers", "career", "fair treatment"))]
        stemmed = stem_clusters(clusters, english)
        assert stemmed[0].orientation == "employees"
        assert stemmed[0].keywords == tuple(sorted({stem("career", "english"), normalize_phrase("fair treatment", english)}))

    def test_cluster_of_stopwords_only(self, english):
        clusters = [ConceptCluster(orientation="empty", keywords=("the", "and"))]
        with pytest.raises(ConfigError, match="no usable keywords"):
            stem_clusters(clusters, english)
