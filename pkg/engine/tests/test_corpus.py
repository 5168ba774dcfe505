import json
import os
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

# Add engine to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config import PrepConfig, SearchQuery, SpamConfig
from corpus import (
    DocumentRecord,
    drop_flagged,
    exclusion_report,
    filter_by_query,
    flag_spammers,
    load_corpus,
    normalize_group,
    partition_by_group,
    volume_baseline,
)
from errors import ConfigError, CorpusError


def doc(doc_id, text="some text", author="a1", group="customers", **extra):
    return DocumentRecord(id=doc_id, text=text, author_id=author, group=group, **extra)


def write_jsonl(path, rows):
    path.write_text("\n".join(r if isinstance(r, str) else json.dumps(r) for r in rows) + "\n", encoding="utf-8")
    return path


class TestLoadCorpus:
    def test_valid_jsonl(self, tmp_path):
        path = write_jsonl(tmp_path / "c.jsonl", [
            {"id": "t1", "text": "one", "author_id": "a", "group": "customers"},
            {"id": "t2", "text": "two", "author_id": "b", "group": "media"},
            {"id": "t3", "text": "three", "author_id": "c", "group": "employees"},
        ])
        loaded = load_corpus(path)
        assert len(loaded.records) == 3
        assert loaded.rejected == 0
        assert loaded.total_rows == 3

    def test_row_missing_text_is_rejected(self, tmp_path):
        path = write_jsonl(tmp_path / "c.jsonl", [
            {"id": "t1", "text": "one", "author_id": "a", "group": "customers"},
            {"id": "t2", "author_id": "b", "group": "media"},
            {"id": "t3", "text": "three", "author_id": "c", "group": "employees"},
        ])
        loaded = load_corpus(path)
        assert [r.id for r in loaded.records] == ["t1", "t3"]
        assert loaded.rejected == 1
        assert "line 2" in loaded.reject_reasons[0]

    def test_invalid_json_and_blank_text_are_counted(self, tmp_path):
        path = write_jsonl(tmp_path / "c.jsonl", [
            "{not json",
            {"id": "t2", "text": "   ", "author_id": "b", "group": "media"},
            {"id": "t3", "text": "ok", "author_id": "c", "group": "media"},
        ])
        loaded = load_corpus(path)
        assert loaded.rejected == 2
        assert loaded.total_rows == 3

    def test_duplicate_id_is_fatal(self, tmp_path):
        path = write_jsonl(tmp_path / "c.jsonl", [
            {"id": "t1", "text": "one", "author_id": "a", "group": "customers"},
            {"id": "t1", "text": "two", "author_id": "b", "group": "media"},
        ])
        with pytest.raises(CorpusError, match="duplicate"):
            load_corpus(path)

    def test_csv_with_optional_columns(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text(
            "id,text,author_id,group,followers,following,mentions_received,timestamp\n"
            "t1,\"hello, world\",a,Communication Teams,10,20,,2019-03-01T10:00:00\n"
            "t2,second,b,media,,,3,\n",
            encoding="utf-8",
        )
        loaded = load_corpus(path)
        assert [r.group for r in loaded.records] == ["communication_teams", "media"]
        assert loaded.records[0].text == "hello, world"
        assert loaded.records[0].followers == 10
        assert loaded.records[1].mentions_received == 3
        assert loaded.records[1].timestamp is None

    def test_csv_missing_required_column(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("id,text,group\nt1,hello,media\n", encoding="utf-8")
        with pytest.raises(CorpusError, match="author_id"):
            load_corpus(path)

    def test_unknown_format_and_missing_file(self, tmp_path):
        with pytest.raises(CorpusError, match="unsupported"):
            load_corpus(tmp_path / "c.txt")
        with pytest.raises(CorpusError, match="not found"):
            load_corpus(tmp_path / "absent.jsonl")


class TestGroups:
    def test_normalize_group(self):
        assert normalize_group("Communication Teams") == "communication_teams"
        assert normalize_group("communication-teams") == "communication_teams"
        assert normalize_group(" MEDIA ") == "media"

    def test_partition_sizes(self):
        docs = [doc(f"c{i}", group="customers") for i in range(3)] + [doc(f"m{i}", group="media") for i in range(2)]
        partition = partition_by_group(docs)
        assert list(partition) == ["customers", "media", "overall"]
        assert {k: len(v) for k, v in partition.items()} == {"customers": 3, "media": 2, "overall": 5}

    def test_partition_empty(self):
        assert partition_by_group([]) == {"overall": []}

    def test_partition_merges_case_variants(self):
        partition = partition_by_group([doc("1", group="Media"), doc("2", group="media")])
        assert len(partition["media"]) == 2

    def test_partition_property(self):
        docs = [doc(str(i), group=g) for i, g in enumerate(["media", "customers", "employees", "media", "associations"])]
        partition = partition_by_group(docs)
        assert sum(len(v) for k, v in partition.items() if k != "overall") == len(docs)
        assert len(partition["overall"]) == len(docs)


class TestQueryFilter:
    @pytest.fixture
    def prep(self):
        return PrepConfig(language="english")

    @pytest.fixture
    def query(self):
        return SearchQuery(concept_terms=("service quality",), context_terms=("company",))

    def test_both_present_kept(self, prep, query):
        docs = [doc("1", "service quality at this company is great")]
        assert len(filter_by_query(docs, query, prep)) == 1

    def test_context_absent_dropped(self, prep, query):
        docs = [doc("1", "service quality is great")]
        assert filter_by_query(docs, query, prep) == []

    def test_case_insensitive(self, prep, query):
        docs = [doc("1", "COMPANY improves Service Quality")]
        assert len(filter_by_query(docs, query, prep)) == 1

    def test_phrase_must_be_contiguous(self, prep, query):
        docs = [doc("1", "quality of the service at the company")]
        assert filter_by_query(docs, query, prep) == []

    def test_context_filter_disabled(self, prep):
        query = SearchQuery(concept_terms=("service quality",), context_filter=False)
        docs = [doc("1", "service quality is great")]
        assert len(filter_by_query(docs, query, prep)) == 1

    def test_inactive_query_is_config_error(self, prep):
        with pytest.raises(ConfigError):
            filter_by_query([], SearchQuery(concept_terms=("x",)), prep)
        with pytest.raises(ConfigError):
            filter_by_query([], SearchQuery(), prep)


class TestSpamFilter:
    @pytest.fixture
    def corpus(self):
        # one heavy author among nine single-post authors: population z = 3.0
        docs = [doc(f"s{i}", author="bot", followers=10, following=5000) for i in range(10)]
        docs += [doc(f"h{i}", author=f"user{i}", followers=100, following=100, mentions_received=4) for i in range(9)]
        return docs

    def test_heavy_unmentioned_author_flagged(self, corpus):
        verdicts = {v.author_id: v for v in flag_spammers(corpus, SpamConfig())}
        bot = verdicts["bot"]
        assert bot.flagged
        assert bot.tweet_volume_z == pytest.approx(3.0)
        assert bot.follow_ratio == pytest.approx(500.0)
        assert not any(v.flagged for a, v in verdicts.items() if a != "bot")

    def test_mentioned_author_not_flagged(self, corpus):
        corpus = corpus + [doc("x", author="bot", mentions_received=40)]
        verdicts = {v.author_id: v for v in flag_spammers(corpus, SpamConfig())}
        assert not verdicts["bot"].flagged

    def test_single_author_never_flagged(self):
        docs = [doc(str(i), author="solo", following=5000, followers=1) for i in range(50)]
        verdicts = flag_spammers(docs, SpamConfig())
        assert len(verdicts) == 1
        assert not verdicts[0].flagged

    def test_verdicts_sorted_and_drop(self, corpus):
        verdicts = flag_spammers(corpus, SpamConfig())
        assert [v.author_id for v in verdicts] == sorted(v.author_id for v in verdicts)
        kept = drop_flagged(corpus, verdicts)
        assert len(kept) == 9
        assert all(d.author_id != "bot" for d in kept)

    def test_exclusion_report(self):
        report = exclusion_report(total=1000, kept=990, rejected=6, spam_flagged=4)
        assert report == {"total": 1000, "kept": 990, "rejected": 6, "spam_flagged": 4, "spam_share": 0.004}
        assert exclusion_report(0, 0, 0, 0)["spam_share"] == 0.0

    def test_baseline_freezes_volume_statistics(self, corpus):
        baseline = volume_baseline(corpus)
        assert baseline.authors == 10
        remaining = drop_flagged(corpus, flag_spammers(corpus, SpamConfig()))
        frozen = {v.author_id: v.tweet_volume_z for v in flag_spammers(remaining, SpamConfig(), baseline)}
        assert frozen["user0"] == pytest.approx((1 - baseline.mean) / baseline.sd)


QUERY_WORDS = ["service", "quality", "company", "brand", "water", "safety"]
PHRASES = st.lists(st.sampled_from(QUERY_WORDS), min_size=1, max_size=2).map(" ".join)


class TestFilterProperties:
    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(st.lists(st.sampled_from(QUERY_WORDS), min_size=1, max_size=6).map(" ".join), min_size=1, max_size=10),
        st.lists(PHRASES, min_size=1, max_size=3),
        PHRASES,
        st.lists(PHRASES, min_size=1, max_size=2),
    )
    def test_extra_concept_term_never_shrinks_kept_set(self, texts, concepts, extra, contexts):
        prep = PrepConfig(language="english")
        docs = [doc(str(i), text) for i, text in enumerate(texts)]
        narrow = SearchQuery(concept_terms=tuple(concepts), context_terms=tuple(contexts))
        wide = SearchQuery(concept_terms=tuple(concepts) + (extra,), context_terms=tuple(contexts))
        kept = {d.id for d in filter_by_query(docs, narrow, prep)}
        assert kept <= {d.id for d in filter_by_query(docs, wide, prep)}

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(
            st.tuples(
                st.sampled_from([f"u{i}" for i in range(6)]),
                st.integers(min_value=0, max_value=50),
                st.integers(min_value=0, max_value=5000),
                st.integers(min_value=0, max_value=2),
            ),
            min_size=2,
            max_size=60,
        )
    )
    def test_dropping_spammers_flags_nobody_new_at_fixed_thresholds(self, rows):
        docs = [
            doc(f"d{i}", author=author, followers=followers, following=following, mentions_received=mentions)
            for i, (author, followers, following, mentions) in enumerate(rows)
        ]
        cfg = SpamConfig(z_min=1.0)
        first = {v.author_id: v for v in flag_spammers(docs, cfg)}
        again = flag_spammers(drop_flagged(docs, list(first.values())), cfg, volume_baseline(docs))
        for verdict in again:
            assert not verdict.flagged
            assert verdict.tweet_volume_z == pytest.approx(first[verdict.author_id].tweet_volume_z)
