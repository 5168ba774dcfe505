import os
import sys

import pytest

# Add engine to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from errors import TableFormatError
from reports import (
    EXCLUDED_SPAM,
    GroupStats,
    ReportBundle,
    build_importance_table,
    build_sample_table,
    group_order,
    importance_frame,
    load_report_tables,
    parse_csv_table,
    read_importance_grid,
    read_sample_stats,
    read_scores,
    render,
    render_csv,
    report_schema,
    write_sample_stats,
    write_scores,
)
from scoring import SbsResult
from sentiment import ALL_ORIENTATIONS, SentimentSummary


def result(group, orientation, share):
    return SbsResult(
        group=group, orientation=orientation,
        prevalence=1.0, diversity=0.5, connectivity=0.25,
        z_prevalence=0.1, z_diversity=-0.2, z_connectivity=0.3, sbs=0.2,
        share_prevalence=share, share_diversity=share, share_connectivity=share, share_sbs=share,
    )


@pytest.fixture
def results():
    return [
        result("media", "customers", 62.5), result("media", "employees", 37.5),
        result("customers", "customers", 55.0), result("customers", "employees", 45.0),
        result("overall", "customers", 58.123), result("overall", "employees", 41.877),
    ]


@pytest.fixture
def summaries():
    return [
        SentimentSummary(group="media", orientation="customers", n=3, mean=0.125, sd=0.01),
        SentimentSummary(group="media", orientation="employees", n=0),
        SentimentSummary(group="media", orientation=ALL_ORIENTATIONS, n=3, mean=0.125, sd=0.01),
    ]


class TestLayout:
    def test_group_order_puts_overall_last(self):
        assert group_order(["overall", "media", "customers", "media"]) == ["customers", "media", "overall"]

    def test_importance_frame(self, results):
        frame = importance_frame(results, ["customers", "employees"])
        assert list(frame.columns) == ["measure", "orientation", "customers", "media", "overall"]
        assert len(frame) == 8
        assert frame.iloc[0].tolist() == ["Semantic Brand Score", "customers", 55.0, 62.5, 58.123]

    def test_markdown_columns(self, results, summaries):
        table = build_importance_table(results, summaries)
        text = render([table], "markdown")
        assert "| measure | orientation | customers | media | overall |" in text
        assert "| Semantic Brand Score | customers | 55.00 | 62.50 | 58.12 |" in text
        assert "| Sentiment | customers | NA | 0.125 | NA |" in text
        assert "| Sentiment | employees | NA | NA | NA |" in text

    def test_unknown_format(self, results):
        with pytest.raises(ValueError):
            render([build_importance_table(results)], "xml")


class TestRoundTrips:
    def test_csv_render_round_trips(self, results, summaries):
        table = build_importance_table(results, summaries)
        parsed = parse_csv_table(render_csv(table), table.title, len(table.row_header))
        assert parsed == table

    def test_json_render_validates(self, results):
        text = render([build_importance_table(results), build_sample_table([])], "json")
        bundle = ReportBundle.model_validate_json(text)
        assert [t.title for t in bundle.tables] == ["Importance of core value orientations (%)", "Sample statistics"]
        assert "tables" in report_schema()["properties"]

    def test_scores_artifact(self, tmp_path, results):
        write_scores(results, tmp_path / "scores.csv")
        loaded = read_scores(tmp_path / "scores.csv")
        assert [(r.group, r.orientation) for r in loaded] == [(r.group, r.orientation) for r in results]
        assert loaded[4].share_sbs == pytest.approx(58.123, abs=1e-6)

    def test_sample_stats_artifact(self, tmp_path):
        stats = [
            GroupStats(group="media", documents=4, volume_pct=80.0, length_mean=6.5, length_sd=1.5,
                       sentiment_mean=0.2, sentiment_sd=0.1),
            GroupStats(group=EXCLUDED_SPAM, documents=1, volume_pct=20.0, length_mean=3.0, length_sd=0.0),
        ]
        write_sample_stats(stats, tmp_path / "sample_stats.csv")
        loaded = read_sample_stats(tmp_path / "sample_stats.csv")
        assert loaded[1].sentiment_mean is None
        table = build_sample_table(loaded)
        assert table.cells[0] == ["4", "80.00", "6.50 (1.50)", "0.200 (0.100)"]
        assert table.cells[1][-1] == "NA"

    def test_missing_artifact_names_file(self, tmp_path):
        with pytest.raises(FileNotFoundError, match="sample_stats.csv"):
            load_report_tables(tmp_path)

    def test_malformed_artifacts_name_file(self, tmp_path):
        path = tmp_path / "sample_stats.csv"
        path.write_text("group,documents\nmedia,many\n", encoding="utf-8")
        with pytest.raises(TableFormatError, match="sample_stats.csv"):
            read_sample_stats(path)
        path.write_text('group,documents\n"media,4\n', encoding="utf-8")
        with pytest.raises(TableFormatError, match="sample_stats.csv"):
            read_sample_stats(path)
        path.write_text("", encoding="utf-8")
        with pytest.raises(TableFormatError, match="unreadable"):
            read_sample_stats(path)


class TestImportanceGrid:
    def test_blank_measure_continues_block(self, tmp_path):
        path = tmp_path / "grid.csv"
        path.write_text("measure,orientation,media\nPrevalence,A,60%\n,B,40\n", encoding="utf-8")
        assert read_importance_grid(path) == {"prevalence": {"A": {"media": 60.0}, "B": {"media": 40.0}}}

    def test_duplicate_rows(self, tmp_path):
        path = tmp_path / "grid.csv"
        path.write_text("measure,orientation,media\nPrevalence,A,60%\n,A,40%\n", encoding="utf-8")
        with pytest.raises(TableFormatError, match="duplicate"):
            read_importance_grid(path)

    def test_unknown_measure(self, tmp_path):
        path = tmp_path / "grid.csv"
        path.write_text("measure,orientation,media\nPopularity,A,60%\n", encoding="utf-8")
        with pytest.raises(TableFormatError, match="unknown measure"):
            read_importance_grid(path)
