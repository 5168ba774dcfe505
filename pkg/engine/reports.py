import csv
import io
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Type, TypeVar

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from config import OVERALL
from errors import TableFormatError
from scoring import SbsResult
from sentiment import ALL_ORIENTATIONS, SentimentSummary

logger = logging.getLogger(__name__)

M = TypeVar("M", bound=BaseModel)

EXCLUDED_SPAM = "excluded_spam"

MEASURES = ("sbs", "prevalence", "diversity", "connectivity")
MEASURE_LABELS = {
    "sbs": "Semantic Brand Score",
    "prevalence": "Prevalence",
    "diversity": "Diversity",
    "connectivity": "Connectivity",
    "sentiment": "Sentiment",
}
_MEASURE_KEYS = {label.lower(): key for key, label in MEASURE_LABELS.items()}
_MEASURE_KEYS.update({key: key for key in MEASURE_LABELS})

SHARE_FIELDS = {
    "sbs": "share_sbs",
    "prevalence": "share_prevalence",
    "diversity": "share_diversity",
    "connectivity": "share_connectivity",
}

SCORES_FILE = "scores.csv"
IMPORTANCE_FILE = "importance_table.csv"
SENTIMENT_FILE = "sentiment.csv"
SAMPLE_STATS_FILE = "sample_stats.csv"

SHARE_DECIMALS = 2
SENTIMENT_DECIMALS = 3


class GroupStats(BaseModel):
    """Table-2 row: volume and average length / sentiment of one group"""

    model_config = ConfigDict(frozen=True)

    group: str
    documents: int
    volume_pct: float
    length_mean: Optional[float] = None
    length_sd: Optional[float] = None
    sentiment_mean: Optional[float] = None
    sentiment_sd: Optional[float] = None


class ReportTable(BaseModel):
    """A rendered table: row labels x column labels with pre-formatted cells"""

    title: str
    row_header: List[str]
    row_labels: List[List[str]]
    column_labels: List[str]
    cells: List[List[str]]


class ReportBundle(BaseModel):
    tables: List[ReportTable] = Field(default_factory=list)


def group_order(groups: Sequence[str]) -> List[str]:
    """Alphabetical groups with Overall last (the published table's column order)"""
    return sorted(g for g in set(groups) if g != OVERALL) + ([OVERALL] if OVERALL in groups else [])


def _write_frame(frame: pd.DataFrame, path: Path, float_format: str = "%.6f") -> None:
    frame.to_csv(path, index=False, float_format=float_format, lineterminator="\n")


def write_scores(results: Sequence[SbsResult], path: Path) -> None:
    frame = pd.DataFrame([r.model_dump() for r in results], columns=list(SbsResult.model_fields))
    _write_frame(frame, path)


def read_scores(path: Path) -> List[SbsResult]:
    return _read_models(path, SbsResult)


def importance_frame(results: Sequence[SbsResult], orientations: Sequence[str]) -> pd.DataFrame:
    """Table-3 layout: one row per measure x orientation, one column per group"""
    groups = group_order([r.group for r in results])
    by_cell = {(r.group, r.orientation): r for r in results}
    rows = []
    for measure in MEASURES:
        for orientation in orientations:
            row: Dict[str, Any] = {"measure": MEASURE_LABELS[measure], "orientation": orientation}
            for group in groups:
                result = by_cell.get((group, orientation))
                row[group] = getattr(result, SHARE_FIELDS[measure]) if result else None
            rows.append(row)
    return pd.DataFrame(rows, columns=["measure", "orientation", *groups])


def write_importance_table(results: Sequence[SbsResult], orientations: Sequence[str], path: Path) -> None:
    _write_frame(importance_frame(results, orientations), path, float_format=f"%.{SHARE_DECIMALS}f")


def write_sentiment(summaries: Sequence[SentimentSummary], path: Path) -> None:
    frame = pd.DataFrame(
        [s.model_dump() for s in summaries], columns=["group", "orientation", "n", "mean", "sd"]
    )
    _write_frame(frame, path)


def read_sentiment(path: Path) -> List[SentimentSummary]:
    return _read_models(path, SentimentSummary, nullable=True)


def write_sample_stats(stats: Sequence[GroupStats], path: Path) -> None:
    frame = pd.DataFrame([s.model_dump() for s in stats], columns=list(GroupStats.model_fields))
    _write_frame(frame, path)


def read_sample_stats(path: Path) -> List[GroupStats]:
    return _read_models(path, GroupStats, nullable=True)


def write_json(payload: Any, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def _read_artifact(path: Path) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"missing artifact: {path.name}")
    try:
        return pd.read_csv(path, keep_default_na=True, dtype={"group": str, "orientation": str, "node": str})
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise TableFormatError(f"{path.name}: unreadable CSV ({e})") from e


def _read_models(path: Path, model: Type[M], nullable: bool = False) -> List[M]:
    frame = _read_artifact(path)
    if nullable:
        frame = frame.astype(object).where(frame.notna(), None)
    try:
        return [model.model_validate(row) for row in frame.to_dict(orient="records")]
    except ValidationError as e:
        first = e.errors()[0]
        where = ".".join(str(p) for p in first["loc"])
        raise TableFormatError(
            f"{Path(path).name}: {e.error_count()} invalid value(s), first at '{where}': {first['msg']}"
        ) from e


def _measure_key(label: str) -> str:
    key = _MEASURE_KEYS.get(" ".join(str(label).split()).lower())
    if key is None:
        raise TableFormatError(f"unknown measure '{label}'")
    return key


def _percentage(value: Any, where: str) -> float:
    text = str(value).strip().rstrip("%").strip()
    try:
        return float(text)
    except ValueError:
        raise TableFormatError(f"non-numeric cell {where}: '{value}'") from None


def read_importance_grid(path: Path) -> Dict[str, Dict[str, Dict[str, float]]]:
    """Parse a Table-3 style CSV into {measure: {orientation: {group: value}}}.

    Blank measure cells continue the measure above; '%' suffixes are accepted.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    except FileNotFoundError:
        raise
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise TableFormatError(f"cannot parse {path}: {e}") from e
    columns = [c.strip() for c in frame.columns]
    frame.columns = columns
    if columns[:2] != ["measure", "orientation"] or len(columns) < 3:
        raise TableFormatError(f"{path.name}: header must start with 'measure,orientation' followed by groups")
    groups = columns[2:]

    grid: Dict[str, Dict[str, Dict[str, float]]] = {}
    current: Optional[str] = None
    for index, row in frame.iterrows():
        if row["measure"].strip():
            current = _measure_key(row["measure"])
        if current is None:
            raise TableFormatError(f"{path.name}: first row has no measure")
        orientation = row["orientation"].strip()
        if not orientation:
            raise TableFormatError(f"{path.name}: row {index + 2} has no orientation")
        cells = grid.setdefault(current, {})
        if orientation in cells:
            raise TableFormatError(f"{path.name}: duplicate row {current} x {orientation}")
        cells[orientation] = {
            g: _percentage(row[g], f"{current} x {orientation} x {g}") for g in groups
        }
    return grid


def _fmt(value: Optional[float], decimals: int) -> str:
    return "NA" if value is None else f"{value:.{decimals}f}"


def build_importance_table(
    results: Sequence[SbsResult],
    summaries: Sequence[SentimentSummary] = (),
    orientations: Optional[Sequence[str]] = None,
) -> ReportTable:
    if orientations is None:
        orientations = list(dict.fromkeys(r.orientation for r in results))
    groups = group_order([r.group for r in results])
    by_cell = {(r.group, r.orientation): r for r in results}
    row_labels, cells = [], []
    for measure in MEASURES:
        for orientation in orientations:
            row_labels.append([MEASURE_LABELS[measure], orientation])
            cells.append([
                _fmt(getattr(by_cell[(g, orientation)], SHARE_FIELDS[measure]) if (g, orientation) in by_cell else None,
                     SHARE_DECIMALS)
                for g in groups
            ])
    sentiment = {(s.group, s.orientation): s for s in summaries}
    if sentiment:
        for orientation in orientations:
            row_labels.append([MEASURE_LABELS["sentiment"], orientation])
            cells.append([
                _fmt(sentiment[(g, orientation)].mean if (g, orientation) in sentiment else None, SENTIMENT_DECIMALS)
                for g in groups
            ])
    return ReportTable(
        title="Importance of core value orientations (%)",
        row_header=["measure", "orientation"],
        row_labels=row_labels,
        column_labels=groups,
        cells=cells,
    )


def build_sample_table(stats: Sequence[GroupStats]) -> ReportTable:
    """Table-2 shape: volume %, mean (SD) length in words, mean (SD) sentiment"""
    row_labels, cells = [], []
    for s in stats:
        row_labels.append([s.group])
        length = "NA" if s.length_mean is None else f"{s.length_mean:.2f} ({(s.length_sd or 0):.2f})"
        sentiment = (
            "NA"
            if s.sentiment_mean is None
            else f"{s.sentiment_mean:.{SENTIMENT_DECIMALS}f} ({(s.sentiment_sd or 0):.{SENTIMENT_DECIMALS}f})"
        )
        cells.append([str(s.documents), f"{s.volume_pct:.{SHARE_DECIMALS}f}", length, sentiment])
    return ReportTable(
        title="Sample statistics",
        row_header=["group"],
        row_labels=row_labels,
        column_labels=["documents", "volume_pct", "length_mean_sd", "sentiment_mean_sd"],
        cells=cells,
    )


def render_markdown(table: ReportTable) -> str:
    header = [*table.row_header, *table.column_labels]
    lines = [f"### {table.title}", "", "| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    for labels, row in zip(table.row_labels, table.cells):
        lines.append("| " + " | ".join([*labels, *row]) + " |")
    return "\n".join(lines) + "\n"


def render_csv(table: ReportTable) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow([*table.row_header, *table.column_labels])
    for labels, row in zip(table.row_labels, table.cells):
        writer.writerow([*labels, *row])
    return buffer.getvalue()


def parse_csv_table(text: str, title: str, row_header_width: int) -> ReportTable:
    """Inverse of render_csv"""
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], rows[1:]
    return ReportTable(
        title=title,
        row_header=header[:row_header_width],
        row_labels=[r[:row_header_width] for r in body],
        column_labels=header[row_header_width:],
        cells=[r[row_header_width:] for r in body],
    )


def render(tables: Sequence[ReportTable], fmt: str) -> str:
    if fmt == "json":
        return ReportBundle(tables=list(tables)).model_dump_json(indent=2) + "\n"
    if fmt == "csv":
        return "\n".join(f"# {t.title}\n{render_csv(t)}" for t in tables)
    if fmt == "markdown":
        return "\n".join(render_markdown(t) for t in tables)
    raise ValueError(f"unknown report format '{fmt}'")


def report_schema() -> Dict[str, Any]:
    return ReportBundle.model_json_schema()


def load_report_tables(artifact_dir: Path) -> List[ReportTable]:
    """Sample statistics and importance tables from a run's artifact directory"""
    artifact_dir = Path(artifact_dir)
    stats = read_sample_stats(artifact_dir / SAMPLE_STATS_FILE)
    results = read_scores(artifact_dir / SCORES_FILE)
    summaries = read_sentiment(artifact_dir / SENTIMENT_FILE)
    orientations = list(dict.fromkeys(r.orientation for r in results))
    return [build_sample_table(stats), build_importance_table(results, summaries, orientations)]
