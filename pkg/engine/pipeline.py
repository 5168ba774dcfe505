import asyncio
import hashlib
import logging
import shutil
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

import reports
from config import ConceptCluster, RunConfig, __version__, workers_from_env
from corpus import (
    DocumentRecord,
    SpamVerdict,
    drop_flagged,
    exclusion_report,
    filter_by_query,
    flag_spammers,
    load_corpus,
    normalize_group,
    partition_by_group,
)
from errors import ConfigError, StageError, TableFormatError
from graph import build_graph, export_graph, merge_clusters, prune
from metrics import ComponentScores, component_scores, export_components
from scoring import SbsResult, rank_orientations, reconstruct_sbs_share, score_group
from sentiment import SentimentAnalyzer, SentimentScore, SentimentSummary, default_lexicon_path, load_lexicon, summarize
from textprep import TokenStream, build_vocabulary, preprocess, stem_clusters, tokenize

logger = logging.getLogger(__name__)

RECONSTRUCTION_TOLERANCE = 1.0

SCORE_ARTIFACTS = (
    "components.csv",
    reports.SCORES_FILE,
    reports.IMPORTANCE_FILE,
    reports.SENTIMENT_FILE,
    reports.SAMPLE_STATS_FILE,
    "graphs",
)


class RunManifest(BaseModel):
    tool_version: str
    config_digest: str
    corpus_digest: str
    lexicon_digest: Optional[str] = None
    sentiment_provider: str
    group_counts: Dict[str, int]
    excluded: Dict[str, int]
    warnings: List[str] = Field(default_factory=list)
    stage_seconds: Dict[str, float] = Field(default_factory=dict)


@dataclass
class GroupOutcome:
    group: str
    documents: int
    scores: Dict[str, ComponentScores]
    results: List[SbsResult]
    ranking: List[str]
    sentiment: List[SentimentSummary]
    stats: reports.GroupStats
    graph: Optional[nx.Graph] = None
    seconds: float = 0.0


@dataclass
class RunResult:
    manifest: RunManifest
    output_dir: Path
    exclusion: Dict[str, float]
    groups: Dict[str, GroupOutcome] = field(default_factory=dict)

    def results(self) -> List[SbsResult]:
        return [r for outcome in self.groups.values() for r in outcome.results]


class CellCheck(BaseModel):
    orientation: str
    group: str
    prevalence: float
    diversity: float
    connectivity: float
    published_sbs: float
    reconstructed_sbs: float
    delta: float
    flagged: bool


class ReconstructionReport(BaseModel):
    tolerance: float
    cells: List[CellCheck]
    max_delta: float
    flagged: int


def file_digest(path: Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for block in iter(lambda: handle.read(1 << 16), b""):
            digest.update(block)
    return digest.hexdigest()


@contextmanager
def stage(name: str, timings: Dict[str, float]) -> Iterator[None]:
    """Time a stage and tag any failure with its name; configuration errors pass through"""
    start = time.perf_counter()
    logger.debug(f"Stage {name} started")
    try:
        yield
    except (ConfigError, StageError):
        raise
    except Exception as e:
        logger.error(f"Stage {name} failed: {e}")
        raise StageError(name, str(e), e) from e
    finally:
        timings[name] = round(time.perf_counter() - start, 6)


def _mean_sd(values: Sequence[float]):
    if not values:
        return None, None
    data = np.array(values, dtype=float)
    return float(data.mean()), float(data.std())


def _group_stats(
    group: str,
    streams: Sequence[TokenStream],
    sentiment: Dict[str, float],
    sample_size: int,
) -> reports.GroupStats:
    length_mean, length_sd = _mean_sd([s.word_count for s in streams])
    sent_mean, sent_sd = _mean_sd([sentiment[s.doc_id] for s in streams if s.doc_id in sentiment])
    return reports.GroupStats(
        group=group,
        documents=len(streams),
        volume_pct=len(streams) / sample_size * 100.0 if sample_size else 0.0,
        length_mean=length_mean,
        length_sd=length_sd,
        sentiment_mean=sent_mean,
        sentiment_sd=sent_sd,
    )


def score_one_group(
    group: str,
    streams: Sequence[TokenStream],
    cfg: RunConfig,
    clusters: Sequence[ConceptCluster],
    sentiment: Dict[str, float],
    sample_size: int,
    workers: int = 1,
) -> GroupOutcome:
    """build -> prune -> merge -> components -> standardize/compose/shares -> rank, plus sentiment cells"""
    start = time.perf_counter()
    built = build_graph(streams, cfg.graph, group)
    merged = merge_clusters(prune(built, cfg.graph), clusters)
    scores = component_scores(streams, merged, clusters, workers=workers)
    orientations = [c.orientation for c in clusters]
    results = score_group(group, scores, orientations)
    ranking = [r.orientation for r in rank_orientations(results, group)]
    doc_scores = [SentimentScore(doc_id=s.doc_id, value=sentiment[s.doc_id]) for s in streams]
    summaries = summarize(doc_scores, streams, clusters, group)
    stats = _group_stats(group, streams, sentiment, sample_size)
    elapsed = time.perf_counter() - start
    logger.info(
        f"[{group}] {len(streams)} docs, {merged.number_of_nodes()} nodes, "
        f"{merged.number_of_edges()} edges; top orientation: {ranking[0] if ranking else '-'}"
    )
    return GroupOutcome(
        group=group,
        documents=len(streams),
        scores=scores,
        results=results,
        ranking=ranking,
        sentiment=summaries,
        stats=stats,
        graph=merged,
        seconds=round(elapsed, 6),
    )


def _load_lexicon(cfg: RunConfig) -> Dict[str, float]:
    path = cfg.lexicon_path or default_lexicon_path(cfg.prep.language)
    if path is None:
        logger.warning(f"No sentiment lexicon for '{cfg.prep.language}'; every document scores neutral")
        return {}
    return load_lexicon(path, cfg.prep)


async def run(corpus_path: Path, cfg: RunConfig, workers: Optional[int] = None) -> RunResult:
    """End-to-end run: filter, partition, preprocess, score every group, write artifacts"""
    cfg.check_files()
    workers = workers or workers_from_env()
    timings: Dict[str, float] = {}
    warnings: List[str] = []
    out = Path(cfg.output_dir)

    with stage("corpus.load", timings):
        loaded = load_corpus(corpus_path, cfg.corpus_format)
        corpus_digest = file_digest(corpus_path)
    docs: List[DocumentRecord] = loaded.records
    group_filtered = 0
    query_dropped = 0

    if cfg.groups:
        with stage("corpus.groups", timings):
            wanted = {normalize_group(g) for g in cfg.groups}
            before = len(docs)
            docs = [d for d in docs if d.group in wanted]
            group_filtered = before - len(docs)
            logger.info(f"Group filter {sorted(wanted)} kept {len(docs)} documents")

    verdicts: List[SpamVerdict] = []
    spam_docs: List[DocumentRecord] = []
    if cfg.spam.enabled:
        with stage("corpus.spam", timings):
            verdicts = flag_spammers(docs, cfg.spam)
            kept = drop_flagged(docs, verdicts)
            kept_ids = {d.id for d in kept}
            spam_docs = [d for d in docs if d.id not in kept_ids]
            docs = kept

    if cfg.query is not None:
        with stage("corpus.query", timings):
            before = len(docs)
            docs = filter_by_query(docs, cfg.query, cfg.prep)
            query_dropped = before - len(docs)

    with stage("corpus.partition", timings):
        partition = partition_by_group(docs)

    exclusion = exclusion_report(
        total=loaded.total_rows, kept=len(docs), rejected=loaded.rejected, spam_flagged=len(spam_docs)
    )

    with stage("textprep.vocab", timings):
        clusters = stem_clusters(cfg.clusters, cfg.prep)
        vocab = build_vocabulary(docs, cfg.prep, cfg.clusters)

    with stage("textprep.preprocess", timings):
        streams = {d.id: preprocess(d, cfg.prep, vocab) for d in docs}

    with stage("sentiment.score", timings):
        lexicon = _load_lexicon(cfg)
        analyzer = SentimentAnalyzer(lexicon, cfg.sentiment_provider, cfg.sentiment_model)
        sentiment = {d.id: analyzer.score(streams[d.id], d.text).value for d in docs}

    sample_size = len(docs) + len(spam_docs)
    outcomes: Dict[str, GroupOutcome] = {}
    if not docs:
        message = "no documents left after filtering; score tables not written"
        logger.warning(message)
        warnings.append(message)
    else:
        loop = asyncio.get_running_loop()
        with ThreadPoolExecutor(max_workers=workers) as pool:
            tasks = [
                loop.run_in_executor(
                    pool,
                    score_one_group,
                    name,
                    [streams[d.id] for d in members],
                    cfg,
                    clusters,
                    sentiment,
                    sample_size,
                    workers,
                )
                for name, members in partition.items()
            ]
            finished = await asyncio.gather(*tasks, return_exceptions=True)
        for name, outcome in zip(partition, finished):
            if isinstance(outcome, ConfigError):
                raise outcome
            if isinstance(outcome, BaseException):
                logger.error(f"Stage group.{name} failed: {outcome}")
                raise StageError(f"group.{name}", str(outcome), outcome) from outcome
            timings[f"group.{name}"] = outcome.seconds
            outcomes[name] = outcome

    spam_stats = None
    if spam_docs:
        spam_lengths = [len(tokenize(d.text, cfg.prep)) for d in spam_docs]
        length_mean, length_sd = _mean_sd(spam_lengths)
        spam_stats = reports.GroupStats(
            group=reports.EXCLUDED_SPAM,
            documents=len(spam_docs),
            volume_pct=len(spam_docs) / sample_size * 100.0,
            length_mean=length_mean,
            length_sd=length_sd,
        )

    lexicon_path = cfg.lexicon_path or default_lexicon_path(cfg.prep.language)
    manifest = RunManifest(
        tool_version=__version__,
        config_digest=cfg.digest(),
        corpus_digest=corpus_digest,
        lexicon_digest=file_digest(lexicon_path) if lexicon_path else None,
        sentiment_provider=analyzer.provider,
        group_counts={name: len(members) for name, members in partition.items()},
        excluded={
            "rejected": loaded.rejected,
            "spam_flagged": len(spam_docs),
            "spam_authors": sum(v.flagged for v in verdicts),
            "group_filtered": group_filtered,
            "query_dropped": query_dropped,
        },
        warnings=warnings,
    )

    result = RunResult(manifest=manifest, output_dir=out, exclusion=exclusion, groups=outcomes)
    with stage("report.write", timings):
        _publish(out, result, cfg, clusters, verdicts, vocab, spam_stats)
    with stage("report.manifest", timings):
        manifest.stage_seconds = dict(sorted(timings.items()))
        reports.write_json(manifest.model_dump(mode="json"), out / "manifest.json")
    logger.info(f"Run finished: {len(docs)} documents, {len(outcomes)} groups, artifacts in {out}")
    return result


def _publish(out: Path, result: RunResult, cfg: RunConfig, clusters, verdicts, vocab, spam_stats) -> None:
    """Write every artifact into a staging directory, then move it into place; nothing partial survives"""
    out.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".partial-", dir=out))
    try:
        _write_artifacts(staging, result, cfg, clusters, verdicts, vocab, spam_stats)
        # score tables from an earlier run in the same directory must not outlive this one
        for name in SCORE_ARTIFACTS:
            stale = out / name
            if stale.is_dir():
                shutil.rmtree(stale)
            elif stale.exists():
                stale.unlink()
        for item in sorted(staging.iterdir()):
            target = out / item.name
            if target.is_dir():
                shutil.rmtree(target)
            elif target.exists():
                target.unlink()
            shutil.move(str(item), str(target))
    finally:
        shutil.rmtree(staging, ignore_errors=True)


def _write_artifacts(target: Path, result: RunResult, cfg: RunConfig, clusters, verdicts, vocab, spam_stats) -> None:
    reports.write_json(result.exclusion, target / "exclusion.json")
    pd.DataFrame(
        [v.model_dump() for v in verdicts],
        columns=["author_id", "tweet_volume_z", "mentions_received", "follow_ratio", "flagged"],
    ).to_csv(target / "spam_verdicts.csv", index=False, float_format="%.6f", lineterminator="\n")
    pd.DataFrame(vocab.rows(), columns=["ngram", "count"]).to_csv(
        target / "ngram_vocabulary.csv", index=False, lineterminator="\n"
    )

    outcomes = [result.groups[name] for name in reports.group_order(list(result.groups))]
    if not outcomes:
        return

    orientations = [c.orientation for c in clusters]
    results = [r for o in outcomes for r in o.results]
    export_components({o.group: o.scores for o in outcomes}, target / "components.csv")
    reports.write_scores(results, target / reports.SCORES_FILE)
    reports.write_importance_table(results, orientations, target / reports.IMPORTANCE_FILE)
    reports.write_sentiment([s for o in outcomes for s in o.sentiment], target / reports.SENTIMENT_FILE)
    stats = [o.stats for o in outcomes] + ([spam_stats] if spam_stats else [])
    reports.write_sample_stats(stats, target / reports.SAMPLE_STATS_FILE)

    if cfg.export_graphs:
        graphs = target / "graphs"
        graphs.mkdir()
        for o in outcomes:
            export_graph(o.graph, graphs / f"{o.group}_edges.csv", graphs / f"{o.group}_nodes.csv")


async def window_sweep(corpus_path: Path, cfg: RunConfig, windows: Sequence[int]) -> Dict[int, RunResult]:
    """Rerun at several co-occurrence windows and tabulate the SBS shares side by side"""
    if not windows:
        raise ConfigError("window sweep needs at least one window")
    out = Path(cfg.output_dir)
    runs: Dict[int, RunResult] = {}
    for window in sorted(set(windows)):
        variant = cfg.override(window=window, output_dir=out / f"window_{window}")
        runs[window] = await run(corpus_path, variant)

    rows: Dict[Tuple[str, str], Dict[str, float]] = {}
    for window, result in runs.items():
        for r in result.results():
            rows.setdefault((r.group, r.orientation), {})[f"window_{window}"] = r.share_sbs
    columns = [f"window_{w}" for w in runs]
    order = {g: i for i, g in enumerate(reports.group_order([g for g, _ in rows]))}
    ordered = sorted(rows.items(), key=lambda kv: (order[kv[0][0]], kv[0][1]))
    frame = pd.DataFrame(
        [{"group": g, "orientation": o, **values} for (g, o), values in ordered],
        columns=["group", "orientation", *columns],
    )
    out.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out / "window_robustness.csv", index=False, float_format="%.2f", lineterminator="\n")
    return runs


def validate_table3(path: Path, tolerance: float = RECONSTRUCTION_TOLERANCE) -> ReconstructionReport:
    """Rebuild the SBS share row as the mean of the component share rows and compare"""
    grid = reports.read_importance_grid(path)
    missing = [m for m in reports.MEASURES if m not in grid]
    if missing:
        raise TableFormatError(f"{Path(path).name}: missing measure blocks {missing}")

    orientations = list(grid["sbs"])
    for measure in reports.MEASURES:
        if sorted(grid[measure]) != sorted(orientations):
            raise TableFormatError(f"{Path(path).name}: '{measure}' rows do not match the SBS rows")

    cells = []
    for orientation in orientations:
        for group, published in grid["sbs"][orientation].items():
            p = grid["prevalence"][orientation][group]
            d = grid["diversity"][orientation][group]
            c = grid["connectivity"][orientation][group]
            rebuilt = reconstruct_sbs_share(p, d, c)
            delta = abs(rebuilt - published)
            cells.append(
                CellCheck(
                    orientation=orientation,
                    group=group,
                    prevalence=p,
                    diversity=d,
                    connectivity=c,
                    published_sbs=published,
                    reconstructed_sbs=rebuilt,
                    delta=delta,
                    flagged=delta > tolerance,
                )
            )
    flagged = sum(c.flagged for c in cells)
    if flagged:
        logger.warning(f"{flagged} cell(s) differ from the mean-of-shares reconstruction by more than {tolerance}")
    return ReconstructionReport(
        tolerance=tolerance,
        cells=cells,
        max_delta=max((c.delta for c in cells), default=0.0),
        flagged=flagged,
    )
