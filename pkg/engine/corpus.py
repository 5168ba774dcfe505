import csv
import json
import logging
import re
from collections import defaultdict
from datetime import datetime
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from config import OVERALL, PrepConfig, SearchQuery, SpamConfig
from errors import CorpusError
from textprep import tokenize

logger = logging.getLogger(__name__)

CANONICAL_GROUPS = ("customers", "employees", "communication_teams", "media", "associations")
REQUIRED_COLUMNS = ("id", "text", "author_id", "group")

_LABEL_SEPARATORS = re.compile(r"[\s\-]+")


def normalize_group(name: str) -> str:
    """Case-insensitive group label: 'Communication Teams' -> 'communication_teams'"""
    label = _LABEL_SEPARATORS.sub("_", name.strip()).casefold()
    if not label:
        raise ValueError("group label must be non-empty")
    return label


class DocumentRecord(BaseModel):
    """One short text with its author, stakeholder group and account stats"""

    model_config = ConfigDict(frozen=True, extra="ignore")

    id: str = Field(min_length=1)
    text: str
    author_id: str
    group: str
    followers: int = Field(default=0, ge=0)
    following: int = Field(default=0, ge=0)
    mentions_received: int = Field(default=0, ge=0)
    timestamp: Optional[datetime] = None

    @field_validator("text")
    @classmethod
    def _text_not_blank(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("text is empty")
        return value

    @field_validator("group")
    @classmethod
    def _normalize_group(cls, value: str) -> str:
        return normalize_group(value)


class LoadedCorpus(BaseModel):
    records: List[DocumentRecord]
    total_rows: int
    rejected: int
    reject_reasons: List[str] = Field(default_factory=list)


class SpamVerdict(BaseModel):
    model_config = ConfigDict(frozen=True)

    author_id: str
    tweet_volume_z: float
    mentions_received: int
    follow_ratio: float
    flagged: bool


def _iter_jsonl(path: Path) -> Iterator[Tuple[int, Optional[dict], Optional[str]]]:
    with path.open("r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as e:
                yield line_no, None, f"invalid JSON: {e.msg}"
                continue
            if not isinstance(row, dict):
                yield line_no, None, "row is not a JSON object"
                continue
            yield line_no, row, None


def _iter_csv(path: Path) -> Iterator[Tuple[int, Optional[dict], Optional[str]]]:
    with path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        header = reader.fieldnames or []
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise CorpusError(f"{path}: CSV header missing columns {missing}")
        for row in reader:
            if None in row:
                yield reader.line_num, None, "too many fields"
                continue
            # empty optional cells fall back to model defaults
            cleaned = {k: v for k, v in row.items() if v is not None and (v != "" or k in REQUIRED_COLUMNS)}
            yield reader.line_num, cleaned, None


def load_corpus(path: Path, fmt: Optional[str] = None) -> LoadedCorpus:
    """Read a JSONL or CSV corpus; malformed rows are skipped and counted"""
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".")).lower()
    if fmt not in ("jsonl", "csv"):
        raise CorpusError(f"unsupported corpus format '{fmt}' for {path}")
    if not path.is_file():
        raise CorpusError(f"corpus file not found: {path}")

    rows = _iter_jsonl(path) if fmt == "jsonl" else _iter_csv(path)
    records: List[DocumentRecord] = []
    reasons: List[str] = []
    seen_ids = set()
    total = 0
    try:
        for line_no, row, problem in rows:
            total += 1
            if problem is None:
                try:
                    record = DocumentRecord.model_validate(row)
                except ValidationError as e:
                    problem = "; ".join(f"{'.'.join(map(str, err['loc']))}: {err['msg']}" for err in e.errors())
            if problem is not None:
                logger.warning(f"{path.name}:{line_no} skipped ({problem})")
                reasons.append(f"line {line_no}: {problem}")
                continue
            if record.id in seen_ids:
                raise CorpusError(f"{path.name}:{line_no} duplicate document id '{record.id}'")
            seen_ids.add(record.id)
            records.append(record)
    except (OSError, UnicodeDecodeError, csv.Error) as e:
        raise CorpusError(f"cannot read corpus {path}: {e}") from e

    logger.info(f"Loaded {len(records)} documents from {path.name} ({len(reasons)} rejected)")
    return LoadedCorpus(records=records, total_rows=total, rejected=len(reasons), reject_reasons=reasons)


def _contains_phrase(tokens: Sequence[str], phrase: Tuple[str, ...]) -> bool:
    n = len(phrase)
    if n == 0 or n > len(tokens):
        return False
    first = phrase[0]
    for i in range(len(tokens) - n + 1):
        if tokens[i] == first and tuple(tokens[i:i + n]) == phrase:
            return True
    return False


def _phrases(terms: Sequence[str], prep: PrepConfig) -> List[Tuple[str, ...]]:
    phrases = []
    for term in terms:
        words = tuple(t.term for t in tokenize(term, prep))
        if words:
            phrases.append(words)
    return phrases


def filter_by_query(docs: Sequence[DocumentRecord], q: SearchQuery, prep: PrepConfig) -> List[DocumentRecord]:
    """Keep documents containing a concept phrase and, when enabled, a context phrase"""
    q.check_active()
    concepts = _phrases(q.concept_terms, prep)
    contexts = _phrases(q.context_terms, prep) if q.context_filter else []

    kept = []
    for doc in docs:
        words = [t.term for t in tokenize(doc.text, prep)]
        if not any(_contains_phrase(words, p) for p in concepts):
            continue
        if q.context_filter and not any(_contains_phrase(words, p) for p in contexts):
            continue
        kept.append(doc)
    logger.info(f"Query filter kept {len(kept)} of {len(docs)} documents")
    return kept


class VolumeBaseline(BaseModel):
    """Per-author post volume statistics the spam z-scores are measured against"""

    model_config = ConfigDict(frozen=True)

    authors: int
    mean: float
    sd: float


def _author_volume(docs: Sequence[DocumentRecord]) -> Dict[str, int]:
    volume: Dict[str, int] = defaultdict(int)
    for doc in docs:
        volume[doc.author_id] += 1
    return volume


def volume_baseline(docs: Sequence[DocumentRecord]) -> VolumeBaseline:
    counts = np.array(list(_author_volume(docs).values()), dtype=float)
    if counts.size == 0:
        return VolumeBaseline(authors=0, mean=0.0, sd=0.0)
    return VolumeBaseline(authors=int(counts.size), mean=float(counts.mean()), sd=float(counts.std()))


def flag_spammers(
    docs: Sequence[DocumentRecord],
    cfg: SpamConfig,
    baseline: Optional[VolumeBaseline] = None,
) -> List[SpamVerdict]:
    """Per-author verdict: very high volume, never mentioned, follows far more than followed.

    Volume z-scores use `baseline` when given (thresholds frozen on an earlier snapshot),
    otherwise the statistics of `docs` itself.
    """
    volume = _author_volume(docs)
    mentions: Dict[str, int] = defaultdict(int)
    followers: Dict[str, int] = defaultdict(int)
    following: Dict[str, int] = defaultdict(int)
    for doc in docs:
        # account stats are snapshots; keep the largest value seen
        mentions[doc.author_id] = max(mentions[doc.author_id], doc.mentions_received)
        followers[doc.author_id] = max(followers[doc.author_id], doc.followers)
        following[doc.author_id] = max(following[doc.author_id], doc.following)

    base = baseline or volume_baseline(docs)
    authors = sorted(volume)
    counts = np.array([volume[a] for a in authors], dtype=float)
    usable = base.authors >= 2 and base.sd > 0
    if usable:
        z_scores = (counts - base.mean) / base.sd
    else:
        if base.authors < 2:
            logger.warning("Fewer than two authors, spam z-scores undefined; nobody flagged")
        z_scores = np.zeros(len(authors))

    verdicts = []
    for author, z in zip(authors, z_scores):
        ratio = following[author] / max(followers[author], 1)
        flagged = (
            usable
            and z >= cfg.z_min
            and mentions[author] <= cfg.m_max
            and ratio >= cfg.r_min
        )
        verdicts.append(
            SpamVerdict(
                author_id=author,
                tweet_volume_z=float(z),
                mentions_received=mentions[author],
                follow_ratio=ratio,
                flagged=bool(flagged),
            )
        )
    flagged_count = sum(v.flagged for v in verdicts)
    if flagged_count:
        logger.info(f"Flagged {flagged_count} of {len(authors)} authors as spam")
    return verdicts


def drop_flagged(docs: Sequence[DocumentRecord], verdicts: Sequence[SpamVerdict]) -> List[DocumentRecord]:
    flagged = {v.author_id for v in verdicts if v.flagged}
    return [d for d in docs if d.author_id not in flagged]


def partition_by_group(docs: Sequence[DocumentRecord]) -> Dict[str, List[DocumentRecord]]:
    """Split by group label; a synthetic 'overall' group with every document is always added last"""
    groups: Dict[str, List[DocumentRecord]] = defaultdict(list)
    for doc in docs:
        groups[normalize_group(doc.group)].append(doc)
    partition = {name: groups[name] for name in sorted(groups) if name != OVERALL}
    if OVERALL in groups:
        logger.warning(f"Input group label '{OVERALL}' collides with the synthetic group and is folded into it")
    partition[OVERALL] = list(docs)
    return partition


def exclusion_report(total: int, kept: int, rejected: int, spam_flagged: int) -> Dict[str, float]:
    """Reject report; spam_share is spam-excluded documents over all rows read"""
    share = spam_flagged / total if total else 0.0
    return {
        "total": total,
        "kept": kept,
        "rejected": rejected,
        "spam_flagged": spam_flagged,
        "spam_share": round(share, 4),
    }
