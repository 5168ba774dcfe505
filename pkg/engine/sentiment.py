import logging
from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Mapping, Optional, Protocol, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from config import DATA_DIR, ConceptCluster, PrepConfig
from errors import ConfigError
from textprep import NGRAM_JOINER, TokenStream, normalize_phrase

logger = logging.getLogger(__name__)

ALL_ORIENTATIONS = "all"


class SentimentScore(BaseModel):
    model_config = ConfigDict(frozen=True)

    doc_id: str
    value: float = Field(ge=-1.0, le=1.0)


class SentimentSummary(BaseModel):
    """Mean and population SD of document sentiment in one (group, orientation) cell"""

    model_config = ConfigDict(frozen=True)

    group: str
    orientation: str
    n: int = Field(ge=0)
    mean: Optional[float] = Field(default=None, ge=-1.0, le=1.0)
    sd: Optional[float] = Field(default=None, ge=0.0)


class SentimentScorer(Protocol):
    """Plug-in interface: any object returning a value in [-1, 1] per document"""

    name: str

    def score(self, stream: TokenStream, text: str) -> float:
        ...


def _clamp(value: float) -> float:
    return max(-1.0, min(1.0, value))


def default_lexicon_path(language: str) -> Optional[Path]:
    path = DATA_DIR / "lexicon" / f"{language}.csv"
    return path if path.is_file() else None


def load_lexicon(path: Path, prep: PrepConfig) -> Dict[str, float]:
    """CSV (term, valence); terms are stemmed like the corpus, collisions averaged"""
    try:
        frame = pd.read_csv(path, dtype={"term": str}, comment="#", skipinitialspace=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise ConfigError(f"cannot read lexicon {path}: {e}") from e
    if not {"term", "valence"} <= set(frame.columns):
        raise ConfigError(f"lexicon {path} needs columns 'term' and 'valence'")

    valences = pd.to_numeric(frame["valence"], errors="coerce")
    bad = frame[valences.isna() | (valences < -1) | (valences > 1)]
    if not bad.empty:
        raise ConfigError(f"lexicon {path}: valence outside [-1, 1] for terms {bad['term'].tolist()[:5]}")

    collected: Dict[str, List[float]] = defaultdict(list)
    for term, valence in zip(frame["term"], valences):
        if not isinstance(term, str):
            continue
        form = normalize_phrase(term, prep)
        if form:
            collected[form].append(float(valence))
    lexicon = {form: float(np.mean(values)) for form, values in sorted(collected.items())}
    logger.info(f"Loaded lexicon with {len(lexicon)} stemmed entries from {Path(path).name}")
    return lexicon


def _matched_valences(terms: Iterable[str], lexicon: Mapping[str, float]) -> List[float]:
    matched = []
    for term in terms:
        if term in lexicon:
            matched.append(lexicon[term])
        elif NGRAM_JOINER in term:
            matched.extend(lexicon[p] for p in term.split(NGRAM_JOINER) if p in lexicon)
    return matched


def score_document(stream: TokenStream, lexicon: Mapping[str, float]) -> SentimentScore:
    """Mean valence of the matched tokens; no match means neutral (0)"""
    matched = _matched_valences(stream.terms, lexicon)
    value = _clamp(sum(matched) / len(matched)) if matched else 0.0
    return SentimentScore(doc_id=stream.doc_id, value=value)


class LexiconScorer:
    name = "lexicon"

    def __init__(self, lexicon: Mapping[str, float]):
        self.lexicon = dict(lexicon)

    def score(self, stream: TokenStream, text: str) -> float:
        return score_document(stream, self.lexicon).value


class TransformerScorer:
    """HuggingFace text-classification model mapped to P(positive) - P(negative)"""

    name = "transformers"

    def __init__(self, model: str):
        from transformers import pipeline

        self.model = model
        self.pipeline = pipeline("text-classification", model=model, top_k=None)

    def score(self, stream: TokenStream, text: str) -> float:
        results = self.pipeline(text, truncation=True)
        if results and isinstance(results[0], list):
            results = results[0]
        by_label = {r["label"].lower(): r["score"] for r in results}
        positive = by_label.get("positive", by_label.get("label_2", 0.0))
        negative = by_label.get("negative", by_label.get("label_0", 0.0))
        return _clamp(positive - negative)


class SentimentAnalyzer:
    """Scores documents with the configured provider, falling back to the lexicon"""

    def __init__(self, lexicon: Mapping[str, float], provider: str = "lexicon", model: Optional[str] = None):
        self.fallback = LexiconScorer(lexicon)
        self.scorer: SentimentScorer = self.fallback
        self._initialize_services(provider, model)

    def _initialize_services(self, provider: str, model: Optional[str]):
        if provider == "transformers":
            try:
                self.scorer = TransformerScorer(model)
                logger.info(f"Transformer sentiment model '{model}' initialized")
            except Exception as e:
                logger.warning(f"Transformer sentiment initialization failed, using lexicon: {e}")
        elif provider != "lexicon":
            raise ConfigError(f"unknown sentiment provider '{provider}'")

    @property
    def provider(self) -> str:
        return self.scorer.name

    def score(self, stream: TokenStream, text: str) -> SentimentScore:
        try:
            value = self.scorer.score(stream, text)
        except Exception as e:
            logger.error(f"Sentiment scoring failed for {stream.doc_id} ({self.scorer.name}): {e}")
            value = self.fallback.score(stream, text)
        return SentimentScore(doc_id=stream.doc_id, value=_clamp(float(value)))


def _summary(group: str, orientation: str, values: Sequence[float]) -> SentimentSummary:
    if not values:
        return SentimentSummary(group=group, orientation=orientation, n=0)
    data = np.array(values, dtype=float)
    return SentimentSummary(
        group=group,
        orientation=orientation,
        n=len(values),
        mean=_clamp(float(data.mean())),
        sd=float(data.std()),
    )


def summarize(
    scores: Sequence[SentimentScore],
    streams: Sequence[TokenStream],
    clusters: Sequence[ConceptCluster],
    group: str,
) -> List[SentimentSummary]:
    """Per-orientation cells (document contains a cluster keyword) plus the 'all' cell.

    A document containing keywords of several orientations counts in each of them.
    """
    by_doc = {s.doc_id: s.value for s in scores}
    cells: Dict[str, List[float]] = {c.orientation: [] for c in clusters}
    every: List[float] = []
    for stream in streams:
        if stream.doc_id not in by_doc:
            continue
        value = by_doc[stream.doc_id]
        every.append(value)
        terms = set(stream.terms)
        for cluster in clusters:
            if terms.intersection(cluster.keywords):
                cells[cluster.orientation].append(value)

    summaries = [_summary(group, c.orientation, cells[c.orientation]) for c in clusters]
    summaries.append(_summary(group, ALL_ORIENTATIONS, every))
    return summaries
