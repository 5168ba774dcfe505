import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from errors import ConfigError

__version__ = "1.0.0"

logger = logging.getLogger(__name__)

DATA_DIR = Path(__file__).resolve().parent / "data"
OVERALL = "overall"
# concept node keys; the tokenizer never emits ":" so they cannot collide with words
CONCEPT_PREFIX = "concept:"

LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "warning": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


class PrepConfig(BaseModel):
    """Text preprocessing settings"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    language: str = "italian"
    # None -> shipped list for the language; an explicit list replaces it (may be empty)
    stopwords: Optional[Tuple[str, ...]] = None
    extra_stopwords: Tuple[str, ...] = ()
    min_token_len: int = Field(default=2, ge=1)
    ngram_max: Literal[1, 2, 3] = 3
    ngram_min_count: int = Field(default=5, ge=2)
    keep_hashtag_body: bool = True
    strip_urls: bool = True
    strip_mentions: bool = True

    @field_validator("language")
    @classmethod
    def _normalize_language(cls, value: str) -> str:
        value = value.strip().lower()
        if not value:
            raise ValueError("language must be non-empty")
        return value


class GraphConfig(BaseModel):
    """Co-occurrence network settings"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    window: int = Field(default=7, ge=2)
    prune_min_weight: int = Field(default=2, ge=1)
    count_mode: Literal["position", "document"] = "position"


class SpamConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    enabled: bool = True
    z_min: float = 2.0
    m_max: int = Field(default=0, ge=0)
    r_min: float = Field(default=5.0, ge=0)


class ConceptCluster(BaseModel):
    """A core value orientation and the keywords that represent it"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    orientation: str = Field(min_length=1)
    keywords: Tuple[str, ...] = Field(min_length=1)

    @field_validator("keywords")
    @classmethod
    def _strip_keywords(cls, value: Tuple[str, ...]) -> Tuple[str, ...]:
        cleaned = tuple(k.strip() for k in value if k.strip())
        if not cleaned:
            raise ValueError("cluster needs at least one keyword")
        return cleaned


def concept_node(orientation: str) -> str:
    return f"{CONCEPT_PREFIX}{orientation}"


class SearchQuery(BaseModel):
    """Concept phrases AND business-context phrases a document must contain"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    concept_terms: Tuple[str, ...] = ()
    context_terms: Tuple[str, ...] = ()
    context_filter: bool = True

    def check_active(self) -> None:
        if not any(t.strip() for t in self.concept_terms):
            raise ConfigError("search query has no concept terms")
        if self.context_filter and not any(t.strip() for t in self.context_terms):
            raise ConfigError("context filter enabled but no context terms configured")


class RunConfig(BaseModel):
    """Everything one pipeline run needs besides the corpus path"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    prep: PrepConfig = Field(default_factory=PrepConfig)
    graph: GraphConfig = Field(default_factory=GraphConfig)
    clusters: Tuple[ConceptCluster, ...] = Field(min_length=1)
    spam: SpamConfig = Field(default_factory=SpamConfig)
    query: Optional[SearchQuery] = None
    lexicon_path: Optional[Path] = None
    output_dir: Path = Path("out")
    groups: Optional[Tuple[str, ...]] = None
    corpus_format: Optional[Literal["jsonl", "csv"]] = None
    sentiment_provider: Literal["lexicon", "transformers"] = "lexicon"
    sentiment_model: str = "cardiffnlp/twitter-xlm-roberta-base-sentiment"
    export_graphs: bool = True

    @model_validator(mode="after")
    def _check_clusters(self) -> "RunConfig":
        names = [c.orientation for c in self.clusters]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate orientation names: {names}")
        seen: Dict[str, str] = {}
        for cluster in self.clusters:
            for keyword in cluster.keywords:
                key = " ".join(keyword.lower().split())
                if key in seen and seen[key] != cluster.orientation:
                    raise ValueError(
                        f"keyword '{keyword}' appears in both '{seen[key]}' and '{cluster.orientation}'"
                    )
                seen[key] = cluster.orientation
        return self

    @classmethod
    def from_file(cls, path: Path) -> "RunConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"config {path} is not valid JSON: {e}") from e
        if not isinstance(raw, dict):
            raise ConfigError(f"config {path} must be a JSON object")

        lexicon = raw.get("lexicon_path")
        if lexicon and not Path(lexicon).is_absolute():
            raw["lexicon_path"] = str(path.parent / lexicon)
        return cls.parse(raw)

    @classmethod
    def parse(cls, data: Dict[str, Any]) -> "RunConfig":
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"invalid run configuration: {e}") from e

    def override(
        self,
        *,
        window: Optional[int] = None,
        prune_min: Optional[int] = None,
        spam_filter: Optional[bool] = None,
        query_filter: Optional[bool] = None,
        groups: Optional[Tuple[str, ...]] = None,
        output_dir: Optional[Path] = None,
    ) -> "RunConfig":
        """Return a re-validated copy with CLI flag values applied"""
        data = self.model_dump()
        if window is not None:
            data["graph"]["window"] = window
        if prune_min is not None:
            data["graph"]["prune_min_weight"] = prune_min
        if spam_filter is not None:
            data["spam"]["enabled"] = spam_filter
        if query_filter is False:
            data["query"] = None
        if groups is not None:
            data["groups"] = tuple(groups)
        if output_dir is not None:
            data["output_dir"] = Path(output_dir)
        return RunConfig.parse(data)

    def check_files(self) -> None:
        if self.lexicon_path is not None and not Path(self.lexicon_path).is_file():
            raise ConfigError(f"lexicon file not found: {self.lexicon_path}")
        if self.query is not None:
            self.query.check_active()

    def digest(self) -> str:
        """SHA-256 of the canonical config; the output directory is not part of it"""
        payload = self.model_dump(mode="json", exclude={"output_dir"})
        if payload.get("lexicon_path"):
            payload["lexicon_path"] = Path(payload["lexicon_path"]).name
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def log_level_from_env() -> int:
    name = os.getenv("SBS_LOG_LEVEL", "info").strip().lower()
    if name not in LOG_LEVELS:
        logger.warning(f"Unknown SBS_LOG_LEVEL '{name}', using info")
        return logging.INFO
    return LOG_LEVELS[name]


def workers_from_env() -> int:
    raw = os.getenv("SBS_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning(f"Invalid SBS_WORKERS '{raw}', using 1")
        return 1
