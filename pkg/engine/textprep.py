import logging
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

from nltk.stem.snowball import SnowballStemmer
from nltk.util import ngrams

from config import DATA_DIR, ConceptCluster, PrepConfig
from errors import ConfigError

if TYPE_CHECKING:
    from corpus import DocumentRecord

logger = logging.getLogger(__name__)

NGRAM_JOINER = "_"

# alternation order matters: URLs and mentions must win over plain words
_TOKEN_PATTERN = re.compile(
    r"(?P<url>(?:https?://|www\.)\S+)"
    r"|(?P<mention>@\w+)"
    r"|(?P<hashtag>#\w+)"
    r"|(?P<word>[^\W_]+)"
)
_WORD_PATTERN = re.compile(r"[^\W_]+")


class Token(NamedTuple):
    term: str
    start: int
    end: int


@dataclass(frozen=True)
class TokenStream:
    """Processed tokens of one document, in surface order"""

    doc_id: str
    tokens: Tuple[Token, ...]
    word_count: int = 0

    @property
    def terms(self) -> List[str]:
        return [t.term for t in self.tokens]


TokenLike = Union[Token, str]


def _term(token: TokenLike) -> str:
    return token.term if isinstance(token, Token) else token


def tokenize(text: str, cfg: PrepConfig) -> List[Token]:
    """Lowercase word tokens with character spans; punctuation, URLs and mentions removed"""
    tokens: List[Token] = []
    for match in _TOKEN_PATTERN.finditer(text):
        kind = match.lastgroup
        if kind == "url":
            if cfg.strip_urls:
                continue
            tokens.extend(_words(match.group(), match.start()))
        elif kind == "mention":
            if cfg.strip_mentions:
                continue
            tokens.extend(_words(match.group()[1:], match.start() + 1))
        elif kind == "hashtag":
            if cfg.keep_hashtag_body:
                tokens.extend(_words(match.group()[1:], match.start() + 1))
        else:
            tokens.extend(_lowered(match.group(), match.start(), match.end()))
    return tokens


def _lowered(word: str, start: int, end: int) -> List[Token]:
    # lower() can expand a letter into base + combining mark ("İ" -> "i" U+0307); marks never survive a word match
    folded = "".join(ch for ch in word.lower() if unicodedata.category(ch) != "Mn")
    return [Token(piece, start, end) for piece in _WORD_PATTERN.findall(folded)]


def _words(fragment: str, offset: int) -> List[Token]:
    tokens: List[Token] = []
    for m in _WORD_PATTERN.finditer(fragment):
        tokens.extend(_lowered(m.group(), offset + m.start(), offset + m.end()))
    return tokens


@lru_cache(maxsize=None)
def load_stopword_file(language: str) -> FrozenSet[str]:
    """Shipped list: UTF-8, one term per line, '#' starts a comment"""
    path = DATA_DIR / "stopwords" / f"{language}.txt"
    if not path.is_file():
        raise ConfigError(f"no stopword list shipped for language '{language}'")
    words = set()
    for line in path.read_text(encoding="utf-8").splitlines():
        word = line.split("#", 1)[0].strip().lower()
        if word:
            words.add(word)
    if not words:
        raise ConfigError(f"stopword list for '{language}' is empty")
    return frozenset(words)


@lru_cache(maxsize=64)
def _stopword_set(language: str, explicit: Optional[Tuple[str, ...]], extra: Tuple[str, ...]) -> FrozenSet[str]:
    base = load_stopword_file(language) if explicit is None else frozenset(w.strip().lower() for w in explicit)
    return base | frozenset(w.strip().lower() for w in extra if w.strip())


def stopword_set(cfg: PrepConfig) -> FrozenSet[str]:
    return _stopword_set(cfg.language, cfg.stopwords, cfg.extra_stopwords)


def remove_stopwords(tokens: Sequence[TokenLike], cfg: PrepConfig) -> List[TokenLike]:
    stops = stopword_set(cfg)
    return [t for t in tokens if _term(t) not in stops]


def _content_tokens(text: str, cfg: PrepConfig) -> List[Token]:
    """tokenize + stopword removal + length filter: the stream n-grams are counted on"""
    return [t for t in remove_stopwords(tokenize(text, cfg), cfg) if len(t.term) >= cfg.min_token_len]


class NgramVocabulary:
    """Multiword terms (unstemmed word tuples) eligible for merging into one token"""

    def __init__(self, counts: Optional[Dict[Tuple[str, ...], int]] = None):
        self.counts: Dict[Tuple[str, ...], int] = dict(counts or {})
        self.max_n = max((len(k) for k in self.counts), default=1)

    def __contains__(self, gram: Tuple[str, ...]) -> bool:
        return gram in self.counts

    def __len__(self) -> int:
        return len(self.counts)

    def with_phrases(self, phrases: Iterable[Tuple[str, ...]]) -> "NgramVocabulary":
        """Copy including forced phrases (configured multiword keywords) regardless of count"""
        counts = dict(self.counts)
        for phrase in phrases:
            if len(phrase) >= 2:
                counts.setdefault(tuple(phrase), 0)
        return NgramVocabulary(counts)

    def rows(self) -> List[Tuple[str, int]]:
        """(ngram, count) sorted by count desc, then ngram"""
        items = [(NGRAM_JOINER.join(k), v) for k, v in self.counts.items()]
        return sorted(items, key=lambda kv: (-kv[1], kv[0]))


def detect_ngrams(streams: Iterable[Sequence[TokenLike]], cfg: PrepConfig) -> NgramVocabulary:
    """Contiguous bigrams/trigrams whose corpus count reaches ngram_min_count"""
    counter: Counter = Counter()
    for stream in streams:
        terms = [_term(t) for t in stream]
        for n in range(2, cfg.ngram_max + 1):
            counter.update(ngrams(terms, n))
    vocab = {gram: count for gram, count in counter.items() if count >= cfg.ngram_min_count}
    logger.info(f"Detected {len(vocab)} n-grams (threshold {cfg.ngram_min_count})")
    return NgramVocabulary(vocab)


def merge_ngrams(tokens: Sequence[Token], vocab: NgramVocabulary) -> List[Token]:
    """Leftmost-longest tiling: matched words are consumed, never overlapped"""
    if not vocab:
        return list(tokens)
    merged: List[Token] = []
    i = 0
    while i < len(tokens):
        for n in range(min(vocab.max_n, len(tokens) - i), 1, -1):
            gram = tuple(t.term for t in tokens[i:i + n])
            if gram in vocab:
                merged.append(Token(NGRAM_JOINER.join(gram), tokens[i].start, tokens[i + n - 1].end))
                i += n
                break
        else:
            merged.append(tokens[i])
            i += 1
    return merged


@lru_cache(maxsize=None)
def _stemmer(language: str) -> SnowballStemmer:
    if language not in SnowballStemmer.languages:
        raise ConfigError(
            f"unsupported stemming language '{language}' (supported: {', '.join(SnowballStemmer.languages)})"
        )
    return SnowballStemmer(language)


@lru_cache(maxsize=200_000)
def stem(token: str, language: str) -> str:
    """Snowball stem; n-gram tokens are stemmed component-wise"""
    stemmer = _stemmer(language)
    if NGRAM_JOINER in token:
        return NGRAM_JOINER.join(stemmer.stem(part) for part in token.split(NGRAM_JOINER) if part)
    return stemmer.stem(token)


def preprocess(doc: "DocumentRecord", cfg: PrepConfig, vocab: NgramVocabulary) -> TokenStream:
    """tokenize -> stopword removal -> n-gram merge -> stem"""
    raw = tokenize(doc.text, cfg)
    content = [t for t in remove_stopwords(raw, cfg) if len(t.term) >= cfg.min_token_len]
    stops = stopword_set(cfg)
    tokens = []
    for token in merge_ngrams(content, vocab):
        term = stem(token.term, cfg.language)
        if len(term) < cfg.min_token_len or term in stops:
            continue
        tokens.append(Token(term, token.start, token.end))
    return TokenStream(doc_id=doc.id, tokens=tuple(tokens), word_count=len(raw))


def phrase_words(phrase: str, cfg: PrepConfig) -> Tuple[str, ...]:
    """A configured phrase as the unstemmed word tuple documents are matched against"""
    return tuple(t.term for t in _content_tokens(phrase, cfg))


def normalize_phrase(phrase: str, cfg: PrepConfig) -> Optional[str]:
    """The stemmed single token a phrase becomes inside a processed stream"""
    words = phrase_words(phrase, cfg)
    if not words:
        return None
    return stem(NGRAM_JOINER.join(words), cfg.language)


def stem_clusters(clusters: Sequence[ConceptCluster], cfg: PrepConfig) -> List[ConceptCluster]:
    """Clusters with keywords converted to their post-stemming forms"""
    stemmed = []
    for cluster in clusters:
        keywords = []
        for keyword in cluster.keywords:
            form = normalize_phrase(keyword, cfg)
            if form is None:
                logger.warning(f"Keyword '{keyword}' of '{cluster.orientation}' is empty after preprocessing")
                continue
            if form not in keywords:
                keywords.append(form)
        if not keywords:
            raise ConfigError(f"cluster '{cluster.orientation}' has no usable keywords")
        stemmed.append(ConceptCluster(orientation=cluster.orientation, keywords=tuple(sorted(keywords))))
    return stemmed


def cluster_phrases(clusters: Sequence[ConceptCluster], cfg: PrepConfig) -> List[Tuple[str, ...]]:
    return [words for c in clusters for words in (phrase_words(k, cfg) for k in c.keywords) if len(words) >= 2]


def build_vocabulary(docs: Iterable["DocumentRecord"], cfg: PrepConfig, clusters: Sequence[ConceptCluster] = ()) -> NgramVocabulary:
    """Corpus-wide vocabulary plus forced cluster phrases"""
    vocab = detect_ngrams((_content_tokens(d.text, cfg) for d in docs), cfg)
    return vocab.with_phrases(cluster_phrases(clusters, cfg))
