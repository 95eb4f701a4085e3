"""Keyword normalisation, lemmatisation, stop words and two-tier synonyms.

Tier 1 is the broad list used to form spotting queries; tier 2 is the
restrictive subset that earns credit at evaluation time. A pair stored with
tier 2 therefore also belongs to tier 1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

from .errors import ContractError

log = logging.getLogger(__name__)

MIN_SIMILARITY = 0.5

_UNITS = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
    "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen",
    "seventeen", "eighteen", "nineteen",
]
_TENS = ["", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"]


def _number_word(n: int) -> str:
    if n < 20:
        return _UNITS[n]
    if n == 100:
        return "hundred"
    tens, unit = divmod(n, 10)
    return _TENS[tens] + ("-" + _UNITS[unit] if unit else "")


NUMBER_WORDS = {str(n): _number_word(n) for n in range(101)}

# ASCII punctuation plus the typographic quotes and dashes found in broadcast subtitles
_PUNCT = "!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~" + "\u2018\u2019\u201c\u201d\u2013\u2014\u2026\u00ab\u00bb"


def normalize_token(token: str, number_words: Optional[Mapping[str, str]] = None) -> str:
    word = token.lower().strip(_PUNCT + " \t\r\n")
    table = NUMBER_WORDS if number_words is None else number_words
    return table.get(word, word)


def tokenize(text: str, number_words: Optional[Mapping[str, str]] = None) -> list[str]:
    tokens = (normalize_token(t, number_words) for t in text.split())
    return [t for t in tokens if t]


def lemmatize(token: str, lemma_table: Mapping[str, str]) -> str:
    return lemma_table.get(token, token)


@dataclass(frozen=True)
class Synonym:
    word: str
    similarity: float
    tier: int


class SynonymTable:
    """Symmetric word -> synonyms map with per-pair tier and similarity."""

    def __init__(self, rows: Iterable[tuple[str, str, float, int]] = ()):
        self._entries: dict[str, dict[str, Synonym]] = {}
        self.n_rejected = 0
        for word, syn, sim, tier in rows:
            self.add(word, syn, sim, tier)

    def add(self, word: str, synonym: str, similarity: float, tier: int) -> bool:
        if tier not in (1, 2):
            raise ContractError(f"synonym tier must be 1 or 2, got {tier}")
        if not 0.0 <= similarity <= 1.0:
            raise ContractError(f"synonym similarity {similarity} outside [0, 1]")
        if similarity < MIN_SIMILARITY:
            self.n_rejected += 1
            log.debug("dropping low-similarity synonym %s/%s (%.3f)", word, synonym, similarity)
            return False
        if word == synonym:
            return False
        for a, b in ((word, synonym), (synonym, word)):
            bucket = self._entries.setdefault(a, {})
            old = bucket.get(b)
            if old is not None:
                # tier 2 is a subset of tier 1: a pair listed in both is tier 2
                tier_ab = max(old.tier, tier)
                sim_ab = max(old.similarity, similarity)
            else:
                tier_ab, sim_ab = tier, similarity
            bucket[b] = Synonym(b, sim_ab, tier_ab)
        return True

    def synonyms(self, word: str, tier: int = 1) -> list[str]:
        """Synonyms usable at ``tier`` (tier 1 includes every tier-2 pair)."""
        bucket = self._entries.get(word, {})
        return sorted(s.word for s in bucket.values() if s.tier >= tier)

    def rows(self):
        """Canonical rows, both directions, sorted."""
        for word in sorted(self._entries):
            for syn in sorted(self._entries[word]):
                s = self._entries[word][syn]
                yield word, syn, s.similarity, s.tier

    def __contains__(self, word):
        return word in self._entries

    def __len__(self):
        return sum(len(b) for b in self._entries.values())


@dataclass
class Lexicon:
    """The text tables used together by query expansion and evaluation."""

    stopwords: frozenset = frozenset()
    lemmas: dict = field(default_factory=dict)
    synonyms: SynonymTable = field(default_factory=SynonymTable)
    number_words: Optional[dict] = None

    def lemma(self, token: str) -> str:
        return lemmatize(normalize_token(token, self.number_words), self.lemmas)

    def content_lemmas(self, text: str) -> list[str]:
        """Lemmatised content words of ``text`` in order of appearance, deduplicated."""
        out: list[str] = []
        for tok in tokenize(text, self.number_words):
            if tok in self.stopwords:
                continue
            lem = lemmatize(tok, self.lemmas)
            if lem in self.stopwords or lem in out:
                continue
            out.append(lem)
        return out

    def expand(self, text: str, tier: Optional[int]) -> set[str]:
        return expand_query(text, self.synonyms, tier, self)

    def matches(self, predicted: str, reference: set) -> bool:
        return matches(predicted, reference, self.synonyms)


def expand_query(text: str, table: SynonymTable, tier: Optional[int], lexicon: Optional[Lexicon] = None) -> set[str]:
    """Content lemmas of ``text`` plus their synonyms of the given tier.

    ``tier=None`` disables synonym expansion.
    """
    if tier not in (None, 1, 2):
        raise ContractError(f"tier must be 1, 2 or None, got {tier}")
    lexicon = lexicon or Lexicon(synonyms=table)
    words = set(lexicon.content_lemmas(text))
    if tier is not None:
        for w in list(words):
            words.update(table.synonyms(w, tier))
    return words


def matches(predicted: str, reference: set, table: SynonymTable) -> bool:
    if predicted in reference:
        return True
    return any(s in reference for s in table.synonyms(predicted, tier=2))
