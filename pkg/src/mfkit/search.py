"""Inverted index over report text with a small filter query language.

Query grammar (the public contract, shared verbatim by the CLI and the
console search box):

    query  := (filter | phrase | term)+
    filter := field ":" value        field in {kind, category, status, location}
    phrase := '"' term+ '"'

Unknown ``x:y`` pairs degrade to plain terms. Free terms are OR-combined
and TF-IDF ranked (idf = ln(1 + N/df)); filters and the optional phrase are
conjunctive. Filters alone form a valid query.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Optional

from .errors import DuplicateDocument, EmptyQuery, NotIndexed, UnbalancedQuote

FILTER_FIELDS = ("kind", "category", "status", "location")

_WORD = re.compile(r"[^\W_]+", re.UNICODE)
_FIELD_GAP = 1  # positions skipped between text fields so phrases stay intra-field


def tokenize(text: str) -> list[str]:
    """Lowercased alphanumeric runs; tokens must be >= 2 chars unless they
    are pure digits. Duplicates are preserved (term frequency)."""
    tokens = _WORD.findall(text.lower())
    return [t for t in tokens if len(t) >= 2 or t.isdigit()]


@dataclass(frozen=True)
class SearchQuery:
    terms: tuple[str, ...] = ()
    phrase: Optional[tuple[str, ...]] = None
    filters: dict = field(default_factory=dict)
    date_from: Optional[str] = None
    date_to: Optional[str] = None

    def __post_init__(self):
        if not self.terms and not self.phrase and not self.filters:
            raise EmptyQuery("query needs terms, a phrase, or filters")
        if self.date_from and self.date_to and self.date_from > self.date_to:
            raise ValueError("date_from must not exceed date_to")
        object.__setattr__(self, "filters", dict(self.filters))


def parse_query(text: str, date_from: str | None = None, date_to: str | None = None) -> SearchQuery:
    """Parse the grammar above. Multiple quoted groups: the first becomes
    THE phrase, later ones contribute their tokens as plain terms."""
    if not text or not text.strip():
        raise EmptyQuery("empty query text")
    if text.count('"') % 2 != 0:
        raise UnbalancedQuote("unclosed quote in query")

    terms: list[str] = []
    phrase: Optional[tuple[str, ...]] = None
    filters: dict[str, str] = {}

    pieces = re.split(r'("[^"]*")', text)
    for piece in pieces:
        if piece.startswith('"') and piece.endswith('"') and len(piece) >= 2:
            quoted = tokenize(piece[1:-1])
            if not quoted:
                continue
            if phrase is None:
                phrase = tuple(quoted)
            else:
                terms.extend(quoted)
            continue
        for word in piece.split():
            if ":" in word:
                fieldname, _, value = word.partition(":")
                if fieldname.lower() in FILTER_FIELDS and value:
                    filters[fieldname.lower()] = value.lower()
                    continue
            terms.extend(tokenize(word))

    # deduplicate free terms, keeping first-seen order
    seen: dict[str, None] = {}
    for t in terms:
        seen.setdefault(t)
    return SearchQuery(
        terms=tuple(seen),
        phrase=phrase,
        filters=filters,
        date_from=date_from,
        date_to=date_to,
    )


@dataclass
class _Doc:
    positions: dict  # term -> ascending position list
    facets: dict
    timestamp: str


class InvertedIndex:
    """In-memory inverted index; mutation runs inside the registry's commit
    path, so the single-writer contract is inherited."""

    def __init__(self):
        self._docs: dict[str, _Doc] = {}
        self._postings: dict[str, dict[str, list[int]]] = {}

    def __len__(self) -> int:
        return len(self._docs)

    def __contains__(self, report_id: str) -> bool:
        return report_id in self._docs

    def index_report(self, report_id: str, text_fields, facet_fields, timestamp: str) -> None:
        if report_id in self._docs:
            raise DuplicateDocument(report_id)
        positions: dict[str, list[int]] = {}
        pos = 0
        for text in text_fields:
            for token in tokenize(text):
                positions.setdefault(token, []).append(pos)
                pos += 1
            pos += _FIELD_GAP
        facets = {k: str(v).lower() for k, v in facet_fields.items() if v is not None}
        self._docs[report_id] = _Doc(positions=positions, facets=facets, timestamp=timestamp)
        for term, plist in positions.items():
            self._postings.setdefault(term, {})[report_id] = plist

    def remove_report(self, report_id: str) -> None:
        doc = self._docs.pop(report_id, None)
        if doc is None:
            raise NotIndexed(report_id)
        for term in doc.positions:
            bucket = self._postings[term]
            del bucket[report_id]
            if not bucket:
                del self._postings[term]

    def reindex_report(self, report_id: str, text_fields, facet_fields, timestamp: str) -> None:
        if report_id in self._docs:
            self.remove_report(report_id)
        self.index_report(report_id, text_fields, facet_fields, timestamp)

    def _phrase_match(self, doc: _Doc, phrase: tuple[str, ...]) -> bool:
        first = doc.positions.get(phrase[0])
        if first is None:
            return False
        rest = [doc.positions.get(t) for t in phrase[1:]]
        if any(r is None for r in rest):
            return False
        rest_sets = [set(r) for r in rest]
        return any(
            all(p + i + 1 in s for i, s in enumerate(rest_sets)) for p in first
        )

    def search(self, query: SearchQuery, limit: int = 50) -> list[tuple[str, float]]:
        """Ranked (report_id, score) pairs: score desc, id asc, truncated."""
        if limit < 1:
            raise ValueError("limit must be >= 1")
        n_docs = len(self._docs)
        if n_docs == 0:
            return []

        if query.terms:
            candidate_ids = set()
            for term in query.terms:
                candidate_ids.update(self._postings.get(term, ()))
        else:
            candidate_ids = set(self._docs)

        results = []
        for doc_id in candidate_ids:
            doc = self._docs[doc_id]
            if any(doc.facets.get(f) != v for f, v in query.filters.items()):
                continue
            if query.date_from is not None and doc.timestamp < query.date_from:
                continue
            if query.date_to is not None and doc.timestamp > query.date_to:
                continue
            if query.phrase and not self._phrase_match(doc, query.phrase):
                continue
            score = 0.0
            for term in query.terms:
                plist = doc.positions.get(term)
                if not plist:
                    continue
                df = len(self._postings[term])
                score += len(plist) * math.log(1.0 + n_docs / df)
            results.append((doc_id, score))
        results.sort(key=lambda pair: (-pair[1], pair[0]))
        return results[:limit]
