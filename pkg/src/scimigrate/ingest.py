"""Record parsing and immutable corpus snapshots.

Input is UTF-8 line-delimited JSON, one object per (paper, author) pair with
keys ``paper_id`` (string), ``author_id`` (string), ``year`` (integer) and
``countries`` (array of strings). Country codes are normalized to trimmed
uppercase tokens; anything that does not look like an alpha-3 code is still
accepted but flagged on the ingest report, because bibliographic exports mix
ad-hoc codes freely.

A :class:`CorpusSnapshot` is the canonical, order-insensitive grouping of the
accepted records by author and by paper. It serializes to a single
self-describing JSON container with an embedded format version.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import ConsistencyError, IngestError

SNAPSHOT_FORMAT = "scimigrate-snapshot"
SNAPSHOT_FORMAT_VERSION = 1

REASON_MALFORMED = "malformed-row"
REASON_MISSING_FIELD = "missing-field"
REASON_INVALID_FIELD = "invalid-field"
REASON_EMPTY_COUNTRIES = "empty-countries"
REASON_YEAR_OUT_OF_WINDOW = "year-out-of-window"
REASON_EXACT_DUPLICATE = "exact-duplicate"

_ALPHA3 = re.compile(r"^[A-Z]{3}$")


@dataclass(frozen=True, slots=True)
class Window:
    """Closed analysis window [start, end] in calendar years."""

    start: int
    end: int

    def __post_init__(self) -> None:
        if self.start > self.end:
            raise ValueError(f"empty window: [{self.start}, {self.end}]")

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    def contains(self, year: int) -> bool:
        return self.start <= year <= self.end


@dataclass(frozen=True, slots=True)
class PublicationRecord:
    """One (paper, author) row: where this author was affiliated on this paper.

    ``countries`` is normalized: uppercase, trimmed, deduplicated, sorted.
    """

    paper_id: str
    author_id: str
    year: int
    countries: tuple[str, ...]


@dataclass
class IngestReport:
    """Per-run accounting: accepted + rejected == total input rows."""

    accepted: int = 0
    rejected: int = 0
    reasons: dict[str, int] = field(default_factory=dict)
    flagged_codes: dict[str, int] = field(default_factory=dict)

    def reject(self, reason: str) -> None:
        self.rejected += 1
        self.reasons[reason] = self.reasons.get(reason, 0) + 1

    def flag_code(self, code: str) -> None:
        self.flagged_codes[code] = self.flagged_codes.get(code, 0) + 1

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "rejected": self.rejected,
            "reasons": dict(sorted(self.reasons.items())),
            "flagged_codes": dict(sorted(self.flagged_codes.items())),
        }


def normalize_country(raw: str) -> str:
    return raw.strip().upper()


def parse_records(
    lines: Iterable[str], window: Window, dedup: bool = True
) -> tuple[list[PublicationRecord], IngestReport]:
    """Parse line-delimited rows into validated records.

    Malformed rows are counted per reason, never silently dropped. Exact
    duplicate rows are collapsed (and counted) when ``dedup`` is set.
    Whitespace-only lines are not rows.
    """
    report = IngestReport()
    records: list[PublicationRecord] = []
    seen: set[PublicationRecord] = set()
    iterator = iter(lines)
    while True:
        try:
            line = next(iterator)
        except StopIteration:
            break
        except (OSError, UnicodeDecodeError) as exc:
            raise IngestError(f"unreadable stream: {exc}") from exc
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except (json.JSONDecodeError, UnicodeDecodeError):
            report.reject(REASON_MALFORMED)
            continue
        if not isinstance(row, dict):
            report.reject(REASON_MALFORMED)
            continue
        try:
            paper_id = row["paper_id"]
            author_id = row["author_id"]
            year = row["year"]
            countries = row["countries"]
        except KeyError:
            report.reject(REASON_MISSING_FIELD)
            continue
        if (
            not isinstance(paper_id, str)
            or not paper_id
            or not isinstance(author_id, str)
            or not author_id
            or isinstance(year, bool)
            or not isinstance(year, int)
            or not isinstance(countries, list)
        ):
            report.reject(REASON_INVALID_FIELD)
            continue
        if not countries:
            report.reject(REASON_EMPTY_COUNTRIES)
            continue
        normalized: set[str] = set()
        bad_entry = False
        for raw in countries:
            if not isinstance(raw, str):
                bad_entry = True
                break
            code = normalize_country(raw)
            if not code:
                bad_entry = True
                break
            normalized.add(code)
        if bad_entry:
            report.reject(REASON_INVALID_FIELD)
            continue
        if not window.contains(year):
            report.reject(REASON_YEAR_OUT_OF_WINDOW)
            continue
        record = PublicationRecord(paper_id, author_id, year, tuple(sorted(normalized)))
        if dedup:
            if record in seen:
                report.reject(REASON_EXACT_DUPLICATE)
                continue
            seen.add(record)
        report.accepted += 1
        for code in record.countries:
            if not _ALPHA3.match(code):
                report.flag_code(code)
        records.append(record)
    return records, report


@dataclass(frozen=True, slots=True)
class Provenance:
    source_digest: str | None = None
    ingested_at: str | None = None

    def to_dict(self) -> dict:
        return {"source_digest": self.source_digest, "ingested_at": self.ingested_at}

    @classmethod
    def from_dict(cls, d: Mapping) -> "Provenance":
        return cls(d.get("source_digest"), d.get("ingested_at"))


@dataclass
class CorpusSnapshot:
    """Immutable grouping of validated records by author and by paper.

    Author buckets are sorted by (year, paper_id); paper buckets by
    (year, author_id). Construction is a deterministic merge, so the same
    record set yields the same snapshot regardless of input order.
    """

    window: Window
    records_by_author: dict[str, list[PublicationRecord]]
    records_by_paper: dict[str, list[PublicationRecord]] = field(compare=False)
    provenance: Provenance = Provenance()
    _caches: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def record_count(self) -> int:
        return sum(len(b) for b in self.records_by_author.values())

    def iter_records(self) -> Iterator[PublicationRecord]:
        for author in sorted(self.records_by_author):
            yield from self.records_by_author[author]

    def countries(self) -> list[str]:
        out: set[str] = set()
        for bucket in self.records_by_author.values():
            for rec in bucket:
                out.update(rec.countries)
        return sorted(out)

    def _payload(self, with_provenance: bool) -> dict:
        authors = sorted(self.records_by_author)
        papers = sorted(self.records_by_paper)
        countries = self.countries()
        a_idx = {a: i for i, a in enumerate(authors)}
        p_idx = {p: i for i, p in enumerate(papers)}
        c_idx = {c: i for i, c in enumerate(countries)}
        rows = []
        for author in authors:
            for rec in self.records_by_author[author]:
                rows.append(
                    [
                        a_idx[rec.author_id],
                        p_idx[rec.paper_id],
                        rec.year,
                        [c_idx[c] for c in rec.countries],
                    ]
                )
        payload = {
            "format": SNAPSHOT_FORMAT,
            "format_version": SNAPSHOT_FORMAT_VERSION,
            "window": [self.window.start, self.window.end],
            "authors": authors,
            "papers": papers,
            "countries": countries,
            "records": rows,
        }
        if with_provenance:
            payload["provenance"] = self.provenance.to_dict()
        return payload

    def serialize(self) -> bytes:
        data = json.dumps(
            self._payload(with_provenance=True), sort_keys=True, separators=(",", ":")
        )
        return data.encode("utf-8") + b"\n"

    def content_digest(self) -> str:
        """Digest over records and window only; invariant under provenance."""
        cached = self._caches.get("content_digest")
        if cached is None:
            data = json.dumps(
                self._payload(with_provenance=False), sort_keys=True, separators=(",", ":")
            )
            cached = hashlib.sha256(data.encode("utf-8")).hexdigest()
            self._caches["content_digest"] = cached
        return cached


def build_snapshot(
    records: Sequence[PublicationRecord],
    window: Window,
    provenance: Provenance | None = None,
) -> CorpusSnapshot:
    """Group validated records into a snapshot.

    Identical duplicate (paper, author) rows collapse; duplicates with
    conflicting fields are a fatal consistency error.
    """
    by_key: dict[tuple[str, str], PublicationRecord] = {}
    for rec in records:
        key = (rec.paper_id, rec.author_id)
        prior = by_key.get(key)
        if prior is None:
            by_key[key] = rec
        elif prior != rec:
            raise ConsistencyError(
                f"conflicting duplicate for paper={rec.paper_id!r} author={rec.author_id!r}"
            )
    by_author: dict[str, list[PublicationRecord]] = {}
    by_paper: dict[str, list[PublicationRecord]] = {}
    for rec in by_key.values():
        if not window.contains(rec.year):
            raise ConsistencyError(
                f"record year {rec.year} outside window [{window.start}, {window.end}]"
            )
        by_author.setdefault(rec.author_id, []).append(rec)
        by_paper.setdefault(rec.paper_id, []).append(rec)
    for bucket in by_author.values():
        bucket.sort(key=lambda r: (r.year, r.paper_id))
    for bucket in by_paper.values():
        bucket.sort(key=lambda r: (r.year, r.author_id))
    return CorpusSnapshot(
        window=window,
        records_by_author=by_author,
        records_by_paper=by_paper,
        provenance=provenance or Provenance(),
    )


def save_snapshot(snapshot: CorpusSnapshot, path) -> None:
    with open(path, "wb") as fh:
        fh.write(snapshot.serialize())


def load_snapshot(path) -> CorpusSnapshot:
    try:
        with open(path, "rb") as fh:
            payload = json.loads(fh.read().decode("utf-8"))
    except OSError as exc:
        raise IngestError(f"file-not-found: {path}") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise IngestError(f"unreadable snapshot container: {path}") from exc
    if not isinstance(payload, dict) or payload.get("format") != SNAPSHOT_FORMAT:
        raise IngestError(f"not a snapshot container: {path}")
    version = payload.get("format_version")
    if version != SNAPSHOT_FORMAT_VERSION:
        raise IngestError(f"unsupported snapshot format_version: {version}")
    try:
        window = Window(*payload["window"])
        authors = payload["authors"]
        papers = payload["papers"]
        countries = payload["countries"]
        records = [
            PublicationRecord(
                papers[pi], authors[ai], year, tuple(countries[ci] for ci in cs)
            )
            for ai, pi, year, cs in payload["records"]
        ]
        provenance = Provenance.from_dict(payload.get("provenance", {}))
    except (KeyError, IndexError, TypeError) as exc:
        raise IngestError(f"corrupt snapshot container: {path}") from exc
    return build_snapshot(records, window, provenance)


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
