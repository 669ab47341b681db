"""Corpus indicators: publishing-author counts, migration matrices and their
two percentage normalizations, relative migration index, source rankings,
trajectory-class shares, co-authorship strength and the migration-to-
co-authorship ratio.

Flow counting: a non-stay author contributes one matrix cell. Under the
default ``first-move`` flow that is the first cross-country transition
(origin -> first foreign country). The ``location-at`` flow credits the
author's resolved location in a fixed year as the destination instead, which
is the synchronous reading (requires presence in the destination that year).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import UndefinedValueError
from .ingest import CorpusSnapshot
from .trajectory import CohortSpec, trajectory_table

FLOW_FIRST_MOVE = "first-move"
FLOW_LOCATION_AT = "location-at"

# Default study set: ten growing plus seven established science systems
# (codes are opaque normalized tokens).
DEFAULT_STUDY_COUNTRIES = (
    "AUS", "BRA", "CHN", "DEU", "EGY", "GRB", "IND", "IRN", "ITA",
    "JPN", "MYS", "NLD", "PAK", "PRT", "ROM", "THA", "USA",
)


@dataclass
class IndicatorReport:
    """Serializable result of one analysis; stable ordering for diffability."""

    indicator: str
    cohort: dict | None
    parameters: dict
    rows: list[dict]
    columns: list[str] | None = None

    def to_json_text(self) -> str:
        payload = {
            "indicator": self.indicator,
            "cohort": self.cohort,
            "parameters": self.parameters,
            "rows": self.rows,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    def to_csv_text(self) -> str:
        if self.columns:
            cols = self.columns
        else:
            keys: list[str] = []
            for row in self.rows:
                for k in row:
                    if k not in keys:
                        keys.append(k)
            cols = keys
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow(row)
        return buf.getvalue()

    def unit_values(self) -> dict[str, float]:
        """(unit -> value) mapping for reports with unit/value rows."""
        return {row["unit"]: row["value"] for row in self.rows}


@dataclass
class MigrationMatrix:
    """Source x destination author counts with row/column totals.

    ``counts`` holds only nonzero cells; sources may be any country, columns
    are restricted to ``destinations``. Row totals (``from_total``) sum over
    the destination set only.
    """

    destinations: tuple[str, ...]
    counts: dict[str, dict[str, int]]
    cohort: dict | None = None
    flow: str = "constructed"
    from_totals: dict[str, int] = field(init=False)
    to_totals: dict[str, int] = field(init=False)

    def __post_init__(self) -> None:
        if not self.destinations:
            raise ValueError("empty destination set")
        self.destinations = tuple(sorted(set(self.destinations)))
        dest_set = set(self.destinations)
        from_totals: dict[str, int] = {}
        to_totals: dict[str, int] = {d: 0 for d in self.destinations}
        for origin, row in self.counts.items():
            for dest, n in row.items():
                if dest == origin:
                    raise ValueError(f"diagonal cell not allowed: {origin}->{dest}")
                if dest not in dest_set:
                    raise ValueError(f"cell destination {dest} outside destination set")
                if n < 0:
                    raise ValueError("negative cell count")
                if n:
                    from_totals[origin] = from_totals.get(origin, 0) + n
                    to_totals[dest] += n
        self.from_totals = from_totals
        self.to_totals = to_totals

    @classmethod
    def from_counts(
        cls,
        counts: Mapping[str, Mapping[str, int]],
        destinations: Iterable[str],
        cohort: dict | None = None,
        flow: str = "constructed",
    ) -> "MigrationMatrix":
        clean = {
            a: {b: int(n) for b, n in row.items() if n}
            for a, row in counts.items()
            if any(row.values())
        }
        return cls(tuple(destinations), clean, cohort, flow)

    def cell(self, origin: str, dest: str) -> int:
        return self.counts.get(origin, {}).get(dest, 0)

    def from_total(self, origin: str) -> int:
        return self.from_totals.get(origin, 0)

    def to_total(self, dest: str) -> int:
        return self.to_totals.get(dest, 0)

    def sources(self) -> list[str]:
        return sorted(self.from_totals)

    def pairs(self) -> list[tuple[str, str, int]]:
        out = [
            (a, b, n)
            for a, row in self.counts.items()
            for b, n in row.items()
            if n
        ]
        out.sort()
        return out


def count_publishing_authors(
    snapshot: CorpusSnapshot, year: int, authors: set[str] | None = None
) -> dict[str, int]:
    """Authors publishing in ``year`` per resolved country (one per author)."""
    if not snapshot.window.contains(year):
        raise ValueError(f"year {year} outside window")
    table = trajectory_table(snapshot)
    loc = table.location_in_year(year)
    mask = loc >= 0
    if authors is not None:
        allowed = np.zeros(table.n_authors, dtype=bool)
        for a in authors:
            idx = table.author_index.get(a)
            if idx is not None:
                allowed[idx] = True
        mask &= allowed
    counts = np.bincount(loc[mask], minlength=len(table.countries))
    return {
        table.countries[i]: int(counts[i]) for i in np.nonzero(counts)[0]
    }


def _cohort_indices(table, cohort: Iterable[str]) -> np.ndarray:
    idxs = [table.author_index[a] for a in cohort if a in table.author_index]
    idxs.sort()
    return np.asarray(idxs, dtype=np.int64)


def migration_matrix(
    snapshot: CorpusSnapshot,
    cohort: Iterable[str],
    destinations: Iterable[str],
    flow: str = FLOW_FIRST_MOVE,
    at_year: int | None = None,
    cohort_desc: dict | None = None,
    horizon: int | None = None,
) -> MigrationMatrix:
    """Count one move per migrating cohort author into the destination set."""
    destinations = tuple(sorted(set(destinations)))
    if not destinations:
        raise ValueError("empty destination set")
    if flow not in (FLOW_FIRST_MOVE, FLOW_LOCATION_AT):
        raise ValueError(f"unknown flow: {flow}")
    if flow == FLOW_LOCATION_AT and at_year is None:
        raise ValueError("location-at flow requires at_year")
    table = trajectory_table(snapshot, horizon)
    idxs = _cohort_indices(table, cohort)
    counts: dict[str, dict[str, int]] = {}
    if idxs.size:
        origins = table.origin[idxs]
        if flow == FLOW_FIRST_MOVE:
            dests = table.dest[idxs].astype(np.int64)
        else:
            dests = table.location_in_year(at_year)[idxs]
        valid = (dests >= 0) & (dests != origins)
        dest_idx = np.asarray(
            [table.country_index[c] for c in destinations if c in table.country_index],
            dtype=np.int64,
        )
        valid &= np.isin(dests, dest_idx)
        if valid.any():
            pair_codes = origins[valid] * len(table.countries) + dests[valid]
            uniq, n = np.unique(pair_codes, return_counts=True)
            for code, cnt in zip(uniq.tolist(), n.tolist()):
                o = table.countries[code // len(table.countries)]
                d = table.countries[code % len(table.countries)]
                counts.setdefault(o, {})[d] = cnt
    return MigrationMatrix(destinations, counts, cohort_desc, flow)


def pct_of_destination(matrix: MigrationMatrix, origin: str, dest: str) -> float:
    """Share of movers into ``dest`` that came from ``origin``, in percent."""
    total = matrix.to_total(dest)
    if total == 0:
        raise UndefinedValueError(f"no movers into {dest}")
    return 100.0 * matrix.cell(origin, dest) / total


def rmi(matrix: MigrationMatrix, origin: str, dest: str) -> float:
    """Relative migration index: movers origin->dest over all movers from
    origin into the destination set. In [0, 1]."""
    total = matrix.from_total(origin)
    if total == 0:
        raise UndefinedValueError(f"no movers from {origin} into the destination set")
    return matrix.cell(origin, dest) / total


@dataclass(frozen=True, slots=True)
class RankedSource:
    rank: int
    source: str
    authors: int
    rmi: float


@dataclass
class SourceRankings:
    destination: str
    by_count: list[RankedSource]
    by_rmi: list[RankedSource]
    truncated: bool


def rank_sources(
    matrix: MigrationMatrix, destination: str, k: int, pool: int
) -> SourceRankings:
    """Top-k sources into ``destination`` by author count, and by RMI among
    the top-``pool`` sources by count. Ties break by country code."""
    if destination not in matrix.destinations:
        raise ValueError(f"{destination} not in the destination set")
    if k < 1 or pool < k:
        raise ValueError("need pool >= k >= 1")
    nonzero = [
        (a, matrix.cell(a, destination))
        for a in matrix.sources()
        if matrix.cell(a, destination) > 0
    ]
    nonzero.sort(key=lambda t: (-t[1], t[0]))
    truncated = len(nonzero) < k
    by_count = [
        RankedSource(i + 1, a, n, rmi(matrix, a, destination))
        for i, (a, n) in enumerate(nonzero[:k])
    ]
    pool_rows = nonzero[:pool]
    pool_rows.sort(key=lambda t: (-rmi(matrix, t[0], destination), t[0]))
    by_rmi = [
        RankedSource(i + 1, a, n, rmi(matrix, a, destination))
        for i, (a, n) in enumerate(pool_rows[:k])
    ]
    return SourceRankings(destination, by_count, by_rmi, truncated)


@dataclass(frozen=True, slots=True)
class ClassShares:
    n: int
    stay: float
    permanent: float
    returned: float
    other: float

    @property
    def moved_abroad(self) -> float:
        return 100.0 - self.stay


@dataclass
class AsyncSummary:
    """Per-origin trajectory-class percentage breakdown of a cohort."""

    cohort: dict | None
    shares: dict[str, ClassShares]


def async_summary(
    snapshot: CorpusSnapshot,
    cohort: Iterable[str],
    origins: Iterable[str] | None = None,
    cohort_desc: dict | None = None,
    horizon: int | None = None,
) -> AsyncSummary:
    """Stay / permanent / return / other shares per origin country.

    Origins with zero cohort authors are omitted.
    """
    table = trajectory_table(snapshot, horizon)
    idxs = _cohort_indices(table, cohort)
    shares: dict[str, ClassShares] = {}
    if idxs.size:
        origin_codes = table.origin[idxs]
        class_codes = table.class_code[idxs]
        wanted: set[int] | None = None
        if origins is not None:
            wanted = {
                table.country_index[c] for c in origins if c in table.country_index
            }
        for code in np.unique(origin_codes).tolist():
            if wanted is not None and code not in wanted:
                continue
            sel = class_codes[origin_codes == code]
            n = int(sel.size)
            per = np.bincount(sel, minlength=4) * 100.0 / n
            shares[table.countries[code]] = ClassShares(
                n, float(per[0]), float(per[1]), float(per[2]), float(per[3])
            )
    return AsyncSummary(cohort_desc, shares)


@dataclass(frozen=True, slots=True)
class RegressionLine:
    slope: float
    intercept: float


def ols_fit(points: Sequence[tuple[float, float]]) -> RegressionLine:
    """Ordinary least squares of y on x."""
    if len(points) < 2:
        raise UndefinedValueError("degenerate-regression: need at least 2 points")
    x = np.asarray([p[0] for p in points], dtype=np.float64)
    y = np.asarray([p[1] for p in points], dtype=np.float64)
    xc = x - x.mean()
    sxx = float(np.dot(xc, xc))
    if sxx == 0.0:
        raise UndefinedValueError("degenerate-regression: zero variance in x")
    slope = float(np.dot(xc, y - y.mean())) / sxx
    return RegressionLine(slope, float(y.mean() - slope * x.mean()))


def _coauth_index(snapshot: CorpusSnapshot) -> dict[str, np.ndarray]:
    """Country -> sorted array of paper ordinals whose affiliation-country
    union contains that country."""
    cached = snapshot._caches.get("coauth_index")
    if cached is None:
        postings: dict[str, list[int]] = {}
        for ordinal, paper in enumerate(sorted(snapshot.records_by_paper)):
            union: set[str] = set()
            for rec in snapshot.records_by_paper[paper]:
                union.update(rec.countries)
            for code in union:
                postings.setdefault(code, []).append(ordinal)
        cached = {c: np.asarray(v, dtype=np.int64) for c, v in postings.items()}
        snapshot._caches["coauth_index"] = cached
    return cached


def coauth_strength(snapshot: CorpusSnapshot, a: str, b: str) -> float:
    """Percentage of papers involving country ``a`` that also involve ``b``."""
    if a == b:
        raise ValueError("co-authorship strength needs two distinct countries")
    index = _coauth_index(snapshot)
    papers_a = index.get(a)
    if papers_a is None or papers_a.size == 0:
        raise UndefinedValueError(f"no papers involving {a}")
    papers_b = index.get(b)
    if papers_b is None or papers_b.size == 0:
        return 0.0
    joint = np.intersect1d(papers_a, papers_b, assume_unique=True).size
    return 100.0 * joint / papers_a.size


def migration_coauth_ratio(
    snapshot: CorpusSnapshot,
    cohort: Iterable[str],
    a: str,
    b: str,
    matrix: MigrationMatrix | None = None,
    horizon: int | None = None,
) -> float:
    """Percentage of cohort authors with origin ``a`` migrating to ``b``,
    over the co-authorship strength of the pair.

    Raises UndefinedValueError for zero co-authorship (the pair is excluded,
    never reported as infinity).
    """
    if a == b:
        raise ValueError("ratio needs two distinct countries")
    strength = coauth_strength(snapshot, a, b)
    if strength == 0.0:
        raise UndefinedValueError(f"zero co-authorship between {a} and {b}")
    table = trajectory_table(snapshot, horizon)
    idxs = _cohort_indices(table, cohort)
    a_idx = table.country_index.get(a)
    if a_idx is None:
        raise UndefinedValueError(f"no cohort authors with origin {a}")
    origins = table.origin[idxs]
    origin_n = int((origins == a_idx).sum())
    if origin_n == 0:
        raise UndefinedValueError(f"no cohort authors with origin {a}")
    if matrix is not None:
        moved = matrix.cell(a, b)
    else:
        b_idx = table.country_index.get(b)
        if b_idx is None:
            moved = 0
        else:
            moved = int(
                ((origins == a_idx) & (table.dest[idxs] == b_idx)).sum()
            )
    pct_migrating = 100.0 * moved / origin_n
    return pct_migrating / strength


# --- report builders -------------------------------------------------------


def publishing_authors_report(
    snapshot: CorpusSnapshot, year: int, authors: set[str] | None = None
) -> IndicatorReport:
    counts = count_publishing_authors(snapshot, year, authors)
    rows = [{"unit": c, "value": counts[c]} for c in sorted(counts)]
    return IndicatorReport(
        indicator="publishing-authors",
        cohort=None,
        parameters={"year": year, "filtered": authors is not None},
        rows=rows,
        columns=["unit", "value"],
    )


def matrix_report(matrix: MigrationMatrix) -> IndicatorReport:
    rows = [
        {"unit": f"{a}->{b}", "source": a, "destination": b, "value": n}
        for a, b, n in matrix.pairs()
    ]
    return IndicatorReport(
        indicator="migrating-authors",
        cohort=matrix.cohort,
        parameters={"flow": matrix.flow, "destinations": list(matrix.destinations)},
        rows=rows,
        columns=["unit", "source", "destination", "value"],
    )


def rankings_report(
    matrix: MigrationMatrix, k: int, pool: int, destinations: Iterable[str] | None = None
) -> IndicatorReport:
    rows = []
    targets = sorted(destinations) if destinations is not None else list(matrix.destinations)
    truncated: list[str] = []
    for dest in targets:
        ranking = rank_sources(matrix, dest, k, pool)
        if ranking.truncated:
            truncated.append(dest)
        for basis, ranked in (("authors", ranking.by_count), ("rmi", ranking.by_rmi)):
            for r in ranked:
                rows.append(
                    {
                        "destination": dest,
                        "basis": basis,
                        "rank": r.rank,
                        "source": r.source,
                        "authors": r.authors,
                        "rmi": r.rmi,
                    }
                )
    return IndicatorReport(
        indicator="source-rankings",
        cohort=matrix.cohort,
        parameters={"k": k, "pool": pool, "truncated_destinations": truncated},
        rows=rows,
        columns=["destination", "basis", "rank", "source", "authors", "rmi"],
    )


def async_shares_report(summary: AsyncSummary) -> IndicatorReport:
    rows = [
        {
            "unit": origin,
            "n": s.n,
            "stay": s.stay,
            "permanent": s.permanent,
            "return": s.returned,
            "other": s.other,
            "moved_abroad": s.moved_abroad,
        }
        for origin, s in sorted(summary.shares.items())
    ]
    return IndicatorReport(
        indicator="trajectory-class-shares",
        cohort=summary.cohort,
        parameters={},
        rows=rows,
        columns=["unit", "n", "stay", "permanent", "return", "other", "moved_abroad"],
    )


def moved_abroad_report(summary: AsyncSummary) -> IndicatorReport:
    rows = [
        {"unit": origin, "value": s.moved_abroad}
        for origin, s in sorted(summary.shares.items())
    ]
    return IndicatorReport(
        indicator="pct-moved-abroad",
        cohort=summary.cohort,
        parameters={},
        rows=rows,
        columns=["unit", "value"],
    )


def pair_counts_report(matrix: MigrationMatrix, sources: Iterable[str] | None = None) -> IndicatorReport:
    allowed = set(sources) if sources is not None else None
    rows = [
        {"unit": f"{a}->{b}", "source": a, "destination": b, "value": n}
        for a, b, n in matrix.pairs()
        if allowed is None or a in allowed
    ]
    return IndicatorReport(
        indicator="migrating-authors",
        cohort=matrix.cohort,
        parameters={"flow": matrix.flow, "sources": sorted(allowed) if allowed else None},
        rows=rows,
        columns=["unit", "source", "destination", "value"],
    )


def ratio_report(
    snapshot: CorpusSnapshot,
    cohort: Iterable[str],
    matrix: MigrationMatrix,
    sources: Iterable[str],
    cohort_desc: dict | None = None,
    horizon: int | None = None,
) -> IndicatorReport:
    """Migration / co-authorship ratio per (source, destination) pair.

    Pairs with zero or undefined co-authorship are excluded and listed in the
    report parameters.
    """
    cohort = set(cohort)
    rows = []
    excluded: list[str] = []
    source_set = set(sources)
    for a, b, _ in matrix.pairs():
        if a not in source_set:
            continue
        try:
            value = migration_coauth_ratio(snapshot, cohort, a, b, matrix, horizon)
        except UndefinedValueError:
            excluded.append(f"{a}->{b}")
            continue
        rows.append({"unit": f"{a}->{b}", "source": a, "destination": b, "value": value})
    return IndicatorReport(
        indicator="migration-coauth-ratio",
        cohort=cohort_desc,
        parameters={"excluded_pairs": excluded},
        rows=rows,
        columns=["unit", "source", "destination", "value"],
    )


def regression_report(
    summary: AsyncSummary, y_axis: str = "permanent", x_axis: str = "return"
) -> IndicatorReport:
    """OLS reference line over per-origin class shares.

    Default regresses the permanent-move share on the move-and-return share;
    the axis choice is a parameter.
    """
    fields = {"stay", "permanent", "return", "other", "moved_abroad"}
    if x_axis not in fields or y_axis not in fields:
        raise ValueError(f"axes must be one of {sorted(fields)}")

    def pick(s: ClassShares, name: str) -> float:
        return {
            "stay": s.stay,
            "permanent": s.permanent,
            "return": s.returned,
            "other": s.other,
            "moved_abroad": s.moved_abroad,
        }[name]

    points = [
        (pick(s, x_axis), pick(s, y_axis)) for _, s in sorted(summary.shares.items())
    ]
    line = ols_fit(points)
    rows = [{"slope": line.slope, "intercept": line.intercept, "n": len(points)}]
    return IndicatorReport(
        indicator="class-share-regression",
        cohort=summary.cohort,
        parameters={"x": x_axis, "y": y_axis},
        rows=rows,
        columns=["slope", "intercept", "n"],
    )
