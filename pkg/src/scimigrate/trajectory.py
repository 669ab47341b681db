"""Author trajectories: yearly locations, migration pattern classification,
cohort selection.

The per-author functions here are the reference semantics. Bulk analysis goes
through :class:`TrajectoryTable`, which flattens a snapshot into arrays and
resolves every author in one kernel pass; the two paths agree exactly
(tested), including the modal tie-break.

Yearly location rule: the modal country of the year's (paper, country)
incidence multiset, ties broken by lexicographically smallest code. The
origin of an author is the first entry of the run-length-compressed
location sequence.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import _kernels
from .ingest import CorpusSnapshot, PublicationRecord, Window

STAY = "stay"
PERMANENT_MOVE = "permanent-move"
MOVE_AND_RETURN = "move-and-return"
OTHER = "other"

CLASS_KINDS = {
    _kernels.CLASS_STAY: STAY,
    _kernels.CLASS_PERMANENT: PERMANENT_MOVE,
    _kernels.CLASS_RETURN: MOVE_AND_RETURN,
    _kernels.CLASS_OTHER: OTHER,
}

SYNCHRONOUS = "synchronous"
ASYNCHRONOUS = "asynchronous"


@dataclass(frozen=True, slots=True)
class TrajectoryClass:
    """Migration pattern of one author.

    ``origin``/``destination`` are set for the two single-move kinds only;
    multi-destination and oscillating patterns are ``other``.
    """

    kind: str
    origin: str | None = None
    destination: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in (STAY, PERMANENT_MOVE, MOVE_AND_RETURN, OTHER):
            raise ValueError(f"unknown trajectory class kind: {self.kind}")
        if self.kind in (PERMANENT_MOVE, MOVE_AND_RETURN):
            if self.origin is None or self.destination is None:
                raise ValueError(f"{self.kind} requires origin and destination")
            if self.origin == self.destination:
                raise ValueError("origin and destination must differ")


@dataclass(frozen=True, slots=True)
class LocationSequence:
    """Run-length-compressed yearly locations: no two adjacent runs equal."""

    runs: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.runs:
            raise ValueError("empty location sequence")
        for a, b in zip(self.runs, self.runs[1:]):
            if a == b:
                raise ValueError("adjacent runs must differ")

    @property
    def origin(self) -> str:
        return self.runs[0]

    @property
    def moved_abroad(self) -> bool:
        return len(self.runs) >= 2


@dataclass(slots=True)
class AuthorTrajectory:
    author_id: str
    active_years: dict[int, tuple[str, ...]]
    yearly_location: tuple[tuple[int, str], ...]
    first_pub_year: int
    last_pub_year: int
    total_papers: int
    papers_per_window_year: Fraction


def _modal_country(incidences: Iterable[str]) -> str:
    counts = Counter(incidences)
    return min(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]


def build_trajectory(
    records: Sequence[PublicationRecord], window: Window
) -> AuthorTrajectory:
    """Fold one author's records into a trajectory.

    ``papers_per_window_year`` divides by the full window length, not the
    number of active years.
    """
    if not records:
        raise ValueError("no-records")
    author_id = records[0].author_id
    years: dict[int, list[str]] = {}
    for rec in records:
        if rec.author_id != author_id:
            raise ValueError(
                f"records span several authors: {author_id!r} and {rec.author_id!r}"
            )
        years.setdefault(rec.year, []).extend(rec.countries)
    active_years = {y: tuple(sorted(cs)) for y, cs in sorted(years.items())}
    yearly = tuple((y, _modal_country(cs)) for y, cs in active_years.items())
    return AuthorTrajectory(
        author_id=author_id,
        active_years=active_years,
        yearly_location=yearly,
        first_pub_year=min(active_years),
        last_pub_year=max(active_years),
        total_papers=len(records),
        papers_per_window_year=Fraction(len(records), window.length),
    )


def resolve_yearly_location(trajectory: AuthorTrajectory) -> tuple[tuple[int, str], ...]:
    """One (year, country) per active year via the modal rule."""
    if not trajectory.active_years:
        raise ValueError("no-records")
    return tuple(
        (y, _modal_country(cs)) for y, cs in sorted(trajectory.active_years.items())
    )


def is_transient(trajectory: AuthorTrajectory) -> bool:
    """True iff every record falls in one single calendar year."""
    return len(trajectory.active_years) == 1


def compress(yearly_location: Sequence) -> LocationSequence:
    """Merge adjacent equal countries. Accepts (year, country) pairs or bare
    country codes."""
    if not yearly_location:
        raise ValueError("empty yearly location")
    first = yearly_location[0]
    countries = [c for _, c in yearly_location] if isinstance(first, tuple) else list(yearly_location)
    runs = [countries[0]]
    for c in countries[1:]:
        if c != runs[-1]:
            runs.append(c)
    return LocationSequence(tuple(runs))


def classify(sequence: LocationSequence) -> TrajectoryClass:
    runs = sequence.runs
    if len(runs) == 1:
        return TrajectoryClass(STAY)
    if len(runs) == 2:
        return TrajectoryClass(PERMANENT_MOVE, runs[0], runs[1])
    if len(runs) == 3 and runs[0] == runs[2]:
        return TrajectoryClass(MOVE_AND_RETURN, runs[0], runs[1])
    return TrajectoryClass(OTHER)


@dataclass(frozen=True)
class CohortSpec:
    """Cohort selector.

    synchronous: authors active in ``pub_year`` whose career started within
    ``career_start``. asynchronous: authors whose career started within
    ``career_start``, followed up to ``horizon`` (window end if omitted).
    Transients are excluded in both modes.
    """

    mode: str
    career_start: tuple[int, int]
    pub_year: int | None = None
    horizon: int | None = None

    def __post_init__(self) -> None:
        if self.mode not in (SYNCHRONOUS, ASYNCHRONOUS):
            raise ValueError(f"unknown cohort mode: {self.mode}")
        lo, hi = self.career_start
        if lo > hi:
            raise ValueError(f"empty-cohort-spec: career start range {lo}:{hi}")
        if self.mode == SYNCHRONOUS and self.pub_year is None:
            raise ValueError("synchronous cohort requires pub_year")

    def describe(self) -> dict:
        out: dict = {"mode": self.mode, "career_start": list(self.career_start)}
        if self.pub_year is not None:
            out["pub_year"] = self.pub_year
        if self.horizon is not None:
            out["horizon"] = self.horizon
        return out


def flatten_incidences(snapshot: CorpusSnapshot, cutoff: int):
    """Flatten a snapshot into the kernel's input arrays.

    Returns (authors, countries, totals, inc_starts, inc_year, inc_country)
    with incidences sorted by (author block, year, country index) and country
    indices in lexicographic code order.
    """
    authors: list[str] = []
    totals: list[int] = []
    country_set: set[str] = set()
    for author in sorted(snapshot.records_by_author):
        bucket = snapshot.records_by_author[author]
        n = 0
        for rec in bucket:
            if rec.year <= cutoff:
                n += 1
                country_set.update(rec.countries)
        if n:
            authors.append(author)
            totals.append(n)
    countries = sorted(country_set)
    country_index = {c: i for i, c in enumerate(countries)}

    inc_author: list[int] = []
    inc_year: list[int] = []
    inc_country: list[int] = []
    for idx, author in enumerate(authors):
        for rec in snapshot.records_by_author[author]:
            if rec.year > cutoff:
                continue
            for code in rec.countries:
                inc_author.append(idx)
                inc_year.append(rec.year)
                inc_country.append(country_index[code])

    n_authors = len(authors)
    a = np.asarray(inc_author, dtype=np.int64)
    y = np.asarray(inc_year, dtype=np.int32)
    c = np.asarray(inc_country, dtype=np.int32)
    order = np.lexsort((c, y, a))
    y = y[order]
    c = c[order]
    starts = np.zeros(n_authors + 1, dtype=np.int64)
    if n_authors:
        np.cumsum(np.bincount(a, minlength=n_authors), out=starts[1:])
    return authors, countries, totals, starts, y, c


class TrajectoryTable:
    """Columnar view of every author trajectory in a snapshot.

    Built once per (snapshot, horizon) and cached on the snapshot; all bulk
    indicator computations run off these arrays.
    """

    def __init__(self, snapshot: CorpusSnapshot, max_year: int | None = None):
        window = snapshot.window
        if max_year is not None and not window.contains(max_year):
            raise ValueError(f"horizon {max_year} outside window")
        cutoff = window.end if max_year is None else max_year

        authors, countries, totals, starts, y, c = flatten_incidences(snapshot, cutoff)
        country_index = {code: i for i, code in enumerate(countries)}
        n_authors = len(authors)

        (
            self.yloc_starts,
            self.yloc_year,
            self.yloc_country,
            self.run_starts,
            self.run_country,
            self.first_year,
            self.last_year,
            self.class_code,
            self.dest,
        ) = _kernels.resolve_trajectories(starts, y, c)

        self.window = window
        self.max_year = max_year
        self.authors = authors
        self.author_index = {a_: i for i, a_ in enumerate(authors)}
        self.countries = countries
        self.country_index = country_index
        self.total_papers = np.asarray(totals, dtype=np.int64)
        self.n_active_years = np.diff(self.yloc_starts)
        self.n_runs = np.diff(self.run_starts)
        self.origin = (
            self.run_country[self.run_starts[:-1]]
            if n_authors
            else np.empty(0, dtype=np.int32)
        )
        self._yloc_author: np.ndarray | None = None

    @property
    def n_authors(self) -> int:
        return len(self.authors)

    @property
    def transient_mask(self) -> np.ndarray:
        return self.n_active_years == 1

    def yloc_author(self) -> np.ndarray:
        """Author index of each row of the concatenated yearly-location arrays."""
        if self._yloc_author is None:
            self._yloc_author = np.repeat(
                np.arange(self.n_authors, dtype=np.int64), self.n_active_years
            )
        return self._yloc_author

    def sequence(self, idx: int) -> LocationSequence:
        s, e = self.run_starts[idx], self.run_starts[idx + 1]
        return LocationSequence(tuple(self.countries[ci] for ci in self.run_country[s:e]))

    def trajectory_class(self, idx: int) -> TrajectoryClass:
        kind = CLASS_KINDS[int(self.class_code[idx])]
        if kind in (PERMANENT_MOVE, MOVE_AND_RETURN):
            return TrajectoryClass(
                kind,
                self.countries[self.origin[idx]],
                self.countries[self.dest[idx]],
            )
        return TrajectoryClass(kind)

    def location_at(self, idx: int, year: int) -> int:
        """Resolved country index for ``year`` or -1 if inactive that year."""
        s, e = self.yloc_starts[idx], self.yloc_starts[idx + 1]
        pos = int(np.searchsorted(self.yloc_year[s:e], year))
        if pos < e - s and self.yloc_year[s + pos] == year:
            return int(self.yloc_country[s + pos])
        return -1

    def active_in_year_mask(self, year: int) -> np.ndarray:
        mask = np.zeros(self.n_authors, dtype=bool)
        rows = self.yloc_year == year
        mask[self.yloc_author()[rows]] = True
        return mask

    def location_in_year(self, year: int) -> np.ndarray:
        """Country index per author for ``year``; -1 where inactive."""
        out = np.full(self.n_authors, -1, dtype=np.int64)
        rows = self.yloc_year == year
        out[self.yloc_author()[rows]] = self.yloc_country[rows]
        return out


def trajectory_table(
    snapshot: CorpusSnapshot, max_year: int | None = None
) -> TrajectoryTable:
    """Cached accessor for a snapshot's trajectory table."""
    if max_year is not None and max_year >= snapshot.window.end:
        max_year = None
    key = ("trajectory_table", max_year)
    table = snapshot._caches.get(key)
    if table is None:
        table = TrajectoryTable(snapshot, max_year)
        snapshot._caches[key] = table
    return table


def select_cohort(snapshot: CorpusSnapshot, spec: CohortSpec) -> set[str]:
    """Author ids matching the cohort spec; transients never qualify."""
    window = snapshot.window
    lo, hi = spec.career_start
    if not (window.contains(lo) and window.contains(hi)):
        raise ValueError(f"career start range {lo}:{hi} outside window")
    if spec.mode == SYNCHRONOUS:
        if not window.contains(spec.pub_year):
            raise ValueError(f"pub_year {spec.pub_year} outside window")
        table = trajectory_table(snapshot)
        mask = (
            ~table.transient_mask
            & (table.first_year >= lo)
            & (table.first_year <= hi)
            & table.active_in_year_mask(spec.pub_year)
        )
    else:
        table = trajectory_table(snapshot, spec.horizon)
        mask = ~table.transient_mask & (table.first_year >= lo) & (table.first_year <= hi)
    return {table.authors[i] for i in np.nonzero(mask)[0]}
