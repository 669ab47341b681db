"""Synthetic corpus generation with known ground truth.

Each author follows one career scenario (a pattern of country stints); the
emitted records are single-country rows per paper, so the true yearly
location, run sequence and trajectory class of every author are known by
construction and recorded on a manifest. The manifest is the oracle for
pipeline tests.

Two scenarios describe first publications abroad followed by a return home;
they differ only in where the (unpublished) earlier training happened and
are therefore indistinguishable in the emitted records by construction.

Profile-error injection mimics the two author-profiling failure modes:
split identities (part of an oeuvre moves to fresh ids) and merged homonyms
(two authors concatenated under one id). Fragments are always drawn from a
single calendar year in which the donor keeps at least one paper, so the
donor's trajectory is untouched and a transient filter removes every
fragment.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .ingest import PublicationRecord, Window

MANIFEST_FORMAT = "scimigrate-manifest"
MANIFEST_FORMAT_VERSION = 1

ABROAD_PHD_RETURN = "abroad-phd-return"
MASTERS_HOME_PHD_ABROAD_RETURN = "masters-home-phd-abroad-return"
PHD_HOME_POSTDOC_ABROAD_RETURN = "phd-home-postdoc-abroad-return"
STAY = "stay"
PERMANENT_MOVE = "permanent-move"
BACK_AND_FORTH = "back-and-forth"

SCENARIO_KINDS = (
    ABROAD_PHD_RETURN,
    MASTERS_HOME_PHD_ABROAD_RETURN,
    PHD_HOME_POSTDOC_ABROAD_RETURN,
    STAY,
    PERMANENT_MOVE,
    BACK_AND_FORTH,
)

# Visible (published) stint tokens per kind; O=origin, D=destination. The two
# first-publications-abroad kinds share one pattern on purpose.
_FIXED_TOKENS = {
    ABROAD_PHD_RETURN: ("D", "O"),
    MASTERS_HOME_PHD_ABROAD_RETURN: ("D", "O"),
    PHD_HOME_POSTDOC_ABROAD_RETURN: ("O", "D", "O"),
    STAY: ("O",),
    PERMANENT_MOVE: ("O", "D"),
}

UNIFORM_1_3 = ((1, 1.0), (2, 1.0), (3, 1.0))


@dataclass(frozen=True)
class ScenarioSpec:
    """One career scenario: pattern countries, stint lengths, productivity."""

    kind: str
    origin: str
    destination: str | None = None
    stint_years: tuple[int, ...] = ()
    papers_per_year: tuple[tuple[int, float], ...] = UNIFORM_1_3

    def __post_init__(self) -> None:
        if self.kind not in SCENARIO_KINDS:
            raise ValueError(f"unknown scenario kind: {self.kind}")
        if not self.origin:
            raise ValueError("scenario needs an origin country")
        tokens = self.tokens()
        if len(set(tokens)) > 1:
            if not self.destination:
                raise ValueError(f"{self.kind} needs a destination country")
            if self.destination == self.origin:
                raise ValueError("origin and destination must differ")
        if len(self.stint_years) != len(tokens):
            raise ValueError(
                f"{self.kind} needs {len(tokens)} stint lengths, got {len(self.stint_years)}"
            )
        if any(s < 1 for s in self.stint_years):
            raise ValueError("stint lengths must be >= 1")
        if not self.papers_per_year or any(
            k < 1 or w <= 0 for k, w in self.papers_per_year
        ):
            raise ValueError("papers-per-year distribution needs values >= 1, weights > 0")

    def tokens(self) -> tuple[str, ...]:
        fixed = _FIXED_TOKENS.get(self.kind)
        if fixed is not None:
            return fixed
        # back-and-forth alternates O,D,... over the declared stints
        n = len(self.stint_years) if self.stint_years else 4
        if n < 4:
            raise ValueError("back-and-forth needs at least 4 stints")
        return tuple("O" if i % 2 == 0 else "D" for i in range(n))

    def pattern(self) -> tuple[str, ...]:
        return tuple(
            self.origin if t == "O" else self.destination for t in self.tokens()
        )

    @property
    def total_years(self) -> int:
        return sum(self.stint_years)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "origin": self.origin,
            "destination": self.destination,
            "stint_years": list(self.stint_years),
            "papers_per_year": [list(p) for p in self.papers_per_year],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ScenarioSpec":
        return cls(
            kind=d["kind"],
            origin=d["origin"],
            destination=d.get("destination"),
            stint_years=tuple(d["stint_years"]),
            papers_per_year=tuple(
                (int(k), float(w)) for k, w in d.get("papers_per_year", UNIFORM_1_3)
            ),
        )


@dataclass(frozen=True)
class ErrorModel:
    """Author-profile error rates.

    Fragment sizes follow the explicit head probabilities with a geometric
    tail; each split author gains ``extra_ids_per_author`` fresh ids. Merges
    pair marked authors and concatenate the second oeuvre under the first id.
    """

    split_probability: float = 0.27
    fragment_size_head: tuple[tuple[int, float], ...] = ((1, 0.5), (2, 0.25))
    fragment_tail_decay: float = 0.5
    extra_ids_per_author: tuple[tuple[int, float], ...] = (
        (1, 0.5), (2, 0.3), (3, 0.15), (4, 0.05),
    )
    merge_probability: float = 0.01

    def __post_init__(self) -> None:
        for p in (self.split_probability, self.merge_probability):
            if not 0.0 <= p <= 1.0:
                raise ValueError("probabilities must lie in [0, 1]")
        if not 0.0 <= self.fragment_tail_decay < 1.0:
            raise ValueError("fragment tail decay must lie in [0, 1)")
        head_mass = sum(w for _, w in self.fragment_size_head)
        if head_mass > 1.0 + 1e-9:
            raise ValueError("fragment size head probabilities exceed 1")
        if any(s < 1 for s, _ in self.fragment_size_head):
            raise ValueError("fragment sizes must be >= 1")
        if any(k < 1 or w <= 0 for k, w in self.extra_ids_per_author):
            raise ValueError("extra-id distribution needs values >= 1, weights > 0")

    def to_dict(self) -> dict:
        return {
            "split_probability": self.split_probability,
            "fragment_size_head": [list(p) for p in self.fragment_size_head],
            "fragment_tail_decay": self.fragment_tail_decay,
            "extra_ids_per_author": [list(p) for p in self.extra_ids_per_author],
            "merge_probability": self.merge_probability,
        }


@dataclass(frozen=True)
class ManifestAuthor:
    """Ground truth for one generated author."""

    author_id: str
    scenario: str
    yearly: tuple[tuple[int, str], ...]
    runs: tuple[str, ...]
    trajectory_class: str
    origin: str
    destination: str | None
    total_papers: int
    is_transient: bool
    fragment_ids: tuple[str, ...] = ()
    merged_into: str | None = None

    def observed_ids(self) -> tuple[str, ...]:
        primary = self.merged_into if self.merged_into else self.author_id
        return (primary,) + self.fragment_ids

    def to_dict(self) -> dict:
        return {
            "author_id": self.author_id,
            "scenario": self.scenario,
            "yearly": [list(p) for p in self.yearly],
            "runs": list(self.runs),
            "trajectory_class": self.trajectory_class,
            "origin": self.origin,
            "destination": self.destination,
            "total_papers": self.total_papers,
            "is_transient": self.is_transient,
            "fragment_ids": list(self.fragment_ids),
            "merged_into": self.merged_into,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ManifestAuthor":
        return cls(
            author_id=d["author_id"],
            scenario=d["scenario"],
            yearly=tuple((int(y), c) for y, c in d["yearly"]),
            runs=tuple(d["runs"]),
            trajectory_class=d["trajectory_class"],
            origin=d["origin"],
            destination=d.get("destination"),
            total_papers=int(d["total_papers"]),
            is_transient=bool(d["is_transient"]),
            fragment_ids=tuple(d.get("fragment_ids", ())),
            merged_into=d.get("merged_into"),
        )


@dataclass
class Manifest:
    """Generator ground truth; fully determines the emitted corpus with the
    seed."""

    seed: int
    window: Window
    n_authors: int
    coauth_probability: float
    mix: list[dict]
    authors: list[ManifestAuthor]
    publishing_counts: dict[int, dict[str, int]] = field(default_factory=dict)
    error_model: dict | None = None
    error_seed: int | None = None

    def authors_by_id(self) -> dict[str, ManifestAuthor]:
        return {a.author_id: a for a in self.authors}

    def to_json_text(self) -> str:
        payload = {
            "format": MANIFEST_FORMAT,
            "format_version": MANIFEST_FORMAT_VERSION,
            "seed": self.seed,
            "window": [self.window.start, self.window.end],
            "n_authors": self.n_authors,
            "coauth_probability": self.coauth_probability,
            "mix": self.mix,
            "publishing_counts": {
                str(year): dict(sorted(by_country.items()))
                for year, by_country in sorted(self.publishing_counts.items())
            },
            "error_model": self.error_model,
            "error_seed": self.error_seed,
            "authors": [a.to_dict() for a in self.authors],
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json_text(cls, text: str) -> "Manifest":
        payload = json.loads(text)
        if payload.get("format") != MANIFEST_FORMAT:
            raise ValueError("not a manifest file")
        if payload.get("format_version") != MANIFEST_FORMAT_VERSION:
            raise ValueError("unsupported manifest format_version")
        return cls(
            seed=payload["seed"],
            window=Window(*payload["window"]),
            n_authors=payload["n_authors"],
            coauth_probability=payload["coauth_probability"],
            mix=payload["mix"],
            authors=[ManifestAuthor.from_dict(d) for d in payload["authors"]],
            publishing_counts={
                int(y): dict(v) for y, v in payload["publishing_counts"].items()
            },
            error_model=payload.get("error_model"),
            error_seed=payload.get("error_seed"),
        )


def _sample_discrete(rng: random.Random, pairs: Sequence[tuple[int, float]]) -> int:
    total = sum(w for _, w in pairs)
    r = rng.random() * total
    acc = 0.0
    for value, weight in pairs:
        acc += weight
        if r < acc:
            return value
    return pairs[-1][0]


def _rle(countries: Sequence[str]) -> tuple[str, ...]:
    runs = [countries[0]]
    for c in countries[1:]:
        if c != runs[-1]:
            runs.append(c)
    return tuple(runs)


def _classify_runs(runs: tuple[str, ...]) -> str:
    if len(runs) == 1:
        return "stay"
    if len(runs) == 2:
        return "permanent-move"
    if len(runs) == 3 and runs[0] == runs[2]:
        return "move-and-return"
    return "other"


def generate(
    mix: Sequence[tuple[ScenarioSpec, float]],
    n_authors: int,
    seed: int,
    window: Window = Window(2001, 2011),
    coauth_probability: float = 0.0,
) -> tuple[list[PublicationRecord], Manifest]:
    """Sample ``n_authors`` careers from the weighted scenario mix.

    Deterministic given the arguments. With ``coauth_probability`` > 0, a
    paper may gain one extra record by another generated author active the
    same year in a different country (their resolved location for that year),
    producing cross-country co-authored papers without disturbing any
    trajectory.
    """
    if n_authors < 1:
        raise ValueError("need at least 1 author")
    if not mix:
        raise ValueError("invalid mix: empty")
    weights = [w for _, w in mix]
    if any(w < 0 for w in weights) or abs(sum(weights) - 1.0) > 1e-9:
        raise ValueError("invalid mix: weights must be >= 0 and sum to 1")
    if not 0.0 <= coauth_probability <= 1.0:
        raise ValueError("coauth probability must lie in [0, 1]")
    for spec, _ in mix:
        if spec.total_years > window.length:
            raise ValueError(
                f"scenario {spec.kind} spans {spec.total_years} years, window has {window.length}"
            )

    rng = random.Random(seed)
    cumulative: list[float] = []
    acc = 0.0
    for w in weights:
        acc += w
        cumulative.append(acc)

    records: list[PublicationRecord] = []
    yearly_by_author: list[tuple[tuple[int, str], ...]] = []
    specs_chosen: list[ScenarioSpec] = []
    paper_seq = 0
    # (paper position in `records`, year, country, author position) for coauth
    paper_slots: list[tuple[int, int, str, int]] = []

    for i in range(n_authors):
        r = rng.random()
        pick = 0
        while r >= cumulative[pick] and pick < len(mix) - 1:
            pick += 1
        spec = mix[pick][0]
        specs_chosen.append(spec)
        author_id = f"A{i + 1:07d}"
        start = rng.randint(window.start, window.end - spec.total_years + 1)
        pattern = spec.pattern()
        yearly: list[tuple[int, str]] = []
        year = start
        for country, stint in zip(pattern, spec.stint_years):
            for _ in range(stint):
                papers = _sample_discrete(rng, spec.papers_per_year)
                for _ in range(papers):
                    paper_seq += 1
                    paper_id = f"P{paper_seq:08d}"
                    paper_slots.append((len(records), year, country, i))
                    records.append(
                        PublicationRecord(paper_id, author_id, year, (country,))
                    )
                yearly.append((year, country))
                year += 1
        yearly_by_author.append(tuple(yearly))

    if coauth_probability > 0.0:
        by_year: dict[int, list[int]] = {}
        location: dict[tuple[int, int], str] = {}
        for author_pos, yearly in enumerate(yearly_by_author):
            for year, country in yearly:
                by_year.setdefault(year, []).append(author_pos)
                location[(author_pos, year)] = country
        extra: list[PublicationRecord] = []
        for rec_pos, year, country, author_pos in paper_slots:
            if rng.random() >= coauth_probability:
                continue
            active = by_year[year]
            for _ in range(8):
                partner = active[rng.randrange(len(active))]
                partner_country = location[(partner, year)]
                if partner != author_pos and partner_country != country:
                    base = records[rec_pos]
                    extra.append(
                        PublicationRecord(
                            base.paper_id,
                            f"A{partner + 1:07d}",
                            year,
                            (partner_country,),
                        )
                    )
                    break
        records.extend(extra)

    totals: dict[str, int] = {}
    for rec in records:
        totals[rec.author_id] = totals.get(rec.author_id, 0) + 1

    authors: list[ManifestAuthor] = []
    publishing: dict[int, dict[str, int]] = {}
    for i, (spec, yearly) in enumerate(zip(specs_chosen, yearly_by_author)):
        author_id = f"A{i + 1:07d}"
        runs = _rle([c for _, c in yearly])
        kind = _classify_runs(runs)
        authors.append(
            ManifestAuthor(
                author_id=author_id,
                scenario=spec.kind,
                yearly=yearly,
                runs=runs,
                trajectory_class=kind,
                origin=runs[0],
                destination=runs[1] if len(runs) >= 2 else None,
                total_papers=totals[author_id],
                is_transient=len(yearly) == 1,
            )
        )
        for year, country in yearly:
            bucket = publishing.setdefault(year, {})
            bucket[country] = bucket.get(country, 0) + 1

    manifest = Manifest(
        seed=seed,
        window=window,
        n_authors=n_authors,
        coauth_probability=coauth_probability,
        mix=[{"weight": w, **spec.to_dict()} for spec, w in mix],
        authors=authors,
        publishing_counts=publishing,
    )
    return records, manifest


def _sample_fragment_size(rng: random.Random, model: ErrorModel) -> int:
    r = rng.random()
    acc = 0.0
    for size, weight in model.fragment_size_head:
        acc += weight
        if r < acc:
            return size
    size = max(s for s, _ in model.fragment_size_head) + 1
    while rng.random() < model.fragment_tail_decay:
        size += 1
    return size


def inject_errors(
    records: Sequence[PublicationRecord],
    manifest: Manifest,
    model: ErrorModel,
    seed: int,
) -> tuple[list[PublicationRecord], Manifest]:
    """Perturb author ids with split identities and merged homonyms.

    Fragments take papers from one donor year (leaving the donor at least one
    record there); merged pairs concatenate the second author's remaining
    oeuvre under the first author's id. The returned manifest maps every true
    author to its observed ids.
    """
    rng = random.Random(seed)
    out = list(records)
    indices_by_author: dict[str, list[int]] = {}
    for pos, rec in enumerate(out):
        indices_by_author.setdefault(rec.author_id, []).append(pos)

    updated: list[ManifestAuthor] = []
    for author in manifest.authors:
        fragments: list[str] = []
        if model.split_probability > 0 and rng.random() < model.split_probability:
            year_map: dict[int, list[int]] = {}
            for pos in indices_by_author.get(author.author_id, []):
                year_map.setdefault(out[pos].year, []).append(pos)
            n_extra = _sample_discrete(rng, model.extra_ids_per_author)
            for j in range(n_extra):
                donors = sorted(y for y, lst in year_map.items() if len(lst) >= 2)
                if not donors:
                    break
                size = _sample_fragment_size(rng, model)
                year = donors[rng.randrange(len(donors))]
                bucket = year_map[year]
                take = min(size, len(bucket) - 1)
                chosen = rng.sample(bucket, take)
                fragment_id = f"{author.author_id}-f{j + 1}"
                for pos in chosen:
                    out[pos] = replace(out[pos], author_id=fragment_id)
                    bucket.remove(pos)
                fragments.append(fragment_id)
        updated.append(replace(author, fragment_ids=tuple(fragments)))

    dropped: set[int] = set()
    if model.merge_probability > 0:
        marked = [a for a in updated if rng.random() < model.merge_probability]
        index_of = {a.author_id: i for i, a in enumerate(updated)}
        for host, absorbed in zip(marked[0::2], marked[1::2]):
            host_papers = {
                out[pos].paper_id: pos
                for pos in indices_by_author.get(host.author_id, [])
                if out[pos].author_id == host.author_id
            }
            for pos in indices_by_author.get(absorbed.author_id, []):
                record = out[pos]
                if record.author_id != absorbed.author_id:
                    continue
                hit = host_papers.get(record.paper_id)
                if hit is not None:
                    # co-authored paper: the merged profile lists it once with
                    # the affiliation union
                    union = tuple(sorted(set(out[hit].countries) | set(record.countries)))
                    out[hit] = replace(out[hit], countries=union)
                    dropped.add(pos)
                else:
                    out[pos] = replace(record, author_id=host.author_id)
            updated[index_of[absorbed.author_id]] = replace(
                absorbed, merged_into=host.author_id
            )
    if dropped:
        out = [r for pos, r in enumerate(out) if pos not in dropped]

    perturbed = Manifest(
        seed=manifest.seed,
        window=manifest.window,
        n_authors=manifest.n_authors,
        coauth_probability=manifest.coauth_probability,
        mix=manifest.mix,
        authors=updated,
        publishing_counts=manifest.publishing_counts,
        error_model=model.to_dict(),
        error_seed=seed,
    )
    return out, perturbed


def id_inflation(
    records: Sequence[PublicationRecord],
    manifest: Manifest,
    size_classes: Sequence[tuple[int, int | None]] = ((1, 1), (2, 2), (20, None)),
) -> list[dict]:
    """Observed-to-true author-id count ratio per oeuvre-size class.

    A validation statistic of the error model, not a calibration target: it
    reports how strongly profile errors inflate the number of ids within each
    paper-count class (observed ids sized from the perturbed records, true
    authors from the manifest).
    """
    observed: dict[str, int] = {}
    for rec in records:
        observed[rec.author_id] = observed.get(rec.author_id, 0) + 1
    rows = []
    for lo, hi in size_classes:
        in_class = lambda n: lo <= n and (hi is None or n <= hi)  # noqa: E731
        n_observed = sum(1 for n in observed.values() if in_class(n))
        n_true = sum(1 for a in manifest.authors if in_class(a.total_papers))
        rows.append(
            {
                "size_class": f"{lo}+" if hi is None else (str(lo) if lo == hi else f"{lo}-{hi}"),
                "observed_ids": n_observed,
                "true_authors": n_true,
                "factor": (n_observed / n_true) if n_true else None,
            }
        )
    return rows


def default_mix(
    countries: Sequence[str] | None = None,
) -> list[tuple[ScenarioSpec, float]]:
    """A balanced mix over a country pool: half stay (long and short careers,
    so productivity filters have something to bite on), the rest split across
    the migratory kinds with rotating origin/destination pairs."""
    pool = list(countries) if countries else [
        "AUS", "BRA", "CHN", "DEU", "EGY", "GRB", "IND", "IRN", "ITA",
        "JPN", "MYS", "NLD", "PAK", "PRT", "ROM", "THA", "USA",
    ]
    if len(pool) < 2:
        raise ValueError("default mix needs at least 2 countries")
    mix: list[tuple[ScenarioSpec, float]] = []
    n = len(pool)
    for code in pool:
        mix.append((ScenarioSpec(STAY, code, stint_years=(4,)), 0.30 / n))
        mix.append((ScenarioSpec(STAY, code, stint_years=(2,)), 0.20 / n))
    kinds = [
        (PERMANENT_MOVE, (3, 4), 0.14),
        (PERMANENT_MOVE, (1, 2), 0.06),
        (PHD_HOME_POSTDOC_ABROAD_RETURN, (3, 2, 3), 0.15),
        (ABROAD_PHD_RETURN, (3, 4), 0.05),
        (MASTERS_HOME_PHD_ABROAD_RETURN, (3, 4), 0.05),
        (BACK_AND_FORTH, (2, 2, 2, 2), 0.05),
    ]
    for kind, stints, mass in kinds:
        per = mass / n
        for i, code in enumerate(pool):
            dest = pool[(i + 1) % n]
            mix.append((ScenarioSpec(kind, code, dest, stints), per))
    return mix


def load_mix_file(path) -> tuple[list[tuple[ScenarioSpec, float]], Window | None, float]:
    """Read a scenario-mix JSON file: {window?, coauth_probability?, mix: [...]}"""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, dict) or "mix" not in payload:
        raise ValueError(f"not a scenario mix file: {path}")
    mix = [
        (ScenarioSpec.from_dict(d), float(d["weight"])) for d in payload["mix"]
    ]
    window = Window(*payload["window"]) if "window" in payload else None
    coauth = float(payload.get("coauth_probability", 0.0))
    return mix, window, coauth


def record_to_json_line(rec: PublicationRecord) -> str:
    return json.dumps(
        {
            "paper_id": rec.paper_id,
            "author_id": rec.author_id,
            "year": rec.year,
            "countries": list(rec.countries),
        },
        separators=(",", ":"),
    )


def write_corpus(records: Iterable[PublicationRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(record_to_json_line(rec))
            fh.write("\n")
