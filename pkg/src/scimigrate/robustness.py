"""Indicator robustness via productivity-filtered re-runs.

Authors are re-selected under per-run productivity bounds, every indicator is
recomputed per run, and the cross-run spread per unit is summarized with the
variation statistic 100*(max-min)/(2*mean), aggregated over all units and
over top-k subsets ranked by the first run's values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import UndefinedValueError
from .indicators import (
    IndicatorReport,
    migration_matrix,
    moved_abroad_report,
    async_summary,
    pair_counts_report,
    publishing_authors_report,
    ratio_report,
)
from .ingest import CorpusSnapshot
from .trajectory import CohortSpec, select_cohort, trajectory_table


@dataclass(frozen=True)
class FilterSpec:
    """Productivity-based author inclusion rule for one robustness run.

    ``min_total_papers_exclusive`` excludes authors with total papers <= the
    bound. ``max_papers_per_year`` bounds total papers divided by the full
    window length; ``exclude_at_limit`` picks >= (True) or > (False) as the
    exclusion test. Either a bound is set or the filter is explicitly the
    identity.
    """

    label: str
    min_total_papers_exclusive: int | None = None
    max_papers_per_year: int | float | Fraction | None = None
    exclude_at_limit: bool = True
    identity: bool = False

    def __post_init__(self) -> None:
        has_bound = (
            self.min_total_papers_exclusive is not None
            or self.max_papers_per_year is not None
        )
        if self.identity and has_bound:
            raise ValueError("identity filter cannot carry bounds")
        if not self.identity and not has_bound:
            raise ValueError("filter needs a bound or identity=True")

    def retains(self, total_papers: int, window_length: int) -> bool:
        """Per-author predicate (transience is handled separately)."""
        if self.identity:
            return True
        if (
            self.min_total_papers_exclusive is not None
            and total_papers <= self.min_total_papers_exclusive
        ):
            return False
        if self.max_papers_per_year is not None:
            rate = Fraction(total_papers, window_length)
            limit = Fraction(self.max_papers_per_year)
            if self.exclude_at_limit:
                if rate >= limit:
                    return False
            elif rate > limit:
                return False
        return True

    def describe(self) -> dict:
        return {
            "label": self.label,
            "identity": self.identity,
            "min_total_papers_exclusive": self.min_total_papers_exclusive,
            "max_papers_per_year": (
                None
                if self.max_papers_per_year is None
                else float(self.max_papers_per_year)
            ),
            "exclude_at_limit": self.exclude_at_limit,
        }


def standard_runs() -> list[FilterSpec]:
    """The three standard author sets: everything; drop 2-paper authors and
    rates >= 7/yr; drop 2-3-paper authors and rates > 5/yr."""
    return [
        FilterSpec("run1", identity=True),
        FilterSpec("run2", min_total_papers_exclusive=2, max_papers_per_year=7,
                   exclude_at_limit=True),
        FilterSpec("run3", min_total_papers_exclusive=3, max_papers_per_year=5,
                   exclude_at_limit=False),
    ]


def apply_filter(
    snapshot: CorpusSnapshot, spec: FilterSpec, horizon: int | None = None
) -> set[str]:
    """Authors violating no bound; transients are excluded regardless."""
    table = trajectory_table(snapshot, horizon)
    keep = ~table.transient_mask
    if not spec.identity:
        totals = table.total_papers
        if spec.min_total_papers_exclusive is not None:
            keep = keep & (totals > spec.min_total_papers_exclusive)
        if spec.max_papers_per_year is not None:
            limit = Fraction(spec.max_papers_per_year)
            lhs = totals * limit.denominator
            rhs = limit.numerator * table.window.length
            keep = keep & ((lhs < rhs) if spec.exclude_at_limit else (lhs <= rhs))
    return {table.authors[i] for i in np.nonzero(keep)[0]}


def variation(values: Sequence[float]) -> float:
    """100 * (max - min) / (2 * mean) across run values."""
    vals = [float(v) for v in values]
    if len(vals) < 2:
        raise ValueError("variation needs at least 2 values")
    mean = sum(vals) / len(vals)
    if mean == 0.0:
        raise UndefinedValueError("variation undefined for zero mean")
    return 100.0 * (max(vals) - min(vals)) / (2.0 * mean)


def skewness(sample: Sequence[float]) -> float:
    """Fisher-Pearson moment coefficient g1 = m3 / m2^(3/2)."""
    xs = np.asarray(sample, dtype=np.float64)
    if xs.size < 3:
        raise ValueError("skewness needs at least 3 values")
    d = xs - xs.mean()
    m2 = float((d * d).mean())
    if m2 == 0.0:
        raise UndefinedValueError("skewness undefined for zero variance")
    m3 = float((d * d * d).mean())
    return m3 / m2**1.5


@dataclass
class RunResult:
    label: str
    spec: FilterSpec
    retained: int
    reports: dict[str, IndicatorReport]


IndicatorSuite = Callable[[CorpusSnapshot, set], dict[str, IndicatorReport]]


def standard_indicator_suite(
    cohort_spec: CohortSpec,
    study_countries: Iterable[str],
    pub_year: int,
) -> IndicatorSuite:
    """The indicator set re-run under each filter.

    Pair indicators take study countries as sources and every observed
    country as a destination; co-authorship strength is computed over the
    full paper universe (filters eliminate author profiles, not papers).
    """
    study = tuple(sorted(set(study_countries)))

    def run_suite(snapshot: CorpusSnapshot, retained: set) -> dict[str, IndicatorReport]:
        cohort = select_cohort(snapshot, cohort_spec) & retained
        desc = cohort_spec.describe()
        horizon = cohort_spec.horizon
        destinations = snapshot.countries()
        reports = {
            "publishing-authors": publishing_authors_report(snapshot, pub_year, retained)
        }
        if destinations:
            matrix = migration_matrix(
                snapshot, cohort, destinations, cohort_desc=desc, horizon=horizon
            )
            summary = async_summary(
                snapshot, cohort, origins=study, cohort_desc=desc, horizon=horizon
            )
            reports["migrating-authors"] = pair_counts_report(matrix, sources=study)
            reports["migration-coauth-ratio"] = ratio_report(
                snapshot, cohort, matrix, sources=study, cohort_desc=desc, horizon=horizon
            )
            reports["pct-moved-abroad"] = moved_abroad_report(summary)
        return reports

    return run_suite


def compute_runs(
    snapshot: CorpusSnapshot,
    specs: Sequence[FilterSpec],
    suite: IndicatorSuite,
    horizon: int | None = None,
) -> list[RunResult]:
    results = []
    for spec in specs:
        retained = apply_filter(snapshot, spec, horizon)
        results.append(RunResult(spec.label, spec, len(retained), suite(snapshot, retained)))
    return results


@dataclass(frozen=True, slots=True)
class ErrorRateRow:
    indicator: str
    subset: str
    n: int
    mean_variation: float
    std_dev: float
    skewness: float | None
    rough_error_rate: str
    truncated: bool


@dataclass
class ErrorRateTable:
    runs: tuple[str, ...]
    rows: list[ErrorRateRow]

    def to_report(self) -> IndicatorReport:
        rows = [
            {
                "indicator": r.indicator,
                "subset": r.subset,
                "n": r.n,
                "mean_variation": r.mean_variation,
                "std_dev": r.std_dev,
                "skewness": r.skewness,
                "rough_error_rate": r.rough_error_rate,
                "truncated": r.truncated,
            }
            for r in self.rows
        ]
        return IndicatorReport(
            indicator="error-rates",
            cohort=None,
            parameters={"runs": list(self.runs)},
            rows=rows,
            columns=[
                "indicator", "subset", "n", "mean_variation", "std_dev",
                "skewness", "rough_error_rate", "truncated",
            ],
        )


def rough_error_rate(mean_variation: float) -> str:
    if mean_variation > 10.0:
        return ">10 %"
    return f"{mean_variation:.1f} %"


def unit_variations(runs: Sequence[RunResult], indicator: str) -> dict[str, float]:
    """Cross-run variation per unit. Units absent from a run count as zero;
    units at zero across every run have no defined variation and are skipped."""
    per_run = [r.reports[indicator].unit_values() for r in runs]
    units: set[str] = set()
    for values in per_run:
        units.update(values)
    out: dict[str, float] = {}
    for unit in sorted(units):
        vals = [values.get(unit, 0.0) for values in per_run]
        if sum(vals) == 0.0:
            continue
        out[unit] = variation(vals)
    return out


def error_rate_table(
    runs: Sequence[RunResult],
    subsets: Sequence[tuple[str, int | None]] = (("all", None), ("top-100", 100)),
    indicators: Sequence[str] | None = None,
) -> ErrorRateTable:
    """Variation statistics per indicator and unit subset.

    Subsets select the top-k units by the first run's value (descending,
    ties by unit label); ``None`` means all units. Oversized subsets are
    truncated and flagged.
    """
    if len(runs) < 2:
        raise ValueError("error rate table needs at least 2 runs")
    names = list(indicators) if indicators is not None else list(runs[0].reports)
    rows: list[ErrorRateRow] = []
    for name in names:
        variations = unit_variations(runs, name)
        base = runs[0].reports[name].unit_values()
        ordered = sorted(variations, key=lambda u: (-base.get(u, 0.0), u))
        for label, limit in subsets:
            chosen = ordered if limit is None else ordered[:limit]
            if not chosen:
                continue
            truncated = limit is not None and limit > len(ordered)
            vs = [variations[u] for u in chosen]
            mean = sum(vs) / len(vs)
            try:
                skew = skewness(vs)
            except (ValueError, UndefinedValueError):
                skew = None
            rows.append(
                ErrorRateRow(
                    indicator=name,
                    subset=label,
                    n=len(vs),
                    mean_variation=mean,
                    std_dev=float(np.std(vs)),
                    skewness=skew,
                    rough_error_rate=rough_error_rate(mean),
                    truncated=truncated,
                )
            )
    return ErrorRateTable(tuple(r.label for r in runs), rows)


@dataclass
class RankShift:
    indicator: str
    rows: list[dict]

    def to_report(self, run_a: str, run_b: str) -> IndicatorReport:
        return IndicatorReport(
            indicator=f"rank-shift:{self.indicator}",
            cohort=None,
            parameters={"run_a": run_a, "run_b": run_b},
            rows=self.rows,
            columns=["unit", "rank_a", "rank_b", "value_a", "value_b", "missing_from"],
        )

    def top_units(self, side: str, k: int) -> set[str]:
        key = f"rank_{side}"
        return {
            row["unit"]
            for row in self.rows
            if row[key] is not None and row[key] <= k
        }


def rank_shift(report_a: IndicatorReport, report_b: IndicatorReport) -> RankShift:
    """Pair each unit's rank in two reports (descending value, ties by label).

    Units missing from one report are flagged; fully disjoint unit sets are an
    error.
    """
    if report_a.indicator != report_b.indicator:
        raise ValueError(
            f"incomparable-reports: {report_a.indicator} vs {report_b.indicator}"
        )
    values_a = report_a.unit_values()
    values_b = report_b.unit_values()
    if values_a and values_b and not (set(values_a) & set(values_b)):
        raise ValueError("incomparable-reports: disjoint unit sets")

    def ranks(values: dict[str, float]) -> dict[str, int]:
        order = sorted(values, key=lambda u: (-values[u], u))
        return {u: i + 1 for i, u in enumerate(order)}

    ranks_a = ranks(values_a)
    ranks_b = ranks(values_b)
    rows = []
    for unit in sorted(set(values_a) | set(values_b)):
        missing = None
        if unit not in values_a:
            missing = "a"
        elif unit not in values_b:
            missing = "b"
        rows.append(
            {
                "unit": unit,
                "rank_a": ranks_a.get(unit),
                "rank_b": ranks_b.get(unit),
                "value_a": values_a.get(unit),
                "value_b": values_b.get(unit),
                "missing_from": missing,
            }
        )
    return RankShift(report_a.indicator, rows)
