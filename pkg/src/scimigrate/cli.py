"""Command-line surface: ingest, generate, analyze, robustness.

Batch-oriented and deterministic: given the same inputs and seeds, every
command writes byte-identical outputs. Reports go to ``--out`` (or the
directory named by the SCIMIGRATE_OUT environment variable) as structured
text (JSON) or comma-delimited tables.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from .errors import ScimigrateError
from .indicators import (
    DEFAULT_STUDY_COUNTRIES,
    FLOW_LOCATION_AT,
    IndicatorReport,
    async_shares_report,
    async_summary,
    matrix_report,
    migration_matrix,
    moved_abroad_report,
    pair_counts_report,
    publishing_authors_report,
    rankings_report,
    ratio_report,
    regression_report,
)
from .ingest import (
    Provenance,
    Window,
    build_snapshot,
    load_snapshot,
    parse_records,
    save_snapshot,
    sha256_file,
)
from .robustness import (
    compute_runs,
    error_rate_table,
    rank_shift,
    standard_indicator_suite,
    standard_runs,
)
from .synth import (
    ErrorModel,
    default_mix,
    generate,
    inject_errors,
    load_mix_file,
    write_corpus,
)
from .trajectory import ASYNCHRONOUS, SYNCHRONOUS, CohortSpec, select_cohort

ENV_OUT = "SCIMIGRATE_OUT"
FORMAT_JSON = "structured-text"
FORMAT_CSV = "delimited-table"


@dataclass
class AnalysisConfig:
    window: Window
    countries: tuple[str, ...]
    out_dir: Path
    fmt: str

    def __post_init__(self) -> None:
        if not self.countries:
            raise ValueError("study country set must be non-empty")


def _parse_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = text.split(":")
        return int(lo), int(hi)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(
            f"expected START:END, got {text!r}"
        ) from exc


def _parse_codes(text: str) -> tuple[str, ...]:
    codes = tuple(c.strip().upper() for c in text.split(",") if c.strip())
    if not codes:
        raise argparse.ArgumentTypeError("empty country list")
    return codes


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(ENV_OUT) or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_report(report: IndicatorReport, out_dir: Path, name: str, fmt: str) -> Path:
    if fmt == FORMAT_CSV:
        path = out_dir / f"{name}.csv"
        path.write_text(report.to_csv_text(), encoding="utf-8")
    else:
        path = out_dir / f"{name}.json"
        path.write_text(report.to_json_text(), encoding="utf-8")
    return path


def cmd_ingest(args) -> int:
    path = Path(args.input)
    if not path.is_file():
        print(f"error: file-not-found: {path}", file=sys.stderr)
        return 1
    window = Window(*args.window)
    with open(path, "r", encoding="utf-8") as fh:
        records, report = parse_records(fh, window, dedup=not args.keep_duplicates)
    provenance = Provenance(
        source_digest=sha256_file(path), ingested_at=args.timestamp
    )
    snapshot = build_snapshot(records, window, provenance)
    save_snapshot(snapshot, args.snapshot)
    print(json.dumps(report.to_dict(), sort_keys=True, indent=2))
    print(f"snapshot written: {args.snapshot}")
    return 0


def cmd_generate(args) -> int:
    if args.n < 1:
        print("error: need --n >= 1", file=sys.stderr)
        return 1
    window = Window(*args.window) if args.window else None
    if args.spec:
        mix, file_window, coauth = load_mix_file(args.spec)
        window = window or file_window or Window(2001, 2011)
    else:
        mix = default_mix()
        coauth = args.coauth
        window = window or Window(2001, 2011)
    records, manifest = generate(
        mix, args.n, args.seed, window, coauth_probability=coauth
    )
    if args.errors:
        model = ErrorModel(
            split_probability=args.split_prob, merge_probability=args.merge_prob
        )
        error_seed = args.error_seed if args.error_seed is not None else args.seed + 1
        records, manifest = inject_errors(records, manifest, model, error_seed)
    out = _out_dir(args)
    corpus_path = out / "records.jsonl"
    manifest_path = out / "manifest.json"
    write_corpus(records, corpus_path)
    manifest_path.write_text(manifest.to_json_text(), encoding="utf-8")
    print(f"wrote {len(records)} records: {corpus_path}")
    print(f"wrote manifest: {manifest_path}")
    return 0


def _empty_report(indicator: str, cohort_desc: dict) -> IndicatorReport:
    return IndicatorReport(
        indicator=indicator,
        cohort=cohort_desc,
        parameters={"empty_cohort": True},
        rows=[],
    )


def cmd_analyze(args) -> int:
    snapshot = load_snapshot(args.snapshot)
    config = AnalysisConfig(
        window=snapshot.window,
        countries=args.countries,
        out_dir=_out_dir(args),
        fmt=args.format,
    )
    career = args.career_start
    written: list[Path] = []
    if args.mode == "sync":
        if args.pub_year is None:
            print("error: --mode sync requires --pub-year", file=sys.stderr)
            return 1
        spec = CohortSpec(SYNCHRONOUS, career, pub_year=args.pub_year)
        cohort = select_cohort(snapshot, spec)
        desc = spec.describe()
        written.append(
            _write_report(
                publishing_authors_report(snapshot, args.pub_year),
                config.out_dir, "publishing_authors", config.fmt,
            )
        )
        if cohort:
            matrix = migration_matrix(
                snapshot, cohort, config.countries,
                flow=FLOW_LOCATION_AT, at_year=args.pub_year, cohort_desc=desc,
            )
            written.append(
                _write_report(matrix_report(matrix), config.out_dir,
                              "migration_matrix", config.fmt)
            )
            written.append(
                _write_report(
                    rankings_report(matrix, args.top, args.pool),
                    config.out_dir, "source_rankings", config.fmt,
                )
            )
        else:
            for name in ("migration_matrix", "source_rankings"):
                written.append(
                    _write_report(_empty_report(name.replace("_", "-"), desc),
                                  config.out_dir, name, config.fmt)
                )
    else:
        spec = CohortSpec(ASYNCHRONOUS, career, horizon=args.horizon)
        cohort = select_cohort(snapshot, spec)
        desc = spec.describe()
        if cohort:
            summary = async_summary(
                snapshot, cohort, origins=config.countries,
                cohort_desc=desc, horizon=spec.horizon,
            )
            written.append(
                _write_report(async_shares_report(summary), config.out_dir,
                              "trajectory_class_shares", config.fmt)
            )
            written.append(
                _write_report(moved_abroad_report(summary), config.out_dir,
                              "moved_abroad", config.fmt)
            )
            matrix = migration_matrix(
                snapshot, cohort, snapshot.countries(),
                cohort_desc=desc, horizon=spec.horizon,
            )
            written.append(
                _write_report(
                    pair_counts_report(matrix, sources=config.countries),
                    config.out_dir, "migration_pairs", config.fmt,
                )
            )
            if len(summary.shares) >= 2:
                written.append(
                    _write_report(
                        regression_report(summary, y_axis=args.regress_y,
                                          x_axis=args.regress_x),
                        config.out_dir, "class_share_regression", config.fmt,
                    )
                )
        else:
            for name in ("trajectory_class_shares", "moved_abroad", "migration_pairs"):
                written.append(
                    _write_report(_empty_report(name.replace("_", "-"), desc),
                                  config.out_dir, name, config.fmt)
                )
    for path in written:
        print(f"wrote {path}")
    return 0


def cmd_robustness(args) -> int:
    snapshot = load_snapshot(args.snapshot)
    config = AnalysisConfig(
        window=snapshot.window,
        countries=args.countries,
        out_dir=_out_dir(args),
        fmt=args.format,
    )
    wanted = [r.strip() for r in args.runs.split(",") if r.strip()]
    available = {spec.label: spec for spec in standard_runs()}
    unknown = [r for r in wanted if r not in available]
    if unknown:
        print(f"error: unknown runs: {', '.join(unknown)}", file=sys.stderr)
        return 1
    if len(wanted) < 2:
        print("error: need at least 2 runs", file=sys.stderr)
        return 1
    specs = [available[r] for r in wanted]
    pub_year = args.pub_year if args.pub_year is not None else snapshot.window.end
    cohort_spec = CohortSpec(ASYNCHRONOUS, args.career_start, horizon=args.horizon)
    suite = standard_indicator_suite(cohort_spec, config.countries, pub_year)
    results = compute_runs(snapshot, specs, suite)
    table = error_rate_table(
        results, subsets=(("all", None), (f"top-{args.top}", args.top))
    )
    written = [
        _write_report(table.to_report(), config.out_dir, "error_rates", config.fmt)
    ]
    for result in results:
        print(f"{result.label}: {result.retained} authors retained")

    # Per-run moved-abroad percentages and rank pairings of the first run
    # against each later run: written in the chosen format, plus always as
    # comma-delimited plot data for external plotting tools.
    def _write_with_plot_data(report: IndicatorReport, name: str) -> None:
        written.append(_write_report(report, config.out_dir, name, config.fmt))
        if config.fmt != FORMAT_CSV:
            written.append(_write_report(report, config.out_dir, name, FORMAT_CSV))

    moved_rows = []
    for result in results:
        for row in result.reports["pct-moved-abroad"].rows:
            moved_rows.append(
                {"run": result.label, "unit": row["unit"], "value": row["value"]}
            )
    moved = IndicatorReport(
        indicator="pct-moved-abroad-by-run",
        cohort=cohort_spec.describe(),
        parameters={"runs": wanted},
        rows=moved_rows,
        columns=["run", "unit", "value"],
    )
    _write_with_plot_data(moved, "moved_abroad_by_run")
    for indicator in ("migrating-authors", "migration-coauth-ratio"):
        for later in results[1:]:
            shift = rank_shift(
                results[0].reports[indicator], later.reports[indicator]
            )
            name = f"rank_shift_{indicator.replace('-', '_')}_{results[0].label}_vs_{later.label}"
            _write_with_plot_data(shift.to_report(results[0].label, later.label), name)
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scimigrate",
        description="Migration trajectory analytics over author-publication affiliation records",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse records and write a corpus snapshot")
    p.add_argument("input", help="line-delimited record file")
    p.add_argument("--window", type=_parse_range, default=(2001, 2011),
                   metavar="START:END")
    p.add_argument("--snapshot", required=True, help="output snapshot path")
    p.add_argument("--keep-duplicates", action="store_true",
                   help="do not collapse exact duplicate rows")
    p.add_argument("--timestamp", default=None,
                   help="optional provenance timestamp (omitted by default to keep output deterministic)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("generate", help="emit a synthetic corpus with manifest")
    p.add_argument("spec", nargs="?", default=None,
                   help="scenario mix JSON file (built-in default mix if omitted)")
    p.add_argument("--n", type=int, required=True, help="number of authors")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", type=_parse_range, default=None, metavar="START:END")
    p.add_argument("--coauth", type=float, default=0.0,
                   help="per-paper cross-country co-author probability (default mix only)")
    p.add_argument("--errors", action="store_true",
                   help="inject author-profile errors at the default rates")
    p.add_argument("--split-prob", type=float, default=0.27)
    p.add_argument("--merge-prob", type=float, default=0.01)
    p.add_argument("--error-seed", type=int, default=None)
    p.add_argument("--out", default=None, help=f"output directory (default ${ENV_OUT} or .)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("analyze", help="compute indicator reports from a snapshot")
    p.add_argument("snapshot")
    p.add_argument("--mode", choices=("sync", "async"), required=True)
    p.add_argument("--pub-year", type=int, default=None)
    p.add_argument("--career-start", type=_parse_range, required=True,
                   metavar="START:END")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--countries", type=_parse_codes,
                   default=DEFAULT_STUDY_COUNTRIES,
                   help="study country set (comma-separated codes)")
    p.add_argument("--top", type=int, default=5, help="ranking depth")
    p.add_argument("--pool", type=int, default=25,
                   help="count-ranked pool for the RMI ranking")
    p.add_argument("--regress-y", default="permanent",
                   choices=("stay", "permanent", "return", "other", "moved_abroad"))
    p.add_argument("--regress-x", default="return",
                   choices=("stay", "permanent", "return", "other", "moved_abroad"))
    p.add_argument("--format", choices=(FORMAT_JSON, FORMAT_CSV), default=FORMAT_JSON)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("robustness", help="productivity-filtered re-runs and error rates")
    p.add_argument("snapshot")
    p.add_argument("--career-start", type=_parse_range, required=True,
                   metavar="START:END")
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--pub-year", type=int, default=None)
    p.add_argument("--countries", type=_parse_codes, default=DEFAULT_STUDY_COUNTRIES)
    p.add_argument("--runs", default="run1,run2,run3")
    p.add_argument("--top", type=int, default=100)
    p.add_argument("--format", choices=(FORMAT_JSON, FORMAT_CSV), default=FORMAT_JSON)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_robustness)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScimigrateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
