"""Benchmark the compiled trajectory kernel against the pure-Python fallback.

Builds a synthetic corpus, flattens it once, then times both backends on the
same arrays. Run from the repo root:

    python benchmarks/bench_kernels.py --authors 90000
"""

from __future__ import annotations

import argparse
import time

from scimigrate.ingest import Window, build_snapshot
from scimigrate.synth import default_mix, generate
from scimigrate.trajectory import flatten_incidences
from scimigrate._kernels import _pure

try:
    from scimigrate._kernels import _native
except ImportError:
    _native = None


def time_impl(impl, args, repeats: int) -> float:
    impl.resolve_trajectories(*args)  # warm up
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        impl.resolve_trajectories(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--authors", type=int, default=90_000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    t0 = time.perf_counter()
    records, _ = generate(
        default_mix(), args.authors, seed=args.seed, coauth_probability=0.1
    )
    snapshot = build_snapshot(records, Window(2001, 2011))
    authors, countries, totals, starts, years, codes = flatten_incidences(
        snapshot, snapshot.window.end
    )
    print(
        f"corpus: {len(records)} records, {len(authors)} authors, "
        f"{years.size} incidences (setup {time.perf_counter() - t0:.1f}s)"
    )

    kernel_args = (starts, years, codes)
    pure_s = time_impl(_pure, kernel_args, args.repeats)
    print(f"pure   : {pure_s:.3f}s  ({years.size / pure_s / 1e6:.1f} M incidences/s)")
    if _native is None:
        print("native : extension not built (pip install -e . --no-build-isolation)")
        return
    native_s = time_impl(_native, kernel_args, args.repeats)
    print(f"native : {native_s:.3f}s  ({years.size / native_s / 1e6:.1f} M incidences/s)")
    print(f"speedup: {pure_s / native_s:.1f}x")

    mismatches = [
        name
        for name, a, b in zip(
            ("yloc_starts", "yloc_year", "yloc_country", "run_starts",
             "run_country", "first_year", "last_year", "class_code", "dest"),
            _native.resolve_trajectories(*kernel_args),
            _pure.resolve_trajectories(*kernel_args),
        )
        if (a != b).any()
    ]
    print("outputs identical" if not mismatches else f"MISMATCH: {mismatches}")


if __name__ == "__main__":
    main()
