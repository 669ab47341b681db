"""Pure-Python trajectory resolution kernel.

Reference implementation of the hot loop; the compiled twin in ``_native.pyx``
must produce identical output. Incidence rows are one (paper, country) pair
per author per year, pre-sorted by (author block, year, country index).
Country indices follow lexicographic code order, so the smallest index wins
modal ties, which is the smallest code.
"""

from __future__ import annotations

import numpy as np

CLASS_STAY = 0
CLASS_PERMANENT = 1
CLASS_RETURN = 2
CLASS_OTHER = 3


def resolve_trajectories(inc_starts, inc_year, inc_country):
    """Resolve per-author yearly locations, run-length runs and class codes.

    Returns (yloc_starts, yloc_year, yloc_country, run_starts, run_country,
    first_year, last_year, class_code, dest). ``dest`` is the second run
    (first foreign country) or -1 for single-run authors.
    """
    starts = np.asarray(inc_starts, dtype=np.int64).tolist()
    years = np.asarray(inc_year, dtype=np.int32).tolist()
    countries = np.asarray(inc_country, dtype=np.int32).tolist()
    n_authors = len(starts) - 1

    yloc_starts = [0]
    yloc_year: list[int] = []
    yloc_country: list[int] = []
    run_starts = [0]
    run_country: list[int] = []
    first_year: list[int] = []
    last_year: list[int] = []
    class_code: list[int] = []
    dest: list[int] = []

    for a in range(n_authors):
        i = starts[a]
        end = starts[a + 1]
        if i >= end:
            raise ValueError(f"empty incidence block for author index {a}")
        run_base = len(run_country)
        first_year.append(years[i])
        while i < end:
            y = years[i]
            best_c = -1
            best_n = 0
            while i < end and years[i] == y:
                c = countries[i]
                n = 0
                while i < end and years[i] == y and countries[i] == c:
                    n += 1
                    i += 1
                # strict > keeps the first (lexicographically smallest) on ties
                if n > best_n:
                    best_n = n
                    best_c = c
            yloc_year.append(y)
            yloc_country.append(best_c)
            if len(run_country) == run_base or run_country[-1] != best_c:
                run_country.append(best_c)
        last_year.append(yloc_year[-1])
        yloc_starts.append(len(yloc_year))
        run_starts.append(len(run_country))
        n_runs = len(run_country) - run_base
        if n_runs == 1:
            class_code.append(CLASS_STAY)
            dest.append(-1)
        elif n_runs == 2:
            class_code.append(CLASS_PERMANENT)
            dest.append(run_country[run_base + 1])
        elif n_runs == 3 and run_country[run_base] == run_country[run_base + 2]:
            class_code.append(CLASS_RETURN)
            dest.append(run_country[run_base + 1])
        else:
            class_code.append(CLASS_OTHER)
            dest.append(run_country[run_base + 1])

    return (
        np.asarray(yloc_starts, dtype=np.int64),
        np.asarray(yloc_year, dtype=np.int32),
        np.asarray(yloc_country, dtype=np.int32),
        np.asarray(run_starts, dtype=np.int64),
        np.asarray(run_country, dtype=np.int32),
        np.asarray(first_year, dtype=np.int32),
        np.asarray(last_year, dtype=np.int32),
        np.asarray(class_code, dtype=np.int8),
        np.asarray(dest, dtype=np.int32),
    )
