# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled trajectory resolution kernel; output-identical to ``_pure``."""

import numpy as np

cimport numpy as cnp


def resolve_trajectories(inc_starts, inc_year, inc_country):
    cdef cnp.int64_t[::1] starts = np.ascontiguousarray(inc_starts, dtype=np.int64)
    cdef cnp.int32_t[::1] years = np.ascontiguousarray(inc_year, dtype=np.int32)
    cdef cnp.int32_t[::1] countries = np.ascontiguousarray(inc_country, dtype=np.int32)
    cdef Py_ssize_t n_authors = starts.shape[0] - 1
    cdef Py_ssize_t n_inc = years.shape[0]

    yloc_starts_np = np.zeros(n_authors + 1, dtype=np.int64)
    yloc_year_np = np.empty(n_inc, dtype=np.int32)
    yloc_country_np = np.empty(n_inc, dtype=np.int32)
    run_starts_np = np.zeros(n_authors + 1, dtype=np.int64)
    run_country_np = np.empty(n_inc, dtype=np.int32)
    first_year_np = np.empty(n_authors, dtype=np.int32)
    last_year_np = np.empty(n_authors, dtype=np.int32)
    class_code_np = np.empty(n_authors, dtype=np.int8)
    dest_np = np.empty(n_authors, dtype=np.int32)

    cdef cnp.int64_t[::1] yloc_starts = yloc_starts_np
    cdef cnp.int32_t[::1] yloc_year = yloc_year_np
    cdef cnp.int32_t[::1] yloc_country = yloc_country_np
    cdef cnp.int64_t[::1] run_starts = run_starts_np
    cdef cnp.int32_t[::1] run_country = run_country_np
    cdef cnp.int32_t[::1] first_year = first_year_np
    cdef cnp.int32_t[::1] last_year = last_year_np
    cdef cnp.int8_t[::1] class_code = class_code_np
    cdef cnp.int32_t[::1] dest = dest_np

    cdef Py_ssize_t a, i, end, ny = 0, nr = 0, run_base
    cdef int y, c, best_c, block_runs
    cdef long long n, best_n

    for a in range(n_authors):
        i = starts[a]
        end = starts[a + 1]
        if i >= end:
            raise ValueError(f"empty incidence block for author index {a}")
        run_base = nr
        first_year[a] = years[i]
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
            yloc_year[ny] = y
            yloc_country[ny] = best_c
            ny += 1
            if nr == run_base or run_country[nr - 1] != best_c:
                run_country[nr] = best_c
                nr += 1
        last_year[a] = yloc_year[ny - 1]
        yloc_starts[a + 1] = ny
        run_starts[a + 1] = nr
        block_runs = <int> (nr - run_base)
        if block_runs == 1:
            class_code[a] = 0
            dest[a] = -1
        elif block_runs == 2:
            class_code[a] = 1
            dest[a] = run_country[run_base + 1]
        elif block_runs == 3 and run_country[run_base] == run_country[run_base + 2]:
            class_code[a] = 2
            dest[a] = run_country[run_base + 1]
        else:
            class_code[a] = 3
            dest[a] = run_country[run_base + 1]

    return (
        yloc_starts_np,
        yloc_year_np[:ny].copy(),
        yloc_country_np[:ny].copy(),
        run_starts_np,
        run_country_np[:nr].copy(),
        first_year_np,
        last_year_np,
        class_code_np,
        dest_np,
    )
