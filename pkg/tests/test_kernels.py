import os
import random
import subprocess
import sys

import numpy as np
import pytest

from scimigrate import _kernels
from scimigrate._kernels import _pure


def _random_incidences(rng, n_authors, max_rows=8):
    starts = [0]
    years = []
    countries = []
    for _ in range(n_authors):
        rows = rng.randint(1, max_rows)
        block = sorted(
            (rng.randint(2001, 2011), rng.randint(0, 4)) for _ in range(rows)
        )
        for y, c in block:
            years.append(y)
            countries.append(c)
        starts.append(len(years))
    return (
        np.asarray(starts, dtype=np.int64),
        np.asarray(years, dtype=np.int32),
        np.asarray(countries, dtype=np.int32),
    )


native = pytest.importorskip("scimigrate._kernels._native")


def test_native_matches_pure_on_random_corpora():
    rng = random.Random(1234)
    for _ in range(200):
        starts, years, countries = _random_incidences(rng, rng.randint(1, 20))
        out_native = native.resolve_trajectories(starts, years, countries)
        out_pure = _pure.resolve_trajectories(starts, years, countries)
        assert len(out_native) == len(out_pure) == 9
        for a, b in zip(out_native, out_pure):
            assert a.dtype == b.dtype
            np.testing.assert_array_equal(a, b)


def test_empty_corpus():
    starts = np.zeros(1, dtype=np.int64)
    empty32 = np.empty(0, dtype=np.int32)
    for impl in (native, _pure):
        yloc_starts, yloc_year, yloc_country, run_starts, run_country, *rest = (
            impl.resolve_trajectories(starts, empty32, empty32)
        )
        assert yloc_starts.tolist() == [0] and run_starts.tolist() == [0]
        assert yloc_year.size == yloc_country.size == run_country.size == 0
        assert all(arr.size == 0 for arr in rest)


def test_empty_block_rejected():
    starts = np.asarray([0, 0], dtype=np.int64)
    empty32 = np.empty(0, dtype=np.int32)
    for impl in (native, _pure):
        with pytest.raises(ValueError, match="empty incidence block"):
            impl.resolve_trajectories(starts, empty32, empty32)


def test_env_var_forces_pure_backend():
    env = dict(os.environ, SCIMIGRATE_PURE="1")
    out = subprocess.run(
        [sys.executable, "-c", "import scimigrate; print(scimigrate.KERNEL_BACKEND)"],
        capture_output=True, text=True, env=env, check=True,
    )
    assert out.stdout.strip() == "pure"


def test_default_backend_is_native_when_built():
    assert _kernels.BACKEND in ("native", "pure")
    env = {k: v for k, v in os.environ.items() if k != "SCIMIGRATE_PURE"}
    out = subprocess.run(
        [sys.executable, "-c", "import scimigrate; print(scimigrate.KERNEL_BACKEND)"],
        capture_output=True, text=True, env=env, check=True,
    )
    assert out.stdout.strip() == "native"
