"""Benchmark the numba kernels against their pure-numpy fallbacks.

Run: python benchmarks/bench_kernels.py [--authors N] [--pubs-per-author K]

The same arrays go through both implementations; output equality is checked
before timing. Set CAREERFLOW_NO_NUMBA=1 to confirm the package still works
without numba (this script then reports the fallback only).
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from careerflow import _kernels


def build_workload(n_authors: int, pubs_per_author: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    n_pubs = n_authors * pubs_per_author
    pub_year = rng.integers(1980, 2023, size=n_pubs).astype(np.int32)
    team = 1 + rng.poisson(2.0, size=n_pubs).astype(np.int32)
    inc_pub = np.repeat(np.arange(n_pubs, dtype=np.int32), team)
    inc_author = rng.integers(0, n_authors, size=inc_pub.shape[0]).astype(np.int32)
    order = np.lexsort((inc_pub, pub_year[inc_pub], inc_author))
    inc_author, inc_pub = inc_author[order], inc_pub[order]
    first_year = np.full(n_authors, 2030, dtype=np.int32)
    np.minimum.at(first_year, inc_author, pub_year[inc_pub])
    weights = rng.random((n_pubs, 4))
    qualifying = rng.random(n_pubs) < 0.95
    percentile = rng.integers(-1, 100, size=n_pubs).astype(np.int16)
    ce_pub = np.repeat(np.arange(n_pubs, dtype=np.int32), 3)
    ce_year = (pub_year[ce_pub] + rng.integers(0, 6, size=ce_pub.shape[0])).astype(np.int32)
    ce_count = rng.integers(0, 5, size=ce_pub.shape[0]).astype(np.int64)
    ref_lens = rng.integers(1, 9, size=n_pubs)
    ref_starts = np.zeros(n_pubs + 1, dtype=np.int64)
    np.cumsum(ref_lens, out=ref_starts[1:])
    ref_disc = rng.integers(0, 16, size=int(ref_lens.sum())).astype(np.int32)
    return {
        "stage_ptype_sums": (
            inc_author, inc_pub, pub_year, first_year, weights, qualifying, 2022, n_authors,
        ),
        "window_citation_sums": (ce_pub, ce_year, ce_count, pub_year, 4),
        "ajpr_stage_sums": (
            inc_author, inc_pub, pub_year, first_year, percentile, qualifying, 2022, n_authors,
        ),
        "ragged_group_counts": (inc_author, inc_pub, ref_starts, ref_disc, 16, n_authors),
    }


def time_call(fn, args, repeats: int = 3) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def equal(a, b) -> bool:
    if isinstance(a, tuple):
        return all(equal(x, y) for x, y in zip(a, b))
    return bool(np.array_equal(a, b))


def run(n_authors: int, pubs_per_author: int) -> None:
    workload = build_workload(n_authors, pubs_per_author)
    n_inc = workload["stage_ptype_sums"][0].shape[0]
    print(f"workload: {n_authors:,} authors, {n_authors * pubs_per_author:,} publications, "
          f"{n_inc:,} author-publication incidences")
    print(f"numba active: {_kernels.USING_NUMBA}")
    print()
    header = f"{'kernel':<24} {'numpy (s)':>10} {'numba (s)':>10} {'speedup':>8}"
    print(header)
    print("-" * len(header))
    for name, args in workload.items():
        np_fn = getattr(_kernels, f"_np_{name}")
        np_time = time_call(np_fn, args)
        if _kernels.USING_NUMBA:
            nb_fn = getattr(_kernels, f"_nb_{name}")
            nb_fn(*args)  # JIT warmup
            assert equal(nb_fn(*args), np_fn(*args)), name
            nb_time = time_call(nb_fn, args)
            print(f"{name:<24} {np_time:>10.4f} {nb_time:>10.4f} {np_time / nb_time:>7.1f}x")
        else:
            print(f"{name:<24} {np_time:>10.4f} {'-':>10} {'-':>8}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--authors", type=int, default=100_000)
    parser.add_argument("--pubs-per-author", type=int, default=20)
    opts = parser.parse_args()
    run(opts.authors, opts.pubs_per_author)
