"""Hot accumulation kernels: numba-compiled with a pure-numpy fallback.

Set CAREERFLOW_NO_NUMBA=1 to force the numpy path. Both paths add into each
accumulator in ascending input order, so results are bit-identical; tests
assert exact equality and benchmarks/bench_kernels.py compares throughput.

Career-stage windows in publishing years: early = years 5-14 (offsets 4-13
from the first publication), mid = years 15-24 (offsets 14-23); the late
window is the fixed last five calendar years and may overlap mid for short
careers, in which case a publication feeds both accumulators.
"""
from __future__ import annotations

import os

import numpy as np

_FORCE_NUMPY = os.environ.get("CAREERFLOW_NO_NUMBA", "") not in ("", "0")

try:
    if _FORCE_NUMPY:
        raise ImportError("numba disabled via CAREERFLOW_NO_NUMBA")
    from numba import njit

    USING_NUMBA = True
except ImportError:
    njit = None
    USING_NUMBA = False


# --------------------------------------------------------------------------
# numpy reference implementations


def _np_stage_ptype_sums(
    inc_author, inc_pub, pub_year, first_year, weights, qualifying, reference_year, n_authors
):
    n_types = weights.shape[1]
    acc = np.zeros((n_authors, 3, n_types))
    keep = qualifying[inc_pub]
    ia = inc_author[keep]
    ip = inc_pub[keep]
    years = pub_year[ip]
    rel = years - first_year[ia]
    masks = (
        (rel >= 4) & (rel <= 13),
        (rel >= 14) & (rel <= 23),
        (years >= reference_year - 4) & (years <= reference_year),
    )
    for stage, mask in enumerate(masks):
        a = ia[mask]
        p = ip[mask]
        for t in range(n_types):
            acc[:, stage, t] = np.bincount(a, weights=weights[p, t], minlength=n_authors)
    return acc


def _np_window_citation_sums(ce_pub, ce_year, ce_count, pub_year, window):
    years = pub_year[ce_pub]
    mask = (ce_year >= years) & (ce_year < years + window)
    sums = np.bincount(ce_pub[mask], weights=ce_count[mask], minlength=pub_year.shape[0])
    return sums.astype(np.int64)


def _np_ajpr_stage_sums(
    inc_author, inc_pub, pub_year, first_year, percentile, qualifying, reference_year, n_authors
):
    sums = np.zeros((n_authors, 3))
    counts = np.zeros((n_authors, 3), dtype=np.int64)
    keep = qualifying[inc_pub] & (percentile[inc_pub] >= 0)
    ia = inc_author[keep]
    ip = inc_pub[keep]
    years = pub_year[ip]
    rel = years - first_year[ia]
    pct = percentile[ip].astype(np.float64)
    masks = (
        (rel >= 4) & (rel <= 13),
        (rel >= 14) & (rel <= 23),
        (years >= reference_year - 4) & (years <= reference_year),
    )
    for stage, mask in enumerate(masks):
        a = ia[mask]
        sums[:, stage] = np.bincount(a, weights=pct[mask], minlength=n_authors)
        counts[:, stage] = np.bincount(a, minlength=n_authors)
    return sums, counts


def _np_ragged_group_counts(inc_author, inc_pub, starts, values, n_values, n_authors):
    # chunked join of per-publication value lists onto author incidences
    counts = np.zeros(n_authors * n_values, dtype=np.int64)
    chunk = 1_000_000
    starts64 = starts.astype(np.int64)
    for lo in range(0, inc_author.shape[0], chunk):
        hi = min(lo + chunk, inc_author.shape[0])
        ip = inc_pub[lo:hi]
        lens = (starts64[ip + 1] - starts64[ip]).astype(np.int64)
        total = int(lens.sum())
        if total == 0:
            continue
        a_rep = np.repeat(inc_author[lo:hi].astype(np.int64), lens)
        offsets = np.repeat(starts64[ip], lens)
        ranges = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(lens) - lens, lens)
        vals = values[offsets + ranges]
        counts += np.bincount(a_rep * n_values + vals, minlength=n_authors * n_values)
    return counts


stage_ptype_sums = _np_stage_ptype_sums
window_citation_sums = _np_window_citation_sums
ajpr_stage_sums = _np_ajpr_stage_sums
ragged_group_counts = _np_ragged_group_counts


# --------------------------------------------------------------------------
# numba kernels

if USING_NUMBA:

    @njit(cache=True)
    def _nb_stage_ptype_sums(
        inc_author, inc_pub, pub_year, first_year, weights, qualifying, reference_year, n_authors
    ):
        n_types = weights.shape[1]
        acc = np.zeros((n_authors, 3, n_types))
        late_lo = reference_year - 4
        for i in range(inc_author.shape[0]):
            p = inc_pub[i]
            if not qualifying[p]:
                continue
            a = inc_author[i]
            y = pub_year[p]
            rel = y - first_year[a]
            if rel >= 4 and rel <= 13:
                for t in range(n_types):
                    acc[a, 0, t] += weights[p, t]
            elif rel >= 14 and rel <= 23:
                for t in range(n_types):
                    acc[a, 1, t] += weights[p, t]
            if y >= late_lo and y <= reference_year:
                for t in range(n_types):
                    acc[a, 2, t] += weights[p, t]
        return acc

    @njit(cache=True)
    def _nb_window_citation_sums(ce_pub, ce_year, ce_count, pub_year, window):
        out = np.zeros(pub_year.shape[0], dtype=np.int64)
        for i in range(ce_pub.shape[0]):
            p = ce_pub[i]
            y0 = pub_year[p]
            y = ce_year[i]
            if y >= y0 and y < y0 + window:
                out[p] += ce_count[i]
        return out

    @njit(cache=True)
    def _nb_ajpr_stage_sums(
        inc_author, inc_pub, pub_year, first_year, percentile, qualifying, reference_year, n_authors
    ):
        sums = np.zeros((n_authors, 3))
        counts = np.zeros((n_authors, 3), dtype=np.int64)
        late_lo = reference_year - 4
        for i in range(inc_author.shape[0]):
            p = inc_pub[i]
            if not qualifying[p]:
                continue
            pct = percentile[p]
            if pct < 0:
                continue
            a = inc_author[i]
            y = pub_year[p]
            rel = y - first_year[a]
            if rel >= 4 and rel <= 13:
                sums[a, 0] += pct
                counts[a, 0] += 1
            elif rel >= 14 and rel <= 23:
                sums[a, 1] += pct
                counts[a, 1] += 1
            if y >= late_lo and y <= reference_year:
                sums[a, 2] += pct
                counts[a, 2] += 1
        return sums, counts

    @njit(cache=True)
    def _nb_ragged_group_counts(inc_author, inc_pub, starts, values, n_values, n_authors):
        counts = np.zeros(n_authors * n_values, dtype=np.int64)
        for i in range(inc_author.shape[0]):
            p = inc_pub[i]
            base = np.int64(inc_author[i]) * n_values
            for j in range(starts[p], starts[p + 1]):
                counts[base + values[j]] += 1
        return counts

    stage_ptype_sums = _nb_stage_ptype_sums
    window_citation_sums = _nb_window_citation_sums
    ajpr_stage_sums = _nb_ajpr_stage_sums
    ragged_group_counts = _nb_ragged_group_counts
