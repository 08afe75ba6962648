"""Career stages, the four productivity counting schemes, and 20/60/20 classes.

Stage windows are calendar intervals derived from the first publication year:
early = publishing years 5-14, mid = years 15-24, late = the fixed last five
calendar years before the reference year. Cohorts are (discipline, stage,
productivity type); classes are assigned by value rank with ties absorbed
into the bottom class and excluded from the top class.
"""
from __future__ import annotations

import math
from typing import Hashable, Iterable

import numpy as np

from . import _kernels
from .columnar import CorpusColumns
from .corpus import JournalRecord, PublicationRecord

STAGES = ("early", "mid", "late")
STAGE_WINDOW_YEARS = {"early": 10, "mid": 10, "late": 5}

PRODUCTIVITY_TYPES = ("P1", "P2", "P3", "P4")
PTYPE_PRESTIGE = {"P1": True, "P2": True, "P3": False, "P4": False}
PTYPE_FRACTIONAL = {"P1": False, "P2": True, "P3": False, "P4": True}

CLASS_ORDER = ("top", "middle", "bottom")
TOP, MIDDLE, BOTTOM = 0, 1, 2
MIN_COHORT_SIZE = 5


def stage_window(first_pub_year: int, stage: str, reference_year: int) -> tuple[int, int]:
    """Inclusive calendar interval of a career stage."""
    if stage == "early":
        return first_pub_year + 4, first_pub_year + 13
    if stage == "mid":
        return first_pub_year + 14, first_pub_year + 23
    if stage == "late":
        return reference_year - 4, reference_year
    raise ValueError(f"unknown stage {stage!r}")


def publication_weight(
    pub: PublicationRecord, ptype: str, journals: dict[str, JournalRecord]
) -> float:
    """Weight of one qualifying publication under a counting scheme.

    Prestige-normalized schemes use the journal's highest per-discipline
    percentile divided by 100; a missing or percentile-less journal weighs 0.
    Fractional schemes divide by the full (uncapped) author count.
    """
    if not pub.qualifying:
        raise ValueError("publication_weight requires an article or conference paper")
    if ptype not in PRODUCTIVITY_TYPES:
        raise ValueError(f"unknown productivity type {ptype!r}")
    if PTYPE_PRESTIGE[ptype]:
        journal = journals.get(pub.journal_id) if pub.journal_id is not None else None
        weight = journal.max_percentile / 100.0 if journal is not None else 0.0
    else:
        weight = 1.0
    if PTYPE_FRACTIONAL[ptype]:
        weight /= len(pub.author_ids)
    return weight


def annual_productivity(
    author_pubs: Iterable[PublicationRecord],
    stage: str,
    ptype: str,
    journals: dict[str, JournalRecord],
    reference_year: int,
) -> float:
    """Weighted qualifying publications per year inside the stage window.

    The window anchors on the author's first publication of any type; an
    empty window yields 0.
    """
    pubs = list(author_pubs)
    first_year = min(p.year for p in pubs)
    lo, hi = stage_window(first_year, stage, reference_year)
    total = sum(
        publication_weight(p, ptype, journals)
        for p in pubs
        if p.qualifying and lo <= p.year <= hi
    )
    return total / STAGE_WINDOW_YEARS[stage]


# ---------------------------------------------------------------------------
# 20/60/20 assignment


def class_cutoffs(sorted_values: np.ndarray) -> tuple[float, float]:
    """(q20, q80) taken at ascending ranks floor(0.2N) (at least 1) and ceil(0.8N)."""
    n = sorted_values.shape[0]
    rank20 = max(math.floor(0.2 * n), 1)
    rank80 = math.ceil(0.8 * n)
    return float(sorted_values[rank20 - 1]), float(sorted_values[rank80 - 1])


def assign_class_codes(values: np.ndarray) -> tuple[np.ndarray, bool]:
    """Class codes (0 top, 1 middle, 2 bottom) for one cohort's values.

    bottom = value <= q20, top = value > q80. Cohorts below MIN_COHORT_SIZE
    are flagged too-small and assigned entirely to the middle class.
    """
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    codes = np.full(n, MIDDLE, dtype=np.int8)
    if n < MIN_COHORT_SIZE:
        return codes, True
    q20, q80 = class_cutoffs(np.sort(values, kind="stable"))
    codes[values <= q20] = BOTTOM
    codes[values > q80] = TOP
    return codes, False


def assign_classes(cohort_values: dict[Hashable, float]) -> tuple[dict[Hashable, str], bool]:
    """Map each cohort member to "top"/"middle"/"bottom"."""
    if not cohort_values:
        raise ValueError("cohort must be non-empty")
    keys = sorted(cohort_values, key=lambda k: (cohort_values[k], str(k)))
    values = np.array([cohort_values[k] for k in keys], dtype=np.float64)
    codes, too_small = assign_class_codes(values)
    return {k: CLASS_ORDER[c] for k, c in zip(keys, codes)}, too_small


# ---------------------------------------------------------------------------
# bulk productivity and cohort assignment


def publication_weights_array(columns: CorpusColumns) -> tuple[np.ndarray, int]:
    """(P, 4) weight matrix in PRODUCTIVITY_TYPES order, plus the count of
    qualifying publications whose prestige weight fell back to 0 for lack of
    a journal percentile."""
    pct = columns.pub_percentile.astype(np.float64)
    missing = pct < 0
    prestige = np.where(missing, 0.0, pct / 100.0)
    inv_authors = 1.0 / columns.pub_n_authors
    weights = np.empty((columns.n_publications, 4))
    weights[:, 0] = prestige
    weights[:, 1] = prestige * inv_authors
    weights[:, 2] = 1.0
    weights[:, 3] = inv_authors
    uncovered = int(np.count_nonzero(missing & columns.pub_qualifying))
    return weights, uncovered


def stage_productivity(columns: CorpusColumns) -> tuple[np.ndarray, int]:
    """(A, 3, 4) annual productivity per author, stage, and counting scheme."""
    weights, uncovered = publication_weights_array(columns)
    sums = _kernels.stage_ptype_sums(
        columns.inc_author,
        columns.inc_pub,
        columns.pub_year,
        columns.first_pub_year,
        weights,
        columns.pub_qualifying,
        columns.reference_year,
        columns.n_authors,
    )
    lengths = np.array([STAGE_WINDOW_YEARS[s] for s in STAGES], dtype=np.float64)
    return sums / lengths[None, :, None], uncovered


def assign_cohort_classes(
    discipline_idx: np.ndarray, productivity: np.ndarray
) -> tuple[np.ndarray, list[tuple[int, str, str]]]:
    """Classes for every (author, stage, ptype) within discipline cohorts.

    discipline_idx and productivity are aligned on sample authors (sorted by
    author id, giving the stable (value, author_id) sort key). Returns codes
    of shape (S, 3, 4) and the list of too-small cohorts as
    (discipline_idx, stage, ptype) tuples.
    """
    n = discipline_idx.shape[0]
    codes = np.full((n, 3, 4), MIDDLE, dtype=np.int8)
    too_small: list[tuple[int, str, str]] = []
    for disc in np.unique(discipline_idx):
        members = np.flatnonzero(discipline_idx == disc)
        for s, stage in enumerate(STAGES):
            for t, ptype in enumerate(PRODUCTIVITY_TYPES):
                cohort_codes, flagged = assign_class_codes(productivity[members, s, t])
                codes[members, s, t] = cohort_codes
                if flagged:
                    too_small.append((int(disc), stage, ptype))
    return codes, too_small
