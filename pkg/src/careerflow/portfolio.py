"""Per-author portfolio attributes derived from the corpus.

Reference implementations operate on publication record lists and define the
semantics; derive_portfolios is the vectorized bulk path over CorpusColumns
used by the pipeline. Both are cross-checked in tests.

Publication-quality and collaboration metrics (FWCI, AJPR, collaboration
rate, team size) pool qualifying publications (articles and conference
papers) only; academic age and the dominant-value attributes pool every
publication of any type.
"""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from . import _kernels
from .classes import STAGES, stage_productivity
from .columnar import GENDER_NAMES, CorpusColumns
from .corpus import Corpus, JournalRecord, PublicationRecord

FWCI_WINDOW = 4  # publication year plus three consecutive years

FieldBaseline = dict[tuple[str, int], float]


# ---------------------------------------------------------------------------
# reference implementations (record level)


def academic_age(author_pubs: Iterable[PublicationRecord], reference_year: int) -> int:
    """Years between the first publication of any type and the reference year."""
    return reference_year - min(p.year for p in author_pubs)


def dominant_discipline(author_pubs: Iterable[PublicationRecord]) -> str | None:
    """Modal discipline over all cited references, lifetime; ties break to the
    lexicographically smallest code. None when no reference carries one."""
    counts: Counter = Counter()
    for pub in author_pubs:
        counts.update(pub.cited_ref_disciplines)
    if not counts:
        return None
    return min(counts.items(), key=lambda item: (-item[1], item[0]))[0]


def dominant_affiliation(author_pubs: Iterable[PublicationRecord], kind: str) -> str | None:
    """Modal affiliation (kind = "country" or "institution") over all
    publications, lifetime; same tie-break as dominant_discipline."""
    if kind not in ("country", "institution"):
        raise ValueError(f"unknown affiliation kind {kind!r}")
    counts: Counter = Counter()
    for pub in author_pubs:
        values = pub.affiliation_countries if kind == "country" else pub.affiliation_institutions
        counts.update(values)
    if not counts:
        return None
    return min(counts.items(), key=lambda item: (-item[1], item[0]))[0]


def gender_gate(label: str, probability: float, threshold: float = 0.85) -> str:
    """Accept the inferred label only at or above the probability threshold."""
    if not 0.0 <= probability <= 1.0:
        raise ValueError("probability must be within [0, 1]")
    return label if label != "unknown" and probability >= threshold else "unknown"


def intl_collab_rate(author_pubs: Iterable[PublicationRecord]) -> float | None:
    """Percent of collaborative publications (>= 2 authors) that are also
    international (>= 2 affiliation countries); None with no collaborations."""
    collaborative = 0
    international = 0
    for pub in author_pubs:
        if len(pub.author_ids) >= 2:
            collaborative += 1
            if len(pub.affiliation_countries) >= 2:
                international += 1
    if collaborative == 0:
        return None
    return 100.0 * international / collaborative


def median_team_size(author_pubs: Iterable[PublicationRecord]) -> float:
    """Median per-publication author count, each capped at 10."""
    sizes = sorted(min(len(p.author_ids), 10) for p in author_pubs)
    if not sizes:
        raise ValueError("author has no publications")
    mid = len(sizes) // 2
    if len(sizes) % 2:
        return float(sizes[mid])
    return (sizes[mid - 1] + sizes[mid]) / 2.0


def _journal_disciplines(pub: PublicationRecord, journals: dict[str, JournalRecord]) -> tuple[str, ...]:
    if pub.journal_id is None:
        return ()
    return tuple(sorted(journals[pub.journal_id].percentile_by_discipline))


def _cits_in_window(pub: PublicationRecord) -> int:
    return sum(
        count
        for year, count in pub.citations_by_year.items()
        if pub.year <= year < pub.year + FWCI_WINDOW
    )


def build_field_baseline(corpus: Corpus) -> FieldBaseline:
    """Mean in-window citation count per (journal discipline, year) cell over
    all corpus publications; a publication contributes once per discipline of
    its journal."""
    sums: dict[tuple[str, int], float] = {}
    counts: dict[tuple[str, int], int] = {}
    for pub in corpus.publications:
        cits = _cits_in_window(pub)
        for disc in _journal_disciplines(pub, corpus.journals):
            cell = (disc, pub.year)
            sums[cell] = sums.get(cell, 0.0) + cits
            counts[cell] = counts.get(cell, 0) + 1
    return {cell: sums[cell] / counts[cell] for cell in sums}


def fwci4y(
    pub: PublicationRecord, journals: dict[str, JournalRecord], baseline: FieldBaseline
) -> float | None:
    """In-window citations over the field baseline; multi-discipline journals
    average the per-discipline ratios. None when every baseline is 0/absent."""
    cits = _cits_in_window(pub)
    ratios = []
    for disc in _journal_disciplines(pub, journals):
        mean = baseline.get((disc, pub.year))
        if mean:
            ratios.append(cits / mean)
    if not ratios:
        return None
    return sum(ratios) / len(ratios)


def mean_fwci4y(
    author_pubs: Iterable[PublicationRecord],
    journals: dict[str, JournalRecord],
    baseline: FieldBaseline,
) -> tuple[float | None, int]:
    """Mean publication FWCI over qualifying publications; also returns the
    count of journal-bearing publications skipped for zero/absent baselines."""
    values = []
    skipped = 0
    for pub in author_pubs:
        if not pub.qualifying:
            continue
        value = fwci4y(pub, journals, baseline)
        if value is None:
            if pub.journal_id is not None:
                skipped += 1
            continue
        values.append(value)
    if not values:
        return None, skipped
    return sum(values) / len(values), skipped


def ajpr(
    author_pubs: Iterable[PublicationRecord],
    journals: dict[str, JournalRecord],
    window: tuple[int, int],
) -> float | None:
    """Mean of each in-window qualifying publication's highest per-discipline
    journal percentile; None when the window holds no journal publication."""
    lo, hi = window
    percentiles = [
        journals[p.journal_id].max_percentile
        for p in author_pubs
        if p.qualifying and p.journal_id is not None and lo <= p.year <= hi
    ]
    if not percentiles:
        return None
    return sum(percentiles) / len(percentiles)


def top_institution_cutoff(counts: np.ndarray, top_n: int = 200) -> float:
    """Smallest output count still inside the top_n ranks (ties included)."""
    if counts.shape[0] <= top_n:
        return -np.inf
    return float(np.sort(counts)[::-1][top_n - 1])


def top_institutions(corpus: Corpus, top_n: int = 200) -> set[str]:
    """Institutions ranked in the top_n by publication output over the last
    four calendar years; ties at the boundary rank are all included."""
    window_lo = corpus.reference_year - 3
    counts: Counter = Counter()
    names: set[str] = set()
    for pub in corpus.publications:
        names.update(pub.affiliation_institutions)
        if window_lo <= pub.year <= corpus.reference_year:
            counts.update(pub.affiliation_institutions)
    arr = np.array([counts.get(name, 0) for name in sorted(names)], dtype=np.int64)
    if arr.shape[0] == 0:
        return set()
    cutoff = top_institution_cutoff(arr, top_n)
    return {name for name in names if counts.get(name, 0) >= cutoff}


def top200_flag(corpus: Corpus, author_id: str, top_n: int = 200) -> bool:
    pubs = [p for p in corpus.publications if author_id in p.author_ids]
    dominant = dominant_affiliation(pubs, "institution")
    return dominant is not None and dominant in top_institutions(corpus, top_n)


# ---------------------------------------------------------------------------
# bulk derivation


@dataclass
class AuthorPortfolio:
    author_id: str
    first_pub_year: int
    academic_age: int
    gender: str
    dominant_discipline: str | None
    dominant_country: str | None
    dominant_institution: str | None
    top200: bool
    intl_collab_rate: float | None
    median_team_size: float
    mean_fwci4y: float | None
    ajpr_by_stage: dict[str, float]


@dataclass
class BaselineArrays:
    """Field baseline in array form: cell = disc_idx * n_years + (year - year_min)."""

    year_min: int
    n_years: int
    means: np.ndarray  # 0.0 where the cell is empty

    def cell(self, disc_idx: int, year: int) -> float:
        return float(self.means[disc_idx * self.n_years + (year - self.year_min)])


@dataclass
class PortfolioTable:
    """Vectorized portfolio attributes for the sampled authors.

    Arrays are aligned to sample_idx (ascending author index = ascending
    author_id). NaN marks undefined real-valued attributes.
    """

    columns: CorpusColumns
    sample_idx: np.ndarray
    academic_age: np.ndarray
    top200: np.ndarray
    intl_rate: np.ndarray
    team_median: np.ndarray
    fwci_mean: np.ndarray
    ajpr_stage: np.ndarray  # (S, 3)
    productivity: np.ndarray  # (S, 3, 4)
    discipline_idx: np.ndarray
    fwci_skipped_pubs: int
    prestige_uncovered_pubs: int

    @property
    def n_sample(self) -> int:
        return self.sample_idx.shape[0]

    def author_id(self, row: int) -> str:
        return self.columns.author_ids[self.sample_idx[row]]

    def to_records(self) -> list[AuthorPortfolio]:
        cols = self.columns
        out = []
        for row in range(self.n_sample):
            idx = int(self.sample_idx[row])
            ajpr_map = {
                stage: round(float(self.ajpr_stage[row, s]), 6)
                for s, stage in enumerate(STAGES)
                if math.isfinite(self.ajpr_stage[row, s])
            }
            out.append(
                AuthorPortfolio(
                    author_id=cols.author_ids[idx],
                    first_pub_year=int(cols.first_pub_year[idx]),
                    academic_age=int(self.academic_age[row]),
                    gender=GENDER_NAMES[int(cols.gender_code[idx])],
                    dominant_discipline=cols.discipline_of(idx),
                    dominant_country=cols.dominant_country(idx),
                    dominant_institution=cols.dominant_institution(idx),
                    top200=bool(self.top200[row]),
                    intl_collab_rate=_opt(self.intl_rate[row]),
                    median_team_size=round(float(self.team_median[row]), 6),
                    mean_fwci4y=_opt(self.fwci_mean[row]),
                    ajpr_by_stage=ajpr_map,
                )
            )
        return out


def _opt(value: float) -> float | None:
    return round(float(value), 6) if math.isfinite(value) else None


def portfolio_to_json(p: AuthorPortfolio) -> str:
    obj = {
        "author_id": p.author_id,
        "first_pub_year": p.first_pub_year,
        "academic_age": p.academic_age,
        "gender": p.gender,
        "dominant_discipline": p.dominant_discipline,
        "dominant_country": p.dominant_country,
        "dominant_institution": p.dominant_institution,
        "top200": p.top200,
        "intl_collab_rate": p.intl_collab_rate,
        "median_team_size": p.median_team_size,
        "mean_fwci4y": p.mean_fwci4y,
        "ajpr_by_stage": p.ajpr_by_stage,
    }
    return json.dumps(obj, separators=(",", ":"))


def build_baseline_arrays(columns: CorpusColumns) -> BaselineArrays:
    if columns.n_publications == 0:
        return BaselineArrays(0, 1, np.zeros(len(columns.disc_vocab)))
    year_min = int(columns.pub_year.min())
    n_years = int(columns.pub_year.max()) - year_min + 1
    n_cells = len(columns.disc_vocab) * n_years
    jd_pub = np.repeat(
        np.arange(columns.n_publications, dtype=np.int64), np.diff(columns.jd_starts)
    )
    cells = columns.jd_disc.astype(np.int64) * n_years + (columns.pub_year[jd_pub] - year_min)
    sums = np.bincount(cells, weights=columns.pub_cits4y[jd_pub].astype(np.float64), minlength=n_cells)
    counts = np.bincount(cells, minlength=n_cells)
    means = np.zeros(n_cells)
    nonzero = counts > 0
    means[nonzero] = sums[nonzero] / counts[nonzero]
    return BaselineArrays(year_min, n_years, means)


def publication_fwci(columns: CorpusColumns, baseline: BaselineArrays) -> tuple[np.ndarray, int]:
    """Per-publication FWCI (NaN undefined) and the skipped-publication count."""
    n_pubs = columns.n_publications
    fwci = np.full(n_pubs, np.nan)
    if n_pubs == 0:
        return fwci, 0
    jd_pub = np.repeat(np.arange(n_pubs, dtype=np.int64), np.diff(columns.jd_starts))
    if jd_pub.shape[0] == 0:
        return fwci, 0
    cells = columns.jd_disc.astype(np.int64) * baseline.n_years + (
        columns.pub_year[jd_pub] - baseline.year_min
    )
    base = baseline.means[cells]
    valid = base > 0
    ratios = np.zeros(jd_pub.shape[0])
    ratios[valid] = columns.pub_cits4y[jd_pub[valid]] / base[valid]
    ratio_sums = np.bincount(jd_pub[valid], weights=ratios[valid], minlength=n_pubs)
    ratio_counts = np.bincount(jd_pub[valid], minlength=n_pubs)
    defined = ratio_counts > 0
    fwci[defined] = ratio_sums[defined] / ratio_counts[defined]
    has_journal = np.diff(columns.jd_starts) > 0
    skipped = int(np.count_nonzero(has_journal & ~defined))
    return fwci, skipped


def cell_fwci_means(columns: CorpusColumns, baseline: BaselineArrays) -> np.ndarray:
    """Mean per-publication FWCI contribution within each populated cell.

    Normalization check: every entry is 1.0 up to float accumulation error,
    because each publication's contribution to a cell is its citation count
    over that same cell's mean.
    """
    n_pubs = columns.n_publications
    jd_pub = np.repeat(np.arange(n_pubs, dtype=np.int64), np.diff(columns.jd_starts))
    if jd_pub.shape[0] == 0:
        return np.zeros(0)
    cells = columns.jd_disc.astype(np.int64) * baseline.n_years + (
        columns.pub_year[jd_pub] - baseline.year_min
    )
    base = baseline.means[cells]
    valid = base > 0
    ratios = columns.pub_cits4y[jd_pub[valid]] / base[valid]
    n_cells = baseline.means.shape[0]
    sums = np.bincount(cells[valid], weights=ratios, minlength=n_cells)
    counts = np.bincount(cells[valid], minlength=n_cells)
    populated = counts > 0
    return sums[populated] / counts[populated]


def _segment_median(group: np.ndarray, values: np.ndarray, n_groups: int) -> np.ndarray:
    """Median of values per group; NaN for empty groups."""
    out = np.full(n_groups, np.nan)
    if group.shape[0] == 0:
        return out
    order = np.lexsort((values, group))
    sg = group[order]
    sv = values[order]
    counts = np.bincount(sg, minlength=n_groups)
    starts = np.concatenate(([0], np.cumsum(counts)))[:-1]
    nonempty = counts > 0
    lo = starts[nonempty] + (counts[nonempty] - 1) // 2
    hi = starts[nonempty] + counts[nonempty] // 2
    out[nonempty] = (sv[lo] + sv[hi]) / 2.0
    return out


def derive_portfolios(
    columns: CorpusColumns,
    sample_ids: set[str] | None = None,
    top_n_institutions: int = 200,
) -> PortfolioTable:
    """Compute every portfolio attribute for the sampled authors.

    Baselines and the institution ranking use the full corpus; per-author
    attributes are reported for sample_ids (default: every author).
    """
    n_authors = columns.n_authors
    if sample_ids is None:
        sample_idx = np.arange(n_authors, dtype=np.int64)
    else:
        index = columns.author_index()
        sample_idx = np.array(sorted(index[a] for a in sample_ids), dtype=np.int64)

    inc_author = columns.inc_author
    inc_pub = columns.inc_pub
    qual = columns.pub_qualifying[inc_pub]

    # collaboration metrics over qualifying publications
    collab = qual & (columns.pub_n_authors[inc_pub] >= 2)
    intl = collab & columns.pub_intl[inc_pub]
    collab_count = np.bincount(inc_author[collab], minlength=n_authors)
    intl_count = np.bincount(inc_author[intl], minlength=n_authors)
    intl_rate = np.full(n_authors, np.nan)
    has_collab = collab_count > 0
    intl_rate[has_collab] = 100.0 * intl_count[has_collab] / collab_count[has_collab]

    team = np.minimum(columns.pub_n_authors[inc_pub[qual]], 10).astype(np.float64)
    team_median = _segment_median(inc_author[qual], team, n_authors)

    baseline = build_baseline_arrays(columns)
    fwci, fwci_skipped = publication_fwci(columns, baseline)
    fwci_inc = fwci[inc_pub]
    fwci_ok = qual & np.isfinite(fwci_inc)
    fwci_sums = np.bincount(inc_author[fwci_ok], weights=fwci_inc[fwci_ok], minlength=n_authors)
    fwci_counts = np.bincount(inc_author[fwci_ok], minlength=n_authors)
    fwci_mean = np.full(n_authors, np.nan)
    has_fwci = fwci_counts > 0
    fwci_mean[has_fwci] = fwci_sums[has_fwci] / fwci_counts[has_fwci]

    ajpr_sums, ajpr_counts = _kernels.ajpr_stage_sums(
        inc_author,
        inc_pub,
        columns.pub_year,
        columns.first_pub_year,
        columns.pub_percentile,
        columns.pub_qualifying,
        columns.reference_year,
        n_authors,
    )
    ajpr_stage = np.full((n_authors, 3), np.nan)
    defined = ajpr_counts > 0
    ajpr_stage[defined] = ajpr_sums[defined] / ajpr_counts[defined]

    productivity, uncovered = stage_productivity(columns)

    # institution ranking over the last four calendar years
    window_lo = columns.reference_year - 3
    pi_pub = np.repeat(
        np.arange(columns.n_publications, dtype=np.int64), np.diff(columns.inst_starts)
    )
    in_window = (columns.pub_year[pi_pub] >= window_lo) & (
        columns.pub_year[pi_pub] <= columns.reference_year
    )
    inst_counts = np.bincount(
        columns.inst_flat[in_window], minlength=len(columns.inst_vocab)
    ).astype(np.int64)
    if inst_counts.shape[0]:
        cutoff = top_institution_cutoff(inst_counts, top_n_institutions)
        top_mask = inst_counts >= cutoff
    else:
        top_mask = np.zeros(0, dtype=bool)
    dom_inst = columns.dominant_institution_idx
    top200 = np.zeros(n_authors, dtype=bool)
    with_inst = dom_inst >= 0
    top200[with_inst] = top_mask[dom_inst[with_inst]]

    age = columns.reference_year - columns.first_pub_year

    return PortfolioTable(
        columns=columns,
        sample_idx=sample_idx,
        academic_age=age[sample_idx],
        top200=top200[sample_idx],
        intl_rate=intl_rate[sample_idx],
        team_median=team_median[sample_idx],
        fwci_mean=fwci_mean[sample_idx],
        ajpr_stage=ajpr_stage[sample_idx],
        productivity=productivity[sample_idx],
        discipline_idx=columns.dominant_discipline[sample_idx],
        fwci_skipped_pubs=fwci_skipped,
        prestige_uncovered_pubs=uncovered,
    )
