"""Seeded synthetic corpora and cohorts with a controllable persistence knob.

Stage values follow a stationary log-autoregression blended with a latent
per-author ability, so the persistence parameter rho is the stage-to-stage
log-space correlation when ability_spread is 0: rho=0 gives independent
stages (base-rate transitions), rho=1 gives identical classes across stages.
Every author draws from a counter-based stream keyed on (seed, author index),
so corpus output is independent of generation order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator, TextIO

import numpy as np

from .classes import BOTTOM, TOP, assign_class_codes
from .corpus import (
    AuthorRecord,
    Corpus,
    CorpusError,
    JournalRecord,
    PublicationRecord,
    author_to_json,
    journal_to_json,
    publication_to_json,
)

CITATION_OFFSET_WEIGHTS = (0.35, 0.30, 0.15, 0.10, 0.06, 0.04)
NO_JOURNAL_PROB = 0.05


@dataclass(frozen=True)
class CohortConfig:
    n_authors: int
    n_disciplines: int = 1
    persistence: float = 0.5
    ability_spread: float = 0.0
    noise_scale: float = 1.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_authors < 5 * self.n_disciplines:
            raise CorpusError("need n_authors >= 5 * n_disciplines")
        if not 0.0 <= self.persistence <= 1.0:
            raise CorpusError("persistence must be within [0, 1]")
        if self.ability_spread < 0 or self.noise_scale < 0:
            raise CorpusError("spread parameters must be non-negative")


@dataclass(frozen=True)
class CorpusConfig:
    cohort: CohortConfig
    pubs_per_year: float = 0.5
    team_size_mean: float = 3.0
    hyperauthor_prob: float = 0.01
    intl_collab_prob: float = 0.2
    percentile_bias: float = 15.0
    citation_rate: float = 3.0
    other_doc_rate: float = 0.03
    ref_count_mean: float = 5.0
    own_discipline_ref_share: float = 0.85
    n_countries: int = 10
    n_institutions: int = 250
    min_academic_age: int = 29
    max_academic_age: int = 50
    gender_female_share: float = 0.35
    gender_unknown_prob: float = 0.05
    reference_year: int = 2022

    def __post_init__(self) -> None:
        if not 1 <= self.min_academic_age <= self.max_academic_age:
            raise CorpusError("need 1 <= min_academic_age <= max_academic_age")
        for name in ("pubs_per_year", "citation_rate", "other_doc_rate", "ref_count_mean"):
            if getattr(self, name) < 0:
                raise CorpusError(f"{name} must be non-negative")
        for name in ("hyperauthor_prob", "intl_collab_prob", "gender_unknown_prob",
                     "gender_female_share", "own_discipline_ref_share"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise CorpusError(f"{name} must be a probability")
        if self.n_countries < 1 or self.n_institutions < 1:
            raise CorpusError("need at least one country and institution pool entry")


@dataclass
class CohortSample:
    disciplines: np.ndarray  # int32 (N,) author -> discipline index
    values: np.ndarray  # float64 (N, 3) stage productivity values
    ability_z: np.ndarray  # float64 (N,) latent ability z-score
    discipline_codes: list[str]


def discipline_codes(n: int) -> list[str]:
    width = max(2, len(str(max(n - 1, 0))))
    return [f"D{d:0{width}d}" for d in range(n)]


def gen_cohort(config: CohortConfig) -> CohortSample:
    """Per-author stage values for three career stages.

    log v_0 = sigma*z + tau*e_0; log v_s = rho*log v_{s-1} +
    (1-rho)*sigma*z + tau*sqrt(1-rho^2)*e_s.
    """
    rng = np.random.default_rng(config.seed)
    n = config.n_authors
    z = rng.standard_normal(n)
    eps = rng.standard_normal((n, 3))
    rho = config.persistence
    tau = config.noise_scale
    log_a = config.ability_spread * z
    log_v = np.empty((n, 3))
    log_v[:, 0] = log_a + tau * eps[:, 0]
    innovation = tau * math.sqrt(max(0.0, 1.0 - rho * rho))
    for s in (1, 2):
        log_v[:, s] = rho * log_v[:, s - 1] + (1.0 - rho) * log_a + innovation * eps[:, s]
    disciplines = (np.arange(n, dtype=np.int32) % config.n_disciplines).astype(np.int32)
    return CohortSample(
        disciplines=disciplines,
        values=np.exp(log_v),
        ability_z=z,
        discipline_codes=discipline_codes(config.n_disciplines),
    )


# ---------------------------------------------------------------------------
# corpus generation


def journal_table(config: CorpusConfig) -> dict[str, JournalRecord]:
    """One journal per (discipline, percentile), covering 0..99."""
    journals: dict[str, JournalRecord] = {}
    for disc in discipline_codes(config.cohort.n_disciplines):
        for pct in range(100):
            jid = f"{disc}-j{pct:02d}"
            journals[jid] = JournalRecord(jid, {disc: pct})
    return journals


def _author_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, 1, index))))


def _author_id(index: int) -> str:
    return f"a{index:07d}"


def _distinct_partners(rng: np.random.Generator, universe: int, count: int, exclude: int) -> list[int]:
    count = min(count, universe - 1)
    chosen: list[int] = []
    while len(chosen) < count:
        pick = int(rng.integers(universe))
        if pick != exclude and pick not in chosen:
            chosen.append(pick)
    return chosen


class _AuthorGenerator:
    """Generates one author's record and publications from their own stream."""

    def __init__(self, config: CorpusConfig, cohort: CohortSample):
        self.config = config
        self.cohort = cohort
        self.countries = [f"C{k:02d}" for k in range(config.n_countries)]
        self.institutions = [f"inst{k:04d}" for k in range(config.n_institutions)]
        self.disc_codes = cohort.discipline_codes

    def generate(self, i: int) -> tuple[AuthorRecord, list[PublicationRecord]]:
        cfg = self.config
        rng = _author_rng(cfg.cohort.seed, i)
        ref = cfg.reference_year
        age = int(rng.integers(cfg.min_academic_age, cfg.max_academic_age + 1))
        first_year = ref - age

        if rng.random() < cfg.gender_unknown_prob:
            author = AuthorRecord(_author_id(i), "unknown", 0.0)
        else:
            label = "female" if rng.random() < cfg.gender_female_share else "male"
            # most scores clear the 0.85 acceptance threshold, some do not
            if rng.random() < 0.8:
                prob = float(rng.uniform(0.85, 1.0))
            else:
                prob = float(rng.uniform(0.65, 0.85))
            author = AuthorRecord(_author_id(i), label, round(prob, 4))

        home_country = self.countries[int(rng.integers(len(self.countries)))]
        home_inst = self.institutions[int(rng.integers(len(self.institutions)))]

        v = self.cohort.values[i]
        z = self.cohort.ability_z[i]
        disc = self.disc_codes[self.cohort.disciplines[i]]

        windows = [
            (first_year + 4, first_year + 13, v[0]),
            (first_year + 14, first_year + 23, v[1]),
            (ref - 4, ref, v[2]),
        ]
        gap_lo, gap_hi = first_year + 24, ref - 5
        pubs: list[PublicationRecord] = []
        serial = 0

        def emit(year: int, doc_type: str) -> None:
            nonlocal serial
            pubs.append(self._publication(rng, i, serial, year, doc_type, home_country, home_inst, disc, z))
            serial += 1

        emit(first_year, "article")
        qualifying = 1
        for lo, hi, value in windows:
            span = hi - lo + 1
            count = int(rng.poisson(cfg.pubs_per_year * value * span))
            if (lo, hi) == (ref - 4, ref):
                count = max(count, 1)
            for _ in range(count):
                year = int(rng.integers(lo, hi + 1))
                doc_type = "article" if rng.random() < 0.9 else "conference_paper"
                emit(year, doc_type)
            qualifying += count
        if gap_hi >= gap_lo:
            for _ in range(int(rng.poisson(0.3 * cfg.pubs_per_year * v[2] * (gap_hi - gap_lo + 1)))):
                emit(int(rng.integers(gap_lo, gap_hi + 1)), "article")
                qualifying += 1
        for _ in range(int(rng.poisson(cfg.other_doc_rate * (age + 1)))):
            emit(int(rng.integers(first_year, ref + 1)), "other")
        while qualifying < 3:
            emit(int(rng.integers(ref - 4, ref + 1)), "article")
            qualifying += 1
        return author, pubs

    def _publication(
        self,
        rng: np.random.Generator,
        author_index: int,
        serial: int,
        year: int,
        doc_type: str,
        home_country: str,
        home_inst: str,
        disc: str,
        ability_z: float,
    ) -> PublicationRecord:
        cfg = self.config
        universe = cfg.cohort.n_authors
        extra = int(rng.poisson(max(cfg.team_size_mean - 1.0, 0.0)))
        if rng.random() < cfg.hyperauthor_prob:
            extra = 10 + int(rng.integers(0, 16))
        partners = _distinct_partners(rng, universe, extra, author_index)
        author_ids = [_author_id(author_index)] + [_author_id(j) for j in partners]

        countries = [home_country]
        institutions = [home_inst]
        if len(author_ids) >= 2 and rng.random() < cfg.intl_collab_prob:
            shift = 1 + int(rng.integers(len(self.countries) - 1)) if len(self.countries) > 1 else 0
            if shift:
                countries.append(self.countries[(self.countries.index(home_country) + shift) % len(self.countries)])
            if rng.random() < 0.5 and len(self.institutions) > 1:
                jump = 1 + int(rng.integers(len(self.institutions) - 1))
                institutions.append(
                    self.institutions[(self.institutions.index(home_inst) + jump) % len(self.institutions)]
                )

        if rng.random() < NO_JOURNAL_PROB:
            journal_id = None
            pct = -1
        else:
            pct = int(np.clip(round(rng.normal(50.0 + cfg.percentile_bias * ability_z, 25.0)), 0, 99))
            journal_id = f"{disc}-j{pct:02d}"

        base = cfg.citation_rate * (0.4 + 0.012 * pct if pct >= 0 else 0.4)
        citations: dict[int, int] = {}
        for offset, weight in enumerate(CITATION_OFFSET_WEIGHTS):
            cit_year = year + offset
            if cit_year > cfg.reference_year:
                break
            count = int(rng.poisson(base * weight))
            if count:
                citations[cit_year] = count

        n_refs = 1 + int(rng.poisson(max(cfg.ref_count_mean - 1.0, 0.0)))
        refs = []
        for _ in range(n_refs):
            if len(self.disc_codes) > 1 and rng.random() >= cfg.own_discipline_ref_share:
                shift = 1 + int(rng.integers(len(self.disc_codes) - 1))
                refs.append(self.disc_codes[(self.disc_codes.index(disc) + shift) % len(self.disc_codes)])
            else:
                refs.append(disc)

        return PublicationRecord(
            pub_id=f"p{author_index:07d}n{serial:04d}",
            year=year,
            doc_type=doc_type,
            author_ids=tuple(author_ids),
            affiliation_countries=tuple(sorted(set(countries))),
            affiliation_institutions=tuple(sorted(set(institutions))),
            journal_id=journal_id,
            citations_by_year=citations,
            cited_ref_disciplines=tuple(refs),
        )


def iter_author_batches(config: CorpusConfig) -> Iterator[tuple[AuthorRecord, list[PublicationRecord]]]:
    cohort = gen_cohort(config.cohort)
    generator = _AuthorGenerator(config, cohort)
    for i in range(config.cohort.n_authors):
        yield generator.generate(i)


def gen_corpus(config: CorpusConfig) -> Corpus:
    """Materialize a full synthetic Corpus (small/medium scale; the CLI
    streams the same batches straight to files instead)."""
    journals = journal_table(config)
    authors: dict[str, AuthorRecord] = {}
    publications: list[PublicationRecord] = []
    for author, pubs in iter_author_batches(config):
        authors[author.author_id] = author
        publications.extend(pubs)
    return Corpus(publications, journals, authors, config.reference_year)


def write_synthetic_corpus(
    config: CorpusConfig, pubs_out: TextIO, journals_out: TextIO, authors_out: TextIO
) -> dict[str, int]:
    """Stream the three input files; returns line counts per file."""
    journals = journal_table(config)
    for jid in sorted(journals):
        journals_out.write(journal_to_json(journals[jid]) + "\n")
    n_pubs = 0
    n_authors = 0
    for author, pubs in iter_author_batches(config):
        authors_out.write(author_to_json(author) + "\n")
        n_authors += 1
        for pub in pubs:
            pubs_out.write(publication_to_json(pub) + "\n")
            n_pubs += 1
    return {"publications": n_pubs, "journals": len(journals), "authors": n_authors}


# ---------------------------------------------------------------------------
# persistence calibration


@dataclass
class CalibrationResult:
    rho: float
    top_to_top: float
    bottom_to_bottom: float
    iterations: int
    evaluations: list[tuple[float, float]] = field(default_factory=list)


def _transition_rates(values: np.ndarray) -> tuple[float, float]:
    """Raw early->mid top-to-top and bottom-to-bottom percentages."""
    from_codes, _ = assign_class_codes(values[:, 0])
    to_codes, _ = assign_class_codes(values[:, 1])
    top_size = int(np.count_nonzero(from_codes == TOP))
    bottom_size = int(np.count_nonzero(from_codes == BOTTOM))
    tt = 100.0 * np.count_nonzero((from_codes == TOP) & (to_codes == TOP)) / top_size
    bb = 100.0 * np.count_nonzero((from_codes == BOTTOM) & (to_codes == BOTTOM)) / bottom_size
    return tt, bb


def calibrate_persistence(
    target_top_to_top: float,
    n_authors: int = 100_000,
    seed: int = 0,
    tol_pp: float = 1.0,
    max_iter: int = 60,
) -> CalibrationResult:
    """Bisect rho until the simulated early->mid top-to-top rate lands within
    tol_pp of the target. Common random numbers (fixed seed) keep the
    simulated rate effectively monotone in rho."""
    if not 0.0 < target_top_to_top <= 100.0:
        raise CorpusError("target rate must be a percentage in (0, 100]")

    evaluations: list[tuple[float, float]] = []

    def simulate(rho: float) -> tuple[float, float]:
        sample = gen_cohort(
            CohortConfig(n_authors=n_authors, n_disciplines=1, persistence=rho, seed=seed)
        )
        tt, bb = _transition_rates(sample.values)
        evaluations.append((rho, tt))
        return tt, bb

    lo, hi = 0.0, 1.0
    f_lo, bb_lo = simulate(lo)
    f_hi, bb_hi = simulate(hi)
    if not f_lo - tol_pp <= target_top_to_top <= f_hi + tol_pp:
        raise CorpusError(
            f"target {target_top_to_top:.1f}% outside achievable range: "
            f"rho=0 gives {f_lo:.1f}%, rho=1 gives {f_hi:.1f}%"
        )
    if abs(f_lo - target_top_to_top) <= tol_pp:
        return CalibrationResult(lo, f_lo, bb_lo, 1, evaluations)
    if abs(f_hi - target_top_to_top) <= tol_pp:
        return CalibrationResult(hi, f_hi, bb_hi, 2, evaluations)
    for iteration in range(1, max_iter + 1):
        mid = (lo + hi) / 2.0
        tt, bb = simulate(mid)
        if abs(tt - target_top_to_top) <= tol_pp:
            return CalibrationResult(mid, tt, bb, iteration + 2, evaluations)
        if tt < target_top_to_top:
            lo = mid
        else:
            hi = mid
    raise CorpusError(
        f"calibration did not converge after {max_iter} bisections; "
        f"bracket [{lo:.6f}, {hi:.6f}]"
    )


def config_from_mapping(obj: dict) -> CorpusConfig:
    """Declarative config: flat JSON keys for CohortConfig and CorpusConfig."""
    cohort_keys = {"n_authors", "n_disciplines", "persistence", "ability_spread", "noise_scale", "seed"}
    cohort = CohortConfig(**{k: obj[k] for k in cohort_keys if k in obj})
    rest = {k: v for k, v in obj.items() if k not in cohort_keys}
    unknown = set(rest) - {f.name for f in CorpusConfig.__dataclass_fields__.values()}
    if unknown:
        raise CorpusError(f"unknown config keys: {', '.join(sorted(unknown))}")
    return replace(CorpusConfig(cohort=cohort), **rest)
