"""Corpus data model, line-delimited parsing, and the sample filter chain.

Input is three line-delimited JSON files (publications, journals, authors).
Malformed lines become reject records, never silent drops. Filtering applies
five gates in a fixed order so the removal counts are comparable across runs.
"""
from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator

DOC_TYPES = ("article", "conference_paper", "other")
QUALIFYING_DOC_TYPES = frozenset(("article", "conference_paper"))
GENDER_LABELS = ("female", "male", "unknown")

MIN_YEAR = 1900

PUBLICATIONS_FILE = "publications"
JOURNALS_FILE = "journals"
AUTHORS_FILE = "authors"


class CorpusError(ValueError):
    """Fatal input problem (unreadable stream, unusable configuration)."""


class _LineError(ValueError):
    """Internal: schema violation on a single input line."""


@dataclass(slots=True)
class PublicationRecord:
    """One indexed publication.

    Set-valued fields (countries, institutions) are stored as sorted
    duplicate-free tuples; author_ids keeps its input order.
    """

    pub_id: str
    year: int
    doc_type: str
    author_ids: tuple[str, ...]
    affiliation_countries: tuple[str, ...]
    affiliation_institutions: tuple[str, ...]
    journal_id: str | None
    citations_by_year: dict[int, int]
    cited_ref_disciplines: tuple[str, ...]

    @property
    def qualifying(self) -> bool:
        return self.doc_type in QUALIFYING_DOC_TYPES


@dataclass(slots=True)
class JournalRecord:
    journal_id: str
    percentile_by_discipline: dict[str, int]

    @property
    def max_percentile(self) -> int:
        return max(self.percentile_by_discipline.values())


@dataclass(slots=True)
class AuthorRecord:
    author_id: str
    gender_label: str
    gender_probability: float
    country_override: str | None = None


@dataclass(slots=True)
class Reject:
    line_no: int
    file: str
    reason: str

    def to_json(self) -> str:
        return json.dumps(
            {"line_no": self.line_no, "file": self.file, "reason": self.reason},
            separators=(",", ":"),
        )


@dataclass
class Corpus:
    publications: list[PublicationRecord]
    journals: dict[str, JournalRecord]
    authors: dict[str, AuthorRecord]
    reference_year: int


@dataclass(frozen=True)
class SampleFilterConfig:
    """Gate parameters for sample selection.

    allowed_countries / allowed_disciplines of None mean "no restriction";
    authors whose dominant value is undefined still fail the gate.
    """

    allowed_countries: frozenset[str] | None = None
    allowed_disciplines: frozenset[str] | None = None
    min_publications: int = 3
    min_academic_age: int = 25
    max_academic_age: int = 50
    active_window_years: int = 5

    def __post_init__(self) -> None:
        if self.min_publications < 1:
            raise CorpusError("min_publications must be >= 1")
        if not (0 < self.min_academic_age <= self.max_academic_age):
            raise CorpusError("need 0 < min_academic_age <= max_academic_age")
        if self.active_window_years < 1:
            raise CorpusError("active_window_years must be >= 1")


GATE_ORDER = (
    "country",
    "discipline",
    "min_publications",
    "academic_age",
    "recent_activity",
)


@dataclass
class FilterReport:
    """Removal count per gate, in gate order, plus the retained count."""

    removed: dict[str, int]
    retained: int
    total: int

    @property
    def removed_total(self) -> int:
        return sum(self.removed.values())


# ---------------------------------------------------------------------------
# line-level parsing


def _req_str(obj: dict, key: str) -> str:
    val = obj.get(key)
    if not isinstance(val, str) or not val:
        raise _LineError(f"missing {key}")
    return val


def _req_int(obj: dict, key: str) -> int:
    val = obj.get(key)
    if isinstance(val, bool) or not isinstance(val, int):
        raise _LineError(f"missing {key}")
    return val


def _str_list(obj: dict, key: str) -> list[str]:
    val = obj.get(key, [])
    if not isinstance(val, list) or any(not isinstance(v, str) or not v for v in val):
        raise _LineError(f"bad {key}")
    return val


def _sorted_unique(values: list[str]) -> tuple[str, ...]:
    return tuple(sorted(set(values)))


def parse_journal_line(obj: dict) -> JournalRecord:
    journal_id = _req_str(obj, "journal_id")
    raw = obj.get("percentiles")
    if not isinstance(raw, dict) or not raw:
        raise _LineError("missing percentiles")
    percentiles: dict[str, int] = {}
    for disc, pct in raw.items():
        if not isinstance(disc, str) or not disc:
            raise _LineError("bad percentiles key")
        if isinstance(pct, bool) or not isinstance(pct, int) or not 0 <= pct <= 99:
            raise _LineError(f"percentile out of range for {disc}")
        percentiles[disc] = pct
    return JournalRecord(journal_id, percentiles)


def parse_author_line(obj: dict) -> AuthorRecord:
    author_id = _req_str(obj, "author_id")
    label = obj.get("gender_label", "unknown")
    if label not in GENDER_LABELS:
        raise _LineError(f"bad gender_label {label!r}")
    prob = obj.get("gender_probability")
    if prob is None:
        if label != "unknown":
            raise _LineError("gender_probability required when label known")
        prob = 0.0
    if isinstance(prob, bool) or not isinstance(prob, (int, float)) or not 0.0 <= prob <= 1.0:
        raise _LineError("gender_probability out of [0,1]")
    override = obj.get("country_override")
    if override is not None and (not isinstance(override, str) or not override):
        raise _LineError("bad country_override")
    return AuthorRecord(author_id, label, float(prob), override)


def parse_publication_line(
    obj: dict,
    journals: dict[str, JournalRecord],
    authors: dict[str, AuthorRecord],
    reference_year: int,
) -> PublicationRecord:
    pub_id = _req_str(obj, "pub_id")
    year = _req_int(obj, "year")
    if not MIN_YEAR <= year <= reference_year:
        raise _LineError(f"year {year} out of [{MIN_YEAR}, {reference_year}]")
    doc_type = _req_str(obj, "doc_type")
    if doc_type not in DOC_TYPES:
        raise _LineError(f"bad doc_type {doc_type!r}")
    author_ids = _str_list(obj, "author_ids")
    if not author_ids:
        raise _LineError("empty author_ids")
    if len(set(author_ids)) != len(author_ids):
        raise _LineError("duplicate author id")
    for aid in author_ids:
        if aid not in authors:
            raise _LineError(f"unresolved author reference: {aid}")
    journal_id = obj.get("journal_id")
    if journal_id is not None:
        if not isinstance(journal_id, str) or not journal_id:
            raise _LineError("bad journal_id")
        if journal_id not in journals:
            raise _LineError(f"unresolved journal reference: {journal_id}")
    raw_cits = obj.get("citations_by_year", {})
    if not isinstance(raw_cits, dict):
        raise _LineError("bad citations_by_year")
    citations: dict[int, int] = {}
    for key, cnt in raw_cits.items():
        try:
            cit_year = int(key)
        except (TypeError, ValueError):
            raise _LineError(f"bad citation year {key!r}") from None
        if cit_year < year:
            raise _LineError(f"citation year {cit_year} precedes publication year")
        if isinstance(cnt, bool) or not isinstance(cnt, int) or cnt < 0:
            raise _LineError(f"bad citation count for year {cit_year}")
        citations[cit_year] = cnt
    return PublicationRecord(
        pub_id=pub_id,
        year=year,
        doc_type=doc_type,
        author_ids=tuple(author_ids),
        affiliation_countries=_sorted_unique(_str_list(obj, "affiliation_countries")),
        affiliation_institutions=_sorted_unique(_str_list(obj, "affiliation_institutions")),
        journal_id=journal_id,
        citations_by_year=citations,
        cited_ref_disciplines=tuple(_str_list(obj, "cited_ref_disciplines")),
    )


def _iter_json_lines(lines: Iterable[str], file: str, rejects: list[Reject]) -> Iterator[tuple[int, dict]]:
    line_no = 0
    for raw in lines:
        line_no += 1
        raw = raw.strip()
        if not raw:
            continue
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            rejects.append(Reject(line_no, file, f"invalid json: {exc.msg}"))
            continue
        if not isinstance(obj, dict):
            rejects.append(Reject(line_no, file, "record is not an object"))
            continue
        yield line_no, obj


def parse_journals(lines: Iterable[str], rejects: list[Reject]) -> dict[str, JournalRecord]:
    journals: dict[str, JournalRecord] = {}
    for line_no, obj in _iter_json_lines(lines, JOURNALS_FILE, rejects):
        try:
            rec = parse_journal_line(obj)
        except _LineError as exc:
            rejects.append(Reject(line_no, JOURNALS_FILE, str(exc)))
            continue
        if rec.journal_id in journals:
            rejects.append(Reject(line_no, JOURNALS_FILE, f"duplicate journal_id {rec.journal_id}"))
            continue
        journals[rec.journal_id] = rec
    return journals


def parse_authors(lines: Iterable[str], rejects: list[Reject]) -> dict[str, AuthorRecord]:
    authors: dict[str, AuthorRecord] = {}
    for line_no, obj in _iter_json_lines(lines, AUTHORS_FILE, rejects):
        try:
            rec = parse_author_line(obj)
        except _LineError as exc:
            rejects.append(Reject(line_no, AUTHORS_FILE, str(exc)))
            continue
        if rec.author_id in authors:
            rejects.append(Reject(line_no, AUTHORS_FILE, f"duplicate author_id {rec.author_id}"))
            continue
        authors[rec.author_id] = rec
    return authors


def iter_publications(
    lines: Iterable[str],
    journals: dict[str, JournalRecord],
    authors: dict[str, AuthorRecord],
    reference_year: int,
    rejects: list[Reject],
) -> Iterator[PublicationRecord]:
    """Validated publication stream; schema violations land in *rejects*.

    Streaming consumers (the CLI cache writer, the columnar builder) use this
    directly so the full record list never has to be materialized.
    """
    seen: set[str] = set()
    for line_no, obj in _iter_json_lines(lines, PUBLICATIONS_FILE, rejects):
        try:
            rec = parse_publication_line(obj, journals, authors, reference_year)
        except _LineError as exc:
            rejects.append(Reject(line_no, PUBLICATIONS_FILE, str(exc)))
            continue
        if rec.pub_id in seen:
            rejects.append(Reject(line_no, PUBLICATIONS_FILE, f"duplicate pub_id {rec.pub_id}"))
            continue
        seen.add(rec.pub_id)
        yield rec


def parse_corpus(
    publication_lines: Iterable[str],
    journal_lines: Iterable[str],
    author_lines: Iterable[str],
    reference_year: int,
) -> tuple[Corpus, list[Reject]]:
    """Parse the three input streams into a validated Corpus plus rejects."""
    rejects: list[Reject] = []
    journals = parse_journals(journal_lines, rejects)
    authors = parse_authors(author_lines, rejects)
    pubs = list(iter_publications(publication_lines, journals, authors, reference_year, rejects))
    return Corpus(pubs, journals, authors, reference_year), rejects


# ---------------------------------------------------------------------------
# serialization (round-trip safe)


def publication_to_json(rec: PublicationRecord) -> str:
    obj = {
        "pub_id": rec.pub_id,
        "year": rec.year,
        "doc_type": rec.doc_type,
        "author_ids": list(rec.author_ids),
        "affiliation_countries": list(rec.affiliation_countries),
        "affiliation_institutions": list(rec.affiliation_institutions),
        "journal_id": rec.journal_id,
        "citations_by_year": {str(y): rec.citations_by_year[y] for y in sorted(rec.citations_by_year)},
        "cited_ref_disciplines": list(rec.cited_ref_disciplines),
    }
    return json.dumps(obj, separators=(",", ":"))


def journal_to_json(rec: JournalRecord) -> str:
    obj = {
        "journal_id": rec.journal_id,
        "percentiles": {d: rec.percentile_by_discipline[d] for d in sorted(rec.percentile_by_discipline)},
    }
    return json.dumps(obj, separators=(",", ":"))


def author_to_json(rec: AuthorRecord) -> str:
    obj: dict = {
        "author_id": rec.author_id,
        "gender_label": rec.gender_label,
        "gender_probability": rec.gender_probability,
    }
    if rec.country_override is not None:
        obj["country_override"] = rec.country_override
    return json.dumps(obj, separators=(",", ":"))


def serialize_corpus(corpus: Corpus) -> tuple[list[str], list[str], list[str]]:
    """Corpus back to (publication, journal, author) line lists."""
    pub_lines = [publication_to_json(p) for p in corpus.publications]
    journal_lines = [journal_to_json(corpus.journals[j]) for j in sorted(corpus.journals)]
    author_lines = [author_to_json(corpus.authors[a]) for a in sorted(corpus.authors)]
    return pub_lines, journal_lines, author_lines


# ---------------------------------------------------------------------------
# sample filter


@dataclass
class AuthorSummary:
    """Per-author reductions needed by the filter gates."""

    first_pub_year: int | None = None
    qualifying_count: int = 0
    active_in_window: bool = False
    countries: Counter = field(default_factory=Counter)
    disciplines: Counter = field(default_factory=Counter)


def modal_value(counts: Counter) -> str | None:
    """Most frequent value; ties break to the lexicographically smallest."""
    if not counts:
        return None
    return min(counts.items(), key=lambda item: (-item[1], item[0]))[0]


def accumulate_summaries(
    pubs: Iterable[PublicationRecord],
    reference_year: int,
    active_window_years: int,
) -> dict[str, AuthorSummary]:
    window_start = reference_year - active_window_years + 1
    summaries: dict[str, AuthorSummary] = {}
    for pub in pubs:
        qualifying = pub.qualifying
        active = qualifying and window_start <= pub.year <= reference_year
        for aid in pub.author_ids:
            s = summaries.get(aid)
            if s is None:
                s = summaries[aid] = AuthorSummary()
            if s.first_pub_year is None or pub.year < s.first_pub_year:
                s.first_pub_year = pub.year
            if qualifying:
                s.qualifying_count += 1
            if active:
                s.active_in_window = True
            s.countries.update(pub.affiliation_countries)
            s.disciplines.update(pub.cited_ref_disciplines)
    return summaries


def apply_gates(
    author_ids: Iterable[str],
    summaries: dict[str, AuthorSummary],
    authors: dict[str, AuthorRecord],
    config: SampleFilterConfig,
    reference_year: int,
) -> tuple[set[str], FilterReport]:
    """Run the gate chain over *author_ids* in sorted order."""
    removed = {gate: 0 for gate in GATE_ORDER}
    retained: set[str] = set()
    total = 0
    for aid in sorted(author_ids):
        total += 1
        s = summaries.get(aid)
        country = None
        if s is not None:
            override = authors[aid].country_override if aid in authors else None
            country = override if override is not None else modal_value(s.countries)
        if country is None or (
            config.allowed_countries is not None and country not in config.allowed_countries
        ):
            removed["country"] += 1
            continue
        discipline = modal_value(s.disciplines)
        if discipline is None or (
            config.allowed_disciplines is not None and discipline not in config.allowed_disciplines
        ):
            removed["discipline"] += 1
            continue
        if s.qualifying_count < config.min_publications:
            removed["min_publications"] += 1
            continue
        age = reference_year - s.first_pub_year
        if not config.min_academic_age <= age <= config.max_academic_age:
            removed["academic_age"] += 1
            continue
        if not s.active_in_window:
            removed["recent_activity"] += 1
            continue
        retained.add(aid)
    return retained, FilterReport(removed, len(retained), total)


def filter_sample(corpus: Corpus, config: SampleFilterConfig) -> tuple[set[str], FilterReport]:
    """Apply the five sample gates: country, discipline, nonoccasional count,
    academic age, recent activity. Returns retained author ids and the
    per-gate removal report."""
    summaries = accumulate_summaries(
        corpus.publications, corpus.reference_year, config.active_window_years
    )
    return apply_gates(corpus.authors.keys(), summaries, corpus.authors, config, corpus.reference_year)
