"""Shared fixture builders for hand-written corpora."""
from __future__ import annotations

from careerflow.corpus import AuthorRecord, Corpus, JournalRecord, PublicationRecord


def make_pub(
    pub_id="p1",
    year=2000,
    doc_type="article",
    authors=("a1",),
    countries=("C1",),
    institutions=("I1",),
    journal=None,
    citations=None,
    refs=(),
) -> PublicationRecord:
    return PublicationRecord(
        pub_id=pub_id,
        year=year,
        doc_type=doc_type,
        author_ids=tuple(authors),
        affiliation_countries=tuple(sorted(set(countries))),
        affiliation_institutions=tuple(sorted(set(institutions))),
        journal_id=journal,
        citations_by_year=dict(citations or {}),
        cited_ref_disciplines=tuple(refs),
    )


def make_corpus(
    pubs,
    journals: dict[str, dict[str, int]] | None = None,
    author_genders: dict[str, tuple[str, float]] | None = None,
    reference_year=2022,
) -> Corpus:
    """Corpus with author records auto-created for every referenced id."""
    journal_records = {
        jid: JournalRecord(jid, dict(pcts)) for jid, pcts in (journals or {}).items()
    }
    author_ids = {aid for pub in pubs for aid in pub.author_ids}
    genders = author_genders or {}
    authors = {}
    for aid in sorted(author_ids):
        label, prob = genders.get(aid, ("unknown", 0.0))
        authors[aid] = AuthorRecord(aid, label, prob)
    return Corpus(list(pubs), journal_records, authors, reference_year)
