"""Columnar view of a corpus for vectorized derivation at scale.

The builder consumes validated PublicationRecord objects one at a time (from
a stream or an in-memory Corpus) and keeps only flat arrays, so corpora with
millions of publications never exist as object lists. Columns serialize to a
line-delimited text form (json section lines; array payloads base64-encoded
with explicit little-endian dtypes) used by the ingest cache.
"""
from __future__ import annotations

import base64
import json
from array import array
from dataclasses import dataclass, fields
from typing import Iterable, TextIO

import numpy as np

from . import _kernels
from .corpus import AuthorRecord, Corpus, JournalRecord, PublicationRecord

GENDER_UNKNOWN, GENDER_FEMALE, GENDER_MALE = 0, 1, 2
GENDER_CODES = {"unknown": GENDER_UNKNOWN, "female": GENDER_FEMALE, "male": GENDER_MALE}
GENDER_NAMES = {v: k for k, v in GENDER_CODES.items()}

# buffers are reinterpreted as int32; 'i' must be 4 bytes on this platform
assert array("i").itemsize == 4

# dense author x value count tables are used below this cell budget
_DENSE_COUNT_LIMIT = 20_000_000


def _vocab_remap(index: dict[str, int]) -> tuple[list[str], np.ndarray]:
    """Sorted vocabulary plus a permutation from insertion to sorted indices."""
    vocab = sorted(index)
    order = {name: i for i, name in enumerate(vocab)}
    perm = np.empty(len(index), dtype=np.int32)
    for name, old in index.items():
        perm[old] = order[name]
    return vocab, perm


def _modal_from_ragged(
    inc_author: np.ndarray,
    inc_pub: np.ndarray,
    starts: np.ndarray,
    values: np.ndarray,
    n_values: int,
    n_authors: int,
) -> np.ndarray:
    """Per-author modal value over the pooled per-publication value lists.

    Ties break to the smallest index; vocabularies are sorted, so that is the
    lexicographically smallest code. Returns -1 for authors with no values.
    """
    dominant = np.full(n_authors, -1, dtype=np.int32)
    if n_values == 0 or inc_author.shape[0] == 0:
        return dominant
    if n_authors * n_values <= _DENSE_COUNT_LIMIT:
        counts = _kernels.ragged_group_counts(
            inc_author, inc_pub, starts, values, n_values, n_authors
        ).reshape(n_authors, n_values)
        has_any = counts.sum(axis=1) > 0
        dominant[has_any] = np.argmax(counts[has_any], axis=1).astype(np.int32)
        return dominant
    # sparse path for wide vocabularies
    starts64 = starts.astype(np.int64)
    lens = starts64[inc_pub + 1] - starts64[inc_pub]
    total = int(lens.sum())
    if total == 0:
        return dominant
    a_rep = np.repeat(inc_author.astype(np.int64), lens)
    offsets = np.repeat(starts64[inc_pub], lens)
    ranges = np.arange(total, dtype=np.int64) - np.repeat(np.cumsum(lens) - lens, lens)
    keys = a_rep * n_values + values[offsets + ranges]
    uniq, cnts = np.unique(keys, return_counts=True)
    authors = uniq // n_values
    vals = (uniq % n_values).astype(np.int32)
    order = np.lexsort((vals, -cnts, authors))
    authors = authors[order]
    first = np.ones(authors.shape[0], dtype=bool)
    first[1:] = authors[1:] != authors[:-1]
    dominant[authors[first]] = vals[order][first]
    return dominant


@dataclass
class CorpusColumns:
    """Flat-array corpus: per-author, per-publication, and incidence tables.

    Incidences (author-publication pairs) are sorted by (author, year, pub);
    author_starts delimits each author's segment, whose first entry is that
    author's earliest publication.
    """

    reference_year: int
    # authors (sorted by author_id)
    author_ids: list[str]
    gender_code: np.ndarray
    country_override: list[str | None]
    first_pub_year: np.ndarray
    qualifying_count: np.ndarray
    dominant_discipline: np.ndarray
    dominant_country_idx: np.ndarray
    dominant_institution_idx: np.ndarray
    # publications (input order)
    pub_year: np.ndarray
    pub_qualifying: np.ndarray
    pub_percentile: np.ndarray
    pub_n_authors: np.ndarray
    pub_intl: np.ndarray
    pub_cits4y: np.ndarray
    # incidence
    inc_author: np.ndarray
    inc_pub: np.ndarray
    author_starts: np.ndarray
    # journal disciplines per publication (ragged)
    jd_starts: np.ndarray
    jd_disc: np.ndarray
    # institutions per publication (ragged), for output ranking
    inst_starts: np.ndarray
    inst_flat: np.ndarray
    # vocabularies (sorted)
    disc_vocab: list[str]
    country_vocab: list[str]
    inst_vocab: list[str]

    @property
    def n_authors(self) -> int:
        return len(self.author_ids)

    @property
    def n_publications(self) -> int:
        return self.pub_year.shape[0]

    def author_index(self) -> dict[str, int]:
        return {a: i for i, a in enumerate(self.author_ids)}

    def dominant_country(self, idx: int) -> str | None:
        override = self.country_override[idx]
        if override is not None:
            return override
        code = self.dominant_country_idx[idx]
        return self.country_vocab[code] if code >= 0 else None

    def dominant_institution(self, idx: int) -> str | None:
        code = self.dominant_institution_idx[idx]
        return self.inst_vocab[code] if code >= 0 else None

    def discipline_of(self, idx: int) -> str | None:
        code = self.dominant_discipline[idx]
        return self.disc_vocab[code] if code >= 0 else None


class ColumnsBuilder:
    """Accumulates validated publications into flat buffers."""

    def __init__(
        self,
        journals: dict[str, JournalRecord],
        authors: dict[str, AuthorRecord],
        reference_year: int,
        gender_threshold: float = 0.85,
    ):
        self.reference_year = reference_year
        self.gender_threshold = gender_threshold
        self.author_ids = sorted(authors)
        self._author_idx = {a: i for i, a in enumerate(self.author_ids)}
        self._authors = authors
        self._disc_idx: dict[str, int] = {}
        self._country_idx: dict[str, int] = {}
        self._inst_idx: dict[str, int] = {}
        # journal percentile cache: journal_id -> (max pct, tuple of disc idx)
        self._journal_cache: dict[str, tuple[int, tuple[int, ...]]] = {}
        self._journals = journals

        self._pub_year = array("i")
        self._pub_qual = array("b")
        self._pub_pct = array("i")
        self._pub_nauth = array("i")
        self._pub_intl = array("b")
        self._inc_author = array("i")
        self._inc_nauth = array("i")  # authors per pub, for inc_pub expansion
        self._jd_flat = array("i")
        self._jd_len = array("i")
        self._ref_flat = array("i")
        self._ref_len = array("i")
        self._country_flat = array("i")
        self._country_len = array("i")
        self._inst_flat = array("i")
        self._inst_len = array("i")
        self._ce_pub = array("i")
        self._ce_year = array("i")
        self._ce_count = array("q")
        self._n_pubs = 0

    def _intern(self, table: dict[str, int], name: str) -> int:
        idx = table.get(name)
        if idx is None:
            idx = table[name] = len(table)
        return idx

    def add(self, pub: PublicationRecord) -> None:
        p = self._n_pubs
        self._n_pubs += 1
        self._pub_year.append(pub.year)
        self._pub_qual.append(1 if pub.qualifying else 0)
        self._pub_nauth.append(len(pub.author_ids))
        self._pub_intl.append(1 if len(pub.affiliation_countries) >= 2 else 0)
        for aid in pub.author_ids:
            self._inc_author.append(self._author_idx[aid])

        if pub.journal_id is None:
            self._pub_pct.append(-1)
            self._jd_len.append(0)
        else:
            cached = self._journal_cache.get(pub.journal_id)
            if cached is None:
                jrec = self._journals[pub.journal_id]
                discs = tuple(
                    self._intern(self._disc_idx, d) for d in sorted(jrec.percentile_by_discipline)
                )
                cached = (jrec.max_percentile, discs)
                self._journal_cache[pub.journal_id] = cached
            self._pub_pct.append(cached[0])
            self._jd_flat.extend(cached[1])
            self._jd_len.append(len(cached[1]))

        self._ref_len.append(len(pub.cited_ref_disciplines))
        for d in pub.cited_ref_disciplines:
            self._ref_flat.append(self._intern(self._disc_idx, d))
        self._country_len.append(len(pub.affiliation_countries))
        for c in pub.affiliation_countries:
            self._country_flat.append(self._intern(self._country_idx, c))
        self._inst_len.append(len(pub.affiliation_institutions))
        for inst in pub.affiliation_institutions:
            self._inst_flat.append(self._intern(self._inst_idx, inst))
        for year, count in pub.citations_by_year.items():
            self._ce_pub.append(p)
            self._ce_year.append(year)
            self._ce_count.append(count)

    def finalize(self) -> CorpusColumns:
        n_authors = len(self.author_ids)
        pub_year = np.frombuffer(self._pub_year, dtype=np.int32).copy()
        n_pubs = pub_year.shape[0]
        pub_qual = np.frombuffer(self._pub_qual, dtype=np.int8).astype(bool)
        pub_pct = np.frombuffer(self._pub_pct, dtype=np.int32).astype(np.int16)
        pub_nauth = np.frombuffer(self._pub_nauth, dtype=np.int32).copy()
        pub_intl = np.frombuffer(self._pub_intl, dtype=np.int8).astype(bool)

        inc_author = np.frombuffer(self._inc_author, dtype=np.int32).copy()
        inc_pub = np.repeat(np.arange(n_pubs, dtype=np.int32), pub_nauth)
        # canonical order: (author, year, pub); segment heads are earliest pubs
        order = np.lexsort((inc_pub, pub_year[inc_pub], inc_author))
        inc_author = inc_author[order]
        inc_pub = inc_pub[order]
        author_starts = np.zeros(n_authors + 1, dtype=np.int64)
        np.cumsum(np.bincount(inc_author, minlength=n_authors), out=author_starts[1:])

        first_pub_year = np.full(n_authors, -1, dtype=np.int32)
        has_pubs = author_starts[1:] > author_starts[:-1]
        first_pub_year[has_pubs] = pub_year[inc_pub[author_starts[:-1][has_pubs]]]

        qual_count = np.bincount(
            inc_author[pub_qual[inc_pub]], minlength=n_authors
        ).astype(np.int64)

        def ragged(flat: array, lens: array, remap: np.ndarray | None = None):
            vals = np.frombuffer(flat, dtype=np.int32).copy()
            if remap is not None and vals.shape[0]:
                vals = remap[vals]
            lens_arr = np.frombuffer(lens, dtype=np.int32)
            starts = np.zeros(n_pubs + 1, dtype=np.int64)
            np.cumsum(lens_arr, out=starts[1:])
            return starts, vals

        disc_vocab, disc_perm = _vocab_remap(self._disc_idx)
        country_vocab, country_perm = _vocab_remap(self._country_idx)
        inst_vocab, inst_perm = _vocab_remap(self._inst_idx)

        jd_starts, jd_disc = ragged(self._jd_flat, self._jd_len, disc_perm)
        ref_starts, ref_disc = ragged(self._ref_flat, self._ref_len, disc_perm)
        country_starts, country_flat = ragged(self._country_flat, self._country_len, country_perm)
        inst_starts, inst_flat = ragged(self._inst_flat, self._inst_len, inst_perm)

        dominant_disc = _modal_from_ragged(
            inc_author, inc_pub, ref_starts, ref_disc, len(disc_vocab), n_authors
        )
        dominant_country = _modal_from_ragged(
            inc_author, inc_pub, country_starts, country_flat, len(country_vocab), n_authors
        )
        dominant_inst = _modal_from_ragged(
            inc_author, inc_pub, inst_starts, inst_flat, len(inst_vocab), n_authors
        )

        ce_pub = np.frombuffer(self._ce_pub, dtype=np.int32).copy()
        ce_year = np.frombuffer(self._ce_year, dtype=np.int32).copy()
        ce_count = np.frombuffer(self._ce_count, dtype=np.int64).copy()
        pub_cits4y = _kernels.window_citation_sums(ce_pub, ce_year, ce_count, pub_year, 4)

        gender_code = np.zeros(n_authors, dtype=np.int8)
        override: list[str | None] = [None] * n_authors
        for aid, idx in self._author_idx.items():
            rec = self._authors[aid]
            if rec.gender_label != "unknown" and rec.gender_probability >= self.gender_threshold:
                gender_code[idx] = GENDER_CODES[rec.gender_label]
            override[idx] = rec.country_override

        return CorpusColumns(
            reference_year=self.reference_year,
            author_ids=self.author_ids,
            gender_code=gender_code,
            country_override=override,
            first_pub_year=first_pub_year,
            qualifying_count=qual_count,
            dominant_discipline=dominant_disc,
            dominant_country_idx=dominant_country,
            dominant_institution_idx=dominant_inst,
            pub_year=pub_year,
            pub_qualifying=pub_qual,
            pub_percentile=pub_pct,
            pub_n_authors=pub_nauth,
            pub_intl=pub_intl,
            pub_cits4y=pub_cits4y,
            inc_author=inc_author,
            inc_pub=inc_pub,
            author_starts=author_starts,
            jd_starts=jd_starts,
            jd_disc=jd_disc,
            inst_starts=inst_starts,
            inst_flat=inst_flat,
            disc_vocab=disc_vocab,
            country_vocab=country_vocab,
            inst_vocab=inst_vocab,
        )


def columns_from_corpus(corpus: Corpus, gender_threshold: float = 0.85) -> CorpusColumns:
    builder = ColumnsBuilder(corpus.journals, corpus.authors, corpus.reference_year, gender_threshold)
    for pub in corpus.publications:
        builder.add(pub)
    return builder.finalize()


# ---------------------------------------------------------------------------
# line-delimited serialization

_ARRAY_FIELDS = (
    "gender_code",
    "first_pub_year",
    "qualifying_count",
    "dominant_discipline",
    "dominant_country_idx",
    "dominant_institution_idx",
    "pub_year",
    "pub_qualifying",
    "pub_percentile",
    "pub_n_authors",
    "pub_intl",
    "pub_cits4y",
    "inc_author",
    "inc_pub",
    "author_starts",
    "jd_starts",
    "jd_disc",
    "inst_starts",
    "inst_flat",
)

_STRING_FIELDS = ("author_ids", "disc_vocab", "country_vocab", "inst_vocab")


def _encode_array(arr: np.ndarray) -> tuple[str, str]:
    if arr.dtype == bool:
        portable = arr.astype("<i1")
    else:
        portable = arr.astype(arr.dtype.newbyteorder("<"))
    return portable.dtype.str, base64.b64encode(portable.tobytes()).decode("ascii")


def _decode_array(dtype: str, n: int, payload: str, as_bool: bool) -> np.ndarray:
    arr = np.frombuffer(base64.b64decode(payload), dtype=np.dtype(dtype), count=n)
    arr = arr.astype(arr.dtype.newbyteorder("="))
    return arr.astype(bool) if as_bool else arr


def dump_columns(columns: CorpusColumns, fh: TextIO) -> None:
    """Write every column as one json line; arrays carry base64 payloads."""
    meta = {"kind": "meta", "reference_year": columns.reference_year}
    fh.write(json.dumps(meta, separators=(",", ":")) + "\n")
    for name in _STRING_FIELDS:
        obj = {"kind": "strings", "name": name, "values": getattr(columns, name)}
        fh.write(json.dumps(obj, separators=(",", ":")) + "\n")
    overrides = {
        str(i): code for i, code in enumerate(columns.country_override) if code is not None
    }
    fh.write(
        json.dumps({"kind": "overrides", "values": overrides}, separators=(",", ":")) + "\n"
    )
    for name in _ARRAY_FIELDS:
        arr = getattr(columns, name)
        dtype, payload = _encode_array(arr)
        obj = {
            "kind": "array",
            "name": name,
            "dtype": dtype,
            "n": int(arr.shape[0]),
            "bool": bool(arr.dtype == bool),
            "data": payload,
        }
        fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def load_columns(lines: Iterable[str]) -> CorpusColumns:
    """Inverse of dump_columns; raises KeyError on missing sections."""
    parts: dict = {}
    meta: dict = {}
    overrides_raw: dict[str, str] = {}
    for line in lines:
        obj = json.loads(line)
        kind = obj["kind"]
        if kind == "meta":
            meta = obj
        elif kind == "strings":
            parts[obj["name"]] = obj["values"]
        elif kind == "overrides":
            overrides_raw = obj["values"]
        elif kind == "array":
            parts[obj["name"]] = _decode_array(obj["dtype"], obj["n"], obj["data"], obj["bool"])
        else:
            raise ValueError(f"unknown column section kind {kind!r}")
    override: list[str | None] = [None] * len(parts["author_ids"])
    for key, code in overrides_raw.items():
        override[int(key)] = code
    field_names = {f.name for f in fields(CorpusColumns)}
    kwargs = {name: parts[name] for name in field_names if name in parts}
    return CorpusColumns(
        reference_year=meta["reference_year"], country_override=override, **kwargs
    )
