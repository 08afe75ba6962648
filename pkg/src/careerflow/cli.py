"""Command-line surface: synth / ingest / analyze / report.

ingest parses and filters the three input files into a cache under the
output directory; analyze re-reads that cache and writes every derived
output plus a sha-256 manifest, so analysis parameters can be iterated
without re-parsing. CAREERFLOW_OUT provides the default output directory.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .corpus import CorpusError, SampleFilterConfig
from .pipeline import MANIFEST_NAME, StageError, run_analyze, run_ingest
from .synth import config_from_mapping, write_synthetic_corpus

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _default_out() -> str | None:
    return os.environ.get("CAREERFLOW_OUT")


def _out_dir(args: argparse.Namespace) -> Path:
    out = args.out or _default_out()
    if not out:
        raise CorpusError("no output directory: pass --out or set CAREERFLOW_OUT")
    return Path(out)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="careerflow",
        description="Career-trajectory productivity pipeline over publication metadata.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser("synth", help="generate a seeded synthetic corpus")
    synth.add_argument("--pubs", help="publications output path")
    synth.add_argument("--journals", help="journals output path")
    synth.add_argument("--authors", help="authors output path")
    synth.add_argument("--out", help="output directory (default CAREERFLOW_OUT)")
    synth.add_argument("--seed", type=int, help="random seed (default 0)")
    synth.add_argument("--rho", type=float, help="stage persistence in [0,1] (default 0.5)")
    synth.add_argument("--authors-n", type=int, help="number of authors (default 1000)")
    synth.add_argument("--disciplines-n", type=int, help="number of disciplines (default 1)")
    synth.add_argument("--reference-year", type=int, help="snapshot year (default 2022)")
    synth.add_argument("--config", help="declarative JSON config (flags override it)")

    ingest = sub.add_parser("ingest", help="parse, validate, and filter input files")
    ingest.add_argument("--pubs", required=True)
    ingest.add_argument("--journals", required=True)
    ingest.add_argument("--authors", required=True)
    ingest.add_argument("--out", help="output directory (default CAREERFLOW_OUT)")
    ingest.add_argument("--reference-year", type=int, default=2022)
    ingest.add_argument("--min-pubs", type=int, default=3)
    ingest.add_argument("--min-age", type=int, default=25)
    ingest.add_argument("--max-age", type=int, default=50)

    analyze = sub.add_parser("analyze", help="run the full analysis over an ingest cache")
    analyze.add_argument("--out", help="run directory holding the cache (default CAREERFLOW_OUT)")
    analyze.add_argument("--ptype", action="append", help="restrict to a productivity type (repeatable)")
    analyze.add_argument("--scope", action="append", help="restrict to a discipline scope (repeatable)")
    analyze.add_argument("--workers", type=int, default=1)

    report = sub.add_parser("report", help="summarize an analyze run")
    report.add_argument("--out", help="run directory (default CAREERFLOW_OUT)")
    return parser


def cmd_synth(args: argparse.Namespace) -> int:
    merged = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            merged = json.load(fh)
    flags = {
        "n_authors": args.authors_n,
        "n_disciplines": args.disciplines_n,
        "persistence": args.rho,
        "seed": args.seed,
        "reference_year": args.reference_year,
    }
    merged.update({k: v for k, v in flags.items() if v is not None})
    merged.setdefault("n_authors", 1000)
    config = config_from_mapping(merged)

    out = args.out or _default_out()
    base = Path(out) if out else Path(".")
    base.mkdir(parents=True, exist_ok=True)
    pubs_path = Path(args.pubs) if args.pubs else base / "publications.jsonl"
    journals_path = Path(args.journals) if args.journals else base / "journals.jsonl"
    authors_path = Path(args.authors) if args.authors else base / "authors.jsonl"
    with open(pubs_path, "w", encoding="utf-8") as p, open(
        journals_path, "w", encoding="utf-8"
    ) as j, open(authors_path, "w", encoding="utf-8") as a:
        counts = write_synthetic_corpus(config, p, j, a)
    print(f"seed: {config.cohort.seed}")
    print(f"rho: {config.cohort.persistence}")
    for name, path in (
        ("publications", pubs_path),
        ("journals", journals_path),
        ("authors", authors_path),
    ):
        print(f"{name}: {counts[name]} -> {path}")
    return EXIT_OK


def cmd_ingest(args: argparse.Namespace) -> int:
    out_dir = _out_dir(args)
    config = SampleFilterConfig(
        min_publications=args.min_pubs,
        min_academic_age=args.min_age,
        max_academic_age=args.max_age,
    )
    result = run_ingest(
        Path(args.pubs),
        Path(args.journals),
        Path(args.authors),
        out_dir,
        args.reference_year,
        config,
    )
    print(f"cache: {result.cache_path}")
    print(f"publications: {result.n_publications}  rejects: {result.n_rejects}")
    print("gate\tremoved")
    for gate, removed in result.report.removed.items():
        print(f"{gate}\t{removed}")
    print(f"retained\t{result.report.retained}")
    print(f"total\t{result.report.total}")
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    out_dir = _out_dir(args)
    result = run_analyze(out_dir, args.ptype, args.scope, max(1, args.workers))
    print(f"sample: {result.n_sample} authors")
    print(f"outputs: {len(result.manifest)} files under {result.out_dir}")
    print(f"manifest: {result.out_dir / MANIFEST_NAME}")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    out_dir = _out_dir(args)
    manifest_path = out_dir / MANIFEST_NAME
    if not manifest_path.exists():
        raise CorpusError(f"no manifest at {manifest_path} (run analyze first)")
    gates = out_dir / "gates.tsv"
    if gates.exists():
        print(gates.read_text(encoding="utf-8").rstrip())
    entries = [json.loads(line) for line in manifest_path.read_text().splitlines() if line]
    print(f"\n{len(entries)} outputs:")
    for entry in entries:
        print(f"  {entry['path']}")
    sankeys = sorted((out_dir / "sankey").glob("*.txt")) if (out_dir / "sankey").exists() else []
    if sankeys:
        print(f"\n{sankeys[0].name}:")
        print(sankeys[0].read_text(encoding="utf-8").rstrip())
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "synth": cmd_synth,
        "ingest": cmd_ingest,
        "analyze": cmd_analyze,
        "report": cmd_report,
    }
    try:
        return handlers[args.command](args)
    except CorpusError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
