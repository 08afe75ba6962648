"""careerflow: lifetime productivity classes, mobility, and models from
publication metadata, with a seeded synthetic oracle."""

from .corpus import (
    Corpus,
    CorpusError,
    FilterReport,
    SampleFilterConfig,
    filter_sample,
    parse_corpus,
)
from .synth import CohortConfig, CorpusConfig, calibrate_persistence, gen_cohort, gen_corpus

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "CorpusError",
    "FilterReport",
    "SampleFilterConfig",
    "filter_sample",
    "parse_corpus",
    "CohortConfig",
    "CorpusConfig",
    "calibrate_persistence",
    "gen_cohort",
    "gen_corpus",
    "__version__",
]
