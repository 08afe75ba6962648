import os
import subprocess
import sys

import numpy as np
import pytest

from careerflow import _kernels


def random_inputs(seed=0, n_authors=200, n_pubs=800):
    rng = np.random.default_rng(seed)
    pub_year = rng.integers(1980, 2023, size=n_pubs).astype(np.int32)
    n_auth_per_pub = rng.integers(1, 6, size=n_pubs).astype(np.int32)
    inc_author = []
    inc_pub = []
    for p in range(n_pubs):
        for a in rng.choice(n_authors, size=n_auth_per_pub[p], replace=False):
            inc_author.append(a)
            inc_pub.append(p)
    inc_author = np.array(inc_author, dtype=np.int32)
    inc_pub = np.array(inc_pub, dtype=np.int32)
    order = np.lexsort((inc_pub, pub_year[inc_pub], inc_author))
    inc_author, inc_pub = inc_author[order], inc_pub[order]
    first_year = np.full(n_authors, 2030, dtype=np.int32)
    np.minimum.at(first_year, inc_author, pub_year[inc_pub])
    weights = rng.random((n_pubs, 4))
    qualifying = rng.random(n_pubs) < 0.9
    percentile = rng.integers(-1, 100, size=n_pubs).astype(np.int16)
    return dict(
        inc_author=inc_author,
        inc_pub=inc_pub,
        pub_year=pub_year,
        first_year=first_year,
        weights=weights,
        qualifying=qualifying,
        percentile=percentile,
        n_authors=n_authors,
        n_pubs=n_pubs,
        rng=rng,
    )


needs_numba = pytest.mark.skipif(not _kernels.USING_NUMBA, reason="numba unavailable or disabled")


@needs_numba
def test_stage_sums_numba_matches_numpy_bitwise():
    d = random_inputs(1)
    args = (
        d["inc_author"], d["inc_pub"], d["pub_year"], d["first_year"],
        d["weights"], d["qualifying"], 2022, d["n_authors"],
    )
    nb = _kernels._nb_stage_ptype_sums(*args)
    np_ = _kernels._np_stage_ptype_sums(*args)
    assert (nb == np_).all()  # identical accumulation order, bit-identical


@needs_numba
def test_citation_window_sums_match():
    d = random_inputs(2)
    rng = d["rng"]
    n_events = 5000
    ce_pub = rng.integers(0, d["n_pubs"], size=n_events).astype(np.int32)
    ce_year = (d["pub_year"][ce_pub] + rng.integers(0, 8, size=n_events)).astype(np.int32)
    ce_count = rng.integers(0, 5, size=n_events).astype(np.int64)
    nb = _kernels._nb_window_citation_sums(ce_pub, ce_year, ce_count, d["pub_year"], 4)
    np_ = _kernels._np_window_citation_sums(ce_pub, ce_year, ce_count, d["pub_year"], 4)
    assert (nb == np_).all()


@needs_numba
def test_ajpr_sums_match():
    d = random_inputs(3)
    args = (
        d["inc_author"], d["inc_pub"], d["pub_year"], d["first_year"],
        d["percentile"], d["qualifying"], 2022, d["n_authors"],
    )
    nb_s, nb_c = _kernels._nb_ajpr_stage_sums(*args)
    np_s, np_c = _kernels._np_ajpr_stage_sums(*args)
    assert (nb_s == np_s).all()
    assert (nb_c == np_c).all()


@needs_numba
def test_ragged_group_counts_match():
    d = random_inputs(4)
    rng = d["rng"]
    lens = rng.integers(0, 7, size=d["n_pubs"])
    starts = np.zeros(d["n_pubs"] + 1, dtype=np.int64)
    np.cumsum(lens, out=starts[1:])
    values = rng.integers(0, 12, size=int(lens.sum())).astype(np.int32)
    nb = _kernels._nb_ragged_group_counts(d["inc_author"], d["inc_pub"], starts, values, 12, d["n_authors"])
    np_ = _kernels._np_ragged_group_counts(d["inc_author"], d["inc_pub"], starts, values, 12, d["n_authors"])
    assert (nb == np_).all()


def test_env_flag_forces_numpy_fallback():
    env = dict(os.environ, CAREERFLOW_NO_NUMBA="1")
    code = (
        "from careerflow import _kernels; "
        "assert not _kernels.USING_NUMBA; "
        "assert _kernels.stage_ptype_sums is _kernels._np_stage_ptype_sums; "
        "print('fallback ok')"
    )
    out = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True
    )
    assert "fallback ok" in out.stdout


def test_pipeline_results_identical_without_numba(tmp_path):
    """Full analyze twice, numba on and off: identical manifests."""
    script = (
        "import sys, json; "
        "from pathlib import Path; "
        "from careerflow.pipeline import run_analyze; "
        "res = run_analyze(Path(sys.argv[1]), ['P1'], None, 1); "
        "print(json.dumps(res.manifest))"
    )
    from careerflow.pipeline import run_ingest
    from careerflow.corpus import SampleFilterConfig
    from careerflow.synth import CohortConfig, CorpusConfig, write_synthetic_corpus

    config = CorpusConfig(cohort=CohortConfig(n_authors=40, n_disciplines=2, seed=77))
    paths = {name: tmp_path / f"{name}.jsonl" for name in ("pubs", "journals", "authors")}
    with open(paths["pubs"], "w") as p, open(paths["journals"], "w") as j, open(
        paths["authors"], "w"
    ) as a:
        write_synthetic_corpus(config, p, j, a)
    run_ingest(paths["pubs"], paths["journals"], paths["authors"], tmp_path, 2022, SampleFilterConfig())

    manifests = []
    for no_numba in ("0", "1"):
        env = dict(os.environ, CAREERFLOW_NO_NUMBA=no_numba)
        out = subprocess.run(
            [sys.executable, "-c", script, str(tmp_path)],
            env=env,
            capture_output=True,
            text=True,
            check=True,
        )
        manifests.append(out.stdout.strip().splitlines()[-1])
    assert manifests[0] == manifests[1]
