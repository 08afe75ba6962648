import math

import numpy as np
import pytest

from careerflow.classes import BOTTOM, MIDDLE, TOP
from careerflow.columnar import columns_from_corpus
from careerflow.portfolio import derive_portfolios
from careerflow.regression import (
    DesignError,
    ModelSpec,
    RankDeficiencyError,
    SeparationError,
    SingularCorrelationError,
    build_design,
    collinearity_diagonal,
    default_spec,
    fit_logistic,
    grid_rows,
    nagelkerke_r2,
    run_model,
    sig_label,
)
from careerflow.synth import CohortConfig, CorpusConfig, gen_corpus

from conftest import make_corpus, make_pub


def simulate_logistic(rng, n, beta, intercept=0.0, binary_last=False):
    k = len(beta)
    X = rng.standard_normal((n, k))
    if binary_last:
        X[:, -1] = (rng.random(n) < 0.2).astype(float)
    eta = intercept + X @ np.asarray(beta)
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    return X, y


# ---------------------------------------------------------------------------
# fitting


def test_null_model_odds_ratios_near_one():
    rng = np.random.default_rng(42)
    X = rng.standard_normal((4000, 3))
    y = (rng.random(4000) < 0.5).astype(float)
    fit = fit_logistic(X, y, ["x1", "x2", "x3"])
    assert fit.converged
    for i in range(1, 4):  # predictors, skipping the intercept
        assert abs(fit.coef[i]) <= 2.0 * fit.se[i]
        assert fit.ci_low[i] <= 1.0 + 1e-9 or fit.ci_high[i] >= 1.0 - 1e-9


def test_recovers_known_coefficients():
    rng = np.random.default_rng(7)
    beta = (0.3, -0.2, 1.5)
    X, y = simulate_logistic(rng, 50_000, beta, intercept=-0.5)
    fit = fit_logistic(X, y, ["x1", "x2", "x3"])
    assert fit.converged
    for i, true in enumerate((-0.5,) + beta):
        assert abs(fit.coef[i] - true) <= 2.0 * fit.se[i]


def test_two_group_closed_form_mle():
    # x=0 group: one success of four; x=1 group: three successes of four
    X = np.array([[0.0]] * 4 + [[1.0]] * 4)
    y = np.array([0, 0, 0, 1, 0, 1, 1, 1], dtype=float)
    fit = fit_logistic(X, y, ["x"])
    assert fit.coef[0] == pytest.approx(math.log(1 / 3), abs=1e-6)
    assert fit.coef[1] == pytest.approx(math.log(9), abs=1e-6)
    # hand-derived Nagelkerke value for this fixture
    assert fit.pseudo_r2 == pytest.approx(0.30693285477399873, abs=1e-6)


def test_exp_log_round_trip_identity():
    # the published prior-class odds ratio and its log-scale coefficient
    assert math.log(11.136) == pytest.approx(2.4102, abs=5e-5)
    assert math.exp(math.log(11.136)) == pytest.approx(11.136, abs=1e-12)
    rng = np.random.default_rng(3)
    X, y = simulate_logistic(rng, 2000, (0.4, -0.3))
    fit = fit_logistic(X, y, ["a", "b"])
    assert np.abs(fit.odds_ratios - np.exp(fit.coef)).max() < 1e-12


def test_wald_ci_symmetric_on_log_scale():
    rng = np.random.default_rng(11)
    X, y = simulate_logistic(rng, 3000, (0.5, 0.1))
    fit = fit_logistic(X, y, ["a", "b"])
    upper_gap = np.log(fit.ci_high) - fit.coef
    lower_gap = fit.coef - np.log(fit.ci_low)
    assert np.abs(upper_gap - lower_gap).max() < 1e-9
    assert (fit.ci_low <= fit.odds_ratios).all()
    assert (fit.odds_ratios <= fit.ci_high).all()


def test_permuting_predictors_permutes_results():
    rng = np.random.default_rng(19)
    X, y = simulate_logistic(rng, 5000, (0.3, -0.6, 0.9))
    fit = fit_logistic(X, y, ["a", "b", "c"])
    perm = [2, 0, 1]
    fit_p = fit_logistic(X[:, perm], y, ["c", "a", "b"])
    for name in ("a", "b", "c"):
        i = fit.names.index(name)
        j = fit_p.names.index(name)
        assert fit.coef[i] == pytest.approx(fit_p.coef[j], abs=1e-10)
        assert fit.se[i] == pytest.approx(fit_p.se[j], abs=1e-10)


def test_perfect_separation_raises():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(300)
    y = (x > 0).astype(float)
    with pytest.raises(SeparationError):
        fit_logistic(x[:, None], y, ["sep"])


def test_rank_deficiency_names_dependent_column():
    rng = np.random.default_rng(9)
    a = rng.standard_normal(200)
    b = rng.standard_normal(200)
    X = np.column_stack([a, b, a + b])
    y = (rng.random(200) < 0.5).astype(float)
    with pytest.raises(RankDeficiencyError) as err:
        fit_logistic(X, y, ["a", "b", "a_plus_b"])
    assert any(name in str(err.value) for name in ("a", "b", "a_plus_b"))


def test_constant_outcome_fatal():
    with pytest.raises(DesignError, match="constant outcome"):
        fit_logistic(np.ones((10, 1)), np.ones(10), ["x"])


# ---------------------------------------------------------------------------
# pseudo-R2


def test_nagelkerke_zero_when_no_improvement():
    assert nagelkerke_r2(-100.0, -100.0, 500) == 0.0


def test_nagelkerke_in_unit_interval_on_fixture():
    r2 = nagelkerke_r2(-4.498681156950466, -5.545177444479562, 8)
    assert 0.0 < r2 < 1.0
    assert r2 == pytest.approx(0.30693285477399873, abs=1e-12)


def test_adding_informative_predictor_never_decreases_r2():
    rng = np.random.default_rng(23)
    X, y = simulate_logistic(rng, 4000, (0.8, 0.5))
    reduced = fit_logistic(X[:, :1], y, ["x1"])
    full = fit_logistic(X, y, ["x1", "x2"])
    assert full.pseudo_r2 >= reduced.pseudo_r2 - 1e-12


# ---------------------------------------------------------------------------
# collinearity


def test_orthogonal_predictors_give_unit_diagonal():
    X = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    vif = collinearity_diagonal(X, ["a", "b"])
    assert vif["a"] == pytest.approx(1.0, abs=1e-12)
    assert vif["b"] == pytest.approx(1.0, abs=1e-12)


def test_duplicated_predictor_is_singular():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(100)
    with pytest.raises(SingularCorrelationError) as err:
        collinearity_diagonal(np.column_stack([x, x]), ["a", "a_copy"])
    assert "a_copy" in str(err.value)


def test_correlated_design_inflates_diagonal():
    rng = np.random.default_rng(31)
    base = rng.standard_normal(500)
    X = np.column_stack([base, 0.8 * base + 0.6 * rng.standard_normal(500)])
    vif = collinearity_diagonal(X, ["a", "b"])
    assert vif["a"] > 1.2
    assert vif["b"] > 1.2


def test_constant_column_rejected():
    with pytest.raises(DesignError, match="constant"):
        collinearity_diagonal(np.column_stack([np.ones(50), np.arange(50.0)]), ["c", "x"])


# ---------------------------------------------------------------------------
# model specs and design building


def test_top200_only_in_late_stage_models():
    with pytest.raises(DesignError, match="top200"):
        ModelSpec("top", "mid", ("male", "top200", "prior_class"))
    ModelSpec("top", "late", ("male", "top200", "prior_class"))  # accepted


def test_default_spec_families():
    spec = default_spec("top", "mid", "P1", "MED")
    assert spec.prior_stage == "early"
    assert "top200" not in spec.predictors
    late = default_spec("bottom", "late", "P2", "MED")
    assert late.prior_stage == "mid"
    assert "top200" in late.predictors


def _tiny_table():
    """Six-author corpus; a3 has unknown gender, a4 a sub-threshold score."""
    pubs = []
    for i in range(1, 7):
        aid = f"a{i}"
        years = [1992, 1997 + i, 2004, 2010, 2019, 2021]
        for k, year in enumerate(years):
            pubs.append(
                make_pub(
                    pub_id=f"{aid}p{k}",
                    year=year,
                    authors=(aid,),
                    journal="j60",
                    citations={year: 1 + (i + k) % 3},
                    refs=("MED",),
                )
            )
    genders = {
        "a1": ("male", 0.99),
        "a2": ("female", 0.95),
        "a3": ("unknown", 0.0),
        "a4": ("male", 0.60),  # below the acceptance threshold
        "a5": ("female", 0.90),
        "a6": ("male", 0.92),
    }
    corpus = make_corpus(pubs, journals={"j60": {"MED": 60}}, author_genders=genders)
    columns = columns_from_corpus(corpus)
    table = derive_portfolios(columns)
    return table


def test_gender_unknown_dropped_from_design():
    table = _tiny_table()
    codes = np.full((6, 3, 4), MIDDLE, dtype=np.int8)
    codes[:, 1, 0] = [TOP, BOTTOM, TOP, BOTTOM, TOP, BOTTOM]  # target stage outcome
    codes[:, 0, 0] = [TOP, BOTTOM, TOP, BOTTOM, BOTTOM, TOP]  # prior stage
    spec = ModelSpec("top", "mid", ("male", "prior_class"), "P1", "MED")
    design = build_design(table, codes, spec)
    # a3 (unknown label) and a4 (score below threshold) are dropped
    assert design.n_used == 4
    assert design.X.shape == (4, 2)


def test_male_top_prior_author_row_coding():
    table = _tiny_table()
    codes = np.full((6, 3, 4), MIDDLE, dtype=np.int8)
    codes[:, 1, 0] = [TOP, BOTTOM, TOP, BOTTOM, TOP, BOTTOM]
    codes[:, 0, 0] = [TOP, BOTTOM, TOP, BOTTOM, BOTTOM, TOP]
    spec = ModelSpec("top", "mid", ("male", "prior_class"), "P1", "MED")
    design = build_design(table, codes, spec)
    # first retained row is a1: male with a top prior class
    assert design.X[0].tolist() == [1.0, 1.0]
    assert design.y[0] == 1.0


def test_constant_outcome_in_design_fatal():
    table = _tiny_table()
    codes = np.full((6, 3, 4), TOP, dtype=np.int8)
    spec = ModelSpec("top", "mid", ("male", "prior_class"), "P1", "MED")
    with pytest.raises(DesignError, match="constant outcome"):
        build_design(table, codes, spec)


def test_run_model_marks_errors_instead_of_raising():
    table = _tiny_table()
    codes = np.full((6, 3, 4), TOP, dtype=np.int8)
    outcome = run_model(table, codes, ModelSpec("top", "mid", ("male", "prior_class"), "P1", "MED"))
    assert outcome.fit is None
    assert "constant outcome" in outcome.error


def test_end_to_end_model_on_synthetic_corpus():
    corpus = gen_corpus(
        CorpusConfig(
            cohort=CohortConfig(n_authors=400, n_disciplines=1, persistence=0.7, seed=29),
            gender_unknown_prob=0.0,
        )
    )
    columns = columns_from_corpus(corpus)
    table = derive_portfolios(columns)
    from careerflow.classes import assign_cohort_classes

    codes, _ = assign_cohort_classes(table.discipline_idx, table.productivity)
    outcome = run_model(table, codes, default_spec("top", "mid", "P1", "D00"))
    assert outcome.error is None
    assert outcome.fit.converged
    assert outcome.fit.n_used > 300
    assert outcome.vif is not None
    assert all(v >= 1.0 - 1e-9 for v in outcome.vif.values())
    # persistence makes the prior-class odds ratio exceed 1
    assert outcome.fit.by_name("prior_class")["odds_ratio"] > 1.0


# ---------------------------------------------------------------------------
# report grid


def test_sig_label_convention():
    assert sig_label(0.0005) == "0"
    assert sig_label(0.001) == "0"
    assert sig_label(0.049) == "0.049"


def test_grid_blanks_non_significant_cells():
    rng = np.random.default_rng(37)
    X, y = simulate_logistic(rng, 3000, (1.2, 0.0))
    fit = fit_logistic(X, y, ["strong", "noise"])
    assert fit.p_values[fit.names.index("strong")] <= 0.05
    assert fit.p_values[fit.names.index("noise")] > 0.05
    outcome = run_model_stub(fit, discipline="MED")
    rows = grid_rows([outcome], ("strong", "noise"))
    header, r2_row, strong_row, noise_row = rows
    assert header == ["predictor", "MED"]
    assert strong_row[1] != ""
    assert noise_row[1] == ""
    assert "intercept" not in [r[0] for r in rows]


def run_model_stub(fit, discipline):
    from careerflow.regression import ModelOutcome

    spec = ModelSpec("top", "mid", ("male", "prior_class"), "P1", discipline)
    return ModelOutcome(spec=spec, fit=fit)
