"""Maximum-likelihood logistic models of class membership and their
reporting surface: odds ratios, Wald confidence intervals, significance,
Nagelkerke pseudo-R2, and inverse-correlation collinearity diagnostics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy import stats

from .classes import CLASS_ORDER, PRODUCTIVITY_TYPES, STAGES
from .columnar import GENDER_FEMALE, GENDER_MALE
from .portfolio import PortfolioTable

PREDICTORS = (
    "male",
    "mean_fwci4y",
    "intl_collab_rate",
    "ajpr",
    "median_team_size",
    "top200",
    "prior_class",
)

Z_95 = 1.96
SIG_THRESHOLD = 0.05


class DesignError(ValueError):
    """Unusable design: no rows, constant outcome, or invalid model spec."""


class RankDeficiencyError(DesignError):
    def __init__(self, dependent: list[str]):
        self.dependent = dependent
        super().__init__(f"design is rank deficient; dependent columns: {', '.join(dependent)}")


class SeparationError(DesignError):
    def __init__(self, name: str, value: float):
        super().__init__(
            f"perfect separation suspected: |coefficient| for {name} diverged past "
            f"{value:.1f}; drop or coarsen the offending predictor"
        )


class SingularCorrelationError(DesignError):
    def __init__(self, pair: tuple[str, str], r: float):
        self.pair = pair
        super().__init__(
            f"predictor correlation matrix is singular: |r({pair[0]}, {pair[1]})| = {abs(r):.4f}"
        )


@dataclass(frozen=True)
class ModelSpec:
    """One model: outcome side and stage, ordered predictors, ptype, scope."""

    outcome_class: str  # "top" or "bottom"
    target_stage: str  # "mid" or "late"
    predictors: tuple[str, ...]
    ptype: str = "P1"
    discipline: str = "all"

    def __post_init__(self) -> None:
        if self.outcome_class not in ("top", "bottom"):
            raise DesignError(f"outcome_class must be top or bottom, got {self.outcome_class!r}")
        if self.target_stage not in ("mid", "late"):
            raise DesignError(f"target_stage must be mid or late, got {self.target_stage!r}")
        if self.ptype not in PRODUCTIVITY_TYPES:
            raise DesignError(f"unknown ptype {self.ptype!r}")
        if not self.predictors:
            raise DesignError("predictors must be non-empty")
        for name in self.predictors:
            if name not in PREDICTORS:
                raise DesignError(f"unknown predictor {name!r}")
        if len(set(self.predictors)) != len(self.predictors):
            raise DesignError("duplicate predictor")
        if "top200" in self.predictors and self.target_stage != "late":
            raise DesignError("top200 is only available for late-stage models")

    @property
    def prior_stage(self) -> str:
        return "early" if self.target_stage == "mid" else "mid"

    @property
    def family(self) -> str:
        return f"{self.outcome_class}_{self.target_stage}"


def default_predictors(target_stage: str) -> tuple[str, ...]:
    base = ("male", "mean_fwci4y", "intl_collab_rate", "ajpr", "median_team_size")
    if target_stage == "late":
        return base + ("top200", "prior_class")
    return base + ("prior_class",)


def default_spec(outcome_class: str, target_stage: str, ptype: str, discipline: str) -> ModelSpec:
    return ModelSpec(
        outcome_class=outcome_class,
        target_stage=target_stage,
        predictors=default_predictors(target_stage),
        ptype=ptype,
        discipline=discipline,
    )


@dataclass
class Design:
    X: np.ndarray  # (n, k) predictors, no intercept column
    y: np.ndarray  # (n,) of {0.0, 1.0}
    names: list[str]
    n_used: int
    rows: np.ndarray  # sample-row indices retained


def build_design(table: PortfolioTable, class_codes: np.ndarray, spec: ModelSpec) -> Design:
    """Assemble the predictor matrix and outcome vector for one model.

    Rows are sample authors in the spec's discipline scope with every
    required predictor defined; indicator predictors are coded {0, 1} and
    continuous predictors enter unstandardized.
    """
    cols = table.columns
    stage_idx = {s: i for i, s in enumerate(STAGES)}
    class_idx = {c: i for i, c in enumerate(CLASS_ORDER)}
    t_idx = stage_idx[spec.target_stage]
    p_idx = stage_idx[spec.prior_stage]
    pt = PRODUCTIVITY_TYPES.index(spec.ptype)
    side = class_idx[spec.outcome_class]

    if spec.discipline == "all":
        in_scope = np.ones(table.n_sample, dtype=bool)
    else:
        try:
            disc = cols.disc_vocab.index(spec.discipline)
        except ValueError:
            raise DesignError(f"unknown discipline {spec.discipline!r}") from None
        in_scope = table.discipline_idx == disc

    gender = cols.gender_code[table.sample_idx]
    columns: dict[str, np.ndarray] = {}
    usable = in_scope.copy()
    for name in spec.predictors:
        if name == "male":
            values = np.where(gender == GENDER_MALE, 1.0, 0.0)
            usable &= (gender == GENDER_MALE) | (gender == GENDER_FEMALE)
        elif name == "mean_fwci4y":
            values = table.fwci_mean
            usable &= np.isfinite(values)
        elif name == "intl_collab_rate":
            values = table.intl_rate
            usable &= np.isfinite(values)
        elif name == "ajpr":
            values = table.ajpr_stage[:, t_idx]
            usable &= np.isfinite(values)
        elif name == "median_team_size":
            values = table.team_median
            usable &= np.isfinite(values)
        elif name == "top200":
            values = table.top200.astype(np.float64)
        else:  # prior_class
            values = (class_codes[:, p_idx, pt] == side).astype(np.float64)
        columns[name] = values

    rows = np.flatnonzero(usable)
    if rows.shape[0] == 0:
        raise DesignError(f"no usable rows for {spec.family}/{spec.ptype}/{spec.discipline}")
    X = np.column_stack([columns[name][rows] for name in spec.predictors])
    y = (class_codes[rows, t_idx, pt] == side).astype(np.float64)
    if y.min() == y.max():
        raise DesignError(
            f"constant outcome for {spec.family}/{spec.ptype}/{spec.discipline}: "
            f"every author is {'in' if y[0] else 'outside'} the {spec.outcome_class} class"
        )
    return Design(X=X, y=y, names=list(spec.predictors), n_used=rows.shape[0], rows=rows)


# ---------------------------------------------------------------------------
# fitting


@dataclass
class FitResult:
    """Estimates for intercept + predictors, in design order."""

    names: list[str]  # "intercept" first
    coef: np.ndarray
    se: np.ndarray
    p_values: np.ndarray
    loglik: float
    null_loglik: float
    n_used: int
    converged: bool
    iterations: int
    odds_ratios: np.ndarray = field(init=False)
    ci_low: np.ndarray = field(init=False)
    ci_high: np.ndarray = field(init=False)
    pseudo_r2: float = field(init=False)

    def __post_init__(self) -> None:
        # a degenerate predictor can have an enormous SE; the interval end
        # overflows to inf, which is the honest unbounded-CI answer
        with np.errstate(over="ignore"):
            self.odds_ratios = np.exp(self.coef)
            self.ci_low = np.exp(self.coef - Z_95 * self.se)
            self.ci_high = np.exp(self.coef + Z_95 * self.se)
        self.pseudo_r2 = nagelkerke_r2(self.loglik, self.null_loglik, self.n_used)

    def by_name(self, name: str) -> dict[str, float]:
        i = self.names.index(name)
        return {
            "coef": float(self.coef[i]),
            "se": float(self.se[i]),
            "odds_ratio": float(self.odds_ratios[i]),
            "ci_low": float(self.ci_low[i]),
            "ci_high": float(self.ci_high[i]),
            "p": float(self.p_values[i]),
        }


def _loglik(X: np.ndarray, y: np.ndarray, beta: np.ndarray) -> float:
    eta = X @ beta
    return float(np.sum(y * eta) - np.sum(np.logaddexp(0.0, eta)))


def _dependent_columns(X: np.ndarray, names: list[str]) -> list[str]:
    _, r, pivots = sla.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag.max() * max(X.shape) * np.finfo(float).eps if diag.size else 0.0
    rank = int(np.count_nonzero(diag > tol))
    return [names[p] for p in pivots[rank:]]


def fit_logistic(
    X: np.ndarray,
    y: np.ndarray,
    names: list[str] | None = None,
    max_iter: int = 100,
    score_tol: float = 1e-8,
    ll_tol: float = 1e-10,
    separation_bound: float = 30.0,
) -> FitResult:
    """Damped-Newton maximum likelihood for a binary outcome.

    Converges when the largest score component drops below score_tol or the
    relative log-likelihood change drops below ll_tol. Standard errors come
    from the inverse observed information; p-values are two-sided Wald tests.
    An intercept column is prepended automatically.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DesignError("X must be (n, k) aligned with y")
    if not np.isin(y, (0.0, 1.0)).all():
        raise DesignError("outcome must be coded {0, 1}")
    if y.min() == y.max():
        raise DesignError("constant outcome")
    n, k = X.shape
    names = list(names) if names is not None else [f"x{i}" for i in range(k)]
    if len(names) != k:
        raise DesignError("one name per predictor column required")
    full_names = ["intercept"] + names
    Xd = np.column_stack([np.ones(n), X])

    if np.linalg.matrix_rank(Xd) < k + 1:
        raise RankDeficiencyError(_dependent_columns(Xd, full_names))

    beta = np.zeros(k + 1)
    ll = _loglik(Xd, y, beta)
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        eta = Xd @ beta
        p = 1.0 / (1.0 + np.exp(-np.clip(eta, -500, 500)))
        score = Xd.T @ (y - p)
        if np.max(np.abs(score)) < score_tol:
            converged = True
            break
        w = p * (1.0 - p)
        info = Xd.T @ (Xd * w[:, None])
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError:
            worst = int(np.argmax(np.abs(beta)))
            raise SeparationError(full_names[worst], float(np.abs(beta[worst]))) from None
        # halve the step until the log-likelihood stops decreasing
        scale = 1.0
        new_ll = -np.inf
        candidate = beta
        while scale >= 2.0**-12:
            candidate = beta + scale * step
            new_ll = _loglik(Xd, y, candidate)
            if new_ll >= ll - 1e-12:
                break
            scale /= 2.0
        beta = candidate
        if np.max(np.abs(beta)) > separation_bound:
            worst = int(np.argmax(np.abs(beta)))
            raise SeparationError(full_names[worst], float(np.abs(beta[worst])))
        if abs(new_ll - ll) < ll_tol * (abs(ll) + 1.0):
            ll = new_ll
            converged = True
            break
        ll = new_ll

    eta = Xd @ beta
    p = 1.0 / (1.0 + np.exp(-np.clip(eta, -500, 500)))
    w = p * (1.0 - p)
    info = Xd.T @ (Xd * w[:, None])
    cov = np.linalg.inv(info)
    se = np.sqrt(np.diag(cov))
    z = np.divide(beta, se, out=np.zeros_like(beta), where=se > 0)
    p_values = 2.0 * stats.norm.sf(np.abs(z))

    p_bar = y.mean()
    null_ll = n * (p_bar * math.log(p_bar) + (1.0 - p_bar) * math.log(1.0 - p_bar))
    return FitResult(
        names=full_names,
        coef=beta,
        se=se,
        p_values=p_values,
        loglik=_loglik(Xd, y, beta),
        null_loglik=null_ll,
        n_used=n,
        converged=converged,
        iterations=iterations,
    )


def nagelkerke_r2(loglik: float, null_loglik: float, n: int) -> float:
    """(1 - exp(2(L0 - L1)/n)) / (1 - exp(2 L0 / n))."""
    cox_snell = 1.0 - math.exp(2.0 * (null_loglik - loglik) / n)
    denom = 1.0 - math.exp(2.0 * null_loglik / n)
    if denom == 0.0:
        return 0.0
    return cox_snell / denom


def collinearity_diagonal(X: np.ndarray, names: list[str]) -> dict[str, float]:
    """Main diagonal of the inverted predictor correlation matrix (VIFs)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] < 2:
        raise DesignError("need at least two predictor columns")
    stds = X.std(axis=0)
    for i, s in enumerate(stds):
        if s == 0.0:
            raise DesignError(f"constant predictor column: {names[i]}")
    corr = np.corrcoef(X, rowvar=False)
    k = corr.shape[0]
    for i in range(k):
        for j in range(i + 1, k):
            if abs(corr[i, j]) > 0.999:
                raise SingularCorrelationError((names[i], names[j]), float(corr[i, j]))
    try:
        inverse = np.linalg.inv(corr)
    except np.linalg.LinAlgError:
        raise SingularCorrelationError((names[0], names[-1]), 1.0) from None
    return {name: float(inverse[i, i]) for i, name in enumerate(names)}


# ---------------------------------------------------------------------------
# model reports


@dataclass
class ModelOutcome:
    spec: ModelSpec
    fit: FitResult | None = None
    vif: dict[str, float] | None = None
    error: str | None = None


def run_model(table: PortfolioTable, class_codes: np.ndarray, spec: ModelSpec) -> ModelOutcome:
    """Fit one model, returning errors as marked outcomes instead of raising."""
    try:
        design = build_design(table, class_codes, spec)
        fit = fit_logistic(design.X, design.y, design.names)
        vif = (
            collinearity_diagonal(design.X, design.names)
            if design.X.shape[1] >= 2
            else None
        )
        return ModelOutcome(spec=spec, fit=fit, vif=vif)
    except DesignError as exc:
        return ModelOutcome(spec=spec, error=str(exc))


def sig_label(p: float) -> str:
    """The published convention: "0" means p <= 0.001."""
    return "0" if p <= 0.001 else f"{p:.3f}"


def grid_rows(outcomes: list[ModelOutcome], predictors: tuple[str, ...]) -> list[list[str]]:
    """Per-discipline odds-ratio grid.

    Columns are the disciplines with attempted models; non-significant cells
    (p > 0.05) are blank, unconverged fits are marked "(nc)", failed models
    carry the error in the r2 row. Intercepts are excluded.
    """
    outcomes = sorted(outcomes, key=lambda o: o.spec.discipline)
    header = ["predictor"] + [o.spec.discipline for o in outcomes]
    r2_row = ["r2"]
    for o in outcomes:
        if o.fit is None:
            r2_row.append("(error)")
        else:
            r2_row.append(f"{o.fit.pseudo_r2:.3f}")
    rows = [header, r2_row]
    for name in predictors:
        row = [name]
        for o in outcomes:
            if o.fit is None or name not in o.fit.names:
                row.append("")
                continue
            stats_row = o.fit.by_name(name)
            if not o.fit.converged:
                row.append("(nc)")
            elif stats_row["p"] > SIG_THRESHOLD:
                row.append("")
            else:
                row.append(f"{stats_row['odds_ratio']:.3f}")
        rows.append(row)
    return rows
