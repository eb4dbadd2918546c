"""Maximum-likelihood logistic regression with categorical fixed effects.

The design matrix always carries an intercept; categorical regressors
expand into dummies with the lexicographically-first level dropped as the
reference. Fits run Newton-Raphson (iteratively reweighted least squares)
to a tight score tolerance; standard errors come from the inverse observed
information, p-values from the two-sided normal approximation, and model
comparison uses BIC = k*ln(n) - 2*logL.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, NonConvergence, RankDeficient, Separation

MISSING = None  # sentinel for absent regressor values in row dicts

STAR_LEVELS = ((0.001, "***"), (0.01, "**"), (0.05, "*"))


def significance_stars(p: float) -> str:
    for level, stars in STAR_LEVELS:
        if p < level:
            return stars
    return ""


@dataclass(frozen=True)
class ModelSpec:
    """Regressor lists for one model; names refer to row-dict keys."""

    dependent: str
    continuous: tuple[str, ...] = ()
    categorical: tuple[str, ...] = ()
    name: str = ""

    def all_regressors(self) -> tuple[str, ...]:
        return self.continuous + self.categorical


@dataclass
class DesignMatrix:
    x: np.ndarray
    y: np.ndarray
    columns: list[str]
    n_dropped: int
    drop_reasons: dict[str, int]
    row_index: list[int]  # positions of kept rows in the input dataset


@dataclass
class FitReport:
    spec: ModelSpec
    columns: list[str]
    coef: np.ndarray
    se: np.ndarray
    z: np.ndarray
    p: np.ndarray
    n: int
    k: int
    log_likelihood: float
    bic: float
    iterations: int
    drop_reasons: dict[str, int] = field(default_factory=dict)

    def term(self, name: str) -> dict:
        i = self.columns.index(name)
        return {
            "coef": float(self.coef[i]), "se": float(self.se[i]),
            "z": float(self.z[i]), "p": float(self.p[i]),
            "stars": significance_stars(float(self.p[i])),
        }


def build_design(dataset: list[dict], spec: ModelSpec) -> DesignMatrix:
    """Expand a row-dict dataset into intercept + continuous + dummy columns.

    Rows missing any regressor or carrying an undefined label are dropped
    and counted by reason; sample sizes therefore vary across nested models
    exactly as far as their regressors' missingness differs.
    """
    drop_reasons: dict[str, int] = {}
    kept_rows: list[dict] = []
    row_index: list[int] = []
    for i, row in enumerate(dataset):
        label = row.get(spec.dependent, MISSING)
        if label is MISSING or label not in (0, 1):
            drop_reasons[f"undefined label {spec.dependent}"] = (
                drop_reasons.get(f"undefined label {spec.dependent}", 0) + 1
            )
            continue
        missing = [r for r in spec.all_regressors() if row.get(r, MISSING) is MISSING]
        if missing:
            key = f"missing {missing[0]}"
            drop_reasons[key] = drop_reasons.get(key, 0) + 1
            continue
        kept_rows.append(row)
        row_index.append(i)

    if not kept_rows:
        raise DataError(f"no usable rows for model {spec.name or spec.dependent}")

    columns = ["intercept"]
    blocks = [np.ones((len(kept_rows), 1))]
    for name in spec.continuous:
        blocks.append(np.array([[float(r[name])] for r in kept_rows]))
        columns.append(name)
    for name in spec.categorical:
        levels = sorted({str(r[name]) for r in kept_rows})
        reference, rest = levels[0], levels[1:]
        for level in rest:
            blocks.append(np.array([[1.0 if str(r[name]) == level else 0.0]
                                    for r in kept_rows]))
            columns.append(f"{name}[{level}]")
        if not rest:
            # single observed level carries no information beyond the intercept
            raise RankDeficient(
                f"categorical {name!r} has a single level {reference!r} on the kept rows"
            )

    x = np.hstack(blocks)
    y = np.array([int(r[spec.dependent]) for r in kept_rows], dtype=np.float64)

    offending = _rank_check(x, columns)
    if offending:
        raise RankDeficient(f"design matrix is rank deficient; offending columns: {offending}")

    return DesignMatrix(
        x=x, y=y, columns=columns,
        n_dropped=len(dataset) - len(kept_rows),
        drop_reasons=drop_reasons,
        row_index=row_index,
    )


def _rank_check(x: np.ndarray, columns: list[str]) -> list[str]:
    """Columns that do not increase the rank of the preceding ones."""
    offending = []
    rank = 0
    for j in range(x.shape[1]):
        new_rank = np.linalg.matrix_rank(x[:, : j + 1])
        if new_rank == rank:
            offending.append(columns[j])
        rank = new_rank
    return offending


def _log_likelihood(x, y, beta) -> float:
    eta = x @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def fit_logit(
    design: DesignMatrix,
    spec: ModelSpec | None = None,
    max_iter: int = 100,
    tol: float = 1e-8,
    separation_bound: float = 1e6,
) -> FitReport:
    """Newton-Raphson fit to score max-norm below ``tol``.

    Raises Separation when coefficients diverge (a symptom of perfectly
    separable classes) and NonConvergence when the iteration cap is hit.
    """
    x, y = design.x, design.y
    n, k = x.shape
    if len(np.unique(y)) < 2:
        raise DataError("dependent variable takes a single value on the kept rows")
    if n <= k:
        raise DataError(f"{n} rows cannot identify {k} parameters")

    beta = np.zeros(k)
    loglik = _log_likelihood(x, y, beta)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        eta = x @ beta
        prob = np.where(eta >= 0, 1 / (1 + np.exp(-np.abs(eta))),
                        np.exp(-np.abs(eta)) / (1 + np.exp(-np.abs(eta))))
        score = x.T @ (y - prob)
        if np.abs(score).max() < tol:
            break
        weight = prob * (1.0 - prob)
        info = x.T @ (x * weight[:, None])
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError as exc:
            raise Separation(
                f"information matrix singular at iteration {iterations} "
                f"(coefficient norm {np.abs(beta).max():.3g})"
            ) from exc
        # step-halving keeps the likelihood monotone on hard problems
        new_loglik = -np.inf
        for _ in range(40):
            candidate = beta + step
            new_loglik = _log_likelihood(x, y, candidate)
            if new_loglik >= loglik - 1e-12:
                break
            step = step / 2.0
        beta = beta + step
        loglik = new_loglik
        if np.abs(beta).max() > separation_bound:
            raise Separation(
                f"coefficients diverged beyond {separation_bound:g}; "
                "classes are (quasi-)separable"
            )
    else:
        raise NonConvergence(f"no convergence in {max_iter} iterations")

    eta = x @ beta
    prob = np.where(eta >= 0, 1 / (1 + np.exp(-np.abs(eta))),
                    np.exp(-np.abs(eta)) / (1 + np.exp(-np.abs(eta))))
    # a fit that is this close to perfect has no finite MLE: the score only
    # vanished because every probability saturated toward its label
    if np.abs(y - prob).max() < 1e-5:
        raise Separation("fitted probabilities saturated at the labels; "
                         "classes are (quasi-)separable")
    weight = prob * (1.0 - prob)
    info = x.T @ (x * weight[:, None])
    covariance = np.linalg.inv(info)
    se = np.sqrt(np.diag(covariance))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, beta / se, np.inf)
    p = np.array([math.erfc(abs(v) / math.sqrt(2.0)) for v in z])
    loglik = _log_likelihood(x, y, beta)
    return FitReport(
        spec=spec or ModelSpec(dependent="y"),
        columns=list(design.columns),
        coef=beta, se=se, z=z, p=p,
        n=n, k=k,
        log_likelihood=loglik,
        bic=k * math.log(n) - 2.0 * loglik,
        iterations=iterations,
        drop_reasons=dict(design.drop_reasons),
    )


def run_model_grid(dataset: list[dict], specs: list[ModelSpec]) -> list[FitReport]:
    """Fit each model of a nested grid on its own usable rows."""
    reports = []
    for spec in specs:
        design = build_design(dataset, spec)
        reports.append(fit_logit(design, spec))
    return reports


def incremental_grid(
    dependent: str,
    steps: list[tuple[str, list[str], list[str]]],
) -> list[ModelSpec]:
    """Build nested specs: each step appends regressors to the previous.

    ``steps`` holds (model name, added continuous, added categorical).
    """
    specs = []
    continuous: list[str] = []
    categorical: list[str] = []
    for name, cont, cat in steps:
        continuous = continuous + list(cont)
        categorical = categorical + list(cat)
        specs.append(ModelSpec(
            dependent=dependent,
            continuous=tuple(continuous),
            categorical=tuple(categorical),
            name=name,
        ))
    return specs


# --- report rendering -------------------------------------------------------


def _fmt(value: float, digits: int = 4) -> str:
    if abs(value) >= 1e5 or (abs(value) < 1e-4 and value != 0):
        return f"{value:.3e}"
    return f"{value:.{digits}f}"


def render_fit_text(report: FitReport) -> str:
    lines = [f"Model: {report.spec.name or report.spec.dependent}"]
    width = max(len(c) for c in report.columns) + 2
    lines.append(f"{'term':<{width}}{'coef':>12}{'se':>12}{'z':>10}{'p':>12}  sig")
    for i, col in enumerate(report.columns):
        lines.append(
            f"{col:<{width}}{_fmt(report.coef[i]):>12}{_fmt(report.se[i]):>12}"
            f"{_fmt(report.z[i], 3):>10}{_fmt(report.p[i]):>12}  "
            f"{significance_stars(float(report.p[i]))}"
        )
    lines.append(f"observations: {report.n}")
    lines.append(f"log-likelihood: {report.log_likelihood:.6f}")
    lines.append(f"BIC: {report.bic:.6f}")
    return "\n".join(lines) + "\n"


def render_grid_text(reports: list[FitReport]) -> str:
    """Side-by-side layout: coefficient with stars, standard error below."""
    terms: list[str] = []
    for r in reports:
        for c in r.columns:
            if c not in terms:
                terms.append(c)
    names = [r.spec.name or f"model {i + 1}" for i, r in enumerate(reports)]
    width = max(len(t) for t in terms) + 2
    cell = 16
    header = f"{'':<{width}}" + "".join(f"{n:>{cell}}" for n in names)
    lines = [header]
    for term in terms:
        coef_cells, se_cells = [], []
        for r in reports:
            if term in r.columns:
                t = r.term(term)
                coef_cells.append(f"{_fmt(t['coef'])}{t['stars']}")
                se_cells.append(f"({_fmt(t['se'])})")
            else:
                coef_cells.append("")
                se_cells.append("")
        lines.append(f"{term:<{width}}" + "".join(f"{c:>{cell}}" for c in coef_cells))
        lines.append(f"{'':<{width}}" + "".join(f"{c:>{cell}}" for c in se_cells))
    lines.append(f"{'observations':<{width}}" + "".join(f"{r.n:>{cell}}" for r in reports))
    lines.append(f"{'BIC':<{width}}" + "".join(f"{_fmt(r.bic, 1):>{cell}}" for r in reports))
    return "\n".join(lines) + "\n"


def write_grid_csv(reports: list[FitReport], path):
    """Long-format CSV: one row per (model, term)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "term", "coef", "se", "z", "p", "stars", "n", "loglik", "bic"])
        for r in reports:
            name = r.spec.name or r.spec.dependent
            for i, col in enumerate(r.columns):
                writer.writerow([
                    name, col, repr(float(r.coef[i])), repr(float(r.se[i])),
                    repr(float(r.z[i])), repr(float(r.p[i])),
                    significance_stars(float(r.p[i])),
                    r.n, repr(r.log_likelihood), repr(r.bic),
                ])
