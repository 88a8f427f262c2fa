"""Topical-bias detection via linear regression of cluster scores.

Encodes entity metadata into a dummy-coded design matrix, fits per-cluster
ordinary least squares models of the topic proportion on the attributes,
and reports coefficients with t/F inference in a per-cluster table.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateError,
    DimensionError,
    NonFiniteError,
    RankDeficiencyError,
    UnknownLevelError,
    ValidationError,
)

logger = logging.getLogger(__name__)

INTERCEPT = "intercept"


# ---------------------------------------------------------------------------
# Distribution tails (regularized incomplete beta, continued fraction)
# ---------------------------------------------------------------------------

_CF_MAX_ITER = 500
_CF_EPS = 1e-16
_CF_TINY = 1e-300


def _beta_continued_fraction(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta, modified Lentz method."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_TINY:
            d = _CF_TINY
        c = 1.0 + aa / c
        if abs(c) < _CF_TINY:
            c = _CF_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    logger.warning("incomplete beta continued fraction hit max iterations (a=%s b=%s)", a, b)
    return h


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b) for a, b > 0 and x in [0, 1]."""
    if a <= 0 or b <= 0:
        raise ValidationError("incomplete beta parameters must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValidationError(f"incomplete beta argument must be in [0,1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # Continued fraction converges fastest below the distribution mean.
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_continued_fraction(a, b, x) / a
    return 1.0 - front * _beta_continued_fraction(b, a, 1.0 - x) / b


def student_t_sf(t: float, df: int) -> float:
    """Upper tail P(T >= t) of Student's t with df degrees of freedom.

    Uses sf(t) = I_{df/(df+t^2)}(df/2, 1/2) / 2 for t >= 0; two-sided
    p-values are 2 * student_t_sf(|t|, df).
    """
    if df < 1:
        raise ValidationError(f"degrees of freedom must be >= 1, got {df}")
    if math.isnan(t):
        raise NonFiniteError("t statistic is NaN")
    if math.isinf(t):
        return 0.0 if t > 0 else 1.0
    if t == 0.0:
        return 0.5
    x = df / (df + t * t)
    tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x)
    return tail if t > 0 else 1.0 - tail


def f_sf(f: float, df1: int, df2: int) -> float:
    """Upper tail P(F' >= f) of the F distribution."""
    if df1 < 1 or df2 < 1:
        raise ValidationError("F degrees of freedom must be >= 1")
    if math.isnan(f):
        raise NonFiniteError("F statistic is NaN")
    if f < 0:
        raise ValidationError(f"F statistic must be >= 0, got {f}")
    if f == 0.0:
        return 1.0
    if math.isinf(f):
        return 0.0
    x = df2 / (df2 + df1 * f)
    return regularized_incomplete_beta(df2 / 2.0, df1 / 2.0, x)


# ---------------------------------------------------------------------------
# Design matrix
# ---------------------------------------------------------------------------

@dataclass
class DesignMatrix:
    """Intercept-led regression design with dummy-coded categoricals."""

    matrix: np.ndarray
    column_names: list
    encoding: dict  # attribute -> {"kind", "reference"?, "levels"?}
    entity_ids: list

    @property
    def n_obs(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_columns(self) -> int:
        return self.matrix.shape[1]


def _most_frequent_level(values):
    counts = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    best = max(counts.items(), key=lambda kv: (kv[1], kv[0]))
    # Deterministic tie break: highest count, then lexicographically last
    # would be arbitrary; prefer highest count then smallest name.
    top = max(counts.values())
    return min(level for level, cnt in counts.items() if cnt == top)


def filter_rare_levels(entities, schema, min_count: int = 2):
    """Drop entities belonging to categorical levels observed fewer than
    min_count times, iterating until stable.

    Returns (kept_entities, dropped) where dropped is a list of
    (attribute, level, [entity names]) in drop order.
    """
    kept = list(entities)
    dropped = []
    changed = True
    while changed:
        changed = False
        for attr, kind in schema.items():
            if kind != "categorical":
                continue
            counts = {}
            for ent in kept:
                level = ent.attributes[attr]
                counts[level] = counts.get(level, 0) + 1
            for level in sorted(counts):
                if counts[level] < min_count:
                    victims = [e for e in kept if e.attributes[attr] == level]
                    kept = [e for e in kept if e.attributes[attr] != level]
                    dropped.append((attr, level, [e.name for e in victims]))
                    logger.info(
                        "excluding %d entit%s: %s=%r has fewer than %d members",
                        len(victims), "y" if len(victims) == 1 else "ies",
                        attr, level, min_count,
                    )
                    changed = True
    return kept, dropped


def build_design_matrix(entities, schema, reference_levels=None) -> DesignMatrix:
    """Dummy-code entities into an N x (P'+1) design matrix.

    One intercept column of ones first, then for each attribute in schema
    order: a passthrough column for numeric attributes, or one 0/1 column
    per non-reference level (ordered by level name) for categoricals.
    Reference levels default to the most frequent observed level.
    """
    entities = list(entities)
    if not entities:
        raise DegenerateError("no entities to encode")
    reference_levels = dict(reference_levels or {})

    columns = [np.ones(len(entities))]
    names = [INTERCEPT]
    encoding = {}
    for attr, kind in schema.items():
        values = [ent.attributes[attr] for ent in entities]
        if kind == "numeric":
            col = np.asarray(values, dtype=float)
            if not np.all(np.isfinite(col)):
                raise NonFiniteError(f"numeric attribute {attr!r} has non-finite values")
            columns.append(col)
            names.append(attr)
            encoding[attr] = {"kind": "numeric"}
        elif kind == "categorical":
            levels = sorted(set(values))
            if len(levels) < 2:
                raise DegenerateError(
                    f"categorical attribute {attr!r} has a single observed level {levels[0]!r}"
                )
            reference = reference_levels.get(attr)
            if reference is None:
                reference = _most_frequent_level(values)
            elif reference not in levels:
                raise UnknownLevelError(
                    f"reference level {reference!r} for {attr!r} is not observed in the data"
                )
            for level in levels:
                if level == reference:
                    continue
                columns.append(np.asarray([1.0 if v == level else 0.0 for v in values]))
                names.append(f"{attr}={level}")
            encoding[attr] = {"kind": "categorical", "reference": reference, "levels": levels}
        else:
            raise ValidationError(f"unknown attribute kind {kind!r} for {attr!r}")

    X = np.column_stack(columns)
    _check_full_rank(X, names)
    return DesignMatrix(
        matrix=X,
        column_names=names,
        encoding=encoding,
        entity_ids=[ent.id for ent in entities],
    )


def _check_full_rank(X, names):
    r = np.linalg.qr(X, mode="r")
    diag = np.abs(np.diag(r))
    threshold = max(X.shape) * np.finfo(float).eps * (diag.max() if diag.size else 0.0)
    bad = [names[j] for j in np.nonzero(diag <= threshold)[0]]
    if bad:
        raise RankDeficiencyError(
            f"design matrix is rank deficient; collinear column(s): {', '.join(bad)}",
            columns=bad,
        )


# ---------------------------------------------------------------------------
# OLS fit and prediction
# ---------------------------------------------------------------------------

@dataclass
class RegressionResult:
    column_names: list
    coefficients: np.ndarray
    std_errors: np.ndarray
    t_stats: np.ndarray
    p_values: np.ndarray
    sigma2: float
    f_statistic: float
    f_pvalue: float
    r_squared: float
    adj_r_squared: float
    df_resid: int
    n_obs: int


def ols_fit(design: DesignMatrix, y) -> RegressionResult:
    """Least-squares fit via QR decomposition with full inference.

    Coefficients solve min ||y - X b|| through an orthogonal
    decomposition (never the normal equations); standard errors come from
    sigma^2 (X'X)^-1 with sigma^2 = RSS / (N - P' - 1), p-values from the
    t distribution, plus the overall F test of all non-intercept
    coefficients being zero.
    """
    X = design.matrix
    y = np.asarray(y, dtype=float)
    if y.ndim != 1 or y.shape[0] != X.shape[0]:
        raise DimensionError(
            f"response length {y.shape} does not match design rows {X.shape[0]}"
        )
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise NonFiniteError("design matrix and response must be finite")
    n, p = X.shape
    if n <= p:
        raise DegenerateError(f"need more observations ({n}) than columns ({p})")
    _check_full_rank(X, design.column_names)

    q, r = np.linalg.qr(X)
    beta = np.linalg.solve(r, q.T @ y)
    residuals = y - X @ beta
    rss = float(residuals @ residuals)
    df_resid = n - p
    sigma2 = rss / df_resid

    r_inv = np.linalg.inv(r)
    xtx_inv_diag = np.einsum("ij,ij->i", r_inv, r_inv)
    with np.errstate(divide="ignore", invalid="ignore"):
        se = np.sqrt(sigma2 * xtx_inv_diag)
        t_stats = np.where(se > 0, beta / np.where(se > 0, se, 1.0), np.inf * np.sign(beta))
    p_values = np.array([2.0 * student_t_sf(abs(t), df_resid) for t in t_stats])

    tss = float(np.sum((y - y.mean()) ** 2))
    if tss > 0:
        r2 = min(1.0, max(0.0, 1.0 - rss / tss))
    else:
        r2 = 0.0
    n_slopes = p - 1
    if n_slopes == 0:
        f_stat, f_p = float("nan"), float("nan")
    elif r2 >= 1.0:
        f_stat, f_p = float("inf"), 0.0
    else:
        f_stat = (r2 / n_slopes) / ((1.0 - r2) / df_resid)
        f_p = f_sf(f_stat, n_slopes, df_resid)
    adj_r2 = 1.0 - (1.0 - r2) * (n - 1) / df_resid

    return RegressionResult(
        column_names=list(design.column_names),
        coefficients=beta,
        std_errors=se,
        t_stats=t_stats,
        p_values=p_values,
        sigma2=sigma2,
        f_statistic=f_stat,
        f_pvalue=f_p,
        r_squared=r2,
        adj_r_squared=adj_r2,
        df_resid=df_resid,
        n_obs=n,
    )


def predict(result: RegressionResult, features) -> float:
    """Dot product of the fitted coefficients with an intercept-augmented
    feature row (features exclude the intercept)."""
    features = np.asarray(features, dtype=float)
    if features.shape != (len(result.coefficients) - 1,):
        raise DimensionError(
            f"feature row has {features.size} entries, expected {len(result.coefficients) - 1}"
        )
    return float(result.coefficients[0] + features @ result.coefficients[1:])


def encode_features(column_names, values: dict):
    """Build a feature row (intercept excluded) from a name -> value map.

    Unset columns default to 0, which encodes the reference level of every
    categorical attribute.
    """
    names = [c for c in column_names if c != INTERCEPT]
    row = np.zeros(len(names))
    for key, value in values.items():
        if key not in names:
            raise UnknownLevelError(f"no design column named {key!r}")
        row[names.index(key)] = float(value)
    return row


# ---------------------------------------------------------------------------
# Report table
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReportCell:
    estimate: float
    p_value: float
    significant: bool


@dataclass(frozen=True)
class ReportRow:
    term: str
    kind: str  # "coefficient" | "reference" | "footer"
    cells: tuple  # per cluster: ReportCell, a plain value, or None


@dataclass
class BiasReport:
    cluster_labels: list
    alpha: float
    rows: list = field(default_factory=list)


def format_pvalue(p: float) -> str:
    if math.isnan(p):
        return ""
    if p < 0.0005:
        return "0.000"
    return f"{p:.3f}"


def summarize(results: dict, encoding: dict | None = None, alpha: float = 0.05) -> BiasReport:
    """Arrange per-cluster regression results into one report table.

    Rows follow the design-column order, with a reference-category marker
    row ahead of each categorical attribute's dummy block. Coefficients
    with p strictly below alpha are flagged. Footer rows carry the F
    statistic with its p-value, adjusted R^2, residual df and N.
    """
    if not results:
        raise ValidationError("no regression results to summarize")
    labels = list(results.keys())
    fits = [results[label] for label in labels]
    names = fits[0].column_names
    for fit in fits[1:]:
        if fit.column_names != names:
            raise ValidationError("per-cluster results do not share a design matrix")

    reference_before = {}
    if encoding:
        for attr, enc in encoding.items():
            if enc.get("kind") != "categorical":
                continue
            first_dummy = next(
                (n for n in names if n.startswith(f"{attr}=")), None
            )
            if first_dummy is not None:
                reference_before[first_dummy] = f"{attr}={enc['reference']}"

    report = BiasReport(cluster_labels=labels, alpha=alpha)
    for idx, name in enumerate(names):
        marker = reference_before.get(name)
        if marker is not None:
            report.rows.append(
                ReportRow(term=marker, kind="reference",
                          cells=tuple("reference" for _ in labels))
            )
        cells = tuple(
            ReportCell(
                estimate=float(fit.coefficients[idx]),
                p_value=float(fit.p_values[idx]),
                significant=bool(fit.p_values[idx] < alpha),
            )
            for fit in fits
        )
        report.rows.append(ReportRow(term=name, kind="coefficient", cells=cells))

    report.rows.append(
        ReportRow(
            term="F-statistic",
            kind="footer",
            cells=tuple(
                ReportCell(fit.f_statistic, fit.f_pvalue, bool(fit.f_pvalue < alpha))
                for fit in fits
            ),
        )
    )
    report.rows.append(
        ReportRow(term="adjusted_r_squared", kind="footer",
                  cells=tuple(fit.adj_r_squared for fit in fits))
    )
    report.rows.append(
        ReportRow(term="residual_df", kind="footer",
                  cells=tuple(fit.df_resid for fit in fits))
    )
    report.rows.append(
        ReportRow(term="n_obs", kind="footer", cells=tuple(fit.n_obs for fit in fits))
    )
    return report


def write_report_csv(path, report: BiasReport, header_lines=()):
    """Report CSV: one estimate/p-value column pair per cluster plus a
    significance marker column (bold is not expressible in CSV)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        writer = csv.writer(fh)
        header = ["term"]
        for label in report.cluster_labels:
            header += [f"{label}_estimate", f"{label}_p_value", f"{label}_significant"]
        writer.writerow(header)
        for row in report.rows:
            out = [row.term]
            for cell in row.cells:
                if isinstance(cell, ReportCell):
                    out += [
                        f"{cell.estimate:.3f}",
                        format_pvalue(cell.p_value),
                        "*" if cell.significant else "",
                    ]
                elif isinstance(cell, float):
                    out += [f"{cell:.3f}", "", ""]
                else:
                    out += [str(cell), "", ""]
            writer.writerow(out)
