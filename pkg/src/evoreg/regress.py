"""Ordinary least squares over phenotype subsets, coefficient significance,
validity rules, and search-space sizing.

Fits go through normal equations with partial pivoting; the subset counts are
small (a handful of coefficients), so nothing heavier is warranted. A
Gram-matrix fitter amortizes the per-generation sweep over all subsets of a
fixed phenotype panel.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .descriptors import Dataset, Phenotype
from .stats import t_critical

__all__ = [
    "RegressionModel",
    "SingularFitError",
    "ols_fit",
    "assess_validity",
    "search_space_size",
    "GramFitter",
    "fit_assessed",
    "exhaustive_best",
]

logger = logging.getLogger(__name__)

_CONDITION_WARN = 1e12


class SingularFitError(ArithmeticError):
    """Design matrix is rank deficient; no unique least-squares solution."""


@dataclass
class RegressionModel:
    """A fitted linear model over an ordered subset of phenotypes.

    ``coefficients`` lists the intercept first when ``with_intercept``; the
    ``t_stats`` align with the coefficients. ``se_s`` is the error sum
    sum(|y_hat - y|^s) at the exponent the model was fitted with. ``valid``
    is set by assess_validity.
    """

    member_ids: tuple[str, ...]
    with_intercept: bool
    coefficients: tuple[float, ...]
    t_stats: tuple[float, ...]
    r2: float
    se_s: float
    s: float
    df: int
    valid: bool = False
    residuals: np.ndarray | None = None

    @property
    def n_members(self) -> int:
        return len(self.member_ids)

    @property
    def slope_t_stats(self) -> tuple[float, ...]:
        return self.t_stats[1:] if self.with_intercept else self.t_stats

    def error_sum(self, s: float) -> float:
        if s == self.s:
            return self.se_s
        if self.residuals is None:
            raise ValueError(
                f"model fitted with exponent {self.s}; residuals unavailable "
                f"for exponent {s}"
            )
        return float(np.sum(np.abs(self.residuals) ** s))


def _solve_small(a, c, k, scale):
    """Closed-form solve+inverse for k <= 3 normal matrices (hot path)."""
    tol = 1e-12 * scale
    if k == 1:
        a00 = a[0][0]
        if abs(a00) <= tol:
            raise SingularFitError("rank-deficient design matrix")
        inv = 1.0 / a00
        return [c[0] * inv], [[inv]]
    if k == 2:
        a00, a01 = a[0]
        a10, a11 = a[1]
        det = a00 * a11 - a01 * a10
        if abs(det) <= tol * scale:
            raise SingularFitError("rank-deficient design matrix")
        i00 = a11 / det
        i01 = -a01 / det
        i10 = -a10 / det
        i11 = a00 / det
        c0, c1 = c
        return (
            [i00 * c0 + i01 * c1, i10 * c0 + i11 * c1],
            [[i00, i01], [i10, i11]],
        )
    a00, a01, a02 = a[0]
    a10, a11, a12 = a[1]
    a20, a21, a22 = a[2]
    m00 = a11 * a22 - a12 * a21
    m01 = a12 * a20 - a10 * a22
    m02 = a10 * a21 - a11 * a20
    det = a00 * m00 + a01 * m01 + a02 * m02
    if abs(det) <= tol * scale * scale:
        raise SingularFitError("rank-deficient design matrix")
    m10 = a02 * a21 - a01 * a22
    m11 = a00 * a22 - a02 * a20
    m12 = a01 * a20 - a00 * a21
    m20 = a01 * a12 - a02 * a11
    m21 = a02 * a10 - a00 * a12
    m22 = a00 * a11 - a01 * a10
    inv = [
        [m00 / det, m10 / det, m20 / det],
        [m01 / det, m11 / det, m21 / det],
        [m02 / det, m12 / det, m22 / det],
    ]
    c0, c1, c2 = c
    sol = [
        inv[0][0] * c0 + inv[0][1] * c1 + inv[0][2] * c2,
        inv[1][0] * c0 + inv[1][1] * c1 + inv[1][2] * c2,
        inv[2][0] * c0 + inv[2][1] * c1 + inv[2][2] * c2,
    ]
    return sol, inv


def _solve_with_inverse(a: list[list[float]], c: list[float],
                        check_condition: bool = False):
    """Solve the normal equations and invert the normal matrix.

    k <= 3 goes through closed-form cofactor inverses; larger systems use
    Gauss-Jordan with partial pivoting. Raises SingularFitError when the
    system collapses relative to the matrix scale. Normal matrices put their
    largest entry on the diagonal, so the diagonal maximum serves as the
    scale reference.
    """
    k = len(a)
    scale = 0.0
    for i in range(k):
        d = abs(a[i][i])
        if d > scale:
            scale = d
    if scale == 0.0:
        raise SingularFitError("all-zero normal matrix")
    if k <= 3 and not check_condition:
        return _solve_small(a, c, k, scale)
    aug = [row[:] + [0.0] * k + [c[i]] for i, row in enumerate(a)]
    for i in range(k):
        aug[i][k + i] = 1.0
    tol = 1e-12 * scale
    for col in range(k):
        piv = col
        best = abs(aug[col][col])
        for r in range(col + 1, k):
            cand = abs(aug[r][col])
            if cand > best:
                best = cand
                piv = r
        if best <= tol:
            raise SingularFitError("rank-deficient design matrix")
        if piv != col:
            aug[col], aug[piv] = aug[piv], aug[col]
        row = aug[col]
        pivval = row[col]
        for j in range(col, 2 * k + 1):
            row[j] /= pivval
        for r in range(k):
            if r == col:
                continue
            factor = aug[r][col]
            if factor != 0.0:
                other = aug[r]
                for j in range(col, 2 * k + 1):
                    other[j] -= factor * row[j]
    solution = [aug[i][2 * k] for i in range(k)]
    inverse = [aug[i][k : 2 * k] for i in range(k)]
    if check_condition:
        inv_scale = max(max(abs(v) for v in row) for row in inverse)
        if scale * inv_scale > _CONDITION_WARN:
            logger.warning("ill-conditioned normal equations (cond ~ %.2g)",
                           scale * inv_scale)
    return solution, inverse


def _model_from_cross_products(
    a, c, syy, sy, colsum, m, member_ids, with_intercept, s, residual_fn,
    check_condition=False,
) -> RegressionModel:
    k = len(c)
    if m <= k:
        raise ValueError(f"need more observations than coefficients ({m} <= {k})")
    b, inv = _solve_with_inverse(a, c, check_condition)
    bc = sum(bi * ci for bi, ci in zip(b, c))
    sse = max(0.0, syy - bc)
    df = m - k
    sigma2 = sse / df
    t_stats = []
    for i in range(k):
        se = math.sqrt(max(0.0, sigma2 * inv[i][i]))
        if se > 0.0:
            t_stats.append(b[i] / se)
        else:  # exact fit: any nonzero coefficient is maximally significant
            t_stats.append(math.copysign(math.inf, b[i]) if b[i] else 0.0)
    # r2 as squared correlation of y with y_hat, from the same cross products
    yhat_sum = c[0] if with_intercept else sum(bi * si for bi, si in zip(b, colsum))
    var_yhat = bc - yhat_sum * yhat_sum / m
    var_y = syy - sy * sy / m
    cov = bc - yhat_sum * sy / m
    if var_yhat <= 0.0 or var_y <= 0.0:
        r2 = 0.0
    else:
        r2 = min(1.0, max(0.0, cov * cov / (var_yhat * var_y)))
    if s == 2.0:
        se_s = sse
        residuals = None
    else:
        residuals = residual_fn(b)
        se_s = float(np.sum(np.abs(residuals) ** s))
    return RegressionModel(
        member_ids=tuple(member_ids),
        with_intercept=with_intercept,
        coefficients=tuple(b),
        t_stats=tuple(t_stats),
        r2=r2,
        se_s=se_s,
        s=s,
        df=df,
        residuals=residuals,
    )


def ols_fit(
    members: Sequence[Phenotype],
    ds: Dataset,
    with_intercept: bool,
    s: float = 2.0,
) -> RegressionModel:
    """Least-squares fit of the activity on a phenotype subset.

    Models carry their residual vector; ``se_s`` is reported for the given
    exponent.
    """
    if not members:
        raise ValueError("need at least one phenotype")
    x = np.column_stack([p.values for p in members])
    if x.shape[0] != ds.size:
        raise ValueError("phenotype length does not match dataset")
    if not np.all(np.isfinite(x)):
        raise ValueError("phenotype values must be finite")
    y = ds.activity
    design = np.column_stack([np.ones(ds.size), x]) if with_intercept else x
    a = (design.T @ design).tolist()
    c = (design.T @ y).tolist()
    member_ids = [p.source_genotype.render() for p in members]
    model = _model_from_cross_products(
        a,
        c,
        float(y @ y),
        float(y.sum()),
        (design.sum(axis=0)).tolist(),
        ds.size,
        member_ids,
        with_intercept,
        s,
        residual_fn=lambda b: y - design @ np.asarray(b),
        check_condition=True,
    )
    model.residuals = y - design @ np.asarray(model.coefficients)
    if s == 2.0:
        model.se_s = float(model.residuals @ model.residuals)
    return model


class GramFitter:
    """Fits any small subset of a fixed phenotype panel against one response.

    Cross products are computed once for the panel; each subset fit then only
    assembles and solves a k x k system, which keeps full-sweep generations
    cheap. Results agree with ols_fit to floating-point noise.
    """

    def __init__(self, panel: np.ndarray, y: np.ndarray, ids: Sequence[str],
                 s: float = 2.0):
        panel = np.asarray(panel, dtype=float)
        y = np.asarray(y, dtype=float)
        if panel.ndim != 2 or panel.shape[1] != y.shape[0]:
            raise ValueError("panel must be (n_phenotypes, n_molecules)")
        if len(ids) != panel.shape[0]:
            raise ValueError("one id per panel row required")
        self.panel = panel
        self.y = y
        self.ids = list(ids)
        self.s = s
        self.m = y.shape[0]
        self._gram = (panel @ panel.T).tolist()
        self._gy = (panel @ y).tolist()
        self._colsum = panel.sum(axis=1).tolist()
        self._sy = float(y.sum())
        self._syy = float(y @ y)

    def fit(self, subset: Sequence[int], with_intercept: bool) -> RegressionModel:
        idx = list(subset)
        gram, gy, colsum = self._gram, self._gy, self._colsum
        if with_intercept:
            a = [[float(self.m)] + [colsum[j] for j in idx]]
            for i in idx:
                a.append([colsum[i]] + [gram[i][j] for j in idx])
            c = [self._sy] + [gy[i] for i in idx]
            cs = [float(self.m)] + [colsum[i] for i in idx]
        else:
            a = [[gram[i][j] for j in idx] for i in idx]
            c = [gy[i] for i in idx]
            cs = [colsum[i] for i in idx]
        return _model_from_cross_products(
            a,
            c,
            self._syy,
            self._sy,
            cs,
            self.m,
            [self.ids[i] for i in idx],
            with_intercept,
            self.s,
            residual_fn=lambda b: self._residuals(idx, with_intercept, b),
        )

    def _residuals(self, idx, with_intercept, b):
        yhat = np.zeros(self.m)
        coeffs = list(b)
        if with_intercept:
            yhat += coeffs.pop(0)
        for i, bi in zip(idx, coeffs):
            yhat += bi * self.panel[i]
        return self.y - yhat


def assess_validity(
    model: RegressionModel,
    ds: Dataset,
    alpha: float,
    refit: Callable[[bool], RegressionModel],
    *,
    significance_offset: int = 6,
) -> RegressionModel:
    """Apply the validity rules and return the final (possibly refitted) model.

    Rules, in order: the coefficient count may not exceed m minus the
    significance offset; an insignificant intercept demotes the fit to the
    no-intercept form; a slope insignificant in both forms invalidates the
    model. Invalidity is a state on the returned model, not an error.
    """
    m = ds.size
    if len(model.coefficients) > m - significance_offset:
        model.valid = False
        return model

    other: RegressionModel | None = None

    def other_form() -> RegressionModel:
        nonlocal other
        if other is None:
            other = refit(not final.with_intercept)
        return other

    final = model
    if model.with_intercept:
        crit = t_critical(alpha, model.df)
        if abs(model.t_stats[0]) < crit:
            final = refit(False)
            other = model
            if len(final.coefficients) > m - significance_offset:
                final.valid = False
                return final

    crit = t_critical(alpha, final.df)
    for i, t in enumerate(final.slope_t_stats):
        if abs(t) < crit:
            try:
                alt = other_form()
            except SingularFitError:
                final.valid = False
                return final
            if abs(alt.slope_t_stats[i]) < t_critical(alpha, alt.df):
                final.valid = False
                return final
    final.valid = True
    return final


def fit_assessed(
    fit: Callable[[Sequence[int], bool], RegressionModel],
    subset: Sequence[int],
    ds: Dataset,
    alpha: float,
    intercept_mode: str = "fallback",
) -> list[RegressionModel]:
    """Fit one subset under the configured intercept handling and return the
    assessed candidate models (empty when the design is singular).

    "fallback" fits the intercept form and demotes it when the intercept is
    insignificant; "both" additionally offers the pure no-intercept form as a
    second candidate, doubling the searched space.
    """
    if intercept_mode not in ("fallback", "both"):
        raise ValueError(f"unknown intercept mode {intercept_mode!r}")
    candidates: list[RegressionModel] = []
    refit = lambda wi: fit(subset, wi)  # noqa: E731
    try:
        primary = assess_validity(fit(subset, True), ds, alpha, refit)
        candidates.append(primary)
    except SingularFitError:
        primary = None
    if intercept_mode == "both" and (primary is None or primary.with_intercept):
        try:
            candidates.append(
                assess_validity(fit(subset, False), ds, alpha, refit)
            )
        except SingularFitError:
            pass
    return candidates


def exhaustive_best(
    fitter: GramFitter,
    n: int,
    ds: Dataset,
    alpha: float,
    objective_fn: Callable[[RegressionModel], float],
    direction: str,
    intercept_mode: str = "fallback",
):
    """Enumerate every n-subset of the panel and return the best valid model
    as (subset, model, objective); (None, None, None) when nothing is valid."""
    from itertools import combinations

    best = None
    for subset in combinations(range(fitter.panel.shape[0]), n):
        for model in fit_assessed(fitter.fit, subset, ds, alpha, intercept_mode):
            if not model.valid:
                continue
            value = objective_fn(model)
            if best is None or _better(value, best[2], direction):
                best = (subset, model, value)
    return best if best is not None else (None, None, None)


def _better(a: float, b: float, direction: str) -> bool:
    return a > b if direction == "max" else a < b


def search_space_size(n_genotypes: int, n: int, both_forms: bool = False) -> int:
    """Number of candidate n-subsets (doubled when both regression forms are
    searched); exact integer arithmetic."""
    if n < 0:
        raise ValueError("subset size must be nonnegative")
    if n > n_genotypes:
        raise ValueError(f"subset size {n} exceeds genotype count {n_genotypes}")
    size = math.comb(n_genotypes, n)
    return 2 * size if both_forms else size
