"""Comparison estimators applied separately to each direction.

IVW and MR-Egger work on the per-instrument ratio summaries of the
individual-level reduced forms; plain TSHT reuses the voting step without
the mode-uniqueness guard. Direction calls use intervals at level 1 - 1/n.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core_stats import Dataset, ReducedForm, ols_reduced_form, projection_operator
from .inference import ConfidenceInterval, ci, direction_call
from .tsht import modified_tsls, select_relevant, vote


class Method(str, Enum):
    IVW = "IVW"
    EGGER = "EGGER"
    TSHT = "TSHT"


@dataclass(frozen=True)
class BaselineResult:
    method: Method
    beta_xy: float | None
    beta_yx: float | None
    ci_xy: ConfidenceInterval
    ci_yx: ConfidenceInterval
    h_call: int
    var_xy: float | None = None
    var_yx: float | None = None


def ivw(rf_exposure: ReducedForm, rf_outcome: ReducedForm, relevant) -> tuple[float | None, float | None]:
    """Fixed-effect IVW with first-order weights ``gamma_exp^2 / se_out^2``.

    Returns ``(beta, sigma^2)`` with ``sigma^2`` on the root-n scale.
    """
    idx = np.asarray(sorted(relevant), dtype=int)
    if idx.size == 0:
        return None, None
    g = rf_exposure.gamma[idx]
    w = g**2 / rf_outcome.se[idx] ** 2
    ratio = rf_outcome.gamma[idx] / g
    return ivw_from_ratios(ratio, w, rf_exposure.n)


def ivw_from_ratios(ratio, weights, n: int) -> tuple[float, float]:
    ratio = np.asarray(ratio, dtype=float)
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    return float(weights @ ratio / total), float(n / total)


def egger_fit(g_exp, g_out, se_out, intercept: bool = True):
    """Weighted least squares of ``g_out`` on ``g_exp`` with weights ``1/se_out^2``.

    Instruments are oriented so the exposure association is positive. The
    slope variance is inflated by the residual dispersion when it exceeds
    one (multiplicative random effects). Returns ``(slope, intercept,
    slope_variance)`` on the finite-sample scale.
    """
    g_exp = np.asarray(g_exp, dtype=float)
    g_out = np.asarray(g_out, dtype=float)
    sign = np.where(g_exp < 0, -1.0, 1.0)
    x = g_exp * sign
    y = g_out * sign
    w = 1.0 / np.asarray(se_out, dtype=float) ** 2
    X = np.column_stack([np.ones_like(x), x]) if intercept else x[:, None]
    sw = np.sqrt(w)
    Xw = X * sw[:, None]
    yw = y * sw
    coef, *_ = np.linalg.lstsq(Xw, yw, rcond=None)
    resid = yw - Xw @ coef
    dof = len(y) - X.shape[1]
    phi = float(resid @ resid / dof) if dof > 0 else 1.0
    cov = np.linalg.inv(Xw.T @ Xw) * max(1.0, phi)
    slope = float(coef[-1])
    icpt = float(coef[0]) if intercept else 0.0
    return slope, icpt, float(cov[-1, -1])


def egger(rf_exposure: ReducedForm, rf_outcome: ReducedForm, relevant) -> tuple[float | None, float | None]:
    idx = np.asarray(sorted(relevant), dtype=int)
    if idx.size < 3:
        return None, None
    slope, _, var = egger_fit(rf_exposure.gamma[idx], rf_outcome.gamma[idx], rf_outcome.se[idx])
    return slope, var * rf_exposure.n


def plain_tsht(D, Dp, Z, rf_D: ReducedForm, rf_Dp: ReducedForm) -> tuple[float | None, float | None]:
    n = Z.shape[0]
    sel = vote(rf_D, rf_Dp, select_relevant(rf_D, n), n)
    if not sel.plurality_set:
        return None, None
    est = modified_tsls(D, Dp, Z, sel.plurality_set, Zhat=D - rf_D.residuals)
    return est.beta, est.variance


def run_baseline(data: Dataset, method: Method | str, alpha: float = 0.05,
                 proj: np.ndarray | None = None) -> BaselineResult:
    method = Method(method)
    n = data.n
    if proj is None:
        proj = projection_operator(data.Z)
    rf_x = ols_reduced_form(data.Z, data.X, proj=proj)
    rf_y = ols_reduced_form(data.Z, data.Y, proj=proj)
    if method is Method.TSHT:
        b_xy, v_xy = plain_tsht(data.X, data.Y, data.Z, rf_x, rf_y)
        b_yx, v_yx = plain_tsht(data.Y, data.X, data.Z, rf_y, rf_x)
    else:
        fn = ivw if method is Method.IVW else egger
        b_xy, v_xy = fn(rf_x, rf_y, select_relevant(rf_x, n))
        b_yx, v_yx = fn(rf_y, rf_x, select_relevant(rf_y, n))
    h = direction_call(ci(b_xy, v_xy, n, 1.0 / n), ci(b_yx, v_yx, n, 1.0 / n), both_means_two=True)
    return BaselineResult(method, b_xy, b_yx, ci(b_xy, v_xy, n, alpha), ci(b_yx, v_yx, n, alpha),
                          h, v_xy, v_yx)
