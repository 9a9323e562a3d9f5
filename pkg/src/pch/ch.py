"""Covariance-heterogeneity estimation of the reverse effect.

After the forward effect ``b`` is fitted, the projected residual
``Lambda = P_Z^perp (D' - b D)`` is multiplied into both traits; the moment
vectors ``theta`` are the OLS coefficients of those products on ``Z``. A
Wald test on ``theta_{D'}`` screens out designs without heterogeneity, and
the reverse effect is the TSLS-type ratio of the two moment vectors.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .core_stats import chi2_quantile, projection_operator, residual_projection
from .tsht import DirectionalEstimate


@dataclass(frozen=True)
class ThetaPair:
    """Moment vectors for the CH step.

    ``omega`` is the inverse of the HC0 covariance of ``theta_Dp`` so that
    ``theta_Dp @ omega @ theta_Dp`` is approximately chi-square(p) when the
    population moment is zero. ``pseudo_inverse`` flags a singular covariance.
    The remaining fields are the per-observation inputs needed for the
    variance of the ratio estimator.
    """

    theta_D: np.ndarray
    theta_Dp: np.ndarray
    omega: np.ndarray
    pseudo_inverse: bool = False
    Z: np.ndarray | None = field(default=None, repr=False, compare=False)
    D: np.ndarray | None = field(default=None, repr=False, compare=False)
    Dp: np.ndarray | None = field(default=None, repr=False, compare=False)
    lam: np.ndarray | None = field(default=None, repr=False, compare=False)
    proj: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def statistic(self) -> float:
        return float(self.theta_Dp @ self.omega @ self.theta_Dp)


def lambda_hat(D, Dp, beta_fwd: float, Z, proj: np.ndarray | None = None) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    Dp = np.asarray(Dp, dtype=float)
    return residual_projection(Z, Dp - beta_fwd * D, proj=proj)


def theta_hats(Z, D, Dp, lam, proj: np.ndarray | None = None) -> ThetaPair:
    Z = np.asarray(Z, dtype=float)
    D = np.asarray(D, dtype=float)
    Dp = np.asarray(Dp, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if proj is None:
        proj = projection_operator(Z)
    a = D * lam
    b = Dp * lam
    theta_D = proj @ a
    theta_Dp = proj @ b
    resid = b - Z @ theta_Dp
    cov = (proj * resid**2) @ proj.T
    pseudo = False
    try:
        if np.linalg.cond(cov) > 1e12:
            raise np.linalg.LinAlgError
        omega = np.linalg.inv(cov)
    except np.linalg.LinAlgError:
        pseudo = True
        if np.any(cov):
            warnings.warn("CH covariance is singular; using a pseudo-inverse", RuntimeWarning)
        omega = np.linalg.pinv(cov, hermitian=True)
    omega = (omega + omega.T) / 2
    return ThetaPair(theta_D, theta_Dp, omega, pseudo, Z, D, Dp, lam, proj)


def ch_test(tp: ThetaPair, n: int) -> bool:
    """True when the Wald statistic reaches the chi-square ``1 - 1/n`` quantile."""
    df = tp.theta_Dp.shape[0]
    return tp.statistic >= chi2_quantile(df, 1.0 - 1.0 / n)


def _fuller_alpha(XPX: np.ndarray, XX: np.ndarray, n: int, fuller: float = 1.0) -> float:
    """Fuller-modified smallest eigenvalue of ``XX^{-1} XPX``.

    Exactly collinear columns make every choice give the same estimate, so
    zero is returned for them.
    """
    if np.linalg.cond(XX) > 1e12:
        return 0.0
    ev = np.linalg.eigvals(np.linalg.solve(XX, XPX))
    a = float(np.min(ev.real))
    k = (1.0 - a) * fuller / n
    return (a - k) / (1.0 - k)


def ch_estimate(
    tp: ThetaPair,
    sigma: np.ndarray,
    forward: DirectionalEstimate | None = None,
    variance: Literal["propagated", "plugin"] = "propagated",
    method: Literal["hful", "ratio"] = "hful",
) -> DirectionalEstimate:
    """Reverse effect from the moment vectors.

    ``method="ratio"`` is the plain quotient
    ``(theta_Dp' S theta_D) / (theta_Dp' S theta_Dp)``. With many moment
    conditions of which few carry signal, its own-observation terms bias it
    towards ``E(D Lambda D' Lambda) / E((D' Lambda)^2)``. ``method="hful"``
    (the default) drops those diagonal terms and applies the Fuller-modified
    LIML adjustment, i.e. the heteroscedasticity-robust HFUL estimator with
    ``D * Lambda`` as outcome, ``D' * Lambda`` as regressor and ``Z`` as
    instruments. Both are NA when ``Lambda`` is identically zero or the
    denominator is not positive.

    With ``variance="propagated"`` the influence function accounts for the
    estimated projection inside ``Lambda`` and, when ``forward`` carries an
    influence vector, for the estimated forward effect. ``"plugin"`` treats
    both as known. For ``"hful"`` the degenerate many-instrument term is
    added on top of the influence variance.
    """
    if variance not in ("propagated", "plugin"):
        raise ValueError(f"unknown variance option {variance!r}")
    if method not in ("hful", "ratio"):
        raise ValueError(f"unknown method {method!r}")
    denom = float(tp.theta_Dp @ sigma @ tp.theta_Dp)
    if (tp.lam is not None and not np.any(tp.lam)) or not denom > 0:
        return DirectionalEstimate.na()
    if tp.Z is None:
        if method == "hful":
            raise ValueError("the hful estimator needs the per-observation data in tp")
        return DirectionalEstimate(float(tp.theta_Dp @ sigma @ tp.theta_D) / denom, float("nan"))
    if method == "ratio":
        beta = float(tp.theta_Dp @ sigma @ tp.theta_D) / denom

    Z, D, Dp, lam = tp.Z, tp.D, tp.Dp, tp.lam
    n = Z.shape[0]
    Zinv = np.linalg.inv(Z.T @ Z)
    lev = np.einsum("ij,jk,ik->i", Z, Zinv, Z)
    hful_scale = None
    if method == "hful":
        pair = np.column_stack([D * lam, Dp * lam])
        pair -= pair.mean(axis=0)
        ZtX = Z.T @ pair
        XPX = ZtX.T @ Zinv @ ZtX - (pair * lev[:, None]).T @ pair
        XX = pair.T @ pair
        alpha = _fuller_alpha(XPX, XX, n)
        hful_scale = XPX[1, 1] - alpha * XX[1, 1]
        if not hful_scale > 0:
            return DirectionalEstimate.na()
        beta = float((XPX[1, 0] - alpha * XX[1, 0]) / hful_scale)

    c = D - beta * Dp
    score = Z * (c * lam)[:, None]
    if variance == "propagated":
        # Lambda-hat = Lambda - Z (kappa-hat - kappa) - (b-hat - b) P^perp D
        M = (Z * c[:, None]).T @ Z / n
        kappa_if = Z @ np.linalg.solve(sigma, M.T)  # rows: M Sigma^{-1} Z_i
        score = score - kappa_if * lam[:, None]
        if forward is not None and forward.influence is not None:
            e_D = residual_projection(Z, D, proj=tp.proj)
            J = Z.T @ (c * e_D) / n
            score = score - forward.influence[:, None] * J[None, :]
    influence = score @ tp.theta_Dp / denom
    var = float(np.mean(influence**2))
    if hful_scale is not None:
        # sum over i != j of P_ij^2 w_i w_j, P the hat matrix of Z
        w = (Dp * lam - np.mean(Dp * lam)) * (c * lam - np.mean(c * lam))
        G = (Z * w[:, None]).T @ Z
        AG = Zinv @ G
        degenerate = float(np.trace(AG @ AG) - np.sum((lev * w) ** 2))
        var += n * max(degenerate, 0.0) / hful_scale**2
    return DirectionalEstimate(beta, var, (), influence)
