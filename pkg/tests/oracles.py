"""Slow, independent reference implementations used as test oracles."""

import math

import numpy as np
from scipy.optimize import minimize_scalar


def _sandwich_terms(rf_D, rf_Dp, m):
    """HC0 variance of gamma_D[m], of gamma_Dp[m] and their covariance, by looping."""
    vd = vdp = c = 0.0
    for i in range(rf_D.n):
        w = rf_D.proj[m, i] ** 2
        eD, eDp = rf_D.residuals[i], rf_Dp.residuals[i]
        vd += w * eD * eD
        vdp += w * eDp * eDp
        c += w * eD * eDp
    return vd, vdp, c


def pair_statistic(rf_D, rf_Dp, k, j, terms=None):
    """Two-instrument overidentification statistic, minimised with Brent's method.

    Returns the two ratios, the minimised statistic and the delta-method
    scale at the minimiser.
    """
    terms = terms if terms is not None else {}
    for m in (k, j):
        if m not in terms:
            terms[m] = _sandwich_terms(rf_D, rf_Dp, m)

    def piece(m, r):
        vd, vdp, c = terms[m]
        a = vdp - 2 * r * c + r * r * vd
        return (rf_Dp.gamma[m] - r * rf_D.gamma[m]) ** 2 / a, a / rf_D.gamma[m] ** 2

    rk = rf_Dp.gamma[k] / rf_D.gamma[k]
    rj = rf_Dp.gamma[j] / rf_D.gamma[j]
    lo, hi = min(rk, rj), max(rk, rj)
    if hi == lo:
        r_star = lo
    else:
        res = minimize_scalar(lambda r: piece(k, r)[0] + piece(j, r)[0],
                              bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-13 * max(1.0, abs(hi))})
        r_star = res.x
    J = piece(k, r_star)[0] + piece(j, r_star)[0]
    return rk, rj, J, math.sqrt(piece(k, r_star)[1] + piece(j, r_star)[1])


def pair_scale(rf_D, rf_Dp, k, j, terms=None):
    """Effective scale: ``|r_k - r_j| / sqrt(J)``, or the delta scale when the ratios tie."""
    rk, rj, J, fallback = pair_statistic(rf_D, rf_Dp, k, j, terms)
    if rk == rj or J <= 0:
        return rk, rj, fallback
    return rk, rj, abs(rk - rj) / math.sqrt(J)


def brute_force_vote(rf_D, rf_Dp, relevant, n, constant=2.01):
    """All-pairs agreement counts, the plurality cluster and the uniqueness flag."""
    relevant = list(relevant)
    if not relevant:
        return {}, (), False
    thr = math.sqrt(constant * math.log(n))
    votes = {}
    terms = {}
    for j in relevant:
        count = 0
        for k in relevant:
            _, _, J, _ = pair_statistic(rf_D, rf_Dp, k, j, terms)
            if J <= thr * thr:
                count += 1
        votes[j] = count
    top = max(votes.values())
    plurality = tuple(j for j in relevant if votes[j] == top)
    return votes, plurality, len(plurality) == top


def textbook_tsls(D, Dp, Z, valid):
    """TSLS with the explicit n x n hat matrix; returns (beta, root-n variance)."""
    n, p = Z.shape
    others = [j for j in range(p) if j not in valid]
    W = np.column_stack([D, Z[:, others]])
    H = Z @ np.linalg.inv(Z.T @ Z) @ Z.T
    Wh = H @ W
    A = np.linalg.inv(Wh.T @ W)
    coef = A @ Wh.T @ Dp
    u = Dp - W @ coef
    meat = sum(u[i] ** 2 * np.outer(Wh[i], Wh[i]) for i in range(n))
    cov = A @ meat @ A.T
    return coef[0], n * cov[0, 0]


def textbook_hful(y, x, Z, fuller=1.0):
    """HFUL for one regressor using the explicit n x n hat matrix."""
    n = len(y)
    y = y - y.mean()
    x = x - x.mean()
    H = Z @ np.linalg.inv(Z.T @ Z) @ Z.T
    Hoff = H - np.diag(np.diag(H))
    Xb = np.column_stack([y, x])
    M = Xb.T @ Hoff @ Xb
    G = Xb.T @ Xb
    a_tilde = min(np.linalg.eigvals(np.linalg.inv(G) @ M).real)
    k = (1 - a_tilde) * fuller / n
    a_hat = (a_tilde - k) / (1 - k)
    return (x @ Hoff @ y - a_hat * (x @ y)) / (x @ Hoff @ x - a_hat * (x @ x))
