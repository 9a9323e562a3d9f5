"""Modified two-stage hard thresholding.

Relevance screening of the reduced-form coefficients, ratio voting among
the relevant instruments, the mode-uniqueness check, and the TSLS fit that
uses the plurality cluster as excluded instruments and every other
candidate as a measured covariate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core_stats import ReducedForm, SingularDesignError


@dataclass(frozen=True)
class SelectionResult:
    relevant: tuple[int, ...]
    votes: dict[int, int]
    plurality_set: tuple[int, ...]
    mode_unique: bool

    @property
    def max_vote(self) -> int:
        return max(self.votes.values(), default=0)


@dataclass(frozen=True)
class DirectionalEstimate:
    """Effect estimate for one direction.

    ``variance`` is on the root-n scale: the interval half-width is
    ``z * sqrt(variance / n)``. ``beta`` and ``variance`` are ``None`` when
    the estimate is unavailable. ``influence`` holds the per-observation
    influence values of ``beta`` (same scale as ``variance``) when known.
    """

    beta: float | None = None
    variance: float | None = None
    valid_set: tuple[int, ...] = ()
    influence: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if (self.beta is None) != (self.variance is None):
            raise ValueError("beta and variance must both be set or both be NA")

    @property
    def is_na(self) -> bool:
        return self.beta is None

    @classmethod
    def na(cls) -> "DirectionalEstimate":
        return cls()


# First-stage constant of the original TSHT screen; with 1.0 a null
# instrument passes with probability 2 * (1 - Phi(sqrt(log n))) each.
RELEVANCE_CONSTANT = 2.01


def select_relevant(rf: ReducedForm, n: int, constant: float = RELEVANCE_CONSTANT) -> tuple[int, ...]:
    """Indices with ``|gamma_j| >= se_j * sqrt(constant * log n)`` (inclusive).

    ``se_j`` is the finite-sample standard error, i.e. the root-n-scaled
    standard deviation divided by ``sqrt(n)``.
    """
    if n < 3:
        raise ValueError("relevance threshold needs n >= 3")
    keep = np.abs(rf.gamma) >= rf.se * math.sqrt(constant * math.log(n))
    return tuple(int(j) for j in np.flatnonzero(keep))


def ratio_estimates(rf_D: ReducedForm, rf_Dp: ReducedForm, idx) -> tuple[np.ndarray, np.ndarray]:
    """Per-instrument ratios ``gamma_Dp / gamma_D`` and their delta-method variances."""
    idx = np.asarray(idx, dtype=int)
    g = rf_D.gamma[idx]
    gp = rf_Dp.gamma[idx]
    ratio = gp / g
    proj2 = rf_D.proj[idx] ** 2
    var_d = rf_D.se[idx] ** 2
    var_dp = rf_Dp.se[idx] ** 2
    cov = proj2 @ (rf_D.residuals * rf_Dp.residuals)
    var = (var_dp - 2.0 * ratio * cov + ratio**2 * var_d) / g**2
    return ratio, np.maximum(var, 0.0)


# Multiplier (squared) on the pairwise scale when deciding whether two
# ratios agree; the same value as the relevance screen.
VOTE_CONSTANT = 2.01

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def pairwise_scale(rf_D: ReducedForm, rf_Dp: ReducedForm, idx,
                   iterations: int = 80) -> tuple[np.ndarray, np.ndarray]:
    """Ratios and the symmetric matrix of effective scales used for voting.

    Instruments k and j are compared through their two-instrument
    overidentification statistic

        J = min over r of  sum_{m in (k, j)} (g'_m - r g_m)**2 / A_m(r),

    where ``A_m(r)`` is the sandwich variance of ``g'_m - r g_m``. For fixed
    ``r`` each term is linear in the reduced-form coefficients, so J stays
    close to its one-degree-of-freedom chi-square law when a first stage is
    only moderately strong. A direct comparison of ratios is skewed in that
    regime and tends to split a genuine cluster.

    The returned scale is ``|r_k - r_j| / sqrt(J)``, which makes the
    comparison in :func:`vote_matrix` equivalent to ``J <= constant * log n``.
    When the ratios coincide (including the diagonal) it falls back to
    ``sqrt(v_k + v_j)`` with both delta-method variances taken at the common
    ratio.
    """
    idx = np.asarray(idx, dtype=int)
    g = rf_D.gamma[idx]
    gp = rf_Dp.gamma[idx]
    ratio = gp / g
    var_d = rf_D.se[idx] ** 2
    var_dp = rf_Dp.se[idx] ** 2
    cov = (rf_D.proj[idx] ** 2) @ (rf_D.residuals * rf_Dp.residuals)
    tiny = np.finfo(float).tiny

    def term(r, sl):
        # (g' - r g)^2 / A(r) for instruments broadcast along axis ``sl``
        gm, gpm, vd, vdp, c = (x[sl] for x in (g, gp, var_d, var_dp, cov))
        a = np.maximum(vdp - 2.0 * r * c + r * r * vd, tiny)
        return (gpm - r * gm) ** 2 / a, a / gm**2

    rows, cols = (slice(None), None), (None, slice(None))

    def objective(r):
        return term(r, rows)[0] + term(r, cols)[0]

    # golden-section search between the two ratios, for all pairs at once
    lo = np.minimum(ratio[:, None], ratio[None, :])
    hi = np.maximum(ratio[:, None], ratio[None, :])
    x1 = hi - _GOLDEN * (hi - lo)
    x2 = lo + _GOLDEN * (hi - lo)
    f1, f2 = objective(x1), objective(x2)
    for _ in range(iterations):
        left = f1 <= f2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        x2n = np.where(left, x1, lo + _GOLDEN * (hi - lo))
        x1n = np.where(left, hi - _GOLDEN * (hi - lo), x2)
        x1, x2 = x1n, x2n
        f1, f2 = objective(x1), objective(x2)
    r_star = 0.5 * (lo + hi)
    J = objective(r_star)
    fallback = np.sqrt(term(r_star, rows)[1] + term(r_star, cols)[1])
    diff = np.abs(ratio[:, None] - ratio[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(J > 0, diff / np.sqrt(J), fallback)
    scale = np.where(diff == 0, fallback, scale)
    return ratio, np.minimum(scale, scale.T)


def vote_matrix(ratio: np.ndarray, scale: np.ndarray, n: int,
                constant: float = VOTE_CONSTANT) -> np.ndarray:
    """Boolean matrix ``A[j, k]``: instruments j and k vote for each other."""
    diff = np.abs(ratio[:, None] - ratio[None, :])
    return diff <= scale * math.sqrt(constant * math.log(n))


def vote(rf_D: ReducedForm, rf_Dp: ReducedForm, relevant, n: int) -> SelectionResult:
    relevant = tuple(int(j) for j in relevant)
    if not relevant:
        return SelectionResult((), {}, (), False)
    ratio, scale = pairwise_scale(rf_D, rf_Dp, relevant)
    counts = vote_matrix(ratio, scale, n).sum(axis=1)
    top = int(counts.max())
    plurality = tuple(j for j, c in zip(relevant, counts) if c == top)
    votes = {j: int(c) for j, c in zip(relevant, counts)}
    return SelectionResult(relevant, votes, plurality, len(plurality) == top)


def modified_tsls(D, Dp, Z, valid_set, Zhat: np.ndarray | None = None) -> DirectionalEstimate:
    """TSLS of ``Dp`` on ``D`` instrumenting with ``Z[:, valid_set]`` and
    controlling for the remaining columns of ``Z``.

    The variance is the HC0 sandwich built from structural residuals
    computed with the observed (not fitted) exposure. ``Zhat`` may carry the
    first-stage fitted values of ``D`` on all of ``Z`` to avoid refitting.
    """
    valid = tuple(sorted(int(j) for j in valid_set))
    if not valid:
        return DirectionalEstimate.na()
    D = np.asarray(D, dtype=float)
    Dp = np.asarray(Dp, dtype=float)
    Z = np.asarray(Z, dtype=float)
    n, p = Z.shape
    others = np.setdiff1d(np.arange(p), valid)

    if Zhat is None:
        coef, *_ = np.linalg.lstsq(Z, D, rcond=None)
        Zhat = Z @ coef
    W_hat = np.column_stack([Zhat, Z[:, others]])
    W = np.column_stack([D, Z[:, others]])
    A = W_hat.T @ W_hat
    try:
        chol = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise SingularDesignError("second-stage design is rank deficient") from exc
    if np.min(np.abs(np.diag(chol))) <= 1e-12 * np.max(np.abs(np.diag(chol))):
        raise SingularDesignError("second-stage design is numerically singular")
    # W_hat^T W == W_hat^T W_hat because W_hat is a projection onto span(Z) ⊇ span(W's Z block)
    coef = np.linalg.solve(A, W_hat.T @ Dp)
    resid = Dp - W @ coef
    # first row of A^{-1}, scaled by n so influence values are O(1)
    a_row = np.linalg.solve(A, np.eye(A.shape[0])[:, 0]) * n
    influence = (W_hat @ a_row) * resid
    variance = float(np.mean(influence**2))
    return DirectionalEstimate(float(coef[0]), variance, valid, influence)
