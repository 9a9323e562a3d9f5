"""Direction detection and confidence intervals from two PCH runs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

from .core_stats import normal_quantile
from .pipeline import PCHOutput
from .tsht import DirectionalEstimate


class Branch(str, Enum):
    II_NA = "II_NA"
    I_NA = "I_NA"
    VOTE_COMPARE_I = "VOTE_COMPARE_I"
    VOTE_COMPARE_II = "VOTE_COMPARE_II"
    BIDIR_I = "BIDIR_I"
    BIDIR_II = "BIDIR_II"


class SignPrior(str, Enum):
    """How to pick between the two candidate pairs when both effects are nonzero.

    XY_POS_YX_NEG keeps the larger X->Y estimate, XY_NEG_YX_POS the smaller,
    MAGNITUDE_LT_1 the pair with the smaller largest absolute effect.
    """

    XY_POS_YX_NEG = "XY_POS_YX_NEG"
    XY_NEG_YX_POS = "XY_NEG_YX_POS"
    MAGNITUDE_LT_1 = "MAGNITUDE_LT_1"


@dataclass(frozen=True)
class ConfidenceInterval:
    lower: float | None
    upper: float | None
    level: float

    @property
    def is_na(self) -> bool:
        return self.lower is None

    def contains(self, value: float) -> bool:
        return not self.is_na and self.lower <= value <= self.upper

    def excludes_zero(self) -> bool:
        return not self.is_na and not self.contains(0.0)


@dataclass(frozen=True)
class InferenceResult:
    h_hat: int
    beta_xy_hat: float | None
    beta_yx_hat: float | None
    ci_xy: ConfidenceInterval
    ci_yx: ConfidenceInterval
    branch_taken: Branch
    sign_prior: SignPrior = SignPrior.XY_POS_YX_NEG
    diagnostics: tuple[str, ...] = field(default=())


def ci(beta: float | None, variance: float | None, n: int, alpha: float) -> ConfidenceInterval:
    """``beta +- z_{1-alpha/2} sqrt(variance / n)``; NA in, NA out."""
    level = 1.0 - alpha
    if beta is None or variance is None or not math.isfinite(variance):
        return ConfidenceInterval(None, None, level)
    if variance < 0:
        raise ValueError("variance must be nonnegative")
    half = normal_quantile(1.0 - alpha / 2.0) * math.sqrt(variance / n)
    return ConfidenceInterval(beta - half, beta + half, level)


def _ci(est: DirectionalEstimate, n: int, alpha: float) -> ConfidenceInterval:
    return ci(est.beta, est.variance, n, alpha)


def true_direction(beta_xy: float, beta_yx: float) -> int:
    if beta_xy != 0 and beta_yx != 0:
        return 2
    if beta_xy != 0:
        return 1
    if beta_yx != 0:
        return -1
    return 0


def direction_call(ci_xy: ConfidenceInterval, ci_yx: ConfidenceInterval, both_means_two: bool = False) -> int:
    sig_xy = ci_xy.excludes_zero()
    sig_yx = ci_yx.excludes_zero()
    if both_means_two and sig_xy and sig_yx:
        return 2
    return int(sig_xy) - int(sig_yx)


def _pick_bidirectional(b_xy_i: float, b_yx_i: float, b_xy_ii: float, b_yx_ii: float,
                        prior: SignPrior) -> bool:
    """True selects side I."""
    if prior is SignPrior.XY_POS_YX_NEG:
        return b_xy_i > b_xy_ii
    if prior is SignPrior.XY_NEG_YX_POS:
        return b_xy_i < b_xy_ii
    return max(abs(b_xy_i), abs(b_yx_i)) <= max(abs(b_xy_ii), abs(b_yx_ii))


def infer(out_I: PCHOutput, out_II: PCHOutput, n: int, alpha: float = 0.05,
          sign_prior: SignPrior | str = SignPrior.XY_POS_YX_NEG) -> InferenceResult:
    """Combine ``PCH(X, Y, Z)`` (side I) and ``PCH(Y, X, Z)`` (side II)."""
    prior = SignPrior(sign_prior)
    # side I: forward is X->Y; side II: forward is Y->X
    est = {
        ("xy", "I"): out_I.forward,
        ("yx", "I"): out_I.reverse,
        ("yx", "II"): out_II.forward,
        ("xy", "II"): out_II.reverse,
    }
    detect = {k: _ci(v, n, 1.0 / n) for k, v in est.items()}
    union_na = any(c.is_na for c in detect.values())
    zero_in_union = union_na or any(c.contains(0.0) for c in detect.values())

    diagnostics: list[str] = []
    if out_I.forward.is_na and out_II.forward.is_na:
        diagnostics.append("assumptions undetectable: both PCH runs returned NA")

    if zero_in_union:
        if out_II.any_na:
            branch, side = Branch.II_NA, "I"
        elif out_I.any_na:
            branch, side = Branch.I_NA, "II"
        elif len(out_I.valid_set) >= len(out_II.valid_set):
            branch, side = Branch.VOTE_COMPARE_I, "I"
        else:
            branch, side = Branch.VOTE_COMPARE_II, "II"
        h_hat = direction_call(detect[("xy", side)], detect[("yx", side)])
    else:
        h_hat = 2
        pick_i = _pick_bidirectional(
            est[("xy", "I")].beta, est[("yx", "I")].beta,
            est[("xy", "II")].beta, est[("yx", "II")].beta, prior,
        )
        branch, side = (Branch.BIDIR_I, "I") if pick_i else (Branch.BIDIR_II, "II")

    e_xy = est[("xy", side)]
    e_yx = est[("yx", side)]
    return InferenceResult(
        h_hat=h_hat,
        beta_xy_hat=e_xy.beta,
        beta_yx_hat=e_yx.beta,
        ci_xy=_ci(e_xy, n, alpha),
        ci_yx=_ci(e_yx, n, alpha),
        branch_taken=branch,
        sign_prior=prior,
        diagnostics=tuple(diagnostics),
    )
