import pytest

from pch.inference import (
    Branch,
    ConfidenceInterval,
    SignPrior,
    ci,
    direction_call,
    infer,
    true_direction,
)
from pch.pipeline import PCHOutput
from pch.tsht import DirectionalEstimate

N = 10000
Z_DETECT = 3.8905918864131765  # normal quantile at 1 - 1/(2N)


def out(fwd=None, rev=None, valid=(0,), var=1.0):
    f = DirectionalEstimate(fwd, var if fwd is not None else None, tuple(valid) if fwd is not None else ())
    r = DirectionalEstimate(rev, var if rev is not None else None)
    return PCHOutput(f, r, tuple(valid) if fwd is not None else ())


def test_detection_quantile_constant():
    from pch.core_stats import normal_quantile
    assert normal_quantile(1 - 1 / (2 * N)) == pytest.approx(Z_DETECT, rel=1e-12)


def test_ci_scale_and_na():
    c = ci(0.0, 1.0, 100, 0.05)
    assert c.upper == pytest.approx(1.959963984540054 / 10, rel=1e-12)
    assert c.lower == -c.upper and c.level == pytest.approx(0.95)
    assert ci(None, None, 100, 0.05).is_na
    assert ci(1.0, float("inf"), 100, 0.05).is_na
    with pytest.raises(ValueError):
        ci(1.0, -1.0, 100, 0.05)


def test_confidence_interval_predicates():
    c = ConfidenceInterval(0.1, 0.3, 0.95)
    assert c.contains(0.1) and c.contains(0.3) and not c.contains(0.31)
    assert c.excludes_zero()
    na = ConfidenceInterval(None, None, 0.95)
    assert not na.contains(0.0) and not na.excludes_zero()


@pytest.mark.parametrize("bxy,byx,h", [(0, 0, 0), (0.5, 0, 1), (0, -0.2, -1), (0.1, 0.1, 2)])
def test_true_direction(bxy, byx, h):
    assert true_direction(bxy, byx) == h


def test_direction_call_codes():
    pos = ConfidenceInterval(1.0, 2.0, 0.95)
    zero = ConfidenceInterval(-1.0, 1.0, 0.95)
    assert direction_call(pos, zero) == 1
    assert direction_call(zero, pos) == -1
    assert direction_call(zero, zero) == 0
    assert direction_call(pos, pos) == 0
    assert direction_call(pos, pos, both_means_two=True) == 2


# The fixtures below use variance 1 and n = N, so the detection half-width is
# Z_DETECT / 100 ~ 0.039: |beta| = 0.5 is significant, |beta| = 0.01 is not.

def test_branch_ii_na():
    res = infer(out(0.5, 0.01), out(), N)
    assert res.branch_taken is Branch.II_NA
    assert (res.h_hat, res.beta_xy_hat, res.beta_yx_hat) == (1, 0.5, 0.01)
    assert res.diagnostics == ()


def test_branch_ii_na_when_only_reverse_missing():
    res = infer(out(0.5, 0.01), out(2.0, None), N)
    assert res.branch_taken is Branch.II_NA


def test_branch_i_na():
    res = infer(out(), out(0.5, 0.01), N)
    assert res.branch_taken is Branch.I_NA
    # side II forward is Y->X, reverse is X->Y
    assert (res.h_hat, res.beta_yx_hat, res.beta_xy_hat) == (-1, 0.5, 0.01)


def test_both_na_diagnostic():
    res = infer(out(), out(), N)
    assert res.branch_taken is Branch.II_NA
    assert res.h_hat == 0 and res.beta_xy_hat is None
    assert res.ci_xy.is_na
    assert res.diagnostics == ("assumptions undetectable: both PCH runs returned NA",)


def test_vote_compare_tie_goes_to_side_i():
    res = infer(out(0.5, 0.01, valid=(0, 1, 2)), out(2.0, 0.3, valid=(4, 5, 6)), N)
    assert res.branch_taken is Branch.VOTE_COMPARE_I
    assert (res.h_hat, res.beta_xy_hat) == (1, 0.5)


def test_vote_compare_ii():
    res = infer(out(0.5, 0.01, valid=(0, 1)), out(0.01, 0.6, valid=(4, 5, 6)), N)
    assert res.branch_taken is Branch.VOTE_COMPARE_II
    # side II: forward (Y->X) = 0.01, reverse (X->Y) = 0.6
    assert (res.h_hat, res.beta_xy_hat, res.beta_yx_hat) == (1, 0.6, 0.01)


@pytest.mark.parametrize("prior,branch", [
    (SignPrior.XY_POS_YX_NEG, Branch.BIDIR_I),
    (SignPrior.XY_NEG_YX_POS, Branch.BIDIR_II),
    (SignPrior.MAGNITUDE_LT_1, Branch.BIDIR_I),
])
def test_bidirectional_priors(prior, branch):
    # side I: xy = 0.5, yx = -0.4; side II (reciprocal): yx = 2.0 -> xy = 1/(-0.4)
    res = infer(out(0.5, -0.4), out(2.0, -2.5), N, sign_prior=prior)
    assert res.h_hat == 2
    assert res.branch_taken is branch
    if branch is Branch.BIDIR_I:
        assert (res.beta_xy_hat, res.beta_yx_hat) == (0.5, -0.4)
    else:
        assert (res.beta_xy_hat, res.beta_yx_hat) == (-2.5, 2.0)


def test_magnitude_prior_prefers_smaller_effects():
    res = infer(out(2.0, 2.5), out(0.5, 0.4), N, sign_prior="MAGNITUDE_LT_1")
    assert res.branch_taken is Branch.BIDIR_II
    assert (res.beta_xy_hat, res.beta_yx_hat) == (0.4, 0.5)


def test_reported_intervals_use_alpha():
    a = infer(out(0.5, 0.01), out(), N, alpha=0.05)
    b = infer(out(0.5, 0.01), out(), N, alpha=0.10)
    assert a.beta_xy_hat == b.beta_xy_hat
    assert a.ci_xy.lower < b.ci_xy.lower < b.ci_xy.upper < a.ci_xy.upper
    assert a.ci_xy.upper - 0.5 == pytest.approx(1.959963984540054 / 100)
