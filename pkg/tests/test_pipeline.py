import numpy as np
import pytest

from pch.core_stats import projection_operator
from pch.dgp import SimConfig, generate
from pch.pipeline import PCHOutput, pch
from pch.tsht import DirectionalEstimate


@pytest.fixture(scope="module")
def case_b():
    return generate(SimConfig(n=20000, p=50, beta_xy=0.5, beta_yx=0.0, seed=8), 0)


def test_case_b_side_i(case_b):
    out = pch(case_b.X, case_b.Y, case_b.Z)
    assert out.valid_set == tuple(range(15))
    assert out.diagnostics.selection.mode_unique
    assert out.diagnostics.ch_passed
    se = np.sqrt(out.forward.variance / case_b.n)
    assert abs(out.forward.beta - 0.5) < 4 * se
    se_r = np.sqrt(out.reverse.variance / case_b.n)
    assert abs(out.reverse.beta) < 4 * se_r


def test_case_b_side_ii_has_no_heterogeneity(case_b):
    out = pch(case_b.Y, case_b.X, case_b.Z)
    assert not out.forward.is_na
    assert out.reverse.is_na
    assert out.diagnostics.ch_passed is False
    assert out.any_na


def test_shared_projection_is_equivalent(case_b):
    P = projection_operator(case_b.Z)
    a = pch(case_b.X, case_b.Y, case_b.Z)
    b = pch(case_b.X, case_b.Y, case_b.Z, proj=P)
    assert a.forward.beta == pytest.approx(b.forward.beta, rel=1e-12)
    assert a.reverse.beta == pytest.approx(b.reverse.beta, rel=1e-10)


def test_ratio_method_option(case_b):
    a = pch(case_b.X, case_b.Y, case_b.Z, ch_method="ratio")
    b = pch(case_b.X, case_b.Y, case_b.Z)
    assert a.forward.beta == b.forward.beta
    assert a.reverse.beta != b.reverse.beta


def test_tied_clusters_return_na():
    # two equally sized, well separated ratio clusters
    rng = np.random.default_rng(4)
    n = 5000
    Z = rng.choice([1.0, 2.0, 3.0], size=(n, 6), p=[0.6, 0.2, 0.2])
    X = Z @ np.full(6, 0.8) + rng.standard_normal(n)
    Y = 0.3 * X + Z @ np.array([0, 0, 0, 0.8, 0.8, 0.8]) + rng.standard_normal(n)
    out = pch(X - X.mean(), Y - Y.mean(), Z - Z.mean(axis=0))
    assert out.forward.is_na and out.reverse.is_na and out.valid_set == ()
    assert not out.diagnostics.selection.mode_unique


def test_output_invariants():
    est = DirectionalEstimate(0.1, 1.0, (0,))
    with pytest.raises(ValueError):
        PCHOutput(DirectionalEstimate.na(), est, ())
    with pytest.raises(ValueError):
        PCHOutput(est, est, ())
    assert PCHOutput(est, DirectionalEstimate.na(), (0,)).any_na
