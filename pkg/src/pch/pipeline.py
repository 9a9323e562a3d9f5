"""Finite-sample PCH: mode-based forward estimate, CH-based reverse estimate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ch
from .core_stats import ols_reduced_form, projection_operator, sigma_hat
from .tsht import DirectionalEstimate, SelectionResult, modified_tsls, select_relevant, vote


@dataclass(frozen=True)
class PCHDiagnostics:
    selection: SelectionResult | None = None
    ch_statistic: float | None = None
    ch_passed: bool | None = None


@dataclass(frozen=True)
class PCHOutput:
    forward: DirectionalEstimate
    reverse: DirectionalEstimate
    valid_set: tuple[int, ...]
    diagnostics: PCHDiagnostics = field(default_factory=PCHDiagnostics, compare=False)

    def __post_init__(self):
        if self.forward.is_na and (not self.reverse.is_na or self.valid_set):
            raise ValueError("a missing forward estimate forces an all-NA output")
        if not self.forward.is_na and not self.valid_set:
            raise ValueError("a forward estimate needs a non-empty valid set")

    @property
    def any_na(self) -> bool:
        return self.forward.is_na or self.reverse.is_na


def pch(D, Dp, Z, *, proj: np.ndarray | None = None, variance: str = "propagated",
        ch_method: str = "hful") -> PCHOutput:
    """Run PCH with ``D`` as the plurality-side exposure and ``Dp`` as outcome.

    ``proj`` may be a precomputed ``(Z^T Z)^{-1} Z^T`` shared between the two
    orderings of the same dataset.
    """
    D = np.asarray(D, dtype=float)
    Dp = np.asarray(Dp, dtype=float)
    Z = np.asarray(Z, dtype=float)
    n = Z.shape[0]
    if proj is None:
        proj = projection_operator(Z)

    rf_D = ols_reduced_form(Z, D, proj=proj)
    rf_Dp = ols_reduced_form(Z, Dp, proj=proj)
    relevant = select_relevant(rf_D, n)
    selection = vote(rf_D, rf_Dp, relevant, n)
    if not selection.mode_unique:
        return PCHOutput(DirectionalEstimate.na(), DirectionalEstimate.na(), (),
                         PCHDiagnostics(selection))

    valid = selection.plurality_set
    forward = modified_tsls(D, Dp, Z, valid, Zhat=D - rf_D.residuals)
    lam = ch.lambda_hat(D, Dp, forward.beta, Z, proj=proj)
    tp = ch.theta_hats(Z, D, Dp, lam, proj=proj)
    passed = ch.ch_test(tp, n)
    reverse = DirectionalEstimate.na()
    if passed:
        reverse = ch.ch_estimate(tp, sigma_hat(Z), forward=forward, variance=variance,
                                   method=ch_method)
    return PCHOutput(forward, reverse, valid, PCHDiagnostics(selection, tp.statistic, passed))
