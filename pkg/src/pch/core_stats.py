"""Shared numerical primitives: centering, reduced-form OLS with
heteroscedasticity-robust errors, second-moment matrices and quantiles."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy import special


class SingularDesignError(np.linalg.LinAlgError):
    """Raised when an instrument design is rank deficient."""

    def __init__(self, message: str, columns: tuple[int, ...] = ()):
        super().__init__(message)
        self.columns = columns


@dataclass(frozen=True)
class Dataset:
    """Centered traits ``X``, ``Y`` and candidate instruments ``Z`` (n x p)."""

    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray

    @property
    def n(self) -> int:
        return self.Z.shape[0]

    @property
    def p(self) -> int:
        return self.Z.shape[1]

    @classmethod
    def from_arrays(cls, X, Y, Z) -> "Dataset":
        X = np.asarray(X, dtype=float).ravel()
        Y = np.asarray(Y, dtype=float).ravel()
        Z = np.asarray(Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None]
        n, p = Z.shape
        if X.shape[0] != n or Y.shape[0] != n:
            raise ValueError(
                f"X, Y and Z must have the same number of rows; got {X.shape[0]}, {Y.shape[0]}, {n}"
            )
        if n <= p:
            raise ValueError(f"need more observations than instruments (n={n}, p={p})")
        return cls(center(X[:, None])[:, 0], center(Y[:, None])[:, 0], center(Z))


@dataclass(frozen=True)
class ReducedForm:
    """OLS fit of one trait on all instruments.

    ``se`` are HC0 sandwich standard errors of ``gamma`` (finite-sample scale,
    so ``gamma / se`` is approximately standard normal under a zero
    coefficient). ``proj`` is ``(Z^T Z)^{-1} Z^T``; it is kept so joint
    covariances between two reduced forms on the same design can be formed.
    """

    gamma: np.ndarray
    residuals: np.ndarray
    se: np.ndarray
    proj: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.residuals.shape[0]


def center(matrix) -> np.ndarray:
    """Subtract column means."""
    m = np.asarray(matrix, dtype=float)
    if m.size == 0 or m.shape[0] == 0:
        raise ValueError("cannot center an empty matrix")
    return m - m.mean(axis=0, keepdims=True)


def _cholesky_gram(Z: np.ndarray):
    gram = Z.T @ Z
    try:
        return scipy.linalg.cho_factor(gram, lower=False, check_finite=False)
    except np.linalg.LinAlgError:
        pass
    # locate the dependent columns for the error message
    _, r, piv = scipy.linalg.qr(Z, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = diag.max() * max(Z.shape) * np.finfo(float).eps if diag.size else 0.0
    bad = tuple(sorted(int(c) for c in piv[diag <= tol]))
    raise SingularDesignError(
        f"instrument matrix is rank deficient; dependent columns: {list(bad)}", bad
    )


def _solve_gram(Z: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    factor = _cholesky_gram(Z)
    sol = scipy.linalg.cho_solve(factor, rhs, check_finite=False)
    if not np.all(np.isfinite(sol)):
        raise SingularDesignError("instrument matrix is numerically singular")
    return sol


def projection_operator(Z: np.ndarray) -> np.ndarray:
    """Return ``(Z^T Z)^{-1} Z^T`` (p x n) via a Cholesky solve."""
    Z = np.asarray(Z, dtype=float)
    return _solve_gram(Z, Z.T)


def sandwich_cov(proj: np.ndarray, resid_a: np.ndarray, resid_b: np.ndarray | None = None) -> np.ndarray:
    """HC0 covariance ``proj diag(e_a e_b) proj^T`` of two OLS coefficient vectors."""
    w = resid_a * (resid_a if resid_b is None else resid_b)
    return (proj * w) @ proj.T


def ols_reduced_form(Z: np.ndarray, D: np.ndarray, proj: np.ndarray | None = None) -> ReducedForm:
    Z = np.asarray(Z, dtype=float)
    D = np.asarray(D, dtype=float).ravel()
    if proj is None:
        proj = projection_operator(Z)
    gamma = proj @ D
    resid = D - Z @ gamma
    # row-wise squared norm of proj weighted by e^2 gives the HC0 diagonal
    var = (proj**2) @ (resid**2)
    return ReducedForm(gamma=gamma, residuals=resid, se=np.sqrt(var), proj=proj)


def sigma_hat(Z: np.ndarray) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    sigma = Z.T @ Z / Z.shape[0]
    if np.linalg.eigvalsh(sigma)[0] <= 0:
        raise SingularDesignError("second-moment matrix of Z is not positive definite")
    return sigma


def residual_projection(Z: np.ndarray, v: np.ndarray, proj: np.ndarray | None = None) -> np.ndarray:
    """Return ``v - Z (Z^T Z)^{-1} Z^T v``."""
    Z = np.asarray(Z, dtype=float)
    v = np.asarray(v, dtype=float)
    if proj is None:
        proj = projection_operator(Z)
    return v - Z @ (proj @ v)


def normal_quantile(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1); got {p}")
    return float(special.ndtri(p))


def chi2_quantile(df: int, p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1); got {p}")
    if df < 1 or int(df) != df:
        raise ValueError(f"degrees of freedom must be a positive integer; got {df}")
    return float(special.chdtri(df, 1.0 - p))
