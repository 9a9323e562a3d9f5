"""Population-level PCH on exact moments.

The oracle works from the structural parameters alone: reduced-form
coefficients follow from solving the two structural equations, and the
moments ``E(Lambda D Z)`` reduce to combinations of the heteroscedasticity
vectors ``E(zeta^2 Z)``, ``E(eta^2 Z)`` and ``E(R_X R_Y Z)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum
from typing import Literal

import numpy as np


class _Inf(Enum):
    INF = "INF"

    def __repr__(self) -> str:
        return "INF"

    def __str__(self) -> str:
        return "INF"


INF = _Inf.INF

MODE_TOL = 1e-9
ZERO_TOL = 1e-12


@dataclass(frozen=True)
class PopulationSpec:
    """True structural parameters.

    ``m_zeta[j] = E(zeta^2 Z_j)`` and ``m_eta[j] = E(eta^2 Z_j)`` for centered
    ``Z``; ``m_cross[j] = E(R_X R_Y Z_j)`` (zero when the confounder and the
    noise terms are independent of ``Z``).
    """

    beta_xy: float
    beta_yx: float
    pi_x: np.ndarray
    pi_y: np.ndarray
    sigma: np.ndarray
    m_zeta: np.ndarray
    m_eta: np.ndarray
    m_cross: np.ndarray | None = field(default=None)

    def __post_init__(self):
        if abs(self.beta_xy * self.beta_yx - 1.0) < 1e-12:
            raise ValueError("beta_xy * beta_yx must differ from 1")

    @property
    def p(self) -> int:
        return len(self.pi_x)

    @property
    def det(self) -> float:
        return 1.0 - self.beta_xy * self.beta_yx

    @property
    def gamma_x(self) -> np.ndarray:
        return (np.asarray(self.pi_x) + self.beta_yx * np.asarray(self.pi_y)) / self.det

    @property
    def gamma_y(self) -> np.ndarray:
        return (np.asarray(self.pi_y) + self.beta_xy * np.asarray(self.pi_x)) / self.det

    def residual_loadings(self) -> dict[str, np.ndarray]:
        """Coefficients of ``(R_Y, R_X)`` in the reduced-form residual of each trait."""
        d = self.det
        return {
            "Y": np.array([1.0, self.beta_xy]) / d,
            "X": np.array([self.beta_yx, 1.0]) / d,
        }

    def residual_moments(self) -> np.ndarray:
        """Array ``M[a, b] = E(R_a R_b Z)`` over ``(R_Y, R_X)``, shape (2, 2, p)."""
        cross = np.zeros(self.p) if self.m_cross is None else np.asarray(self.m_cross)
        return np.array([[self.m_zeta, cross], [cross, self.m_eta]], dtype=float)


@dataclass(frozen=True)
class OracleTriplet:
    beta_fwd: float | _Inf
    beta_rev: float | _Inf
    valid_set: tuple[int, ...]

    def __post_init__(self):
        if (self.beta_fwd is INF) != (len(self.valid_set) == 0):
            raise ValueError("beta_fwd is INF exactly when the valid set is empty")


def population_mode(ratios: dict[int, float], tol: float = MODE_TOL):
    """Unique most frequent value among ``ratios`` (clustered within ``tol``).

    Returns ``(value, members)`` or ``(INF, ())`` when the top count is shared.
    """
    if not ratios:
        return INF, ()
    items = sorted(ratios.items(), key=lambda kv: kv[1])
    clusters: list[list[tuple[int, float]]] = []
    for j, r in items:
        if clusters and abs(r - clusters[-1][0][1]) <= tol * max(1.0, abs(r)):
            clusters[-1].append((j, r))
        else:
            clusters.append([(j, r)])
    sizes = [len(c) for c in clusters]
    top = max(sizes)
    if sizes.count(top) > 1:
        return INF, ()
    best = clusters[sizes.index(top)]
    value = float(np.mean([r for _, r in best]))
    return value, tuple(sorted(j for j, _ in best))


def oracle_pch(spec: PopulationSpec, direction: Literal["X", "Y"] = "X") -> OracleTriplet:
    """``direction`` names the trait playing the plurality-side exposure."""
    if direction == "X":
        g_d, g_dp = spec.gamma_x, spec.gamma_y
        d_name, dp_name = "X", "Y"
    elif direction == "Y":
        g_d, g_dp = spec.gamma_y, spec.gamma_x
        d_name, dp_name = "Y", "X"
    else:
        raise ValueError("direction must be 'X' or 'Y'")

    relevant = {j: g_dp[j] / g_d[j] for j in range(spec.p) if abs(g_d[j]) > ZERO_TOL}
    b, members = population_mode(relevant)
    if b is INF:
        return OracleTriplet(INF, INF, ())

    load = spec.residual_loadings()
    l_lam = load[dp_name] - b * load[d_name]
    moments = spec.residual_moments()
    # E(Lambda * D_res * Z) = sum_{a,b} lam_a d_b E(R_a R_b Z)
    e_d = np.einsum("a,b,abj->j", l_lam, load[d_name], moments)
    e_dp = np.einsum("a,b,abj->j", l_lam, load[dp_name], moments)
    sigma = np.asarray(spec.sigma, dtype=float)
    theta_d = np.linalg.solve(sigma, e_d)
    theta_dp = np.linalg.solve(sigma, e_dp)
    denom = float(theta_dp @ sigma @ theta_dp)
    if denom <= ZERO_TOL * max(1.0, float(e_d @ e_d)):
        return OracleTriplet(b, INF, members)
    return OracleTriplet(b, float(theta_d @ sigma @ theta_dp) / denom, members)


def three_level_moments(values=(1.0, 2.0, 3.0), probs=(0.6, 0.2, 0.2)) -> dict[str, float]:
    """Raw and centered moments of a discrete law by enumeration."""
    v = np.asarray(values, dtype=float)
    w = np.asarray(probs, dtype=float)
    mean = float(w @ v)
    return {
        "mean": mean,
        "m2": float(w @ v**2),
        "m3": float(w @ v**3),
        "var": float(w @ (v - mean) ** 2),
        "c3": float(w @ (v - mean) ** 3),
    }


def heteroscedastic_moment(p: int, a: int, b: int, weight: float,
                           values=(1.0, 2.0, 3.0), probs=(0.6, 0.2, 0.2)) -> np.ndarray:
    """``E[(Z_a + weight Z_b)^2 (Z_j - E Z_j)]`` for iid raw coordinates, all j.

    Computed by enumerating the joint law of the (at most three) coordinates
    involved; unit-variance multiplicative noise is assumed.
    """
    v = np.asarray(values, dtype=float)
    w = np.asarray(probs, dtype=float)
    mu = float(w @ v)
    out = np.zeros(p)
    for j in {a, b}:
        total = 0.0
        for (ia, za), (ib, zb) in itertools.product(enumerate(v), repeat=2):
            zj = za if j == a else zb
            total += w[ia] * w[ib] * (za + weight * zb) ** 2 * (zj - mu)
        out[j] = total
    # coordinates outside {a, b} are independent of the noise scale and centered
    return out


def simulation_population(beta_xy: float, beta_yx: float, p: int, s_x: int = 15,
                          s_xy: int = 8, s_y: int = 5, pi_strength_x: float = 0.6,
                          pi_strength_y: float = 0.4) -> PopulationSpec:
    """PopulationSpec matching the synthetic design in :mod:`pch.dgp`."""
    from .dgp import ch_weights, pi_vectors

    pi_x, pi_y = pi_vectors(p, s_x, s_xy, s_y, pi_strength_x, pi_strength_y)
    tau, kappa = ch_weights(beta_yx)
    var = three_level_moments()["var"]
    return PopulationSpec(
        beta_xy=beta_xy,
        beta_yx=beta_yx,
        pi_x=pi_x,
        pi_y=pi_y,
        sigma=var * np.eye(p),
        m_zeta=heteroscedastic_moment(p, s_x, s_x + 1, tau),
        m_eta=heteroscedastic_moment(p, 0, 1, kappa),
    )
