"""Synthetic bi-directional SEM data with three-level instruments.

Every replication draws from its own Philox stream keyed by
``(seed, rep_index)``, so datasets are reproducible and replications can be
scheduled in any order.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core_stats import Dataset

Z_VALUES = (1.0, 2.0, 3.0)
Z_PROBS = (0.6, 0.2, 0.2)


@dataclass(frozen=True)
class SimConfig:
    n: int = 50000
    p: int = 100
    s_x: int = 15
    s_xy: int = 8
    s_y: int = 5
    beta_xy: float = 0.0
    beta_yx: float = 0.0
    pi_strength_x: float = 0.6
    pi_strength_y: float = 0.4
    seed: int = 0
    replications: int = 200
    case: str = ""

    def __post_init__(self):
        if min(self.s_x, self.s_xy, self.s_y) < 0:
            raise ValueError("cluster sizes must be nonnegative")
        if self.s_x + self.s_xy + self.s_y > self.p:
            raise ValueError("s_x + s_xy + s_y must not exceed p")
        if self.n <= self.p:
            raise ValueError("n must exceed p")
        if self.replications < 1:
            raise ValueError("replications must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def pi_vectors(p: int, s_x: int, s_xy: int, s_y: int, strength_x: float = 0.6,
               strength_y: float = 0.4) -> tuple[np.ndarray, np.ndarray]:
    """Direct instrument effects on X and on Y."""
    pi_x = np.zeros(p)
    pi_y = np.zeros(p)
    pi_x[: s_x + s_xy] = strength_x
    pi_y[s_x : s_x + s_xy + s_y] = strength_y
    return pi_x, pi_y


def ch_weights(beta_yx: float) -> tuple[float, float]:
    """Mixing weights ``(tau, kappa)`` of the heteroscedastic noise terms."""
    null = float(beta_yx == 0)
    return 1.0 - 1.5 * null, -1.0 + 2.0 * null


def rng_for(seed: int, rep_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(rep_index),))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class RawDraw:
    """Uncentered draw with its latent pieces (for moment checks)."""

    X: np.ndarray
    Y: np.ndarray
    Z: np.ndarray
    R_x: np.ndarray
    R_y: np.ndarray
    zeta: np.ndarray
    eta: np.ndarray


def draw(cfg: SimConfig, rep_index: int) -> RawDraw:
    if abs(cfg.beta_xy * cfg.beta_yx - 1.0) < 1e-12:
        raise np.linalg.LinAlgError("beta_xy * beta_yx = 1: reduced form does not exist")
    rng = rng_for(cfg.seed, rep_index)
    n, p = cfg.n, cfg.p
    Z = rng.choice(np.asarray(Z_VALUES), size=(n, p), p=Z_PROBS)
    U = rng.standard_normal(n)
    zeta_star = rng.standard_normal(n)
    eta_star = rng.standard_normal(n)
    tau, kappa = ch_weights(cfg.beta_yx)
    zeta = zeta_star * (Z[:, cfg.s_x] + tau * Z[:, cfg.s_x + 1])
    eta = eta_star * (Z[:, 0] + kappa * Z[:, 1])
    R_y = U + zeta
    R_x = U + eta
    pi_x, pi_y = pi_vectors(p, cfg.s_x, cfg.s_xy, cfg.s_y, cfg.pi_strength_x, cfg.pi_strength_y)
    a_y = Z @ pi_y + R_y
    a_x = Z @ pi_x + R_x
    det = 1.0 - cfg.beta_xy * cfg.beta_yx
    Y = (a_y + cfg.beta_xy * a_x) / det
    X = (a_x + cfg.beta_yx * a_y) / det
    return RawDraw(X, Y, Z, R_x, R_y, zeta, eta)


def generate(cfg: SimConfig, rep_index: int) -> Dataset:
    raw = draw(cfg, rep_index)
    return Dataset.from_arrays(raw.X, raw.Y, raw.Z)


def iterate_equilibrium(B: np.ndarray, drift: np.ndarray, steps: int = 50) -> np.ndarray:
    """Iterate ``V(t) = B V(t-1) + drift`` from zero; ``drift`` is (n, 2) over (Y, X)."""
    V = np.zeros_like(drift)
    for _ in range(steps):
        V = V @ B.T + drift
    return V


def solve_equilibrium(B: np.ndarray, drift: np.ndarray) -> np.ndarray:
    return np.linalg.solve(np.eye(2) - B, drift.T).T
