import numpy as np
import pytest

from pch.dgp import (
    SimConfig,
    ch_weights,
    draw,
    generate,
    iterate_equilibrium,
    pi_vectors,
    rng_for,
    solve_equilibrium,
)
from pch.oracle import three_level_moments


def test_defaults_match_design():
    cfg = SimConfig()
    assert (cfg.s_x, cfg.s_xy, cfg.s_y) == (15, 8, 5)
    assert (cfg.pi_strength_x, cfg.pi_strength_y) == (0.6, 0.4)
    pi_x, pi_y = pi_vectors(100, 15, 8, 5)
    assert np.count_nonzero(pi_x) == 23 and np.count_nonzero(pi_y) == 13
    assert np.count_nonzero(pi_x * pi_y) == 8
    assert set(pi_x[:23]) == {0.6} and set(pi_y[15:28]) == {0.4}


@pytest.mark.parametrize("kwargs", [
    dict(s_x=-1), dict(p=20, s_x=15), dict(n=50, p=50), dict(replications=0),
])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        SimConfig(**kwargs)


def test_ch_weights():
    assert ch_weights(0.0) == (-0.5, 1.0)
    assert ch_weights(0.3) == (1.0, -1.0)


def test_singular_effects_rejected():
    with pytest.raises(np.linalg.LinAlgError):
        draw(SimConfig(n=200, p=30, beta_xy=2.0, beta_yx=0.5), 0)


def test_determinism_and_independence():
    cfg = SimConfig(n=500, p=30, beta_xy=0.5, seed=9)
    a, b = generate(cfg, 3), generate(cfg, 3)
    assert a.X.tobytes() == b.X.tobytes() and a.Z.tobytes() == b.Z.tobytes()
    c = generate(cfg, 4)
    assert not np.array_equal(a.X, c.X)
    assert rng_for(9, 3).random() == rng_for(9, 3).random()


def test_centered_output():
    d = generate(SimConfig(n=500, p=30, seed=1), 0)
    np.testing.assert_allclose([d.X.mean(), d.Y.mean()], 0, atol=1e-12)
    np.testing.assert_allclose(d.Z.mean(axis=0), 0, atol=1e-12)


def test_instrument_law():
    raw = draw(SimConfig(n=20000, p=30, seed=2), 0)
    m = three_level_moments()
    z = raw.Z.ravel()
    se = np.sqrt(m["var"] / z.size)
    assert set(np.unique(z)) == {1.0, 2.0, 3.0}
    assert abs(z.mean() - m["mean"]) < 4 * se
    assert abs(np.mean(z == 1.0) - 0.6) < 4 * np.sqrt(0.24 / z.size)


def test_structural_equations_hold():
    cfg = SimConfig(n=300, p=30, beta_xy=0.4, beta_yx=-0.7, seed=3)
    raw = draw(cfg, 0)
    pi_x, pi_y = pi_vectors(30, 15, 8, 5)
    np.testing.assert_allclose(raw.Y, 0.4 * raw.X + raw.Z @ pi_y + raw.R_y, atol=1e-12)
    np.testing.assert_allclose(raw.X, -0.7 * raw.Y + raw.Z @ pi_x + raw.R_x, atol=1e-12)


def test_noise_construction():
    cfg = SimConfig(n=3000, p=30, beta_xy=0.4, seed=3)  # beta_yx = 0: tau = -0.5, kappa = 1
    raw = draw(cfg, 0)
    f_zeta = raw.Z[:, 15] - 0.5 * raw.Z[:, 16]
    f_eta = raw.Z[:, 0] + raw.Z[:, 1]
    np.testing.assert_allclose(raw.R_y - raw.zeta, raw.R_x - raw.eta)  # shared confounder
    assert np.all(raw.zeta[f_zeta == 0] == 0)
    star = raw.zeta[f_zeta != 0] / f_zeta[f_zeta != 0]
    assert abs(star.std() - 1) < 0.1
    assert abs((raw.eta / f_eta).std() - 1) < 0.1


def test_reduced_form_recovered():
    cfg = SimConfig(n=50000, p=30, beta_xy=0.5, beta_yx=-0.3, seed=4)
    d = generate(cfg, 0)
    pi_x, pi_y = pi_vectors(30, 15, 8, 5)
    det = 1 + 0.15
    gx = (pi_x - 0.3 * pi_y) / det
    from pch.core_stats import ols_reduced_form
    rf = ols_reduced_form(d.Z, d.X)
    assert np.all(np.abs(rf.gamma - gx) < 4 * rf.se + 1e-12)


def test_equilibrium_iteration_converges():
    rng = np.random.default_rng(0)
    B = np.array([[0.0, 0.3], [-0.4, 0.0]])
    drift = rng.standard_normal((100, 2))
    np.testing.assert_allclose(iterate_equilibrium(B, drift, 60), solve_equilibrium(B, drift), atol=1e-12)
