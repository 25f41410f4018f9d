import math

import numpy as np
import pytest

import _spfit as sp


def test_kernel_and_matern_values():
    assert sp.tps_kernel(1.0) == 0.0
    assert sp.tps_kernel(2.0) == pytest.approx(4.0 * math.log(2.0))
    assert sp.matern_cov(0.0, sigma2=2.0) == 2.0
    assert sp.matern_cov(1.0, sigma2=1.0, kappa=1.0, nu=1.0) == pytest.approx(
        0.6019072302, rel=1e-8
    )


def test_mesh_and_fem():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    mesh = sp.triangulate(pts, 0.0)
    assert mesh.n_data == 3
    assert mesh.triangles.shape == (1, 3)
    fem = sp.assemble_fem(mesh)
    assert fem.c_lumped == pytest.approx([1 / 6] * 3)
    assert np.allclose(fem.g1.sum(axis=1), 0.0, atol=1e-12)


def test_mesh_errors_are_value_errors():
    collinear = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    with pytest.raises(ValueError):
        sp.triangulate(collinear, 0.0)


def test_tps_truncation():
    rng = np.random.default_rng(3)
    pts = rng.uniform(size=(30, 2))
    e, p = sp.build_full(pts)
    assert p.shape == (30, 3)
    u, d = sp.truncate_spectral(e, 30)
    assert np.linalg.norm(u @ np.diag(d) @ u.T - e) < 1e-9


def test_simulate_and_fit_smoke():
    sim = sp.simulate(n=50, sigma=0.1, seed=5)
    model = sp.Model.build(
        "mtps_fixed_knots",
        sim["y"],
        sim["x"],
        list(sim["x_names"]),
        sim["coords"],
        {"tps.knots": "10"},
    )
    assert model.dim == 2 + 10 + 2  # beta, c, log_sigma, log_lambda

    x0 = np.zeros(model.dim)
    value, grad = model.logp_grad(x0)
    assert math.isfinite(value)
    assert grad.shape == (model.dim,)

    out = model.sample(chains=2, warmup=150, total_iter=400, seed=3)
    draws = out["draws"]
    assert draws.shape == (2 * 250, model.dim)
    names = list(out["names"])
    b0 = draws[:, names.index("beta[intercept]")].mean()
    assert abs(b0 - 1.0) < 0.5


def test_diagnostics_and_loo():
    rng = np.random.default_rng(11)
    draws = rng.normal(size=(4, 800))
    assert sp.split_rhat(draws) < 1.02
    ess = sp.ess_bulk(draws)
    assert 0.7 * 3200 < ess <= 1.5 * 3200

    loglik = -1.0 + 0.3 * rng.normal(size=(500, 12))
    loo = sp.psis_loo(loglik)
    assert loo["elpd_i"].shape == (12,)
    assert loo["elpd_loo"] == pytest.approx(loo["elpd_i"].sum())
    assert loo["khat_threshold"] == pytest.approx(
        min(1 - 1 / math.log10(500), 0.7)
    )
