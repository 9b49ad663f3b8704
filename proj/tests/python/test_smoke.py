"""Smoke tests for the Python bindings."""

import math

import numpy as np
import pytest

import gridnorm


def test_special_functions():
    assert gridnorm.gamma_fn(5.0) == pytest.approx(24.0)
    assert gridnorm.bessel_k(0.5, 1.0) == pytest.approx(
        math.sqrt(math.pi / 2.0) * math.exp(-1.0), rel=1e-12
    )
    assert gridnorm.chi2_sf(0.0, 4.0) == 1.0
    assert gridnorm.chi2_sf(5.9914645, 2.0) == pytest.approx(0.05, abs=1e-7)
    assert gridnorm.normal_sf(0.0) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        gridnorm.gamma_fn(-1.0)


def test_matern_and_effective_range():
    beta = gridnorm.solve_effective_range("exponential", 0.3)
    assert beta == pytest.approx(0.3 / math.log(20.0), rel=1e-12)
    assert gridnorm.matern_corr(0.0, 0.5, beta) == 1.0
    assert gridnorm.matern_corr(beta, 0.5, beta) == pytest.approx(math.exp(-1))
    assert gridnorm.rho_bound(0.5, 0.5, 2) == pytest.approx(1.0)
    assert gridnorm.rho_bound(0.5, 1.5, 2) == pytest.approx(0.8660254037844386)


def test_simulation_shapes_and_determinism():
    field = gridnorm.simulate_moving_average(
        side=15, thetas=[0.2, -0.2], family="exponential", h_star=0.5, seed=7
    )
    assert field.shape == (2, 15, 15)
    again = gridnorm.simulate_moving_average(
        side=15, thetas=[0.2, -0.2], family="exponential", h_star=0.5, seed=7
    )
    np.testing.assert_array_equal(field, again)

    matern = gridnorm.simulate_bivariate_matern(side=10, rho12=0.5, h_star=0.4, seed=3)
    assert matern.shape == (2, 10, 10)
    # colocated correlation should be clearly positive at rho12 = 0.5
    corr = np.corrcoef(matern[0].ravel(), matern[1].ravel())[0, 1]
    assert corr > 0.1


def test_jb_star_and_uit():
    rng = np.random.default_rng(11)
    series = rng.standard_normal((15, 15))
    out = gridnorm.jb_star(series)
    assert out.statistic == pytest.approx(
        out.s_n**2 / out.phi_s2 + out.k_n**2 / out.phi_k2
    )
    assert out.p_value == pytest.approx(math.exp(-out.statistic / 2.0))

    field = rng.standard_normal((2, 15, 15))
    report = gridnorm.uit_test(field, projections=50, alpha=0.05, seed=5)
    assert len(report.p_values) == 50
    assert report.reject_h0 == (len(report.bh.rejected) > 0)

    transformed = gridnorm.sas_inverse_transform(field, [(0.5, 0.5), (0.3, 0.5)])
    assert transformed.shape == field.shape
    # strong skewness should be detected on a larger grid
    big = rng.standard_normal((2, 40, 40))
    skewed = gridnorm.sas_inverse_transform(big, [(0.5, 0.5), (0.3, 0.5)])
    assert gridnorm.uit_test(skewed, projections=100, seed=1).reject_h0


def test_iid_baselines():
    rng = np.random.default_rng(23)
    x = rng.standard_normal((500, 2))
    for fn in (gridnorm.mardia_skewness, gridnorm.mardia_kurtosis, gridnorm.doornik_hansen):
        outcome = fn(x, 0.05)
        assert 0.0 <= outcome.p_value <= 1.0
        assert outcome.reject == (outcome.p_value < 0.05)
    jb = gridnorm.univariate_jb([-1.0, 0.0, 1.0], 0.05)
    assert jb.statistic == pytest.approx(0.28125)


def test_bh_procedure():
    res = gridnorm.bh_procedure([0.001, 0.2, 0.9], alpha=0.05)
    assert res.r == 1
    assert res.threshold == pytest.approx(0.001)
    assert res.rejected == [0]
    none = gridnorm.bh_procedure([1.0, 1.0], alpha=0.05)
    assert none.threshold is None and none.rejected == []


def test_projections():
    dirs = gridnorm.sample_projections(3, 20, seed=2)
    assert dirs.shape == (20, 3)
    np.testing.assert_allclose(np.linalg.norm(dirs, axis=1), 1.0, atol=1e-12)


def test_experiments_and_summaries():
    curves = gridnorm.run_size_experiment(
        grid_side=8,
        projections=5,
        h_star_grid=[0.3],
        n_sim=4,
        tests=["UIT", "MS"],
        seed=1,
    )
    assert {c.test_name for c in curves} == {"UIT", "MS"}
    assert all(0.0 <= r <= 1.0 for c in curves for r in c.rate)

    skew, kurt = gridnorm.run_moment_drift_experiment(
        grid_side=8, h_star_grid=[0.2, 0.8], n_rep=10, seed=2
    )
    assert kurt.curves.shape == (10, 2)

    curves = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]])
    depths = gridnorm.modified_band_depth(curves)
    assert depths[1] == max(depths)
    summary = gridnorm.functional_summary(curves)
    assert summary.median_index == 1


def test_default_bandwidth():
    assert gridnorm.default_bandwidth(15) == 2
    assert gridnorm.default_bandwidth(30) == 3
    assert gridnorm.default_bandwidth(100) == 4


def test_cli_in_process(tmp_path):
    cfg = tmp_path / "sim.json"
    cfg.write_text(
        '{"grid": {"side": 8}, "model": "moving_average",'
        ' "moving_average": {"thetas": [0.2, -0.2], "family": "exponential",'
        ' "h_star": 0.5}, "seed": 3}'
    )
    out = tmp_path / "out"
    assert gridnorm.run_cli(["simulate", "--config", str(cfg), "--out", str(out)]) == 0
    assert (out / "field.csv").exists()
    assert (out / "document.json").exists()
