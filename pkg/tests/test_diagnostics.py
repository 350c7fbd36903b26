import math

import numpy as np
import pytest
from scipy import stats

import oracles
from bekk_ergo import matcore
from bekk_ergo.catalog import get_example
from bekk_ergo.diagnostics import (
    batch_means,
    convergence_probe,
    energy_distance,
    moment_check,
    moment_check_arrays,
    orbit_dimension,
)
from bekk_ergo.exceptions import DomainError
from bekk_ergo.model import BekkModel
from bekk_ergo.simulate import run
from bekk_ergo.stationarity import attracting_point, stationary_covariance


class TestEnergyDistance:
    def test_identical_is_zero(self, rng):
        X = rng.standard_normal((50, 3))
        assert energy_distance(X, X) == pytest.approx(0.0, abs=1e-12)

    def test_symmetric_and_order_free(self, rng):
        X = rng.standard_normal((60, 2))
        Y = rng.standard_normal((80, 2)) + 0.5
        d1 = energy_distance(X, Y)
        assert d1 == pytest.approx(energy_distance(Y, X), rel=1e-12)
        assert d1 == pytest.approx(energy_distance(X[::-1], rng.permutation(Y)), rel=1e-12)
        assert d1 > 0

    def test_one_dimensional_matches_scipy(self, rng):
        u, v = rng.standard_normal(200), rng.standard_normal(150) * 2
        assert energy_distance(u[:, None], v[:, None]) == pytest.approx(stats.energy_distance(u, v), rel=1e-9)


@pytest.fixture(scope="module")
def scalar_probe():
    m = BekkModel(C=[[1.0]], A=[[[math.sqrt(0.2)]]], B=[[[math.sqrt(0.7)]]])
    T = attracting_point(m)
    return convergence_probe(m, [T, T.scaled(5.0)], chains_per_start=300, horizon=60, seed=1)


class TestConvergence:
    def test_geometric_decay(self, scalar_probe):
        for fit in scalar_probe.fits:
            assert fit["ok"] and fit["r2"] >= 0.9
            assert 0 < fit["rate"] < 1
            lo, hi = fit["rate_ci95"]
            assert lo <= fit["rate"] <= hi

    def test_flat_after_transient(self, scalar_probe):
        tail = scalar_probe.distance_curve[0, 40:]
        assert np.mean(tail <= 1.5 * scalar_probe.noise_floor) >= 0.8

    def test_shapes_and_nonnegative(self, scalar_probe):
        assert scalar_probe.distance_curve.shape == (2, 60)
        assert scalar_probe.per_coordinate.shape == (2, 60, 2)
        assert (scalar_probe.distance_curve >= 0).all()
        assert not any(o["flagged"] for o in scalar_probe.off_state)

    def test_csv(self, scalar_probe, tmp_path):
        text = scalar_probe.to_csv()
        lines = text.strip().splitlines()
        assert lines[0] == "lag,start,distance"
        assert len(lines) == 1 + 2 * 60
        path = tmp_path / "c.csv"
        scalar_probe.to_csv(path)
        assert path.read_text() == text

    def test_deterministic(self, scalar_model):
        a = convergence_probe(scalar_model, chains_per_start=100, horizon=5, seed=3, n_reference=200)
        b = convergence_probe(scalar_model, chains_per_start=100, horizon=5, seed=3, n_reference=200)
        np.testing.assert_array_equal(a.distance_curve, b.distance_curve)

    def test_refuses_few_chains(self, scalar_model):
        with pytest.raises(DomainError, match="at least 100"):
            convergence_probe(scalar_model, chains_per_start=50)

    def test_refuses_non_stationary(self):
        m = BekkModel([[1.0]], [[[math.sqrt(0.6)]]], [[[math.sqrt(0.6)]]])
        with pytest.raises(DomainError):
            convergence_probe(m)

    def test_ks_metric(self, scalar_model):
        rep = convergence_probe(scalar_model, chains_per_start=100, horizon=5, seed=3, n_reference=200,
                                metric="ks")
        assert ((rep.distance_curve >= 0) & (rep.distance_curve <= 1)).all()

    def test_off_manifold_coordinate(self):
        ex = get_example("ex-3.3.11")
        m = ex.model()
        rep = convergence_probe(m, [ex.start("on"), ex.start("off")], chains_per_start=200,
                                horizon=30, seed=2, n_reference=400)
        s22 = rep.coordinate_labels.index("sigma[0][1,1]")
        assert s22 in rep.atomic
        np.testing.assert_array_equal(rep.per_coordinate[1, :, s22], 1.0)
        np.testing.assert_array_equal(rep.per_coordinate[0, :, s22], 0.0)
        assert rep.off_state[1]["flagged"] and not rep.off_state[0]["flagged"]


class TestOrbitDimension:
    def test_degenerate_example(self):
        rep = orbit_dimension(get_example("ex-3.3.10").model(), n_samples=200, depth=20, seed=0)
        assert rep.ambient_dim == 5
        assert rep.linear_rank <= 4 and rep.degenerate

    def test_generic_full(self):
        rep = orbit_dimension(get_example("ex-2x2").model(), n_samples=200, depth=20, seed=0)
        assert rep.linear_rank == rep.ambient_dim and not rep.degenerate

    def test_constant_variance(self):
        rep = orbit_dimension(get_example("ex-3.3.11").model(), n_samples=100, depth=10, seed=0)
        assert {1, 2} <= set(rep.constant_coordinates)
        assert rep.degenerate

    def test_monotone_in_coverage(self, rng):
        m = oracles.random_model(rng, 2, 1, 1)
        ranks = [orbit_dimension(m, n_samples=n, depth=k, seed=0).linear_rank
                 for n, k in [(2, 1), (5, 2), (50, 10)]]
        assert ranks == sorted(ranks)

    def test_quadratic_features_bounded(self):
        rep = orbit_dimension(get_example("ex-3.3.10").model(), n_samples=100, depth=10, seed=0)
        assert rep.quadratic_rank <= rep.feature_dim == 5 + 15


class TestMoments:
    def test_scalar(self, scalar_model):
        tr = run(scalar_model, n=200_000, burn_in=1000, seed=11)
        rep = moment_check(tr, scalar_model)
        assert rep.batch_length == math.isqrt(200_000)
        assert abs(rep.z_xx[0]) <= 4 and abs(rep.z_sigma[0]) <= 4 and abs(rep.z_tower[0]) <= 4

    def test_constant_volatility(self):
        m = BekkModel(np.array([[2.0, 0.5], [0.5, 1.0]]), [np.zeros((2, 2))], [np.zeros((2, 2))])
        tr = run(m, n=10_000, seed=0)
        rep = moment_check(tr, m)
        np.testing.assert_allclose(matcore.unvech(rep.mean_sigma), m.C, rtol=1e-12)
        assert np.all(np.abs(rep.z_sigma) < 1e-3)

    def test_calibration_on_iid_surrogate(self, rng):
        Sigma = np.array([[2.0, 0.6], [0.6, 1.0]])
        R = matcore.psd_sqrt(Sigma)
        zs = []
        for _ in range(300):
            xs = rng.standard_normal((2500, 2)) @ R.T
            vs = np.tile(matcore.vech(Sigma), (2500, 1))
            zs.append(moment_check_arrays(xs, vs, Sigma).z_xx)
        zs = np.array(zs)
        assert np.all(np.abs(zs.mean(axis=0)) < 0.25)
        assert np.all(np.abs(zs.std(axis=0) - 1) < 0.2)

    def test_diverged(self):
        m = BekkModel([[1.0]], [[[math.sqrt(0.6)]]], [[[math.sqrt(0.6)]]])
        with pytest.warns(RuntimeWarning):
            tr = run(m, n=100_000, seed=0)
        with pytest.raises(DomainError):
            moment_check(tr, m)

    def test_wrong_model(self, scalar_model, rng):
        tr = run(scalar_model, n=100, seed=0)
        with pytest.raises(DomainError):
            moment_check(tr, oracles.random_model(rng, 1, 1, 1))

    def test_batch_means(self):
        x = np.arange(100.0)
        mean, se, b, nb = batch_means(x)
        assert (b, nb) == (10, 10) and mean[0] == pytest.approx(49.5)
        with pytest.raises(DomainError):
            batch_means(np.ones(3), batch_length=3)

    def test_against_solved_sigma(self, rng):
        m = oracles.random_model(rng, 2, 1, 1, rho=0.6)
        tr = run(m, n=100_000, burn_in=500, seed=5)
        rep = moment_check(tr, m)
        np.testing.assert_allclose(rep.target, matcore.vech(stationary_covariance(m)))
        assert rep.max_abs_z < 5
