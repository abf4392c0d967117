"""
Test script for contraction.py.
"""

import numpy as np
import pytest
from scipy import stats
from mixsim.contraction import (
    ContractionModelSpec,
    ShapeCheck,
    binary_step,
    check_decay_shape,
    derived_decay,
    disagreement_probability,
    fit_decay_rate,
    intensity_path,
    lambda_eval,
    poisson_inv_cdf,
    simulate_truncated_coupled,
    step,
    verify_mean_lipschitz,
)
from mixsim.processes import CovariateProcessSpec, JointEnvironment, NoiseSpec
from mixsim.utils import make_stream

COVARIATES = CovariateProcessSpec("iid", {"probs": [0.5, 0.5], "values": [[1.0], [2.0]]})


def environment(noise="uniform01", covariates=COVARIATES):
    return JointEnvironment(covariates, NoiseSpec(noise))


def ingarch():
    return ContractionModelSpec("ingarch_identity", 0.3, 0.4, [0.1], environment())


def binary():
    return ContractionModelSpec("binary", 0.5, 0.3, [0.1], environment())


class TestPoissonInvCdf(object):
    """
    Tests for the Poisson quantile function.
    """

    def test_values(self):
        assert poisson_inv_cdf(1.0, 0.5) == 1
        assert poisson_inv_cdf(1.0, 0.2) == 0
        assert poisson_inv_cdf(1.0, 0.9) == 2
        assert poisson_inv_cdf(0.0, 0.999) == 0
        assert isinstance(poisson_inv_cdf(1.0, 0.5), int)

        with pytest.raises(ValueError):
            poisson_inv_cdf(-1.0, 0.5)

        with pytest.raises(ValueError):
            poisson_inv_cdf(np.inf, 0.5)

    def test_against_scipy(self):
        rng = make_stream(9, 1)
        lam = 50.0 * rng.uniform(500) + 0.01
        u = rng.uniform(500)
        assert np.array_equal(poisson_inv_cdf(lam, u), stats.poisson.ppf(u, lam).astype(np.int64))

    def test_large_means(self):
        k = poisson_inv_cdf(np.array([1000.0, 1.0]), 0.5)
        assert 990 <= k[0] <= 1010
        assert k[1] == 1


def test_binary_step():
    assert binary_step(0.0, 0.6) == 1
    assert binary_step(0.0, 0.4) == 0
    assert np.array_equal(binary_step([0.0, 0.0], [0.4, 0.6], F="gaussian"), [0, 1])
    assert binary_step(100.0, 1e-6, F=lambda lam: np.ones_like(lam)) == 1


class TestContractionModelSpec(object):
    """
    Tests for the ContractionModelSpec class.
    """

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            ContractionModelSpec("ingarch", 0.3, 0.4, [0.1], environment())

        with pytest.raises(TypeError):
            ContractionModelSpec("binary", 0.3, 0.4, [0.1], COVARIATES)

        with pytest.raises(ValueError):
            ContractionModelSpec("binary", 0.3, 0.4, [0.1], environment("gaussian_vector"))

        with pytest.raises(ValueError):
            ContractionModelSpec("binary", 0.3, 0.4, [0.1], environment(), cdf="probit")

        with pytest.raises(ValueError):
            ContractionModelSpec("binary", 0.3, 0.4, [0.1, 0.2], environment())

        # not contracting
        with pytest.raises(ValueError):
            ContractionModelSpec("ingarch_identity", 0.6, 0.5, [0.1], environment())

        with pytest.raises(ValueError):
            ContractionModelSpec("binary", 0.3, 0.4, [0.1], environment(), truncation_depth=0)

    def test_properties(self):
        spec = ContractionModelSpec("binary", 0.6, 1.0, [0.1], environment())
        assert spec.lipschitz == 0.25
        assert np.isclose(spec.contraction, 0.85)

        spec = ContractionModelSpec("binary", 0.5, 0.3, [0.1], environment(), cdf="gaussian")
        assert np.isclose(spec.lipschitz, 1.0 / np.sqrt(2.0 * np.pi))

        assert binary().truncation_depth == 40
        assert ContractionModelSpec("binary", 0.0, 0.3, [0.1], environment()).truncation_depth == 1

    def test_derived_decay(self):
        decay = derived_decay(binary())
        assert decay.a[0] == 0.0
        assert np.isclose(decay.a[1], 0.25 * 0.3)
        assert np.isclose(decay.a[3], 0.25 * 0.3 * 0.25)
        assert np.isclose(decay.b[2], 0.25 * 0.1 * 0.5)
        assert np.isclose(decay.a_sum, 0.25 * 0.3 / 0.5)


class TestIntensity(object):
    """
    Tests for the intensity recursion.
    """

    def test_series_matches_recursion(self):
        spec = ingarch()
        rng = make_stream(10, 1)
        y = np.floor(5.0 * rng.uniform(30))
        x = rng.uniform((30, 1))

        lam = intensity_path(spec, y, x)
        assert lam[0] == 0.0
        assert np.isclose(lam[-1], lambda_eval(spec, y[::-1], x[::-1]))
        assert np.isclose(lam[5], lambda_eval(spec, y[:5][::-1], x[:5][::-1]))

    def test_step(self):
        spec = ingarch()
        y, lam, count = step(spec, (1.0, 2.0), [1.0], 0.2)
        assert np.isclose(lam, 1.2)
        assert y == 0 and count == 0

        y, lam, count = step(spec, (np.ones(2), np.full(2, 2.0)), np.ones((2, 1)), np.array([0.2, 0.9]))
        assert np.array_equal(count, [0, 3])

        spec = ContractionModelSpec("ingarch_log", 0.3, 0.4, [0.1], environment())
        y, lam, count = step(spec, (0.0, 0.0), [1.0], 0.9)
        assert count == poisson_inv_cdf(np.exp(0.1), 0.9)
        assert np.isclose(y, np.log1p(count))

        spec = binary()
        y, lam, count = step(spec, (0.0, 1.0), [0.0], 0.6)
        assert np.isclose(lam, 0.3)
        assert y == 1 and count == 1

    def test_disagreement_probability(self):
        spec = binary()
        value = disagreement_probability(spec, [1.0], [0.0], [[0.0]])
        assert np.isclose(value, abs(spec.link_cdf(0.3) - spec.link_cdf(0.0)))

        with pytest.raises(ValueError):
            disagreement_probability(ingarch(), [1.0], [0.0], [[0.0]])


class TestCoupling(object):
    """
    Tests for the truncated coupling and its shape check.
    """

    def test_curve(self):
        spec = ingarch()
        curve = simulate_truncated_coupled(spec, 5, 40, make_stream(11, 1), replicates=5000)

        assert np.array_equal(curve.t, np.arange(6, 41))
        assert np.array_equal(curve.lags, np.arange(1, 36))
        assert curve.delta_hat[0] > 0.0
        assert curve.delta_hat[-1] <= curve.delta_hat[0]
        assert curve.delta_hat[-1] < 1e-2
        assert np.all(curve.disagree_hat <= 1.0)

        table = curve.to_table()
        assert list(table.colnames) == ["t", "delta_hat", "disagree_hat", "se"]
        assert len(table) == 35

        again = simulate_truncated_coupled(spec, 5, 40, make_stream(11, 1), replicates=5000)
        assert np.array_equal(curve.delta_hat, again.delta_hat)

    def test_shape(self):
        for spec in (ingarch(), binary()):
            curve = simulate_truncated_coupled(spec, 20, 50, make_stream(12, 1), replicates=20000)
            check = check_decay_shape(spec, curve, calibration_lags=3, max_lag=30)

            assert check.L_hat > 0.0
            assert np.all(check.lags <= 30)
            assert check.dominated, check.violations

    def test_shape_tolerance(self):
        lags = np.arange(1, 7)
        omegas = 0.5 ** lags
        values = omegas.copy()
        values[3] += 0.02  # lag 4, within three standard errors
        values[5] += 0.1  # lag 6, beyond them
        se = np.full(6, 0.01)

        check = ShapeCheck(lags, values, se, omegas, 1.0, 3, (-1.0, 0.0), (-1.0, 0.0))
        assert check.tolerance == 3.0
        assert check.violations.tolist() == [6]
        assert not check.dominated

        strict = ShapeCheck(lags, values, se, omegas, 1.0, 3, (-1.0, 0.0), (-1.0, 0.0), tolerance=0.0)
        assert strict.violations.tolist() == [4, 6]

        # calibration lags are never checked
        values[0] += 1.0
        assert strict.violations.tolist() == [4, 6]

        spec = binary()
        curve = simulate_truncated_coupled(spec, 20, 40, make_stream(13, 1), replicates=2000)
        loose = check_decay_shape(spec, curve, max_lag=15)
        exact = check_decay_shape(spec, curve, max_lag=15, tolerance=0.0)
        assert exact.tolerance == 0.0
        assert set(loose.violations.tolist()) <= set(exact.violations.tolist())

        with pytest.raises(ValueError):
            check_decay_shape(spec, curve, tolerance=-1.0)

    def test_errors(self):
        spec = binary()
        with pytest.raises(ValueError):
            simulate_truncated_coupled(spec, 0, 40, make_stream(1, 1))

        with pytest.raises(ValueError):
            simulate_truncated_coupled(spec, 40, 40, make_stream(1, 1))

        with pytest.raises(ValueError):
            simulate_truncated_coupled(spec, 5, 40, make_stream(1, 1), burn_in=-1)


def test_fit_decay_rate():
    lags = np.arange(1, 11)
    slope, se = fit_decay_rate(3.0 * 0.5 ** lags, lags)
    assert np.isclose(slope, np.log(0.5))
    assert se < 1e-10

    with pytest.raises(ValueError):
        fit_decay_rate([1.0, 0.0, 0.0, 0.0], [1, 2, 3, 4])


def test_verify_mean_lipschitz():
    exact, bound = verify_mean_lipschitz(1.0, 2.0)
    assert np.isclose(exact, 1.0, atol=1e-10)
    assert bound == 1.0

    exact, bound = verify_mean_lipschitz(0.5, 0.7)
    assert np.isclose(exact, 0.2, atol=1e-10)
    assert np.isclose(bound, 0.2)

    for lam, lam_prime in [(0.0, 0.5), (-1.0, 1.0), (-2.0, -1.5)]:
        exact, bound = verify_mean_lipschitz(lam, lam_prime, link="log")
        assert 0.0 < exact <= bound + 1e-12

    with pytest.raises(ValueError):
        verify_mean_lipschitz(0.0, 1.0)

    with pytest.raises(ValueError):
        verify_mean_lipschitz(1.0, 2.0, link="sqrt")
