"""
Test script for processes.py classes and functions.
"""

import numpy as np
import pytest
from mixsim.bounds import DecaySequence
from mixsim.mixing import alpha_markov_exact
from mixsim.processes import (
    CovariateProcessSpec,
    ExogeneityMode,
    JointEnvironment,
    NoiseSpec,
    alpha_envelope,
    gen_covariates,
)
from mixsim.utils import make_stream


class TestCovariateProcessSpec(object):
    """
    Tests for covariate process specifications.
    """

    transition = [[0.9, 0.1], [0.2, 0.8]]

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            CovariateProcessSpec("arma")

        with pytest.raises(KeyError):
            CovariateProcessSpec("finite_markov", {})

        with pytest.raises(KeyError):
            CovariateProcessSpec("iid", {"probs": [1.0], "phi": 0.5})

        with pytest.raises(ValueError):
            CovariateProcessSpec("gaussian_ar1_clipped", {"phi": 1.0, "sigma": 1.0, "bound": 1.0})

        with pytest.raises(ValueError):
            CovariateProcessSpec("gaussian_ar1_clipped", {"phi": 0.5, "sigma": 1.0, "bound": -1.0})

        with pytest.raises(ValueError):
            CovariateProcessSpec("iid", {"probs": [0.5, 0.6]})

        # the given law is not stationary
        with pytest.raises(ValueError):
            CovariateProcessSpec("finite_markov", {"transition": self.transition, "stationary": [0.5, 0.5]})

        # one row of values per state
        with pytest.raises(ValueError):
            CovariateProcessSpec("finite_markov", {"transition": self.transition, "values": [[1.0], [2.0], [3.0]]})

    def test_finite(self):
        spec = CovariateProcessSpec("finite_markov", {"transition": self.transition, "values": [[-1.0, 0.0], [1.0, 2.0]]})
        assert spec.finite
        assert spec.nstates == 2
        assert spec.dimension == 2
        assert np.allclose(spec.stationary, [2.0 / 3.0, 1.0 / 3.0])
        assert np.array_equal(spec.observe(np.array([1, 0])), [[1.0, 2.0], [-1.0, 0.0]])
        assert spec.support().shape == (2, 2)

        iid = CovariateProcessSpec("iid", {"probs": [0.25, 0.75]})
        assert np.allclose(iid.transition, [[0.25, 0.75], [0.25, 0.75]])
        assert np.array_equal(iid.values[:, 0], [0.0, 1.0])

    def test_ar(self):
        spec = CovariateProcessSpec("gaussian_ar1_clipped", {"phi": 0.5, "sigma": 1.0, "bound": 1.5}, dimension=2)
        assert not spec.finite
        assert spec.nstates is None
        assert spec.innovation_dimension == 2

        grid = spec.support(5)
        assert grid.shape == (25, 2)
        assert np.max(np.abs(grid)) == 1.5

        x = gen_covariates(spec, 500, make_stream(1, 1))
        assert x.shape == (500, 2)
        assert np.max(np.abs(x)) <= 1.5


class TestNoiseSpec(object):
    """
    Tests for noise laws.
    """

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            NoiseSpec(dimension=0)

        with pytest.raises(ValueError):
            NoiseSpec("cauchy")

        with pytest.raises(KeyError):
            NoiseSpec("custom_cdf")

        with pytest.raises(ValueError):
            NoiseSpec("custom_cdf", parameters={"distribution": "notadistribution"})

        # discrete laws are rejected
        with pytest.raises(ValueError):
            NoiseSpec("custom_cdf", parameters={"distribution": "poisson", "shape": [1.0]})

        with pytest.raises(ValueError):
            NoiseSpec("gaussian_vector", parameters={"scale": 0.0})

    def test_from_uniform(self):
        u = np.array([0.0, 0.5, 0.975])

        assert np.array_equal(NoiseSpec().from_uniform(u), u)

        gauss = NoiseSpec("gaussian_vector", parameters={"scale": 2.0}).from_uniform(u)
        assert np.isfinite(gauss[0])
        assert gauss[1] == 0.0
        assert np.isclose(gauss[2], 2.0 * 1.959963984540054)

        gumbel = NoiseSpec("gumbel_vector").from_uniform(u)
        assert np.isclose(gumbel[1], -np.log(np.log(2.0)))

        custom = NoiseSpec("custom_cdf", parameters={"distribution": "logistic"})
        assert np.isclose(custom.from_uniform(np.array([0.5]))[0], 0.0)
        assert np.isclose(custom.distribution.cdf(0.0), 0.5)


def test_exogeneity_mode():
    with pytest.raises(ValueError):
        ExogeneityMode("weak")

    with pytest.raises(ValueError):
        ExogeneityMode("sequential", correlation=1.5)

    assert ExogeneityMode("strict", correlation=0.7).effective_correlation == 0.0
    assert ExogeneityMode("sequential", correlation=0.7).effective_correlation == 0.7


class TestJointEnvironment(object):
    """
    Tests for the joint covariate and noise generator.
    """

    @classmethod
    def setup_class(cls):
        cls.chain = CovariateProcessSpec("finite_markov", {"transition": [[0.0, 1.0], [0.5, 0.5]]})
        cls.ar = CovariateProcessSpec("gaussian_ar1_clipped", {"phi": 0.7, "sigma": 1.0, "bound": 2.0})

    def test_bad_inputs(self):
        with pytest.raises(TypeError):
            JointEnvironment("finite_markov")

        with pytest.raises(TypeError):
            JointEnvironment(self.chain, noise="uniform01")

        env = JointEnvironment(self.chain)
        with pytest.raises(ValueError):
            env.forward(0, make_stream(1, 1))

        with pytest.raises(ValueError):
            env.forward(5, make_stream(1, 1), size=3, initial=[0, 1])

        with pytest.raises(ValueError):
            env.backward(np.zeros(3, dtype=int), 0, make_stream(1, 1), make_stream(1, 2))

    def test_forward_stationary(self):
        env = JointEnvironment(self.chain, noise=NoiseSpec())
        path = env.forward(20, make_stream(5, 1), size=20000)

        assert path.latent.shape == (20000, 20)
        assert path.x.shape == (20000, 20, 1)
        assert path.eps.shape == (20000, 20, 1)
        assert np.array_equal(path.times, np.arange(20))

        # stationary law (1/3, 2/3) at every time
        assert abs(np.mean(path.latent[:, 0] == 0) - 1.0 / 3.0) < 0.02
        assert abs(np.mean(path.latent[:, -1] == 0) - 1.0 / 3.0) < 0.02

        # 0 -> 0 is impossible
        assert not np.any((path.latent[:, :-1] == 0) & (path.latent[:, 1:] == 0))

    def test_forward_initial(self):
        env = JointEnvironment(self.chain, noise=NoiseSpec())
        path = env.forward(4, make_stream(5, 1), size=10, initial=np.ones(10, dtype=int))
        assert np.all(path.latent[:, 0] == 1)

        # the time-0 entries are unpaired
        assert np.all(np.isnan(path.innovations[:, 0]))
        assert np.all(np.isnan(path.eps[:, 0]))
        assert not np.any(np.isnan(path.eps[:, 1:]))

    def test_backward_consistent(self):
        for spec in (self.chain, self.ar):
            env = JointEnvironment(spec, noise=NoiseSpec())
            latent_end = env.stationary_latent(make_stream(2, 1), 500)
            path = env.backward(latent_end, 10, make_stream(2, 2), make_stream(2, 3), end=-4)

            assert path.start == -14
            assert path.length == 11
            assert np.array_equal(path.latent[:, -1], latent_end)
            assert np.all(np.isnan(path.innovations[:, 0]))

            # each innovation drives the previous state to the next one
            for t in range(1, path.length):
                stepped = spec.step(path.latent[:, t - 1], path.innovations[:, t])
                if spec.finite:
                    assert np.array_equal(stepped, path.latent[:, t])
                else:
                    assert np.allclose(stepped, path.latent[:, t])

        # time reversal keeps impossible transitions impossible
        env = JointEnvironment(self.chain)
        path = env.backward(np.zeros(1000, dtype=int), 20, make_stream(3, 1), make_stream(3, 2))
        assert not np.any((path.latent[:, :-1] == 0) & (path.latent[:, 1:] == 0))

    def test_prepend(self):
        env = JointEnvironment(self.chain, noise=NoiseSpec())
        latent0 = env.stationary_latent(make_stream(4, 1), 50)
        earlier = env.backward(latent0, 5, make_stream(4, 2), make_stream(4, 3))
        later = env.forward(6, make_stream(4, 4), size=50, initial=latent0)

        joined = later.prepend(earlier)
        assert joined.length == 11
        assert joined.start == -5
        assert np.array_equal(joined.latent[:, 5], latent0)
        assert np.all(np.isfinite(joined.eps[:, 1:]))

        with pytest.raises(ValueError):
            later.prepend(env.backward(1 - latent0, 5, make_stream(4, 2), make_stream(4, 3)))

    def test_sequential_correlation(self):
        noise = NoiseSpec("gaussian_vector")
        seq = JointEnvironment(self.ar, noise=noise, exogeneity=ExogeneityMode("sequential", 0.5))
        path = seq.forward(3, make_stream(6, 1), size=20000)
        corr = np.corrcoef(path.eps[:, 1:, 0].ravel(), path.innovations[:, 1:, 0].ravel())[0, 1]
        assert abs(corr - 0.5) < 0.03

        # noise is independent of the previous innovation
        lagged = np.corrcoef(path.eps[:, 2, 0], path.innovations[:, 1, 0])[0, 1]
        assert abs(lagged) < 0.03

        strict = JointEnvironment(self.ar, noise=noise)
        path = strict.forward(3, make_stream(6, 1), size=20000)
        corr = np.corrcoef(path.eps[:, 1:, 0].ravel(), path.innovations[:, 1:, 0].ravel())[0, 1]
        assert abs(corr) < 0.03


def test_alpha_envelope():
    iid = CovariateProcessSpec("iid", {"probs": [0.5, 0.5]})
    envelope = alpha_envelope(iid)
    assert isinstance(envelope, DecaySequence)
    assert envelope.tail == "zero"
    assert envelope[3] == 0.0

    P = np.array([[0.9, 0.1], [0.2, 0.8]])
    chain = CovariateProcessSpec("finite_markov", {"transition": P})
    envelope = alpha_envelope(chain, n_max=20)
    assert envelope.tail == "geometric"
    assert np.isclose(envelope[1], alpha_markov_exact(chain.stationary, P, 1))
    assert envelope[0] <= 0.25

    # the tail bounds the exact coefficients
    for n in (25, 40):
        assert envelope[n] >= alpha_markov_exact(chain.stationary, P, n)

    ar = CovariateProcessSpec("gaussian_ar1_clipped", {"phi": 0.5, "sigma": 1.0, "bound": 1.0})
    with pytest.raises(ValueError):
        alpha_envelope(ar)
