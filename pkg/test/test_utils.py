"""
Test script for utils.py functions.
"""

import logging
import os

import numpy as np
import pytest
from mixsim.utils import (
    RngStream,
    StateSpace,
    check_probability_vector,
    check_stochastic_matrix,
    make_stream,
    sample_categorical,
    setup_logger,
    stationary_distribution,
)


class TestRngStream(object):
    """
    Tests for the counter-based random streams.
    """

    def test_bad_inputs(self):
        with pytest.raises(TypeError):
            RngStream(1.5)

        with pytest.raises(TypeError):
            RngStream(1, stream_id=True)

        with pytest.raises(ValueError):
            RngStream(-1)

        with pytest.raises(ValueError):
            make_stream(1, 0).substream(-1)

    def test_reproducible(self):
        a = make_stream(42, 7).uniform(100)
        b = make_stream(42, 7).uniform(100)
        assert np.array_equal(a, b)

        # different stream ids and seeds give different draws
        assert not np.array_equal(a, make_stream(42, 8).uniform(100))
        assert not np.array_equal(a, make_stream(43, 7).uniform(100))

    def test_substreams(self):
        rng = make_stream(3, 1)
        sub = rng.substream(0)
        assert sub.counter == 1 << 64
        assert rng.substream(4).counter == 5 << 64
        assert sub.stream_id == rng.stream_id

        assert np.array_equal(rng.substream(2).uniform(10), make_stream(3, 1).substream(2).uniform(10))
        assert not np.array_equal(rng.substream(0).uniform(10), rng.substream(1).uniform(10))

    def test_derive(self):
        rng = make_stream(3, 1).substream(2)
        derived = rng.derive(1 << 40)
        assert derived.stream_id == 1 + (1 << 40)
        assert derived.counter == rng.counter
        assert not np.array_equal(derived.uniform(10), make_stream(3, 1).substream(2).uniform(10))

    def test_draw_shapes(self):
        rng = make_stream(0, 0)
        assert rng.normal((3, 2)).shape == (3, 2)
        assert rng.gumbel(5).shape == (5,)
        ints = rng.integers(0, 4, size=1000)
        assert ints.min() >= 0 and ints.max() <= 3


class TestStateSpace(object):
    """
    Tests for finite state spaces and the lag embedding.
    """

    def test_bad_size(self):
        with pytest.raises(TypeError):
            StateSpace(2.0)

        with pytest.raises(ValueError):
            StateSpace(0)

    def test_container(self):
        space = StateSpace(3)
        assert len(space) == 3
        assert 2 in space
        assert 3 not in space
        assert space == StateSpace(3)
        assert space != StateSpace(4)
        assert np.array_equal(space.states, [0, 1, 2])

    def test_encode_decode(self):
        space = StateSpace(3)
        assert space.embedded_size(2) == 9

        # most recent state first
        assert space.encode([2, 1]) == 7
        assert np.array_equal(space.decode(7, 2), [2, 1])

        codes = np.arange(27)
        assert np.array_equal(space.encode(space.decode(codes, 3)), codes)


class TestStochastic(object):
    """
    Tests for stochastic matrix helpers.
    """

    def test_check_stochastic_matrix(self):
        with pytest.raises(ValueError):
            check_stochastic_matrix([[0.5, 0.5]])

        with pytest.raises(ValueError):
            check_stochastic_matrix([[1.2, -0.2], [0.5, 0.5]])

        with pytest.raises(ValueError):
            check_stochastic_matrix([[0.5, 0.6], [0.5, 0.5]])

        with pytest.raises(ValueError):
            check_stochastic_matrix([[np.nan, 1.0], [0.5, 0.5]])

        stack = check_stochastic_matrix(np.tile(np.eye(2), (3, 1, 1)))
        assert stack.shape == (3, 2, 2)

    def test_check_probability_vector(self):
        with pytest.raises(ValueError):
            check_probability_vector([])

        with pytest.raises(ValueError):
            check_probability_vector([0.5, 0.6])

        assert np.array_equal(check_probability_vector([0.25, 0.75]), [0.25, 0.75])

    def test_stationary_distribution(self):
        P = np.array([[0.9, 0.1], [0.2, 0.8]])
        pi = stationary_distribution(P)
        assert np.allclose(pi, [2.0 / 3.0, 1.0 / 3.0])
        assert np.allclose(pi @ P, pi)

        # reducible chains have no unique stationary law
        with pytest.raises(ValueError):
            stationary_distribution(np.eye(2))

    def test_sample_categorical(self):
        probs = np.array([[0.2, 0.0, 0.8]] * 4)
        u = np.array([0.0, 0.1999, 0.2, 0.9999])
        assert np.array_equal(sample_categorical(probs, u), [0, 0, 2, 2])

        # never returns zero-probability states
        draws = sample_categorical(np.tile([0.5, 0.0, 0.5], (1000, 1)), make_stream(1, 1).uniform(1000))
        assert not np.any(draws == 1)

        # mass short of 1 from rounding stays on the last positive state
        probs = np.array([[0.5, 0.5 - 1e-12, 0.0], [0.0, 1.0 - 1e-12, 0.0]])
        assert np.array_equal(sample_categorical(probs, [1.0 - 1e-13, 1.0 - 1e-13]), [1, 1])

        stacked = np.tile([[0.3, 0.7], [1.0, 0.0]], (3, 1, 1))
        assert np.array_equal(sample_categorical(stacked, np.full((3, 2), 0.99)), [[1, 0]] * 3)


def test_setup_logger(tmp_path):
    logger = setup_logger(outdir=str(tmp_path), label="testlog", log_level="DEBUG")
    assert logger.level == logging.DEBUG

    nhandlers = len(logger.handlers)
    setup_logger(outdir=str(tmp_path), label="testlog", log_level="INFO")
    assert len(logger.handlers) == nhandlers
    assert logger.level == logging.INFO

    logger.info("written")
    assert os.path.isfile(os.path.join(str(tmp_path), "testlog.log"))

    with pytest.raises(ValueError):
        setup_logger(log_level="NOTALEVEL")
