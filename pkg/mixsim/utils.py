"""
A selection of general utility functions: logging, reproducible random
streams, finite state spaces and stochastic matrix helpers.
"""

import logging
import os
import sys

import numpy as np
from scipy.linalg import null_space

#: the package logger
logger = logging.getLogger("mixsim")

# 64-bit mask for Philox keys
UINT64_MASK = 0xFFFFFFFFFFFFFFFF

# default absolute tolerance on row sums of stochastic matrices
STOCHASTIC_ATOL = 1e-10


class NonSummableError(ValueError):
    """
    Raised when an infinite sum cannot be given a certified tail.
    """


class CoalescenceError(RuntimeError):
    """
    Raised when backward coupling does not coalesce within the allowed depth.
    """


class ConfigError(ValueError):
    """
    Raised when an experiment configuration does not validate.
    """


def setup_logger(outdir=None, label=None, log_level="INFO"):
    """
    Set up the ``mixsim`` logger. Calling it more than once does not add
    duplicate handlers.

    Parameters
    ----------
    outdir: str
        If given, a log file ``<outdir>/<label>.log`` is also written.
    label: str
        The log file label (defaults to "mixsim").
    log_level: str, int
        The logging level, e.g., "INFO" or "DEBUG".

    Returns
    -------
    logger: :class:`logging.Logger`
    """

    if isinstance(log_level, str):
        try:
            level = getattr(logging, log_level.upper())
        except AttributeError:
            raise ValueError("log_level '{}' not understood".format(log_level))
    else:
        level = int(log_level)

    logger.propagate = False
    logger.setLevel(level)

    formatter = logging.Formatter(
        "%(asctime)s %(name)s %(levelname)-8s: %(message)s", datefmt="%H:%M"
    )

    if not any(type(h) is logging.StreamHandler for h in logger.handlers):
        stream_handler = logging.StreamHandler(sys.stdout)
        stream_handler.setFormatter(formatter)
        logger.addHandler(stream_handler)

    if outdir is not None:
        os.makedirs(outdir, exist_ok=True)
        logfile = os.path.join(outdir, "{}.log".format(label or "mixsim"))
        if not any(
            isinstance(h, logging.FileHandler)
            and os.path.abspath(h.baseFilename) == os.path.abspath(logfile)
            for h in logger.handlers
        ):
            file_handler = logging.FileHandler(logfile)
            file_handler.setFormatter(formatter)
            logger.addHandler(file_handler)

    for handler in logger.handlers:
        handler.setLevel(level)

    return logger


class StateSpace(object):
    """
    A finite state space with contiguous labels ``0, ..., N-1``.

    Parameters
    ----------
    size: int
        The number of states N.
    """

    def __init__(self, size):
        self.size = size

    @property
    def size(self):
        return self._size

    @size.setter
    def size(self, size):
        if not isinstance(size, (int, np.integer)) or isinstance(size, bool):
            raise TypeError("State space size must be an integer")
        if size < 1:
            raise ValueError("State space size must be positive")
        self._size = int(size)

    @property
    def states(self):
        return np.arange(self.size)

    def __len__(self):
        return self.size

    def __contains__(self, state):
        return 0 <= state < self.size

    def __eq__(self, other):
        return isinstance(other, StateSpace) and other.size == self.size

    def __hash__(self):
        return hash(("StateSpace", self.size))

    def __repr__(self):
        return "StateSpace({})".format(self.size)

    def embedded_size(self, p):
        """
        The size of the lag-embedded space E^p.
        """

        return self.size ** int(p)

    def encode(self, lags):
        """
        Encode lag vectors (most recent first) as embedded state codes.

        Parameters
        ----------
        lags: array_like
            An array whose last axis has length p.

        Returns
        -------
        codes: array_like
        """

        lags = np.asarray(lags, dtype=np.int64)
        p = lags.shape[-1]
        weights = self.size ** np.arange(p - 1, -1, -1, dtype=np.int64)
        return lags @ weights

    def decode(self, codes, p):
        """
        Decode embedded state codes into lag vectors (most recent first).
        """

        codes = np.asarray(codes, dtype=np.int64)
        lags = np.empty(codes.shape + (p,), dtype=np.int64)
        rem = codes.copy()
        for i in range(p - 1, -1, -1):
            lags[..., i] = rem % self.size
            rem //= self.size
        return lags


class RngStream(object):
    """
    A counter-based random number stream. The triple ``(seed, stream_id,
    counter)`` fully determines the draws: the Philox key is built from the
    seed and the stream id and the counter sets the starting block.

    Parameters
    ----------
    seed: int
        A 64-bit integer seed.
    stream_id: int
        A 64-bit integer stream identifier.
    counter: int
        The starting Philox counter (defaults to zero).
    """

    def __init__(self, seed, stream_id=0, counter=0):
        for name, value in (("seed", seed), ("stream_id", stream_id), ("counter", counter)):
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise TypeError("{} must be an integer".format(name))
            if value < 0:
                raise ValueError("{} must be non-negative".format(name))

        self._seed = int(seed) & UINT64_MASK
        self._stream_id = int(stream_id) & UINT64_MASK
        self._counter = int(counter)

        key = np.array([self._seed, self._stream_id], dtype=np.uint64)
        self.bit_generator = np.random.Philox(key=key, counter=self._counter)
        self.generator = np.random.Generator(self.bit_generator)

    @property
    def seed(self):
        return self._seed

    @property
    def stream_id(self):
        return self._stream_id

    @property
    def counter(self):
        return self._counter

    def __repr__(self):
        return "RngStream(seed={}, stream_id={}, counter={})".format(
            self.seed, self.stream_id, self.counter
        )

    def substream(self, index):
        """
        A stream on the same key whose counter starts ``(index + 1) << 64``
        blocks ahead, so replicate blocks never overlap.
        """

        if index < 0:
            raise ValueError("Substream index must be non-negative")
        return RngStream(self.seed, self.stream_id, counter=(int(index) + 1) << 64)

    def spawn(self, stream_id):
        """
        A sibling stream with the same seed and a different stream id.
        """

        return RngStream(self.seed, stream_id)

    def derive(self, offset):
        """
        A stream with the stream id shifted by ``offset`` and the same counter,
        so that derived streams of different substreams stay disjoint.
        """

        return RngStream(self.seed, (self.stream_id + int(offset)) & UINT64_MASK, self.counter)

    def uniform(self, size=None):
        """
        Uniform draws on [0, 1).
        """

        return self.generator.random(size)

    def normal(self, size=None):
        return self.generator.standard_normal(size)

    def gumbel(self, size=None):
        return self.generator.gumbel(size=size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high=high, size=size)


def make_stream(seed, stream_id):
    """
    Create a reproducible random stream.

    Parameters
    ----------
    seed: int
        A 64-bit integer seed.
    stream_id: int
        The stream identifier; different identifiers give independent streams.

    Returns
    -------
    :class:`mixsim.utils.RngStream`
    """

    return RngStream(seed, stream_id)


def check_stochastic_matrix(matrix, atol=STOCHASTIC_ATOL, name="matrix"):
    """
    Check that a matrix (or stack of matrices) is row-stochastic.

    Parameters
    ----------
    matrix: array_like
        A square matrix, or an array of square matrices along the last two
        axes.
    atol: float
        The tolerance on row sums.
    name: str
        A name used in error messages.

    Returns
    -------
    matrix: :class:`numpy.ndarray`
        The matrix as a float array.
    """

    matrix = np.asarray(matrix, dtype=float)

    if matrix.ndim < 2 or matrix.shape[-1] != matrix.shape[-2]:
        raise ValueError("{} must be square".format(name))

    if not np.all(np.isfinite(matrix)):
        raise ValueError("{} contains non-finite values".format(name))

    if np.any(matrix < 0.0):
        raise ValueError("{} contains negative entries".format(name))

    if not np.allclose(matrix.sum(axis=-1), 1.0, rtol=0.0, atol=atol):
        raise ValueError("{} rows must sum to one".format(name))

    return matrix


def check_probability_vector(vector, atol=STOCHASTIC_ATOL, name="vector"):
    """
    Check that a vector is a probability vector and return it as a float array.
    """

    vector = np.asarray(vector, dtype=float)

    if vector.ndim != 1 or len(vector) == 0:
        raise ValueError("{} must be a non-empty one-dimensional array".format(name))

    if np.any(vector < 0.0) or not np.all(np.isfinite(vector)):
        raise ValueError("{} must be non-negative".format(name))

    if abs(vector.sum() - 1.0) > atol:
        raise ValueError("{} must sum to one".format(name))

    return vector


def stationary_distribution(transition):
    """
    The stationary distribution of a row-stochastic matrix, from the null
    space of :math:`P^T - I`.

    Parameters
    ----------
    transition: array_like
        A row-stochastic matrix.

    Returns
    -------
    pi: :class:`numpy.ndarray`
    """

    transition = check_stochastic_matrix(transition, name="transition matrix")
    size = transition.shape[0]

    basis = null_space(transition.T - np.eye(size))

    if basis.shape[1] != 1:
        raise ValueError(
            "transition matrix has {} stationary distributions; give the "
            "stationary law explicitly".format(basis.shape[1])
        )

    pi = np.abs(basis[:, 0])
    return pi / pi.sum()


def sample_categorical(probs, u):
    """
    Inverse-CDF categorical sampling for a batch of probability vectors.

    Parameters
    ----------
    probs: array_like
        An array of shape ``(R, K)`` of probability vectors.
    u: array_like
        An array of ``R`` uniform draws.

    Returns
    -------
    :class:`numpy.ndarray`
        Integer indices in ``0..K-1``. Index ``i`` is returned iff
        ``cdf[i-1] <= u < cdf[i]``; the cdf is closed at the last state with
        positive probability, so zero-probability states are never drawn even
        when rounding leaves ``cdf[-1] < 1``.
    """

    probs = np.asarray(probs, dtype=float)
    u = np.asarray(u, dtype=float)
    nstates = probs.shape[-1]
    last = nstates - 1 - np.argmax(probs[..., ::-1] > 0.0, axis=-1)
    cdf = np.cumsum(probs, axis=-1)
    cdf = np.where(np.arange(nstates) >= last[..., None], np.inf, cdf)
    return (u[..., None] >= cdf).sum(axis=-1)
