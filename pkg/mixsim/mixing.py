"""
Exact strong mixing coefficients of finite joint laws, plug-in estimates
from simulated replicates, and total variation utilities.
"""

import numpy as np
from numba import njit, prange

from .utils import STOCHASTIC_ATOL, check_probability_vector, check_stochastic_matrix, logger

# largest alphabet for which subsets are enumerated
MAX_ENUMERATION_ALPHABET = 20


def tv_distance(mu, nu, both=False):
    """
    The total variation distance :math:`\\frac{1}{2}\\sum_y |\\mu(y) - \\nu(y)|`.

    Parameters
    ----------
    mu, nu: array_like
        Probability vectors of the same length.
    both: bool
        Also return :math:`1 - \\sum_y \\min(\\mu(y), \\nu(y))`.
    """

    mu = check_probability_vector(mu, name="mu")
    nu = check_probability_vector(nu, name="nu")

    if mu.shape != nu.shape:
        raise ValueError("Distributions must have the same length")

    half_l1 = 0.5 * float(np.abs(mu - nu).sum())

    if both:
        return half_l1, 1.0 - float(np.minimum(mu, nu).sum())
    return half_l1


def dobrushin_coefficient(transition):
    """
    The Dobrushin contraction coefficient
    :math:`\\max_{a,b} \\textrm{TV}(P(a, \\cdot), P(b, \\cdot))`.
    """

    transition = check_stochastic_matrix(transition, name="transition matrix")
    diffs = np.abs(transition[:, None, :] - transition[None, :, :]).sum(axis=-1)
    return 0.5 * float(diffs.max())


class JointDistribution(object):
    """
    A joint probability table :math:`p(a, b)` over two finite alphabets.

    Parameters
    ----------
    matrix: array_like
        A non-negative matrix summing to one.
    """

    def __init__(self, matrix):
        self.matrix = matrix

    @property
    def matrix(self):
        return self._matrix

    @matrix.setter
    def matrix(self, matrix):
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))

        if matrix.ndim != 2:
            raise ValueError("A joint distribution must be a matrix")
        if np.any(matrix < 0.0) or not np.all(np.isfinite(matrix)):
            raise ValueError("Joint probabilities must be finite and non-negative")
        if abs(matrix.sum() - 1.0) > STOCHASTIC_ATOL:
            raise ValueError("Joint probabilities must sum to one")

        self._matrix = matrix

    @property
    def shape(self):
        return self._matrix.shape

    @property
    def row_marginal(self):
        return self._matrix.sum(axis=1)

    @property
    def col_marginal(self):
        return self._matrix.sum(axis=0)

    def transpose(self):
        return JointDistribution(self._matrix.T)

    @classmethod
    def from_samples(cls, past, future):
        """
        The empirical joint distribution of paired discrete samples.

        Parameters
        ----------
        past, future: array_like
            Integer (or hashable scalar) labels of equal length; labels are
            compacted to the observed alphabets.
        """

        past = np.asarray(past)
        future = np.asarray(future)

        if past.shape != future.shape or past.ndim != 1 or len(past) == 0:
            raise ValueError("Samples must be non-empty one-dimensional arrays of equal length")

        _, rows = np.unique(past, return_inverse=True)
        _, cols = np.unique(future, return_inverse=True)
        nrows = rows.max() + 1
        ncols = cols.max() + 1

        counts = np.bincount(rows * ncols + cols, minlength=nrows * ncols)
        return cls(counts.reshape(nrows, ncols) / len(past))

    def coarsen(self, rows=None, cols=None):
        """
        Merge alphabet cells.

        Parameters
        ----------
        rows, cols: array_like
            For each original row (column), the label of the merged cell it is
            assigned to. ``None`` leaves that alphabet unchanged.
        """

        rows = np.arange(self.shape[0]) if rows is None else np.asarray(rows, dtype=np.int64)
        cols = np.arange(self.shape[1]) if cols is None else np.asarray(cols, dtype=np.int64)

        if len(rows) != self.shape[0] or len(cols) != self.shape[1]:
            raise ValueError("Cell labels must cover every row and column")

        merged = np.zeros((rows.max() + 1, cols.max() + 1))
        np.add.at(merged, (rows[:, None], cols[None, :]), self._matrix)
        return JointDistribution(merged)


@njit(parallel=True, cache=True)
def _subset_margins(diff):
    # for every non-empty subset S of rows: sum_b max(0, sum_{a in S} diff[a, b])
    nrows, ncols = diff.shape
    nsubsets = 1 << nrows
    out = np.zeros(nsubsets)
    for mask in prange(1, nsubsets):
        total = 0.0
        for b in range(ncols):
            col = 0.0
            for a in range(nrows):
                if (mask >> a) & 1:
                    col += diff[a, b]
            if col > 0.0:
                total += col
        out[mask] = total
    return out


def alpha_exact(joint):
    """
    The strong mixing coefficient
    :math:`\\sup_{S, T} |p(S \\times T) - p_A(S) p_B(T)|` of a finite joint law.

    For a fixed row set :math:`S` the optimal column set contains the columns
    with a positive margin, and the absolute value is covered by the
    complement of :math:`S`, so only row subsets are enumerated (on the
    smaller alphabet).

    Parameters
    ----------
    joint: :class:`~mixsim.mixing.JointDistribution`, array_like
        The joint distribution.

    Returns
    -------
    float
    """

    if not isinstance(joint, JointDistribution):
        joint = JointDistribution(joint)

    matrix = joint.matrix
    if matrix.shape[0] > matrix.shape[1]:
        matrix = matrix.T

    if matrix.shape[0] > MAX_ENUMERATION_ALPHABET:
        raise ValueError(
            "Alphabets of size {} are too large to enumerate (limit {})".format(
                matrix.shape, MAX_ENUMERATION_ALPHABET
            )
        )

    diff = matrix - np.outer(matrix.sum(axis=1), matrix.sum(axis=0))
    return float(_subset_margins(np.ascontiguousarray(diff)).max())


def _check_stationary(pi, transition):
    pi = check_probability_vector(pi, name="stationary vector")
    transition = check_stochastic_matrix(transition, name="transition matrix")

    if len(pi) != transition.shape[0]:
        raise ValueError("Stationary vector and transition matrix sizes differ")
    if np.max(np.abs(pi @ transition - pi)) > STOCHASTIC_ATOL:
        raise ValueError("pi is not stationary for the transition matrix")

    return pi, transition


def alpha_markov_exact(pi, transition, n):
    """
    The mixing coefficient between :math:`X_0` and :math:`X_n` for a stationary
    finite Markov chain, from the joint law :math:`\\pi(a) P^n(a, b)`.

    Parameters
    ----------
    pi: array_like
        The stationary distribution.
    transition: array_like
        The transition matrix.
    n: int
        The lag.
    """

    if n < 0:
        raise ValueError("The lag must be non-negative")

    pi, transition = _check_stationary(pi, transition)
    joint = pi[:, None] * np.linalg.matrix_power(transition, int(n))

    # renormalise rounding in the matrix power
    return alpha_exact(JointDistribution(joint / joint.sum()))


def markov_alpha_sequence(pi, transition, n_max):
    """
    The exact coefficients :func:`~mixsim.mixing.alpha_markov_exact` at lags
    ``0, ..., n_max``.
    """

    pi, transition = _check_stationary(pi, transition)

    out = np.zeros(n_max + 1)
    power = np.eye(len(pi))
    for n in range(n_max + 1):
        joint = pi[:, None] * power
        out[n] = alpha_exact(JointDistribution(joint / joint.sum()))
        power = power @ transition

    return out


class PartitionSpec(object):
    """
    Per-coordinate finite partitions of the real line and the past/future
    windows used to restrict the mixing coefficient of a simulated process.

    Parameters
    ----------
    edges: list
        For each coordinate, an increasing array of cell boundaries (cells are
        ``(-inf, e_0), [e_0, e_1), ..., [e_{K-1}, inf)``), or ``None`` for a
        coordinate that already takes integer values.
    past_window: int
        The number of time points in the past window.
    future_window: int
        The number of time points in the future window.
    """

    def __init__(self, edges=None, past_window=1, future_window=1):
        self.edges = [None] if edges is None else list(edges)
        for e in self.edges:
            if e is not None and np.any(np.diff(np.asarray(e, dtype=float)) <= 0.0):
                raise ValueError("Partition edges must be strictly increasing")

        for name, value in (("past_window", past_window), ("future_window", future_window)):
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError("{} must be a positive integer".format(name))

        self.past_window = int(past_window)
        self.future_window = int(future_window)

    @property
    def ncoordinates(self):
        return len(self.edges)

    def discretize(self, values):
        """
        Map values with trailing coordinate axis (or no coordinate axis for a
        single coordinate) to integer cell codes.
        """

        values = np.asarray(values)
        if self.ncoordinates == 1 and (values.ndim == 0 or values.shape[-1] != 1):
            values = values[..., None]

        if values.shape[-1] != self.ncoordinates:
            raise ValueError("Values have {} coordinates, partition has {}".format(values.shape[-1], self.ncoordinates))

        codes = np.zeros(values.shape[:-1], dtype=np.int64)
        for i, e in enumerate(self.edges):
            if e is None:
                cells = np.asarray(values[..., i], dtype=np.int64)
                cells = cells - cells.min() if cells.size else cells
                ncells = int(cells.max()) + 1 if cells.size else 1
            else:
                cells = np.digitize(values[..., i], e)
                ncells = len(e) + 1
            codes = codes * ncells + cells

        return codes


def _window_codes(cells):
    # combine a (R, w) block of cell codes into one label per replicate
    _, labels = np.unique(cells, axis=0, return_inverse=True)
    return labels.ravel()


def alpha_empirical(paths, lag, partition, rng, origin=None, n_bootstrap=200, min_replicates=1000):
    """
    Plug-in estimate of the windowed mixing coefficient at a given lag from
    independent replicates observed at fixed times.

    The past window ends at ``origin`` and the future window starts at
    ``origin + lag``; both windows are discretised with ``partition`` and the
    empirical joint law of (past, future) is passed to
    :func:`~mixsim.mixing.alpha_exact`. The standard error is the bootstrap
    standard deviation over replicate resampling.

    Parameters
    ----------
    paths: array_like
        The replicates, with shape ``(R, T)`` or ``(R, T, c)``.
    lag: int
        The lag.
    partition: :class:`~mixsim.mixing.PartitionSpec`
        The discretisation and windows.
    rng: :class:`~mixsim.utils.RngStream`
        The stream used for bootstrap resampling.
    origin: int
        The last time of the past window (default ``past_window - 1``).
    n_bootstrap: int
        The number of bootstrap resamples.
    min_replicates: int
        The smallest number of replicates accepted.

    Returns
    -------
    estimate, standard_error: float
    """

    paths = np.asarray(paths)
    nrep = paths.shape[0]

    if nrep < min_replicates:
        raise ValueError("alpha_empirical needs at least {} replicates (got {})".format(min_replicates, nrep))
    if lag < 1:
        raise ValueError("The lag must be positive")

    origin = partition.past_window - 1 if origin is None else int(origin)
    start = origin - partition.past_window + 1
    stop = origin + lag + partition.future_window

    if start < 0 or stop > paths.shape[1]:
        raise ValueError("Paths of length {} do not cover the windows [{}, {})".format(paths.shape[1], start, stop))

    cells = partition.discretize(paths)
    past = _window_codes(cells[:, start : origin + 1])
    future = _window_codes(cells[:, origin + lag : stop])

    npast = past.max() + 1
    nfuture = future.max() + 1
    if min(npast, nfuture) > MAX_ENUMERATION_ALPHABET:
        raise ValueError(
            "Discretised alphabets ({}, {}) overflow the enumeration limit".format(npast, nfuture)
        )

    estimate = alpha_exact(JointDistribution.from_samples(past, future))

    boot = np.empty(n_bootstrap)
    for i in range(n_bootstrap):
        idx = rng.integers(0, nrep, size=nrep)
        boot[i] = alpha_exact(JointDistribution.from_samples(past[idx], future[idx]))

    se = float(np.std(boot, ddof=1)) if n_bootstrap > 1 else 0.0

    bias = float(np.mean(boot)) - estimate
    if se > 0.0 and bias > 3.0 * se:
        logger.warning(
            "Plug-in bias {:.3g} at lag {} is large relative to the standard error {:.3g}".format(bias, lag, se)
        )

    return estimate, se
