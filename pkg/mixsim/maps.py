"""
Iterated random maps on a finite set: categorical autoregressions with
sequentially exogenous covariates, coalescence estimates and coupling from
the past.
"""

import numpy as np
from scipy.integrate import quad

from .doeblin import CoupledPath
from .processes import JointEnvironment
from .utils import CoalescenceError, StateSpace, logger

#: noise kinds and noise dimension ("N" for one component per state) of each model kind
MAP_MODEL_KINDS = {
    "multinomial": {"noise": ["uniform01"], "noise_dimension": 1},
    "ordinal": {
        "noise": ["uniform01", "gaussian_vector", "gumbel_vector", "custom_cdf"],
        "noise_dimension": 1,
    },
    "multiple_choice": {
        "noise": ["gaussian_vector", "gumbel_vector", "custom_cdf"],
        "noise_dimension": "N",
    },
}

LINKS = ["identity", "softmax"]

# stream id offset of the environment noise stream
MAP_NOISE_STREAM_OFFSET = 1 << 44


class LinearIndex(object):
    """
    A linear regression index
    :math:`c + \\sum_{i=1}^p C_{i, y_i} + \\delta^T x`.

    Parameters
    ----------
    intercept: float
        The intercept c.
    lag_coefficients: array_like
        An array of shape ``(p, N)``: the contribution of state ``y`` at lag
        ``i + 1``.
    covariate_coefficients: array_like
        The covariate coefficients :math:`\\delta`.
    """

    def __init__(self, intercept=0.0, lag_coefficients=None, covariate_coefficients=None):
        self.intercept = float(intercept)
        self.lag_coefficients = None if lag_coefficients is None else np.atleast_2d(
            np.asarray(lag_coefficients, dtype=float)
        )
        self.covariate_coefficients = None if covariate_coefficients is None else np.atleast_1d(
            np.asarray(covariate_coefficients, dtype=float)
        )

    @classmethod
    def from_dict(cls, values):
        return cls(
            intercept=values.get("intercept", 0.0),
            lag_coefficients=values.get("lags"),
            covariate_coefficients=values.get("covariates"),
        )

    def __call__(self, lags, x):
        lags = np.asarray(lags, dtype=np.int64)
        x = np.asarray(x, dtype=float)
        value = np.full(lags.shape[0], self.intercept)

        if self.lag_coefficients is not None:
            p = min(self.lag_coefficients.shape[0], lags.shape[1])
            for i in range(p):
                value += self.lag_coefficients[i, lags[:, i]]

        if self.covariate_coefficients is not None:
            value += x[:, : len(self.covariate_coefficients)] @ self.covariate_coefficients

        return value

    def __repr__(self):
        return "LinearIndex(intercept={})".format(self.intercept)


class MapModelSpec(object):
    """
    A categorical autoregression
    :math:`Y_t = f(Y_{t-1}, \\ldots, Y_{t-p}, X_{t-1}, \\varepsilon_t)`.

    Parameters
    ----------
    kind: str
        "multinomial" (inverse-CDF of the probabilities :math:`H_y`),
        "ordinal" (:math:`Y = i` iff :math:`c_{i-1} < g + \\varepsilon \\leq c_i`)
        or "multiple_choice" (:math:`Y = \\arg\\max_i g_i + \\varepsilon_i`).
    n_states: int
        The number of states N.
    regression: callable, list
        ``regression(lags, x)`` with lag vectors of shape ``(S, p)`` (most
        recent first) and covariates of shape ``(S, d)``, returning ``(S, N)``
        probabilities (multinomial), ``(S,)`` indices (ordinal) or ``(S, N)``
        utilities (multiple choice). A list of N
        :class:`~mixsim.maps.LinearIndex` (or a single one for ordinal models)
        is also accepted.
    environment: :class:`~mixsim.processes.JointEnvironment`
        The covariate and noise processes.
    p: int
        The lag order.
    thresholds: array_like
        The increasing thresholds :math:`c_1 < \\cdots < c_{N-1}` (ordinal).
    link: str
        For multinomial models built from indices: "identity" (the indices
        are the probabilities) or "softmax".
    block_length: int
        The block length m used for coalescence (defaults to p).
    """

    def __init__(
        self, kind, n_states, regression, environment, p=1, thresholds=None, link="identity", block_length=None
    ):
        if kind not in MAP_MODEL_KINDS:
            raise ValueError("Map model kind '{}' is not known; use one of {}".format(kind, sorted(MAP_MODEL_KINDS)))
        if not isinstance(environment, JointEnvironment):
            raise TypeError("environment must be a JointEnvironment")
        if not isinstance(p, (int, np.integer)) or p < 1:
            raise ValueError("The lag order p must be a positive integer")
        if link not in LINKS:
            raise ValueError("link must be one of {}".format(LINKS))

        self.kind = kind
        self.space = StateSpace(n_states)
        self.p = int(p)
        self.link = link
        self.environment = environment
        self.block_length = self.p if block_length is None else int(block_length)

        noise = environment.noise
        requirement = MAP_MODEL_KINDS[kind]
        ndim = n_states if requirement["noise_dimension"] == "N" else requirement["noise_dimension"]
        if noise is None or noise.kind not in requirement["noise"]:
            raise ValueError("{} models need noise of kind {}".format(kind, requirement["noise"]))
        if noise.dimension != ndim:
            raise ValueError("{} models need noise of dimension {}".format(kind, ndim))

        if kind == "ordinal":
            if thresholds is None:
                raise ValueError("Ordinal models need thresholds")
            thresholds = np.asarray(thresholds, dtype=float)
            if len(thresholds) != n_states - 1 or np.any(np.diff(thresholds) <= 0.0):
                raise ValueError("Ordinal thresholds must be N-1 strictly increasing values")
        self.thresholds = thresholds

        self.regression = regression

    @property
    def n_states(self):
        return self.space.size

    @property
    def embedded_size(self):
        return self.space.embedded_size(self.p)

    @property
    def regression(self):
        return self._regression

    @regression.setter
    def regression(self, regression):
        if callable(regression):
            self._regression = regression
            return

        indices = [regression] if isinstance(regression, LinearIndex) else list(regression)
        expected = 1 if self.kind == "ordinal" else self.n_states
        if len(indices) != expected or not all(isinstance(i, LinearIndex) for i in indices):
            raise ValueError("{} models need {} LinearIndex regression(s)".format(self.kind, expected))

        if self.kind == "ordinal":
            self._regression = indices[0]
        else:
            self._regression = lambda lags, x: np.stack([index(lags, x) for index in indices], axis=-1)

    def evaluate(self, lags, x):
        """
        The regression function at lag vectors and covariates.
        """

        values = np.asarray(self._regression(lags, x), dtype=float)

        if self.kind == "multinomial":
            if self.link == "softmax":
                values = np.exp(values - values.max(axis=-1, keepdims=True))
                values /= values.sum(axis=-1, keepdims=True)
            if np.any(values <= 0.0) or not np.allclose(values.sum(axis=-1), 1.0, atol=1e-10, rtol=0.0):
                raise ValueError("Multinomial probabilities must be positive and sum to one")

        return values

    def __repr__(self):
        return "MapModelSpec(kind='{}', n_states={}, p={})".format(self.kind, self.n_states, self.p)


class RandomMapRealization(object):
    """
    A map of a finite set into itself given by its table of images.
    """

    def __init__(self, table):
        self.table = np.asarray(table, dtype=np.int64)
        if self.table.ndim != 1 or np.any(self.table < 0) or np.any(self.table >= len(self.table)):
            raise ValueError("Map images must lie in the state space")

    def __call__(self, state):
        return self.table[state]

    def __len__(self):
        return len(self.table)

    def __repr__(self):
        return "RandomMapRealization({})".format(self.table.tolist())

    @property
    def image_count(self):
        return len(np.unique(self.table))

    @property
    def is_constant(self):
        return self.image_count == 1


def compose(maps):
    """
    The composition :math:`F_t \\circ \\cdots \\circ F_s` of a sequence of
    maps given in time order (the first map is applied first).
    """

    maps = list(maps)
    if len(maps) == 0:
        raise ValueError("Cannot compose an empty sequence of maps")

    table = maps[0].table
    for f in maps[1:]:
        table = f.table[table]
    return RandomMapRealization(table)


def _compose_tables(first, then):
    # row-wise composition of (R, S) tables: then[first[y]]
    return np.take_along_axis(then, first, axis=1)


def realize_maps(spec, x, eps):
    """
    Realise the maps of a model on the embedded space :math:`E^p` for a batch
    of covariates and noise draws.

    Parameters
    ----------
    spec: :class:`~mixsim.maps.MapModelSpec`
        The model.
    x: array_like
        Covariates of shape ``(R, d)``.
    eps: array_like
        Noise draws of shape ``(R, k)``.

    Returns
    -------
    :class:`numpy.ndarray`
        Tables of shape ``(R, N^p)``: the image of each embedded state code.
    """

    x = np.atleast_2d(np.asarray(x, dtype=float))
    eps = np.atleast_2d(np.asarray(eps, dtype=float))
    nrep = len(x)
    size = spec.embedded_size

    codes = np.arange(size)
    lags = spec.space.decode(codes, spec.p)
    alllags = np.tile(lags, (nrep, 1))
    allx = np.repeat(x, size, axis=0)
    alleps = np.repeat(eps, size, axis=0)

    values = spec.evaluate(alllags, allx)

    if spec.kind == "multinomial":
        cdf = np.cumsum(values, axis=-1)
        new = np.minimum((alleps[:, :1] > cdf).sum(axis=-1), spec.n_states - 1)
    elif spec.kind == "ordinal":
        new = (values[:, None] + alleps[:, :1] > spec.thresholds[None, :]).sum(axis=-1)
    else:
        new = np.argmax(values + alleps, axis=-1)

    shifted = np.concatenate((new[:, None], alllags[:, : spec.p - 1]), axis=1)
    return spec.space.encode(shifted).reshape(nrep, size)


def realize_map(spec, x, eps):
    """
    Realise the map of a model for one covariate vector and noise draw.

    Returns
    -------
    :class:`~mixsim.maps.RandomMapRealization`
    """

    return RandomMapRealization(realize_maps(spec, np.atleast_1d(x)[None, :], np.atleast_1d(eps)[None, :])[0])


class CoalescenceReport(object):
    """
    The estimated non-coalescence probability of m-fold compositions.
    """

    def __init__(self, m, rho_hat, replicates):
        self.m = int(m)
        self.rho_hat = float(rho_hat)
        self.replicates = int(replicates)
        self.standard_error = float(np.sqrt(self.rho_hat * (1.0 - self.rho_hat) / self.replicates))

    def __repr__(self):
        return "CoalescenceReport(m={}, rho_hat={:.5g}, standard_error={:.3g})".format(
            self.m, self.rho_hat, self.standard_error
        )


def estimate_rho(spec, m, replicates, rng):
    """
    Estimate :math:`\\rho = 1 - P(\\#F_1^m(E^p) = 1)` from independent blocks of
    the stationary environment.

    Parameters
    ----------
    spec: :class:`~mixsim.maps.MapModelSpec`
        The model.
    m: int
        The number of composed maps.
    replicates: int
        The number of blocks.
    rng: :class:`~mixsim.utils.RngStream`
        The environment stream.

    Returns
    -------
    :class:`~mixsim.maps.CoalescenceReport`
    """

    if m < 1 or replicates < 1:
        raise ValueError("m and replicates must be positive")

    path = spec.environment.forward(m + 1, rng, size=replicates, noise_rng=rng.derive(MAP_NOISE_STREAM_OFFSET))

    composed = realize_maps(spec, path.x[:, 0], path.eps[:, 1])
    for t in range(2, m + 1):
        composed = _compose_tables(composed, realize_maps(spec, path.x[:, t - 1], path.eps[:, t]))

    coalesced = np.all(composed == composed[:, :1], axis=1)
    return CoalescenceReport(m, 1.0 - coalesced.mean(), replicates)


def _model_inputs(spec, x_support):
    if x_support is None:
        x_support = spec.environment.covariates.support()
    x_support = np.asarray(x_support, dtype=float)
    if x_support.ndim == 1:
        x_support = x_support[:, None]

    size = spec.embedded_size
    lags = spec.space.decode(np.arange(size), spec.p)
    return np.tile(lags, (len(x_support), 1)), np.repeat(x_support, size, axis=0)


def coalescence_lower_bound(spec, x_support=None):
    """
    A constructive lower bound on :math:`1 - \\rho` for blocks of p maps: the
    probability that the noise forces the same state whatever the lag vector
    and covariate, at each of p consecutive times.

    Parameters
    ----------
    spec: :class:`~mixsim.maps.MapModelSpec`
        The model.
    x_support: array_like
        Covariate points over which the infimum is taken (defaults to the
        support of a finite environment or a grid on the clipped box).

    Returns
    -------
    float
    """

    lags, x = _model_inputs(spec, x_support)
    values = spec.evaluate(lags, x)
    dist = spec.environment.noise.distribution

    if spec.kind == "multinomial":
        cdf = np.cumsum(values, axis=-1)
        lower = np.concatenate((np.zeros((len(cdf), 1)), cdf[:, :-1]), axis=1)
        forced = cdf.min(axis=0) - lower.max(axis=0)
    elif spec.kind == "ordinal":
        c = np.concatenate(([-np.inf], spec.thresholds, [np.inf]))
        gmin, gmax = values.min(), values.max()
        forced = dist.cdf(c[1:] - gmax) - dist.cdf(c[:-1] - gmin)
    else:
        forced = np.zeros(spec.n_states)
        for i in range(spec.n_states):
            # state i wins for every input iff eps_i - eps_l > sup (g_l - g_i)
            gaps = np.delete((values - values[:, i : i + 1]).max(axis=0), i)
            integrand = lambda e, gaps=gaps: dist.pdf(e) * np.prod(dist.cdf(e - gaps))
            lo, hi = dist.support()
            forced[i] = quad(integrand, lo, hi, limit=200)[0]

    h = float(np.clip(np.max(forced), 0.0, 1.0))
    return h ** spec.p


class BackwardSample(object):
    """
    The result of coupling from the past.

    Attributes
    ----------
    codes: :class:`numpy.ndarray`
        The embedded state codes at the target time.
    states: :class:`numpy.ndarray`
        The most recent state of each lag vector.
    depth: :class:`numpy.ndarray`
        The number of maps composed when the composition became constant
        (-1 on failure).
    failed: :class:`numpy.ndarray`
        Replicates that did not coalesce within the maximum depth; their codes
        are those of a burn-in from code 0 over the realised window.
    latent: :class:`numpy.ndarray`
        The environment latent state at the target time.
    """

    def __init__(self, codes, states, depth, failed, latent):
        self.codes = codes
        self.states = states
        self.depth = depth
        self.failed = failed
        self.latent = latent

    @property
    def failure_rate(self):
        return float(np.mean(self.failed))


def backward_sample(spec, t, max_depth, rng, size=None, noise_rng=None):
    """
    Draw from the stationary law by coupling from the past: the window of
    composed maps ending at time t is extended into the past in blocks of m
    maps, reusing the realised environment, until the composition is
    constant.

    Parameters
    ----------
    spec: :class:`~mixsim.maps.MapModelSpec`
        The model.
    t: int
        The target time label.
    max_depth: int
        The largest number of composed maps.
    rng: :class:`~mixsim.utils.RngStream`
        The environment stream.
    size: int
        The number of independent samples. If ``None`` a single state is
        returned and a failure raises :class:`~mixsim.utils.CoalescenceError`.
    noise_rng: :class:`~mixsim.utils.RngStream`
        The noise stream (derived from ``rng`` by default).

    Returns
    -------
    :class:`~mixsim.maps.BackwardSample`, int
    """

    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")

    env = spec.environment
    noise_rng = rng.derive(MAP_NOISE_STREAM_OFFSET) if noise_rng is None else noise_rng
    nrep = 1 if size is None else int(size)
    m = spec.block_length

    latent_t = env.stationary_latent(rng, nrep)
    latent = latent_t
    composed = np.tile(np.arange(spec.embedded_size), (nrep, 1))
    depth = np.full(nrep, -1, dtype=np.int64)
    end = t
    ncomposed = 0

    while ncomposed < max_depth:
        chunk = env.backward(latent, m, rng, noise_rng, end=end)

        block = realize_maps(spec, chunk.x[:, 0], chunk.eps[:, 1])
        for j in range(2, m + 1):
            block = _compose_tables(block, realize_maps(spec, chunk.x[:, j - 1], chunk.eps[:, j]))

        composed = _compose_tables(block, composed)
        ncomposed += m
        latent = chunk.latent[:, 0]
        end -= m

        done = np.all(composed == composed[:, :1], axis=1)
        depth[done & (depth < 0)] = ncomposed
        if np.all(done):
            break

    failed = depth < 0
    codes = composed[:, 0]
    states = spec.space.decode(codes, spec.p)[:, 0]

    if size is None:
        if failed[0]:
            raise CoalescenceError("No coalescence within {} maps".format(max_depth))
        return int(states[0])

    if np.any(failed):
        logger.warning("{} of {} backward samples did not coalesce within {} maps".format(failed.sum(), nrep, max_depth))

    return BackwardSample(codes, states, depth, failed, latent_t)


def simulate_maps_coupled(spec, r, horizon, y0, rng, replicates=1, max_depth=1000):
    """
    Simulate a stationary path and its copy restarted at time r, both driven
    by the same realised maps.

    Parameters
    ----------
    spec: :class:`~mixsim.maps.MapModelSpec`
        The model.
    r: int
        The restart time, ``0 < r < horizon``.
    horizon: int
        The last simulated time.
    y0: int
        The restart value as an embedded state code (a state for p = 1).
    rng: :class:`~mixsim.utils.RngStream`
        The environment stream.
    replicates: int
        The number of replicates.
    max_depth: int
        The largest backward depth of the stationary initialisation; failed
        replicates fall back to a burn-in over that window.

    Returns
    -------
    :class:`~mixsim.doeblin.CoupledPath`
        Paths of the most recent state; disagreement compares full lag
        vectors.
    """

    if not 0 < r < horizon:
        raise ValueError("The restart must satisfy 0 < r < horizon (got r={}, horizon={})".format(r, horizon))
    if not 0 <= y0 < spec.embedded_size:
        raise ValueError("The restart code {} is not in E^p".format(y0))

    env = spec.environment
    noise_rng = rng.derive(MAP_NOISE_STREAM_OFFSET)

    start = backward_sample(spec, 0, max_depth, rng, size=replicates, noise_rng=noise_rng)
    future = env.forward(horizon + 1, rng, size=replicates, initial=start.latent, noise_rng=noise_rng)

    idx = np.arange(replicates)
    codes = np.zeros((replicates, horizon + 1), dtype=np.int64)
    codes_prime = np.full((replicates, horizon + 1), -1, dtype=np.int64)
    codes[:, 0] = start.codes
    codes_prime[:, r] = y0

    for t in range(1, horizon + 1):
        tables = realize_maps(spec, future.x[:, t - 1], future.eps[:, t])
        codes[:, t] = tables[idx, codes[:, t - 1]]
        if t > r:
            codes_prime[:, t] = tables[idx, codes_prime[:, t - 1]]

    disagreement = np.zeros(codes.shape, dtype=bool)
    disagreement[:, r:] = codes[:, r:] != codes_prime[:, r:]

    y = spec.space.decode(codes, spec.p)[..., 0]
    y_prime = np.where(codes_prime >= 0, spec.space.decode(np.maximum(codes_prime, 0), spec.p)[..., 0], -1)

    return CoupledPath(
        y, y_prime, r, spec.block_length, disagreement, environment=future.latent[:, : horizon + 1]
    )


def simulate_maps_forward(spec, horizon, rng, replicates=1, y0=0, chunk=1024):
    """
    Iterate the maps forward from a fixed embedded state along a stationary
    environment path, generated in chunks.

    Parameters
    ----------
    spec: :class:`~mixsim.maps.MapModelSpec`
        The model.
    horizon: int
        The number of maps applied.
    rng: :class:`~mixsim.utils.RngStream`
        The environment stream.
    replicates: int
        The number of replicates.
    y0: int
        The starting embedded state code.

    Returns
    -------
    :class:`numpy.ndarray`
        Most recent states at times ``0, ..., horizon``, shape
        ``(replicates, horizon + 1)``.
    """

    if horizon < 1:
        raise ValueError("The horizon must be at least 1")

    env = spec.environment
    noise_rng = rng.derive(MAP_NOISE_STREAM_OFFSET)
    idx = np.arange(replicates)

    codes = np.zeros((replicates, horizon + 1), dtype=np.int64)
    codes[:, 0] = y0

    t = 0
    path = env.forward(min(chunk, horizon) + 1, rng, size=replicates, noise_rng=noise_rng)
    while True:
        for k in range(1, path.length):
            t += 1
            tables = realize_maps(spec, path.x[:, k - 1], path.eps[:, k])
            codes[:, t] = tables[idx, codes[:, t - 1]]
            if t == horizon:
                return spec.space.decode(codes, spec.p)[..., 0]
        path = env.forward(
            min(chunk, horizon - t) + 1, rng, size=replicates, initial=path.latent[:, -1], noise_rng=noise_rng
        )
