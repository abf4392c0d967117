"""
Stationary covariate and noise processes, and their joint generator under
strict or sequential exogeneity.
"""

import warnings

import numpy as np
from scipy import stats
from scipy.special import ndtr, ndtri

from .bounds import DecaySequence
from .mixing import dobrushin_coefficient, markov_alpha_sequence
from .utils import (
    check_probability_vector,
    check_stochastic_matrix,
    logger,
    sample_categorical,
    stationary_distribution,
)

#: required (and optional) parameters for each covariate process kind
COVARIATE_REQUIREMENTS = {
    "iid": {"required": ["probs"], "optional": ["values"]},
    "finite_markov": {"required": ["transition"], "optional": ["values", "stationary"]},
    "gaussian_ar1_clipped": {"required": ["phi", "sigma", "bound"], "optional": ["mean"]},
}

#: required (and optional) parameters for each noise kind
NOISE_REQUIREMENTS = {
    "uniform01": {"required": [], "optional": []},
    "gaussian_vector": {"required": [], "optional": ["scale"]},
    "gumbel_vector": {"required": [], "optional": []},
    "custom_cdf": {"required": ["distribution"], "optional": ["shape", "loc", "scale"]},
}

EXOGENEITY_MODES = ["strict", "sequential"]

# stream id offset of the noise process relative to the covariate stream
NOISE_STREAM_OFFSET = 1 << 40

# keep uniform draws strictly inside (0, 1) before quantile transforms
_UNIFORM_FLOOR = np.finfo(float).tiny
_UNIFORM_CEIL = 1.0 - 2.0 ** -53

# innovations are clipped so normal quantiles stay finite
_NORMAL_CLIP = 38.0


def _check_parameters(kind, parameters, requirements, what):
    if kind not in requirements:
        raise ValueError(
            "{} kind '{}' is not known; use one of {}".format(what, kind, sorted(requirements))
        )

    allowed = requirements[kind]["required"] + requirements[kind]["optional"]
    for key in parameters:
        if key not in allowed:
            raise KeyError("Parameter '{}' is not used by the {} kind '{}'".format(key, what, kind))
    for key in requirements[kind]["required"]:
        if key not in parameters:
            raise KeyError("The {} kind '{}' requires the parameter '{}'".format(what, kind, key))


class CovariateProcessSpec(object):
    """
    A strictly stationary covariate process.

    Parameters
    ----------
    kind: str
        "iid" (finite marginal law), "finite_markov" (stationary finite Markov
        chain) or "gaussian_ar1_clipped" (stationary Gaussian AR(1) clipped to
        :math:`[-B, B]`).
    parameters: dict
        The kind's parameters (see ``COVARIATE_REQUIREMENTS``). Finite kinds
        take optional ``values``, the covariate vector attached to each state
        (defaults to the state labels).
    dimension: int
        The covariate dimension for "gaussian_ar1_clipped" (finite kinds
        infer it from ``values``).
    """

    def __init__(self, kind, parameters=None, dimension=1):
        self._dimension = dimension
        self.kind = kind
        self.parameters = {} if parameters is None else dict(parameters)

    @property
    def kind(self):
        return self._kind

    @kind.setter
    def kind(self, kind):
        if kind not in COVARIATE_REQUIREMENTS:
            raise ValueError(
                "Covariate kind '{}' is not known; use one of {}".format(kind, sorted(COVARIATE_REQUIREMENTS))
            )
        self._kind = kind

    @property
    def parameters(self):
        return self._parameters

    @parameters.setter
    def parameters(self, parameters):
        _check_parameters(self.kind, parameters, COVARIATE_REQUIREMENTS, "covariate")

        if self.kind == "gaussian_ar1_clipped":
            self.phi = float(parameters["phi"])
            self.sigma = float(parameters["sigma"])
            self.bound = float(parameters["bound"])
            self.mean = float(parameters.get("mean", 0.0))
            if abs(self.phi) >= 1.0:
                raise ValueError("The AR(1) coefficient must satisfy |phi| < 1")
            if self.sigma <= 0.0:
                raise ValueError("The AR(1) noise standard deviation must be positive")
            if self.bound <= 0.0:
                raise ValueError("The clip bound must be positive")
            if not isinstance(self._dimension, (int, np.integer)) or self._dimension < 1:
                raise ValueError("The covariate dimension must be a positive integer")
        else:
            if self.kind == "iid":
                probs = check_probability_vector(parameters["probs"], name="marginal law")
                transition = np.tile(probs, (len(probs), 1))
                stationary = probs
            else:
                transition = check_stochastic_matrix(parameters["transition"], name="transition matrix")
                if "stationary" in parameters:
                    stationary = check_probability_vector(parameters["stationary"], name="stationary law")
                    if len(stationary) != len(transition):
                        raise ValueError("Stationary law and transition matrix sizes differ")
                    if np.max(np.abs(stationary @ transition - stationary)) > 1e-10:
                        raise ValueError("The given law is not stationary for the transition matrix")
                else:
                    stationary = stationary_distribution(transition)

            nstates = len(stationary)
            values = parameters.get("values", np.arange(nstates))
            values = np.asarray(values, dtype=float)
            if values.ndim == 1:
                values = values[:, None]
            if values.ndim != 2 or values.shape[0] != nstates:
                raise ValueError("Covariate values must have one row per state")

            self.transition = transition
            self.stationary = stationary
            self.values = values
            self._dimension = values.shape[1]

        self._parameters = parameters

    @property
    def dimension(self):
        return int(self._dimension)

    @property
    def finite(self):
        return self.kind != "gaussian_ar1_clipped"

    @property
    def nstates(self):
        return len(self.stationary) if self.finite else None

    @property
    def innovation_dimension(self):
        return 1 if self.finite else self.dimension

    def __repr__(self):
        return "CovariateProcessSpec(kind='{}', dimension={})".format(self.kind, self.dimension)

    def stationary_latent(self, rng, size):
        """
        Draw the latent state (chain state or pre-clip AR value) from the
        stationary law.
        """

        if self.finite:
            return sample_categorical(np.broadcast_to(self.stationary, (size, self.nstates)), rng.uniform(size))

        sd = self.sigma / np.sqrt(1.0 - self.phi ** 2)
        return self.mean + sd * rng.normal((size, self.dimension))

    def step(self, latent, innovation):
        """
        Advance the latent state with standard normal innovations of shape
        ``(R, innovation_dimension)``.
        """

        if self.finite:
            return sample_categorical(self.transition[latent], ndtr(innovation[:, 0]))

        return self.mean + self.phi * (latent - self.mean) + self.sigma * innovation

    def reverse_step(self, latent, rng):
        """
        Draw the previous latent state given the current one under the
        stationary law, together with the innovation linking them.
        """

        size = len(latent)

        if self.finite:
            # time reversal P~(a, b) = pi(b) P(b, a) / pi(a)
            with np.errstate(invalid="ignore", divide="ignore"):
                reverse = self.stationary[None, :] * self.transition.T / self.stationary[:, None]
            previous = sample_categorical(reverse[latent], rng.uniform(size))

            # uniform inside the cell of the current state in row `previous`
            cdf = np.cumsum(self.transition[previous], axis=-1)
            upper = cdf[np.arange(size), latent]
            lower = upper - self.transition[previous, latent]
            u = lower + (upper - lower) * rng.uniform(size)
            innovation = np.clip(ndtri(u), -_NORMAL_CLIP, _NORMAL_CLIP)[:, None]
            return previous, innovation

        # the stationary Gaussian AR(1) is reversible
        previous = self.mean + self.phi * (latent - self.mean) + self.sigma * rng.normal(latent.shape)
        innovation = (latent - self.mean - self.phi * (previous - self.mean)) / self.sigma
        return previous, innovation

    def observe(self, latent):
        """
        The covariate values attached to latent states, with shape
        ``latent.shape + (dimension,)`` for finite kinds.
        """

        if self.finite:
            return self.values[latent]
        return np.clip(latent, -self.bound, self.bound)

    def support(self, npoints=21):
        """
        The covariate support (finite kinds) or a grid on the clipped box
        including its corners.
        """

        if self.finite:
            return np.unique(self.values, axis=0)

        axis = np.linspace(-self.bound, self.bound, npoints)
        grids = np.meshgrid(*([axis] * self.dimension), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)


class NoiseSpec(object):
    """
    The law of the noise vector :math:`\\varepsilon_t`.

    Parameters
    ----------
    kind: str
        "uniform01", "gaussian_vector", "gumbel_vector" or "custom_cdf"
        (any continuous :mod:`scipy.stats` distribution given by name).
    dimension: int
        The noise dimension k.
    parameters: dict
        The kind's parameters (see ``NOISE_REQUIREMENTS``).
    """

    def __init__(self, kind="uniform01", dimension=1, parameters=None):
        if not isinstance(dimension, (int, np.integer)) or dimension < 1:
            raise ValueError("The noise dimension must be a positive integer")

        self.kind = kind
        self.dimension = int(dimension)
        self.parameters = {} if parameters is None else dict(parameters)

    @property
    def parameters(self):
        return self._parameters

    @parameters.setter
    def parameters(self, parameters):
        _check_parameters(self.kind, parameters, NOISE_REQUIREMENTS, "noise")

        self._distribution = None
        if self.kind == "custom_cdf":
            try:
                family = getattr(stats, parameters["distribution"])
            except AttributeError:
                raise ValueError("scipy.stats has no distribution '{}'".format(parameters["distribution"]))
            if not isinstance(family, stats.rv_continuous):
                raise ValueError("'{}' is not a continuous distribution".format(parameters["distribution"]))
            args = np.atleast_1d(parameters.get("shape", []))
            self._distribution = family(*args, loc=parameters.get("loc", 0.0), scale=parameters.get("scale", 1.0))

        if self.kind == "gaussian_vector" and parameters.get("scale", 1.0) <= 0.0:
            raise ValueError("The Gaussian noise scale must be positive")

        self._parameters = parameters

    @property
    def distribution(self):
        """
        The frozen scipy distribution of each noise component.
        """

        if self.kind == "uniform01":
            return stats.uniform()
        if self.kind == "gaussian_vector":
            return stats.norm(scale=self.parameters.get("scale", 1.0))
        if self.kind == "gumbel_vector":
            return stats.gumbel_r()
        return self._distribution

    def __repr__(self):
        return "NoiseSpec(kind='{}', dimension={})".format(self.kind, self.dimension)

    def from_uniform(self, u):
        """
        Transform uniform draws on [0, 1) to noise draws componentwise.
        """

        if self.kind == "uniform01":
            return u

        u = np.clip(u, _UNIFORM_FLOOR, _UNIFORM_CEIL)
        if self.kind == "gaussian_vector":
            return self.parameters.get("scale", 1.0) * ndtri(u)
        if self.kind == "gumbel_vector":
            return -np.log(-np.log(u))
        return self._distribution.ppf(u)


class ExogeneityMode(object):
    """
    The dependence between the covariates and the noise.

    Parameters
    ----------
    mode: str
        "strict" (independent processes) or "sequential" (the noise at time
        t shares the time-t covariate innovation and is independent of the
        past).
    correlation: float
        The Gaussian-copula correlation between the first noise component
        and the first covariate innovation in sequential mode.
    """

    def __init__(self, mode="strict", correlation=0.5):
        if mode not in EXOGENEITY_MODES:
            raise ValueError("Exogeneity mode '{}' is not known; use one of {}".format(mode, EXOGENEITY_MODES))
        if not -1.0 <= correlation <= 1.0:
            raise ValueError("The exogeneity correlation must lie in [-1, 1]")

        self.mode = mode
        self.correlation = float(correlation)

    @property
    def effective_correlation(self):
        return self.correlation if self.mode == "sequential" else 0.0

    def __repr__(self):
        return "ExogeneityMode(mode='{}', correlation={})".format(self.mode, self.correlation)


class EnvironmentPath(object):
    """
    Replicate paths of the joint environment.

    Attributes
    ----------
    latent: :class:`numpy.ndarray`
        Latent states, shape ``(R, T)`` (finite kinds) or ``(R, T, d)``.
    x: :class:`numpy.ndarray`
        Covariates, shape ``(R, T, d)``.
    innovations: :class:`numpy.ndarray`
        The innovation that produced each covariate from the previous one;
        NaN where it is not part of the path.
    eps: :class:`numpy.ndarray`
        Noise draws paired with the innovations, shape ``(R, T, k)``; NaN
        where unpaired. ``None`` without a noise process.
    start: int
        The time label of the first entry.
    """

    def __init__(self, latent, x, innovations, eps=None, start=0):
        self.latent = latent
        self.x = x
        self.innovations = innovations
        self.eps = eps
        self.start = start

    @property
    def replicates(self):
        return self.x.shape[0]

    @property
    def length(self):
        return self.x.shape[1]

    @property
    def times(self):
        return np.arange(self.start, self.start + self.length)

    def prepend(self, earlier):
        """
        Join an earlier path whose last entry is this path's first entry.
        """

        if not np.array_equal(earlier.latent[:, -1], self.latent[:, 0]):
            raise ValueError("The earlier path does not end where this path starts")

        eps = None
        if self.eps is not None:
            eps = np.concatenate((earlier.eps, self.eps[:, 1:]), axis=1)

        return EnvironmentPath(
            np.concatenate((earlier.latent, self.latent[:, 1:]), axis=1),
            np.concatenate((earlier.x, self.x[:, 1:]), axis=1),
            np.concatenate((earlier.innovations, self.innovations[:, 1:]), axis=1),
            eps=eps,
            start=self.start - earlier.length + 1,
        )


class JointEnvironment(object):
    """
    The joint stationary generator of covariates and noise.

    All covariate kinds are driven by standard normal innovations (finite
    kinds use their normal CDF as the uniform of an inverse-CDF step). In
    sequential mode the first noise component is built from
    :math:`\\rho \\xi_t + \\sqrt{1 - \\rho^2}\\zeta_t`, where :math:`\\xi_t` is the
    first covariate innovation at time t and :math:`\\zeta_t` an independent
    normal, so that it is independent of everything before t.

    Parameters
    ----------
    covariates: :class:`~mixsim.processes.CovariateProcessSpec`
        The covariate process.
    noise: :class:`~mixsim.processes.NoiseSpec`
        The noise law (``None`` for models without noise).
    exogeneity: :class:`~mixsim.processes.ExogeneityMode`
        The exogeneity mode (default strict).
    """

    def __init__(self, covariates, noise=None, exogeneity=None):
        if not isinstance(covariates, CovariateProcessSpec):
            raise TypeError("covariates must be a CovariateProcessSpec")
        if noise is not None and not isinstance(noise, NoiseSpec):
            raise TypeError("noise must be a NoiseSpec")

        self.covariates = covariates
        self.noise = noise
        self.exogeneity = ExogeneityMode() if exogeneity is None else exogeneity

    def __repr__(self):
        return "JointEnvironment({}, {}, {})".format(self.covariates, self.noise, self.exogeneity)

    def _noise(self, innovations, rng):
        if self.noise is None:
            return None

        shape = innovations.shape[:2] + (self.noise.dimension,)
        u = rng.uniform(shape)

        rho = self.exogeneity.effective_correlation
        if rho != 0.0:
            zeta = ndtri(np.clip(u[..., 0], _UNIFORM_FLOOR, _UNIFORM_CEIL))
            w = rho * innovations[..., 0] + np.sqrt(1.0 - rho ** 2) * zeta
            u[..., 0] = ndtr(w)

        eps = self.noise.from_uniform(u)
        eps[np.isnan(innovations[..., 0])] = np.nan
        return eps

    def _allocate(self, size, length):
        spec = self.covariates
        if spec.finite:
            latent = np.zeros((size, length), dtype=np.int64)
        else:
            latent = np.zeros((size, length, spec.dimension))
        innovations = np.full((size, length, spec.innovation_dimension), np.nan)
        return latent, innovations

    def forward(self, horizon, rng, size=1, initial=None, noise_rng=None):
        """
        Draw stationary paths at times ``0, ..., horizon - 1``.

        Parameters
        ----------
        horizon: int
            The path length.
        rng: :class:`~mixsim.utils.RngStream`
            The covariate stream.
        size: int
            The number of replicates.
        initial: array_like
            Latent states at time 0 (e.g., from :meth:`backward`); the time-0
            innovation and noise are then left unpaired.
        noise_rng: :class:`~mixsim.utils.RngStream`
            The noise stream (defaults to a stream derived from ``rng``).

        Returns
        -------
        :class:`~mixsim.processes.EnvironmentPath`
        """

        if horizon < 1:
            raise ValueError("The horizon must be at least 1")

        spec = self.covariates
        latent, innovations = self._allocate(size, horizon)
        draws = rng.normal((size, horizon, spec.innovation_dimension))

        if initial is None:
            previous = spec.stationary_latent(rng, size)
            latent[:, 0] = spec.step(previous, draws[:, 0])
            innovations[:, 0] = draws[:, 0]
        else:
            initial = np.asarray(initial)
            if len(initial) != size:
                raise ValueError("initial must hold one latent state per replicate")
            latent[:, 0] = initial

        for t in range(1, horizon):
            latent[:, t] = spec.step(latent[:, t - 1], draws[:, t])
            innovations[:, t] = draws[:, t]

        noise_rng = rng.derive(NOISE_STREAM_OFFSET) if noise_rng is None else noise_rng
        eps = self._noise(innovations, noise_rng)
        return EnvironmentPath(latent, spec.observe(latent), innovations, eps=eps, start=0)

    def stationary_latent(self, rng, size=1):
        """
        Latent states drawn from the stationary law.
        """

        return self.covariates.stationary_latent(rng, size)

    def backward(self, latent_end, steps, rng, noise_rng, end=0):
        """
        Extend a stationary path ``steps`` time points into the past.

        Parameters
        ----------
        latent_end: array_like
            Latent states at time ``end``.
        steps: int
            The number of past time points generated.
        rng, noise_rng: :class:`~mixsim.utils.RngStream`
            The covariate and noise streams. Repeated calls continue both
            streams, so a growing window extends the realised environment
            without redrawing it.
        end: int
            The time label of ``latent_end``.

        Returns
        -------
        :class:`~mixsim.processes.EnvironmentPath`
            Times ``end - steps, ..., end``; the first entry's innovation and
            noise are unpaired (NaN) until the path is extended further.
        """

        if steps < 1:
            raise ValueError("steps must be at least 1")

        spec = self.covariates
        latent_end = np.asarray(latent_end)
        size = len(latent_end)
        latent, innovations = self._allocate(size, steps + 1)
        latent[:, steps] = latent_end

        for t in range(steps, 0, -1):
            latent[:, t - 1], innovations[:, t] = spec.reverse_step(latent[:, t], rng)

        eps = self._noise(innovations, noise_rng)
        return EnvironmentPath(latent, spec.observe(latent), innovations, eps=eps, start=end - steps)


def gen_covariates(spec, horizon, rng, return_latent=False):
    """
    Draw a stationary covariate path.

    Parameters
    ----------
    spec: :class:`~mixsim.processes.CovariateProcessSpec`
        The covariate process.
    horizon: int
        The path length.
    rng: :class:`~mixsim.utils.RngStream`
        The random stream.
    return_latent: bool
        Also return the latent path (the pre-clip series for the AR kind).

    Returns
    -------
    x: :class:`numpy.ndarray`
        The covariates with shape ``(horizon, d)``.
    """

    path = JointEnvironment(spec).forward(horizon, rng, size=1)

    if return_latent:
        return path.x[0], path.latent[0]
    return path.x[0]


def alpha_envelope(spec, n_max=50):
    """
    Upper bounds on the mixing coefficients of a finite covariate process.

    The tabulated values are the exact coefficients between :math:`X_0` and
    :math:`X_n` (:func:`~mixsim.mixing.alpha_markov_exact`), which for a
    Markov chain coincide with those of its past and future sigma-fields.
    Beyond ``n_max`` a geometric tail follows from the Dobrushin coefficient
    :math:`\\bar{d}(n)`: :math:`\\alpha(n) \\leq \\bar{d}(n)/2` and
    :math:`\\bar{d}` is submultiplicative.

    Parameters
    ----------
    spec: :class:`~mixsim.processes.CovariateProcessSpec`
        An "iid" or "finite_markov" process.
    n_max: int
        The largest tabulated lag.

    Returns
    -------
    :class:`~mixsim.bounds.DecaySequence`
    """

    if not spec.finite:
        raise ValueError(
            "alpha_envelope is unsupported for '{}' processes; supply a user sequence".format(spec.kind)
        )

    if spec.kind == "iid":
        return DecaySequence.zeros()

    values = np.minimum(markov_alpha_sequence(spec.stationary, spec.transition, n_max), 0.25)

    dbar = dobrushin_coefficient(np.linalg.matrix_power(spec.transition, n_max))
    if dbar == 0.0:
        return DecaySequence(values, tail="zero")

    if dbar >= 1.0 - 1e-15:
        warnings.warn(
            "The chain does not contract within {} steps; alpha_envelope has no certified tail".format(n_max)
        )
        return DecaySequence(values)

    ratio = dbar ** (1.0 / n_max)
    logger.debug("alpha_envelope tail ratio {:.4g} from dbar({}) = {:.3g}".format(ratio, n_max, dbar))

    # alpha(n) <= dbar(k)^floor(n/k) / 2 <= ratio^n / (2 dbar(k))
    return DecaySequence(values, tail="geometric", scale=0.5 / dbar, rate=ratio)
