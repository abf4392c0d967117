"""
Infinite-memory models driven by a contracting intensity: binary
autoregressions and Poisson INGARCH models (identity and log-linear links)
with sequentially exogenous covariates, and the truncated-initialisation
coupling used to bound their mixing coefficients.
"""

import numpy as np
from astropy.table import Table
from numba import vectorize
from scipy import stats
from scipy.special import expit, ndtr

from .bounds import DecaySequence, omega
from .processes import JointEnvironment
from .utils import logger

#: response law and whether the intensity is a log-intensity, per model kind
CONTRACTION_KINDS = {
    "binary": {"response": "bernoulli", "log_intensity": False},
    "ingarch_identity": {"response": "poisson", "log_intensity": False},
    "ingarch_log": {"response": "poisson", "log_intensity": True},
}

#: binary link CDFs and their Lipschitz constants
LINK_CDFS = {
    "logistic": (expit, 0.25),
    "gaussian": (ndtr, 1.0 / np.sqrt(2.0 * np.pi)),
}

# truncation error target of the intensity series
TRUNCATION_TOLERANCE = 1e-12

# beyond this mean exp(-lambda) underflows and the ppf of scipy is used
POISSON_DIRECT_MAX = 700.0

# stream id offset of the environment noise stream
CONTRACTION_NOISE_STREAM_OFFSET = 1 << 45


@vectorize(["int64(float64, float64)"], nopython=True)
def _poisson_inversion(lam, u):
    p = np.exp(-lam)
    cdf = p
    k = 0
    # cap the search where the cumulative sum has saturated in floating point
    kmax = int(lam + 40.0 * np.sqrt(lam) + 100.0)
    while cdf < u and k < kmax:
        k += 1
        p *= lam / k
        cdf += p
    return k


def poisson_inv_cdf(lam, u):
    """
    The Poisson quantile function: the smallest k with
    :math:`F_\\lambda(k) \\geq u`, with the CDF accumulated in ascending order.

    Parameters
    ----------
    lam: float, array_like
        The Poisson mean(s). A zero mean gives zero.
    u: float, array_like
        Uniform draws in [0, 1).

    Returns
    -------
    int, :class:`numpy.ndarray`

    Raises
    ------
    ValueError
        If a mean is negative or not finite. A zero mean is accepted (the
        degenerate law at 0) so that restarted paths can start from the
        reference intensity 0.
    """

    lam = np.asarray(lam, dtype=float)
    u = np.asarray(u, dtype=float)

    if np.any(lam < 0.0) or not np.all(np.isfinite(lam)):
        raise ValueError("Poisson means must be finite and non-negative")

    lam, u = np.broadcast_arrays(lam, u)
    k = np.zeros(lam.shape, dtype=np.int64)

    direct = lam <= POISSON_DIRECT_MAX
    k[direct] = _poisson_inversion(lam[direct], u[direct])
    if np.any(~direct):
        k[~direct] = np.maximum(stats.poisson.ppf(u[~direct], lam[~direct]), 0).astype(np.int64)

    return k if k.ndim else int(k)


class ContractionModelSpec(object):
    """
    A model with intensity
    :math:`\\lambda_t = \\sum_{i \\geq 1}\\beta^{i-1}(\\kappa Y_{t-i} + \\delta^T X_{t-i})`,
    i.e. :math:`\\lambda_t = \\beta\\lambda_{t-1} + \\kappa Y_{t-1} + \\delta^T X_{t-1}`.

    The response is :math:`Y_t = 1\\{\\varepsilon_t > 1 - F(\\lambda_t)\\}`
    (binary), :math:`Y_t = F^{-1}_{\\lambda_t}(\\varepsilon_t)` for the Poisson
    law (identity link) or :math:`Y_t = \\log(1 + F^{-1}_{e^{\\lambda_t}}(\\varepsilon_t))`
    (log link), with uniform noise.

    Parameters
    ----------
    kind: str
        "binary", "ingarch_identity" or "ingarch_log".
    beta, kappa: float
        The intensity feedback and response coefficients.
    delta: array_like
        The covariate coefficients (length d). An intercept is a constant
        covariate.
    environment: :class:`~mixsim.processes.JointEnvironment`
        The covariate process and uniform noise.
    cdf: str
        The binary link CDF, "logistic" or "gaussian".
    truncation_depth: int
        The number of intensity series terms kept (defaults to the depth at
        which :math:`|\\beta|^{D}` falls below 1e-12).
    """

    def __init__(self, kind, beta, kappa, delta, environment, cdf="logistic", truncation_depth=None):
        if kind not in CONTRACTION_KINDS:
            raise ValueError(
                "Contraction model kind '{}' is not known; use one of {}".format(kind, sorted(CONTRACTION_KINDS))
            )
        if not isinstance(environment, JointEnvironment):
            raise TypeError("environment must be a JointEnvironment")
        if environment.noise is None or environment.noise.kind != "uniform01" or environment.noise.dimension != 1:
            raise ValueError("Contraction models need one-dimensional uniform01 noise")
        if cdf not in LINK_CDFS:
            raise ValueError("cdf must be one of {}".format(sorted(LINK_CDFS)))

        self.kind = kind
        self.beta = float(beta)
        self.kappa = float(kappa)
        self.delta = np.atleast_1d(np.asarray(delta, dtype=float))
        self.environment = environment
        self.cdf = cdf

        if len(self.delta) != environment.covariates.dimension:
            raise ValueError("delta must have one coefficient per covariate dimension")

        if self.contraction >= 1.0:
            raise ValueError(
                "The model is not contracting: |beta| + L_F |kappa| = {:.4g} must be below one".format(
                    self.contraction
                )
            )

        self.truncation_depth = truncation_depth

    @property
    def lipschitz(self):
        """
        The Lipschitz constant :math:`L_F` of the response in the intensity.
        """

        return LINK_CDFS[self.cdf][1] if self.kind == "binary" else 1.0

    @property
    def contraction(self):
        return abs(self.beta) + self.lipschitz * abs(self.kappa)

    @property
    def truncation_depth(self):
        return self._truncation_depth

    @truncation_depth.setter
    def truncation_depth(self, depth):
        if depth is None:
            if abs(self.beta) == 0.0:
                depth = 1
            else:
                depth = max(1, int(np.ceil(np.log(TRUNCATION_TOLERANCE) / np.log(abs(self.beta)))))
        if int(depth) < 1:
            raise ValueError("truncation_depth must be at least 1")
        self._truncation_depth = int(depth)

    @property
    def link_cdf(self):
        return LINK_CDFS[self.cdf][0]

    def __repr__(self):
        return "ContractionModelSpec(kind='{}', beta={}, kappa={}, delta={})".format(
            self.kind, self.beta, self.kappa, self.delta.tolist()
        )


def lambda_eval(spec, y_hist, x_hist):
    """
    The truncated intensity series
    :math:`\\sum_{i=1}^{D}\\beta^{i-1}(\\kappa y_i + \\delta^T x_i)`.

    Parameters
    ----------
    spec: :class:`~mixsim.contraction.ContractionModelSpec`
        The model.
    y_hist: array_like
        Past responses, most recent first (on the response scale, i.e.
        :math:`\\log(1 + \\textrm{count})` for the log link).
    x_hist: array_like
        Past covariates, most recent first, shape ``(length, d)``.

    Histories shorter than the truncation depth are padded with zeros.

    Returns
    -------
    float
    """

    depth = spec.truncation_depth
    d = len(spec.delta)

    y = np.zeros(depth)
    yh = np.asarray(y_hist, dtype=float)[:depth]
    y[: len(yh)] = yh

    x = np.zeros((depth, d))
    xh = np.asarray(x_hist, dtype=float).reshape(-1, d)[:depth]
    x[: len(xh)] = xh

    weights = spec.beta ** np.arange(depth)
    return float(weights @ (spec.kappa * y + x @ spec.delta))


def binary_step(lam, u, F="logistic"):
    """
    The binary response :math:`1\\{u > 1 - F(\\lambda)\\}`.

    Parameters
    ----------
    lam: float, array_like
        The intensity.
    u: float, array_like
        Uniform draws.
    F: str, callable
        "logistic", "gaussian" or a CDF.
    """

    cdf = LINK_CDFS[F][0] if isinstance(F, str) else F
    y = (np.asarray(u) > 1.0 - cdf(np.asarray(lam, dtype=float))).astype(np.int64)
    return y if y.ndim else int(y)


def step(spec, state, x, eps):
    """
    Advance the model by one time step.

    Parameters
    ----------
    spec: :class:`~mixsim.contraction.ContractionModelSpec`
        The model.
    state: tuple
        ``(lam_prev, y_prev)``: the previous intensity and response.
    x: array_like
        The previous covariates, shape ``(R, d)`` or ``(d,)``.
    eps: array_like
        Uniform draws at the current time.

    Returns
    -------
    y, lam, count:
        The response, the intensity and the integer count (the response
        itself for binary and identity-link models).
    """

    lam_prev, y_prev = state
    x = np.asarray(x, dtype=float)
    lam = spec.beta * np.asarray(lam_prev, dtype=float) + spec.kappa * np.asarray(y_prev, dtype=float)
    lam = lam + x @ spec.delta

    if spec.kind == "binary":
        y = binary_step(lam, eps, spec.link_cdf)
        return y, lam, y

    if spec.kind == "ingarch_identity":
        count = poisson_inv_cdf(lam, eps)
        return count, lam, count

    count = poisson_inv_cdf(np.exp(lam), eps)
    return np.log1p(count), lam, count


def intensity_path(spec, y, x, lam0=0.0):
    """
    Iterate the intensity recursion over given responses and covariates.

    Parameters
    ----------
    y: array_like
        Responses :math:`Y_0, \\ldots, Y_{T-1}` in time order.
    x: array_like
        Covariates :math:`X_0, \\ldots, X_{T-1}`, shape ``(T, d)``.
    lam0: float
        The intensity at time 0.

    Returns
    -------
    :class:`numpy.ndarray`
        The intensities :math:`\\lambda_0, \\ldots, \\lambda_T`.
    """

    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float).reshape(len(y), -1)
    lam = np.empty(len(y) + 1)
    lam[0] = lam0
    for t in range(len(y)):
        lam[t + 1] = spec.beta * lam[t] + spec.kappa * y[t] + x[t] @ spec.delta
    return lam


class CouplingDecayCurve(object):
    """
    Monte Carlo estimates of :math:`E\\Delta(Y_t, Y'_t)` and
    :math:`P(Y_t \\neq Y'_t)` after a restart at r.

    Attributes
    ----------
    restart: int
        The restart time r.
    t: :class:`numpy.ndarray`
        The times ``r + 1, ..., horizon``.
    delta_hat, delta_se: :class:`numpy.ndarray`
        The mean distance and its standard error.
    disagree_hat, disagree_se: :class:`numpy.ndarray`
        The disagreement frequency and its standard error.
    replicates: int
        The number of replicates.
    """

    def __init__(self, restart, t, delta_hat, delta_se, disagree_hat, disagree_se, replicates):
        self.restart = restart
        self.t = t
        self.delta_hat = delta_hat
        self.delta_se = delta_se
        self.disagree_hat = disagree_hat
        self.disagree_se = disagree_se
        self.replicates = replicates

    @property
    def lags(self):
        return self.t - self.restart

    def to_table(self):
        """
        The curve with the columns ``t``, ``delta_hat``, ``disagree_hat`` and
        ``se`` (the standard error of ``delta_hat``).
        """

        return Table(
            [self.t, self.delta_hat, self.disagree_hat, self.delta_se],
            names=("t", "delta_hat", "disagree_hat", "se"),
        )


def _environment_steps(env, steps, rng, noise_rng, size, chunk=128):
    """
    Yield :math:`(X_{t-1}, \\varepsilon_t)` for ``t = 1, ..., steps`` along one
    stationary path generated in chunks.
    """

    done = 0
    path = env.forward(min(chunk, steps) + 1, rng, size=size, noise_rng=noise_rng)
    while True:
        for k in range(1, path.length):
            yield path.x[:, k - 1], path.eps[:, k, 0]
            done += 1
            if done == steps:
                return
        path = env.forward(
            min(chunk, steps - done) + 1, rng, size=size, initial=path.latent[:, -1], noise_rng=noise_rng
        )


def simulate_truncated_coupled(spec, r, horizon, rng, replicates=1, burn_in=None):
    """
    Simulate a stationary path and its copy restarted at time r from the
    reference point (zero responses, zero intensity, covariates before r
    dropped), both driven by the same covariates and noise from r onward.

    Parameters
    ----------
    spec: :class:`~mixsim.contraction.ContractionModelSpec`
        The model.
    r: int
        The restart, ``0 < r < horizon``.
    horizon: int
        The last simulated time.
    rng: :class:`~mixsim.utils.RngStream`
        The environment stream.
    replicates: int
        The number of replicates.
    burn_in: int
        Steps simulated before time 0 from the reference point (defaults to
        ten times the truncation depth).

    Returns
    -------
    :class:`~mixsim.contraction.CouplingDecayCurve`
    """

    if not 0 < r < horizon:
        raise ValueError("The restart must satisfy 0 < r < horizon (got r={}, horizon={})".format(r, horizon))

    burn_in = 10 * spec.truncation_depth if burn_in is None else int(burn_in)
    if burn_in < 0:
        raise ValueError("burn_in must be non-negative")

    noise_rng = rng.derive(CONTRACTION_NOISE_STREAM_OFFSET)

    lam = np.zeros(replicates)
    y = np.zeros(replicates)
    lam_p = np.zeros(replicates)
    y_p = np.zeros(replicates)

    nlags = horizon - r
    dist = np.zeros((replicates, nlags))
    differ = np.zeros((replicates, nlags), dtype=bool)

    steps = _environment_steps(spec.environment, burn_in + horizon, rng, noise_rng, replicates)
    for k, (x_prev, eps) in enumerate(steps, start=1):
        t = k - burn_in
        y, lam, _ = step(spec, (lam, y), x_prev, eps)
        if t > r:
            y_p, lam_p, _ = step(spec, (lam_p, y_p), x_prev, eps)
            dist[:, t - r - 1] = np.abs(y - y_p)
            differ[:, t - r - 1] = y != y_p

    logger.debug("Simulated {} truncated coupling replicates to t={}".format(replicates, horizon))

    sqrtn = np.sqrt(replicates)
    disagree = differ.mean(axis=0)
    return CouplingDecayCurve(
        r,
        np.arange(r + 1, horizon + 1),
        dist.mean(axis=0),
        dist.std(axis=0, ddof=1) / sqrtn if replicates > 1 else np.zeros(nlags),
        disagree,
        np.sqrt(disagree * (1.0 - disagree) / replicates),
        replicates,
    )


def _poisson_sf_grid(means, tol):
    kmax = int(stats.poisson.isf(tol, max(means))) + 20
    k = np.arange(kmax + 1)
    return k, [stats.poisson.sf(k, mu) for mu in means]


def verify_mean_lipschitz(lam, lam_prime, link="identity", tol=1e-17):
    """
    The exact mean distance
    :math:`E|g(F^{-1}_\\lambda(U)) - g(F^{-1}_{\\lambda'}(U))|` under the
    comonotone coupling, next to the Lipschitz bound
    :math:`|\\lambda - \\lambda'|`.

    Under the quantile coupling the mean distance of increasing transforms of
    integer variables is :math:`\\sum_k (g(k+1) - g(k))|F(k) - F'(k)|`,
    evaluated here up to the point where both survival functions fall below
    ``tol``.

    Parameters
    ----------
    lam, lam_prime: float
        The intensities (Poisson means for the identity link, log-means for
        the log link).
    link: str
        "identity" (:math:`g(y) = y`) or "log" (:math:`g(y) = \\log(1 + y)`
        with means :math:`e^\\lambda`).

    Returns
    -------
    (float, float)
        The exact mean distance and the bound.
    """

    if link == "identity":
        if lam <= 0.0 or lam_prime <= 0.0:
            raise ValueError("Identity-link intensities must be positive")
        means = (lam, lam_prime)
        g = lambda k: k.astype(float)
    elif link == "log":
        means = (np.exp(lam), np.exp(lam_prime))
        g = np.log1p
    else:
        raise ValueError("link must be 'identity' or 'log'")

    k, (sf1, sf2) = _poisson_sf_grid(means, tol)
    increments = g(k + 1) - g(k)
    exact = float(np.sum(increments * np.abs(sf1 - sf2)))

    return exact, abs(lam - lam_prime)


class DerivedDecay(object):
    """
    The contraction sequences of a model:
    :math:`a_i = L_F|\\kappa||\\beta|^{i-1}` and
    :math:`b_j = L_F\\|\\delta\\|_1|\\beta|^{j-1}` for :math:`i, j \\geq 1`
    (zero at index 0).
    """

    def __init__(self, a, b):
        self.a = a
        self.b = b

    @property
    def a_sum(self):
        return self.a.tail_sum(1)

    def __repr__(self):
        return "DerivedDecay(a_sum={:.5g})".format(self.a_sum)


def derived_decay(spec):
    """
    The contraction sequences (a, b) of a model, with geometric tails.

    Returns
    -------
    :class:`~mixsim.contraction.DerivedDecay`
    """

    lf = spec.lipschitz
    beta = abs(spec.beta)
    a = DecaySequence.geometric(beta, scale=lf * abs(spec.kappa), start=1)
    b = DecaySequence.geometric(beta, scale=lf * float(np.abs(spec.delta).sum()), start=1)
    return DerivedDecay(a, b)


def disagreement_probability(spec, y_hist, y_hist_prime, x_hist, x_hist_prime=None):
    """
    The exact probability :math:`|F(\\lambda) - F(\\lambda')|` that a binary
    model produces different responses from two histories under common noise.
    """

    if spec.kind != "binary":
        raise ValueError("disagreement_probability is defined for binary models")

    x_hist_prime = x_hist if x_hist_prime is None else x_hist_prime
    lam = lambda_eval(spec, y_hist, x_hist)
    lam_prime = lambda_eval(spec, y_hist_prime, x_hist_prime)
    return float(abs(spec.link_cdf(lam) - spec.link_cdf(lam_prime)))


def fit_decay_rate(values, lags, weights=None):
    """
    Fit a log-linear decay :math:`\\log v_s = c + \\gamma s`.

    Parameters
    ----------
    values: array_like
        Positive values (non-positive entries are dropped).
    lags: array_like
        The lags s.

    Returns
    -------
    (float, float)
        The slope :math:`\\gamma` and its standard error.
    """

    values = np.asarray(values, dtype=float)
    lags = np.asarray(lags, dtype=float)
    keep = values > 0.0
    if keep.sum() < 3:
        raise ValueError("At least three positive values are needed to fit a decay rate")

    fit = stats.linregress(lags[keep], np.log(values[keep]))
    return float(fit.slope), float(fit.stderr)


class ShapeCheck(object):
    """
    The comparison of a coupling decay curve with the bound shape
    :math:`\\hat{L}\\omega_{r+s,r}^e`.
    """

    def __init__(self, lags, values, se, omegas, L_hat, calibration_lags, slope, slope_omega, tolerance=3.0):
        self.lags = lags
        self.values = values
        self.se = se
        self.omegas = omegas
        self.L_hat = L_hat
        self.calibration_lags = calibration_lags
        self.slope = slope
        self.slope_omega = slope_omega
        self.tolerance = tolerance

    @property
    def checked(self):
        return self.lags > self.calibration_lags

    @property
    def violations(self):
        """
        The checked lags where the curve exceeds
        :math:`\\hat{L}\\omega` by more than ``tolerance`` standard errors.
        """

        bound = self.L_hat * self.omegas + self.tolerance * self.se
        return self.lags[self.checked & (self.values > bound)]

    @property
    def dominated(self):
        return len(self.violations) == 0

    @property
    def rate_ok(self):
        """
        Whether the curve decays at least as fast as the bound shape, within
        the fitted standard error.
        """

        return self.slope[0] <= self.slope_omega[0] + self.slope[1]

    @property
    def passed(self):
        return self.dominated and self.rate_ok


def check_decay_shape(spec, curve, K=4.0, calibration_lags=3, max_lag=30, p_max=50, tolerance=3.0):
    """
    Compare a coupling decay curve with the shape of the truncation/
    contraction bound: the model constant is calibrated as the largest ratio
    over the first ``calibration_lags`` lags and domination (within
    ``tolerance`` Monte Carlo standard errors, 0 for a strict comparison) is
    checked on the remaining lags up to ``max_lag``.

    The curve compared is the mean distance, except for log-linear models
    where the disagreement frequency is compared with
    :math:`\\omega^{K/(K+1)}`.

    Returns
    -------
    :class:`~mixsim.contraction.ShapeCheck`
    """

    if tolerance < 0.0:
        raise ValueError("The tolerance must be non-negative")

    decay = derived_decay(spec)
    lags = curve.lags
    keep = lags <= max_lag
    lags = lags[keep]

    if spec.kind == "ingarch_log":
        values, se, exponent = curve.disagree_hat[keep], curve.disagree_se[keep], K / (K + 1.0)
    else:
        values, se, exponent = curve.delta_hat[keep], curve.delta_se[keep], 1.0

    omegas = np.array([omega(decay.a, decay.b, curve.restart + s, curve.restart, p_max=p_max) for s in lags])
    omegas = omegas ** exponent

    calibrate = lags <= calibration_lags
    if not np.any(calibrate) or np.any(omegas[calibrate] <= 0.0):
        raise ValueError("Cannot calibrate the model constant on lags {}".format(lags[calibrate]))
    L_hat = float(np.max(values[calibrate] / omegas[calibrate]))

    positive = values > 0.0
    if positive.sum() >= 3:
        slope = fit_decay_rate(values, lags)
    else:
        # nothing left to fit: the coupling has already succeeded
        slope = (-np.inf, 0.0)
    slope_omega = fit_decay_rate(omegas, lags)

    return ShapeCheck(lags, values, se, omegas, L_hat, calibration_lags, slope, slope_omega, tolerance=tolerance)
