"""
Markov chains in random environments: covariate-indexed kernel families,
Doeblin minorisation and the block coupling simulator.
"""

import itertools
import warnings

import numpy as np
from astropy.table import Table
from scipy.special import softmax

from .processes import CovariateProcessSpec, JointEnvironment
from .utils import StateSpace, check_stochastic_matrix, logger, sample_categorical

# stream id offsets (relative to the environment stream) used by the simulator
CHAIN_STREAM_OFFSET = 1 << 41
COUPLING_STREAM_OFFSET = 1 << 42
ENVIRONMENT_NOISE_OFFSET = 1 << 43

# largest number of covariate blocks enumerated exactly
MAX_EXACT_BLOCKS = 4096


class KernelFamily(object):
    """
    A family of Markov kernels :math:`x \\mapsto P_x` on a finite state space.

    Parameters
    ----------
    evaluator: callable
        A function mapping a covariate vector of shape ``(d,)`` to an
        ``(N, N)`` row-stochastic matrix. If ``vectorized`` is True it maps
        ``(R, d)`` covariates to ``(R, N, N)`` matrices instead.
    n_states: int
        The number of states N.
    block_length: int
        The block length m of the Doeblin condition.
    dimension: int
        The covariate dimension d.
    vectorized: bool
        Whether ``evaluator`` accepts a batch of covariates.
    """

    def __init__(self, evaluator, n_states, block_length=1, dimension=1, vectorized=False):
        if not callable(evaluator):
            raise TypeError("The kernel evaluator must be callable")
        if not isinstance(block_length, (int, np.integer)) or block_length < 1:
            raise ValueError("The block length must be a positive integer")

        self.evaluator = evaluator
        self.space = StateSpace(n_states)
        self.block_length = int(block_length)
        self.dimension = int(dimension)
        self.vectorized = vectorized

    @property
    def n_states(self):
        return self.space.size

    def kernel(self, x):
        """
        The transition matrix :math:`P_x`.
        """

        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.kernels(x[None, :])[0]

    def kernels(self, x):
        """
        Transition matrices for a batch of covariates of shape ``(R, d)``.
        """

        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[:, None] if self.dimension == 1 else x[None, :]
        if x.shape[-1] != self.dimension:
            raise ValueError("Covariates have dimension {}, expected {}".format(x.shape[-1], self.dimension))

        if self.vectorized:
            matrices = np.asarray(self.evaluator(x), dtype=float)
        else:
            matrices = np.stack([np.asarray(self.evaluator(xi), dtype=float) for xi in x])

        n = self.n_states
        if matrices.shape != (len(x), n, n):
            raise ValueError("Kernel evaluator returned shape {}, expected {}".format(matrices.shape, (len(x), n, n)))

        return check_stochastic_matrix(matrices, atol=1e-9, name="kernel")


def _is_regular(pattern):
    # some power of the support pattern is strictly positive (Wielandt bound)
    n = len(pattern)
    power = pattern.astype(np.int64)
    for _ in range((n - 1) ** 2 + 1):
        if np.all(power > 0):
            return True
        power = np.minimum(power @ pattern.astype(np.int64), 1)
    return bool(np.all(power > 0))


def softmax_family(theta, supports=None, block_length=1):
    """
    The kernel family
    :math:`P_x(i, j) = \\exp(\\theta_{i,j}^T x) / \\sum_{\\ell \\in J_i}\\exp(\\theta_{i,\\ell}^T x)`
    for :math:`j \\in J_i` and zero otherwise.

    Parameters
    ----------
    theta: array_like
        Coefficients of shape ``(N, N, d)`` (or ``(N, N)`` for d = 1).
    supports: list
        For each state i the non-empty list :math:`J_i` of reachable states
        (defaults to every state).
    block_length: int
        The block length m.

    Returns
    -------
    :class:`~mixsim.doeblin.KernelFamily`
    """

    theta = np.asarray(theta, dtype=float)
    if theta.ndim == 2:
        theta = theta[..., None]
    if theta.ndim != 3 or theta.shape[0] != theta.shape[1]:
        raise ValueError("theta must have shape (N, N, d)")

    n = theta.shape[0]
    mask = np.ones((n, n), dtype=bool)
    if supports is not None:
        if len(supports) != n:
            raise ValueError("One support set is needed per state")
        mask[:] = False
        for i, support in enumerate(supports):
            if len(support) == 0:
                raise ValueError("The support set of state {} is empty".format(i))
            mask[i, list(support)] = True

    if not _is_regular(mask):
        warnings.warn("The softmax support pattern is not regular: no power of it is strictly positive")

    def evaluator(x):
        logits = np.einsum("ijd,rd->rij", theta, x)
        logits = np.where(mask[None, :, :], logits, -np.inf)
        return softmax(logits, axis=-1)

    return KernelFamily(evaluator, n, block_length=block_length, dimension=theta.shape[2], vectorized=True)


def lag_embedding_family(H, n_states, p, dimension=1):
    """
    The kernel family of a p-lag categorical chain embedded in :math:`E^p`,
    with block length m = p.

    Parameters
    ----------
    H: callable
        ``H(lags, x)`` returns the ``(S, N)`` conditional probabilities of the
        next state for lag vectors ``lags`` of shape ``(S, p)`` (most recent
        first) and a covariate vector ``x``.
    n_states: int
        The number of states N.
    p: int
        The lag order.
    dimension: int
        The covariate dimension.
    """

    space = StateSpace(n_states)
    size = space.embedded_size(p)
    lags = space.decode(np.arange(size), p)

    def evaluator(x):
        probs = np.asarray(H(lags, x), dtype=float)
        matrix = np.zeros((size, size))
        for y in range(n_states):
            shifted = np.concatenate((np.full((size, 1), y), lags[:, : p - 1]), axis=1)
            matrix[np.arange(size), space.encode(shifted)] += probs[:, y]
        return matrix

    return KernelFamily(evaluator, size, block_length=p, dimension=dimension)


def m_step_product(family, z):
    """
    The block kernel :math:`P_{z_1} \\cdots P_{z_m}`.

    Parameters
    ----------
    family: :class:`~mixsim.doeblin.KernelFamily`
        The kernel family.
    z: array_like
        The covariate block, shape ``(m, d)``.
    """

    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if len(z) != family.block_length:
        raise ValueError("Covariate block of length {} but m = {}".format(len(z), family.block_length))

    kernels = family.kernels(z)
    product = kernels[0]
    for kernel in kernels[1:]:
        product = product @ kernel
    return product


class DoeblinParts(object):
    """
    The maximal Doeblin split :math:`\\Pi = \\eta \\nu + (1 - \\eta) R`.

    ``nu`` is ``None`` when :math:`\\eta = 0`; when :math:`\\eta = 1` the
    residual kernel is a uniform placeholder that must not be read.
    """

    def __init__(self, eta, nu, residual):
        self.eta = float(eta)
        self.nu = nu
        self._residual = residual

    @property
    def minorizing(self):
        return self.eta > 0.0

    @property
    def residual_used(self):
        return self.eta < 1.0

    @property
    def residual(self):
        if not self.residual_used:
            raise RuntimeError("The residual kernel is undefined when eta = 1")
        return self._residual

    def reconstruct(self):
        """
        The matrix :math:`\\eta \\nu + (1 - \\eta) R`.
        """

        out = np.zeros_like(self._residual)
        if self.minorizing:
            out += self.eta * self.nu[None, :]
        if self.residual_used:
            out += (1.0 - self.eta) * self._residual
        return out

    def __repr__(self):
        return "DoeblinParts(eta={:.6g})".format(self.eta)


def _decompose_stack(matrices):
    # vectorised Doeblin split of (R, N, N) matrices
    colmin = matrices.min(axis=-2)
    eta = colmin.sum(axis=-1)
    n = matrices.shape[-1]

    nu = np.zeros_like(colmin)
    positive = eta > 0.0
    nu[positive] = colmin[positive] / eta[positive, None]

    excess = matrices - colmin[..., None, :]
    rowsum = excess.sum(axis=-1, keepdims=True)
    residual = np.full_like(matrices, 1.0 / n)
    used = np.broadcast_to(rowsum > 0.0, matrices.shape)
    residual[used] = (excess / np.where(rowsum > 0.0, rowsum, 1.0))[used]

    # eta within rounding of one is a full minorisation
    eta = np.where(np.all(rowsum[..., 0] <= 0.0, axis=-1), 1.0, np.minimum(eta, 1.0))
    return eta, nu, residual


def doeblin_decompose(pi):
    """
    The maximal Doeblin decomposition of a row-stochastic matrix:
    :math:`\\eta = \\sum_y \\min_x \\Pi(x, y)`,
    :math:`\\nu(y) = \\min_x \\Pi(x, y)/\\eta` and
    :math:`R(x, y) = (\\Pi(x, y) - \\eta\\nu(y))/(1 - \\eta)`.

    Parameters
    ----------
    pi: array_like
        A row-stochastic matrix.

    Returns
    -------
    :class:`~mixsim.doeblin.DoeblinParts`
    """

    pi = check_stochastic_matrix(pi, name="matrix")
    if pi.ndim != 2:
        raise ValueError("doeblin_decompose takes a single matrix")

    eta, nu, residual = _decompose_stack(pi[None, :, :])
    return DoeblinParts(eta[0], nu[0] if eta[0] > 0.0 else None, residual[0])


def _coupling_laws(matrices, eta, nu, residual, y, y_prime):
    # joint law of the next block states of the coupled pair
    idx = np.arange(len(y))
    laws = eta[:, None, None] * (nu[:, :, None] * np.eye(matrices.shape[-1])[None, :, :])
    laws = laws + (1.0 - eta)[:, None, None] * (
        residual[idx, y][:, :, None] * residual[idx, y_prime][:, None, :]
    )

    same = y == y_prime
    if np.any(same):
        diag = np.zeros_like(laws[same])
        rows = matrices[idx[same], y[same]]
        diag[:, np.arange(matrices.shape[-1]), np.arange(matrices.shape[-1])] = rows
        laws[same] = diag

    return laws


def block_coupling_law(pi, y, y_prime):
    """
    The joint law of :math:`(Y_{b+m}, Y'_{b+m})` given
    :math:`(Y_b, Y'_b) = (y, y')` under the block coupling: equal states move
    together with :math:`\\Pi(y, \\cdot)`; different states coalesce on a draw
    from :math:`\\nu` with probability :math:`\\eta` and otherwise move
    independently with the residual kernel.

    Returns
    -------
    :class:`numpy.ndarray`
        An ``(N, N)`` joint probability table.
    """

    pi = check_stochastic_matrix(pi, name="block kernel")
    eta, nu, residual = _decompose_stack(pi[None])
    return _coupling_laws(pi[None], eta, nu, residual, np.array([y]), np.array([y_prime]))[0]


def bridge_law(family, z, y0, ym):
    """
    The conditional law of :math:`(Y_1, \\ldots, Y_{m-1})` given
    :math:`Y_0 = y_0` and :math:`Y_m = y_m` over a covariate block.

    Returns
    -------
    :class:`numpy.ndarray`
        A probability table with ``m - 1`` axes of length N.
    """

    if family.block_length < 2:
        raise ValueError("A bridge needs a block length of at least 2")

    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if len(z) != family.block_length:
        raise ValueError("Covariate block of length {} but m = {}".format(len(z), family.block_length))

    kernels = family.kernels(z)
    mass = kernels[0][y0]
    for kernel in kernels[1:-1]:
        mass = mass[..., :, None] * kernel
    mass = mass * kernels[-1][:, ym]

    total = mass.sum()
    if total <= 0.0:
        raise ValueError("The endpoints ({}, {}) have zero probability over the block".format(y0, ym))

    return mass / total


def _block_enumeration(spec, m):
    # all covariate blocks of a finite process with their probabilities
    for block in itertools.product(range(spec.nstates), repeat=m):
        prob = spec.stationary[block[0]]
        for a, b in zip(block[:-1], block[1:]):
            prob *= spec.transition[a, b]
        if prob > 0.0:
            yield np.array(block), prob


def _as_environment(env):
    if isinstance(env, CovariateProcessSpec):
        return JointEnvironment(env)
    if not isinstance(env, JointEnvironment):
        raise TypeError("env must be a CovariateProcessSpec or a JointEnvironment")
    return env


def expected_eta(family, env, rng=None, n_samples=100000):
    """
    The mean minorisation constant :math:`E\\eta_{Z_0}` over covariate blocks,
    so that :math:`\\rho = 1 - E\\eta_{Z_0}`.

    Finite environments are enumerated exactly when there are at most
    ``MAX_EXACT_BLOCKS`` blocks; otherwise ``n_samples`` blocks are drawn.

    Returns
    -------
    mean, standard_error: float
    """

    env = _as_environment(env)
    spec = env.covariates
    m = family.block_length

    if spec.finite and spec.nstates ** m <= MAX_EXACT_BLOCKS:
        kernels = family.kernels(spec.values)
        total = 0.0
        for block, prob in _block_enumeration(spec, m):
            product = kernels[block[0]]
            for k in block[1:]:
                product = product @ kernels[k]
            total += prob * _decompose_stack(product[None])[0][0]
        return float(total), 0.0

    if rng is None:
        raise ValueError("A random stream is needed to estimate E eta by Monte Carlo")

    path = env.forward(m, rng, size=n_samples)
    products = _block_products(family, path.x)
    eta = _decompose_stack(products)[0]
    return float(eta.mean()), float(eta.std(ddof=1) / np.sqrt(n_samples))


def eta_min(family, grid):
    """
    The smallest minorisation constant over covariate blocks drawn from a
    grid (for m > 1 every block of grid points is enumerated).

    Parameters
    ----------
    family: :class:`~mixsim.doeblin.KernelFamily`
        The kernel family.
    grid: array_like
        Covariate points of shape ``(G, d)``.
    """

    grid = np.asarray(grid, dtype=float)
    if grid.ndim == 1:
        grid = grid[:, None]

    kernels = family.kernels(grid)
    m = family.block_length
    if len(grid) ** m > 100 * MAX_EXACT_BLOCKS:
        raise ValueError("Too many covariate blocks ({}^{}) to enumerate".format(len(grid), m))

    best = 1.0
    for block in itertools.product(range(len(grid)), repeat=m):
        product = kernels[block[0]]
        for k in block[1:]:
            product = product @ kernels[k]
        best = min(best, float(_decompose_stack(product[None])[0][0]))
    return best


def _block_products(family, x):
    # products over consecutive covariates, x of shape (R, m, d)
    product = family.kernels(x[:, 0])
    for i in range(1, x.shape[1]):
        product = product @ family.kernels(x[:, i])
    return product


class CoupledPath(object):
    """
    Replicates of a coupled pair :math:`(Y_t, Y'_t)`.

    Attributes
    ----------
    y, y_prime: :class:`numpy.ndarray`
        The paths at times ``0, ..., horizon``, shape ``(R, horizon + 1)``;
        ``y_prime`` is -1 before the restart.
    restart: int
        The restart time r.
    block_length: int
        The block length m.
    disagreement: :class:`numpy.ndarray`
        The indicators :math:`1\\{Y_t \\neq Y'_t\\}` (False before r).
    coalescence_time: :class:`numpy.ndarray`
        The first block boundary with agreement (-1 if none).
    eta_block: :class:`numpy.ndarray`
        Per block minorisation constants (``None`` for map couplings).
    environment: :class:`numpy.ndarray`
        The latent environment states at times ``0, ..., horizon`` (``None``
        when not kept).
    """

    def __init__(self, y, y_prime, restart, block_length, disagreement, eta_block=None, environment=None):
        self.y = y
        self.environment = environment
        self.y_prime = y_prime
        self.restart = int(restart)
        self.block_length = int(block_length)
        self.disagreement = disagreement
        self.eta_block = eta_block

        boundaries = self.block_times
        agree = ~disagreement[:, boundaries]
        first = np.argmax(agree, axis=1)
        self.coalescence_time = np.where(agree.any(axis=1), boundaries[first], -1)

    @property
    def replicates(self):
        return self.y.shape[0]

    @property
    def horizon(self):
        return self.y.shape[1] - 1

    @property
    def block_times(self):
        return np.arange(self.restart, self.horizon + 1, self.block_length)

    def disagreement_curve(self):
        """
        Disagreement rates at the block boundaries :math:`r + s m`.

        Returns
        -------
        :class:`astropy.table.Table`
            Columns ``s``, ``t``, ``disagree_rate`` and ``se``.
        """

        times = self.block_times
        rate = self.disagreement[:, times].mean(axis=0)
        se = np.sqrt(rate * (1.0 - rate) / self.replicates)
        return Table(
            [np.arange(len(times)), times, rate, se],
            names=("s", "t", "disagree_rate", "se"),
        )

    def to_table(self):
        """
        One row per replicate and block boundary with the columns
        ``replicate``, ``t``, ``block_index``, ``disagree`` and ``eta_block``
        (NaN at the restart).
        """

        times = self.block_times
        nrep = self.replicates
        eta = np.full((nrep, len(times)), np.nan)
        if self.eta_block is not None:
            nb = min(self.eta_block.shape[1], len(times) - 1)
            eta[:, 1 : nb + 1] = self.eta_block[:, :nb]

        return Table(
            [
                np.repeat(np.arange(nrep), len(times)),
                np.tile(times, nrep),
                np.tile(np.arange(len(times)), nrep),
                self.disagreement[:, times].astype(np.int64).ravel(),
                eta.ravel(),
            ],
            names=("replicate", "t", "block_index", "disagree", "eta_block"),
        )


def _backward_initial(family, env, kernel_at, earliest, rng, noise_rng, chain_rng, max_depth):
    """
    Coupling from the past for the chain at time 0 with inverse-CDF maps
    driven by the realised environment, extended one step at a time.
    """

    n = family.n_states
    nrep = len(earliest)
    composed = np.tile(np.arange(n), (nrep, 1))
    states = np.arange(n)
    latent = earliest

    depth = 0
    while depth < max_depth:
        depth += 1
        step = env.backward(latent, 1, rng, noise_rng, end=1 - depth)
        latent = step.latent[:, 0]

        kernels = kernel_at(step, 0)
        u = chain_rng.uniform(nrep)
        maps = sample_categorical(kernels[:, states, :], np.repeat(u[:, None], n, axis=1))
        composed = np.take_along_axis(composed, maps, axis=1)

        if np.all(composed == composed[:, :1]):
            break

    failed = ~np.all(composed == composed[:, :1], axis=1)
    if np.any(failed):
        logger.warning(
            "{} of {} replicates did not coalesce within {} steps; using burn-in from state 0".format(
                failed.sum(), nrep, max_depth
            )
        )

    return composed[:, 0]


def simulate_mre_coupled(
    family, env, r, horizon, y0, rng, replicates=1, burn_in=None, init="burn_in", max_depth=1000
):
    """
    Simulate the block coupling of a Markov chain in a random environment
    and its copy restarted at time r.

    Before r the chain moves one step at a time with
    :math:`Y_{t+1} \\sim P_{X_t}(Y_t, \\cdot)`. From r the pair moves block by
    block with :func:`~mixsim.doeblin.block_coupling_law` applied to the
    block kernel of :math:`Z = (X_b, \\ldots, X_{b+m-1})`, and the states
    inside each block are filled in from the bridge law with shared uniforms.

    Parameters
    ----------
    family: :class:`~mixsim.doeblin.KernelFamily`
        The kernel family.
    env: :class:`~mixsim.processes.CovariateProcessSpec`, :class:`~mixsim.processes.JointEnvironment`
        The covariate environment.
    r: int
        The restart time, ``0 < r < horizon``.
    horizon: int
        The last simulated time.
    y0: int
        The restart state of the copy.
    rng: :class:`~mixsim.utils.RngStream`
        The environment stream; the chain and coupling streams are derived
        from it.
    replicates: int
        The number of independent replicates.
    burn_in: int
        The burn-in length from state 0 (default ``10 N m``).
    init: str
        "burn_in" or "backward" (exact coupling from the past, finite
        environments with N <= 8).
    max_depth: int
        The largest backward depth before falling back to burn-in.

    Returns
    -------
    :class:`~mixsim.doeblin.CoupledPath`
    """

    env = _as_environment(env)
    spec = env.covariates
    n = family.n_states
    m = family.block_length

    if not 0 < r < horizon:
        raise ValueError("The restart must satisfy 0 < r < horizon (got r={}, horizon={})".format(r, horizon))
    if y0 not in family.space:
        raise ValueError("The restart state {} is not in the state space".format(y0))
    if init not in ("burn_in", "backward"):
        raise ValueError("init must be 'burn_in' or 'backward'")
    if init == "backward" and (not spec.finite or n > 8):
        raise ValueError("Backward initialisation needs a finite environment and at most 8 states")

    burn_in = 10 * n * m if burn_in is None else int(burn_in)
    if burn_in < 0:
        raise ValueError("burn_in must be non-negative")

    chain_rng = rng.derive(CHAIN_STREAM_OFFSET)
    coupling_rng = rng.derive(COUPLING_STREAM_OFFSET)
    noise_rng = rng.derive(ENVIRONMENT_NOISE_OFFSET)

    if spec.finite:
        table = family.kernels(spec.values)

        def kernel_at(path, i):
            return table[path.latent[:, i]]

    else:

        def kernel_at(path, i):
            return family.kernels(path.x[:, i])

    nblocks = -(-(horizon - r) // m)
    last = r + nblocks * m

    latent0 = env.stationary_latent(rng, replicates)
    future = env.forward(last + 1, rng, size=replicates, initial=latent0, noise_rng=noise_rng)

    if init == "backward":
        y_start = _backward_initial(family, env, kernel_at, latent0, rng, noise_rng, chain_rng, max_depth)
    else:
        y_start = np.zeros(replicates, dtype=np.int64)
        if burn_in > 0:
            past = env.backward(latent0, burn_in, rng, noise_rng, end=0)
            for i in range(burn_in):
                y_start = sample_categorical(kernel_at(past, i)[np.arange(replicates), y_start], chain_rng.uniform(replicates))

    y = np.zeros((replicates, last + 1), dtype=np.int64)
    y_prime = np.full((replicates, last + 1), -1, dtype=np.int64)
    y[:, 0] = y_start
    idx = np.arange(replicates)

    for t in range(r):
        y[:, t + 1] = sample_categorical(kernel_at(future, t)[idx, y[:, t]], chain_rng.uniform(replicates))

    y_prime[:, r] = y0
    eta_block = np.zeros((replicates, nblocks))

    for k in range(nblocks):
        b = r + k * m
        kernels = [kernel_at(future, b + i) for i in range(m)]

        # backward products over the remaining kernels of the block
        remaining = [None] * (m + 1)
        remaining[m] = np.broadcast_to(np.eye(n), (replicates, n, n))
        for i in range(m - 1, -1, -1):
            remaining[i] = kernels[i] @ remaining[i + 1]

        eta, nu, residual = _decompose_stack(remaining[0])
        eta_block[:, k] = eta

        laws = _coupling_laws(remaining[0], eta, nu, residual, y[:, b], y_prime[:, b])
        pair = sample_categorical(laws.reshape(replicates, n * n), coupling_rng.uniform(replicates))
        y[:, b + m] = pair // n
        y_prime[:, b + m] = pair % n

        for i in range(1, m):
            u = coupling_rng.uniform(replicates)
            for path in (y, y_prime):
                weights = kernels[i - 1][idx, path[:, b + i - 1]] * remaining[i][idx, :, path[:, b + m]]
                weights /= weights.sum(axis=1, keepdims=True)
                path[:, b + i] = sample_categorical(weights, u)

    y = y[:, : horizon + 1]
    y_prime = y_prime[:, : horizon + 1]
    disagreement = np.zeros(y.shape, dtype=bool)
    disagreement[:, r:] = y[:, r:] != y_prime[:, r:]

    logger.debug("Simulated {} coupled MRE replicates over {} blocks".format(replicates, nblocks))

    return CoupledPath(
        y, y_prime, r, m, disagreement, eta_block=eta_block, environment=future.latent[:, : horizon + 1]
    )
