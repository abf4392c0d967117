"""
Closed-form calculators for strong mixing bounds and the auxiliary decay
sequences they are built from.

Every infinite sum over :math:`t \\geq n` is evaluated term by term up to a
cap and completed with a certified remainder derived from the analytic tail
of its inputs, so that ``partial + remainder`` bounds the true sum from above.
"""

import warnings

import numpy as np
from numba import njit
from scipy.special import gamma, gammaincc, gammaln, zeta

from .utils import NonSummableError, check_stochastic_matrix, stationary_distribution

# allowed analytic tails and the meaning of their "rate" parameter
TAIL_KINDS = {
    "zero": None,
    "geometric": "ratio",
    "power": "exponent",
}


class DecaySequence(object):
    """
    A non-negative real sequence :math:`(u_i)_{i \\geq 0}` given by tabulated
    values and an optional analytic tail used beyond the tabulated range.

    Parameters
    ----------
    values: array_like
        The tabulated values :math:`u_0, \\ldots, u_{L-1}`.
    tail: str
        The kind of tail used for :math:`i \\geq L`: "zero", "geometric"
        (:math:`u_i = \\textrm{scale}\\,\\textrm{rate}^i`), "power"
        (:math:`u_i = \\textrm{scale}\\,i^{-\\textrm{rate}}`) or ``None`` for a
        purely tabulated sequence.
    scale: float
        The tail scale.
    rate: float
        The geometric ratio or the power-law exponent.
    """

    def __init__(self, values=(), tail=None, scale=0.0, rate=None):
        self.values = values
        self.tail = tail
        self.scale = scale
        self.rate = rate
        self._check_tail()

    @property
    def values(self):
        return self._values

    @values.setter
    def values(self, values):
        values = np.atleast_1d(np.asarray(values, dtype=float))
        if values.ndim != 1:
            raise ValueError("Sequence values must be one-dimensional")
        if np.any(values < 0.0) or not np.all(np.isfinite(values)):
            raise ValueError("Sequence values must be finite and non-negative")
        self._values = values
        self._values.setflags(write=False)

    @property
    def tail(self):
        return self._tail

    @tail.setter
    def tail(self, tail):
        if tail is not None and tail not in TAIL_KINDS:
            raise ValueError("Tail kind '{}' is not known".format(tail))
        self._tail = tail

    def _check_tail(self):
        if self.tail in ("geometric", "power"):
            if self.rate is None:
                raise ValueError("A {} tail needs a rate".format(self.tail))
            self.rate = float(self.rate)
            self.scale = float(self.scale)
            if self.scale < 0.0:
                raise ValueError("Tail scale must be non-negative")
        if self.tail == "geometric" and self.rate < 0.0:
            raise ValueError("Geometric ratio must be non-negative")
        if self.tail == "power":
            if self.rate <= 0.0:
                raise ValueError("Power-law exponent must be positive")
            if len(self.values) == 0:
                raise ValueError("A power tail needs at least the value at index 0")

    @classmethod
    def zeros(cls):
        """
        The identically zero sequence.
        """

        return cls([], tail="zero")

    @classmethod
    def geometric(cls, ratio, scale=1.0, start=0):
        """
        The sequence :math:`u_i = \\textrm{scale}\\,\\textrm{ratio}^{i - \\textrm{start}}`
        for :math:`i \\geq \\textrm{start}` and zero before.
        """

        if ratio < 0.0:
            raise ValueError("Geometric ratio must be non-negative")
        head = np.zeros(start + 1)
        head[start] = scale
        if ratio == 0.0 or scale == 0.0:
            return cls(head, tail="zero")
        return cls(head, tail="geometric", scale=scale / ratio ** start, rate=ratio)

    @classmethod
    def power(cls, exponent, scale=1.0, head=None):
        """
        The sequence :math:`u_i = \\textrm{scale}\\,i^{-\\textrm{exponent}}` for
        :math:`i \\geq 1`; ``head`` gives :math:`u_0` (defaults to ``scale``).
        """

        head = scale if head is None else head
        return cls([head], tail="power", scale=scale, rate=exponent)

    def __repr__(self):
        return "DecaySequence(values={}, tail={}, scale={}, rate={})".format(
            np.array2string(self.values, threshold=6), self.tail, self.scale, self.rate
        )

    @property
    def n_tabulated(self):
        return len(self.values)

    @property
    def summable(self):
        if self.tail == "zero":
            return True
        if self.tail == "geometric":
            return self.rate < 1.0 or self.scale == 0.0
        if self.tail == "power":
            return self.rate > 1.0 or self.scale == 0.0
        return False

    def values_at(self, indices):
        """
        Sequence values at an array of non-negative indices.
        """

        indices = np.asarray(indices, dtype=np.int64)
        if np.any(indices < 0):
            raise IndexError("Sequence indices must be non-negative")

        out = np.zeros(indices.shape, dtype=float)
        inside = indices < self.n_tabulated
        out[inside] = self.values[indices[inside]]

        outside = ~inside
        if np.any(outside):
            if self.tail is None:
                raise IndexError(
                    "Index {} is beyond the tabulated range ({}) of a sequence "
                    "without an analytic tail".format(indices[outside].max(), self.n_tabulated)
                )
            idx = indices[outside].astype(float)
            if self.tail == "geometric":
                out[outside] = self.scale * self.rate ** idx
            elif self.tail == "power":
                out[outside] = self.scale * idx ** (-self.rate)

        return out

    def __getitem__(self, index):
        return float(self.values_at(int(index)))

    def head(self, n):
        """
        The first ``n`` values.
        """

        return self.values_at(np.arange(n))

    def tail_sum(self, p):
        """
        The tail sum :math:`\\sum_{i \\geq p} u_i`.
        """

        p = max(int(p), 0)
        partial = float(self.values[p:].sum())
        if self.tail == "zero":
            return partial
        if not self.summable:
            raise NonSummableError("{} is not summable".format(self))

        first = max(p, self.n_tabulated)
        if self.scale == 0.0:
            return partial
        if self.tail == "geometric":
            return partial + self.scale * self.rate ** first / (1.0 - self.rate)
        return partial + self.scale * float(zeta(self.rate, first))

    def total(self):
        return self.tail_sum(0)

    def is_nonincreasing(self, n=None):
        """
        Check the first ``n`` values (default: tabulated range plus one) are
        non-increasing.
        """

        n = self.n_tabulated + 1 if n is None else n
        head = self.head(n)
        return bool(np.all(np.diff(head) <= 0.0))

    def geometric_envelope(self, start=1):
        """
        Constants ``(C, q)`` with ``q < 1`` such that :math:`u_i \\leq C q^i` for
        every :math:`i \\geq` ``start``.
        """

        if self.tail == "geometric" and self.rate > 0.0 and self.scale > 0.0:
            if self.rate >= 1.0:
                raise NonSummableError("{} has no geometric envelope".format(self))
            q = self.rate
            c = self.scale
        elif self.tail == "zero" or (self.tail in ("geometric", "power") and self.scale == 0.0):
            q = 0.5
            c = 0.0
        else:
            raise NonSummableError("{} has no geometric envelope".format(self))

        idx = np.arange(start, self.n_tabulated)
        if len(idx):
            c = max(c, float(np.max(self.values[idx] / q ** idx.astype(float))))

        return c, q


def tail_sums(e):
    """
    The sequence :math:`S_j = \\sum_{i \\geq j} e_i` as a
    :class:`~mixsim.bounds.DecaySequence`.

    Parameters
    ----------
    e: :class:`~mixsim.bounds.DecaySequence`
        A sequence with a zero or geometric tail.
    """

    if e.tail not in ("zero", "geometric") or not e.summable:
        raise NonSummableError("Tail sums need a zero or geometric tail")

    head = np.array([e.tail_sum(j) for j in range(e.n_tabulated)])
    if e.tail == "zero" or e.scale == 0.0:
        return DecaySequence(head, tail="zero")
    return DecaySequence(
        head, tail="geometric", scale=e.scale / (1.0 - e.rate), rate=e.rate
    )


class BoundResult(object):
    """
    The value of a bound together with the split between the explicitly
    summed part and the certified remainder of any truncated infinite sum.
    """

    def __init__(self, value, partial, remainder, **details):
        self.value = float(value)
        self.partial = float(partial)
        self.remainder = float(remainder)
        self.details = details

    def __float__(self):
        return self.value

    def __repr__(self):
        return "BoundResult(value={:.6g}, partial={:.6g}, remainder={:.3g})".format(
            self.value, self.partial, self.remainder
        )


class BoundInputs(object):
    """
    Inputs shared by the coupling bounds.

    Parameters
    ----------
    n: int
        The lag at which the mixing coefficient is bounded.
    r: int
        The restart time of the coupled path.
    m: int
        The block length.
    rho: float
        The non-coalescence probability, :math:`\\rho = 1 - E\\eta_{Z_0}`, in
        :math:`[0, 1)`.
    alpha: :class:`~mixsim.bounds.DecaySequence`
        The mixing coefficients of the environment.
    factor: float
        The covariance-inequality factor multiplying the mixing coefficients
        inside the infimum (default 4).
    lag_shift: int
        The lag used inside the infimum is ``(j - 1) m + lag_shift``. By
        default each bound uses its own convention: 1 for
        :func:`~mixsim.bounds.thm1_bound` and 0 for
        :func:`~mixsim.bounds.thm3_bound`.
    eta: float
        A deterministic minorization constant; when given, the infimum is
        replaced by :math:`(1 - \\eta)^{s_t(r)}`.
    """

    def __init__(self, n, r, m, rho, alpha, factor=4.0, lag_shift=None, eta=None):
        for name, value in (("n", n), ("r", r), ("m", m)):
            if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
                raise TypeError("{} must be an integer".format(name))
        if m < 1:
            raise ValueError("The block length m must be positive")
        if not 1 <= r <= n - 1:
            raise ValueError("The restart must satisfy 1 <= r <= n-1 (got r={}, n={})".format(r, n))
        if not 0.0 <= rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if not isinstance(alpha, DecaySequence):
            raise TypeError("alpha must be a DecaySequence")
        if eta is not None and not 0.0 <= eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if factor < 0.0:
            raise ValueError("factor must be non-negative")

        self.n = int(n)
        self.r = int(r)
        self.m = int(m)
        self.rho = float(rho)
        self.alpha = alpha
        self.factor = float(factor)
        self.lag_shift = None if lag_shift is None else int(lag_shift)
        self.eta = eta

    def s(self, t):
        """
        The number of complete blocks :math:`s_t(r) = \\lfloor (t - r)/m \\rfloor`.
        """

        return (np.asarray(t) - self.r) // self.m


def lemma_ult_bound(rho, alpha, s, factor=1.0, return_j=False):
    """
    The bound on :math:`E(\\kappa_1 \\cdots \\kappa_s)` for a stationary
    sequence with values in :math:`[0, 1]`, mean :math:`\\rho` and mixing
    coefficients :math:`\\alpha_\\kappa`:

    .. math::

        \\inf_{1 \\leq j \\leq s-1} \\left\\{\\rho^{\\lfloor s/j \\rfloor} +
        \\textrm{factor}\\,\\frac{\\alpha_\\kappa(j)}{1 - \\rho}\\right\\}.

    The factor defaults to one: for variables in :math:`[0, 1]` Hoeffding's
    covariance identity gives :math:`|\\textrm{Cov}(U, V)| \\leq \\alpha`.

    Parameters
    ----------
    rho: float
        The mean of the sequence.
    alpha: :class:`~mixsim.bounds.DecaySequence`
        The mixing coefficients.
    s: int
        The product length.
    factor: float
        The factor multiplying the mixing coefficients.
    return_j: bool
        Also return the minimising ``j``.
    """

    if s < 2:
        raise ValueError("The product length s must be at least 2")
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")

    j = np.arange(1, s)
    candidates = rho ** (s // j) + factor * alpha.values_at(j) / (1.0 - rho)
    best = int(np.argmin(candidates))

    if return_j:
        return float(candidates[best]), int(j[best])
    return float(candidates[best])


def lemma_ult_oracle(values, transition, s, initial=None):
    """
    The exact value of :math:`E(\\kappa_1 \\cdots \\kappa_s)` for
    :math:`\\kappa_t = v(X_t)` with :math:`(X_t)` a finite Markov chain,
    i.e., :math:`\\pi D (P D)^{s-1} \\mathbf{1}` with :math:`D = \\textrm{diag}(v)`.

    Parameters
    ----------
    values: array_like
        The values :math:`v` in :math:`[0, 1]` attached to each state.
    transition: array_like
        The transition matrix.
    s: int
        The product length (at least one).
    initial: array_like
        The law of :math:`X_1` (defaults to the stationary distribution).
    """

    values = np.asarray(values, dtype=float)
    transition = check_stochastic_matrix(transition, name="transition matrix")

    if s < 1:
        raise ValueError("The product length s must be at least 1")
    if np.any(values < 0.0) or np.any(values > 1.0):
        raise ValueError("Values must lie in [0, 1]")
    if len(values) != transition.shape[0]:
        raise ValueError("Values and transition matrix sizes differ")

    initial = stationary_distribution(transition) if initial is None else np.asarray(initial, dtype=float)

    weighted = transition * values[None, :]
    vec = initial * values
    for _ in range(s - 1):
        vec = vec @ weighted

    return float(vec.sum())


def lemma_ult3_bound(C, a, v, t, p):
    """
    The closed-form bound for sequences satisfying
    :math:`u_t \\leq \\sum_{i=1}^p a_i u_{t-i} + v_t` with :math:`u_t \\leq C`
    for :math:`t \\leq 0`:

    .. math::

        u_t \\leq C a^{(t \\vee 0)/p} + \\sum_{j \\geq 0} a^{j/p} v_{(t-j) \\vee 0},

    where :math:`a = \\sum_{i=1}^p a_i`.

    Parameters
    ----------
    C: float
        The bound on the initial values.
    a: :class:`~mixsim.bounds.DecaySequence`
        The coefficients, with ``a[0]`` unused.
    v: :class:`~mixsim.bounds.DecaySequence`
        A non-increasing sequence.
    t: int
        The time index.
    p: int
        The recursion order.
    """

    if p < 1:
        raise ValueError("The order p must be at least 1")

    asum = float(a.values_at(np.arange(1, p + 1)).sum())
    if asum >= 1.0:
        raise ValueError("The coefficients must sum to less than one (got {})".format(asum))

    root = asum ** (1.0 / p)
    tpos = max(int(t), 0)

    bound = C * asum ** (tpos / p)
    if tpos > 0:
        j = np.arange(tpos)
        bound += float(np.sum(root ** j * v.values_at(tpos - j)))
    bound += v[0] * root ** tpos / (1.0 - root)

    return float(bound)


def lemma_ult3_recursion(C, a, v, t_max, p):
    """
    Iterate :math:`u_t = \\sum_{i=1}^p a_i u_{t-i} + v_t` from :math:`u_t = C`
    for :math:`t \\leq 0`.

    Returns
    -------
    u: :class:`numpy.ndarray`
        The values :math:`u_0, \\ldots, u_{t_{\\max}}`.
    """

    coeffs = a.values_at(np.arange(1, p + 1))
    u = np.full(t_max + 1 + p, float(C))

    for t in range(1, t_max + 1):
        k = t + p
        # u_{t-1}, ..., u_{t-p}
        u[k] = float(coeffs @ u[k - p : k][::-1]) + v[t]

    return u[p:]


@njit
def _renewal_returns(bvalues):
    # return probabilities P(T_n = 0) of the chain with Q(i, i+1) = 1 - b_i
    # and Q(i, 0) = b_i started at zero
    n_max = len(bvalues) - 1
    out = np.zeros(n_max + 1)
    dist = np.zeros(n_max + 1)
    new = np.zeros(n_max + 1)
    dist[0] = 1.0
    out[0] = 1.0
    for n in range(1, n_max + 1):
        back = 0.0
        for i in range(n):
            back += dist[i] * bvalues[i]
        for i in range(n, 0, -1):
            new[i] = dist[i - 1] * (1.0 - bvalues[i - 1])
        new[0] = back
        for i in range(n + 1):
            dist[i] = new[i]
        out[n] = back
    return out


def _check_b(b, n):
    bvalues = b.head(n)
    if np.any(bvalues > 1.0):
        raise ValueError("Continuity coefficients b must lie in [0, 1]")
    return bvalues


def bstar_sequence(b, n_max):
    """
    The sequence :math:`b^*_n`: with :math:`(T_n)` the renewal chain started
    at zero with :math:`Q(i, i+1) = 1 - b_i` and :math:`Q(i, 0) = b_i`,
    :math:`b^*_n = P(T_n = 0)` for :math:`n \\geq 1` and, by convention,
    :math:`b^*_0 = b_0`.

    Parameters
    ----------
    b: :class:`~mixsim.bounds.DecaySequence`
        The continuity coefficients.
    n_max: int
        The largest index returned.

    Returns
    -------
    :class:`~mixsim.bounds.DecaySequence`
        The tabulated values :math:`b^*_0, \\ldots, b^*_{n_{\\max}}`.
    """

    if n_max < 0:
        raise ValueError("n_max must be non-negative")

    bvalues = _check_b(b, n_max + 1)
    out = _renewal_returns(bvalues)
    out[0] = bvalues[0]

    return DecaySequence(out)


def simulate_renewal(b, n_max, paths, rng):
    """
    Monte Carlo estimate of :math:`P(T_n = 0)` for the renewal chain.

    Parameters
    ----------
    b: :class:`~mixsim.bounds.DecaySequence`
        The continuity coefficients.
    n_max: int
        The number of steps.
    paths: int
        The number of simulated chains.
    rng: :class:`~mixsim.utils.RngStream`
        The random stream.

    Returns
    -------
    estimate, standard_error: :class:`numpy.ndarray`
        Arrays over :math:`n = 0, \\ldots, n_{\\max}`.
    """

    bvalues = _check_b(b, n_max + 1)
    state = np.zeros(paths, dtype=np.int64)
    estimate = np.zeros(n_max + 1)
    estimate[0] = 1.0

    for n in range(1, n_max + 1):
        back = rng.uniform(paths) < bvalues[state]
        state = np.where(back, 0, state + 1)
        estimate[n] = np.mean(state == 0)

    se = np.sqrt(estimate * (1.0 - estimate) / paths)
    return estimate, se


def _renewal_tail(b, cap):
    """
    A certified bound on :math:`\\sum_{n > \\textrm{cap}} P(T_n = 0)` from the
    generating-function inequality :math:`u_n z^n \\leq 1/(1 - F(z))`, where
    :math:`F` is the first-return generating function.
    """

    nfirst = max(cap, b.n_tabulated) + 1
    bvalues = _check_b(b, nfirst)

    # first-return probabilities f_k, k = 1..nfirst
    survive = np.concatenate(([1.0], np.cumprod(1.0 - bvalues[:-1])))
    first = survive * bvalues

    if b.tail == "zero" or (b.tail == "geometric" and b.scale == 0.0):
        if not np.any(first > 0.0):
            return 0.0
        qtail, ctail = 0.0, 0.0
        zmax = 10.0
    elif b.tail == "geometric" and b.rate < 1.0:
        qtail, ctail = b.rate, b.scale
        zmax = 1.0 / b.rate if b.rate > 0.0 else 10.0
    else:
        raise NonSummableError("The b* tail needs b with a zero or geometric (ratio < 1) tail")

    if first.sum() >= 1.0 - 1e-14 and ctail == 0.0:
        raise NonSummableError("The renewal chain is recurrent: b* is not summable")

    k = np.arange(1, nfirst + 1, dtype=float)
    best = np.inf
    for frac in np.linspace(0.01, 0.99, 99):
        z = 1.0 + (zmax - 1.0) * frac
        with np.errstate(over="ignore"):
            fz = float(np.sum(first * z ** k))
            if ctail > 0.0:
                # sum_{k > nfirst} b_{k-1} z^k with b_{k-1} = c q^{k-1}
                fz += ctail * z * (qtail * z) ** nfirst / (1.0 - qtail * z)
        if not np.isfinite(fz) or fz >= 1.0:
            continue
        bound = z ** (-(cap + 1)) / ((1.0 - fz) * (1.0 - 1.0 / z))
        best = min(best, bound)

    if not np.isfinite(best):
        raise NonSummableError("Could not certify a geometric envelope for b*")

    return float(best)


def thm2_bound(alphaX, b, S, x_l1, n, r, cap=200):
    """
    The mixing bound for chains with complete connections and strictly
    exogenous covariates:

    .. math::

        4\\alpha_X(r) + 2\\sum_{t \\geq n-r-1} b^*_t + 4\\|X_0\\|_1 \\sum_{t\\geq n-r} S_t
        + 4\\|X_0\\|_1 \\sum_{t \\geq n-r-1} (b^* \\ast S)_t.

    Parameters
    ----------
    alphaX: :class:`~mixsim.bounds.DecaySequence`
        The covariate mixing coefficients.
    b: :class:`~mixsim.bounds.DecaySequence`
        The continuity coefficients :math:`b_m`.
    S: :class:`~mixsim.bounds.DecaySequence`
        The tail sums :math:`S_j` of the covariate sensitivity coefficients
        (see :func:`~mixsim.bounds.tail_sums`).
    x_l1: float
        The first absolute moment of the covariates.
    n, r: int
        The lag and the restart, with ``1 < r < n``.
    cap: int
        The truncation index of the explicit sums.

    Returns
    -------
    :class:`~mixsim.bounds.BoundResult`
    """

    if not 1 < r < n:
        raise ValueError("The restart must satisfy 1 < r < n (got r={}, n={})".format(r, n))
    if x_l1 < 0.0:
        raise ValueError("x_l1 must be non-negative")

    t0 = n - r - 1
    cap = max(cap, t0 + 1)

    bstar = bstar_sequence(b, cap).values
    tail_b = _renewal_tail(b, cap)

    partial = 4.0 * alphaX[r] + 2.0 * bstar[t0:].sum()
    remainder = 2.0 * tail_b

    if x_l1 > 0.0:
        Svalues = S.head(cap + 1)
        conv = np.convolve(bstar, Svalues)[: cap + 1]

        partial += 4.0 * x_l1 * (Svalues[n - r :].sum() + conv[t0:].sum())

        total_upper = (bstar.sum() + tail_b) * S.total()
        tail_conv = max(total_upper - conv.sum(), 0.0)
        remainder += 4.0 * x_l1 * (S.tail_sum(cap + 1) + tail_conv)

    return BoundResult(partial + remainder, partial, remainder, bstar=bstar)


@njit
def _schedule_infimum(rho, factor, alpha_by_j, s_values):
    # min over 1 <= j <= s-1 of rho^floor(s/j) + factor alpha_j / (1 - rho)
    out = np.empty(len(s_values))
    for k in range(len(s_values)):
        s = s_values[k]
        best = np.inf
        for j in range(1, s):
            val = rho ** (s // j) + factor * alpha_by_j[j] / (1.0 - rho)
            if val < best:
                best = val
        out[k] = best
    return out


def _integral_sqrt_decay(c, g, x0):
    # int_{x0}^inf x^g exp(-c sqrt(x)) dx
    if c == np.inf:
        return 0.0
    a = 2.0 * g + 2.0
    return float(2.0 * gammaincc(a, c * np.sqrt(x0)) * gamma(a) / c ** a)


def _schedule_tail(inputs, s_from, shift):
    """
    Certified bound on :math:`\\sum_{s \\geq s_{\\textrm{from}}} g(s)` where
    :math:`g(s)` is the infimum inside the coupling bounds.
    """

    rho = inputs.rho
    alpha = inputs.alpha
    m = inputs.m
    coeff = inputs.factor / (1.0 - rho)
    x0 = float(s_from - 1)

    if inputs.eta is not None:
        if inputs.eta <= 0.0:
            raise NonSummableError("(1 - eta)^s is not summable for eta = 0")
        return (1.0 - inputs.eta) ** s_from / inputs.eta

    if alpha.tail == "zero" or (alpha.tail in ("geometric", "power") and alpha.scale == 0.0):
        j0 = _zero_alpha_block(alpha, m, shift)
        return j0 * rho ** (s_from // j0) / (1.0 - rho)

    if alpha.tail == "geometric":
        if alpha.rate >= 1.0:
            raise NonSummableError("alpha has a geometric tail with ratio >= 1")
        # j = ceil(sqrt(s))
        crho = -np.log(rho) if rho > 0.0 else np.inf
        aterm = _integral_sqrt_decay(crho, 0.0, x0) / rho ** 2 if rho > 0.0 else 0.0
        if alpha.rate == 0.0:
            bterm = 0.0
        else:
            cq = -m * np.log(alpha.rate)
            bterm = alpha.scale * alpha.rate ** (shift - m) * _integral_sqrt_decay(cq, 0.0, x0)
        return aterm + coeff * bterm

    if alpha.tail == "power":
        kappa = alpha.rate
        schedule = rate_schedule("power", 2, kappa=kappa)
        ell = schedule.ell
        beta = 1.0 - ell
        if rho > 0.0:
            lam = -np.log(rho) / 2.0
            shape = 1.0 / beta
            with np.errstate(divide="ignore"):
                logupper = np.log(gammaincc(shape, lam * x0 ** beta)) + gammaln(shape)
            aterm = np.exp(logupper - shape * np.log(lam)) / (beta * rho)
        else:
            aterm = 0.0
        bterm = alpha.scale * 2.0 ** kappa * x0 ** (1.0 - ell * kappa) / (ell * kappa - 1.0)
        return float(aterm + coeff * bterm)

    raise NonSummableError(
        "The coupling bound needs alpha with an analytic tail; a purely "
        "tabulated sequence would be silently truncated"
    )


def _zero_alpha_block(alpha, m, shift):
    # smallest j for which the lag (j-1)m + shift is beyond the support
    return max(1, int(np.ceil((alpha.n_tabulated - shift) / m)) + 1)


def _tail_validity(inputs, shift):
    # the smallest first-excluded s for which the tail envelope holds
    alpha = inputs.alpha
    m = inputs.m
    s_min = 5
    if inputs.eta is not None:
        return 1
    if alpha.tail == "zero" or alpha.scale == 0.0:
        return max(s_min, _zero_alpha_block(alpha, m, shift) + 1)
    if alpha.tail == "geometric":
        need = (max(alpha.n_tabulated - shift, 0) / m + 1.0) ** 2
        return max(s_min, int(np.ceil(need)) + 2)
    if alpha.tail == "power":
        ell = rate_schedule("power", 2, kappa=alpha.rate).ell
        s = s_min
        while True:
            sl = s ** ell
            if s - np.ceil(sl) >= 1 and sl >= 2.0 and (np.ceil(sl) - 1) * m + shift >= alpha.n_tabulated:
                return s + 1
            s += 1
    return s_min


def _coupling_bound(inputs, horizon_cap, head, default_shift):
    shift = default_shift if inputs.lag_shift is None else inputs.lag_shift
    n, r, m, rho = inputs.n, inputs.r, inputs.m, inputs.rho
    s_n = int(inputs.s(n))

    if inputs.eta is None and s_n < 2:
        raise ValueError(
            "The coupling bound needs s_n(r) = floor((n - r)/m) >= 2 (got {})".format(s_n)
        )

    s_cap = max((horizon_cap - r) // m, s_n, _tail_validity(inputs, shift) - 1)
    s_values = np.arange(s_n, s_cap + 1, dtype=np.int64)

    counts = np.full(len(s_values), m, dtype=float)
    counts[0] = (s_n + 1) * m + r - n

    if inputs.eta is not None:
        terms = (1.0 - inputs.eta) ** s_values.astype(float)
    else:
        j = np.arange(s_cap + 1)
        alpha_by_j = np.zeros(s_cap + 1)
        alpha_by_j[1:] = inputs.alpha.values_at((j[1:] - 1) * m + shift)
        terms = _schedule_infimum(rho, inputs.factor, alpha_by_j, s_values)

    partial = head + 2.0 * float(np.sum(counts * terms))
    remainder = 2.0 * m * _schedule_tail(inputs, s_cap + 1, shift)

    return BoundResult(
        partial + remainder,
        partial,
        remainder,
        s_values=s_values,
        terms=terms,
    )


def thm1_bound(inputs, horizon_cap=1000, head_factor=4.0):
    """
    The mixing bound for Markov chains in random environments:

    .. math::

        \\alpha_V(n) \\leq 4\\alpha_X(r) + 2\\sum_{t \\geq n}
        \\inf_{1 \\leq j \\leq s_t(r) - 1}\\left\\{\\rho^{\\lfloor s_t(r)/j \\rfloor}
        + \\frac{4\\alpha_X((j-1)m + 1)}{1 - \\rho}\\right\\}.

    With ``inputs.eta`` set, the infimum is replaced by
    :math:`(1 - \\eta)^{s_t(r)}`.

    Parameters
    ----------
    inputs: :class:`~mixsim.bounds.BoundInputs`
        The bound inputs. The lag inside the infimum is ``(j - 1) m + 1``
        unless ``inputs.lag_shift`` is set.
    horizon_cap: int
        The last time summed explicitly.
    head_factor: float
        The factor on :math:`\\alpha_X(r)`.

    Returns
    -------
    :class:`~mixsim.bounds.BoundResult`
    """

    return _coupling_bound(inputs, horizon_cap, head_factor * inputs.alpha[inputs.r], 1)


def thm3_bound(inputs, horizon_cap=1000):
    """
    The mixing bound for iterated random maps with sequentially exogenous
    covariates:

    .. math::

        \\alpha_V(n) \\leq \\alpha_\\zeta(r+1) + 2\\sum_{t \\geq n}
        \\inf_{1 \\leq j \\leq s_t(r) - 1}\\left\\{\\rho^{\\lfloor s_t(r)/j \\rfloor}
        + \\frac{4\\alpha_\\zeta((j-1)m)}{1 - \\rho}\\right\\}.

    The lag inside the infimum is ``(j - 1) m`` unless ``inputs.lag_shift``
    is set.
    """

    return _coupling_bound(inputs, horizon_cap, inputs.alpha[inputs.r + 1], 0)


def optimized_thm1_bound(alpha, rho, m, n, horizon_cap=1000, **kwargs):
    """
    The smallest :func:`~mixsim.bounds.thm1_bound` over the restarts ``r``
    with :math:`s_n(r) \\geq 2`, never larger than the universal bound 1/4.

    Returns
    -------
    result: :class:`~mixsim.bounds.BoundResult`
        ``result.details["r"]`` holds the optimal restart (``None`` when no
        restart is feasible).
    """

    best = BoundResult(0.25, 0.25, 0.0, r=None)
    for r in range(1, n):
        if (n - r) // m < 2:
            break
        inputs = BoundInputs(n, r, m, rho, alpha, **kwargs)
        result = thm1_bound(inputs, horizon_cap=max(horizon_cap, n + m))
        if result.value < best.value:
            best = result
            best.details["r"] = r
    return best


def coupling_bound(head, disagreement, n):
    """
    The generic bound assembly
    :math:`\\alpha_V(n) \\leq \\textrm{head} + 2\\sum_{t \\geq n} P(Y_t \\neq Y'_t)`.

    Parameters
    ----------
    head: float
        The bound on the mixing coefficient between the past of the process
        and the future of the restarted process.
    disagreement: :class:`~mixsim.bounds.DecaySequence`
        The disagreement probabilities indexed by time.
    n: int
        The lag.
    """

    partial = head + 2.0 * float(disagreement.values[n:].sum())
    total = head + 2.0 * disagreement.tail_sum(n)
    return BoundResult(total, partial, total - partial)


def omega(a, b, t, r, p_max=50, return_p=False):
    """
    The truncation/contraction trade-off

    .. math::

        \\omega_{t,r} = \\inf_{1 \\leq p \\leq p_{\\max}}\\left\\{a^{(t-r)/p} + S_{p+1}
        + \\sum_{j=0}^{t-r+1} a^{j/p} T_{t-r+1-j}\\right\\},

    with :math:`a = \\sum_i a_i`, :math:`S_p = \\sum_{i \\geq p} a_i` and
    :math:`T_s = \\sum_{j \\geq s} b_j`.

    Parameters
    ----------
    a, b: :class:`~mixsim.bounds.DecaySequence`
        The contraction coefficients (``a[0]`` and ``b[0]`` unused by the
        models, normally zero).
    t, r: int
        The time and the restart, with ``t > r``.
    p_max: int
        The largest truncation order tried.
    return_p: bool
        Also return the minimising order.
    """

    asum = a.tail_sum(1)
    if asum >= 1.0:
        raise ValueError("The contraction coefficients must sum to less than one (got {})".format(asum))

    k = int(t - r)
    if k < 1:
        raise ValueError("omega needs t > r")
    if p_max < 1:
        raise ValueError("p_max must be at least 1")

    kk = k + 1
    T = b.tail_sum(kk + 1) + np.cumsum(b.head(kk + 1)[::-1])[::-1]
    jj = np.arange(kk + 1)
    Trev = T[kk - jj]

    best, bestp = np.inf, None
    for p in range(1, p_max + 1):
        x = asum ** (1.0 / p)
        value = asum ** (k / p) + a.tail_sum(p + 1) + float(np.sum(x ** jj * Trev))
        if value < best:
            best, bestp = value, p

    if return_p:
        return float(best), bestp
    return float(best)


def _omega_tail(a, b, k0, exponent):
    """
    Certified bound on :math:`\\sum_{k \\geq k_0} \\omega_k^e` with
    :math:`k = t - r`, using the order :math:`p = \\lceil\\sqrt{k}\\rceil`.
    """

    asum = a.tail_sum(1)
    ca, qa = a.geometric_envelope()
    cb, qb = b.geometric_envelope()
    T0 = b.total()
    tau = cb / (1.0 - qb)

    # (constant, base, power of k) with omega_k <= sum constant k^g base^sqrt(k)
    pieces = []
    if asum > 0.0:
        pieces += [(1.0 / asum, asum, 0.0), ((T0 + 2.0 * tau) / asum, asum, 1.0)]
    if ca > 0.0:
        pieces.append((ca * qa / (1.0 - qa), qa, 0.0))
    if tau > 0.0:
        pieces.append((2.0 * tau, qb, 1.0))

    total = 0.0
    for const, base, power in pieces:
        if const == 0.0 or base == 0.0:
            continue
        c = -exponent * np.log(base)
        g = exponent * power
        x0 = float(k0 - 1)
        if g > 0.0 and np.sqrt(max(x0, 0.0)) <= 2.0 * g / c:
            return None
        total += const ** exponent * _integral_sqrt_decay(c, g, x0)

    return total


def cor_mixing_bound(kind, alpha_zeta, decay, n, r, L=1.0, K=4.0, p_max=50, cap=None):
    """
    The mixing bound for contraction models with sequentially exogenous
    covariates,
    :math:`\\alpha_\\zeta(r+1) + L\\sum_{t \\geq n}\\omega_{t,r}^{e}`, with
    :math:`e = 1` for binary and identity-link INGARCH models and
    :math:`e = K/(K+1)` for log-linear INGARCH models.

    Parameters
    ----------
    kind: str
        One of "binary", "ingarch_identity" or "ingarch_log".
    alpha_zeta: :class:`~mixsim.bounds.DecaySequence`
        The mixing coefficients of the covariate/noise process.
    decay: :class:`~mixsim.contraction.DerivedDecay`
        The contraction sequences (a, b).
    n, r: int
        The lag and the restart.
    L: float
        The model constant.
    K: float
        The moment exponent for the log-linear model.
    p_max: int
        The largest truncation order tried in each :func:`~mixsim.bounds.omega`.
    cap: int
        The last time summed explicitly (default ``n + 500``).

    Returns
    -------
    :class:`~mixsim.bounds.BoundResult`
    """

    if kind not in ("binary", "ingarch_identity", "ingarch_log"):
        raise ValueError("Model kind '{}' is not known".format(kind))
    if not 0 < r < n:
        raise ValueError("The restart must satisfy 0 < r < n")
    if K <= 0.0:
        raise ValueError("K must be positive")

    exponent = K / (K + 1.0) if kind == "ingarch_log" else 1.0
    cap = n + 500 if cap is None else max(cap, n)

    partial = alpha_zeta[r + 1]
    while True:
        omegas = np.array([omega(decay.a, decay.b, t, r, p_max=p_max) for t in range(n, cap + 1)])
        tail = _omega_tail(decay.a, decay.b, cap + 1 - r, exponent)
        if tail is not None:
            break
        # the envelope is only monotone far enough out
        cap *= 2

    partial += L * float(np.sum(omegas ** exponent))
    remainder = L * tail

    return BoundResult(partial + remainder, partial, remainder, omegas=omegas)


class RateSchedule(object):
    """
    The restart and block schedule used to turn the coupling bounds into
    rates: :math:`r = \\lfloor n/2 \\rfloor` and
    :math:`j = \\lceil s^\\ell \\rceil`.

    Parameters
    ----------
    kind: str
        "geometric" (:math:`\\ell = 1/2`) or "power".
    n: int
        The lag.
    ell: float
        The schedule exponent.
    degenerate: bool
        Whether the power schedule only barely satisfies :math:`\\ell\\kappa > 1`.
    """

    def __init__(self, kind, n, ell, degenerate=False):
        self.kind = kind
        self.n = n
        self.r = n // 2
        self.ell = ell
        self.degenerate = degenerate

    def j(self, s):
        """
        The block spacing for ``s`` complete blocks.
        """

        s = np.asarray(s)
        j = np.ceil(np.maximum(s, 1) ** self.ell).astype(np.int64)
        return np.clip(j, 1, np.maximum(s - 1, 1))

    def table(self, t, m=1):
        """
        Rows ``(t, s_t(r), j)`` for an array of times.
        """

        t = np.asarray(t, dtype=np.int64)
        s = (t - self.r) // m
        return np.column_stack((t, s, self.j(s)))


def rate_schedule(kind, n, kappa=None, ell=None):
    """
    The schedule turning the coupling bounds into rates.

    Parameters
    ----------
    kind: str
        "geometric" for geometrically decaying mixing coefficients
        (:math:`j = \\lceil\\sqrt{s}\\rceil`) or "power" for
        :math:`\\alpha(k) \\lesssim k^{-\\kappa}` with :math:`\\kappa > 1`.
    n: int
        The lag.
    kappa: float
        The power-law exponent.
    ell: float
        The schedule exponent for "power"; must satisfy :math:`\\ell < 1` and
        :math:`\\ell\\kappa > 1`. Defaults to :math:`(1 + 1/\\kappa)/2`.

    Returns
    -------
    :class:`~mixsim.bounds.RateSchedule`
    """

    if kind == "geometric":
        return RateSchedule(kind, n, 0.5)

    if kind != "power":
        raise ValueError("Schedule kind '{}' is not known".format(kind))

    if kappa is None or kappa <= 1.0:
        raise ValueError("A power schedule needs kappa > 1")

    if ell is None:
        ell = 0.5 * (1.0 + 1.0 / kappa)
    elif not 0.0 < ell < 1.0 or ell * kappa <= 1.0:
        raise ValueError("The schedule exponent must satisfy 0 < ell < 1 and ell * kappa > 1")

    degenerate = ell * kappa - 1.0 < 0.01 or ell > 0.99
    if degenerate:
        warnings.warn(
            "Power schedule with kappa={} is degenerate: ell * kappa - 1 = {:.3g}".format(
                kappa, ell * kappa - 1.0
            )
        )

    return RateSchedule(kind, n, ell, degenerate=degenerate)
