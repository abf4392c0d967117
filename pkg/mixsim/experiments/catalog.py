"""
The built-in acceptance experiments.
"""

from collections import OrderedDict


class CatalogEntry(object):
    """
    A built-in experiment: an identifier, its experiment kind, a short
    description, the expected runtime and its configuration.
    """

    def __init__(self, identifier, kind, description, runtime, config):
        self.identifier = identifier
        self.kind = kind
        self.description = description
        self.runtime = runtime
        self.config = config

    def __repr__(self):
        return "CatalogEntry('{}', kind='{}')".format(self.identifier, self.kind)


_ENTRIES = [
    CatalogEntry(
        "doeblin-reconstruction",
        "doeblin_corpus",
        "Doeblin decomposition of random 5x5 stochastic matrices: exact reconstruction and maximal eta.",
        "< 5 s",
        """\
[experiment]
kind = doeblin_corpus
seed = 20210601
corpus_size = 1000
n_states = 5

[checks]
reconstruction_atol = 1e-12
maximality_atol = 1e-12
""",
    ),
    CatalogEntry(
        "block-coupling-domination",
        "mre_coupling",
        "Block coupling of a 2-state softmax chain on clipped AR(1) covariates against (1 - eta_min)^s.",
        "< 60 s",
        """\
[experiment]
kind = mre_coupling
seed = 20210602
replicates = 100000
r = 10
horizon = 30
y0 = 1
burn_in = 50

[environment]
kind = gaussian_ar1_clipped
phi = 0.5
sigma = 1.0
bound = 1.0

[model]
family = softmax
theta = [[[1.0], [0.0]], [[0.0], [1.0]]]
block_length = 1

[checks]
eta_min_domination = True
max_blocks = 20
grid_points = 201
""",
    ),
    CatalogEntry(
        "lemma-ult-corpus",
        "lemma_corpus",
        "Product expectations of 200 random 2-state chains against the mixing product bound (factors 1 and 4).",
        "< 10 s",
        """\
[experiment]
kind = lemma_corpus
seed = 20210603
corpus_size = 200
lemma = ult
s_max = 50
""",
    ),
    CatalogEntry(
        "lemma-ult3-corpus",
        "lemma_corpus",
        "Linear recursions with random coefficients against their closed-form bound.",
        "< 5 s",
        """\
[experiment]
kind = lemma_corpus
seed = 20210604
corpus_size = 100
lemma = ult3
t_max = 50

[checks]
atol = 1e-12
""",
    ),
    CatalogEntry(
        "bstar-vs-mc",
        "renewal",
        "Renewal return probabilities: exact recursion against Monte Carlo paths, and the constant case.",
        "< 30 s",
        """\
[experiment]
kind = renewal
seed = 20210605
paths = 100000
n_max = 30

[bounds]
b = {"tail": "geometric", "ratio": 0.5, "scale": 0.5}
constant = 0.3
""",
    ),
    CatalogEntry(
        "coalescence-positivity",
        "coalescence",
        "Coalescence probabilities of multinomial, ordinal and multiple choice maps against constructive lower bounds.",
        "< 60 s",
        """\
[experiment]
kind = coalescence
seed = 20210606
replicates = 100000
models = ["model:multinomial", "model:ordinal", "model:multiple_choice"]

[environment]
kind = finite_markov
transition = [[0.8, 0.2], [0.3, 0.7]]
values = [[-1.0], [1.0]]

[exogeneity]
mode = sequential
correlation = 0.5

[noise]
kind = uniform01

[noise:gaussian]
kind = gaussian_vector
dimension = 1

[noise:gumbel]
kind = gumbel_vector
dimension = 3

[model:multinomial]
kind = multinomial
n_states = 2
p = 1
link = softmax
regression = [{"intercept": 0.0}, {"intercept": 0.2, "lags": [[0.0, 1.0]], "covariates": [0.5]}]

[model:ordinal]
kind = ordinal
n_states = 3
p = 1
thresholds = [-0.5, 0.5]
noise = noise:gaussian
regression = {"intercept": 0.0, "lags": [[0.0, 0.3, 0.6]], "covariates": [0.4]}

[model:multiple_choice]
kind = multiple_choice
n_states = 3
p = 1
noise = noise:gumbel
regression = [{"intercept": 0.0, "lags": [[0.5, 0.0, 0.0]]}, {"intercept": 0.2, "lags": [[0.0, 0.5, 0.0]], "covariates": [0.3]}, {"intercept": -0.1, "lags": [[0.0, 0.0, 0.5]], "covariates": [-0.3]}]
""",
    ),
    CatalogEntry(
        "backward-forward-agreement",
        "backward_forward",
        "Backward (perfect) samples of a 2-state multinomial map model against a long forward run.",
        "< 60 s",
        """\
[experiment]
kind = backward_forward
seed = 20210607
replicates = 100000
forward_length = 100000
max_depth = 1000
models = ["model", "model:free"]

[environment]
kind = finite_markov
transition = [[0.9, 0.1], [0.2, 0.8]]
values = [[-1.0], [1.0]]

[environment:free]
kind = iid
probs = [1.0]
values = [[0.0]]

[noise]
kind = uniform01

[model]
kind = multinomial
n_states = 2
p = 1
regression = [{"intercept": 0.3, "lags": [[0.4, 0.0]], "covariates": [0.1]}, {"intercept": 0.7, "lags": [[-0.4, 0.0]], "covariates": [-0.1]}]

[model:free]
kind = multinomial
n_states = 2
p = 1
environment = environment:free
regression = [{"intercept": 0.3, "lags": [[0.4, 0.0]]}, {"intercept": 0.7, "lags": [[-0.4, 0.0]]}]
exact = [0.5, 0.5]

[checks]
tv_tolerance = 0.02
""",
    ),
    CatalogEntry(
        "restricted-alpha-domination",
        "alpha_curve",
        "Windowed mixing coefficients of a 2-state chain in a Markov environment against the optimised bound.",
        "< 120 s",
        """\
[experiment]
kind = alpha_curve
seed = 20210608
replicates = 100000
max_lag = 15
burn_in = 50
n_bootstrap = 50

[environment]
kind = finite_markov
transition = [[0.9, 0.1], [0.2, 0.8]]
values = [[-1.0], [1.0]]

[model]
family = softmax
theta = [[[1.0], [0.0]], [[0.0], [1.0]]]

[checks]
bound_domination = True
""",
    ),
    CatalogEntry(
        "poisson-mean-lipschitz",
        "poisson_lipschitz",
        "Exact mean distance of comonotone Poisson draws against the intensity difference.",
        "< 5 s",
        """\
[experiment]
kind = poisson_lipschitz
seed = 20210609

[model]
pairs = [(0.5, 0.7), (1.0, 2.0), (0.1, 0.2), (0.1, 10.0), (2.5, 3.0), (3.0, 7.5), (4.0, 4.5), (5.0, 9.0), (6.0, 6.1), (7.0, 10.0), (0.3, 1.3), (1.5, 8.0), (2.0, 2.0), (9.0, 9.9), (0.05, 5.0), (1.2, 1.25), (3.3, 4.4), (8.0, 10.0), (0.7, 9.3), (5.5, 6.5)]
log_pairs = [(0.0, 0.5), (-1.0, 1.0), (1.0, 2.0), (-2.0, -1.5)]

[checks]
atol = 1e-10
""",
    ),
    CatalogEntry(
        "contraction-coupling-shape",
        "contraction_coupling",
        "Truncated coupling of INGARCH and binary autoregressions against the shape of the contraction bound.",
        "< 120 s",
        """\
[experiment]
kind = contraction_coupling
seed = 20210610
replicates = 100000
r = 20
horizon = 50
models = ["model:ingarch", "model:binary"]

[environment]
kind = iid
probs = [0.5, 0.5]
values = [[1.0], [2.0]]

[noise]
kind = uniform01

[model:ingarch]
kind = ingarch_identity
beta = 0.3
kappa = 0.4
delta = [0.1]

[model:binary]
kind = binary
beta = 0.5
kappa = 0.3
delta = [0.1]
cdf = logistic

[checks]
calibration_lags = 3
max_lag = 30
tolerance = 3.0
K = 4.0
""",
    ),
    CatalogEntry(
        "alpha-exact-sanity",
        "alpha_sanity",
        "Exact mixing coefficients of product, perfectly correlated and random joint laws.",
        "< 10 s",
        """\
[experiment]
kind = alpha_sanity
seed = 20210611
corpus_size = 1000
max_alphabet = 5
""",
    ),
    CatalogEntry(
        "thm1-geometric-curve",
        "bounds_curve",
        "Coupling bound curve for an independent environment against the geometric closed form.",
        "< 5 s",
        """\
[experiment]
kind = bounds_curve
seed = 20210612

[bounds]
theorem = thm1
alpha = {"tail": "zero"}
rho = 0.5
m = 1
n_min = 5
n_max = 60
r = half
schedule = geometric

[checks]
closed_form = True
rtol = 1e-9
""",
    ),
]

_DETERMINISM = CatalogEntry(
    "determinism",
    "determinism",
    "Runs every other catalog experiment twice and compares the CSV bytes.",
    "< 10 min",
    """\
[experiment]
kind = determinism
seed = 0
targets = {}
""".format(
        [entry.identifier for entry in _ENTRIES]
    ),
)

#: the catalog, keyed by identifier
CATALOG = OrderedDict((entry.identifier, entry) for entry in _ENTRIES + [_DETERMINISM])


def get_entry(identifier):
    try:
        return CATALOG[identifier]
    except KeyError:
        raise KeyError("'{}' is not a catalog experiment; use one of {}".format(identifier, list(CATALOG)))
