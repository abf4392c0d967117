"""
mixsim: strong mixing coefficients of Markov chains in random environments.
"""

__version__ = "0.1.0"

# register reader/writer
from . import iostream
from .bounds import DecaySequence, optimized_thm1_bound, thm1_bound, thm3_bound
from .doeblin import doeblin_decompose, simulate_mre_coupled
from .maps import MapModelSpec, backward_sample, simulate_maps_coupled
from .mixing import JointDistribution, alpha_exact
from .processes import CovariateProcessSpec, JointEnvironment, NoiseSpec
from .utils import RngStream, make_stream
