"""
Parsing and validation of experiment configuration files.

Configurations are INI files. Values that are lists, matrices or
dictionaries are given as Python literals.
"""

import ast
import configparser
import hashlib
import os
import re

import numpy as np

from ..bounds import DecaySequence
from ..contraction import ContractionModelSpec
from ..doeblin import softmax_family
from ..maps import LinearIndex, MapModelSpec
from ..processes import CovariateProcessSpec, ExogeneityMode, JointEnvironment, NoiseSpec, alpha_envelope
from ..utils import ConfigError

#: required sections and [experiment] keys for each experiment kind
EXPERIMENT_REQUIREMENTS = {
    "mre_coupling": {"sections": ["environment", "model"], "keys": ["replicates", "r", "horizon"]},
    "maps_coupling": {"sections": ["environment", "noise", "model"], "keys": ["replicates", "r", "horizon"]},
    "contraction_coupling": {"sections": ["environment"], "keys": ["replicates", "r", "horizon"]},
    "bounds_curve": {"sections": ["bounds"], "keys": []},
    "alpha_curve": {"sections": ["environment", "model"], "keys": ["replicates", "max_lag"]},
    "lemma_corpus": {"sections": [], "keys": ["corpus_size"]},
    "doeblin_corpus": {"sections": [], "keys": ["corpus_size"]},
    "renewal": {"sections": ["bounds"], "keys": ["paths", "n_max"]},
    "coalescence": {"sections": ["environment"], "keys": ["replicates"]},
    "backward_forward": {"sections": ["environment", "noise", "model"], "keys": ["replicates", "forward_length"]},
    "poisson_lipschitz": {"sections": [], "keys": []},
    "alpha_sanity": {"sections": [], "keys": ["corpus_size"]},
    "determinism": {"sections": [], "keys": []},
}

# kinds whose [experiment] section carries a restart r and a horizon
_RESTART_KINDS = ("mre_coupling", "maps_coupling", "contraction_coupling")

_REQUIRED = object()

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")


def _eval(value):
    """
    Evaluate a Python literal, returning the string itself if it is not one.
    """

    try:
        return ast.literal_eval(value)
    except (ValueError, SyntaxError):
        return value


class ExperimentConfig(object):
    """
    An experiment configuration.

    Parameters
    ----------
    data: str, bytes
        The configuration text.
    source: str
        The file name (or catalog id) used in error messages.
    """

    def __init__(self, data, source="<string>"):
        self.raw = data if isinstance(data, bytes) else data.encode("utf-8")
        self.text = self.raw.decode("utf-8")
        self.source = source

        self.parser = configparser.ConfigParser()
        try:
            self.parser.read_string(self.text, source=source)
        except configparser.Error as e:
            raise ConfigError("{}: {}".format(source, e))

        self.validate()

    @classmethod
    def from_file(cls, path):
        try:
            with open(path, "rb") as fp:
                data = fp.read()
        except OSError as e:
            raise IOError("Problem reading configuration file '{}'\n: {}".format(path, e))
        return cls(data, source=path)

    @property
    def sha256(self):
        """
        The SHA-256 digest of the exact configuration bytes.
        """

        return hashlib.sha256(self.raw).hexdigest()

    @property
    def kind(self):
        return self.get("experiment", "kind")

    @property
    def seed(self):
        return self.get("experiment", "seed", cast=int)

    @property
    def label(self):
        default = os.path.splitext(os.path.basename(self.source))[0].strip("<>")
        return str(self.get("experiment", "label", fallback=default))

    @property
    def outdir(self):
        return str(self.get("experiment", "outdir", fallback=os.path.join(os.getcwd(), "results")))

    def locate(self, section, key=None):
        """
        The line number of a key (or of the section header if no key is
        given) in the configuration text, or ``None``.
        """

        current = None
        keyre = None if key is None else re.compile(r"^\s*{}\s*[=:]".format(re.escape(key)), re.IGNORECASE)
        for lineno, line in enumerate(self.text.splitlines(), start=1):
            match = _SECTION_RE.match(line)
            if match:
                current = match.group(1).strip()
                if key is None and current == section:
                    return lineno
                continue
            if keyre is not None and current == section and keyre.match(line):
                return lineno
        return None

    def error(self, section, key, message):
        """
        A :class:`~mixsim.utils.ConfigError` anchored at the key's line.
        """

        lineno = self.locate(section, key) if key is not None else None
        if lineno is not None:
            return ConfigError("{}:{}: [{}] {}: {}".format(self.source, lineno, section, key, message))
        if key is not None:
            return ConfigError("{}: [{}]: {}: {}".format(self.source, section, key, message))
        return ConfigError("{}: [{}]: {}".format(self.source, section, message))

    def has(self, section, key=None):
        if key is None:
            return self.parser.has_section(section)
        return self.parser.has_option(section, key)

    def get(self, section, key, fallback=_REQUIRED, cast=None):
        """
        Get a configuration value, evaluated as a Python literal where
        possible.

        Parameters
        ----------
        section, key: str
            The section and key.
        fallback:
            The value returned when the key is absent; if not given the key
            is required.
        cast: callable
            A conversion applied to the value.
        """

        if not self.parser.has_option(section, key):
            if fallback is _REQUIRED:
                raise self.error(section, None, "missing required key '{}'".format(key))
            return fallback

        value = _eval(self.parser.get(section, key))
        if cast is not None:
            try:
                value = cast(value)
            except (TypeError, ValueError) as e:
                raise self.error(section, key, "could not convert '{}' ({})".format(value, e))
        return value

    def section(self, section, exclude=()):
        """
        All evaluated values of a section as a dictionary.
        """

        if not self.parser.has_section(section):
            raise self.error(section, None, "section is missing")
        return {
            key: _eval(value) for key, value in self.parser.items(section) if key not in exclude
        }

    def validate(self):
        """
        Check the experiment kind, the seed, the sections and keys the kind
        needs, and the restart constraints.
        """

        if not self.parser.has_section("experiment"):
            raise self.error("experiment", None, "section is missing")

        kind = self.kind
        if kind not in EXPERIMENT_REQUIREMENTS:
            raise self.error(
                "experiment", "kind", "unknown experiment kind; use one of {}".format(sorted(EXPERIMENT_REQUIREMENTS))
            )

        if not self.parser.has_option("experiment", "seed"):
            raise self.error("experiment", None, "missing required key 'seed' (seeds must be explicit)")
        if self.seed < 0:
            raise self.error("experiment", "seed", "the seed must be non-negative")

        requirement = EXPERIMENT_REQUIREMENTS[kind]
        for section in requirement["sections"]:
            if not self.parser.has_section(section):
                raise self.error(section, None, "section is required by '{}' experiments".format(kind))
        for key in requirement["keys"]:
            if not self.parser.has_option("experiment", key):
                raise self.error("experiment", None, "missing required key '{}'".format(key))

        if kind in _RESTART_KINDS:
            r = self.get("experiment", "r", cast=int)
            horizon = self.get("experiment", "horizon", cast=int)
            if not 1 <= r <= horizon - 1:
                raise self.error("experiment", "r", "the restart must satisfy 1 <= r <= n-1 (n = horizon)")

        if kind == "bounds_curve":
            for n in self.n_values():
                r = self.restart_for(n)
                if r is not None and not 1 <= r <= n - 1:
                    raise self.error("bounds", "r", "the restart must satisfy 1 <= r <= n-1 (got r={}, n={})".format(r, n))

        for key in ("replicates", "corpus_size", "paths"):
            if self.parser.has_option("experiment", key) and self.get("experiment", key, cast=int) < 1:
                raise self.error("experiment", key, "must be a positive integer")

    # -- bounds ---------------------------------------------------------------

    def n_values(self):
        """
        The lags of a bound curve: the ``n`` list, or ``range(n_min, n_max + 1)``.
        """

        if self.has("bounds", "n"):
            values = self.get("bounds", "n")
            return [int(v) for v in np.atleast_1d(values)]
        n_min = self.get("bounds", "n_min", cast=int)
        n_max = self.get("bounds", "n_max", cast=int)
        return list(range(n_min, n_max + 1))

    def restart_for(self, n):
        """
        The restart for lag n: a fixed ``r``, ``n // 2`` for "half" or ``None``
        for "optimized".
        """

        r = self.get("bounds", "r", fallback="half")
        if r == "half":
            return n // 2
        if r == "optimized":
            return None
        try:
            return int(r)
        except (TypeError, ValueError):
            raise self.error("bounds", "r", "use an integer, 'half' or 'optimized'")

    def decay_sequence(self, section, key, fallback=_REQUIRED):
        """
        A :class:`~mixsim.bounds.DecaySequence` from a dictionary literal
        ``{"tail": ..., "values": [...], "scale": ..., "ratio"/"exponent": ...}``
        or the string "envelope" (the mixing envelope of ``[environment]``).
        """

        value = self.get(section, key, fallback=fallback)
        if value is None or isinstance(value, DecaySequence):
            return value

        if value == "envelope":
            return alpha_envelope(self.covariates())

        if not isinstance(value, dict):
            raise self.error(section, key, "a decay sequence must be a dictionary or 'envelope'")

        tail = value.get("tail", None)
        try:
            if tail == "geometric" and "values" not in value:
                return DecaySequence.geometric(
                    value["ratio"], scale=value.get("scale", 1.0), start=value.get("start", 0)
                )
            if tail == "power" and "values" not in value:
                return DecaySequence.power(value["exponent"], scale=value.get("scale", 1.0), head=value.get("head"))
            rate = value.get("ratio", value.get("exponent"))
            return DecaySequence(value.get("values", ()), tail=tail, scale=value.get("scale", 0.0), rate=rate)
        except (KeyError, TypeError, ValueError) as e:
            raise self.error(section, key, "invalid decay sequence ({})".format(e))

    # -- processes and models -------------------------------------------------

    def covariates(self, section="environment"):
        """
        The :class:`~mixsim.processes.CovariateProcessSpec` of a section.
        """

        values = self.section(section, exclude=("kind", "dimension"))
        try:
            return CovariateProcessSpec(
                self.get(section, "kind"), parameters=values, dimension=self.get(section, "dimension", fallback=1)
            )
        except (KeyError, TypeError, ValueError) as e:
            raise self.error(section, None, str(e))

    def noise(self, section="noise"):
        """
        The :class:`~mixsim.processes.NoiseSpec` of a section (``None`` if the
        section is absent).
        """

        if not self.has(section):
            return None
        values = self.section(section, exclude=("kind", "dimension"))
        try:
            return NoiseSpec(
                self.get(section, "kind", fallback="uniform01"),
                dimension=self.get(section, "dimension", fallback=1),
                parameters=values,
            )
        except (KeyError, TypeError, ValueError) as e:
            raise self.error(section, None, str(e))

    def exogeneity(self, section="exogeneity"):
        if not self.has(section):
            return ExogeneityMode()
        try:
            return ExogeneityMode(
                self.get(section, "mode", fallback="strict"),
                correlation=self.get(section, "correlation", fallback=0.5, cast=float),
            )
        except ValueError as e:
            raise self.error(section, None, str(e))

    def environment(self, model="model"):
        """
        The :class:`~mixsim.processes.JointEnvironment` of a model section,
        which may name its own ``environment``, ``noise`` and ``exogeneity``
        sections.
        """

        return JointEnvironment(
            self.covariates(self.get(model, "environment", fallback="environment")),
            noise=self.noise(self.get(model, "noise", fallback="noise")),
            exogeneity=self.exogeneity(self.get(model, "exogeneity", fallback="exogeneity")),
        )

    def kernel_family(self, section="model"):
        """
        A softmax :class:`~mixsim.doeblin.KernelFamily` from ``theta``,
        ``supports`` and ``block_length``.
        """

        family = self.get(section, "family", fallback="softmax")
        if family != "softmax":
            raise self.error(section, "family", "only 'softmax' kernel families can be configured")
        try:
            return softmax_family(
                self.get(section, "theta"),
                supports=self.get(section, "supports", fallback=None),
                block_length=self.get(section, "block_length", fallback=1, cast=int),
            )
        except (TypeError, ValueError) as e:
            raise self.error(section, "theta", str(e))

    def map_model(self, section="model"):
        """
        A :class:`~mixsim.maps.MapModelSpec` with
        :class:`~mixsim.maps.LinearIndex` regressions given as dictionaries
        ``{"intercept": ..., "lags": [[...]], "covariates": [...]}``.
        """

        regression = self.get(section, "regression")
        if isinstance(regression, dict):
            regression = [regression]
        if not isinstance(regression, (list, tuple)) or not all(isinstance(r, dict) for r in regression):
            raise self.error(section, "regression", "give a dictionary or a list of dictionaries")

        try:
            return MapModelSpec(
                self.get(section, "kind"),
                self.get(section, "n_states", cast=int),
                [LinearIndex.from_dict(r) for r in regression],
                self.environment(section),
                p=self.get(section, "p", fallback=1, cast=int),
                thresholds=self.get(section, "thresholds", fallback=None),
                link=self.get(section, "link", fallback="identity"),
                block_length=self.get(section, "block_length", fallback=None),
            )
        except (TypeError, ValueError) as e:
            raise self.error(section, None, str(e))

    def contraction_model(self, section="model"):
        """
        A :class:`~mixsim.contraction.ContractionModelSpec`.
        """

        try:
            return ContractionModelSpec(
                self.get(section, "kind"),
                self.get(section, "beta", cast=float),
                self.get(section, "kappa", cast=float),
                self.get(section, "delta"),
                self.environment(section),
                cdf=self.get(section, "cdf", fallback="logistic"),
                truncation_depth=self.get(section, "truncation_depth", fallback=None),
            )
        except (TypeError, ValueError) as e:
            raise self.error(section, None, str(e))

    def model_sections(self):
        """
        The model sections of an experiment: the ``models`` list of
        ``[experiment]`` or ``["model"]``.
        """

        models = self.get("experiment", "models", fallback=["model"])
        if isinstance(models, str):
            models = [models]
        for model in models:
            if not self.has(model):
                raise self.error("experiment", "models", "section [{}] is missing".format(model))
        return list(models)
