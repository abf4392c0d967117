"""
Run configured experiments, write their metric tables and report the
verdicts of their acceptance checks.
"""

import itertools
import json
import os
import sys
import tempfile
import time
from collections import OrderedDict

import configargparse
import mixsim
import numpy as np

from ..bounds import (
    BoundInputs,
    DecaySequence,
    bstar_sequence,
    lemma_ult3_bound,
    lemma_ult3_recursion,
    lemma_ult_bound,
    lemma_ult_oracle,
    optimized_thm1_bound,
    rate_schedule,
    simulate_renewal,
    thm1_bound,
    thm3_bound,
)
from ..contraction import check_decay_shape, simulate_truncated_coupled, verify_mean_lipschitz
from ..doeblin import doeblin_decompose, eta_min, expected_eta, simulate_mre_coupled
from ..iostream import MetricTable
from ..maps import backward_sample, coalescence_lower_bound, estimate_rho, simulate_maps_coupled, simulate_maps_forward
from ..mixing import PartitionSpec, alpha_empirical, alpha_exact, markov_alpha_sequence, tv_distance
from ..processes import CovariateProcessSpec, alpha_envelope
from ..utils import ConfigError, logger, make_stream, setup_logger, stationary_distribution
from .catalog import CATALOG, get_entry
from .config import ExperimentConfig

#: fixed stream identifiers; an experiment never shares a stream between roles
STREAM_IDS = {
    "environment": 1,
    "corpus": 2,
    "bootstrap": 3,
    "forward": 4,
    "eta": 5,
}

#: experiment exit codes
EXIT_PASSED = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


class Verdict(object):
    """
    The outcome of one acceptance check.
    """

    def __init__(self, name, passed, detail=""):
        self.name = name
        self.passed = bool(passed)
        self.detail = detail

    def __repr__(self):
        return "Verdict('{}', {})".format(self.name, "PASS" if self.passed else "FAIL")

    def to_dict(self):
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


class RunReport(object):
    """
    The record of an experiment run.

    Parameters
    ----------
    config: :class:`~mixsim.experiments.config.ExperimentConfig`
        The configuration that was run.
    tables: dict
        Output file names keyed by table name.
    verdicts: list
        The :class:`~mixsim.experiments.runner.Verdict` of each check.
    findings: list
        Observations that are reported but not checked.
    wall_clock: float
        The run time in seconds.
    """

    def __init__(self, config, tables, verdicts, findings, wall_clock):
        self.config = config
        self.tables = tables
        self.verdicts = verdicts
        self.findings = findings
        self.wall_clock = wall_clock

    @property
    def passed(self):
        return all(v.passed for v in self.verdicts)

    def to_dict(self):
        return OrderedDict(
            [
                ("label", self.config.label),
                ("kind", self.config.kind),
                ("seed", self.config.seed),
                ("sha256", self.config.sha256),
                ("config", self.config.text),
                ("version", mixsim.__version__),
                ("tables", self.tables),
                ("verdicts", [v.to_dict() for v in self.verdicts]),
                ("findings", self.findings),
                ("wall_clock", self.wall_clock),
                ("passed", self.passed),
            ]
        )

    def write(self, filename):
        with open(filename, "w") as fp:
            json.dump(self.to_dict(), fp, indent=2)


def _stream(config, role, index=None):
    rng = make_stream(config.seed, STREAM_IDS[role])
    return rng if index is None else rng.substream(index)


def _table_name(section, name):
    return "{}_{}".format(section.replace(":", "-"), name)


def _sigma(se, p, n):
    # a standard error that stays positive when a frequency is 0 or 1
    p = np.clip(p, 1.0 / n, 1.0 - 1.0 / n)
    return np.maximum(se, np.sqrt(p * (1.0 - p) / n))


# -- coupling experiments -----------------------------------------------------


def _run_mre_coupling(config):
    family = config.kernel_family("model")
    env = config.environment("model")
    replicates = config.get("experiment", "replicates", cast=int)

    path = simulate_mre_coupled(
        family,
        env,
        config.get("experiment", "r", cast=int),
        config.get("experiment", "horizon", cast=int),
        config.get("experiment", "y0", fallback=0, cast=int),
        _stream(config, "environment"),
        replicates=replicates,
        burn_in=config.get("experiment", "burn_in", fallback=None),
        init=config.get("experiment", "init", fallback="burn_in"),
        max_depth=config.get("experiment", "max_depth", fallback=1000, cast=int),
    )

    curve = path.disagreement_curve()
    tables = {"disagreement_curve": MetricTable.from_table(curve, "disagreement_curve")}
    if config.get("experiment", "write_paths", fallback=False, cast=bool):
        tables["coupled_path"] = MetricTable.from_table(path.to_table(), "coupled_path")

    eta_mean, eta_se = expected_eta(family, env, rng=_stream(config, "eta"))
    findings = ["mean coupling probability per block E eta = {:.5f} (se {:.2g})".format(eta_mean, eta_se)]

    verdicts = []
    if config.get("checks", "eta_min_domination", fallback=False, cast=bool):
        grid = env.covariates.support(config.get("checks", "grid_points", fallback=21, cast=int))
        emin = eta_min(family, grid)
        max_blocks = config.get("checks", "max_blocks", fallback=len(curve) - 1, cast=int)

        s = np.asarray(curve["s"])
        keep = (s >= 1) & (s <= max_blocks)
        rate = np.asarray(curve["disagree_rate"])[keep]
        sigma = _sigma(np.asarray(curve["se"])[keep], rate, replicates)
        bound = (1.0 - emin) ** s[keep]
        bad = s[keep][rate > bound + 3.0 * sigma]
        verdicts.append(
            Verdict(
                "disagreement <= (1 - eta_min)^s",
                len(bad) == 0,
                "eta_min = {:.5f} over {} grid points; violations at s = {}".format(emin, len(grid), bad.tolist()),
            )
        )

    return tables, verdicts, findings


def _run_maps_coupling(config):
    spec = config.map_model("model")
    replicates = config.get("experiment", "replicates", cast=int)
    r = config.get("experiment", "r", cast=int)

    path = simulate_maps_coupled(
        spec,
        r,
        config.get("experiment", "horizon", cast=int),
        config.get("experiment", "y0", fallback=0, cast=int),
        _stream(config, "environment"),
        replicates=replicates,
        max_depth=config.get("experiment", "max_depth", fallback=1000, cast=int),
    )

    tables = {"disagreement_curve": MetricTable.from_table(path.disagreement_curve(), "disagreement_curve")}
    if config.get("experiment", "write_paths", fallback=False, cast=bool):
        tables["coupled_path"] = MetricTable.from_table(path.to_table(), "coupled_path")

    # identical maps keep coalesced pairs together
    after = path.disagreement[:, r:]
    reopened = np.any(after[:, 1:] & ~after[:, :-1], axis=1)
    verdicts = [
        Verdict(
            "coalesced pairs stay together",
            not np.any(reopened),
            "{} of {} replicates separated after agreeing".format(int(reopened.sum()), replicates),
        )
    ]

    coalesced = path.coalescence_time >= 0
    findings = ["{:.4f} of the replicates coalesced by t = {}".format(coalesced.mean(), path.horizon)]
    return tables, verdicts, findings


def _run_contraction_coupling(config):
    replicates = config.get("experiment", "replicates", cast=int)
    r = config.get("experiment", "r", cast=int)
    horizon = config.get("experiment", "horizon", cast=int)
    K = config.get("checks", "K", fallback=4.0, cast=float)

    tables, verdicts, findings = {}, [], []
    for i, section in enumerate(config.model_sections()):
        spec = config.contraction_model(section)
        curve = simulate_truncated_coupled(
            spec,
            r,
            horizon,
            _stream(config, "environment", i),
            replicates=replicates,
            burn_in=config.get(section, "burn_in", fallback=None),
        )
        tables[_table_name(section, "decay_curve")] = MetricTable.from_table(curve.to_table(), "decay_curve")

        check = check_decay_shape(
            spec,
            curve,
            K=K,
            calibration_lags=config.get("checks", "calibration_lags", fallback=3, cast=int),
            max_lag=config.get("checks", "max_lag", fallback=30, cast=int),
            tolerance=config.get("checks", "tolerance", fallback=3.0, cast=float),
        )
        verdicts.append(
            Verdict(
                "[{}] decay dominated by the bound shape".format(section),
                check.dominated,
                "L_hat = {:.4g}; violations at lags {}".format(check.L_hat, check.violations.tolist()),
            )
        )
        verdicts.append(
            Verdict(
                "[{}] decay rate at least the bound rate".format(section),
                check.rate_ok,
                "fitted log-slope {:.4g} (se {:.2g}) against {:.4g}".format(
                    check.slope[0], check.slope[1], check.slope_omega[0]
                ),
            )
        )
        findings.append("[{}] contraction constant {:.4g}".format(section, spec.contraction))

    return tables, verdicts, findings


# -- bound curves -------------------------------------------------------------


def _geometric_closed_form(rho, m, n, r):
    # the coupling bound for an independent environment
    s0 = (n - r) // m
    return 2.0 * (rho ** s0 * ((s0 + 1) * m + r - n) + m * rho ** (s0 + 1) / (1.0 - rho))


def _run_bounds_curve(config):
    theorem = config.get("bounds", "theorem", fallback="thm1")
    if theorem not in ("thm1", "thm3"):
        raise config.error("bounds", "theorem", "use 'thm1' or 'thm3'")

    alpha = config.decay_sequence("bounds", "alpha")
    rho = config.get("bounds", "rho", cast=float)
    m = config.get("bounds", "m", fallback=1, cast=int)
    kwargs = {
        "factor": config.get("bounds", "factor", fallback=4.0, cast=float),
        "lag_shift": config.get("bounds", "lag_shift", fallback=None, cast=int),
        "eta": config.get("bounds", "eta", fallback=None),
    }
    cap = config.get("bounds", "horizon_cap", fallback=1000, cast=int)
    kind = config.get("bounds", "schedule", fallback="geometric")
    kappa = config.get("bounds", "kappa", fallback=None)

    rows = []
    for n in config.n_values():
        r = config.restart_for(n)
        if r is None:
            if theorem != "thm1":
                raise config.error("bounds", "r", "optimised restarts are only available for thm1")
            result = optimized_thm1_bound(alpha, rho, m, n, horizon_cap=cap, **kwargs)
            r = result.details["r"]
        else:
            inputs = BoundInputs(n, r, m, rho, alpha, **kwargs)
            result = thm1_bound(inputs, horizon_cap=cap) if theorem == "thm1" else thm3_bound(inputs, horizon_cap=cap)

        schedule = rate_schedule(kind, n, kappa=kappa)
        j = int(schedule.j((n - schedule.r) // m))
        rows.append((n, -1 if r is None else r, result.value, result.remainder, schedule.r, j))

    columns = [np.array(c) for c in zip(*rows)]
    table = MetricTable.from_columns("bound_curve", columns)

    verdicts = [
        Verdict(
            "bounds are finite and non-negative",
            bool(np.all(np.isfinite(table["bound"])) and np.all(table["bound"] >= 0.0)),
        )
    ]

    if config.get("checks", "closed_form", fallback=False, cast=bool):
        if alpha.tail != "zero" or alpha.values.any() or kwargs["eta"] is not None:
            raise config.error("checks", "closed_form", "the closed form needs alpha identically zero")
        rtol = config.get("checks", "rtol", fallback=1e-9, cast=float)
        expected = np.array([_geometric_closed_form(rho, m, n, r) for n, r in zip(table["n"], table["r"])])
        worst = float(np.max(np.abs(table["bound"] - expected) / expected))
        verdicts.append(
            Verdict("bound matches the geometric closed form", worst <= rtol, "largest relative error {:.3g}".format(worst))
        )

    return {"bound_curve": table}, verdicts, []


def _joint_chain(family, spec):
    """
    The transition matrix of :math:`V_t = (Y_t, X_t)` for a finite strictly
    exogenous environment, with state code ``y * nx + x``.
    """

    kernels = family.kernels(spec.values)
    n, nx = family.n_states, spec.nstates
    joint = np.einsum("xab,xc->axbc", kernels, spec.transition)
    return joint.reshape(n * nx, n * nx)


def _run_alpha_curve(config):
    family = config.kernel_family("model")
    env = config.environment("model")
    spec = env.covariates
    replicates = config.get("experiment", "replicates", cast=int)
    max_lag = config.get("experiment", "max_lag", cast=int)

    edges = config.get("experiment", "edges", fallback=None)
    if edges is None:
        if not spec.finite:
            raise config.error("experiment", "edges", "partition edges are needed for continuous covariates")
        edges = [None, None]

    path = simulate_mre_coupled(
        family,
        env,
        1,
        max_lag + 1,
        0,
        _stream(config, "environment"),
        replicates=replicates,
        burn_in=config.get("experiment", "burn_in", fallback=None),
    )
    if spec.finite:
        paths = np.stack((path.y, path.environment), axis=-1)
    else:
        paths = np.concatenate((path.y[..., None], spec.observe(path.environment)), axis=-1)

    partition = PartitionSpec(edges)
    boot = _stream(config, "bootstrap")
    n_bootstrap = config.get("experiment", "n_bootstrap", fallback=200, cast=int)

    lags = np.arange(1, max_lag + 1)
    estimates = np.zeros(max_lag)
    se = np.zeros(max_lag)
    for i, lag in enumerate(lags):
        estimates[i], se[i] = alpha_empirical(paths, int(lag), partition, boot, origin=0, n_bootstrap=n_bootstrap)

    lag_col, alpha_col, se_col, flag_col = [lags], [estimates], [se], [np.zeros(max_lag, dtype=np.int64)]
    findings = []

    exact = None
    if spec.finite:
        transition = _joint_chain(family, spec)
        exact = markov_alpha_sequence(stationary_distribution(transition), transition, max_lag)[1:]
        lag_col.append(lags)
        alpha_col.append(exact)
        se_col.append(np.zeros(max_lag))
        flag_col.append(np.ones(max_lag, dtype=np.int64))

    table = MetricTable.from_columns(
        "alpha_curve", [np.concatenate(lag_col), np.concatenate(alpha_col), np.concatenate(se_col), np.concatenate(flag_col)]
    )

    verdicts = []
    if config.get("checks", "bound_domination", fallback=False, cast=bool):
        alpha = alpha_envelope(spec)
        eta_mean, _ = expected_eta(family, env, rng=_stream(config, "eta"))
        rho = 1.0 - eta_mean
        bounds = np.array([optimized_thm1_bound(alpha, rho, family.block_length, int(n)).value for n in lags])
        findings.append("rho = {:.5f}; bounds {}".format(rho, np.array2string(bounds, precision=4)))

        bad = lags[estimates > bounds + 3.0 * se]
        verdicts.append(
            Verdict(
                "estimated alpha <= bound",
                len(bad) == 0,
                "violations at lags {}".format(bad.tolist()),
            )
        )
        if exact is not None:
            bad = lags[exact > bounds + 1e-12]
            verdicts.append(Verdict("exact alpha <= bound", len(bad) == 0, "violations at lags {}".format(bad.tolist())))

    if exact is not None:
        # plug-in estimates are biased upwards
        bad = lags[estimates < exact - 3.0 * se - 1e-3]
        verdicts.append(
            Verdict("estimates agree with the exact coefficients", len(bad) == 0, "low at lags {}".format(bad.tolist()))
        )

    return {"alpha_curve": table}, verdicts, findings


# -- corpora ------------------------------------------------------------------


def _random_two_state(rng):
    p, q = 0.05 + 0.9 * rng.uniform(2)
    return np.array([[1.0 - p, p], [q, 1.0 - q]])


def _run_lemma_ult(config):
    rng = _stream(config, "corpus")
    size = config.get("experiment", "corpus_size", cast=int)
    s_max = config.get("experiment", "s_max", fallback=50, cast=int)
    s_values = np.arange(2, s_max + 1)

    rows = []
    worst4, worst1 = -np.inf, -np.inf
    for chain in range(size):
        transition = _random_two_state(rng)
        values = rng.uniform(2)
        spec = CovariateProcessSpec("finite_markov", {"transition": transition})
        alpha = alpha_envelope(spec, n_max=s_max)
        rho = float(spec.stationary @ values)

        for s in s_values:
            oracle = lemma_ult_oracle(values, transition, int(s))
            b1 = lemma_ult_bound(rho, alpha, int(s), factor=1.0)
            b4 = lemma_ult_bound(rho, alpha, int(s), factor=4.0)
            worst4 = max(worst4, oracle - b4)
            worst1 = max(worst1, oracle - b1)
            rows.append((chain, s, oracle, b1, b4))

    table = MetricTable.from_columns("lemma_corpus", [np.array(c) for c in zip(*rows)])
    nbad1 = int(np.sum(table["oracle"] > table["bound_factor1"] + 1e-12))

    verdicts = [
        Verdict(
            "product expectations <= bound (factor 4)",
            worst4 <= 1e-12,
            "largest excess {:.3g} over {} chains".format(worst4, size),
        )
    ]
    findings = ["factor 1: {} of {} cases exceed the bound (largest excess {:.3g})".format(nbad1, len(table), worst1)]
    return {"lemma_corpus": table}, verdicts, findings


def _run_lemma_ult3(config):
    rng = _stream(config, "corpus")
    size = config.get("experiment", "corpus_size", cast=int)
    t_max = config.get("experiment", "t_max", fallback=50, cast=int)
    atol = config.get("checks", "atol", fallback=1e-12, cast=float)

    rows = []
    worst = -np.inf
    for triple in range(size):
        p = int(rng.integers(1, 4))
        coeffs = rng.generator.dirichlet(np.ones(p)) * (0.1 + 0.8 * rng.uniform())
        a = DecaySequence(np.concatenate(([0.0], coeffs)), tail="zero")
        v = DecaySequence.geometric(0.3 + 0.65 * rng.uniform(), scale=rng.uniform())
        C = 2.0 * rng.uniform()

        recursion = lemma_ult3_recursion(C, a, v, t_max, p)
        for t in range(t_max + 1):
            bound = lemma_ult3_bound(C, a, v, t, p)
            worst = max(worst, recursion[t] - bound)
            rows.append((triple, t, recursion[t], bound))

    table = MetricTable.from_columns("lemma3_corpus", [np.array(c) for c in zip(*rows)])
    verdicts = [Verdict("recursion <= closed-form bound", worst <= atol, "largest excess {:.3g}".format(worst))]
    return {"lemma3_corpus": table}, verdicts, []


def _run_lemma_corpus(config):
    lemma = config.get("experiment", "lemma", fallback="ult")
    if lemma == "ult":
        return _run_lemma_ult(config)
    if lemma == "ult3":
        return _run_lemma_ult3(config)
    raise config.error("experiment", "lemma", "use 'ult' or 'ult3'")


def _run_doeblin_corpus(config):
    rng = _stream(config, "corpus")
    size = config.get("experiment", "corpus_size", cast=int)
    n = config.get("experiment", "n_states", fallback=5, cast=int)
    atol = config.get("checks", "reconstruction_atol", fallback=1e-12, cast=float)
    matol = config.get("checks", "maximality_atol", fallback=1e-12, cast=float)

    etas, errors, maximal = np.zeros(size), np.zeros(size), np.zeros(size, dtype=bool)
    for i in range(size):
        matrix = rng.generator.dirichlet(np.ones(n), size=n)
        parts = doeblin_decompose(matrix)
        etas[i] = parts.eta
        errors[i] = np.max(np.abs(parts.reconstruct() - matrix))
        # no mass is left to minorise in the residual
        maximal[i] = not parts.residual_used or parts.residual.min(axis=0).sum() <= matol

    table = MetricTable.from_columns("doeblin_corpus", [np.arange(size), etas, errors, maximal.astype(np.int64)])
    verdicts = [
        Verdict("reconstruction error <= {:g}".format(atol), errors.max() <= atol, "largest {:.3g}".format(errors.max())),
        Verdict("eta is maximal", maximal.all(), "{} non-maximal".format(int((~maximal).sum()))),
    ]
    findings = ["eta ranges over [{:.4f}, {:.4f}]".format(etas.min(), etas.max())]
    return {"doeblin_corpus": table}, verdicts, findings


def _run_renewal(config):
    b = config.decay_sequence("bounds", "b")
    n_max = config.get("experiment", "n_max", cast=int)
    paths = config.get("experiment", "paths", cast=int)

    bstar = bstar_sequence(b, n_max).values
    estimate, se = simulate_renewal(b, n_max, paths, _stream(config, "corpus"))
    n = np.arange(n_max + 1)
    table = MetricTable.from_columns("renewal", [n, bstar, estimate, se])

    sigma = _sigma(se[1:], bstar[1:], paths)
    bad = n[1:][np.abs(bstar[1:] - estimate[1:]) > 3.0 * sigma]
    verdicts = [Verdict("b* agrees with Monte Carlo", len(bad) == 0, "disagreement at n = {}".format(bad.tolist()))]

    if config.has("bounds", "constant"):
        c = config.get("bounds", "constant", cast=float)
        constant = bstar_sequence(DecaySequence(np.full(n_max + 1, c)), n_max).values[1:]
        worst = float(np.max(np.abs(constant - c)))
        verdicts.append(Verdict("constant b gives b*_n = b", worst <= 1e-12, "largest error {:.3g}".format(worst)))

    return {"renewal": table}, verdicts, []


# -- random maps --------------------------------------------------------------


def _run_coalescence(config):
    replicates = config.get("experiment", "replicates", cast=int)

    rows, verdicts = [], []
    for i, section in enumerate(config.model_sections()):
        spec = config.map_model(section)
        m = config.get(section, "m", fallback=spec.block_length, cast=int)
        if m < spec.p:
            raise config.error(section, "m", "the lower bound needs at least p = {} composed maps".format(spec.p))

        report = estimate_rho(spec, m, replicates, _stream(config, "environment", i))
        lower = coalescence_lower_bound(spec)
        rows.append((section, m, report.rho_hat, replicates, report.standard_error, lower))

        sigma = _sigma(report.standard_error, report.rho_hat, replicates)
        verdicts.append(
            Verdict(
                "[{}] 1 - rho_hat >= lower bound".format(section),
                1.0 - report.rho_hat >= lower - 3.0 * sigma,
                "1 - rho_hat = {:.5f}, lower bound {:.5f}".format(1.0 - report.rho_hat, lower),
            )
        )
        verdicts.append(Verdict("[{}] lower bound is positive".format(section), lower > 0.0))

    table = MetricTable.from_columns("coalescence", [np.array(c) for c in zip(*rows)])
    return {"coalescence": table}, verdicts, []


def _run_backward_forward(config):
    replicates = config.get("experiment", "replicates", cast=int)
    length = config.get("experiment", "forward_length", cast=int)
    max_depth = config.get("experiment", "max_depth", fallback=1000, cast=int)
    burn_in = config.get("experiment", "burn_in", fallback=100, cast=int)
    tol = config.get("checks", "tv_tolerance", fallback=0.02, cast=float)

    tables, verdicts, findings = {}, [], []
    for i, section in enumerate(config.model_sections()):
        spec = config.map_model(section)
        n = spec.n_states

        sample = backward_sample(spec, 0, max_depth, _stream(config, "environment", i), size=replicates)
        backward = np.bincount(sample.states, minlength=n) / replicates

        states = simulate_maps_forward(spec, length + burn_in, _stream(config, "forward", i))[0, burn_in + 1 :]
        forward = np.bincount(states, minlength=n) / len(states)

        exact = np.asarray(config.get(section, "exact", fallback=[np.nan] * n), dtype=float)
        tables[_table_name(section, "histogram")] = MetricTable.from_columns(
            "histogram", [np.arange(n), backward, forward, exact]
        )

        tv = tv_distance(backward, forward)
        verdicts.append(Verdict("[{}] TV(backward, forward) < {:g}".format(section, tol), tv < tol, "TV = {:.4g}".format(tv)))

        if np.all(np.isfinite(exact)):
            sigma = np.sqrt(exact * (1.0 - exact) / replicates)
            bad = np.flatnonzero(np.abs(backward - exact) > 3.0 * sigma + 1e-12)
            verdicts.append(
                Verdict("[{}] backward law matches the exact law".format(section), len(bad) == 0, "off at states {}".format(bad.tolist()))
            )

        findings.append(
            "[{}] backward failure rate {:.2g}, median depth {}".format(
                section, sample.failure_rate, int(np.median(sample.depth[~sample.failed])) if (~sample.failed).any() else -1
            )
        )

    return tables, verdicts, findings


# -- contraction checks and sanity corpora -------------------------------------


def _run_poisson_lipschitz(config):
    atol = config.get("checks", "atol", fallback=1e-10, cast=float)
    pairs = [(float(a), float(b), "identity") for a, b in config.get("model", "pairs", fallback=[])]
    pairs += [(float(a), float(b), "log") for a, b in config.get("model", "log_pairs", fallback=[])]
    if not pairs:
        raise config.error("model", "pairs", "no intensity pairs given")

    rows = []
    worst_identity, worst_excess = 0.0, -np.inf
    for lam, lam_prime, link in pairs:
        exact, bound = verify_mean_lipschitz(lam, lam_prime, link=link)
        rows.append((lam, lam_prime, link, exact, bound))
        worst_excess = max(worst_excess, exact - bound)
        if link == "identity":
            worst_identity = max(worst_identity, abs(exact - bound))

    table = MetricTable.from_columns("lipschitz", [np.array(c) for c in zip(*rows)])
    verdicts = [
        Verdict("identity link: E|Y - Y'| = |lambda - lambda'|", worst_identity <= atol, "largest error {:.3g}".format(worst_identity)),
        Verdict("mean distance <= Lipschitz bound", worst_excess <= atol, "largest excess {:.3g}".format(worst_excess)),
    ]
    return {"lipschitz": table}, verdicts, []


def _diagonal_alpha(probs):
    # max over subsets S of p(S)(1 - p(S))
    best = 0.0
    for k in range(1, len(probs)):
        for subset in itertools.combinations(range(len(probs)), k):
            mass = probs[list(subset)].sum()
            best = max(best, mass * (1.0 - mass))
    return best


def _run_alpha_sanity(config):
    rng = _stream(config, "corpus")
    size = config.get("experiment", "corpus_size", cast=int)
    max_alphabet = config.get("experiment", "max_alphabet", fallback=5, cast=int)

    rows = []
    product_worst, diagonal_worst, outside = 0.0, 0.0, 0
    for i in range(size):
        nrows, ncols = (int(v) for v in rng.integers(2, max_alphabet + 1, size=2))
        which = i % 3
        if which == 0:
            joint = np.outer(rng.generator.dirichlet(np.ones(nrows)), rng.generator.dirichlet(np.ones(ncols)))
            alpha = alpha_exact(joint)
            product_worst = max(product_worst, alpha)
        elif which == 1:
            ncols = nrows
            probs = rng.generator.dirichlet(np.ones(nrows))
            alpha = alpha_exact(np.diag(probs))
            diagonal_worst = max(diagonal_worst, abs(alpha - _diagonal_alpha(probs)))
        else:
            joint = rng.generator.dirichlet(np.ones(nrows * ncols)).reshape(nrows, ncols)
            alpha = alpha_exact(joint)
        outside += not -1e-12 <= alpha <= 0.25 + 1e-12
        rows.append((i, nrows, ncols, alpha))

    table = MetricTable.from_columns("alpha_sanity", [np.array(c) for c in zip(*rows)])
    verdicts = [
        Verdict("product laws have alpha = 0", product_worst <= 1e-12, "largest {:.3g}".format(product_worst)),
        Verdict("diagonal laws have alpha = max p(S)(1 - p(S))", diagonal_worst <= 1e-12, "largest error {:.3g}".format(diagonal_worst)),
        Verdict("alpha lies in [0, 1/4]", outside == 0, "{} outside".format(outside)),
    ]
    return {"alpha_sanity": table}, verdicts, []


def _read_bytes(filename):
    with open(filename, "rb") as fp:
        return fp.read()


def _run_determinism(config):
    targets = config.get("experiment", "targets", fallback=[])
    if isinstance(targets, str):
        targets = [targets]

    verdicts = []
    for target in targets:
        if target not in CATALOG or CATALOG[target].kind == "determinism":
            raise config.error("experiment", "targets", "'{}' is not a runnable catalog experiment".format(target))

        outputs = []
        for _ in range(2):
            with tempfile.TemporaryDirectory() as outdir:
                report = run(target, outdir=outdir, write_report=False)
                outputs.append({name: _read_bytes(os.path.join(outdir, fname)) for name, fname in report.tables.items()})
        differ = sorted(name for name in outputs[0] if outputs[0][name] != outputs[1].get(name))
        verdicts.append(
            Verdict(
                "[{}] byte-identical tables".format(target),
                not differ and outputs[0].keys() == outputs[1].keys(),
                "differing tables {}".format(differ),
            )
        )

    return {}, verdicts, []


#: the run function of each experiment kind
RUNNERS = {
    "mre_coupling": _run_mre_coupling,
    "maps_coupling": _run_maps_coupling,
    "contraction_coupling": _run_contraction_coupling,
    "bounds_curve": _run_bounds_curve,
    "alpha_curve": _run_alpha_curve,
    "lemma_corpus": _run_lemma_corpus,
    "doeblin_corpus": _run_doeblin_corpus,
    "renewal": _run_renewal,
    "coalescence": _run_coalescence,
    "backward_forward": _run_backward_forward,
    "poisson_lipschitz": _run_poisson_lipschitz,
    "alpha_sanity": _run_alpha_sanity,
    "determinism": _run_determinism,
}


def load_experiment(experiment):
    """
    An :class:`~mixsim.experiments.config.ExperimentConfig` from a
    configuration object, a catalog identifier or a file path.
    """

    if isinstance(experiment, ExperimentConfig):
        return experiment
    if experiment in CATALOG:
        return ExperimentConfig(CATALOG[experiment].config, source=experiment)
    if os.path.isfile(experiment):
        return ExperimentConfig.from_file(experiment)
    raise IOError("'{}' is neither a catalog experiment nor a configuration file".format(experiment))


def run(experiment, outdir=None, write_report=True):
    """
    Run an experiment and write its tables as
    ``<outdir>/<label>_<table>.csv`` and its report as
    ``<outdir>/<label>_report.json``.

    Parameters
    ----------
    experiment: str, :class:`~mixsim.experiments.config.ExperimentConfig`
        A configuration, a catalog identifier or a configuration file.
    outdir: str
        The output directory (defaults to the configured ``outdir``).
    write_report: bool
        Whether to write the JSON report.

    Returns
    -------
    :class:`~mixsim.experiments.runner.RunReport`
    """

    config = load_experiment(experiment)
    outdir = config.outdir if outdir is None else outdir
    os.makedirs(outdir, exist_ok=True)

    logger.info("Running '{}' ({} experiment, seed {})".format(config.label, config.kind, config.seed))
    start = time.perf_counter()
    tables, verdicts, findings = RUNNERS[config.kind](config)
    wall_clock = time.perf_counter() - start

    written = OrderedDict()
    for name in sorted(tables):
        fname = "{}_{}.csv".format(config.label, name)
        tables[name].write(os.path.join(outdir, fname), format="mixsim.csv", overwrite=True)
        written[name] = fname

    report = RunReport(config, written, verdicts, findings, wall_clock)
    for verdict in verdicts:
        log = logger.info if verdict.passed else logger.warning
        log("{}: {} {}".format("PASS" if verdict.passed else "FAIL", verdict.name, verdict.detail))
    for finding in findings:
        logger.info("Finding: {}".format(finding))

    if write_report:
        report.write(os.path.join(outdir, "{}_report.json".format(config.label)))

    logger.info("'{}' finished in {:.1f} s: {}".format(config.label, wall_clock, "PASSED" if report.passed else "FAILED"))
    return report


def list_experiments():
    """
    Rows ``(identifier, kind, expected runtime, description)`` of the catalog.
    """

    return [(e.identifier, e.kind, e.runtime, e.description) for e in CATALOG.values()]


def describe(identifier):
    """
    The description and configuration of a catalog experiment.
    """

    entry = get_entry(identifier)
    return "{} ({}, expected runtime {})\n{}\n\n{}".format(
        entry.identifier, entry.kind, entry.runtime, entry.description, entry.config
    )


def create_parser():
    """
    Create the argument parser.
    """

    description = """\
Run mixing coefficient experiments for Markov chains in random environments, \
iterated random maps and contraction models."""

    parser = configargparse.ArgParser(prog="mixsim", description=description, allow_abbrev=False)
    parser.add("--version", action="version", version="%(prog)s {version}".format(version=mixsim.__version__))
    parser.add(
        "--num-threads",
        type=int,
        default=None,
        env_var="MIXSIM_NUM_THREADS",
        help="The number of threads used by compiled kernels",
    )
    parser.add("--log-level", default="INFO", help="The logging level")

    subparsers = parser.add_subparsers(dest="command")
    subparsers.required = True

    subparsers.add_parser("list", help="List the catalog experiments")

    describer = subparsers.add_parser("describe", help="Show a catalog experiment")
    describer.add_argument("identifier", help="The catalog identifier")

    runner = subparsers.add_parser("run", help="Run experiments")
    runner.add_argument(
        "experiments",
        nargs="+",
        help="Catalog identifiers or configuration files ('all' runs the whole catalog)",
    )
    runner.add_argument("-o", "--outdir", default=None, help="The output directory for the results")

    return parser


def main(args=None):
    """
    The ``mixsim`` command line interface. The exit code is 0 when every
    check passes, 1 when a check fails and 2 for configuration errors.
    """

    parser = create_parser()
    opts = parser.parse_args(args=args)

    setup_logger(log_level=opts.log_level)

    if opts.num_threads is not None:
        from numba import set_num_threads

        set_num_threads(opts.num_threads)

    code = EXIT_PASSED
    if opts.command == "list":
        for row in list_experiments():
            print("{:<30} {:<22} {:<10} {}".format(*row))
    elif opts.command == "describe":
        try:
            print(describe(opts.identifier))
        except KeyError as e:
            logger.error(str(e))
            code = EXIT_CONFIG
    else:
        experiments = list(CATALOG) if opts.experiments == ["all"] else opts.experiments
        for experiment in experiments:
            try:
                report = run(experiment, outdir=opts.outdir)
            except (ConfigError, IOError) as e:
                logger.error(str(e))
                code = EXIT_CONFIG
                continue
            if not report.passed and code == EXIT_PASSED:
                code = EXIT_FAILED

    if hasattr(mixsim, "_called_from_test"):
        return code
    sys.exit(code)  # pragma: no cover


def cli():  # pragma: no cover
    """
    Entry point to the ``mixsim`` script.
    """

    main()
