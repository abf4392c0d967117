"""
Test script for experiment configuration, the catalog and the runner.
"""

import json

import numpy as np
import pytest
from mixsim.bounds import DecaySequence
from mixsim.experiments import CATALOG, ExperimentConfig
from mixsim.experiments.catalog import get_entry
from mixsim.experiments.runner import EXIT_CONFIG, EXIT_FAILED, EXIT_PASSED, load_experiment, main, run
from mixsim.iostream import MetricTable
from mixsim.utils import ConfigError

BOUNDS_CURVE = """\
[experiment]
kind = bounds_curve
seed = 3

[bounds]
theorem = thm1
alpha = {"tail": "zero"}
rho = 0.5
m = 1
n = [10, 12, 16]
r = half

[checks]
closed_form = True
"""

POISSON = """\
[experiment]
kind = poisson_lipschitz
seed = 9
label = poisson

[model]
pairs = [(1.0, 2.0), (0.5, 0.7), (3.0, 3.0)]
log_pairs = [(0.0, 0.5)]

[checks]
atol = {atol}
"""


class TestExperimentConfig(object):
    """
    Tests for parsing and validating configurations.
    """

    def test_properties(self):
        config = ExperimentConfig(BOUNDS_CURVE, source="/data/curve.ini")
        assert config.kind == "bounds_curve"
        assert config.seed == 3
        assert config.label == "curve"
        assert config.n_values() == [10, 12, 16]
        assert config.restart_for(11) == 5
        assert len(config.sha256) == 64
        assert config.sha256 == ExperimentConfig(BOUNDS_CURVE.encode("utf-8")).sha256

        alpha = config.decay_sequence("bounds", "alpha")
        assert isinstance(alpha, DecaySequence)
        assert alpha.tail == "zero"

    def test_restarts(self):
        config = ExperimentConfig(BOUNDS_CURVE.replace("r = half", "r = optimized"))
        assert config.restart_for(10) is None

        config = ExperimentConfig(BOUNDS_CURVE.replace("n = [10, 12, 16]", "n_min = 4\nn_max = 6").replace("r = half", "r = 2"))
        assert config.n_values() == [4, 5, 6]
        assert config.restart_for(6) == 2

        # the restart must lie strictly inside every horizon
        with pytest.raises(ConfigError):
            ExperimentConfig(BOUNDS_CURVE.replace("r = half", "r = 10"))

    def test_missing_seed(self):
        with pytest.raises(ConfigError):
            ExperimentConfig(BOUNDS_CURVE.replace("seed = 3\n", ""))

        with pytest.raises(ConfigError):
            ExperimentConfig(BOUNDS_CURVE.replace("seed = 3", "seed = -1"))

    def test_bad_kind(self):
        with pytest.raises(ConfigError) as excinfo:
            ExperimentConfig(BOUNDS_CURVE.replace("kind = bounds_curve", "kind = spectrum"), source="bad.ini")
        assert "bad.ini:2:" in str(excinfo.value)

        with pytest.raises(ConfigError):
            ExperimentConfig("[bounds]\nrho = 0.5\n")

        with pytest.raises(ConfigError):
            ExperimentConfig("not an ini file")

    def test_missing_sections(self):
        with pytest.raises(ConfigError):
            ExperimentConfig("[experiment]\nkind = renewal\nseed = 1\npaths = 10\nn_max = 5\n")

        with pytest.raises(ConfigError):
            ExperimentConfig("[experiment]\nkind = alpha_sanity\nseed = 1\n")

        with pytest.raises(ConfigError):
            ExperimentConfig("[experiment]\nkind = alpha_sanity\nseed = 1\ncorpus_size = 0\n")

    def test_restart_bounds(self):
        text = """\
[experiment]
kind = mre_coupling
seed = 1
replicates = 10
r = {r}
horizon = 10

[environment]
kind = iid

[model]
theta = [[[1.0], [0.0]], [[0.0], [1.0]]]
"""
        assert ExperimentConfig(text.format(r=9)).get("experiment", "r") == 9

        for r in (0, 10):
            with pytest.raises(ConfigError) as excinfo:
                ExperimentConfig(text.format(r=r), source="mre.ini")
            assert "mre.ini:5:" in str(excinfo.value)

    def test_get(self):
        config = ExperimentConfig(POISSON.format(atol=1e-10))
        assert config.get("model", "pairs")[0] == (1.0, 2.0)
        assert config.get("model", "missing", fallback=None) is None
        assert config.get("checks", "atol", cast=float) == 1e-10

        with pytest.raises(ConfigError):
            config.get("model", "missing")

        with pytest.raises(ConfigError):
            config.get("model", "pairs", cast=float)

        with pytest.raises(ConfigError):
            config.section("bounds")

    def test_bad_decay_sequence(self):
        config = ExperimentConfig(BOUNDS_CURVE.replace('{"tail": "zero"}', "fast"))
        with pytest.raises(ConfigError):
            config.decay_sequence("bounds", "alpha")


class TestCatalog(object):
    """
    Tests for the built-in experiments.
    """

    def test_entries_parse(self):
        for identifier, entry in CATALOG.items():
            config = ExperimentConfig(entry.config, source=identifier)
            assert config.kind == entry.kind
            assert config.label == identifier

    def test_determinism_targets(self):
        config = ExperimentConfig(CATALOG["determinism"].config)
        targets = config.get("experiment", "targets")
        assert sorted(targets) == sorted(i for i in CATALOG if i != "determinism")

    def test_get_entry(self):
        assert get_entry("poisson-mean-lipschitz").kind == "poisson_lipschitz"

        with pytest.raises(KeyError):
            get_entry("thm2-curve")


class TestRun(object):
    """
    Tests for running small experiments.
    """

    def test_bounds_curve(self, tmp_path):
        report = run(ExperimentConfig(BOUNDS_CURVE, source="curve"), outdir=str(tmp_path))
        assert report.passed
        assert report.tables == {"bound_curve": "curve_bound_curve.csv"}

        table = MetricTable.read(str(tmp_path / "curve_bound_curve.csv"), format="mixsim.csv")
        assert table.schema == "bound_curve"
        assert list(table["n"]) == [10, 12, 16]
        assert list(table["r"]) == [5, 6, 8]
        assert np.isclose(table["bound"][0], 0.125)

        with open(str(tmp_path / "curve_report.json"), "r") as fp:
            data = json.load(fp)
        assert data["passed"]
        assert data["seed"] == 3
        assert data["kind"] == "bounds_curve"
        assert data["config"] == BOUNDS_CURVE
        assert data["sha256"] == report.config.sha256

    def test_thm3_rejects_optimized(self, tmp_path):
        config = ExperimentConfig(
            BOUNDS_CURVE.replace("thm1", "thm3").replace("r = half", "r = optimized").replace("closed_form = True", "")
        )
        with pytest.raises(ConfigError):
            run(config, outdir=str(tmp_path))

    def test_lemma_corpora(self, tmp_path):
        text = "[experiment]\nkind = lemma_corpus\nseed = 4\ncorpus_size = 3\n"

        report = run(ExperimentConfig(text + "lemma = ult\ns_max = 6\n", source="ult"), outdir=str(tmp_path))
        assert report.passed
        table = MetricTable.read(str(tmp_path / "ult_lemma_corpus.csv"), format="mixsim.csv")
        assert len(table) == 3 * 5
        assert np.all(table["oracle"] <= table["bound_factor4"] + 1e-12)

        report = run(ExperimentConfig(text + "lemma = ult3\nt_max = 10\n", source="ult3"), outdir=str(tmp_path))
        assert report.passed
        table = MetricTable.read(str(tmp_path / "ult3_lemma3_corpus.csv"), format="mixsim.csv")
        assert len(table) == 3 * 11

        with pytest.raises(ConfigError):
            run(ExperimentConfig(text + "lemma = ult2\n"), outdir=str(tmp_path))

    def test_doeblin_corpus(self, tmp_path):
        text = "[experiment]\nkind = doeblin_corpus\nseed = 5\ncorpus_size = 5\nn_states = 3\n"
        report = run(ExperimentConfig(text, source="doeblin"), outdir=str(tmp_path))
        assert report.passed

        table = MetricTable.read(str(tmp_path / "doeblin_doeblin_corpus.csv"), format="mixsim.csv")
        assert len(table) == 5
        assert np.all((table["eta"] >= 0.0) & (table["eta"] <= 1.0))

    def test_renewal(self, tmp_path):
        text = """\
[experiment]
kind = renewal
seed = 6
paths = 200
n_max = 5

[bounds]
b = {"tail": "geometric", "ratio": 0.5, "scale": 0.5}
constant = 0.3
"""
        report = run(ExperimentConfig(text, source="renewal"), outdir=str(tmp_path))
        assert report.verdicts[-1].passed

        table = MetricTable.read(str(tmp_path / "renewal_renewal.csv"), format="mixsim.csv")
        assert len(table) == 6
        assert np.allclose(table["bstar"][:3], [0.5, 0.5, 0.375])

    def test_poisson_lipschitz(self, tmp_path):
        report = run(ExperimentConfig(POISSON.format(atol=1e-10)), outdir=str(tmp_path), write_report=False)
        assert report.passed
        assert not (tmp_path / "poisson_report.json").exists()

        table = MetricTable.read(str(tmp_path / "poisson_lipschitz.csv"), format="mixsim.csv")
        assert list(table["link"]) == ["identity", "identity", "identity", "log"]
        assert np.allclose(table["exact"][:3], [1.0, 0.2, 0.0])

        with pytest.raises(ConfigError):
            run(ExperimentConfig("[experiment]\nkind = poisson_lipschitz\nseed = 1\n"), outdir=str(tmp_path))

    def test_alpha_sanity(self, tmp_path):
        text = "[experiment]\nkind = alpha_sanity\nseed = 8\ncorpus_size = 6\nmax_alphabet = 3\n"
        report = run(ExperimentConfig(text, source="sanity"), outdir=str(tmp_path))
        assert report.passed
        assert len(report.verdicts) == 3

    def test_determinism(self, tmp_path):
        text = '[experiment]\nkind = determinism\nseed = 0\ntargets = ["poisson-mean-lipschitz"]\n'
        report = run(ExperimentConfig(text, source="determinism"), outdir=str(tmp_path))
        assert report.passed
        assert report.tables == {}

        with pytest.raises(ConfigError):
            run(ExperimentConfig(text.replace("poisson-mean-lipschitz", "determinism")), outdir=str(tmp_path))

    def test_load_experiment(self, tmp_path):
        assert load_experiment("poisson-mean-lipschitz").label == "poisson-mean-lipschitz"

        path = tmp_path / "curve.ini"
        path.write_text(BOUNDS_CURVE)
        config = load_experiment(str(path))
        assert config.label == "curve"
        assert load_experiment(config) is config

        with pytest.raises(IOError):
            load_experiment(str(tmp_path / "missing.ini"))


class TestMain(object):
    """
    Tests for the command line interface exit codes.
    """

    def test_list_and_describe(self, capsys):
        assert main(["list"]) == EXIT_PASSED
        out = capsys.readouterr().out
        assert all(identifier in out for identifier in CATALOG)

        assert main(["describe", "poisson-mean-lipschitz"]) == EXIT_PASSED
        assert "kind = poisson_lipschitz" in capsys.readouterr().out

        assert main(["describe", "thm2-curve"]) == EXIT_CONFIG

    def test_run(self, tmp_path):
        outdir = str(tmp_path)

        passing = tmp_path / "passing.ini"
        passing.write_text(POISSON.format(atol=1e-10))
        assert main(["run", str(passing), "-o", outdir]) == EXIT_PASSED
        assert (tmp_path / "poisson_report.json").exists()

        # a negative tolerance makes the identity check fail
        failing = tmp_path / "failing.ini"
        failing.write_text(POISSON.format(atol=-1.0))
        assert main(["run", str(failing), "-o", outdir]) == EXIT_FAILED

        broken = tmp_path / "broken.ini"
        broken.write_text(POISSON.format(atol=1e-10).replace("seed = 9\n", ""))
        assert main(["run", str(broken), "-o", outdir]) == EXIT_CONFIG
        assert main(["run", str(tmp_path / "missing.ini"), "-o", outdir]) == EXIT_CONFIG

        # configuration errors take precedence over failed checks
        assert main(["run", str(failing), str(broken), "-o", outdir]) == EXIT_CONFIG
