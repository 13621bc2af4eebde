import io
import json
import shutil
import subprocess
import sys

import numpy as np
import pytest

from bayesboot.cli import run
from bayesboot.engine import percentile_interval, run_bootstrap
from bayesboot.exact import prob_posterior
from bayesboot.model import DataSample, DirichletPrior, Mean, NormalGuess


def call(*argv):
    buf = io.StringIO()
    code = run(list(argv), out=buf)
    return code, buf.getvalue()


@pytest.fixture
def data_file(tmp_path):
    p = tmp_path / "d.csv"
    np.savetxt(p, np.random.default_rng(1).normal(size=40))
    return str(p)


@pytest.fixture
def surv_file(tmp_path):
    rng = np.random.default_rng(2)
    life, cens = rng.exponential(2.0, 40), rng.exponential(8.0, 40)
    p = tmp_path / "s.csv"
    np.savetxt(p, np.column_stack([np.minimum(life, cens), (life <= cens).astype(int)]),
               delimiter=",", fmt=["%.6f", "%d"])
    return str(p)


@pytest.fixture
def reg_file(tmp_path):
    rng = np.random.default_rng(3)
    x = rng.uniform(0, 3, 30)
    p = tmp_path / "r.csv"
    np.savetxt(p, np.column_stack([1 + 2 * x + rng.normal(size=30), x]), delimiter=",")
    return str(p)


class TestInterval:
    ARGS = ("--functional", "mean", "--a", "0", "--boot", "1000", "--alpha", "0.05", "--seed", "7")

    def test_byte_identical(self, data_file):
        c1, o1 = call("interval", "--data", data_file, *self.ARGS)
        c2, o2 = call("interval", "--data", data_file, *self.ARGS)
        c3, o3 = call("interval", "--data", data_file, *self.ARGS, "--workers", "4")
        assert c1 == c2 == c3 == 0
        assert o1 == o2 == o3

    def test_matches_library(self, data_file):
        _, out = call("interval", "--data", data_file, *self.ARGS)
        doc = json.loads(out)
        x = np.loadtxt(data_file)
        draws = run_bootstrap("bb", Mean(), DirichletPrior(0.0, NormalGuess()), DataSample(x),
                              boot=1000, seed=7)
        res = percentile_interval(draws, 0.05)
        assert doc["result"]["interval"]["lower"] == res.lower
        assert doc["result"]["interval"]["upper"] == res.upper
        assert doc["seed"] == 7 and doc["config"]["boot"] == 1000

    def test_histogram_counts(self, data_file):
        code, out = call("interval", "--data", data_file, "--boot", "500", "--seed", "1",
                         "--format", "tsv-histogram", "--bins", "13")
        rows = [line.split("\t") for line in out.strip().splitlines()]
        assert code == 0 and len(rows) == 13
        assert sum(int(r[2]) for r in rows) == 500

    def test_seed_echoed_when_absent(self, data_file):
        _, out = call("estimate", "--data", data_file)
        doc = json.loads(out)
        assert isinstance(doc["seed"], int)
        assert doc["result"]["draws"]["count"] == 100

    @pytest.mark.parametrize("correct", ["bias", "bias-variance"])
    def test_corrections(self, data_file, correct):
        code, out = call("interval", "--data", data_file, "--a", "2", "--seed", "3",
                         "--boot", "400", "--correct", correct)
        assert code == 0
        assert "epsilon" in json.loads(out)["result"]["interval"]

    def test_correction_needs_nu0(self, data_file):
        code, _ = call("interval", "--data", data_file, "--functional", "median", "--correct", "bias")
        assert code == 2


class TestOtherCommands:
    def test_exact_prob_prior_only(self):
        code, out = call("exact", "prob", "--set", "0,1", "--prior", "normal:0,1", "--a", "4")
        doc = json.loads(out)["result"]
        al, be = prob_posterior(DirichletPrior(4.0, NormalGuess()), None, [(0.0, 1.0)])
        assert code == 0 and (doc["alpha"], doc["beta"]) == (al, be)

    def test_exact_median(self, tmp_path):
        p = tmp_path / "m.csv"
        p.write_text("0.1\n0.4\n0.45\n0.7\n0.9\n")
        code, out = call("exact", "median", "--data", str(p), "--prior", "uniform:0,1", "--a", "1",
                         "--points", "11")
        doc = json.loads(out)["result"]
        assert code == 0
        assert sum(doc["masses"]) + doc["continuous_mass"] == pytest.approx(1.0, abs=1e-4)

    def test_band(self, data_file):
        code, out = call("band", "--data", data_file, "--boot", "300", "--seed", "2", "--points", "21")
        doc = json.loads(out)["result"]
        assert code == 0 and len(doc["grid"]) == 21 and doc["coverage"] >= 0.9

    def test_twosample(self, data_file, tmp_path):
        p = tmp_path / "d2.csv"
        np.savetxt(p, np.loadtxt(data_file) + 1.0)
        code, out = call("twosample", "--data1", data_file, "--data2", str(p), "--boot", "500",
                         "--seed", "4", "--functional", "median")
        doc = json.loads(out)["result"]
        assert code == 0 and doc["interval"]["upper"] < 0

    def test_eb(self, data_file):
        code, out = call("eb", "fit-a", "--data", data_file)
        assert code == 0 and "a" in json.loads(out)["result"]
        code, out = call("eb", "fit-prior", "--data", data_file, "--a", "1")
        assert code == 0 and json.loads(out)["result"]["variance"] > 0

    def test_regress(self, reg_file):
        code, out = call("regress", "--data", reg_file, "--intercept", "--at", "1,1",
                         "--functional", "decile:5", "--boot", "300", "--seed", "5")
        doc = json.loads(out)["result"]
        assert code == 0 and abs(doc["estimate"] - 3.0) < 0.6

    @pytest.mark.parametrize("scheme,extra", [("weird", ()), ("beta", ("--c", "2")),
                                              ("weird-bb", ("--a", "1")), ("resample", ("--a", "1"))])
    def test_survival(self, surv_file, scheme, extra):
        argv = ("survival", "--data", surv_file, "--scheme", scheme, "--functional", "F:1",
                "--boot", "200", "--seed", "6", *extra)
        c1, o1 = call(*argv)
        c2, o2 = call(*argv, "--workers", "3")
        assert c1 == c2 == 0 and o1 == o2
        assert 0 < json.loads(o1)["result"]["estimate"] < 1


class TestErrors:
    def test_unknown_flag(self, data_file):
        with pytest.raises(SystemExit) as info:
            call("interval", "--data", data_file, "--bogus", "1")
        assert info.value.code == 2

    def test_bad_functional(self, data_file):
        code, _ = call("interval", "--data", data_file, "--functional", "kurtosis")
        assert code == 2
        code, _ = call("interval", "--data", data_file, "--prior", "cauchy:0,1")
        assert code == 2

    def test_missing_file(self, tmp_path):
        code, _ = call("interval", "--data", str(tmp_path / "none.csv"))
        assert code == 2

    def test_domain_error(self, data_file):
        code, _ = call("interval", "--data", data_file, "--alpha", "0.7", "--boot", "10")
        assert code == 3

    def test_survival_prior_choice(self, surv_file):
        code, _ = call("survival", "--data", surv_file, "--scheme", "beta")
        assert code == 2


@pytest.mark.skipif(shutil.which("bb") is None, reason="console script not installed")
def test_console_script(data_file):
    argv = ["bb", "interval", "--data", data_file, "--boot", "200", "--seed", "9"]
    r1 = subprocess.run(argv, capture_output=True, check=True)
    r2 = subprocess.run([sys.executable, "-m", "bayesboot.cli", *argv[1:]], capture_output=True, check=True)
    assert r1.stdout == r2.stdout
