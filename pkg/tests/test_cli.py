import csv
import io
import json
import math

import numpy as np
import pytest

from vdm import cli
from vdm.divergences import make_spec
from vdm.verify import Check


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestList:
    def test_rows(self, capsys):
        code, out, _ = run(capsys, "list")
        assert code == 0
        lines = out.strip().splitlines()
        assert len(lines) == 12
        assert "gan\t-0.693147\t(-inf, 0.000000)\t-" in lines
        assert "kl\t1.000000\tR\t-" in lines


class TestCurves:
    def test_values_at_zero(self):
        v, first, second = cli.curve_table(make_spec("gan"), -1.0, 1.0, n=3)
        assert v[1] == 0.0
        assert first[1] == pytest.approx(-math.log(2), abs=1e-15)
        assert second[1] == pytest.approx(-math.log(2), abs=1e-15)
        v, first, second = cli.curve_table(make_spec("kl"), -1.0, 1.0, n=3)
        assert (first[1], second[1]) == pytest.approx((0.0, -math.exp(-1)), abs=1e-15)

    def test_csv_and_pearson_direction(self, capsys, tmp_path):
        path = tmp_path / "c.csv"
        code, _, _ = run(capsys, "curves", "--divergence", "pearson", "--vmin", "-1", "--vmax", "3",
                         "--out", str(path))
        assert code == 0
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["v", "g_f", "neg_conjugate"]
        assert len(rows) == 1001
        second = np.array([float(r[2]) for r in rows[1:]])
        # -f*(g(v)) = -(v^2/4 + v) decreases for v > -2: the second term f*(g(v)) increases
        assert np.all(np.diff(second) < 0)
        gan = cli.curve_table(make_spec("gan"), -5, 5)[2]
        assert np.all(np.diff(gan) < 0)

    def test_deterministic(self, capsys):
        _, a, _ = run(capsys, "curves", "--divergence", "jeffrey")
        _, b, _ = run(capsys, "curves", "--divergence", "jeffrey")
        assert a == b

    def test_bad_range(self, capsys):
        code, _, err = run(capsys, "curves", "--vmin", "2", "--vmax", "1")
        assert code == 2 and "vmin" in err


class TestConfigErrors:
    def test_unknown_divergence(self, capsys):
        assert run(capsys, "gmm", "--divergence", "nope", "--steps", "1")[0] == 2

    def test_missing_mixture(self, capsys):
        assert run(capsys, "gmm", "--mixture", "missing.json", "--steps", "1")[0] == 2

    def test_bad_shape(self, capsys):
        assert run(capsys, "curves", "--divergence", "alpha", "--alpha", "1")[0] == 2

    def test_bad_batch(self, capsys):
        assert run(capsys, "gmm", "--batch", "0", "--steps", "1")[0] == 2

    def test_unwritable_output(self, capsys, tmp_path):
        assert run(capsys, "curves", "--out", str(tmp_path / "no" / "dir" / "x.csv"))[0] == 2

    def test_argparse_error(self):
        with pytest.raises(SystemExit) as info:
            cli.main(["frobnicate"])
        assert info.value.code == 2


class TestGmm:
    def test_short_run(self, capsys, tmp_path):
        trace = tmp_path / "trace.csv"
        code, out, _ = run(capsys, "gmm", "--divergence", "kl", "--steps", "40", "--batch", "64",
                           "--out", str(trace))
        assert code == 0
        header, row = out.strip().splitlines()
        assert header.split("\t") == ["divergence", "F_hat", "mu_hat", "sigma_hat", "D_f", "mu_star", "sigma_star"]
        fields = row.split("\t")
        assert fields[0] == "kl"
        assert all(len(f.split(".")[1]) == 4 for f in fields[1:])
        # exact oracle columns
        assert float(fields[4]) == pytest.approx(0.2881, abs=1e-4)
        assert float(fields[5]) == pytest.approx(1.0100, abs=1e-4)
        lines = trace.read_text().splitlines()
        assert lines[0] == "step,F,mu,sigma,grad_w_norm,grad_t_norm,tpr,tnr"
        assert len(lines) == 41

    def test_trace_reproducible(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            run(capsys, "gmm", "--divergence", "js", "--steps", "15", "--batch", "32", "--seed", "4",
                "--out", str(path))
        assert a.read_bytes() == b.read_bytes()

    def test_json_mixture_recovered(self, capsys, tmp_path):
        path = tmp_path / "target.json"
        path.write_text(json.dumps({"weights": [1.0], "means": [-0.5], "variances": [0.64]}))
        # default schedule; the iterates circle the saddle slowly, so averaging matters
        code, out, _ = run(capsys, "gmm", "--divergence", "reverse-kl", "--mixture", str(path))
        assert code == 0
        fields = out.strip().splitlines()[1].split("\t")
        assert float(fields[2]) == pytest.approx(-0.5, abs=0.05)
        assert float(fields[3]) == pytest.approx(0.8, abs=0.05)

    def test_diverged_exit_code(self, capsys):
        with np.errstate(all="ignore"):
            code, _, err = run(capsys, "gmm", "--divergence", "kl", "--eta", "10000", "--steps", "50",
                               "--batch", "64")
        assert code == 1 and "diverged" in err


class TestMatrix:
    def test_format(self, capsys, tmp_path):
        path = tmp_path / "m.csv"
        code, out, _ = run(capsys, "gmm-matrix", "--steps", "10", "--batch", "32", "--refit-steps", "5",
                           "--out", str(path))
        assert code == 0
        rows = list(csv.reader(path.open()))
        names = ["kl", "reverse-kl", "jensen-shannon", "jeffrey", "pearson-chi2"]
        assert rows[0] == ["trained_for"] + names
        assert [r[0] for r in rows[1:]] == names
        assert all(np.isfinite(float(x)) for r in rows[1:] for x in r[1:])
        assert len(out.strip().splitlines()) == 6


class TestVerify:
    def test_saddle_suite(self, capsys):
        code, out, _ = run(capsys, "verify", "saddle")
        assert code == 0
        assert out.startswith("PASS saddle: 20/20")

    def test_failure_exit_code(self, capsys, monkeypatch):
        monkeypatch.setitem(cli.SUITES, "saddle", lambda: [Check("saddle", "x", False, "boom")])
        code, out, _ = run(capsys, "verify", "saddle")
        assert code == 1
        assert "FAIL x: boom" in out

    def test_all_reports_timing(self, capsys, monkeypatch):
        for name in list(cli.SUITES):
            monkeypatch.setitem(cli.SUITES, name, lambda n=name: [Check(n, "ok", True, "")])
        code, out, _ = run(capsys, "verify", "all")
        assert code == 0
        lines = out.strip().splitlines()
        assert len(lines) == 5 and lines[-1] == "PASS all: 0 failing checks"
        assert all(" s)" in line for line in lines[:4])


class TestSaddleDemo:
    def test_csv(self, capsys, tmp_path):
        path = tmp_path / "s.csv"
        code, out, _ = run(capsys, "saddle-demo", "--steps", "30", "--out", str(path))
        assert code == 0
        rows = list(csv.reader(path.open()))
        assert rows[0] == ["t", "J", "bound"]
        assert len(rows) == 32
        j = np.array([float(r[1]) for r in rows[1:]])
        b = np.array([float(r[2]) for r in rows[1:]])
        assert np.all(j <= b * (1 + 1e-9))
        assert "worst_ratio=" in out
