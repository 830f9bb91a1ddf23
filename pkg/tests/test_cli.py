import numpy as np
import pytest

from gpbayes.cli import main


def run_cli(args):
    return main([str(a) for a in args])


def write(path, text):
    path.write_text(text)
    return path


SAMPLE_PATHS_SMALL = """
[experiment]
kind = sample-paths
seed = 5

[grid]
lo = 0.0
hi = 5.0
points = 64

[paths]
count = 3
"""

FILL_SMALL = """
[experiment]
kind = design-study
seed = 3

[measure]
type = uniform
lower = 0.0
upper = 1.0

[region]
box_lo = 0.0
box_hi = 1.0

[study]
n_list = 8 16 32
replications = 20
"""


class TestValidation:
    def test_unknown_key_rejected(self, tmp_path):
        cfg = write(tmp_path / "bad.cfg", SAMPLE_PATHS_SMALL + "wiggle = 3\n")
        rc = run_cli(["sample-paths", "--config", cfg])
        assert rc == 1

    def test_unknown_key_named_in_message(self, tmp_path, capsys):
        cfg = write(tmp_path / "bad.cfg", SAMPLE_PATHS_SMALL + "wiggle = 3\n")
        run_cli(["sample-paths", "--config", cfg])
        assert "paths.wiggle" in capsys.readouterr().err

    def test_negative_lengthscale_names_key(self, tmp_path, capsys):
        cfg = write(
            tmp_path / "bad.cfg",
            "[experiment]\nkind = design-study-gaussian\nseed = 1\n"
            "[kernel]\nlengthscale = -2.0\n",
        )
        rc = run_cli(["design-study-gaussian", "--config", cfg])
        assert rc == 1
        assert "kernel.lengthscale" in capsys.readouterr().err

    def test_kind_mismatch(self, tmp_path, capsys):
        cfg = write(tmp_path / "mismatch.cfg", SAMPLE_PATHS_SMALL)
        rc = run_cli(["regress", "--config", cfg])
        assert rc == 1
        assert "kind" in capsys.readouterr().err

    def test_missing_config(self, capsys):
        rc = run_cli(["sample-paths", "--config", "/nonexistent/x.cfg"])
        assert rc == 1

    def test_numerical_failure_exit_code(self, tmp_path, capsys):
        # data 1e8 away with tiny noise: the evidence underflows
        cfg = write(
            tmp_path / "under.cfg",
            """
[experiment]
kind = invert
seed = 1

[forward]
type = identity
dim = 1

[prior]
type = gaussian
means = 0.0
variances = 1.0

[noise]
gamma_diag = 1e-6

[data]
y = 1e8

[kernel]
family = sqexp

[surrogate]
design_measure = prior
n_train = 4

[mcmc]
steps = 100
""",
        )
        rc = run_cli(["invert", "--config", cfg])
        assert rc == 2
        assert "numerical failure" in capsys.readouterr().err


class TestOutputs:
    def test_sample_paths_outputs(self, tmp_path):
        cfg = write(tmp_path / "sp.cfg", SAMPLE_PATHS_SMALL)
        out = tmp_path / "out"
        assert run_cli(["sample-paths", "--config", cfg, "--out", out]) == 0
        assert (out / "resolved.cfg").exists()
        csvs = sorted(p.name for p in out.glob("*.csv"))
        assert "prior_paths_matern12_lam1.csv" in csvs
        assert "conditioned_paths_sqexp.csv" in csvs
        body = (out / "prior_paths_matern12_lam1.csv").read_text().splitlines()
        assert body[0] == "x,mean,std,sample_1,sample_2,sample_3"
        meta = (out / "prior_paths_matern12_lam1.csv.meta").read_text()
        assert "seed = 5" in meta
        assert "gpbayes-" in meta
        assert "config_sha256" in meta

    def test_long_correlation_length_smoother_paths(self, tmp_path):
        # lag-1 autocorrelation is higher for the longer correlation length
        cfg = write(tmp_path / "sp.cfg", SAMPLE_PATHS_SMALL)
        out = tmp_path / "out"
        run_cli(["sample-paths", "--config", cfg, "--out", out])

        def lag1(fname):
            rows = np.loadtxt(out / fname, delimiter=",", skiprows=1)
            acs = []
            for col in range(3, rows.shape[1]):
                x = rows[:, col] - rows[:, col].mean()
                acs.append((x[:-1] @ x[1:]) / (x @ x))
            return np.mean(acs)

        assert lag1("prior_paths_matern12_lam1.csv") > lag1("prior_paths_matern12_lam0p1.csv")

    def test_fill_study_outputs(self, tmp_path):
        cfg = write(tmp_path / "fd.cfg", FILL_SMALL)
        out = tmp_path / "out"
        assert run_cli(["design-study", "--config", cfg, "--out", out]) == 0
        samples = (out / "fill_samples.csv").read_text().splitlines()
        assert samples[0] == "N,replicate,h"
        assert len(samples) == 1 + 3 * 20
        summary = (out / "fill_summary.csv").read_text().splitlines()
        assert summary[0] == "N,mean_h,q10,q90"
        slope_text = (out / "fill_study.txt").read_text()
        assert "loglog_slope" in slope_text

    def test_seed_override_changes_output(self, tmp_path):
        cfg = write(tmp_path / "sp.cfg", SAMPLE_PATHS_SMALL)
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        run_cli(["sample-paths", "--config", cfg, "--out", out_a])
        run_cli(["sample-paths", "--config", cfg, "--out", out_b, "--seed", 123456])
        a = (out_a / "prior_paths_matern12_lam1.csv").read_bytes()
        b = (out_b / "prior_paths_matern12_lam1.csv").read_bytes()
        assert a != b


class TestDeterminism:
    @pytest.mark.parametrize("kind,text", [
        ("sample-paths", SAMPLE_PATHS_SMALL),
        ("design-study", FILL_SMALL),
    ])
    def test_same_seed_byte_identical(self, tmp_path, kind, text):
        cfg = write(tmp_path / "cfg.cfg", text)
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert run_cli([kind, "--config", cfg, "--out", out_a]) == 0
        assert run_cli([kind, "--config", cfg, "--out", out_b]) == 0
        names = sorted(p.name for p in out_a.glob("*.csv"))
        assert names
        for name in names:
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name
