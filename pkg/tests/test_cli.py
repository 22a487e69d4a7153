import csv
import json

import pytest

from qfilterlab.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, EXIT_ORACLE, main


def write_config(path, **kw):
    cfg = {
        "model": {"H": [[1, 1], [1, -1]], "lindblads": [[[1, 0], [0, -1]]], "eta": 1.0},
        "rho_true": {"diag": [1, 0]},
        "rho_filter": {"diag": [1, 1]},
        "grid": {"dt": 1e-3, "n_steps": 400},
        "outputs": {"stride": 40},
        "n_paths": 20,
        "master_seed": 5,
        "charfn": {"grids": [{"times": [0.2], "lambdas": [1.0]},
                             {"times": [0.1, 0.3], "lambdas": [0.5, -1.5]}]},
    }
    cfg.update(kw)
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path


@pytest.fixture
def config(tmp_path):
    return write_config(tmp_path / "cfg.json")


class TestSubcommands:
    def test_check_observability(self, config, tmp_path, capsys):
        assert main(["check-observability", str(config), "--out", str(tmp_path / "o")]) == EXIT_OK
        assert "dim 4 of 4 -> observable" in capsys.readouterr().out
        rep = json.loads((tmp_path / "o" / "observability.json").read_text())
        assert rep["dimension"] == 4

    def test_check_abscont(self, config, capsys):
        assert main(["check-abscont", str(config)]) == EXIT_OK
        assert "holds" in capsys.readouterr().out

    def test_simulate(self, config, tmp_path):
        out = tmp_path / "sim"
        assert main(["--quiet", "simulate", str(config), "--out", str(out)]) == EXIT_OK
        assert (out / "trajectories.csv").exists() and (out / "observations.csv").exists()

    def test_stability(self, config, tmp_path, capsys):
        out = tmp_path / "st"
        assert main(["stability", str(config), "--out", str(out)]) == EXIT_OK
        assert "absolutely continuous: True" in capsys.readouterr().out
        with open(out / "stability.csv", encoding="utf-8") as fh:
            header = next(csv.reader(fh))
        assert header == ["t", "mean_abs_diff_M", "stderr_M", "trace_distance", "stderr_trace_distance"]
        meta = json.loads((out / "stability_meta.json").read_text())
        assert {"observable", "absolutely_continuous", "observable_space_dim", "aborts"} <= set(meta)

    def test_charfn(self, config, tmp_path):
        out = tmp_path / "cf"
        assert main(["charfn", str(config), "--out", str(out), "--quiet"]) == EXIT_OK
        with open(out / "charfn.csv", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["grid_id", "exact_re", "exact_im", "mc_re", "mc_im", "stderr", "zscore"]
        assert len(rows) == 3


class TestExitCodes:
    def test_config_error(self, tmp_path, capsys):
        bad = write_config(tmp_path / "bad.json", model={"H": [[0, 1], [0, 0]], "lindblads": [[[1, 0], [0, 1]]]})
        assert main(["stability", str(bad)]) == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["check-abscont", str(tmp_path / "nope.json")]) == EXIT_CONFIG

    def test_numerical_failure(self, tmp_path):
        # every path aborts: the filter starts in the dark state and the truth clicks at once
        cfg = write_config(tmp_path / "dark.json",
                           model={"H": [[0, 0], [0, 0]], "lindblads": [[[0, 1], [0, 0]]], "detection": "counting"},
                           rho_true={"diag": [0, 1]}, rho_filter={"diag": [1, 0]},
                           grid={"dt": 0.5, "n_steps": 40}, n_paths=3)
        assert main(["--quiet", "stability", str(cfg)]) == EXIT_NUMERICAL

    def test_oracle_failure(self, tmp_path, monkeypatch):
        import qfilterlab.harness as harness
        cfg = write_config(tmp_path / "cfg.json")
        monkeypatch.setattr(harness, "mc_char_fn", lambda records, dt, grid: (complex(5.0), 0.01))
        assert main(["--quiet", "charfn", str(cfg)]) == EXIT_ORACLE

    def test_unknown_command(self):
        with pytest.raises(SystemExit):
            main(["bogus"])


class TestDeterminism:
    def test_byte_identical_csv(self, config, tmp_path):
        for name in ("a", "b"):
            assert main(["--quiet", "stability", str(config), "--out", str(tmp_path / name)]) == EXIT_OK
            assert main(["--quiet", "simulate", str(config), "--out", str(tmp_path / name)]) == EXIT_OK
        for f in ("stability.csv", "trajectories.csv", "observations.csv"):
            assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()

    def test_seed_flag_changes_output(self, config, tmp_path):
        main(["--quiet", "simulate", str(config), "--out", str(tmp_path / "a")])
        main(["--quiet", "--seed", "99", "simulate", str(config), "--out", str(tmp_path / "b")])
        assert (tmp_path / "a" / "observations.csv").read_bytes() != (tmp_path / "b" / "observations.csv").read_bytes()
