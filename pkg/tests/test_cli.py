import csv
import json

import pytest

from landau_blowup.cli import Config, main, parse_config, read_config_file, thread_cap, to_jsonable
from landau_blowup.errors import ConfigurationError


def run_cli(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestParsing:
    def test_defaults(self):
        cfg = parse_config(["constants"])
        assert cfg == Config(subcommand="constants")
        assert cfg.N == 1024 and cfg.r_max == 30.0 and cfg.R1 == 4 and cfg.k2 == 12.5

    def test_precedence(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("# settings\nk2 = 10\nn = 512   # intervals\nalpha = 1.01, 1.02\n")
        cfg = parse_config(["coercivity", "--config", str(path), "--n", "256"])
        assert cfg.k2 == 10.0
        assert cfg.N == 256
        assert cfg.alpha == (1.01, 1.02)

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("k3 = 1\n")
        with pytest.raises(ConfigurationError, match="k3"):
            read_config_file(path)

    def test_malformed_line(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("alpha 1.0\n")
        with pytest.raises(ConfigurationError, match="line 1"):
            read_config_file(path)

    @pytest.mark.parametrize(
        "args,key",
        [
            (["weights", "--k2", "14"], "k2"),
            (["weights", "--r1", "3"], "r1"),
            (["evolve", "--alpha", "1.5"], "alpha"),
            (["constants", "--gamma", "-1.5"], "gamma"),
            (["coercivity", "--n-modes", "900"], "n_modes"),
        ],
    )
    def test_invalid_values_exit_2(self, args, key, capsys):
        code, _, err = run_cli(args, capsys)
        assert code == 2
        assert key in err or "gamma" in err

    def test_unknown_flag_exit_2(self, capsys):
        code, _, err = run_cli(["constants", "--bogus"], capsys)
        assert code == 2 and "configuration error" in err

    def test_to_jsonable(self):
        import numpy as np

        assert to_jsonable({"a": np.float64(float("nan")), "b": (np.int64(2), True)}) == {"a": None, "b": [2, True]}
        with pytest.raises(TypeError):
            to_jsonable(object())


class TestSubcommands:
    def test_constants(self, capsys):
        code, out, _ = run_cli(["constants", "--gamma", "-3", "-2.5", "--n", "512"], capsys)
        assert code == 0
        data = json.loads(out)
        assert data["rows"][0]["sigma"] == pytest.approx(7.0, rel=1e-10)
        assert data["rows"][1]["sigma"] == pytest.approx(3 * 6.5 / 2.5, rel=1e-5)

    def test_weights_files(self, tmp_path, capsys):
        code, _, _ = run_cli(["weights", "--n", "512", "--out", str(tmp_path)], capsys)
        report = json.loads((tmp_path / "weights.json").read_text())
        assert code == (0 if report["certificate"]["passed"] else 1)
        with open(tmp_path / "weights.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["r", "eta", "log_q", "log_rho", "lambda", "rho2", "log_W"]
        assert len(rows) == 514

    def test_weights_pass_with_small_K1(self, capsys):
        code, out, _ = run_cli(["weights", "--n", "512", "--k1", "1e-30"], capsys)
        assert code == 0 and json.loads(out)["certificate"]["passed"]

    def test_coercivity(self, tmp_path, capsys):
        code, _, _ = run_cli(["coercivity", "--n", "512", "--n-modes", "40", "--out", str(tmp_path)], capsys)
        data = json.loads((tmp_path / "coercivity.json").read_text())
        assert code == 0 and data["passed"]
        assert data["c_star"] > 0
        local = {d["n"]: d for d in data["local_gap_surrogate"]}
        assert sorted(local) == [2, 3, 4]
        # the n = 2 ball has too few nodes at N = 512
        assert local[2]["delta"] is None and "grid nodes" in local[2]["skipped"]
        assert local[3]["delta"] > 0 and local[4]["delta"] > 0
        assert (tmp_path / "spectra.csv").exists()

    def test_coercivity_fails_without_gaussian_part(self, capsys):
        code, out, _ = run_cli(["coercivity", "--n", "512", "--n-modes", "40", "--k1", "1e-30"], capsys)
        assert code == 1 and not json.loads(out)["passed"]

    def test_coercivity_verdict_tracks_every_alpha(self, capsys):
        code, out, _ = run_cli(["coercivity", "--n", "512", "--n-modes", "40", "--alpha", "1", "1.02"], capsys)
        data = json.loads(out)
        expected = all(t < 0 for t in data["top_rayleigh"])
        assert data["passed"] == expected
        assert code == (0 if expected else 1)

    def test_evolve_is_deterministic(self, tmp_path, capsys):
        args = ["evolve", "--alpha", "1.05", "--n", "256", "--tau-max", "20", "--initial", "perturbed", "--seed", "4"]
        a, b = tmp_path / "a", tmp_path / "b"
        run_cli(args + ["--out", str(a)], capsys)
        run_cli(args + ["--out", str(b)], capsys)
        for name in ("evolve.json", "evolve.csv"):
            assert (a / name).read_bytes() == (b / name).read_bytes()
        data = json.loads((a / "evolve.json").read_text())
        assert data["config"]["seed"] == 4
        assert data["steps"] == 20

    def test_csv_round_trip(self, tmp_path, capsys):
        run_cli(["evolve", "--alpha", "1.05", "--n", "256", "--tau-max", "4", "--out", str(tmp_path)], capsys)
        with open(tmp_path / "evolve.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert float(rows[0]["tau"]) == 0.0 and float(rows[-1]["tau"]) == 4.0
        assert float(rows[0]["c_l"]) == pytest.approx(0.05 / (8 * 2**0.5), rel=1e-8)

    def test_sweep(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("LANDAU_THREADS", "2")
        run_cli(["sweep", "--alpha", "1.05", "1.1", "--n", "256", "--tau-max", "4", "--out", str(tmp_path)], capsys)
        data = json.loads((tmp_path / "sweep.json").read_text())
        assert [r["config"]["alpha"] for r in data["runs"]] == [1.05, 1.1]


class TestThreads:
    def test_default(self, monkeypatch):
        monkeypatch.delenv("LANDAU_THREADS", raising=False)
        assert thread_cap() == 1

    @pytest.mark.parametrize("raw", ["zero", "0", "-2"])
    def test_invalid(self, monkeypatch, raw):
        monkeypatch.setenv("LANDAU_THREADS", raw)
        with pytest.raises(ConfigurationError, match="LANDAU_THREADS"):
            thread_cap()

    def test_invalid_sweep_exit_2(self, monkeypatch, capsys):
        monkeypatch.setenv("LANDAU_THREADS", "x")
        code, _, _ = run_cli(["sweep", "--alpha", "1.05", "--n", "256", "--tau-max", "2"], capsys)
        assert code == 2
