"""CLI: config validation, subcommand wiring, exit codes, output files."""

import json

import pytest

from spde_lab import ConfigError
from spde_lab.cli import load_config, parse_config, run_cli


def _write_config(tmp_path, doc, name="config.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


MINIMAL = {"equation": {"kind": "p_laplace", "p": 1.5}}

FD_SMALL = {
    "equation": {"kind": "fast_diffusion", "r": 0.5},
    "grid": {"n": 15},
    "noise": {"k_modes": 8},
}


class TestParseConfig:
    def test_minimal_defaults(self):
        config = parse_config(MINIMAL)
        assert config.spec.kind == "p_laplace"
        assert config.spec.exponent == 1.5
        assert config.spec.epsilon == 0.0
        assert config.integrator.epsilon == 1e-8
        assert config.grid.n == 31
        assert config.integrator.dt == 1e-3
        assert (config.noise.sigma, config.noise.q) == (0.1, 1.0)
        assert (config.noise.k_modes, config.noise.seed) == (16, 0)
        assert config.experiment.n_paths == 200
        assert config.experiment.report is None

    def test_p_range(self):
        with pytest.raises(ConfigError, match=r"p must lie in \(1,2\)"):
            parse_config({"equation": {"kind": "p_laplace", "p": 2.5}})

    def test_r_range(self):
        with pytest.raises(ConfigError, match=r"r must lie in \(0,1\)"):
            parse_config({"equation": {"kind": "fast_diffusion", "r": 1.5}})

    def test_kind_required(self):
        with pytest.raises(ConfigError, match="equation.kind is required"):
            parse_config({"equation": {"p": 1.5}})
        with pytest.raises(ConfigError, match="must be one of"):
            parse_config({"equation": {"kind": "burgers"}})

    def test_unknown_keys_rejected_by_name(self):
        with pytest.raises(ConfigError, match="unknown config key: extras"):
            parse_config({**MINIMAL, "extras": {}})
        with pytest.raises(ConfigError, match="unknown config key: equation.q"):
            parse_config({"equation": {"kind": "p_laplace", "p": 1.5, "q": 1.0}})
        with pytest.raises(ConfigError, match="unknown config key: grid.h"):
            parse_config({**MINIMAL, "grid": {"h": 0.1}})

    def test_cross_kind_exponents_rejected(self):
        with pytest.raises(ConfigError, match="equation.r does not apply"):
            parse_config({"equation": {"kind": "p_laplace", "p": 1.5, "r": 0.5}})
        with pytest.raises(ConfigError, match="equation.p does not apply"):
            parse_config({"equation": {"kind": "fast_diffusion", "r": 0.5, "p": 1.5}})
        with pytest.raises(ConfigError, match="do not apply"):
            parse_config({"equation": {"kind": "linear_heat", "p": 1.5}})

    def test_type_errors_name_the_offending_key(self):
        with pytest.raises(ConfigError, match="grid.n must be an integer, got str"):
            parse_config({**MINIMAL, "grid": {"n": "31"}})
        with pytest.raises(ConfigError, match="grid.n must be an integer, got bool"):
            parse_config({**MINIMAL, "grid": {"n": True}})
        with pytest.raises(ConfigError, match="noise.sigma must be a number"):
            parse_config({**MINIMAL, "noise": {"sigma": "0.1"}})
        with pytest.raises(ConfigError, match="must be a nonempty array"):
            parse_config({**MINIMAL, "experiment": {"time_grid": []}})
        with pytest.raises(ConfigError, match=r"starts\[0\]"):
            parse_config({**MINIMAL, "experiment": {"starts": [1.0]}})

    def test_value_guards(self):
        with pytest.raises(ConfigError, match="dt must be positive"):
            parse_config({**MINIMAL, "integrator": {"dt": 0.0}})
        with pytest.raises(ConfigError, match="epsilon must be nonnegative"):
            parse_config({"equation": {"kind": "p_laplace", "p": 1.5, "epsilon": -1e-9}})
        with pytest.raises(ConfigError, match="n_paths"):
            parse_config({**MINIMAL, "experiment": {"n_paths": 0}})
        with pytest.raises(ConfigError, match="T must be positive"):
            parse_config({**MINIMAL, "experiment": {"T": -1.0}})
        with pytest.raises(ConfigError, match="n_samples"):
            parse_config({**MINIMAL, "experiment": {"n_samples": 1}})

    def test_root_must_be_object(self):
        with pytest.raises(ConfigError, match="JSON object"):
            parse_config([1, 2, 3])
        with pytest.raises(ConfigError, match="must be an object"):
            parse_config({"equation": "p_laplace"})


class TestLoadConfig:
    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_config(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError, match="cannot read config file"):
            load_config(str(tmp_path / "absent.json"))

    def test_round_trip(self, tmp_path):
        path = _write_config(tmp_path, FD_SMALL)
        config = load_config(path)
        assert config.spec.kind == "fast_diffusion"
        assert config.grid.n == 15


class TestDispatch:
    def test_unknown_subcommand(self, capsys):
        assert run_cli(["frobnicate"]) == 2
        capsys.readouterr()

    def test_config_required(self, capsys):
        assert run_cli(["check-assumptions"]) == 2
        assert "--config is required" in capsys.readouterr().err

    def test_bad_config_path_maps_to_two(self, tmp_path, capsys):
        rc = run_cli(["decay", "--config", str(tmp_path / "nope.json")])
        assert rc == 2
        assert "cannot read config file" in capsys.readouterr().err

    def test_config_error_maps_to_two(self, tmp_path, capsys):
        path = _write_config(tmp_path, {"equation": {"kind": "p_laplace", "p": 2.5}})
        rc = run_cli(["simulate", "--config", path])
        assert rc == 2
        assert "p must lie in (1,2)" in capsys.readouterr().err

    def test_seed_override_bounds(self, tmp_path, capsys):
        path = _write_config(tmp_path, FD_SMALL)
        rc = run_cli(["simulate", "--config", path, "--seed", str(1 << 64)])
        assert rc == 2
        assert "unsigned 64-bit" in capsys.readouterr().err


class TestLemma31:
    def test_small_suite_passes(self, tmp_path, capsys):
        rc = run_cli(["lemma31", "--out", str(tmp_path), "--trials", "2000"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "[PASS] lemma31" in out
        payload = json.loads((tmp_path / "gap_suite.json").read_text())
        assert payload["report"] == "lemma31"
        # trials are spread evenly over the 24 (dim, r) cells
        assert payload["trials"] == 24 * (2000 // 24)
        assert payload["pass"] is True
        assert payload["min_normalized_gap"] >= -1e-12

    def test_config_supplies_trials_and_seed(self, tmp_path, capsys):
        path = _write_config(
            tmp_path,
            {**MINIMAL, "noise": {"seed": 7}, "experiment": {"trials": 1500}},
        )
        rc = run_cli(["lemma31", "--config", path, "--out", str(tmp_path)])
        assert rc == 0
        capsys.readouterr()
        payload = json.loads((tmp_path / "gap_suite.json").read_text())
        assert payload["trials"] == 24 * (1500 // 24)


class TestCheckAssumptions:
    def test_writes_summary(self, tmp_path, capsys):
        path = _write_config(
            tmp_path, {**FD_SMALL, "experiment": {"n_samples": 500}}
        )
        rc = run_cli(["check-assumptions", "--config", path, "--out", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "[PASS] check-assumptions" in out
        assert "alpha=1.5" in out
        payload = json.loads((tmp_path / "assumptions.json").read_text())
        assert payload["pass"] is True
        assert payload["delta_a2"] > 0.0
        assert payload["delta_a3"] > 0.0
        assert payload["equation"] == "fast_diffusion"
        assert payload["n"] == 15


class TestSimulate:
    def test_single_start_writes_path(self, tmp_path, capsys):
        path = _write_config(
            tmp_path, {**FD_SMALL, "experiment": {"T": 0.25, "starts": [[1.0]]}}
        )
        rc = run_cli(["simulate", "--config", path, "--out", str(tmp_path)])
        assert rc == 0
        capsys.readouterr()
        csv_text = (tmp_path / "path.csv").read_text()
        lines = csv_text.splitlines()
        assert lines[0] == "t,h_norm_sq_x,v_alpha_int_x"
        assert len(lines) == 252  # header + 251 steps of dt = 1e-3 over T = 0.25
        payload = json.loads((tmp_path / "simulate.json").read_text())
        assert payload["coupled"] is False
        assert payload["pass"] is True

    def test_two_starts_write_coupled(self, tmp_path, capsys):
        path = _write_config(
            tmp_path,
            {**FD_SMALL, "experiment": {"T": 0.25, "starts": [[0.0], [2.0]]}},
        )
        rc = run_cli(["simulate", "--config", path, "--out", str(tmp_path)])
        assert rc == 0
        capsys.readouterr()
        lines = (tmp_path / "coupled.csv").read_text().splitlines()
        assert lines[0] == "t,h_norm_sq_x,v_alpha_int_x,h_norm_sq_y,v_alpha_int_y,dist_h"
        payload = json.loads((tmp_path / "simulate.json").read_text())
        assert payload["coupled"] is True

    def test_start_with_too_many_modes(self, tmp_path, capsys):
        path = _write_config(
            tmp_path,
            {**FD_SMALL, "experiment": {"starts": [[0.0] * 16]}},
        )
        rc = run_cli(["simulate", "--config", path, "--out", str(tmp_path)])
        assert rc == 2
        assert "16 modes" in capsys.readouterr().err

    def test_seed_changes_the_draw(self, tmp_path, capsys):
        path = _write_config(
            tmp_path, {**FD_SMALL, "experiment": {"T": 0.05, "starts": [[1.0]]}}
        )
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert run_cli(["simulate", "--config", path, "--out", str(out_a)]) == 0
        assert run_cli(
            ["simulate", "--config", path, "--out", str(out_b), "--seed", "99"]
        ) == 0
        capsys.readouterr()
        assert (out_a / "path.csv").read_text() != (out_b / "path.csv").read_text()

    def test_solver_failure_exit_code(self, tmp_path, capsys):
        path = _write_config(
            tmp_path,
            {
                "equation": {"kind": "p_laplace", "p": 1.5},
                "grid": {"n": 15},
                "noise": {"k_modes": 8},
                "integrator": {"newton_max_iter": 1},
                "experiment": {"T": 0.25, "starts": [[1.0]]},
            },
        )
        rc = run_cli(["simulate", "--config", path, "--out", str(tmp_path)])
        assert rc == 3
        assert "solver failure" in capsys.readouterr().err


class TestDecayCommand:
    DOC = {
        "equation": {"kind": "p_laplace", "p": 1.5},
        "grid": {"n": 15},
        "noise": {"k_modes": 8},
        "experiment": {"time_grid": [0.25], "n_paths": 3, "n_samples": 500},
    }

    def test_small_run_passes(self, tmp_path, capsys):
        path = _write_config(tmp_path, self.DOC)
        rc = run_cli(["decay", "--config", path, "--out", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "[PASS] decay" in out
        assert "0 pathwise violations" in out
        payload = json.loads((tmp_path / "decay.json").read_text())
        assert payload["pass"] is True
        lines = (tmp_path / "decay.csv").read_text().splitlines()
        assert lines[0] == "t,mc_mean,mc_se,rhs_bound,pathwise_violations,pass"

    def test_byte_identical_across_thread_counts(self, tmp_path, monkeypatch, capsys):
        path = _write_config(tmp_path, self.DOC)
        monkeypatch.setenv("SPDE_LAB_THREADS", "1")
        assert run_cli(["decay", "--config", path, "--out", str(tmp_path / "serial")]) == 0
        monkeypatch.setenv("SPDE_LAB_THREADS", "2")
        assert run_cli(["decay", "--config", path, "--out", str(tmp_path / "pooled")]) == 0
        capsys.readouterr()
        for name in ("decay.csv", "decay.json"):
            assert (tmp_path / "serial" / name).read_bytes() == (
                tmp_path / "pooled" / name
            ).read_bytes()

    def test_paths_flag_overrides_config(self, tmp_path, capsys):
        path = _write_config(tmp_path, self.DOC)
        rc = run_cli(
            ["decay", "--config", path, "--out", str(tmp_path), "--paths", "2"]
        )
        assert rc == 0
        capsys.readouterr()
        payload = json.loads((tmp_path / "decay.json").read_text())
        assert payload["n_paths"] == 2

    def test_single_start_rejected(self, tmp_path, capsys):
        doc = {**self.DOC, "experiment": {**self.DOC["experiment"], "starts": [[1.0]]}}
        path = _write_config(tmp_path, doc)
        rc = run_cli(["decay", "--config", path, "--out", str(tmp_path)])
        assert rc == 2
        assert "two starts" in capsys.readouterr().err


class TestMomentsCommand:
    def test_honest_violation_exits_one(self, tmp_path, capsys):
        doc = {
            **FD_SMALL,
            "noise": {"k_modes": 8, "sigma": 0.0},
            "experiment": {
                "starts": [[1.0]],
                "time_grid": [0.5],
                "n_paths": 2,
                "n_samples": 500,
            },
        }
        path = _write_config(tmp_path, doc)
        rc = run_cli(["moments", "--config", path, "--out", str(tmp_path)])
        assert rc == 1
        assert "[FAIL] moments" in capsys.readouterr().out
        payload = json.loads((tmp_path / "moments.json").read_text())
        assert payload["pass"] is False

    def test_from_rest_passes(self, tmp_path, capsys):
        doc = {
            **FD_SMALL,
            "experiment": {"time_grid": [0.5], "n_paths": 4, "n_samples": 500},
        }
        path = _write_config(tmp_path, doc)
        rc = run_cli(["moments", "--config", path, "--out", str(tmp_path)])
        assert rc == 0
        assert "[PASS] moments" in capsys.readouterr().out


class TestSemigroupCommand:
    def test_default_starts(self, tmp_path, capsys):
        doc = {
            **FD_SMALL,
            "experiment": {"time_grid": [0.25], "n_paths": 2, "n_samples": 500},
        }
        path = _write_config(tmp_path, doc)
        rc = run_cli(["semigroup", "--config", path, "--out", str(tmp_path)])
        assert rc == 0
        assert "[PASS] semigroup" in capsys.readouterr().out
        payload = json.loads((tmp_path / "semigroup.json").read_text())
        assert payload["pass"] is True
        assert "clipped_h_norm" in payload["functionals"]


class TestInvariantCommand:
    def test_two_start_run_reports_kb_and_soft_line(self, tmp_path, capsys):
        doc = {
            **FD_SMALL,
            "experiment": {"T": 50.0, "starts": [[0.0], [2.0]], "n_samples": 500},
        }
        path = _write_config(tmp_path, doc)
        rc = run_cli(["invariant", "--config", path, "--out", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "[PASS] invariant:" in out
        # two horizons (25, 50) -> the soft discrepancy line is printed
        assert "invariant (soft)" in out
        payload = json.loads((tmp_path / "invariant.json").read_text())
        assert payload["kb_ok"] is True
        assert payload["delta_horizons"] == [25.0, 50.0]


class TestErgodicRateCommand:
    def test_fast_diffusion_run(self, tmp_path, capsys):
        doc = {
            **FD_SMALL,
            "experiment": {"time_grid": [0.25], "n_paths": 2, "n_samples": 500},
        }
        path = _write_config(tmp_path, doc)
        rc = run_cli(["ergodic-rate", "--config", path, "--out", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "[PASS] ergodic-rate" in out
        assert "case=lipschitz" in out
        payload = json.loads((tmp_path / "ergodic_rate.json").read_text())
        assert payload["pass"] is True
