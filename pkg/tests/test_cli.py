"""Config parsing, dispatch, output formats, and byte-level determinism."""

import json
import math

import numpy as np
import pytest
import yaml

from starkshield.cli import RunConfig, main, parse_config, protection_table, run
from starkshield.emitter import protection_ratio
from starkshield.errors import ConfigError

MINIMAL_RAMSEY = {
    "experiment": "ramsey",
    "seed": 9,
    "ramsey": {
        "s": 40.0,
        "delta": 400.0,
        "b": 19.0,
        "n_trajectories": 3,
        "horizon": 0.5,
        "n_sample_times": 20,
    },
}


class TestParseConfig:
    def test_minimal_ramsey_autofills_omega(self):
        cfg = parse_config(MINIMAL_RAMSEY)
        assert cfg.experiment == "ramsey"
        assert cfg.params["omega"] == pytest.approx(protection_ratio(40.0) * 400.0)
        assert cfg.master_seed == 9

    def test_file_and_override(self, tmp_path):
        path = tmp_path / "cfg.yaml"
        path.write_text(yaml.safe_dump(MINIMAL_RAMSEY))
        cfg = parse_config(str(path), overrides=["ramsey.n_trajectories=7"])
        assert cfg.params["n_trajectories"] == 7

    def test_unknown_key_is_named(self):
        bad = {"experiment": "ramsey", "ramsey": {**MINIMAL_RAMSEY["ramsey"], "bogus": 1}}
        with pytest.raises(ConfigError, match="bogus"):
            parse_config(bad)

    def test_unknown_top_level_key(self):
        bad = {**MINIMAL_RAMSEY, "extra_section": {}}
        with pytest.raises(ConfigError, match="extra_section"):
            parse_config(bad)

    def test_missing_required_keys_are_named(self):
        bad = {"experiment": "ramsey", "ramsey": {"b": 19.0}}
        with pytest.raises(ConfigError, match="delta"):
            parse_config(bad)

    def test_wrong_type_rejected(self):
        bad = {"experiment": "ramsey", "ramsey": {**MINIMAL_RAMSEY["ramsey"], "s": "forty"}}
        with pytest.raises(ConfigError, match="ramsey.s"):
            parse_config(bad)

    def test_nonpositive_value_rejected(self):
        bad = {"experiment": "ramsey", "ramsey": {**MINIMAL_RAMSEY["ramsey"], "delta": -1.0}}
        with pytest.raises(ConfigError, match="delta"):
            parse_config(bad)

    def test_unknown_experiment(self):
        with pytest.raises(ConfigError, match="unknown experiment"):
            parse_config({"experiment": "frobnicate"})

    def test_roundtrip_through_echo(self, tmp_path):
        cfg = parse_config(MINIMAL_RAMSEY)
        echoed = cfg.echo()
        again = parse_config(echoed)
        assert again == cfg


class TestProtectionTable:
    def test_row_values(self):
        rows = protection_table([40.0])
        s, rhs, ratio, asym, residual = rows[0]
        assert rhs == pytest.approx(39.0 / 41.0)
        assert rhs == pytest.approx(0.951220, abs=1e-6)
        assert residual < 1e-10
        assert asym == pytest.approx(1.0 / math.sqrt(41.0))

    def test_asymptote_ratio_approaches_one(self):
        rows = protection_table([10.0, 100.0, 1e4, 1e6])
        ratios = [r[2] / r[3] for r in rows]
        devs = [abs(x - 1.0) for x in ratios]
        assert all(a > b for a, b in zip(devs, devs[1:]))
        assert devs[-1] < 1e-3


def run_dir(tmp_path, name, cfg, seed=None, threads=None):
    out = tmp_path / name
    rc = parse_config(cfg, seed=seed, threads=threads)
    manifest = run(rc, str(out))
    return out, manifest


class TestRunOutputs:
    def test_protection_table_outputs(self, tmp_path):
        out, manifest = run_dir(tmp_path, "pt", {"experiment": "protection-table"})
        csv = (out / "protection_table.csv").read_text().splitlines()
        assert csv[0] == "s,rhs,ratio,asymptote,residual"
        assert len(csv) == 8
        assert (out / "manifest.json").exists()
        assert manifest["summary"]["max_residual"] < 1e-10
        assert manifest["seed"] == 0
        assert manifest["version"]

    def test_ramsey_outputs(self, tmp_path):
        out, manifest = run_dir(tmp_path, "rm", MINIMAL_RAMSEY)
        lines = (out / "signal.csv").read_text().splitlines()
        assert lines[0] == "t,mean,stderr"
        assert len(lines) == 21
        loaded = json.loads((out / "manifest.json").read_text())
        assert loaded["config"]["ramsey"]["omega"] > 0

    def test_gain_sweep_header(self, tmp_path):
        cfg = {
            "experiment": "gain-sweep",
            "gain_sweep": {
                "s_values": [10.0],
                "delta_values": [300.0],
                "n_trajectories": 3,
                "horizon": 0.5,
                "n_sample_times": 20,
            },
        }
        out, _ = run_dir(tmp_path, "gs", cfg)
        lines = (out / "gain_table.csv").read_text().splitlines()
        assert lines[0] == "s,delta,omega,t2,gain,ripple,stderr"
        assert len(lines) == 2

    def test_spectroscopy_long_form(self, tmp_path):
        cfg = {
            "experiment": "spectroscopy",
            "spectroscopy": {
                "delta": 0.0,
                "delta_omega_values": [-4.0, 0.0, 4.0],
                "chi_values": [0.4, 4.0],
                "t_final": 2.0,
                "n_realizations": 2,
            },
        }
        out, manifest = run_dir(tmp_path, "sp", cfg)
        lines = (out / "map.csv").read_text().splitlines()
        assert lines[0] == "delta_omega,chi,excitation,stderr"
        assert len(lines) == 7
        assert manifest["summary"]["grid"] == [2, 3]

    def test_qpt_outputs(self, tmp_path):
        cfg = {
            "experiment": "qpt",
            "qpt": {"exact": True, "n_realizations": 3, "gate": "xpi"},
        }
        out, manifest = run_dir(tmp_path, "qpt", cfg)
        for name in ("chi_ideal.csv", "chi_noisy.csv", "chi_protected.csv"):
            lines = (out / name).read_text().splitlines()
            assert lines[0] == "i,j,re,im"
            assert len(lines) == 17
        summary = json.loads((out / "qpt_summary.json").read_text())
        assert summary["fidelity_ideal"] == pytest.approx(1.0, abs=1e-6)
        assert manifest["summary"]["fidelity_protected"] > manifest["summary"]["fidelity_noisy"]

    def test_noise_validate_outputs(self, tmp_path):
        cfg = {
            "experiment": "noise-validate",
            "noise_validate": {"kind": "rtn", "n_traces": 50, "horizon": 5.0},
        }
        out, manifest = run_dir(tmp_path, "nv", cfg)
        lines = (out / "noise_stats.csv").read_text().splitlines()
        assert lines[0] == "lag,estimate,stderr,theory"
        assert manifest["summary"]["mean_jump_count"] > 0


class TestDeterminism:
    def test_byte_identical_across_runs_and_threads(self, tmp_path):
        a, _ = run_dir(tmp_path, "a", MINIMAL_RAMSEY, threads=1)
        b, _ = run_dir(tmp_path, "b", MINIMAL_RAMSEY, threads=2)
        assert (a / "signal.csv").read_bytes() == (b / "signal.csv").read_bytes()

    def test_seed_changes_output(self, tmp_path):
        a, _ = run_dir(tmp_path, "a", MINIMAL_RAMSEY, seed=1)
        b, _ = run_dir(tmp_path, "b", MINIMAL_RAMSEY, seed=2)
        assert (a / "signal.csv").read_bytes() != (b / "signal.csv").read_bytes()


class TestMain:
    def test_config_error_exit_code(self, tmp_path):
        rc = main(["ramsey", "--out", str(tmp_path / "x")])
        assert rc == 2  # missing required keys

    def test_success_exit_code(self, tmp_path, capsys):
        rc = main(
            [
                "protection-table",
                "--out",
                str(tmp_path / "ok"),
                "--seed",
                "3",
            ]
        )
        assert rc == 0
        assert "max_residual" in capsys.readouterr().out

    def test_experiment_mismatch(self, tmp_path):
        path = tmp_path / "c.yaml"
        path.write_text(yaml.safe_dump(MINIMAL_RAMSEY))
        rc = main(["qpt", "--config", str(path), "--out", str(tmp_path / "y")])
        assert rc == 2
