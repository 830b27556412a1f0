"""Configuration parsing, subcommand dispatch, file emission, determinism."""

import json
import os

import pytest

from shks.cli import dispatch
from shks.config import (
    ConfigError,
    DEFAULTS,
    build_solver_config,
    parse_config,
    parse_config_text,
    resolve,
)
from shks.dynamics import LinearNoise, NonlinearNoise, ZeroNoise
from shks.integrator import SingleMode
from shks.reporting import atomic_write_text


class TestParseConfig:
    def test_empty_config_gives_defaults(self):
        rc = parse_config(None)
        cfg = rc.solver
        assert cfg.grid.dimension == 1
        assert cfg.grid.points_per_dim == 128
        assert cfg.s == 2.0
        assert cfg.dt == 1e-3
        assert cfg.t_final == 1.0
        assert isinstance(cfg.noise, ZeroNoise)
        assert cfg.stop_threshold == 1e3

    def test_rejects_odd_points(self):
        with pytest.raises(ConfigError, match="grid.points"):
            build_solver_config(resolve({"grid.points": "15"}))

    def test_rejects_unknown_keys(self):
        with pytest.raises(ConfigError, match="grid.pionts"):
            resolve({"grid.pionts": "64", "dt": "0.1"})

    def test_rejects_invalid_values_by_name(self):
        for key, value in (("dt", "0"), ("s", "-1"), ("t_final", "0")):
            with pytest.raises(ConfigError, match=key):
                build_solver_config(resolve({key: value}))

    def test_flag_overrides_win(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("dt = 0.01\nnoise.type = linear\nnoise.lambda = 2.0\n")
        rc = parse_config(str(path), {"dt": "0.005"})
        assert rc.solver.dt == 0.005
        assert rc.file_values["dt"] == "0.01"
        assert rc.overrides["dt"] == "0.005"
        assert rc.solver.noise == LinearNoise(2.0)

    def test_parse_text_syntax(self):
        values = parse_config_text("a.b = 1  # trailing comment\n\n# line comment\n")
        assert values == {"a.b": "1"}
        with pytest.raises(ConfigError, match="line 2|:2"):
            parse_config_text("a = 1\nnot a pair\n", source="x")

    def test_noise_and_ic_variants(self):
        rc = resolve(
            {
                "noise.type": "nonlinear",
                "noise.delta": "0.5",
                "noise.c_eff": "2.0",
                "ic.kind": "random_sobolev",
                "ic.target_norm": "0.25",
            }
        )
        cfg = build_solver_config(rc)
        assert cfg.noise == NonlinearNoise(delta=0.5, c_eff=2.0)
        assert cfg.initial.target_norm == 0.25

    def test_wavevector_dimension_handling(self):
        cfg = build_solver_config(
            resolve(
                {
                    "grid.dimension": "2",
                    "grid.points": "32",
                    "s": "2.5",
                    "ic.wavevector": "1,2",
                }
            )
        )
        assert cfg.initial == SingleMode(amplitude=0.05, wavevector=(1, 2))

    def test_defaults_table_is_complete(self):
        # every key used by the builders exists in DEFAULTS
        rc = parse_config(None)
        assert set(rc.resolved) == set(DEFAULTS)


def run_cli(args):
    return dispatch(args)


FAST = [
    "--set", "grid.points=32", "--set", "dt=0.01", "--set", "t_final=0.05",
    "--set", "record_every=2",
]


class TestDispatch:
    def test_simulate_writes_outputs(self, tmp_path):
        out = str(tmp_path / "run")
        code = run_cli(["simulate", "--out-dir", out, *FAST])
        assert code == 0
        assert os.path.exists(os.path.join(out, "trajectory.csv"))
        with open(os.path.join(out, "trajectory.csv")) as fh:
            assert fh.readline().strip() == "t,hs_norm,w1inf_norm,log_energy"
        manifest = json.load(open(os.path.join(out, "manifest.json")))
        for output in manifest["outputs"]:
            assert os.path.exists(output)

    def test_montecarlo_zero_paths_is_config_error(self, tmp_path):
        code = run_cli(
            ["montecarlo", "--paths", "0", "--out-dir", str(tmp_path / "x"), *FAST]
        )
        assert code == 2

    def test_bad_ladder_divisibility_exit_2(self, tmp_path, capsys):
        code = run_cli(
            [
                "converge-dt",
                "--out-dir", str(tmp_path / "x"),
                *FAST,
                "--set", "t_final=0.1",
                "--set", "dt_ladder=0.01,0.004",
            ]
        )
        assert code == 2
        assert "divide" in capsys.readouterr().err

    def test_montecarlo_byte_identical_reruns(self, tmp_path):
        args = [
            "montecarlo", "--seed", "11", "--paths", "4",
            "--set", "noise.type=linear", "--set", "noise.lambda=0.5", *FAST,
        ]
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        assert run_cli(args + ["--out-dir", out1]) == 0
        assert run_cli(args + ["--out-dir", out2]) == 0
        body1 = open(os.path.join(out1, "ensemble.csv"), "rb").read()
        body2 = open(os.path.join(out2, "ensemble.csv"), "rb").read()
        assert body1 == body2
        rep1 = open(os.path.join(out1, "report.json"), "rb").read()
        rep2 = open(os.path.join(out2, "report.json"), "rb").read()
        assert rep1 == rep2

    def test_manifest_round_trips(self, tmp_path):
        out = str(tmp_path / "m")
        assert run_cli(["simulate", "--out-dir", out, *FAST]) == 0
        manifest = json.load(open(os.path.join(out, "manifest.json")))
        echoed = manifest["config"]
        rc = parse_config(None, echoed)
        assert rc.solver == build_solver_config(resolve(echoed))
        assert rc.solver.dt == 0.01
        assert rc.solver.grid.points_per_dim == 32

    def test_scan_csv_schema(self, tmp_path):
        out = str(tmp_path / "scan")
        code = run_cli(
            [
                "scan", "--out-dir", out, "--paths", "2", *FAST,
                "--set", "noise.type=nonlinear", "--set", "scan.values=0,1",
            ]
        )
        assert code == 0
        lines = open(os.path.join(out, "scan.csv")).read().splitlines()
        assert lines[0] == "value,n_survived,p_hat,ci_low,ci_high,theory_bound"
        assert len(lines) == 3

    def test_transform_check_runs(self, tmp_path):
        out = str(tmp_path / "tc")
        code = run_cli(
            [
                "transform-check", "--out-dir", out, *FAST,
                "--set", "noise.type=linear", "--set", "noise.lambda=0.4",
            ]
        )
        assert code == 0
        report = json.load(open(os.path.join(out, "report.json")))
        assert report["status"] == "complete"

    def test_gbm_and_kappa_and_converge_n(self, tmp_path):
        assert run_cli(
            ["gbm-check", "--out-dir", str(tmp_path / "g"), "--set", "gbm.paths=1000"]
        ) == 0
        assert run_cli(
            [
                "kappa", "--out-dir", str(tmp_path / "k"), *FAST,
                "--set", "kappa.samples=2",
            ]
        ) == 0
        assert run_cli(
            [
                "converge-n", "--out-dir", str(tmp_path / "n"),
                "--set", "ic.kind=random_sobolev", "--set", "ic.decay=4.0",
                "--set", "ic.seed=3", "--set", "s=3.0", "--set", "conv.r=1.0",
                "--set", "n_ladder=4,8,16",
            ]
        ) == 0
        report = json.load(open(tmp_path / "n" / "report.json"))
        assert report["kind"] == "n"
        assert report["theoretical_slope"] == -2.0

    def test_unknown_subcommand_exit_2(self):
        assert run_cli(["frobnicate"]) == 2


class TestAtomicWrite:
    def test_interrupted_write_leaves_no_partial_file(self, tmp_path, monkeypatch):
        target = tmp_path / "out.csv"

        class Boom(RuntimeError):
            pass

        import shks.reporting as reporting

        real_replace = os.replace

        def exploding_replace(src, dst):
            raise Boom("interrupted")

        monkeypatch.setattr(reporting.os, "replace", exploding_replace)
        with pytest.raises(Boom):
            atomic_write_text(str(target), "partial data")
        monkeypatch.setattr(reporting.os, "replace", real_replace)
        assert not target.exists()
        assert not [p for p in os.listdir(tmp_path) if p.endswith("~")]
