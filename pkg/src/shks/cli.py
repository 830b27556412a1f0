"""Command-line entry point.

Subcommands: simulate, montecarlo, scan, transform-check, kappa, gbm-check,
converge-dt, converge-n. Every subcommand accepts --config, --seed, --out-dir
and repeatable --set key=value overrides (flags win over file values; the
manifest records both). Exit codes: 0 success, 2 configuration error,
3 study abort. The worker count for ensemble subcommands comes from the
SHKS_WORKERS environment variable (default 1).
"""

from __future__ import annotations

import argparse
import os
import sys
import time

from . import __version__
from .config import ConfigError, ResolvedConfig, parse_config
from .experiments import (
    StudyAbortError,
    estimate_kappa,
    gbm_moment_check,
    monte_carlo_survival,
    run_ensemble,
    spectral_convergence,
    summarize_ensemble,
    temporal_convergence,
    threshold_scan,
)
from .integrator import (
    BROWNIAN_TAG,
    INITIAL_TAG,
    path_stream,
    realize_initial,
    run_trajectory,
    transform_compare,
)
from . import reporting as rep

SUBCOMMANDS = (
    "simulate",
    "montecarlo",
    "scan",
    "transform-check",
    "kappa",
    "gbm-check",
    "converge-dt",
    "converge-n",
)


def _worker_count() -> int:
    raw = os.environ.get("SHKS_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _parse_overrides(pairs: list[str]) -> dict[str, str]:
    overrides: dict[str, str] = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigError(f"--set expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="shks",
        description="Pseudo-spectral simulator for the stochastic hyperbolic "
        "Keller-Segel equation on the periodic torus.",
    )
    parser.add_argument("--version", action="version", version=f"shks {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="flat key=value config file")
        p.add_argument("--seed", type=int, default=0, help="master seed")
        p.add_argument("--out-dir", default="out", help="output directory")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config key (repeatable; wins over the file)",
        )
        if name in ("montecarlo", "scan"):
            p.add_argument("--paths", type=int, default=None, help="override mc.paths")
    return parser


class _Manifest:
    def __init__(self, subcommand: str, seed: int, out_dir: str, rc: ResolvedConfig):
        self.start = time.perf_counter()
        self.payload = {
            "subcommand": subcommand,
            "version": __version__,
            "master_seed": seed,
            "out_dir": os.path.abspath(out_dir),
            "outputs": [],
            "config": rc.resolved,
            "config_file_values": rc.file_values,
            "flag_overrides": rc.overrides,
        }
        self.out_dir = out_dir

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def add_output(self, name: str, text: str) -> str:
        path = self.path(name)
        rep.atomic_write_text(path, text)
        self.payload["outputs"].append(os.path.abspath(path))
        return path

    def add_json(self, name: str, payload: dict) -> str:
        path = self.path(name)
        rep.write_json(path, payload)
        self.payload["outputs"].append(os.path.abspath(path))
        return path

    def finish(self, status: str = "ok") -> None:
        self.payload["status"] = status
        self.payload["duration_seconds"] = time.perf_counter() - self.start
        rep.write_json(self.path("manifest.json"), self.payload)


def _cmd_simulate(args, rc: ResolvedConfig, man: _Manifest) -> int:
    cfg = rc.solver
    ic_rng = path_stream(args.seed, 0, INITIAL_TAG)
    bm_rng = path_stream(args.seed, 0, BROWNIAN_TAG)
    u0 = realize_initial(cfg.initial, cfg.grid, cfg.s, ic_rng)
    record = run_trajectory(cfg, bm_rng, initial_field=u0, seed=args.seed)
    man.add_output("trajectory.csv", rep.trajectory_csv(record))
    man.add_json("trajectory.meta.json", rep.trajectory_meta(record, rc.resolved))
    man.finish()
    return 0


def _cmd_montecarlo(args, rc: ResolvedConfig, man: _Manifest) -> int:
    cfg = rc.solver
    n_paths = args.paths if args.paths is not None else rc.experiment.mc_paths
    if n_paths < 1:
        raise ConfigError(f"mc.paths: must be >= 1, got {n_paths}")
    records = run_ensemble(cfg, n_paths, args.seed, workers=_worker_count())
    report = summarize_ensemble(
        cfg, records, bound=rc.experiment.bound, master_seed=args.seed
    )
    man.add_output("ensemble.csv", rep.ensemble_csv(records))
    man.add_json("report.json", rep.mc_report_dict(report, rc.resolved))
    man.finish()
    return 0


def _cmd_scan(args, rc: ResolvedConfig, man: _Manifest) -> int:
    cfg = rc.solver
    n_paths = args.paths if args.paths is not None else rc.experiment.mc_paths
    if n_paths < 1:
        raise ConfigError(f"mc.paths: must be >= 1, got {n_paths}")
    entries = threshold_scan(
        cfg,
        rc.experiment.scan_parameter,
        rc.experiment.scan_values,
        n_paths,
        args.seed,
        bound=rc.experiment.bound,
        workers=_worker_count(),
    )
    man.add_output("scan.csv", rep.scan_csv(entries))
    man.add_json(
        "report.json",
        {
            "parameter": rc.experiment.scan_parameter,
            "entries": [
                {"value": e.value, **rep.mc_report_dict(e.report, {})}
                for e in entries
            ],
            "config": rc.resolved,
        },
    )
    man.finish()
    return 0


def _cmd_transform_check(args, rc: ResolvedConfig, man: _Manifest) -> int:
    cfg = rc.solver
    ic_rng = path_stream(args.seed, 0, INITIAL_TAG)
    bm_rng = path_stream(args.seed, 0, BROWNIAN_TAG)
    u0 = realize_initial(cfg.initial, cfg.grid, cfg.s, ic_rng)
    cmp = transform_compare(cfg, bm_rng, initial_field=u0)
    man.add_output("compare.csv", rep.compare_csv(cmp))
    man.add_json(
        "report.json",
        {
            "max_discrepancy": cmp.max_discrepancy,
            "status": cmp.status,
            "dt": cmp.dt,
            "lambda": cmp.lam,
            "config": rc.resolved,
        },
    )
    if cmp.status != "complete":
        man.finish(status=cmp.status)
        print(f"transform-check aborted: {cmp.status}", file=sys.stderr)
        return 3
    man.finish()
    return 0


def _cmd_kappa(args, rc: ResolvedConfig, man: _Manifest) -> int:
    cfg = rc.solver
    est = estimate_kappa(
        cfg.grid,
        cfg.s,
        rc.experiment.kappa_samples,
        rc.experiment.kappa_amplitudes,
        args.seed,
    )
    man.add_json("kappa.json", rep.kappa_dict(est))
    man.finish()
    return 0


def _cmd_gbm_check(args, rc: ResolvedConfig, man: _Manifest) -> int:
    exp = rc.experiment
    rng = path_stream(args.seed, 0, BROWNIAN_TAG)
    result = gbm_moment_check(exp.gbm_lambda, exp.gbm_rho, exp.gbm_t, exp.gbm_paths, rng)
    man.add_output("gbm.csv", rep.gbm_csv(result, exp.gbm_lambda, exp.gbm_rho, exp.gbm_t))
    man.add_json(
        "report.json",
        {
            "lambda": exp.gbm_lambda,
            "rho": exp.gbm_rho,
            "t": exp.gbm_t,
            "n_paths": result.n_paths,
            "exponent": result.exponent,
            "empirical_moment": result.empirical_moment,
            "stderr": result.stderr,
            "expected_moment": result.expected_moment,
        },
    )
    man.finish()
    return 0


def _cmd_converge_dt(args, rc: ResolvedConfig, man: _Manifest) -> int:
    cfg = rc.solver
    rng = path_stream(args.seed, 0, BROWNIAN_TAG)
    study = temporal_convergence(
        cfg, rc.experiment.dt_ladder, rng, n_paths=rc.experiment.conv_paths
    )
    man.add_output("convergence.csv", rep.convergence_dt_csv(study))
    man.add_json(
        "report.json",
        {
            "kind": "dt",
            "slope": study.slope,
            "reference_dt": study.reference_dt,
            "n_paths": study.n_paths,
            "dts": [float(d) for d in study.dts],
            "errors": [float(e) for e in study.errors],
            "config": rc.resolved,
        },
    )
    man.finish()
    return 0


def _cmd_converge_n(args, rc: ResolvedConfig, man: _Manifest) -> int:
    cfg = rc.solver
    study = spectral_convergence(
        cfg.grid,
        cfg.initial,
        cfg.s,
        rc.experiment.conv_r,
        rc.experiment.n_ladder,
        seed=args.seed,
    )
    man.add_output("convergence.csv", rep.convergence_n_csv(study))
    man.add_json(
        "report.json",
        {
            "kind": "n",
            "slope": study.slope,
            "theoretical_slope": study.theoretical_slope,
            "ns": [int(n) for n in study.ns],
            "errors": [float(e) for e in study.errors],
            "config": rc.resolved,
        },
    )
    man.finish()
    return 0


_HANDLERS = {
    "simulate": _cmd_simulate,
    "montecarlo": _cmd_montecarlo,
    "scan": _cmd_scan,
    "transform-check": _cmd_transform_check,
    "kappa": _cmd_kappa,
    "gbm-check": _cmd_gbm_check,
    "converge-dt": _cmd_converge_dt,
    "converge-n": _cmd_converge_n,
}


def dispatch(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        overrides = _parse_overrides(args.overrides)
        rc = parse_config(args.config, overrides)
        man = _Manifest(args.subcommand, args.seed, args.out_dir, rc)
        return _HANDLERS[args.subcommand](args, rc, man)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except StudyAbortError as exc:
        print(f"study aborted: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
