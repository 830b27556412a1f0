"""CSV and manifest emission.

Numeric cells use the shortest round-trip decimal representation (Python's
float repr), which makes byte-identical re-runs achievable. All files are
written atomically (temp file + rename) so an interrupted run never leaves a
partial file at the declared path.
"""

from __future__ import annotations

import json
import os
import tempfile
from typing import Iterable

from .experiments import (
    GbmMomentResult,
    KappaEstimate,
    McReport,
    ScanEntry,
    SpectralConvergence,
    TemporalConvergence,
)
from .integrator import TrajectoryRecord, TransformComparison


def fmt(value) -> str:
    """Shortest round-trip cell text: repr for floats, str otherwise, '' for None."""
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))  # plain float: numpy scalars repr differently
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: list[str], rows: Iterable[Iterable]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(cell) for cell in row))
    return "\n".join(lines) + "\n"


TRAJECTORY_HEADER = ["t", "hs_norm", "w1inf_norm", "log_energy"]
ENSEMBLE_HEADER = ["path_id", "status", "t_stop", "final_hs"]
SCAN_HEADER = ["value", "n_survived", "p_hat", "ci_low", "ci_high", "theory_bound"]
COMPARE_HEADER = ["t", "discrepancy"]
CONVERGENCE_DT_HEADER = ["dt", "strong_error"]
CONVERGENCE_N_HEADER = ["n", "error"]
GBM_HEADER = [
    "lambda",
    "rho",
    "t",
    "n_paths",
    "exponent",
    "empirical_moment",
    "stderr",
    "expected_moment",
]


def trajectory_csv(record: TrajectoryRecord) -> str:
    rows = zip(
        (float(t) for t in record.times),
        (float(x) for x in record.hs_norms),
        (float(x) for x in record.w1inf_norms),
        (float(x) for x in record.log_energy),
    )
    return csv_text(TRAJECTORY_HEADER, rows)


def trajectory_meta(record: TrajectoryRecord, config_echo: dict[str, str]) -> dict:
    return {
        "status": record.status.kind,
        "t_stop": record.status.t_event,
        # The stop time is a first-grid-crossing surrogate for blow-up, not a
        # resolved singularity time.
        "surrogate": True,
        "seed": record.seed,
        "config": config_echo,
    }


def ensemble_csv(records: list[TrajectoryRecord]) -> str:
    rows = [
        (
            r.seed,
            r.status.kind,
            r.status.t_event,
            float(r.hs_norms[-1]),
        )
        for r in records
    ]
    return csv_text(ENSEMBLE_HEADER, rows)


def mc_report_dict(report: McReport, config_echo: dict[str, str]) -> dict:
    return {
        "n_paths": report.n_paths,
        "n_survived": report.n_survived,
        "n_stopped": report.n_stopped,
        "n_nonfinite": report.n_nonfinite,
        "p_hat": report.p_hat,
        "ci_low": report.ci_low,
        "ci_high": report.ci_high,
        "theory_bound": report.theory_bound,
        "dt_health": report.dt_health,
        # p_hat estimates P{no stop/overflow before t_final}: a finite-horizon
        # lower-bound proxy for global existence.
        "horizon_proxy": True,
        "config": config_echo,
    }


def scan_csv(entries: list[ScanEntry]) -> str:
    rows = [
        (
            e.value,
            e.report.n_survived,
            e.report.p_hat,
            e.report.ci_low,
            e.report.ci_high,
            e.report.theory_bound,
        )
        for e in entries
    ]
    return csv_text(SCAN_HEADER, rows)


def compare_csv(cmp: TransformComparison) -> str:
    rows = zip(
        (float(t) for t in cmp.times), (float(x) for x in cmp.discrepancies)
    )
    return csv_text(COMPARE_HEADER, rows)


def convergence_dt_csv(study: TemporalConvergence) -> str:
    rows = zip((float(d) for d in study.dts), (float(e) for e in study.errors))
    return csv_text(CONVERGENCE_DT_HEADER, rows)


def convergence_n_csv(study: SpectralConvergence) -> str:
    rows = zip((int(n) for n in study.ns), (float(e) for e in study.errors))
    return csv_text(CONVERGENCE_N_HEADER, rows)


def gbm_csv(result: GbmMomentResult, lam: float, rho: float, t: float) -> str:
    row = (
        lam,
        rho,
        t,
        result.n_paths,
        result.exponent,
        result.empirical_moment,
        result.stderr,
        result.expected_moment,
    )
    return csv_text(GBM_HEADER, [row])


def kappa_dict(est: KappaEstimate) -> dict:
    return {
        "kappa_hat": est.kappa_hat,
        "n_samples": est.n_samples,
        "n_skipped": est.n_skipped,
        "argmax_sample": est.argmax_sample,
        "argmax_amplitude": est.argmax_amplitude,
        "master_seed": est.master_seed,
        "s": est.s,
        "grid": {
            "dimension": est.grid.dimension,
            "points_per_dim": est.grid.points_per_dim,
        },
        "lower_estimate": True,
    }


def write_json(path: str, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
