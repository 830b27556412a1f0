"""Figure rendering for simulator outputs.

Every plotted number originates in an input file; nothing is recomputed
here. Rendering is deterministic: fixed backend, figure geometry, and
stripped volatile metadata, so identical inputs give identical image bytes.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be pinned first)

from .schemas import (
    CONVERGENCE_DT_COLUMNS,
    CONVERGENCE_N_COLUMNS,
    GBM_COLUMNS,
    SCAN_COLUMNS,
    TRAJECTORY_COLUMNS,
    SchemaError,
    read_table,
    sidecar_json,
    trajectory_meta,
)

FIGSIZE = (7.0, 4.5)
DPI = 110

PLOT_KINDS = ("trajectory", "survival_scan", "convergence", "gbm")


@dataclass
class PlotJob:
    """One rendering request: inputs, kind, output path, styling."""

    inputs: list[str]
    kind: str
    out: str
    log_x: bool = False
    log_y: bool = False
    ci_band: bool = True

    def __post_init__(self) -> None:
        if self.kind not in PLOT_KINDS:
            raise SchemaError(
                f"unknown plot kind {self.kind!r}; expected one of {PLOT_KINDS}"
            )
        if not self.inputs:
            raise SchemaError("at least one input file is required")


@dataclass
class PlotResult:
    """What was rendered, for callers and tests."""

    out: str
    kind: str
    annotations: dict = field(default_factory=dict)


def _save(fig, out: str) -> None:
    if out.endswith(".svg"):
        metadata = {"Date": None}
    else:
        metadata = {"Software": None}
    fig.savefig(out, dpi=DPI, metadata=metadata)
    plt.close(fig)


def plot_trajectory(job: PlotJob) -> PlotResult:
    """Three stacked panels: H^s norm, W^{1,inf} norm, log-energy vs time.

    Stop/overflow events from the side-car metadata are marked with vertical
    lines; multiple inputs overlay with a legend of seeds.
    """
    fig, axes = plt.subplots(3, 1, figsize=(FIGSIZE[0], 7.5), sharex=True)
    events = []
    for path in job.inputs:
        table = read_table(path, TRAJECTORY_COLUMNS)
        meta = trajectory_meta(path) or {}
        label = f"seed {meta.get('seed', '?')}"
        t = table.floats("t")
        axes[0].plot(t, table.floats("hs_norm"), label=label)
        axes[1].plot(t, table.floats("w1inf_norm"), label=label)
        axes[2].plot(t, table.floats("log_energy"), label=label)
        status = meta.get("status")
        if status in ("stopped", "nonfinite") and meta.get("t_stop") is not None:
            style = {"stopped": "--", "nonfinite": ":"}[status]
            for ax in axes:
                ax.axvline(meta["t_stop"], linestyle=style, color="tab:red", lw=1.0)
            events.append({"status": status, "t": meta["t_stop"], "file": path})
    axes[0].set_ylabel("H^s norm")
    axes[1].set_ylabel("W^{1,inf} norm")
    axes[2].set_ylabel("ln(e + H^s^2)")
    axes[2].set_xlabel("t")
    if job.log_y:
        axes[0].set_yscale("log")
        axes[1].set_yscale("log")
    if len(job.inputs) > 1:
        axes[0].legend(loc="best", fontsize=8)
    fig.tight_layout()
    _save(fig, job.out)
    return PlotResult(out=job.out, kind=job.kind, annotations={"events": events})


def plot_survival_scan(job: PlotJob) -> PlotResult:
    """Survival probability vs scanned parameter with Wilson CI band.

    When the theory_bound column is populated, a dashed horizontal line is
    drawn at the value read from the CSV (never recomputed).
    """
    fig, ax = plt.subplots(figsize=FIGSIZE)
    bound_drawn = None
    for path in job.inputs:
        table = read_table(path, SCAN_COLUMNS)
        values = table.floats("value")
        p = table.floats("p_hat")
        low = table.floats("ci_low")
        high = table.floats("ci_high")
        # interval endpoints contain p_hat up to round-off; clip the dust
        lower = [max(0.0, pi - lo) for pi, lo in zip(p, low)]
        upper = [max(0.0, hi - pi) for pi, hi in zip(p, high)]
        ax.errorbar(values, p, yerr=[lower, upper], fmt="o-", capsize=3, label=path)
        if job.ci_band:
            ax.fill_between(values, low, high, alpha=0.15)
        bounds = [b for b in table.optional_floats("theory_bound") if b is not None]
        if bounds and bound_drawn is None:
            bound_drawn = bounds[0]
            ax.axhline(
                bound_drawn,
                linestyle="--",
                color="k",
                lw=1.2,
                label=f"theoretical bound {bound_drawn:.3f}",
            )
    ax.set_xlabel("parameter value")
    ax.set_ylabel("survival probability")
    ax.set_ylim(-0.02, 1.05)
    if job.log_x:
        ax.set_xscale("log")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    _save(fig, job.out)
    return PlotResult(
        out=job.out, kind=job.kind, annotations={"theory_bound": bound_drawn}
    )


def _convergence_kind(columns: list[str]) -> str:
    if all(c in columns for c in CONVERGENCE_DT_COLUMNS):
        return "dt"
    if all(c in columns for c in CONVERGENCE_N_COLUMNS):
        return "n"
    raise SchemaError(
        f"missing required column(s) {CONVERGENCE_DT_COLUMNS[0]}/{CONVERGENCE_DT_COLUMNS[1]} "
        f"or {CONVERGENCE_N_COLUMNS[0]}/{CONVERGENCE_N_COLUMNS[1]} "
        f"(found: {', '.join(columns)})"
    )


def plot_convergence(job: PlotJob) -> PlotResult:
    """Log-log error plot vs dt or n, with the fitted slope read from the
    side-car report (a warning is emitted and the annotation skipped when the
    report is absent). Mixed dt/n inputs are rejected."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    kinds = set()
    slopes = []
    for path in job.inputs:
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
        kind = _convergence_kind(header)
        kinds.add(kind)
        if len(kinds) > 1:
            raise SchemaError(
                "cannot merge convergence kinds: inputs mix dt- and n-ladders"
            )
        x_col, y_col = ("dt", "strong_error") if kind == "dt" else ("n", "error")
        table = read_table(path, [x_col, y_col])
        ax.loglog(table.floats(x_col), table.floats(y_col), "o-", label=path)
        report = sidecar_json(path, "report.json")
        if report is not None and report.get("slope") is not None:
            slopes.append(report["slope"])
        else:
            warnings.warn(f"{path}: no report.json slope; skipping annotation")
    if slopes:
        ax.set_title(f"fitted slope {slopes[0]:.3f}")
    x_label = "dt" if "dt" in kinds else "n"
    ax.set_xlabel(x_label)
    ax.set_ylabel("error")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    _save(fig, job.out)
    return PlotResult(
        out=job.out,
        kind=job.kind,
        annotations={"slopes": slopes, "ladder": next(iter(kinds))},
    )


def plot_gbm(job: PlotJob) -> PlotResult:
    """Empirical moment with a 4-standard-error bar against the expected
    value read from the CSV."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    expected = None
    for i, path in enumerate(job.inputs):
        table = read_table(path, GBM_COLUMNS)
        moment = table.floats("empirical_moment")
        err = [4.0 * e for e in table.floats("stderr")]
        xs = list(range(i, i + len(moment)))
        ax.errorbar(xs, moment, yerr=err, fmt="o", capsize=4, label=path)
        if expected is None:
            expected = table.floats("expected_moment")[0]
            ax.axhline(expected, linestyle="--", color="k", lw=1.2,
                       label=f"expected {expected:.4f}")
    ax.set_xlabel("run")
    ax.set_ylabel("sample moment")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    _save(fig, job.out)
    return PlotResult(out=job.out, kind=job.kind, annotations={"expected": expected})


RENDERERS = {
    "trajectory": plot_trajectory,
    "survival_scan": plot_survival_scan,
    "convergence": plot_convergence,
    "gbm": plot_gbm,
}


def render(job: PlotJob) -> PlotResult:
    return RENDERERS[job.kind](job)
