"""Secondary acceptance: render real simulator scan outputs.

The simulator is driven through its CLI only (the documented external
surface); path counts are reduced relative to the full statistical gates,
which belong to the simulator's own acceptance suite.
"""

import csv
import os
import subprocess
import sys

import pytest

from shks_viz import PlotJob, SchemaError, render


def run_shks(args, cwd):
    proc = subprocess.run(
        [sys.executable, "-m", "shks", *args],
        cwd=cwd,
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    return proc


@pytest.fixture(scope="module")
def noise_scan_csv(tmp_path_factory):
    """Survival scan over the nonlinear noise strength on a config whose
    noise-free column stops deterministically (reduced path count)."""
    out = tmp_path_factory.mktemp("scan8")
    run_shks(
        [
            "scan", "--seed", "8", "--paths", "6", "--out-dir", str(out),
            "--set", "grid.points=32",
            "--set", "dt=0.0005",
            "--set", "t_final=1.75",
            "--set", "ic.amplitude=0.6",
            "--set", "stop_threshold=2.0",
            "--set", "cutoff.radius=2.0",
            "--set", "record_every=500",
            "--set", "noise.type=nonlinear",
            "--set", "noise.delta=1.0",
            "--set", "scan.values=0,1,2,4,8",
        ],
        cwd=str(out),
    )
    return os.path.join(str(out), "scan.csv")


@pytest.fixture(scope="module")
def bound_scan_csv(tmp_path_factory):
    """Single-value linear-noise scan with small data, so theory_bound is
    populated from the configured small-data constants."""
    out = tmp_path_factory.mktemp("scan9")
    run_shks(
        [
            "scan", "--seed", "9", "--paths", "8", "--out-dir", str(out),
            "--set", "grid.points=32",
            "--set", "dt=0.005",
            "--set", "t_final=0.5",
            "--set", "ic.kind=random_sobolev",
            "--set", "ic.target_norm=0.000125",
            "--set", "noise.type=linear",
            "--set", "noise.lambda=1.0",
            "--set", "scan.parameter=linear_lambda",
            "--set", "scan.values=1.0",
            "--set", "bound.big_r=100",
            "--set", "bound.rho=4",
            "--set", "bound.c_tilde=1.0",
        ],
        cwd=str(out),
    )
    return os.path.join(str(out), "scan.csv")


def test_noise_scan_renders_with_ci_bands(noise_scan_csv, tmp_path):
    out = str(tmp_path / "scan8.png")
    result = render(PlotJob(inputs=[noise_scan_csv], kind="survival_scan", out=out))
    assert os.path.exists(out)
    with open(noise_scan_csv) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5
    assert rows[0]["value"] == "0.0"
    # the noise-free column stops deterministically in this configuration
    assert float(rows[0]["p_hat"]) == 0.0


def test_bound_overlay_read_from_csv(bound_scan_csv, tmp_path):
    with open(bound_scan_csv) as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["theory_bound"] != ""
    expected = float(rows[0]["theory_bound"])
    out = str(tmp_path / "scan9.png")
    result = render(PlotJob(inputs=[bound_scan_csv], kind="survival_scan", out=out))
    assert result.annotations["theory_bound"] == expected
    assert os.path.exists(out)


def test_schema_violation_names_column(noise_scan_csv, tmp_path):
    mangled = tmp_path / "mangled.csv"
    with open(noise_scan_csv) as fh:
        lines = fh.read().splitlines()
    header = lines[0].split(",")
    drop = header.index("ci_low")
    rewritten = [",".join(c for i, c in enumerate(line.split(",")) if i != drop) for line in lines]
    mangled.write_text("\n".join(rewritten) + "\n")
    with pytest.raises(SchemaError, match="ci_low"):
        render(PlotJob(inputs=[str(mangled)], kind="survival_scan", out=str(tmp_path / "x.png")))
