"""Acceptance gate: quantitative surrogates for the solver's contracts.

Each test prints one PASS/FAIL line (run with -s to see them live) and
enforces both the stated tolerance and the runtime budget.
"""

import math
import os
import time
from dataclasses import replace

import numpy as np
import pytest

from shks.cli import dispatch
from shks.dynamics import (
    CutoffSpec,
    LinearNoise,
    NonlinearNoise,
    ZeroNoise,
    drift,
    drift_divergence_form,
    helmholtz_solve,
)
from shks.experiments import (
    SmallDataBound,
    gbm_moment_check,
    monte_carlo_survival,
    spectral_convergence,
    temporal_convergence,
    threshold_scan,
    wilson_interval,
)
from shks.integrator import (
    BROWNIAN_TAG,
    RandomSobolev,
    SingleMode,
    SolverConfig,
    path_stream,
    realize_initial,
    run_trajectory,
    transform_compare,
)
from shks.spectral import (
    TorusGrid,
    dealias,
    field_from_coeffs,
    inverse_transform,
    sobolev_norm,
    w1inf_norm,
)


class Gate:
    def __init__(self, number: int, name: str, limit_s: float):
        self.number = number
        self.name = name
        self.limit = limit_s
        self.start = time.perf_counter()

    def done(self, ok: bool, detail: str = "") -> None:
        elapsed = time.perf_counter() - self.start
        verdict = "PASS" if ok and elapsed < self.limit else "FAIL"
        print(
            f"ACCEPTANCE {self.number:02d} {self.name}: {verdict} "
            f"({elapsed:.1f}s / limit {self.limit:.0f}s){' ' + detail if detail else ''}"
        )
        assert ok, f"criterion {self.number} ({self.name}): {detail}"
        assert elapsed < self.limit, (
            f"criterion {self.number} exceeded runtime budget: {elapsed:.1f}s"
        )


def random_field(grid, rng, decay=3.0, norm=1.0, s=2.0):
    coeffs = (
        rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    ) * np.power(1.0 + grid.k_square, -decay / 2.0)
    f = dealias(field_from_coeffs(grid, coeffs, tol=np.inf))
    return (norm / sobolev_norm(f, s)) * f


WORKERS = min(2, os.cpu_count() or 1)


def test_01_multiplier_exactness():
    gate = Gate(1, "multiplier-exactness", 5.0)
    worst = 0.0
    for grid, n_fields, seed in ((TorusGrid(1, 128), 100, 1), (TorusGrid(2, 64), 100, 2)):
        rng = np.random.default_rng(seed)
        for _ in range(n_fields):
            u = random_field(grid, rng, decay=1.0, norm=float(rng.uniform(0.1, 5.0)))
            s_field = helmholtz_solve(u)
            residual = s_field.coeffs * (1.0 + grid.k_square) - u.coeffs
            worst = max(worst, float(np.max(np.abs(residual))))
    gate.done(worst <= 1e-12, f"worst residual {worst:.2e}")


def test_02_drift_form_equivalence():
    gate = Gate(2, "drift-form-equivalence", 10.0)
    grid = TorusGrid(1, 128)
    rng = np.random.default_rng(7)
    worst_ratio = 0.0
    for _ in range(100):
        u = random_field(grid, rng, decay=3.0, norm=float(rng.uniform(0.2, 3.0)))
        w = w1inf_norm(u)
        gap = float(
            np.max(np.abs(inverse_transform(drift(u) - drift_divergence_form(u))))
        )
        worst_ratio = max(worst_ratio, gap / (1e-8 * (1.0 + w**3)))
    gate.done(worst_ratio <= 1.0, f"worst gap at {worst_ratio:.3f} of tolerance")


def test_03_mass_conservation():
    gate = Gate(3, "mass-conservation", 10.0)
    grid = TorusGrid(1, 128)
    cfg = SolverConfig(
        grid=grid,
        s=2.0,
        dt=1e-3,
        t_final=1.0,
        initial=SingleMode(0.05, 1),
        noise=ZeroNoise(),
        record_every=100,
    )
    u0 = realize_initial(cfg.initial, grid, cfg.s)
    record = run_trajectory(cfg, path_stream(0, 0, BROWNIAN_TAG), initial_field=u0)
    gap = abs(record.final_field.coefficient(0) - u0.coefficient(0))
    gate.done(
        record.status.kind == "survived" and gap <= 1e-9, f"|mean drift| = {gap:.2e}"
    )


def test_04_strong_em_order():
    gate = Gate(4, "strong-em-order", 120.0)
    cfg = SolverConfig(
        grid=TorusGrid(1, 64),
        s=2.0,
        dt=1e-2,
        t_final=0.5,
        initial=SingleMode(0.01, 1),
        noise=LinearNoise(1.0),
        record_every=1000,
    )
    ladder = [1e-2, 5e-3, 2.5e-3, 1.25e-3, 1e-2 / 32.0]
    study = temporal_convergence(cfg, ladder, path_stream(404, 0, BROWNIAN_TAG), n_paths=32)
    ok = 0.35 <= study.slope <= 0.65
    errors = ", ".join(f"{e:.2e}" for e in study.errors)
    gate.done(ok, f"slope {study.slope:.3f}, errors [{errors}]")


def test_05_doss_sussmann_equivalence():
    gate = Gate(5, "doss-sussmann-equivalence", 60.0)
    grid = TorusGrid(1, 64)
    u0 = realize_initial(SingleMode(0.05, 1), grid, 2.0)

    def cfg_for(dt, lam):
        return SolverConfig(
            grid=grid,
            s=2.0,
            dt=dt,
            t_final=0.2,
            initial=SingleMode(0.05, 1),
            noise=LinearNoise(lam),
            record_every=100000,
        )

    zero = transform_compare(cfg_for(1e-3, 0.0), path_stream(5, 0, BROWNIAN_TAG))
    ok_zero = zero.max_discrepancy <= 1e-12

    # The at-T discrepancy on one path is a mean-zero random quantity of size
    # ~ sqrt(dt); its level-to-level ratios are heavy-tailed, so the decay
    # rate is measured on the ensemble mean over coupled paths.
    dts = [8e-3, 4e-3, 2e-3, 1e-3, 5e-4, 2.5e-4]
    n_fine = int(round(0.2 / dts[-1]))
    mean_disc = np.zeros(len(dts))
    n_paths = 48
    for p in range(n_paths):
        fine = path_stream(55, p, BROWNIAN_TAG).normal(
            0.0, math.sqrt(dts[-1]), size=n_fine
        )
        for j, dt in enumerate(dts):
            block = int(round(dt / dts[-1]))
            coarse = fine.reshape(-1, block).sum(axis=1)
            cmp = transform_compare(cfg_for(dt, 0.5), increments=coarse, initial_field=u0)
            assert cmp.status == "complete"
            mean_disc[j] += cmp.discrepancies[-1]
    mean_disc /= n_paths
    slope = float(np.polyfit(np.log(dts), np.log(mean_disc), 1)[0])
    ok = ok_zero and 0.4 <= slope <= 1.1
    gate.done(
        ok,
        f"slope {slope:.3f} over {n_paths} coupled paths, "
        f"lambda=0 residue {zero.max_discrepancy:.1e}",
    )


def test_06_gbm_moment_identity():
    gate = Gate(6, "gbm-moment-identity", 5.0)
    res = gbm_moment_check(1.0, 4.0, 1.0, 10**5, path_stream(6, 0, BROWNIAN_TAG))
    gap = abs(res.empirical_moment - 1.0)
    gate.done(
        gap <= 4.0 * res.stderr,
        f"moment {res.empirical_moment:.5f} +/- {res.stderr:.5f} (exponent {res.exponent})",
    )


def test_07_spectral_projection_decay():
    gate = Gate(7, "spectral-projection-decay", 5.0)
    grid = TorusGrid(1, 128)
    profile = RandomSobolev(target_norm=1.0, decay=4.0, seed=77)
    study = spectral_convergence(grid, profile, 3.0, 1.0, [4, 8, 16, 32])
    gate.done(study.slope <= -1.7, f"fitted decay {study.slope:.2f} (theory -2)")


def test_08_regularization_direction():
    gate = Gate(8, "regularization-direction", 600.0)
    base = SolverConfig(
        grid=TorusGrid(1, 32),
        s=2.0,
        dt=2e-4,
        t_final=1.75,
        initial=SingleMode(0.6, 1),
        noise=NonlinearNoise(delta=1.0, c_eff=1.0),
        cutoff=CutoffSpec(radius=2.0),
        stop_threshold=2.0,
        record_every=500,
    )
    entries = threshold_scan(
        base, "nonlinear_c", [0.0, 1.0, 2.0, 4.0, 8.0], 64, master_seed=8, workers=WORKERS
    )
    by_value = {e.value: e.report for e in entries}
    quiet = by_value[0.0]
    loud = by_value[8.0]
    # the noise-free config must stop deterministically on every path
    premise = quiet.n_stopped == quiet.n_paths and quiet.p_hat == 0.0
    half_quiet = 0.5 * (quiet.ci_high - quiet.ci_low)
    half_loud = 0.5 * (loud.ci_high - loud.ci_low)
    separation = loud.p_hat - quiet.p_hat
    ok = premise and separation > half_quiet + half_loud
    gate.done(
        ok,
        "p_hat by c_eff: "
        + ", ".join(f"{e.value:g}->{e.report.p_hat:.3f}" for e in entries)
        + f"; separation {separation:.3f} vs CI sum {half_quiet + half_loud:.3f}",
    )


def test_09_small_data_linear_noise_bound():
    gate = Gate(9, "small-data-linear-noise-bound", 600.0)
    lam, big_r, rho, c_tilde = 1.0, 100.0, 4.0, 1.0
    bound = SmallDataBound(big_r=big_r, rho=rho, c_tilde=c_tilde)
    limit = lam * lam / (2.0 * big_r * rho * c_tilde)
    cfg = SolverConfig(
        grid=TorusGrid(1, 64),
        s=2.0,
        dt=5e-3,
        t_final=5.0,
        initial=RandomSobolev(target_norm=0.1 * limit),
        noise=LinearNoise(lam),
        record_every=100,
    )
    report = monte_carlo_survival(cfg, 256, master_seed=9, bound=bound, workers=WORKERS)
    assert report.theory_bound is not None
    ci_width = report.ci_high - report.ci_low
    want = report.theory_bound - ci_width
    ok = report.p_hat >= want and abs(report.theory_bound - (1.0 - 100.0**-0.375)) < 1e-12
    gate.done(
        ok,
        f"p_hat {report.p_hat:.4f} >= bound {report.theory_bound:.4f} - ci {ci_width:.4f}"
        f" (nonfinite {report.n_nonfinite}, stopped {report.n_stopped})",
    )


def test_10_cli_determinism(tmp_path):
    gate = Gate(10, "cli-determinism", 120.0)
    args = [
        "montecarlo",
        "--seed", "1234",
        "--paths", "8",
        "--set", "grid.points=64",
        "--set", "dt=0.005",
        "--set", "t_final=0.2",
        "--set", "noise.type=linear",
        "--set", "noise.lambda=1.0",
        "--set", "ic.kind=random_sobolev",
        "--set", "ic.target_norm=0.01",
    ]
    out1, out2 = str(tmp_path / "r1"), str(tmp_path / "r2")
    code1 = dispatch(args + ["--out-dir", out1])
    code2 = dispatch(args + ["--out-dir", out2])
    same = True
    for name in ("ensemble.csv", "report.json"):
        a = open(os.path.join(out1, name), "rb").read()
        b = open(os.path.join(out2, name), "rb").read()
        same = same and a == b
    gate.done(code1 == 0 and code2 == 0 and same, "CSV bodies byte-identical")
