"""Ensemble drivers: survival statistics, constant estimation, moment checks,
and convergence studies.

Survival here operationalizes global existence as "no threshold crossing or
overflow before t_final"; the reported probability therefore estimates
P{blow-up surrogate > t_final}, a finite-horizon proxy. Wilson intervals are
used throughout because these experiments live near p = 0 and p = 1.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import LinearNoise, NoiseModel, NonlinearNoise, ZeroNoise, drift
from .integrator import (
    BROWNIAN_TAG,
    INITIAL_TAG,
    InitialCondition,
    RandomSobolev,
    SolverConfig,
    TrajectoryRecord,
    initial_hs_norm,
    path_stream,
    realize_initial,
    run_trajectory,
)
from .spectral import (
    SpectralField,
    TorusGrid,
    bessel_multiplier,
    galerkin_project,
    l2_inner,
    sobolev_norm,
    w1inf_norm,
)

Z95 = 1.959963984540054

SCAN_NONLINEAR_C = "nonlinear_c"
SCAN_NONLINEAR_DELTA = "nonlinear_delta"
SCAN_LINEAR_LAMBDA = "linear_lambda"
SCAN_PARAMETERS = (SCAN_NONLINEAR_C, SCAN_NONLINEAR_DELTA, SCAN_LINEAR_LAMBDA)


class StudyAbortError(RuntimeError):
    """A convergence study hit a non-finite or stopped path and cannot proceed."""


def wilson_interval(successes: int, n: int, z: float = Z95) -> tuple[float, float]:
    """95% Wilson score interval for a binomial proportion.

    The interval always contains the point estimate; the final clamp only
    removes float round-off (at p=1 the exact upper endpoint is 1).
    """
    if n < 1:
        raise ValueError("need at least one trial")
    p = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    center = (p + z2 / (2.0 * n)) / denom
    half = z * math.sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom
    low = min(max(0.0, center - half), p)
    high = max(min(1.0, center + half), p)
    return low, high


def theory_survival_bound(big_r: float, rho: float) -> float:
    """High-probability lower bound 1 - R^(-(rho-1)/(2 rho)); in (0,1) for
    R > 1, rho > 2."""
    if big_r <= 1.0:
        raise ValueError(f"R must exceed 1, got {big_r}")
    if rho <= 2.0:
        raise ValueError(f"rho must exceed 2, got {rho}")
    return 1.0 - big_r ** (-(rho - 1.0) / (2.0 * rho))


@dataclass(frozen=True)
class SmallDataBound:
    """Parameters of the small-data condition ||u0||_{H^s} <= lam^2/(2 R rho C).

    c_tilde is never pinned by the theory beyond existence; when None it
    defaults to the measured kappa estimate times the measured grid embedding
    constant H^s -> W^{1,inf}.
    """

    big_r: float
    rho: float
    c_tilde: float | None = None

    def __post_init__(self) -> None:
        if self.big_r <= 1.0:
            raise ValueError(f"R must exceed 1, got {self.big_r}")
        if self.rho <= 2.0:
            raise ValueError(f"rho must exceed 2, got {self.rho}")
        if self.c_tilde is not None and self.c_tilde <= 0:
            raise ValueError(f"c_tilde must be positive, got {self.c_tilde}")


def small_data_limit(lam: float, bound: SmallDataBound) -> float:
    """The admissible initial H^s norm lam^2 / (2 R rho c_tilde)."""
    if bound.c_tilde is None:
        raise ValueError("resolve c_tilde before computing the data limit")
    return lam * lam / (2.0 * bound.big_r * bound.rho * bound.c_tilde)


def resolve_bound(
    bound: SmallDataBound, grid: TorusGrid, s: float, seed: int
) -> SmallDataBound:
    """Fill in the default c_tilde when the user did not supply one."""
    if bound.c_tilde is not None:
        return bound
    return replace(bound, c_tilde=default_c_tilde(grid, s, seed))


@dataclass
class McReport:
    """Ensemble survival statistics with a 95% Wilson interval."""

    n_paths: int
    n_survived: int
    n_stopped: int
    n_nonfinite: int
    p_hat: float
    ci_low: float
    ci_high: float
    theory_bound: float | None
    config: SolverConfig

    @property
    def dt_health(self) -> float:
        """Fraction of paths that did not overflow (1.0 means dt was adequate)."""
        return 1.0 - self.n_nonfinite / self.n_paths


def _run_one_path(args: tuple[SolverConfig, int, int]) -> TrajectoryRecord:
    cfg, master_seed, index = args
    bm = path_stream(master_seed, index, BROWNIAN_TAG)
    ic = path_stream(master_seed, index, INITIAL_TAG)
    u0 = realize_initial(cfg.initial, cfg.grid, cfg.s, ic)
    return run_trajectory(cfg, bm, initial_field=u0, seed=index)


def run_ensemble(
    cfg: SolverConfig, n_paths: int, master_seed: int, workers: int = 1
) -> list[TrajectoryRecord]:
    """Independent trajectories with per-path counter-based streams.

    Results are identical for any worker count: every path derives its
    Brownian and initial-condition streams from (master_seed, path_index)
    and the reduction is order-independent.
    """
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    jobs = [(cfg, master_seed, i) for i in range(n_paths)]
    if workers <= 1:
        return [_run_one_path(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        chunk = max(1, n_paths // (workers * 4))
        return list(pool.map(_run_one_path, jobs, chunksize=chunk))


def summarize_ensemble(
    cfg: SolverConfig,
    records: list[TrajectoryRecord],
    bound: SmallDataBound | None = None,
    master_seed: int | None = None,
) -> McReport:
    kinds = [r.status.kind for r in records]
    n = len(records)
    survived = kinds.count("survived")
    stopped = kinds.count("stopped")
    nonfinite = kinds.count("nonfinite")
    low, high = wilson_interval(survived, n)
    theory = None
    if (
        bound is not None
        and isinstance(cfg.noise, LinearNoise)
        and cfg.noise.lam != 0.0
    ):
        resolved = resolve_bound(bound, cfg.grid, cfg.s, master_seed or 0)
        limit = small_data_limit(cfg.noise.lam, resolved)
        if initial_hs_norm(cfg.initial, cfg.grid, cfg.s) <= limit:
            theory = theory_survival_bound(resolved.big_r, resolved.rho)
    return McReport(
        n_paths=n,
        n_survived=survived,
        n_stopped=stopped,
        n_nonfinite=nonfinite,
        p_hat=survived / n,
        ci_low=low,
        ci_high=high,
        theory_bound=theory,
        config=cfg,
    )


def monte_carlo_survival(
    cfg: SolverConfig,
    n_paths: int,
    master_seed: int,
    bound: SmallDataBound | None = None,
    workers: int = 1,
) -> McReport:
    """Survival probability over n_paths independent trajectories.

    Non-finite paths are counted (never hidden); the theoretical bound is
    attached only when the noise is linear with lam != 0, bound parameters
    are supplied, and the initial data satisfies the small-data condition.
    """
    records = run_ensemble(cfg, n_paths, master_seed, workers=workers)
    return summarize_ensemble(cfg, records, bound=bound, master_seed=master_seed)


@dataclass
class KappaEstimate:
    """Lower estimate of the drift-pairing constant by random search."""

    kappa_hat: float
    n_samples: int
    n_skipped: int
    argmax_sample: int | None
    argmax_amplitude: float | None
    master_seed: int
    s: float
    grid: TorusGrid


def drift_pairing_ratio(u: SpectralField, s: float, n: int | None = None) -> float:
    """|<Lambda^s u, Lambda^s G(u)>_{L2}| / (||u||_{W^{1,inf}} ||u||_{H^s}^2).

    Returns nan for the zero field (0/0).
    """
    g = drift(u)
    if n is not None:
        g = galerkin_project(g, n)
        u = galerkin_project(u, n)
    num = abs(l2_inner(bessel_multiplier(u, s), bessel_multiplier(g, s)))
    den = w1inf_norm(u) * sobolev_norm(u, s) ** 2
    if den == 0.0:
        return float("nan")
    return num / den


def estimate_kappa(
    grid: TorusGrid,
    s: float,
    n_samples: int,
    amplitude_ladder: list[float],
    seed: int,
) -> KappaEstimate:
    """Running maximum of the drift-pairing ratio over random Sobolev fields.

    Sample i at amplitude ladder[i % len] draws from the stream keyed by
    (seed, i), so extending n_samples with the same seed only appends
    samples and the estimate is non-decreasing. This is a lower estimate of
    the true constant; no optimization over fields is attempted.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if not amplitude_ladder or any(a <= 0 for a in amplitude_ladder):
        raise ValueError("amplitude ladder must be nonempty and positive")
    best = 0.0
    best_sample: int | None = None
    best_amp: float | None = None
    skipped = 0
    for i in range(n_samples):
        amp = float(amplitude_ladder[i % len(amplitude_ladder)])
        stream = path_stream(seed, i, INITIAL_TAG)
        u = realize_initial(RandomSobolev(target_norm=amp), grid, s, stream)
        ratio = drift_pairing_ratio(u, s)
        if math.isnan(ratio):
            skipped += 1
            continue
        if ratio > best:
            best = ratio
            best_sample = i
            best_amp = amp
    return KappaEstimate(
        kappa_hat=best,
        n_samples=n_samples,
        n_skipped=skipped,
        argmax_sample=best_sample,
        argmax_amplitude=best_amp,
        master_seed=seed,
        s=s,
        grid=grid,
    )


def measure_embedding_constant(
    grid: TorusGrid,
    s: float,
    n_samples: int,
    seed: int,
    amplitudes: tuple[float, ...] = (0.5, 1.0, 2.0),
) -> float:
    """Largest observed ||u||_{W^{1,inf}} / ||u||_{H^s} on random fields."""
    best = 0.0
    for i in range(n_samples):
        amp = amplitudes[i % len(amplitudes)]
        stream = path_stream(seed, i, INITIAL_TAG)
        u = realize_initial(RandomSobolev(target_norm=amp), grid, s, stream)
        hs = sobolev_norm(u, s)
        if hs == 0.0:
            continue
        best = max(best, w1inf_norm(u) / hs)
    return best


def default_c_tilde(
    grid: TorusGrid, s: float, seed: int, n_samples: int = 32
) -> float:
    """Default small-data constant: kappa estimate times the measured
    H^s -> W^{1,inf} embedding constant."""
    kappa = estimate_kappa(grid, s, n_samples, [0.5, 1.0, 2.0], seed).kappa_hat
    emb = measure_embedding_constant(grid, s, n_samples, seed + 1)
    return kappa * emb


@dataclass
class GbmMomentResult:
    empirical_moment: float
    stderr: float
    exponent: float
    expected_moment: float
    n_paths: int


def gbm_moment_check(
    lam: float,
    rho: float,
    t: float,
    n_paths: int,
    rng: np.random.Generator,
    exponent: float | None = None,
) -> GbmMomentResult:
    """Sample mean of Phi_t^k for Phi_t = exp(lam W_t - (lam^2/4)(1 - 1/rho) t).

    Phi is simulated exactly from its closed form (no discretization). The
    default exponent k = 1/2 - 1/(2 rho) makes Phi^k a martingale with mean
    exactly 1; for other exponents the lognormal mean
    exp(k^2 lam^2 t / 2 - k a t) is reported as expected_moment.
    """
    if rho <= 2.0:
        raise ValueError(f"rho must exceed 2, got {rho}")
    if n_paths < 1:
        raise ValueError(f"n_paths must be >= 1, got {n_paths}")
    k = 0.5 - 0.5 / rho if exponent is None else float(exponent)
    a = 0.25 * lam * lam * (1.0 - 1.0 / rho)
    w = rng.normal(0.0, math.sqrt(t), size=n_paths) if t > 0 else np.zeros(n_paths)
    values = np.exp(k * (lam * w - a * t))
    mean = float(np.mean(values))
    stderr = float(np.std(values, ddof=1) / math.sqrt(n_paths)) if n_paths > 1 else 0.0
    expected = math.exp(0.5 * k * k * lam * lam * t - k * a * t)
    return GbmMomentResult(
        empirical_moment=mean,
        stderr=stderr,
        exponent=k,
        expected_moment=expected,
        n_paths=n_paths,
    )


def _fit_loglog_slope(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


@dataclass
class TemporalConvergence:
    dts: np.ndarray
    errors: np.ndarray
    slope: float
    n_paths: int
    reference_dt: float


def temporal_convergence(
    cfg: SolverConfig,
    dt_ladder: list[float],
    rng: np.random.Generator,
    n_paths: int = 1,
) -> TemporalConvergence:
    """Strong error at t_final against the finest-dt reference path.

    The ladder must be strictly decreasing with every dt an integer multiple
    of the finest; coarse increments are block sums of one stored fine path
    (exact coupling, never re-sampled). Any stopped or non-finite path
    aborts the study.
    """
    dts = [float(d) for d in dt_ladder]
    if len(dts) < 2:
        raise ValueError("dt ladder too short: cannot fit a slope")
    if any(b >= a for a, b in zip(dts, dts[1:])):
        raise ValueError("dt ladder must be strictly decreasing")
    dt_fine = dts[-1]
    n_fine = cfg.t_final / dt_fine
    if abs(n_fine - round(n_fine)) > 1e-9:
        raise ValueError(f"t_final={cfg.t_final} is not a multiple of the finest dt")
    n_fine = int(round(n_fine))
    blocks = []
    for d in dts[:-1]:
        ratio = d / dt_fine
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError(
                f"finest dt {dt_fine} does not divide ladder entry {d}"
            )
        blocks.append(int(round(ratio)))

    sums = np.zeros(len(dts) - 1)
    for p in range(n_paths):
        u0 = realize_initial(cfg.initial, cfg.grid, cfg.s, rng)
        fine = rng.normal(0.0, math.sqrt(dt_fine), size=n_fine)
        ref = _coupled_final(cfg, dt_fine, u0, fine, p, "reference")
        for j, (d, block) in enumerate(zip(dts[:-1], blocks)):
            coarse = fine[: (n_fine // block) * block].reshape(-1, block).sum(axis=1)
            final = _coupled_final(cfg, d, u0, coarse, p, f"dt={d}")
            sums[j] += sobolev_norm(final - ref, cfg.s)
    errors = sums / n_paths
    dts_arr = np.asarray(dts[:-1])
    slope = _fit_loglog_slope(dts_arr, errors) if len(errors) >= 2 else float("nan")
    return TemporalConvergence(
        dts=dts_arr, errors=errors, slope=slope, n_paths=n_paths, reference_dt=dt_fine
    )


def _coupled_final(
    cfg: SolverConfig,
    dt: float,
    u0: SpectralField,
    increments: np.ndarray,
    path: int,
    label: str,
) -> SpectralField:
    record = run_trajectory(
        replace(cfg, dt=dt), initial_field=u0, increments=increments, seed=path
    )
    if record.status.kind != "survived":
        raise StudyAbortError(
            f"path {path} ({label}) ended {record.status.kind} at "
            f"t={record.status.t_event}; refine dt or shrink the data"
        )
    return record.final_field


@dataclass
class SpectralConvergence:
    ns: np.ndarray
    errors: np.ndarray
    slope: float
    theoretical_slope: float


def spectral_convergence(
    grid: TorusGrid,
    profile: InitialCondition,
    s: float,
    r: float,
    n_ladder: list[int],
    seed: int = 0,
) -> SpectralConvergence:
    """Projection errors ||v - P_n v||_{H^r} against the predicted n^(r-s) decay."""
    if r > s:
        raise ValueError(f"need r <= s, got r={r}, s={s}")
    if not n_ladder:
        raise ValueError("n ladder must be nonempty")
    half = grid.points_per_dim // 2
    if max(n_ladder) > half:
        raise ValueError(f"max(n_ladder)={max(n_ladder)} exceeds M/2={half}")
    v = realize_initial(profile, grid, s, path_stream(seed, 0, INITIAL_TAG))
    ns = np.asarray(sorted(int(n) for n in n_ladder))
    errors = np.asarray(
        [sobolev_norm(v - galerkin_project(v, int(n)), r) for n in ns]
    )
    if len(ns) >= 2 and np.all(errors > 0):
        slope = _fit_loglog_slope(ns.astype(float), errors)
    else:
        slope = float("nan")
    return SpectralConvergence(
        ns=ns, errors=errors, slope=slope, theoretical_slope=r - s
    )


@dataclass
class ScanEntry:
    value: float
    report: McReport


def _noise_for(parameter: str, value: float, base: NoiseModel) -> NoiseModel:
    if parameter == SCAN_NONLINEAR_C:
        if not isinstance(base, (NonlinearNoise, ZeroNoise)):
            raise ValueError("nonlinear_c scan needs a nonlinear (or zero) base noise")
        delta = base.delta if isinstance(base, NonlinearNoise) else 1.0
        return ZeroNoise() if value == 0.0 else NonlinearNoise(delta=delta, c_eff=value)
    if parameter == SCAN_NONLINEAR_DELTA:
        if not isinstance(base, NonlinearNoise):
            raise ValueError("nonlinear_delta scan needs a nonlinear base noise")
        return NonlinearNoise(delta=value, c_eff=base.c_eff)
    if parameter == SCAN_LINEAR_LAMBDA:
        return LinearNoise(lam=value)
    raise ValueError(f"unknown scan parameter {parameter!r}; pick from {SCAN_PARAMETERS}")


def threshold_scan(
    base_cfg: SolverConfig,
    parameter: str,
    values: list[float],
    n_paths: int,
    master_seed: int,
    bound: SmallDataBound | None = None,
    workers: int = 1,
) -> list[ScanEntry]:
    """One survival report per parameter value, with common random numbers.

    Every value reuses the same master seed, so per-path Brownian paths and
    initial draws coincide across the scan (variance reduction); duplicate
    values produce identical reports.
    """
    if not values:
        raise ValueError("scan values must be nonempty")
    entries = []
    for value in values:
        cfg = replace(base_cfg, noise=_noise_for(parameter, float(value), base_cfg.noise))
        report = monte_carlo_survival(
            cfg, n_paths, master_seed, bound=bound, workers=workers
        )
        entries.append(ScanEntry(value=float(value), report=report))
    return entries


def log_energy_drift(record: TrajectoryRecord) -> float:
    """Least-squares slope of ln(e + ||u||_{H^s}^2) along one path."""
    if len(record.times) < 2:
        raise ValueError("need at least 2 samples to fit a slope")
    return float(np.polyfit(record.times, record.log_energy, 1)[0])


@dataclass
class LogEnergyDrift:
    mean_slope: float
    stderr: float
    slopes: np.ndarray


def ensemble_log_energy_drift(records: list[TrajectoryRecord]) -> LogEnergyDrift:
    """Ensemble mean and standard error of per-path log-energy slopes."""
    slopes = np.asarray([log_energy_drift(r) for r in records])
    stderr = (
        float(np.std(slopes, ddof=1) / math.sqrt(len(slopes)))
        if len(slopes) > 1
        else 0.0
    )
    return LogEnergyDrift(
        mean_slope=float(np.mean(slopes)), stderr=stderr, slopes=slopes
    )
