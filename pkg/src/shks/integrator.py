"""Euler-Maruyama time stepping, stopping detection, and the transformed
random-PDE integrator for linear noise.

A trajectory advances u_{k+1} = u_k - dt * G_trunc(u_k) + dW_k * P_n sigma(u_k)
until the horizon, a W^{1,inf} threshold crossing ("stopped"), or loss of
finiteness. The threshold event is a surrogate for blow-up: a spectral grid
cannot represent a genuine singularity, so the reported stop time is a lower
bound for the true hitting time (first grid-time crossing, no interpolation).

For linear noise the substitution v = mu * u with mu(t) = exp(lam^2 t / 2 -
lam W(t)) converts the stochastic equation into a pathwise PDE with random
coefficients; `transform_compare` integrates both formulations on one
Brownian path and reports their divergence.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dataclass_field
from typing import Sequence, Union

import numpy as np

from .dynamics import (
    CutoffSpec,
    LinearNoise,
    NoiseModel,
    ZeroNoise,
    _diffusion_given_norm,
    cutoff_theta,
    dealias,
    drift,
    helmholtz_solve,
)
from .spectral import (
    SpectralError,
    SpectralField,
    TorusGrid,
    _reflect,
    constant_field,
    forward_transform,
    galerkin_project,
    gradient,
    inverse_transform,
    single_mode_field,
    sobolev_norm,
    w1inf_norm,
)

BROWNIAN_TAG = 0
INITIAL_TAG = 1


class NonFiniteStepError(ArithmeticError):
    """A step produced a non-finite field; carries the failure time."""

    def __init__(self, t_fail: float, context: str = "step"):
        super().__init__(f"non-finite field after {context} at t={t_fail}")
        self.t_fail = t_fail


@dataclass(frozen=True)
class Constant:
    value: float


@dataclass(frozen=True)
class SingleMode:
    amplitude: float
    wavevector: Union[int, tuple]


@dataclass(frozen=True)
class RandomSobolev:
    """Random field with coefficients xi_k (1+|k|^2)^(-decay/2), rescaled to
    target_norm in H^s. decay=None defaults to s + d/2 + 0.51 so the field
    lies in H^s almost surely."""

    target_norm: float
    decay: float | None = None
    seed: int | None = None


InitialCondition = Union[Constant, SingleMode, RandomSobolev]


def path_stream(master_seed: int, path_index: int, tag: int) -> np.random.Generator:
    """Independent per-path stream from a counter-based generator.

    Streams are keyed by (master_seed, path_index, tag); the tag separates
    Brownian draws from initial-condition draws so changing one never
    perturbs the other.
    """
    seq = np.random.SeedSequence(master_seed, spawn_key=(path_index, tag))
    return np.random.Generator(np.random.Philox(seq))


def realize_initial(
    ic: InitialCondition,
    grid: TorusGrid,
    s: float,
    rng: np.random.Generator | None = None,
) -> SpectralField:
    """Construct the initial field on `grid` for Sobolev index `s`."""
    if isinstance(ic, Constant):
        return constant_field(grid, ic.value)
    if isinstance(ic, SingleMode):
        return single_mode_field(grid, ic.amplitude, ic.wavevector)
    if isinstance(ic, RandomSobolev):
        if ic.seed is not None:
            stream = np.random.Generator(np.random.Philox(np.random.SeedSequence(ic.seed)))
        elif rng is not None:
            stream = rng
        else:
            raise ValueError("RandomSobolev without a seed needs an explicit stream")
        decay = ic.decay if ic.decay is not None else s + grid.dimension / 2.0 + 0.51
        xi = stream.standard_normal(grid.shape) + 1j * stream.standard_normal(grid.shape)
        sym = 0.5 * (xi + np.conj(_reflect(xi)))
        coeffs = sym * np.power(1.0 + grid.k_square, -decay / 2.0)
        coeffs[grid.nyquist_mask] = 0.0
        out = SpectralField(grid, coeffs)
        if ic.target_norm == 0.0:
            return 0.0 * out
        current = sobolev_norm(out, s)
        return (ic.target_norm / current) * out
    raise TypeError(f"unknown initial condition {ic!r}")


def initial_hs_norm(ic: InitialCondition, grid: TorusGrid, s: float) -> float:
    """H^s norm of the realized initial field; deterministic for every kind
    (RandomSobolev is rescaled to its target, so the draw does not matter)."""
    if isinstance(ic, RandomSobolev):
        return float(ic.target_norm)
    return sobolev_norm(realize_initial(ic, grid, s), s)


@dataclass(frozen=True)
class SolverConfig:
    """Full parameterization of one simulation run."""

    grid: TorusGrid
    s: float
    dt: float
    t_final: float
    initial: InitialCondition
    noise: NoiseModel = ZeroNoise()
    cutoff: CutoffSpec = CutoffSpec.unbounded()
    galerkin_n: int | None = None
    stop_threshold: float = 1e3
    record_every: int = 10

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t_final <= 0:
            raise ValueError(f"t_final must be positive, got {self.t_final}")
        if self.stop_threshold <= 0:
            raise ValueError(f"stop_threshold must be positive, got {self.stop_threshold}")
        if self.record_every < 1:
            raise ValueError(f"record_every must be >= 1, got {self.record_every}")
        half = self.grid.points_per_dim // 2
        if self.galerkin_n is not None and not (0 <= self.galerkin_n <= half):
            raise ValueError(f"galerkin_n must lie in [0, {half}], got {self.galerkin_n}")
        if self.s <= self.grid.dimension / 2.0 + 1.0:
            warnings.warn(
                f"s={self.s} is at or below d/2+1={self.grid.dimension / 2 + 1}; "
                "the well-posedness hypothesis does not cover this regime",
                stacklevel=2,
            )

    @property
    def galerkin_band(self) -> int:
        if self.galerkin_n is None:
            return self.grid.points_per_dim // 2
        return self.galerkin_n

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.t_final / self.dt - 1e-9))


@dataclass(frozen=True)
class TrajectoryStatus:
    kind: str  # "survived" | "stopped" | "nonfinite"
    t_event: float | None = None

    @classmethod
    def survived(cls) -> "TrajectoryStatus":
        return cls("survived")

    @classmethod
    def stopped(cls, t_stop: float) -> "TrajectoryStatus":
        return cls("stopped", t_stop)

    @classmethod
    def nonfinite(cls, t_fail: float) -> "TrajectoryStatus":
        return cls("nonfinite", t_fail)


@dataclass
class TrajectoryRecord:
    """Norm time series plus terminal status for one path.

    log_energy is ln(e + ||u||_{H^s}^2). On a nonfinite ending the recorded
    samples stay finite (the broken state is never sampled) and final_field
    is the last finite state.
    """

    times: np.ndarray
    hs_norms: np.ndarray
    w1inf_norms: np.ndarray
    log_energy: np.ndarray
    status: TrajectoryStatus
    seed: int | None
    final_field: SpectralField | None = dataclass_field(repr=False, default=None)


def brownian_increment(rng: np.random.Generator, dt: float) -> float:
    """One Normal(0, dt) draw."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    return float(rng.normal(0.0, math.sqrt(dt)))


def _em_step_given_norm(
    u: SpectralField, w: float, t: float, dW: float, cfg: SolverConfig
) -> SpectralField:
    theta = cutoff_theta(w, cfg.cutoff)
    n = cfg.galerkin_band
    try:
        if theta > 0.0:
            g = galerkin_project(drift(u), n)
            if theta != 1.0:
                g = theta * g
            new = u - cfg.dt * g
        else:
            new = u
        if not isinstance(cfg.noise, ZeroNoise):
            diff = galerkin_project(_diffusion_given_norm(u, cfg.noise, w), n)
            new = new + dW * diff
    except SpectralError as exc:
        raise NonFiniteStepError(t + cfg.dt, "drift/diffusion evaluation") from exc
    if not new.is_finite():
        raise NonFiniteStepError(t + cfg.dt)
    return new


def em_step(u: SpectralField, t: float, dW: float, cfg: SolverConfig) -> SpectralField:
    """One Euler-Maruyama step of the truncated, band-limited system.

    u' = u - dt * theta_R(||u||_{W^{1,inf}}) P_n G(u) + dW * P_n sigma(u).
    The time argument is carried for the abstract sigma(t, u) interface; the
    implemented models are autonomous. Raises NonFiniteStepError, stamped
    with the post-step time, if the result leaves floating-point range.
    """
    return _em_step_given_norm(u, w1inf_norm(u), t, dW, cfg)


def run_trajectory(
    cfg: SolverConfig,
    rng: np.random.Generator | None = None,
    *,
    initial_field: SpectralField | None = None,
    increments: Sequence[float] | None = None,
    seed: int | None = None,
) -> TrajectoryRecord:
    """Integrate one path to t_final, a stop-threshold crossing, or overflow.

    Norms are recorded at t=0, every record_every-th step, and at the
    terminal event. Brownian increments come from `rng` unless an explicit
    `increments` array is supplied (used by coupled refinement studies).
    """
    u = initial_field
    if u is None:
        u = realize_initial(cfg.initial, cfg.grid, cfg.s, rng)
    w = w1inf_norm(u)
    if w >= cfg.stop_threshold:
        raise ValueError(
            f"stop_threshold {cfg.stop_threshold} must exceed the initial "
            f"W^(1,inf) norm {w}"
        )
    n_steps = cfg.n_steps
    if increments is None and rng is None:
        raise ValueError("need a random stream or an explicit increment array")
    if increments is not None and len(increments) < n_steps:
        raise ValueError(f"need {n_steps} increments, got {len(increments)}")

    times = [0.0]
    hs = [sobolev_norm(u, cfg.s)]
    w1 = [w]
    status = TrajectoryStatus.survived()

    def sample(t: float, hs_val: float, w_val: float) -> None:
        times.append(t)
        hs.append(hs_val)
        w1.append(w_val)

    for k in range(1, n_steps + 1):
        t_prev = (k - 1) * cfg.dt
        if increments is not None:
            dw = float(increments[k - 1])
        else:
            dw = brownian_increment(rng, cfg.dt)
        try:
            u_new = _em_step_given_norm(u, w, t_prev, dw, cfg)
        except NonFiniteStepError as exc:
            status = TrajectoryStatus.nonfinite(exc.t_fail)
            break
        t = k * cfg.dt
        u = u_new
        w = w1inf_norm(u)
        if w >= cfg.stop_threshold:
            sample(t, sobolev_norm(u, cfg.s), w)
            status = TrajectoryStatus.stopped(t)
            break
        if k % cfg.record_every == 0 or k == n_steps:
            sample(t, sobolev_norm(u, cfg.s), w)

    hs_arr = np.asarray(hs)
    return TrajectoryRecord(
        times=np.asarray(times),
        hs_norms=hs_arr,
        w1inf_norms=np.asarray(w1),
        log_energy=np.log(np.e + hs_arr**2),
        status=status,
        seed=seed,
        final_field=u,
    )


def doss_sussmann_mu(t: float, w_t: float, lam: float) -> float:
    """The transforming process mu(t) = exp(lam^2 t / 2 - lam W(t))."""
    return math.exp(0.5 * lam * lam * t - lam * w_t)


def random_pde_step(
    v: SpectralField, mu: float, dt: float, cfg: SolverConfig
) -> SpectralField:
    """Explicit Euler step of the transformed pathwise equation

        dv/dt = -( mu^-1 grad S(v).grad v - 2 mu^-2 v grad S(v).grad v
                   + mu^-1 v (S(v)-v) - mu^-2 v^2 (S(v)-v) ),

    with products dealiased as in the drift assembly. At mu=1 the right-hand
    side reduces to G(v) and the step matches the deterministic Euler step
    bitwise.
    """
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    a = 1.0 / mu
    b = a * a
    grid = v.grid
    try:
        s_field = helmholtz_solve(v)
        ds_real = inverse_transform(s_field - v)
        v_real = inverse_transform(v)
        dot = None
        for s_part, v_part in zip(gradient(s_field), gradient(v)):
            term = inverse_transform(s_part) * inverse_transform(v_part)
            dot = term if dot is None else dot + term
        rhs_real = (a - (2.0 * b) * v_real) * dot + (
            a * v_real - b * (v_real * v_real)
        ) * ds_real
        rhs = dealias(forward_transform(grid, rhs_real))
        coeffs = rhs.coeffs.copy()
        coeffs[(0,) * grid.dimension] = 0.0
        rhs = galerkin_project(SpectralField(grid, coeffs), cfg.galerkin_band)
        new = v - dt * rhs
    except SpectralError as exc:
        raise NonFiniteStepError(float("nan"), "random-PDE step") from exc
    if not new.is_finite():
        raise NonFiniteStepError(float("nan"), "random-PDE step")
    return new


@dataclass
class TransformComparison:
    """Discrepancy series between the direct path and the transformed path."""

    times: np.ndarray
    discrepancies: np.ndarray
    max_discrepancy: float
    status: str  # "complete" | "direct-nonfinite" | "transformed-nonfinite"
    dt: float
    lam: float


def transform_compare(
    cfg: SolverConfig,
    rng: np.random.Generator | None = None,
    *,
    increments: Sequence[float] | None = None,
    initial_field: SpectralField | None = None,
) -> TransformComparison:
    """Run the direct Euler-Maruyama path and the transformed random-PDE path
    on one Brownian path and record ||u_direct - mu^-1 v||_{H^s} over time.

    Both paths see the same increments; W(t) is their running sum. Either
    path going non-finite aborts with a partial record. The comparison is
    meaningful with the cutoff unbounded (the transformed equation carries
    no truncation).
    """
    if not isinstance(cfg.noise, LinearNoise):
        raise ValueError("transform_compare requires a Linear noise model")
    lam = cfg.noise.lam
    u = initial_field
    if u is None:
        u = realize_initial(cfg.initial, cfg.grid, cfg.s, rng)
    v = u
    n_steps = cfg.n_steps
    if increments is None:
        if rng is None:
            raise ValueError("need a random stream or an explicit increment array")
        increments = rng.normal(0.0, math.sqrt(cfg.dt), size=n_steps)

    times = [0.0]
    disc = [0.0]
    status = "complete"
    w_acc = 0.0
    for k in range(1, n_steps + 1):
        t_prev = (k - 1) * cfg.dt
        dw = float(increments[k - 1])
        mu_prev = doss_sussmann_mu(t_prev, w_acc, lam)
        try:
            u = _em_step_given_norm(u, w1inf_norm(u), t_prev, dw, cfg)
        except NonFiniteStepError:
            status = "direct-nonfinite"
            break
        try:
            v = random_pde_step(v, mu_prev, cfg.dt, cfg)
        except NonFiniteStepError:
            status = "transformed-nonfinite"
            break
        w_acc += dw
        if k % cfg.record_every == 0 or k == n_steps:
            t = k * cfg.dt
            mu_t = doss_sussmann_mu(t, w_acc, lam)
            times.append(t)
            disc.append(sobolev_norm(u - (1.0 / mu_t) * v, cfg.s))
    return TransformComparison(
        times=np.asarray(times),
        discrepancies=np.asarray(disc),
        max_discrepancy=float(np.max(disc)),
        status=status,
        dt=cfg.dt,
        lam=lam,
    )
