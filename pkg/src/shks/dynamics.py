"""The hyperbolic Keller-Segel vector field and its noise coefficients.

The evolution integrated elsewhere is

    du = -G(u) dt + sigma(t, u) dW(t),      S(u) = (1 - Laplacian)^{-1} u,

with the drift in expanded form

    G(u) = (1 - 2u) grad S(u) . grad u + (u - u^2) (S(u) - u),

where S - u substitutes for Laplacian S (identical by the Helmholtz relation).
Nonlinear products are formed pointwise in real space and dealiased by the
two-thirds rule; the drift contains cubic terms for which the rule is mildly
lossy, which the cross-form tests quantify.

Noise models: Zero; Linear (lambda * u against one scalar Brownian motion);
Nonlinear (c_eff * (1 + ||u||_{W^{1,inf}})^delta * u). The nonlinear family
collapses a sequence of independent drivers with weights c_i into a single
scalar driver with c_eff = sqrt(sum c_i^2), which is exact in law because
every driver multiplies the same field shape.

Contract for any future noise model (documented, not verified at runtime):
sigma must satisfy a growth bound ||sigma(t,u)|| <= beta(||u||_{W^{1,inf}})
(1 + ||u||_{H^s}) and a local Lipschitz bound ||sigma(t,u) - sigma(t,v)|| <=
gamma(||u||_{W^{1,inf}} + ||v||_{W^{1,inf}}) ||u - v||_{H^s} with beta, gamma
increasing and locally bounded. Witnesses for the shipped models: Linear has
beta = gamma = |lambda| (constants); Nonlinear has beta(w) = c_eff (1+w)^delta
and gamma(w) = c_eff (1+w)^delta (1 + delta) up to the embedding constant,
since u -> (1 + ||u||_{W^{1,inf}})^delta u is locally Lipschitz on H^s.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .spectral import (
    SpectralError,
    SpectralField,
    dealias,
    forward_transform,
    galerkin_project,
    gradient,
    inverse_transform,
    w1inf_norm,
    zero_field,
)


@dataclass(frozen=True)
class ZeroNoise:
    """sigma = 0: the deterministic equation."""


@dataclass(frozen=True)
class LinearNoise:
    """sigma(t, u) = lam * u; lam may be negative (and zero for comparisons)."""

    lam: float


@dataclass(frozen=True)
class NonlinearNoise:
    """sigma(t, u) = c_eff * (1 + ||u||_{W^{1,inf}})^delta * u."""

    delta: float
    c_eff: float

    def __post_init__(self) -> None:
        if self.delta < 0:
            raise ValueError(f"delta must be nonnegative, got {self.delta}")
        if self.c_eff <= 0:
            raise ValueError(f"c_eff must be positive, got {self.c_eff}")


NoiseModel = Union[ZeroNoise, LinearNoise, NonlinearNoise]


@dataclass(frozen=True)
class CutoffSpec:
    """Smooth truncation radius for the drift; radius=None means no cutoff."""

    radius: float | None = None

    def __post_init__(self) -> None:
        if self.radius is not None and self.radius <= 0:
            raise ValueError(f"cutoff radius must be positive, got {self.radius}")

    @classmethod
    def unbounded(cls) -> "CutoffSpec":
        return cls(radius=None)

    @property
    def bounded(self) -> bool:
        return self.radius is not None


def cutoff_theta(x: float, spec: CutoffSpec) -> float:
    """Cutoff profile: exactly 1 on [0, R], exactly 0 on [2R, inf).

    On (R, 2R) a quintic smoothstep decreases monotonically, with value 1/2
    at 3R/2. Only pointwise values enter the numerics, so C^2 smoothness
    suffices. Scale invariance holds: theta_R(x) = theta_1(x/R).
    """
    if x < 0:
        raise ValueError(f"cutoff argument must be nonnegative, got {x}")
    if not spec.bounded:
        return 1.0
    r = spec.radius
    if x <= r:
        return 1.0
    if x >= 2.0 * r:
        return 0.0
    t = (x - r) / r
    return 1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)


def helmholtz_solve(u: SpectralField) -> SpectralField:
    """S = (1 - Laplacian)^{-1} u, i.e. Shat(k) = uhat(k) / (1 + |k|^2)."""
    weight = 1.0 + u.grid.k_square
    return SpectralField(u.grid, u.coeffs / weight)


def _zero_mean(coeffs: np.ndarray) -> np.ndarray:
    # The continuum drift is a divergence, so its mean vanishes identically;
    # the grid mean is pure aliasing residue and is removed.
    out = coeffs.copy()
    out[(0,) * coeffs.ndim] = 0.0
    return out


def _dot_of_gradients(a: SpectralField, b: SpectralField) -> np.ndarray:
    """Real-space grad a . grad b."""
    parts_a = gradient(a)
    parts_b = gradient(b)
    dot = inverse_transform(parts_a[0]) * inverse_transform(parts_b[0])
    for ga, gb in zip(parts_a[1:], parts_b[1:]):
        dot += inverse_transform(ga) * inverse_transform(gb)
    return dot


def drift(u: SpectralField) -> SpectralField:
    """Expanded-form drift G(u) = (1-2u) grad S . grad u + (u-u^2)(S-u).

    Real-space assembly in one pass; the result is dealiased (the filter is
    linear, so filtering the sum equals filtering each product) and its mean
    mode is zeroed per the divergence structure.
    """
    s = helmholtz_solve(u)
    delta_s = s - u
    u_real = inverse_transform(u)
    ds_real = inverse_transform(delta_s)
    dot = _dot_of_gradients(s, u)
    g_real = (1.0 - 2.0 * u_real) * dot + (u_real - u_real * u_real) * ds_real
    g = dealias(forward_transform(u.grid, g_real))
    return SpectralField(u.grid, _zero_mean(g.coeffs))


def drift_divergence_form(u: SpectralField) -> SpectralField:
    """Conservative-form drift div(u(1-u) grad S(u)).

    Agrees with `drift` up to aliasing of the cubic flux; the mean mode is
    zero identically because every term carries an outer i*k_j.
    """
    grid = u.grid
    s = helmholtz_solve(u)
    u_real = inverse_transform(u)
    mobility = u_real * (1.0 - u_real)
    out = np.zeros(grid.shape, dtype=np.complex128)
    for axis, s_part in enumerate(gradient(s)):
        flux = dealias(forward_transform(grid, mobility * inverse_transform(s_part)))
        out += flux.coeffs * (1j * grid.axis_derivative_wavenumbers(axis))
    return SpectralField(grid, out)


def truncated_drift(u: SpectralField, spec: CutoffSpec, n: int) -> SpectralField:
    """theta_R(||u||_{W^{1,inf}}) * P_n(G(u)): the band-limited, cut-off drift.

    Inactive cutoff (theta = 1) reduces bitwise to `galerkin_project(drift(u), n)`.
    """
    theta = cutoff_theta(w1inf_norm(u), spec)
    if theta == 0.0:
        return zero_field(u.grid)
    g = galerkin_project(drift(u), n)
    return g if theta == 1.0 else theta * g


def diffusion_coefficient(u: SpectralField, model: NoiseModel) -> SpectralField:
    """The field multiplying a single scalar Brownian increment."""
    return _diffusion_given_norm(u, model, None)


def _diffusion_given_norm(
    u: SpectralField, model: NoiseModel, w1inf: float | None
) -> SpectralField:
    # w1inf may be precomputed by the stepping loop to avoid a second pass.
    if isinstance(model, ZeroNoise):
        return zero_field(u.grid)
    if isinstance(model, LinearNoise):
        return model.lam * u
    if isinstance(model, NonlinearNoise):
        w = w1inf_norm(u) if w1inf is None else w1inf
        return (model.c_eff * (1.0 + w) ** model.delta) * u
    raise SpectralError(f"unknown noise model {model!r}")
