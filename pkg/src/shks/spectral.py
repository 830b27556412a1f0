"""Real scalar fields on the periodic torus, stored by Fourier coefficients.

Conventions
-----------
The torus is [0, 2*pi)^d sampled on a uniform grid with M points per axis
(M even). A field is represented by complex coefficients fhat(k) indexed by
the integer wavenumber lattice, with the normalization

    f(x) = sum_k fhat(k) * exp(i k.x)

so that fhat carries no volume factor. Under this convention the Sobolev
norms read

    ||f||_{H^s}^2 = sum_k (1 + |k|^2)^s |fhat(k)|^2

and Parseval takes the form ||f||_{H^0}^2 * (2*pi)^d = integral of f^2.

Real data corresponds to Hermitian symmetry fhat(-k) = conj(fhat(k)). Modes
with a component at the unmatched Nyquist frequency (|k_j| = M/2, which is
its own conjugate partner modulo M) are kept in the representation, so the
forward/inverse transforms round-trip exactly, but they are treated as zero
by differentiation: the asymmetric i*k multiplier at the Nyquist would break
skew-symmetry, so the derivative multiplier vanishes there.

All operations are pure: fields are immutable once constructed and safe to
share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np


class SpectralError(ValueError):
    """Raised when field data violates the representation contract."""


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on [0, 2*pi)^d with an even number of points per axis."""

    dimension: int
    points_per_dim: int

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise SpectralError(f"dimension must be >= 1, got {self.dimension}")
        m = self.points_per_dim
        if m < 4 or m % 2 != 0:
            raise SpectralError(f"points_per_dim must be even and >= 4, got {m}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_dim,) * self.dimension

    @property
    def size(self) -> int:
        return self.points_per_dim**self.dimension

    @property
    def spacing(self) -> float:
        return 2.0 * np.pi / self.points_per_dim

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers along one axis, in FFT storage order."""
        m = self.points_per_dim
        return np.rint(np.fft.fftfreq(m) * m).astype(np.int64)

    def axis_wavenumbers(self, axis: int) -> np.ndarray:
        """Wavenumbers along `axis`, shaped for broadcasting over coeffs."""
        shape = [1] * self.dimension
        shape[axis] = self.points_per_dim
        return self.wavenumbers.reshape(shape)

    @cached_property
    def derivative_wavenumbers(self) -> np.ndarray:
        """Wavenumbers used by differentiation: the Nyquist entry is zero."""
        k = self.wavenumbers.copy()
        k[np.abs(k) == self.points_per_dim // 2] = 0
        k.flags.writeable = False
        return k

    def axis_derivative_wavenumbers(self, axis: int) -> np.ndarray:
        shape = [1] * self.dimension
        shape[axis] = self.points_per_dim
        return self.derivative_wavenumbers.reshape(shape)

    @cached_property
    def k_square(self) -> np.ndarray:
        """|k|^2 on the full lattice."""
        out = np.zeros(self.shape)
        for axis in range(self.dimension):
            out = out + self.axis_wavenumbers(axis).astype(float) ** 2
        return out

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True where any component equals the unmatched Nyquist frequency."""
        half = self.points_per_dim // 2
        mask = np.zeros(self.shape, dtype=bool)
        for axis in range(self.dimension):
            mask |= np.abs(self.axis_wavenumbers(axis)) == half
        return mask

    @cached_property
    def points(self) -> tuple[np.ndarray, ...]:
        """Grid coordinates per axis (1-d arrays)."""
        x = np.arange(self.points_per_dim) * self.spacing
        return (x,) * self.dimension


@lru_cache(maxsize=64)
def _band_mask(grid: TorusGrid, n: int) -> np.ndarray:
    """Boolean mask keeping modes with |k|_inf <= n."""
    mask = np.ones(grid.shape, dtype=bool)
    for axis in range(grid.dimension):
        mask &= np.abs(grid.axis_wavenumbers(axis)) <= n
    mask.flags.writeable = False
    return mask


@lru_cache(maxsize=128)
def _bessel_amplitude(grid: TorusGrid, exponent: float) -> np.ndarray:
    """(1 + |k|^2)^(exponent/2) on the lattice."""
    amp = np.power(1.0 + grid.k_square, exponent / 2.0)
    amp.flags.writeable = False
    return amp


@dataclass(frozen=True)
class SpectralField:
    """A real scalar field on a :class:`TorusGrid`, held as coefficients.

    Instances are value objects; the coefficient array is frozen. Use the
    module-level constructors (`forward_transform`, `field_from_coeffs`,
    `constant_field`, `single_mode_field`) which enforce the invariants.
    """

    grid: TorusGrid
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        if self.coeffs.shape != self.grid.shape:
            raise SpectralError(
                f"coefficient shape {self.coeffs.shape} does not match grid {self.grid.shape}"
            )
        if self.coeffs.dtype != np.complex128:
            object.__setattr__(self, "coeffs", self.coeffs.astype(np.complex128))
        self.coeffs.flags.writeable = False

    # Linear-space arithmetic preserves Hermitian symmetry; no re-validation.
    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check_same_grid(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check_same_grid(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)

    def __mul__(self, scalar: float) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def _check_same_grid(self, other: "SpectralField") -> None:
        if other.grid != self.grid:
            raise SpectralError("fields live on different grids")

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.coeffs)))

    def coefficient(self, k: Sequence[int] | int) -> complex:
        """Coefficient at integer wavenumber k (scalar allowed in 1-d)."""
        if np.isscalar(k):
            k = (int(k),)
        idx = tuple(int(kj) % self.grid.points_per_dim for kj in k)
        return complex(self.coeffs[idx])


def _reflect(coeffs: np.ndarray) -> np.ndarray:
    """Return the array r with r[k] = coeffs[-k] (indices mod M per axis)."""
    out = coeffs
    for axis in range(coeffs.ndim):
        out = np.roll(np.flip(out, axis=axis), 1, axis=axis)
    return out


def hermitian_defect(coeffs: np.ndarray) -> tuple[float, tuple[int, ...]]:
    """Largest |fhat(k) - conj(fhat(-k))| and the wavenumber attaining it."""
    defect = np.abs(coeffs - np.conj(_reflect(coeffs)))
    flat = int(np.argmax(defect))
    idx = np.unravel_index(flat, coeffs.shape)
    m = coeffs.shape[0]
    k = tuple(int(j) if j <= m // 2 else int(j) - m for j in idx)
    return float(defect[idx]), k


def field_from_coeffs(
    grid: TorusGrid, coeffs: np.ndarray, *, tol: float = 1e-12
) -> SpectralField:
    """Build a field from raw coefficients, enforcing the invariants.

    Hermitian symmetry is required up to `tol` relative to the largest
    coefficient; the stored coefficients are exactly symmetrized (which in
    particular forces self-conjugate modes, such as k=0 and Nyquist corners,
    to be real).
    """
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    if coeffs.shape != grid.shape:
        raise SpectralError(
            f"coefficient shape {coeffs.shape} does not match grid {grid.shape}"
        )
    scale = float(np.max(np.abs(coeffs))) if coeffs.size else 0.0
    defect, worst = hermitian_defect(coeffs)
    if defect > tol * max(1.0, scale):
        raise SpectralError(
            f"coefficients are not Hermitian-symmetric: defect {defect:.3e} "
            f"at wavenumber pair k={worst}, -k"
        )
    sym = 0.5 * (coeffs + np.conj(_reflect(coeffs)))
    return SpectralField(grid, sym)


def zero_field(grid: TorusGrid) -> SpectralField:
    return SpectralField(grid, np.zeros(grid.shape, dtype=np.complex128))


def constant_field(grid: TorusGrid, value: float) -> SpectralField:
    coeffs = np.zeros(grid.shape, dtype=np.complex128)
    coeffs[(0,) * grid.dimension] = value
    return SpectralField(grid, coeffs)


def single_mode_field(
    grid: TorusGrid, amplitude: float, wavevector: Sequence[int] | int
) -> SpectralField:
    """The field amplitude * cos(k.x): coefficients a/2 at +-k."""
    if np.isscalar(wavevector):
        wavevector = (int(wavevector),)
    k = tuple(int(kj) for kj in wavevector)
    if len(k) != grid.dimension:
        raise SpectralError(f"wavevector {k} has wrong dimension for grid")
    half = grid.points_per_dim // 2
    if any(abs(kj) >= half for kj in k):
        raise SpectralError(f"wavevector {k} not representable below Nyquist ({half})")
    coeffs = np.zeros(grid.shape, dtype=np.complex128)
    m = grid.points_per_dim
    plus = tuple(kj % m for kj in k)
    minus = tuple((-kj) % m for kj in k)
    coeffs[plus] += 0.5 * amplitude
    coeffs[minus] += 0.5 * amplitude
    return SpectralField(grid, coeffs)


def forward_transform(grid: TorusGrid, values: np.ndarray) -> SpectralField:
    """Fourier coefficients of real samples on the grid.

    Rejects non-finite input, naming the first offending grid index. The
    inverse relation `inverse_transform(forward_transform(v)) == v` holds to
    round-off (see `inverse_transform`).
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape != grid.shape:
        raise SpectralError(
            f"sample shape {values.shape} does not match grid {grid.shape}"
        )
    finite = np.isfinite(values)
    if not finite.all():
        idx = np.unravel_index(int(np.argmin(finite)), values.shape)
        raise SpectralError(
            f"non-finite sample {values[idx]!r} at grid index {tuple(int(i) for i in idx)}"
        )
    return SpectralField(grid, np.fft.fftn(values) / grid.size)


def inverse_transform(field: SpectralField, *, imag_tol: float = 1e-10) -> np.ndarray:
    """Real samples on the grid.

    The imaginary residue of the inverse FFT is discarded when below
    `imag_tol` (relative to the field magnitude); a larger residue means the
    coefficients were not Hermitian and raises, naming the worst pair.
    """
    values = np.fft.ifftn(field.coeffs) * field.grid.size
    real = np.ascontiguousarray(values.real)
    worst_imag = float(np.max(np.abs(values.imag))) if values.size else 0.0
    scale = max(1.0, float(np.max(np.abs(real))))
    if worst_imag > imag_tol * scale:
        defect, k = hermitian_defect(field.coeffs)
        raise SpectralError(
            f"imaginary residue {worst_imag:.3e} exceeds tolerance; Hermitian "
            f"symmetry violated (defect {defect:.3e} at wavenumber pair k={k}, -k)"
        )
    return real


def bessel_multiplier(field: SpectralField, exponent: float) -> SpectralField:
    """Apply the Fourier multiplier (1 + |k|^2)^(exponent/2)."""
    amp = _bessel_amplitude(field.grid, float(exponent))
    return SpectralField(field.grid, field.coeffs * amp)


def gradient(field: SpectralField) -> tuple[SpectralField, ...]:
    """Spectral partial derivatives, one field per axis (multiplier i*k_j).

    The Nyquist mode is annihilated along its own axis (see module notes).
    """
    grid = field.grid
    return tuple(
        SpectralField(
            grid, field.coeffs * (1j * grid.axis_derivative_wavenumbers(axis))
        )
        for axis in range(grid.dimension)
    )


def sobolev_norm(field: SpectralField, s: float) -> float:
    """H^s norm: the square root of sum_k (1+|k|^2)^s |fhat(k)|^2.

    Implemented as the plain coefficient l2 norm of `bessel_multiplier(field, s)`
    so the two agree bitwise.
    """
    if s == 0.0:
        c = field.coeffs
    else:
        c = bessel_multiplier(field, s).coeffs
    return float(np.sqrt(np.sum(c.real**2 + c.imag**2)))


def l2_inner(f: SpectralField, g: SpectralField) -> float:
    """Coefficient pairing sum_k fhat(k) conj(ghat(k)) (real for real fields).

    This is the L2 inner product in the normalization where
    ||f||_{L2}^2 = sobolev_norm(f, 0)^2.
    """
    f._check_same_grid(g)
    return float(np.sum(f.coeffs * np.conj(g.coeffs)).real)


def w1inf_norm(field: SpectralField) -> float:
    """Grid-point W^{1,inf} norm: max|u| + max_j max|du/dx_j|.

    Both maxima are taken over grid samples; the sum convention dominates the
    max convention, so threshold decisions based on it are conservative.
    """
    sup = float(np.max(np.abs(inverse_transform(field))))
    grad_sup = 0.0
    for part in gradient(field):
        grad_sup = max(grad_sup, float(np.max(np.abs(inverse_transform(part)))))
    return sup + grad_sup


def galerkin_project(field: SpectralField, n: int) -> SpectralField:
    """Zero all modes with |k|_inf > n (projection onto the n-band).

    Idempotent, self-adjoint for the L2 pairing, and norm non-increasing in
    every H^s (it only zeroes coefficients).
    """
    n = int(n)
    half = field.grid.points_per_dim // 2
    if n < 0:
        raise SpectralError(f"projection band must be nonnegative, got {n}")
    if n > half:
        raise SpectralError(
            f"projection band n={n} exceeds representable band M/2={half}"
        )
    return SpectralField(field.grid, field.coeffs * _band_mask(field.grid, n))


def dealias(field: SpectralField) -> SpectralField:
    """Two-thirds-rule filter: zero modes with any |k_j| > floor(M/3)."""
    cut = field.grid.points_per_dim // 3
    return SpectralField(field.grid, field.coeffs * _band_mask(field.grid, cut))


def dealias_band(grid: TorusGrid) -> int:
    """Largest |k_j| kept by `dealias`."""
    return grid.points_per_dim // 3


def dump_field_csv(field: SpectralField, path: str) -> None:
    """Debug dump: one row per mode, columns k-multi-index, re, im."""
    grid = field.grid
    with open(path, "w", encoding="utf-8") as fh:
        axes = ",".join(f"k{j}" for j in range(grid.dimension))
        fh.write(f"{axes},re,im\n")
        for idx in np.ndindex(grid.shape):
            k = tuple(int(grid.wavenumbers[i]) for i in idx)
            c = field.coeffs[idx]
            ks = ",".join(str(kj) for kj in k)
            fh.write(f"{ks},{float(c.real)!r},{float(c.imag)!r}\n")
