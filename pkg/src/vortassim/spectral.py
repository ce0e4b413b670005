"""Fourier mode bookkeeping and spectral <-> physical transforms.

Coefficients live in a flat complex vector indexed by ``lin(c, d)`` with
``|c| <= N1/2`` and ``|d| <= N2/2``. The ordering is row-major in ``c`` then
``d``, which makes mode ``(-c, -d)`` sit at ``N - 1 - lin(c, d)`` and the mean
mode in the middle of the vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from ._config import get_numerics
from ._validation import check_even_int, check_positive, check_spectral_vector
from .exceptions import ValidationError

__all__ = [
    "ModeGrid",
    "LaplacianSpectrum",
    "build_mode_grid",
    "laplacian_spectrum",
    "conjugacy_projector",
    "symmetrize",
    "project_physical_field",
    "evaluate_field",
    "enstrophy",
    "physical_grid",
    "random_vorticity",
    "validate_vorticity",
]


@dataclass(frozen=True)
class ModeGrid:
    """Truncated Fourier basis on the periodic box ``[0, Lx) x [0, Ly)``."""

    N1: int
    N2: int
    Lx: float
    Ly: float
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        check_even_int(self.N1, "N1")
        check_even_int(self.N2, "N2")
        check_positive(self.Lx, "Lx")
        check_positive(self.Ly, "Ly")

    @property
    def N(self) -> int:
        return (self.N1 + 1) * (self.N2 + 1)

    @property
    def center(self) -> int:
        return (self.N - 1) // 2

    @property
    def shape(self):
        return (self.N1 + 1, self.N2 + 1)

    def in_band(self, c, d):
        return (np.abs(c) <= self.N1 // 2) & (np.abs(d) <= self.N2 // 2)

    def lin(self, c, d):
        """Linear index of mode ``(c, d)``; works elementwise on arrays."""
        c = np.asarray(c)
        d = np.asarray(d)
        if not np.all(self.in_band(c, d)):
            raise ValidationError(f"mode(s) outside the band |c|<={self.N1 // 2}, |d|<={self.N2 // 2}")
        k = (c + self.N1 // 2) * (self.N2 + 1) + (d + self.N2 // 2)
        return int(k) if k.ndim == 0 else k

    def mode(self, k):
        """Inverse of :meth:`lin`."""
        c, d = np.divmod(np.asarray(k), self.N2 + 1)
        c = c - self.N1 // 2
        d = d - self.N2 // 2
        if np.ndim(k) == 0:
            return int(c), int(d)
        return c, d

    @cached_property
    def wavenumbers(self):
        """Integer arrays ``(c, d)`` of length N in linear order."""
        c, d = self.mode(np.arange(self.N))
        c.setflags(write=False)
        d.setflags(write=False)
        return c, d

    def zeros(self):
        return np.zeros(self.N, dtype=complex)


def build_mode_grid(N1, N2, Lx, Ly) -> ModeGrid:
    return ModeGrid(N1, N2, float(Lx), float(Ly))


@dataclass(frozen=True)
class LaplacianSpectrum:
    grid: ModeGrid
    values: np.ndarray

    def __getitem__(self, mode):
        return self.values[self.grid.lin(*mode)]


def laplacian_spectrum(grid: ModeGrid) -> LaplacianSpectrum:
    c, d = grid.wavenumbers
    lam = 4 * np.pi**2 * (c**2 / grid.Lx**2 + d**2 / grid.Ly**2)
    lam[grid.center] = 0.0
    lam.setflags(write=False)
    return LaplacianSpectrum(grid, lam)


def conjugacy_projector(grid: ModeGrid) -> np.ndarray:
    """Real symmetric block matrix pairing each mode with its mirror image.

    ``Psi @ Psi`` is the identity with the mean entry zeroed.
    """
    n = (grid.N - 1) // 2
    eye = np.eye(n)
    rev = eye[::-1]
    psi = np.zeros((grid.N, grid.N))
    psi[:n, :n] = eye
    psi[:n, n + 1:] = rev
    psi[n + 1:, :n] = rev
    psi[n + 1:, n + 1:] = -eye
    return psi / np.sqrt(2.0)


def symmetrize(v):
    """Project onto conjugate-symmetric, mean-free vectors.

    Returns ``(projected, correction_norm)``.
    """
    v = np.asarray(v, dtype=complex)
    w = 0.5 * (v + np.conj(v[::-1]))
    w[len(w) // 2] = 0.0
    return w, float(np.linalg.norm(w - v))


def physical_grid(grid: ModeGrid, resolution):
    """Uniform periodic sample points ``(x, y)`` with ``indexing='ij'``."""
    mx, my = _resolution_pair(resolution)
    x = np.arange(mx) * grid.Lx / mx
    y = np.arange(my) * grid.Ly / my
    return np.meshgrid(x, y, indexing="ij")


def _resolution_pair(resolution):
    if np.ndim(resolution) == 0:
        return int(resolution), int(resolution)
    mx, my = resolution
    return int(mx), int(my)


def _check_resolution(grid, mx, my):
    if mx < grid.N1 + 1 or my < grid.N2 + 1:
        raise ValidationError(
            f"resolution {mx}x{my} cannot resolve modes up to "
            f"({grid.N1 // 2}, {grid.N2 // 2}); need at least {grid.N1 + 1}x{grid.N2 + 1}"
        )


def project_physical_field(samples, grid: ModeGrid) -> np.ndarray:
    """Fourier coefficients ``(1/(Lx Ly)) int f conj(phi_cd)`` of real samples.

    ``samples[j, k]`` is the value at ``(j Lx/Mx, k Ly/My)``. The integral is
    evaluated with the periodic rectangle rule (the DFT), and the mean mode is
    dropped.
    """
    f = np.asarray(samples, dtype=float)
    if f.ndim != 2:
        raise ValidationError(f"samples must be a 2-D array, got shape {f.shape}")
    mx, my = f.shape
    _check_resolution(grid, mx, my)
    F = np.fft.fft2(f) / (mx * my)
    c, d = grid.wavenumbers
    coeffs = F[c % mx, d % my]
    coeffs[grid.center] = 0.0
    return coeffs


def evaluate_field(omega, grid: ModeGrid, resolution) -> np.ndarray:
    """Real physical samples of the truncated series on a uniform grid."""
    omega = np.asarray(omega, dtype=complex)
    if omega.shape != (grid.N,):
        raise ValidationError(f"omega must have shape ({grid.N},), got {omega.shape}")
    mx, my = _resolution_pair(resolution)
    _check_resolution(grid, mx, my)
    spec = np.zeros((mx, my), dtype=complex)
    c, d = grid.wavenumbers
    spec[c % mx, d % my] = omega
    field_ = np.fft.ifft2(spec) * (mx * my)
    scale = np.max(np.abs(omega)) if omega.size else 0.0
    residue = np.max(np.abs(field_.imag))
    if residue > get_numerics().transform_tol * max(scale, np.finfo(float).tiny):
        raise ValidationError(
            f"imaginary residue {residue:.3e} in evaluated field; coefficients are not conjugate-symmetric"
        )
    return field_.real


def enstrophy(omega) -> float:
    """Squared coefficient norm, equal to ``(1/(Lx Ly)) int |omega|^2``."""
    omega = np.asarray(omega)
    return float(np.vdot(omega, omega).real)


def random_vorticity(grid: ModeGrid, rng=None, *, decay=0.0, scale=1.0):
    """Random valid coefficient vector, amplitudes ~ ``(1+|k|^2)^(-decay/2)``."""
    rng = np.random.default_rng(rng)
    v = rng.standard_normal(grid.N) + 1j * rng.standard_normal(grid.N)
    if decay:
        c, d = grid.wavenumbers
        v = v * (1.0 + c**2 + d**2) ** (-decay / 2)
    v, _ = symmetrize(v)
    return scale * v


def validate_vorticity(omega, grid: ModeGrid, name="omega"):
    return check_spectral_vector(omega, grid.N, name)
