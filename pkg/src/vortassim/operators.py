"""Matrices of the Fourier-Galerkin vorticity model.

``B(w)`` is the Galerkin-truncated convection operator: entry
``(lin(c,d), lin(n,m))`` collects the interaction of mode ``(p,q) = (c-n, d-m)``
of ``w`` with mode ``(n,m)`` of the transported field. Interactions leaving
the band are dropped. ``B1(w_hat)`` is the operator ``v -> B(v) w_hat``
composed with the mean-removing projector.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from ._validation import check_positive, check_spectral_vector
from .spectral import LaplacianSpectrum, ModeGrid, conjugacy_projector

__all__ = [
    "diffusion_operator",
    "assemble_convection",
    "assemble_mean_flow",
    "assemble_B1",
    "assemble_B1_literal",
    "convection_structure",
]


def _kernel(grid, p, q):
    """``Lx Ly / (p^2 Ly^2 + q^2 Lx^2)``, zero at ``p = q = 0``."""
    den = (p * grid.Ly) ** 2 + (q * grid.Lx) ** 2
    out = np.zeros(np.broadcast(p, q).shape)
    nz = den != 0
    out[nz] = grid.Lx * grid.Ly / den[nz]
    return out


class _Structure:
    """Index pattern of B(.) and B1(.) for one grid, shared across time steps."""

    def __init__(self, grid: ModeGrid):
        c, d = (np.asarray(a) for a in grid.wavenumbers)
        N = grid.N
        h1, h2 = grid.N1 // 2, grid.N2 // 2
        # pairwise differences row - col
        dc = c[:, None] - c[None, :]
        dd = d[:, None] - d[None, :]
        inband = (np.abs(dc) <= h1) & (np.abs(dd) <= h2)
        diff_idx = np.where(inband, (dc + h1) * (grid.N2 + 1) + (dd + h2), -1)

        # B: row (c,d), col (n,m), uses w[c-n, d-m] (mean mode excluded)
        b_mask = inband & ~((dc == 0) & (dd == 0))
        rows, cols = np.nonzero(b_mask)
        didx = diff_idx[rows, cols]
        cr, dr, nc, mc = c[rows], d[rows], c[cols], d[cols]
        coef = -(cr * mc - dr * nc) * _kernel(grid, cr - nc, dr - mc)
        keep = coef != 0
        rows, cols, didx, coef = rows[keep], cols[keep], didx[keep], coef[keep]
        order = np.argsort(didx, kind="stable")
        self.b_rows = rows[order].astype(np.int32)
        self.b_cols = cols[order].astype(np.int32)
        self.b_coef = coef[order]
        b_didx = didx[order]
        self.b_start = np.searchsorted(b_didx, np.arange(N + 1))

        # B1: row (c,d), col (p,q), uses w_hat[c-p, d-q]
        kcol = _kernel(grid, c, d)[None, :]
        lcoef = -(d[:, None] * c[None, :] - c[:, None] * d[None, :]) * kcol
        lcoef = np.where(inband, lcoef, 0.0)
        self.l_didx = np.where(inband, diff_idx, grid.center).astype(np.int32)
        self.l_coef = lcoef
        self.N = N


def convection_structure(grid: ModeGrid) -> _Structure:
    s = grid._cache.get("structure")
    if s is None:
        s = grid._cache["structure"] = _Structure(grid)
    return s


def diffusion_operator(spec: LaplacianSpectrum, nu) -> sp.dia_array:
    """``A = -nu diag(lambda)``."""
    nu = check_positive(nu, "nu")
    return sp.diags_array(-nu * spec.values, format="dia")


def _convection(omega, grid, sign=1.0):
    s = convection_structure(grid)
    nz = np.flatnonzero(omega)
    counts = s.b_start[nz + 1] - s.b_start[nz]
    total = int(counts.sum())
    if total == 0:
        return sp.csr_array((grid.N, grid.N), dtype=complex)
    # concatenated ranges b_start[k]:b_start[k+1] for every nonzero omega_k
    offsets = np.repeat(s.b_start[nz] - np.concatenate(([0], np.cumsum(counts)[:-1])), counts)
    sel = np.arange(total) + offsets
    data = sign * s.b_coef[sel] * np.repeat(omega[nz], counts)
    return sp.csr_array((data, (s.b_rows[sel], s.b_cols[sel])), shape=(grid.N, grid.N))


def assemble_convection(omega, grid: ModeGrid) -> sp.csr_array:
    """Sparse convection matrix ``B(omega)``.

    Work is proportional to ``N * nnz(omega)``: only the interaction blocks of
    nonzero coefficients are visited.
    """
    omega = check_spectral_vector(omega, grid.N, mean_zero=False)
    return _convection(omega, grid)


def assemble_mean_flow(grid: ModeGrid, u_bar=(0.0, 0.0)) -> sp.dia_array:
    u, v = u_bar
    c, d = grid.wavenumbers
    diag = -(2j * np.pi * c * u / grid.Lx - 2j * np.pi * d * v / grid.Ly)
    return sp.diags_array(diag, format="dia")


def _linearization(omega_hat, grid):
    """Dense matrix ``L`` with ``L v = B(v) omega_hat`` for every ``v``."""
    s = convection_structure(grid)
    return s.l_coef * omega_hat[s.l_didx]


def assemble_B1(omega_hat, grid: ModeGrid) -> np.ndarray:
    """Dense ``B1(omega_hat)``.

    Uses ``Psi Psi^* = diag(I, 0, I)``: the pre-factor ``[B(Psi e_j) omega_hat]_j``
    equals ``L Psi``, so ``B1 = L`` with its mean column removed.
    """
    omega_hat = check_spectral_vector(omega_hat, grid.N, "omega_hat")
    L = _linearization(omega_hat, grid)
    L[:, grid.center] = 0.0
    return L


def assemble_B1_literal(omega_hat, grid: ModeGrid) -> np.ndarray:
    """Column-by-column construction; O(N^2 nnz) and only meant for small grids."""
    omega_hat = check_spectral_vector(omega_hat, grid.N, "omega_hat")
    psi = conjugacy_projector(grid)
    cols = [_convection(psi[:, j].astype(complex), grid) @ omega_hat for j in range(grid.N)]
    return np.column_stack(cols) @ psi.conj().T
