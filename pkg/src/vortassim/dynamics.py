"""Time stepping of the Galerkin model with the linearly implicit midpoint rule."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from ._config import get_numerics
from ._validation import check_positive, check_spectral_vector
from .exceptions import NumericalError, ValidationError
from .operators import _convection, diffusion_operator
from .spectral import ModeGrid, laplacian_spectrum, physical_grid, project_physical_field, symmetrize

logger = logging.getLogger(__name__)

__all__ = [
    "ForcingSpec",
    "Trajectory",
    "rhs_state",
    "midpoint_step",
    "simulate_truth",
    "two_mode_forcing",
    "peaks_field",
    "peaks_initial_condition",
    "n_steps",
]


@dataclass(frozen=True)
class ForcingSpec:
    """Forcing ``D f(t)``.

    ``D`` is kept as its diagonal. ``f`` is either a constant vector or a
    callable ``f(t) -> vector``.
    """

    D_diag: np.ndarray
    f: object
    metadata: dict = field(default_factory=dict)

    @property
    def D(self):
        return sp.diags_array(self.D_diag, format="dia")

    def f_at(self, t):
        return np.asarray(self.f(t) if callable(self.f) else self.f, dtype=complex)

    def Df(self, t):
        return self.D_diag * self.f_at(t)

    @classmethod
    def zero(cls, grid: ModeGrid):
        return cls(np.zeros(grid.N), np.zeros(grid.N, dtype=complex))


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.times) != len(self.states):
            raise ValidationError("times and states must have equal length")

    def __len__(self):
        return len(self.times)

    @property
    def dt(self):
        return float(self.times[1] - self.times[0]) if len(self.times) > 1 else 0.0


def n_steps(dt, T):
    """Number of steps ``K`` with ``K dt == T``; rejects a non-integer ratio."""
    dt = check_positive(dt, "dt")
    T = check_positive(T, "T", strict=False)
    K = int(round(T / dt))
    if abs(K * dt - T) > 1e-9 * max(T, dt):
        raise ValidationError(f"T={T} is not an integer multiple of dt={dt}")
    return K


def rhs_state(omega, A, D, f, grid: ModeGrid):
    """``B(omega) omega + A omega + D f``."""
    omega = check_spectral_vector(omega, grid.N)
    return _convection(omega, grid) @ omega + A @ omega + D @ np.asarray(f, dtype=complex)


def midpoint_step(x, J, F_half, dt, *, step=None):
    """Solve ``(I - dt/2 J) x1 = (I + dt/2 J) x + dt F_half``.

    ``J`` may be dense or sparse; it is densified for an LU solve.
    """
    x = np.asarray(x, dtype=complex)
    J = J.toarray() if sp.issparse(J) else np.asarray(J)
    half = 0.5 * dt * J
    rhs = x + half @ x + dt * np.asarray(F_half, dtype=complex)
    M = -half
    M[np.diag_indices_from(M)] += 1.0
    try:
        with np.errstate(divide="ignore", invalid="ignore"):
            x1 = sla.solve(M, rhs, check_finite=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"midpoint system is singular: {exc}", step=step, dt=dt) from exc
    if not np.all(np.isfinite(x1)):
        raise NumericalError("midpoint system is singular (non-finite solution)", step=step, dt=dt)
    res = np.linalg.norm(M @ x1 - rhs)
    scale = np.linalg.norm(rhs)
    if res > get_numerics().solve_tol * max(scale, np.finfo(float).tiny):
        raise NumericalError(
            f"midpoint solve residual {res:.3e} exceeds tolerance (|rhs|={scale:.3e})", step=step, dt=dt
        )
    return x1


def simulate_truth(omega0, forcing: ForcingSpec, nu, grid: ModeGrid, dt, T, *, A=None) -> Trajectory:
    """Integrate the state equation with the Jacobian frozen at the current step.

    ``nu = 0`` is allowed here (inviscid check); pass ``A`` explicitly to use
    another linear part.
    """
    K = n_steps(dt, T)
    x = check_spectral_vector(omega0, grid.N, "omega0")
    if A is None:
        A = diffusion_operator(laplacian_spectrum(grid), nu) if nu > 0 else sp.csr_array((grid.N, grid.N))
    A_dense = A.toarray() if sp.issparse(A) else np.asarray(A)
    states = np.empty((K + 1, grid.N), dtype=complex)
    times = dt * np.arange(K + 1)
    states[0] = x
    Df_prev = forcing.Df(times[0])
    max_fix = 0.0
    for k in range(K):
        Df_next = forcing.Df(times[k + 1])
        J = _convection(x, grid).toarray() + A_dense
        x = midpoint_step(x, J, 0.5 * (Df_next + Df_prev), dt, step=k)
        x, fix = symmetrize(x)
        max_fix = max(max_fix, fix)
        states[k + 1] = x
        Df_prev = Df_next
        if (k + 1) % 100 == 0:
            logger.debug("truth step %d/%d, |omega|=%.4g", k + 1, K, np.linalg.norm(x))
    meta = {"nu": nu, "dt": dt, "T": T, "max_symmetry_correction": max_fix}
    meta.update(forcing.metadata)
    return Trajectory(times, states, meta)


def two_mode_forcing(grid: ModeGrid, d: int = 6) -> ForcingSpec:
    """Two-mode forcing at positions ``(N1+1) N1/2 +- |d| + N2/2 + 1``.

    The position formula does not state its indexing base. Both the 0- and
    1-based readings are tried and the one that lands on a mirror pair
    ``(k, N-1-k)`` is used; the choice goes into ``metadata``.
    """
    d = int(d)
    if d == 0:
        raise ValidationError("d=0 puts both forcing positions on the mean mode")
    if abs(d) > grid.N2 // 2:
        # the offset would wrap into the next row of c and force an unrelated pair
        raise ValidationError(f"|d|={abs(d)} exceeds N2/2={grid.N2 // 2}")
    base = (grid.N1 + 1) * grid.N1 // 2 + grid.N2 // 2 + 1
    chosen = None
    for index_base in (1, 0):
        pos = (base - abs(d) - index_base, base + abs(d) - index_base)
        if min(pos) < 0 or max(pos) >= grid.N:
            continue
        if pos[0] + pos[1] == grid.N - 1:
            chosen = index_base, pos
            break
    if chosen is None:
        raise ValidationError(
            f"forcing positions for d={d} on grid {grid.N1}x{grid.N2} are out of range "
            "or not a conjugate pair"
        )
    index_base, pos = chosen
    D_diag = np.zeros(grid.N)
    D_diag[list(pos)] = 1.0
    f = np.full(grid.N, d / 2, dtype=complex)
    meta = {
        "forcing_index_base": index_base,
        "forcing_positions": list(pos),
        "forcing_modes": [list(grid.mode(p)) for p in pos],
        "forcing_d": d,
    }
    return ForcingSpec(D_diag, f, meta)


def peaks_field(x, y):
    """Shifted 'peaks' surface used as the initial vorticity."""
    X = x - np.pi
    Y = y - np.pi
    return (
        3 * (1 - X) ** 2 * np.exp(-X**2 - (Y + 1) ** 2)
        - 10 * (X / 5 - X**3 - Y**5) * np.exp(-X**2 - Y**2)
        - np.exp(-(X + 1) ** 2 - Y**2) / 3
    )


def peaks_initial_condition(grid: ModeGrid, resolution: int = 256, func: Optional[Callable] = None):
    x, y = physical_grid(grid, resolution)
    return project_physical_field((func or peaks_field)(x, y), grid)
