"""Observation operators, synthetic noisy data and the uncertainty ellipsoid."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_positive, check_positive_definite
from .dynamics import Trajectory
from .exceptions import ValidationError
from .spectral import ModeGrid, project_physical_field

__all__ = [
    "ObservationModel",
    "UncertaintyEllipsoid",
    "ObservationSeries",
    "selection_observation",
    "kernel_observation",
    "tensor_observed_modes",
    "generate_observations",
    "ellipsoid_contains",
    "RNG_ALGORITHM",
]

RNG_ALGORITHM = "numpy.random.PCG64"


@dataclass(frozen=True)
class ObservationModel:
    """``y = H omega + F eta``.

    ``observed`` holds the linear indices of the selected modes when ``H`` is a
    row selection, otherwise ``None``.
    """

    H: np.ndarray
    F: np.ndarray
    R: np.ndarray
    observed: np.ndarray = None

    @property
    def M(self):
        return self.H.shape[0]

    @property
    def is_selection(self):
        return self.observed is not None

    def HtH_diag(self):
        """Diagonal of ``H^* H`` for selection operators."""
        if not self.is_selection:
            raise ValidationError("H is not a mode selection")
        h = np.zeros(self.H.shape[1])
        h[self.observed] = 1.0
        return h

    def with_noise_matrix(self, F):
        return ObservationModel(self.H, np.asarray(F, dtype=float), self.R, self.observed)


def tensor_observed_modes(values=(-6, -3, -2, -1, 0, 1, 2, 3, 6)):
    """Tensor set ``values x values`` of observed wavenumbers."""
    return [(c, d) for c in values for d in values]


def selection_observation(grid: ModeGrid, observed_modes, *, F=None, R=None) -> ObservationModel:
    """0/1 row selection of the listed modes.

    The set must be closed under ``(c, d) -> (-c, -d)``. Rows follow the
    linear order of the modes, so that ``H H^* = I`` and ``H^* H`` is a 0/1
    diagonal.
    """
    modes = {(int(c), int(d)) for c, d in observed_modes}
    if len(modes) != len(list(observed_modes)):
        raise ValidationError("observed_modes contains duplicates")
    for c, d in modes:
        if not grid.in_band(c, d):
            raise ValidationError(f"observed mode {(c, d)} is outside the band")
        if (-c, -d) not in modes:
            raise ValidationError(f"observed set is not conjugate-closed: {(c, d)} lacks {(-c, -d)}")
    idx = np.sort([grid.lin(c, d) for c, d in modes])
    M = len(idx)
    H = np.zeros((M, grid.N))
    H[np.arange(M), idx] = 1.0
    F = np.eye(M) if F is None else np.asarray(F, dtype=float)
    R = np.eye(M) if R is None else check_positive_definite(np.asarray(R, dtype=float), "R")
    return ObservationModel(H, F, R, idx)


def kernel_observation(grid: ModeGrid, kernel_samples, *, F=None, R=None) -> ObservationModel:
    """Rows ``(H_k, phi_cd)`` from averaging kernels sampled on a physical grid.

    ``kernel_samples`` has shape ``(M, mx, my)``; each kernel is real.
    """
    ks = np.asarray(kernel_samples, dtype=float)
    if ks.ndim != 3:
        raise ValidationError("kernel_samples must have shape (M, mx, my)")
    H = np.array([project_physical_field(k, grid) for k in ks])
    M = H.shape[0]
    F = np.eye(M) if F is None else np.asarray(F, dtype=float)
    R = np.eye(M) if R is None else check_positive_definite(np.asarray(R, dtype=float), "R")
    return ObservationModel(H, F, R, None)


@dataclass(frozen=True)
class UncertaintyEllipsoid:
    S: np.ndarray
    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        for name in ("S", "Q", "R"):
            check_positive_definite(np.asarray(getattr(self, name)), name)

    @classmethod
    def scalar(cls, N, M, s=1.0, q=1.0, r=1.0):
        return cls(s * np.eye(N), q * np.eye(N), r * np.eye(M))


@dataclass(frozen=True)
class ObservationSeries:
    times: np.ndarray
    y: np.ndarray
    observed: np.ndarray
    seed: int = None
    noise: dict = field(default_factory=dict)


def _quad(Minv_solve, v):
    v = np.asarray(v, dtype=complex)
    return float(np.real(np.vdot(v, Minv_solve(v))))


def ellipsoid_contains(E: UncertaintyEllipsoid, omega0, f_t=(), eta_t=()):
    """Membership test for ``(omega0, f, eta)``.

    Returns ``(inside, margin)`` where ``margin = 1 - worst quadratic form``.
    ``f_t`` and ``eta_t`` are sequences of samples over time (may be empty).
    """
    q0 = _quad(lambda v: np.linalg.solve(E.S, v), omega0)
    worst = q0
    f_t = list(f_t)
    eta_t = list(eta_t)
    if f_t or eta_t:
        n = max(len(f_t), len(eta_t))
        if f_t and eta_t and len(f_t) != len(eta_t):
            raise ValidationError("f_t and eta_t must have equal length")
        for k in range(n):
            val = 0.0
            if f_t:
                val += _quad(lambda v: np.linalg.solve(E.Q, v), f_t[k])
            if eta_t:
                val += _quad(lambda v: np.linalg.solve(E.R, v), eta_t[k])
            worst = max(worst, val)
    margin = 1.0 - worst
    return margin >= -1e-12, margin


def _noise(rng, M, N, amplitude, literal_interval):
    if literal_interval:
        lo, hi = -amplitude / np.sqrt(N), amplitude * np.sqrt(N)
    else:
        lo, hi = -amplitude / np.sqrt(N), amplitude / np.sqrt(N)
    return rng.uniform(lo, hi, size=M) + 1j * rng.uniform(lo, hi, size=M)


def _conjugate_pairing(model: ObservationModel, N):
    """Permutation ``m -> m'`` with ``observed[m'] == N-1-observed[m]``."""
    pos = {int(k): m for m, k in enumerate(model.observed)}
    return np.array([pos[N - 1 - int(k)] for k in model.observed])


def generate_observations(
    traj: Trajectory,
    model: ObservationModel,
    noise_amplitude=0.2,
    seed=0,
    *,
    literal_interval=False,
) -> ObservationSeries:
    """``y_t = H omega_t + F eta_t`` with bounded uniform noise.

    Each noise component has independent real and imaginary parts drawn from
    ``U(-a/sqrt(N), a/sqrt(N))``; for selection operators the noise is then
    made conjugate-consistent (mirror modes get conjugate noise). The literal
    interval ``(-a/sqrt(N), a*sqrt(N))`` is available via ``literal_interval``.
    """
    a = check_positive(noise_amplitude, "noise_amplitude", strict=False)
    N = traj.states.shape[1]
    rng = np.random.Generator(np.random.PCG64(seed))
    y = traj.states @ model.H.T.astype(complex)
    if a > 0:
        pair = _conjugate_pairing(model, N) if model.is_selection else None
        eta = np.empty_like(y)
        for k in range(len(traj.times)):
            e = _noise(rng, model.M, N, a, literal_interval)
            if pair is not None:
                e = 0.5 * (e + np.conj(e[pair]))
            eta[k] = e
        y = y + eta @ model.F.T
    noise = {
        "amplitude": a,
        "interval": "literal" if literal_interval else "symmetric",
        "rng": RNG_ALGORITHM,
    }
    observed = model.observed if model.is_selection else np.arange(model.M)
    return ObservationSeries(np.asarray(traj.times), y, observed, seed, noise)
