"""scikit-learn style front end for the spectral observer."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ._validation import check_positive
from .dynamics import Trajectory, two_mode_forcing
from .exceptions import ValidationError
from .filtering import FilterConfig, FilterRun, run_filter
from .observation import ObservationSeries, tensor_observed_modes, selection_observation
from .operators import diffusion_operator
from .spectral import ModeGrid, build_mode_grid, laplacian_spectrum

__all__ = ["SpectralObserver"]


class SpectralObserver(BaseEstimator):
    """State estimator for the Fourier-Galerkin vorticity model.

    Parameters
    ----------
    N1, N2 : int
        Even mode counts per axis.
    Lx, Ly : float
        Periodic box lengths.
    nu : float
        Viscosity.
    observed_modes : list of (int, int), optional
        Conjugate-closed set of observed wavenumbers. Defaults to the 81-mode
        tensor set ``{-6, -3..3, 6}^2`` (which needs ``N1, N2 >= 12``).
    forcing_d : int or None
        Wavenumber of the two-mode forcing whose structure enters ``D Q D^*``.
        ``None`` drops the forcing term from the gain equation.
    Q : float or None
        Scalar input bound ``Q I``. ``None`` uses ``2 / ||D f||``, the
        coefficient norm of the two-mode forcing (``forcing_d / sqrt(2)``).
    q : float or None
        Decay-rate parameter. ``None`` uses ``q_factor * Q``.
    q_factor : float
    gain_method : {'structured', 'iterative', 'dense'}
    gain_refresh : int
        Recompute the gain every ``gain_refresh`` steps.
    diagnostics_every : int
        Detectability check cadence in steps; 0 disables it.

    Attributes
    ----------
    run_ : FilterRun
    estimates_ : ndarray of shape (n_times, N)
    times_ : ndarray
    """

    def __init__(self, N1=40, N2=40, Lx=2 * np.pi, Ly=2 * np.pi, nu=0.005, observed_modes=None,
                 forcing_d=6, Q=None, q=None, q_factor=200.0, gain_method="structured", gain_refresh=1,
                 diagnostics_every=1, q_slack=1e-6):
        self.N1 = N1
        self.N2 = N2
        self.Lx = Lx
        self.Ly = Ly
        self.nu = nu
        self.observed_modes = observed_modes
        self.forcing_d = forcing_d
        self.Q = Q
        self.q = q
        self.q_factor = q_factor
        self.gain_method = gain_method
        self.gain_refresh = gain_refresh
        self.diagnostics_every = diagnostics_every
        self.q_slack = q_slack

    def _grid(self) -> ModeGrid:
        return build_mode_grid(self.N1, self.N2, self.Lx, self.Ly)

    def _resolve_bounds(self, grid):
        D = None
        Q = self.Q
        if self.forcing_d is not None:
            forcing = two_mode_forcing(grid, self.forcing_d)
            D = forcing.D
            if Q is None:
                Q = 2.0 / np.linalg.norm(forcing.Df(0.0))
        if Q is None:
            raise ValidationError("Q must be given when forcing_d is None")
        Q = check_positive(Q, "Q")
        q = self.q if self.q is not None else self.q_factor * Q
        return D, Q, check_positive(q, "q")

    def build_config(self) -> FilterConfig:
        grid = self._grid()
        modes = self.observed_modes if self.observed_modes is not None else tensor_observed_modes()
        model = selection_observation(grid, modes)
        D, Q, q = self._resolve_bounds(grid)
        A = diffusion_operator(laplacian_spectrum(grid), self.nu)
        return FilterConfig(grid, A, model, q, Q=Q, D=D, gain_method=self.gain_method,
                            gain_refresh=self.gain_refresh, diagnostics_every=self.diagnostics_every,
                            q_slack=self.q_slack)

    def fit(self, y, times=None, truth=None):
        """Assimilate observations.

        ``y`` is an ``ObservationSeries`` or an array of shape ``(n_times, M)``
        whose columns follow the linear order of the observed modes; in the
        array case ``times`` is required.
        """
        config = self.build_config()
        if isinstance(y, ObservationSeries):
            obs = y
        else:
            if times is None:
                raise ValidationError("times are required when y is an array")
            y = np.asarray(y, dtype=complex)
            if y.ndim != 2:
                raise ValidationError(f"y must be 2-D, got shape {y.shape}")
            obs = ObservationSeries(np.asarray(times, dtype=float), y, config.model.observed)
        if truth is not None and not isinstance(truth, Trajectory):
            states = np.asarray(truth, dtype=complex)
            truth = Trajectory(obs.times, states)
        self.config_ = config
        self.run_: FilterRun = run_filter(obs, config, truth)
        self.times_ = self.run_.times
        self.estimates_ = self.run_.estimates
        self.gain_ = self.run_.last_gain
        return self

    def _check_fitted(self):
        if not hasattr(self, "run_"):
            raise NotFittedError("SpectralObserver is not fitted; call fit() first")

    def predict(self, times=None):
        """Estimates at the requested observation times (all if ``None``)."""
        self._check_fitted()
        if times is None:
            return self.estimates_
        idx = np.searchsorted(self.times_, np.atleast_1d(times) - 1e-9 * max(self.times_[-1], 1.0))
        if np.any(idx >= len(self.times_)) or not np.allclose(self.times_[idx], times):
            raise ValidationError("requested times are not observation times")
        return self.estimates_[idx]

    def score(self, truth, times=None):
        """``1 - relative L2 error`` at the final (or given) time."""
        est = self.predict(times)
        truth = np.asarray(truth.states if isinstance(truth, Trajectory) else truth)
        if times is None:
            est, truth = est[-1], truth[-1]
        err = np.linalg.norm(truth - est, axis=-1) / np.linalg.norm(truth, axis=-1)
        return float(1.0 - np.mean(err))
