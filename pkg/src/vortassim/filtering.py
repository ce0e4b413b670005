"""The assimilation loop: gain update, diagnostics and one midpoint step per interval."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp

from ._validation import check_positive
from .diagnostics import check_detectability
from .dynamics import Trajectory, midpoint_step
from .exceptions import FilterAborted, NumericalError, ValidationError
from .gain import Gain, GainProblem, assemble_W, selection_diagonal, solve_gain
from .observation import ObservationModel, ObservationSeries
from .operators import _convection
from .spectral import ModeGrid, symmetrize

logger = logging.getLogger(__name__)

__all__ = ["FilterConfig", "FilterRun", "filter_step", "run_filter"]


@dataclass(frozen=True)
class FilterConfig:
    """Everything the filter needs besides the data.

    ``Q`` is a scalar (``Q I``) or an N x N matrix. The gain is solved for
    ``q * (1 + q_slack)`` so that the inequality checked at level ``q`` is
    strict wherever it can hold.
    """

    grid: ModeGrid
    A: object
    model: ObservationModel
    q: float
    Q: object = 0.0
    D: object = None
    gain_method: str = "structured"
    gain_refresh: int = 1
    diagnostics_every: int = 1
    q_slack: float = 1e-6
    resymmetrize: bool = True
    assimilate: bool = True

    def __post_init__(self):
        check_positive(self.q, "q")
        check_positive(self.q_slack, "q_slack", strict=False)
        if self.gain_refresh < 1:
            raise ValidationError("gain_refresh must be >= 1")
        if self.diagnostics_every < 0:
            raise ValidationError("diagnostics_every must be >= 0 (0 disables diagnostics)")


@dataclass
class FilterRun:
    times: np.ndarray
    estimates: np.ndarray
    sigma: np.ndarray
    rel_error: np.ndarray
    rel_error_observed: np.ndarray
    detect_max_real: np.ndarray
    detect_unobserved_max: np.ndarray
    lmi_max_eig: np.ndarray
    gain_residual: np.ndarray
    symmetry_correction: np.ndarray
    last_gain: Optional[np.ndarray] = None
    metadata: dict = field(default_factory=dict)

    @property
    def has_truth(self):
        return not np.all(np.isnan(self.sigma))

    def detectability_pass_fraction(self):
        d = self.detect_max_real[~np.isnan(self.detect_max_real)]
        if d.size == 0:
            return float("nan")
        q = self.metadata.get("q", 0.0)
        return float(np.mean(d < -1e-8 * q))

    def truncated(self, n):
        kw = {}
        for name in self.__dataclass_fields__:
            val = getattr(self, name)
            if isinstance(val, np.ndarray) and name != "last_gain":
                val = val[:n]
            kw[name] = val
        return FilterRun(**kw)


def _gain_terms(P, model: ObservationModel, h):
    """``(P H^* H, P H^*)`` with a fast path for selections."""
    if h is not None:
        PHt = P[:, model.observed]
        PHtH = np.zeros_like(P)
        PHtH[:, model.observed] = PHt
        return PHtH, PHt
    Hh = model.H.conj().T
    PHt = P @ Hh
    return PHt @ model.H, PHt


def filter_step(omega_hat, P, y_t, y_t1, A, model: ObservationModel, dt, grid: ModeGrid, *, step=None,
                resymmetrize=True):
    """One step of the filter with ``J = B(w) + A - P H^* H`` and ``F = P H^* (y_t + y_t1)/2``.

    Returns ``(omega_hat_next, symmetry_correction_norm)``.
    """
    h = selection_diagonal(model.H) if model.is_selection else None
    PHtH, PHt = _gain_terms(np.asarray(P, dtype=complex), model, h)
    A_dense = A.toarray() if sp.issparse(A) else np.asarray(A)
    J = _convection(omega_hat, grid).toarray() + A_dense - PHtH
    F = PHt @ (0.5 * (np.asarray(y_t) + np.asarray(y_t1)))
    x = midpoint_step(omega_hat, J, F, dt, step=step)
    if resymmetrize:
        return symmetrize(x)
    return x, 0.0


def run_filter(obs: ObservationSeries, config: FilterConfig, truth: Optional[Trajectory] = None,
               omega_hat0=None) -> FilterRun:
    """Run the filter from ``omega_hat(0) = 0`` over the observation times.

    With ``truth`` (twin mode) the squared error ``sigma`` and relative L2
    errors are recorded; otherwise those columns are NaN. On a numerical
    failure a :class:`FilterAborted` carrying the partial run is raised.
    """
    grid = config.grid
    times = np.asarray(obs.times, dtype=float)
    K = len(times) - 1
    if K < 0:
        raise ValidationError("observation series is empty")
    if K > 0:
        dts = np.diff(times)
        dt = float(dts[0])
        if not np.allclose(dts, dt, rtol=1e-9, atol=0):
            raise ValidationError("observation times must be uniformly spaced")
    else:
        dt = 0.0
    if obs.y.shape != (K + 1, config.model.M):
        raise ValidationError(f"observations have shape {obs.y.shape}, expected {(K + 1, config.model.M)}")
    if truth is not None:
        if len(truth) != K + 1 or not np.allclose(truth.times, times):
            raise ValidationError("truth trajectory is not aligned with the observation times")

    nan = np.full(K + 1, np.nan)
    run = FilterRun(
        times=times,
        estimates=np.zeros((K + 1, grid.N), dtype=complex),
        sigma=nan.copy(),
        rel_error=nan.copy(),
        rel_error_observed=nan.copy(),
        detect_max_real=nan.copy(),
        detect_unobserved_max=nan.copy(),
        lmi_max_eig=nan.copy(),
        gain_residual=nan.copy(),
        symmetry_correction=np.zeros(K + 1),
        metadata={
            "q": config.q,
            "q_slack": config.q_slack,
            "gain_method": config.gain_method,
            "gain_refresh": config.gain_refresh,
            "diagnostics_every": config.diagnostics_every,
            "dt": dt,
            "assimilate": config.assimilate,
        },
    )
    x = grid.zeros() if omega_hat0 is None else np.asarray(omega_hat0, dtype=complex)
    run.estimates[0] = x
    H = config.model.H

    def record_error(k, x):
        if truth is None:
            return
        e = truth.states[k] - x
        run.sigma[k] = float(np.vdot(e, e).real)
        nrm = np.linalg.norm(truth.states[k])
        run.rel_error[k] = np.linalg.norm(e) / nrm if nrm > 0 else np.nan
        he = np.linalg.norm(H @ truth.states[k])
        run.rel_error_observed[k] = np.linalg.norm(H @ e) / he if he > 0 else np.nan

    record_error(0, x)
    gain = None
    t0 = time.perf_counter()
    for k in range(K):
        try:
            if not config.assimilate:
                if gain is None:
                    gain = Gain(np.zeros((grid.N, grid.N), dtype=complex), "zero", float("nan"))
            elif k % config.gain_refresh == 0:
                W = assemble_W(x, config.D, config.Q, config.q, grid)
                prob = GainProblem(W, H, config.q)
                shifted = W.copy()
                shifted[np.diag_indices_from(shifted)] += config.q * config.q_slack
                gain = solve_gain(GainProblem(shifted, H, config.q * (1 + config.q_slack)), config.gain_method)
                run.gain_residual[k] = gain.residual
                if config.diagnostics_every and k % config.diagnostics_every == 0:
                    rep = check_detectability(prob, gain, keep_residual=False)
                    run.detect_max_real[k] = rep.max_real
                    run.detect_unobserved_max[k] = rep.unobserved_max
                    # the LMI matrix coincides with the residual W - V(P)
                    run.lmi_max_eig[k] = rep.max_real
            x, fix = filter_step(x, gain.P, obs.y[k], obs.y[k + 1], config.A, config.model, dt, grid,
                                 step=k, resymmetrize=config.resymmetrize)
        except NumericalError as exc:
            partial = run.truncated(k + 1)
            partial.metadata["failed_step"] = k
            raise FilterAborted(exc.reason, partial, step=k, dt=dt) from exc
        run.symmetry_correction[k + 1] = fix
        run.estimates[k + 1] = x
        record_error(k + 1, x)
        if (k + 1) % 50 == 0:
            logger.info("filter step %d/%d (%.1fs), rel.err=%.3f", k + 1, K, time.perf_counter() - t0,
                        run.rel_error[k + 1])
    run.last_gain = None if gain is None else gain.P
    run.metadata["wall_time_s"] = time.perf_counter() - t0
    return run
