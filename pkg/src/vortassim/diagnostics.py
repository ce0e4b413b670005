"""Sufficient-condition checks for the gain and the exponential error bound."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackError, eigsh

from ._config import get_numerics
from .exceptions import NumericalError
from .gain import Gain, GainProblem, _DQDt, lyapunov_map, selection_diagonal
from .operators import assemble_B1

__all__ = [
    "DetectabilityReport",
    "LMIResult",
    "ErrorBoundParams",
    "max_eigenvalue",
    "check_detectability",
    "check_lmi",
    "riccati_residual",
    "error_bound",
]

_DENSE_EIG_LIMIT = 400


def max_eigenvalue(M) -> float:
    """Largest eigenvalue of a Hermitian matrix."""
    M = 0.5 * (M + M.conj().T)
    n = M.shape[0]
    if n == 0:
        return -np.inf
    try:
        if n <= _DENSE_EIG_LIMIT:
            return float(sla.eigvalsh(M)[-1])
        try:
            return float(eigsh(M, k=1, which="LA", return_eigenvectors=False, tol=1e-10)[0])
        except ArpackError:
            return float(sla.eigh(M, eigvals_only=True, subset_by_index=[n - 1, n - 1])[0])
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigenvalue computation failed: {exc}") from exc


class LMIResult(NamedTuple):
    max_eigenvalue: float
    holds: bool


@dataclass(frozen=True)
class DetectabilityReport:
    max_real: float
    unobserved_max: float
    verdict: bool
    residual: Optional[np.ndarray] = None

    @property
    def label(self):
        return "pass" if self.verdict else "fail"


def _margin(q):
    return get_numerics().lmi_slack * q


def _residual_selection(W, P, h):
    s = h[:, None] + h[None, :]
    return W - P * s


def check_detectability(prob: GainProblem, gain: Gain, *, keep_residual=None) -> DetectabilityReport:
    """Spectrum of ``W - (P G + G P)``.

    Passes when the largest eigenvalue is below ``-lmi_slack * q``. For a
    selection ``H`` the residual splits into an observed block and the
    unobserved block of ``W``; the generic residual is checked against that
    split before the (smaller) blocks are diagonalised.
    """
    W, P = prob.W, gain.P
    h = selection_diagonal(prob.H)
    if keep_residual is None:
        keep_residual = prob.N <= _DENSE_EIG_LIMIT
    if h is None:
        R = W - lyapunov_map(P, prob.H)
        top = max_eigenvalue(R)
        unobs = top
    else:
        R = _residual_selection(W, P, h)
        obs = h > 0
        cross = np.max(np.abs(R[np.ix_(obs, ~obs)]), initial=0.0)
        scale = max(np.max(np.abs(W)), 1.0)
        if cross > 1e-10 * scale:
            raise NumericalError(f"selection residual has observed/unobserved coupling {cross:.3e}")
        unobs = max_eigenvalue(R[np.ix_(~obs, ~obs)])
        top = max(unobs, max_eigenvalue(R[np.ix_(obs, obs)]))
    return DetectabilityReport(top, unobs, bool(top < -_margin(prob.q)), R if keep_residual else None)


def _lmi_matrix(P, omega_hat, D, Q, q, H, grid):
    B1 = assemble_B1(omega_hat, grid)
    M = B1 + B1.conj().T
    if D is not None:
        M = M + _DQDt(D, Q, grid.N)
    M = M - lyapunov_map(np.asarray(P), np.asarray(H))
    M[np.diag_indices_from(M)] += q
    return M


def check_lmi(P, omega_hat, D, Q, q, H, grid) -> LMIResult:
    """``lambda_max(B1 + B1^* + D Q D^* - P H^*H - H^*H P + q I)`` and whether it is < 0."""
    lam = max_eigenvalue(_lmi_matrix(P, omega_hat, D, Q, q, H, grid))
    return LMIResult(lam, bool(lam < -_margin(q)))


def riccati_residual(P, omega_hat, D, Q, q, H, F, R, grid) -> LMIResult:
    """Riccati inequality including the ``P H^* F R F^* H P`` term (verification only)."""
    M = _lmi_matrix(P, omega_hat, D, Q, q, H, grid)
    P = np.asarray(P)
    H = np.asarray(H)
    F = np.asarray(F)
    K = P @ H.conj().T @ F
    M = M + K @ np.asarray(R) @ K.conj().T
    lam = max_eigenvalue(M)
    return LMIResult(lam, bool(lam < -_margin(q)))


@dataclass(frozen=True)
class ErrorBoundParams:
    """Constants of ``C1 + C2 exp(-(2 lamA + q) t)``.

    ``lamA`` is the magnitude of the largest eigenvalue of ``A`` on mean-free
    vectors, i.e. ``nu`` times the smallest nonzero Laplacian eigenvalue.
    """

    q: float
    lamA: float
    lamS: float

    @property
    def rate(self):
        return 2 * self.lamA + self.q

    @property
    def C1(self):
        return 1.0 / self.rate

    @property
    def C2(self):
        return self.lamS - self.C1

    @classmethod
    def from_operators(cls, A, S, q):
        a = np.abs(A.diagonal() if sp.issparse(A) else np.diag(np.asarray(A)))
        a = a[a > 0]
        lamA = float(a.min()) if a.size else 0.0
        lamS = float(S) if np.ndim(S) == 0 else max_eigenvalue(np.asarray(S))
        return cls(float(q), lamA, lamS)


def error_bound(params: ErrorBoundParams, t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    return params.C1 + params.C2 * np.exp(-params.rate * t)
