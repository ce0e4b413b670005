"""Least-squares solution of the Lyapunov-type gain equation ``P G + G P = W``.

Here ``G = H^* H``. The minimum-norm least-squares solution is the Kronecker
pseudoinverse ``(I (x) G + G^T (x) I)^+ vec(W)``. Three routes are provided:

* ``structured``: entrywise closed form when ``G`` is a 0/1 diagonal,
* ``iterative``: matrix-free LSQR on the vectorised operator,
* ``dense``: explicit SVD pseudoinverse, for small N only (oracle).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, lsqr

from ._validation import check_positive, check_spectral_vector
from .exceptions import NumericalError, ValidationError
from .operators import assemble_B1

logger = logging.getLogger(__name__)

__all__ = [
    "GainProblem",
    "Gain",
    "assemble_W",
    "lyapunov_map",
    "gain_residual",
    "selection_diagonal",
    "solve_gain",
    "solve_gain_structured",
    "solve_gain_iterative",
    "solve_gain_dense",
]


@dataclass(frozen=True)
class GainProblem:
    W: np.ndarray
    H: np.ndarray
    q: float

    @property
    def N(self):
        return self.W.shape[0]


@dataclass(frozen=True)
class Gain:
    P: np.ndarray
    method: str
    residual: float
    info: dict = None


def _as_dense(M):
    return M.toarray() if sp.issparse(M) else np.asarray(M)


def _DQDt(D, Q, N):
    if np.ndim(Q) == 0:
        if sp.issparse(D) and D.format == "dia":
            d = D.diagonal()
            return np.diag(float(Q) * np.abs(d) ** 2)
        D = _as_dense(D)
        return float(Q) * (D @ D.conj().T)
    D = _as_dense(D)
    return D @ _as_dense(Q) @ D.conj().T


def assemble_W(omega_hat, D, Q, q, grid) -> np.ndarray:
    """``W = B1(w) + B1(w)^* + D Q D^* + q I`` (dense, Hermitian).

    ``Q`` may be a scalar, meaning ``Q I``.
    """
    q = check_positive(q, "q")
    omega_hat = check_spectral_vector(omega_hat, grid.N, "omega_hat")
    B1 = assemble_B1(omega_hat, grid)
    W = B1 + B1.conj().T
    if D is not None:
        W += _DQDt(D, Q, grid.N)
    W[np.diag_indices_from(W)] += q
    return W


def build_problem(omega_hat, D, Q, q, H, grid) -> GainProblem:
    return GainProblem(assemble_W(omega_hat, D, Q, q, grid), np.asarray(H), float(q))


def lyapunov_map(P, H):
    G = H.conj().T @ H
    return P @ G + G @ P


def gain_residual(P, prob: GainProblem):
    return float(np.linalg.norm(lyapunov_map(P, prob.H) - prob.W))


def selection_diagonal(H):
    """0/1 diagonal of ``H^* H`` if ``H`` is a row selection, else ``None``."""
    H = np.asarray(H)
    if not np.all((H == 0) | (H == 1)):
        return None
    rows, cols = np.nonzero(H)
    if len(rows) != H.shape[0] or len(np.unique(rows)) != H.shape[0] or len(np.unique(cols)) != len(cols):
        return None
    h = np.zeros(H.shape[1])
    h[cols] = 1.0
    return h


def solve_gain_structured(prob: GainProblem, *, fallback=True) -> Gain:
    """Closed form ``P_ij = W_ij / (h_i + h_j)`` (0 where both are unobserved)."""
    h = selection_diagonal(prob.H)
    if h is None:
        if not fallback:
            raise ValidationError("structured gain requires a 0/1 selection H")
        logger.warning("H is not a mode selection; falling back to the iterative gain solver")
        g = solve_gain_iterative(prob)
        return Gain(g.P, g.method, g.residual, {**(g.info or {}), "fallback_from": "structured"})
    s = h[:, None] + h[None, :]
    W = np.asarray(prob.W, dtype=complex)
    P = np.divide(W, s, out=np.zeros_like(W), where=s > 0)
    P = 0.5 * (P + P.conj().T)
    obs = h > 0
    # residual is W restricted to the unobserved block
    res = float(np.linalg.norm(prob.W[np.ix_(~obs, ~obs)]))
    return Gain(P, "structured", res, {"n_observed": int(obs.sum())})


def solve_gain_iterative(prob: GainProblem, tol=1e-12, max_iter=None) -> Gain:
    """Matrix-free LSQR on ``vec(P) -> vec(P G + G P)`` started from zero.

    Starting from zero, LSQR converges to the minimum-norm least-squares
    solution, i.e. the pseudoinverse answer.
    """
    H = np.asarray(prob.H, dtype=complex)
    N = prob.N
    Hh = H.conj().T

    def apply(x):
        X = x.reshape(N, N)
        return ((X @ Hh) @ H + Hh @ (H @ X)).ravel()

    # the map is self-adjoint under the Frobenius inner product
    op = LinearOperator((N * N, N * N), matvec=apply, rmatvec=apply, dtype=complex)
    max_iter = max_iter or 20 * N
    w = np.asarray(prob.W, dtype=complex).ravel()
    x, istop, itn, r1norm = lsqr(op, w, atol=tol, btol=tol, iter_lim=max_iter)[:4]
    if istop == 7:
        raise NumericalError(f"LSQR gain solve did not converge in {itn} iterations (residual {r1norm:.3e})")
    P = x.reshape(N, N)
    P = 0.5 * (P + P.conj().T)
    return Gain(P, "iterative", gain_residual(P, prob), {"iterations": int(itn), "istop": int(istop)})


def solve_gain_dense(prob: GainProblem) -> Gain:
    """SVD pseudoinverse of the Kronecker operator; O(N^6), small N only."""
    H = np.asarray(prob.H, dtype=complex)
    N = prob.N
    G = H.conj().T @ H
    eye = np.eye(N)
    # column-stacking vec: vec(P G) = (G^T (x) I) vec(P), vec(G P) = (I (x) G) vec(P)
    K = np.kron(eye, G) + np.kron(G.T, eye)
    p = np.linalg.pinv(K) @ np.asarray(prob.W, dtype=complex).ravel(order="F")
    P = p.reshape(N, N, order="F")
    P = 0.5 * (P + P.conj().T)
    return Gain(P, "dense-pseudoinverse", gain_residual(P, prob))


_SOLVERS = {
    "structured": solve_gain_structured,
    "iterative": solve_gain_iterative,
    "dense": solve_gain_dense,
}


def solve_gain(prob: GainProblem, method="structured") -> Gain:
    try:
        solver = _SOLVERS[method]
    except KeyError:
        raise ValidationError(f"unknown gain method {method!r}; choose from {sorted(_SOLVERS)}") from None
    return solver(prob)
