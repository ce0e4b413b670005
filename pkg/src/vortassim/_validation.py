"""Input validation helpers shared by the estimators and the CLI."""

from __future__ import annotations

import numbers

import numpy as np

from ._config import get_numerics
from .exceptions import ValidationError


def check_positive(value, name, *, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValidationError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise ValidationError(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0:
        raise ValidationError(f"{name} must be >= 0, got {value!r}")
    return float(value)


def check_even_int(value, name, minimum=2):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise ValidationError(f"{name} must be an integer, got {value!r}")
    if value < minimum or value % 2:
        raise ValidationError(f"{name} must be even and >= {minimum}, got {value}")
    return int(value)


def conjugate_defect(v):
    """Max deviation from ``v[N-1-k] == conj(v[k])``, relative to ``max|v|``."""
    v = np.asarray(v)
    scale = np.max(np.abs(v)) if v.size else 0.0
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(v[::-1] - np.conj(v))) / scale)


def check_spectral_vector(v, n_modes, name="omega", *, mean_zero=True, tol=None):
    """Validate a conjugate-symmetric, mean-free coefficient vector.

    Returns the vector as a complex ndarray. Raises ``ValidationError`` when
    the length is wrong, when conjugate symmetry is violated beyond ``tol``
    (relative), or when the mean mode is nonzero and ``mean_zero`` is set.
    """
    tol = get_numerics().algebraic_tol if tol is None else tol
    v = np.asarray(v, dtype=complex)
    if v.ndim != 1 or v.shape[0] != n_modes:
        raise ValidationError(f"{name} must have shape ({n_modes},), got {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{name} contains non-finite entries")
    defect = conjugate_defect(v)
    if defect > tol:
        raise ValidationError(
            f"{name} violates conjugate symmetry (relative defect {defect:.3e} > {tol:g})"
        )
    if mean_zero:
        scale = max(np.max(np.abs(v)), 1.0)
        if abs(v[n_modes // 2]) > tol * scale:
            raise ValidationError(f"{name} has a nonzero mean mode ({v[n_modes // 2]!r})")
    return v


def check_square(M, name, n=None):
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {M.shape}")
    if n is not None and M.shape[0] != n:
        raise ValidationError(f"{name} must be {n}x{n}, got {M.shape}")
    return M


def check_hermitian(M, name, tol=None):
    tol = get_numerics().algebraic_tol if tol is None else tol
    M = check_square(M, name)
    scale = max(np.max(np.abs(M)), 1.0) if M.size else 1.0
    if np.max(np.abs(M - M.conj().T), initial=0.0) > tol * scale:
        raise ValidationError(f"{name} must be Hermitian")
    return M


def check_positive_definite(M, name):
    M = check_hermitian(M, name, tol=1e-10)
    try:
        np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise ValidationError(f"{name} must be positive definite") from None
    return M
