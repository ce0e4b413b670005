"""Global numerical tolerances."""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass, replace


@dataclass(frozen=True)
class Numerics:
    algebraic_tol: float = 1e-12
    transform_tol: float = 1e-10
    solve_tol: float = 1e-10
    symmetry_tol: float = 1e-12
    # relative margin used for strict matrix inequalities
    lmi_slack: float = 1e-8


_numerics = Numerics()


def get_numerics() -> Numerics:
    return _numerics


def set_numerics(**changes) -> Numerics:
    global _numerics
    _numerics = replace(_numerics, **changes)
    return _numerics


@contextmanager
def numerics_context(**changes):
    """Temporarily override tolerances, e.g. ``with numerics_context(solve_tol=1e-8):``."""
    global _numerics
    saved = _numerics
    _numerics = replace(_numerics, **changes)
    try:
        yield _numerics
    finally:
        _numerics = saved
