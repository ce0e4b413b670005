"""Self-check suites run by ``vortassim verify``.

Each suite returns a :class:`SuiteResult`; the defaults are small enough to
finish in seconds.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .diagnostics import ErrorBoundParams, error_bound
from .dynamics import ForcingSpec, midpoint_step, two_mode_forcing, simulate_truth
from .filtering import FilterConfig, run_filter
from .gain import GainProblem, solve_gain_dense, solve_gain_iterative, solve_gain_structured
from .observation import UncertaintyEllipsoid, ellipsoid_contains, generate_observations, selection_observation
from .operators import assemble_B1, assemble_convection, diffusion_operator
from .spectral import build_mode_grid, enstrophy, laplacian_spectrum, random_vorticity

__all__ = [
    "SuiteResult",
    "suite_skew_symmetry",
    "suite_enstrophy",
    "suite_b1_identity",
    "suite_solver_equivalence",
    "suite_bound_validity",
    "suite_midpoint_order",
    "bound_instance",
    "run_all",
]


@dataclass
class SuiteResult:
    name: str
    passed: bool
    value: float
    threshold: float
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.name}: {self.value:.3e} (threshold {self.threshold:.3e})"


def _grid(n):
    return build_mode_grid(n, n, 2 * np.pi, 2 * np.pi)


def suite_skew_symmetry(n_states=100, N=8, seed=0, assemble: Callable = assemble_convection):
    grid = _grid(N)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_states):
        B = assemble(random_vorticity(grid, rng), grid)
        B = B.toarray() if sp.issparse(B) else np.asarray(B)
        worst = max(worst, np.max(np.abs(B + B.conj().T)) / np.max(np.abs(B)))
    return SuiteResult("skew_symmetry", worst <= 1e-12, worst, 1e-12, {"states": n_states, "grid": N})


def suite_enstrophy(N=8, steps=100, dt=0.01, seed=1):
    grid = _grid(N)
    w0 = random_vorticity(grid, seed, decay=2.0)
    zero = ForcingSpec.zero(grid)
    inviscid = simulate_truth(w0, zero, 0.0, grid, dt, steps * dt)
    e = np.array([enstrophy(s) for s in inviscid.states])
    drift = abs(e[-1] - e[0]) / e[0]
    viscous = simulate_truth(w0, zero, 0.005, grid, dt, steps * dt)
    ev = np.array([enstrophy(s) for s in viscous.states])
    worst_increase = float(np.max(np.diff(ev)))
    ok = drift <= 1e-8 and worst_increase <= 1e-10
    return SuiteResult("enstrophy", ok, drift, 1e-8, {"max_step_increase_viscous": worst_increase})


def suite_b1_identity(n_pairs=100, N=4, seed=2):
    grid = _grid(N)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_pairs):
        w = random_vorticity(grid, rng)
        v = random_vorticity(grid, rng)
        lhs = assemble_B1(w, grid) @ v
        rhs = assemble_convection(v, grid) @ w
        worst = max(worst, np.linalg.norm(lhs - rhs) / max(np.linalg.norm(rhs), 1e-300))
    return SuiteResult("b1_identity", worst <= 1e-10, worst, 1e-10, {"pairs": n_pairs})


def solver_instance(seed=3):
    """N = 25 (grid 4x4) with 9 observed modes and a random Hermitian W."""
    grid = _grid(4)
    modes = [(c, d) for c in (-1, 0, 1) for d in (-1, 0, 1)]
    model = selection_observation(grid, modes)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((grid.N, grid.N)) + 1j * rng.standard_normal((grid.N, grid.N))
    return GainProblem(X + X.conj().T, model.H, 1.0)


def suite_solver_equivalence(seed=3, tol=1e-10):
    prob = solver_instance(seed)
    ps = solve_gain_structured(prob).P
    pd = solve_gain_dense(prob).P
    pi = solve_gain_iterative(prob, tol=1e-12).P
    rel_sd = np.linalg.norm(ps - pd) / np.linalg.norm(pd)
    rel_si = np.linalg.norm(ps - pi) / np.linalg.norm(pd)
    ok = rel_sd <= tol and rel_si <= 1e-8
    return SuiteResult("solver_equivalence", ok, rel_sd, tol, {"structured_vs_iterative": rel_si})


def bound_instance(N=8, nu=0.05, q=1.0, s=2.0, Q=1.0, dt=0.01, T=3.0, seed=4, d=2):
    """Twin run with full exact observation and data inside the ellipsoid.

    Returns ``(run, params, truth, config, feasibility)``.
    """
    grid = _grid(N)
    rng = np.random.default_rng(seed)
    w0 = random_vorticity(grid, rng, decay=1.0)
    # (S^{-1} w0, w0) = 0.95 with S = s I
    w0 *= np.sqrt(0.95 * s) / np.linalg.norm(w0)
    forcing = two_mode_forcing(grid, d)
    # (Q^{-1} f, f) = 0.9 with Q = Q I
    f = forcing.f_at(0.0)
    forcing = ForcingSpec(forcing.D_diag, f * np.sqrt(0.9 * Q) / np.linalg.norm(f), forcing.metadata)
    truth = simulate_truth(w0, forcing, nu, grid, dt, T)
    model = selection_observation(grid, list(zip(*(a.tolist() for a in grid.wavenumbers))))
    model = model.with_noise_matrix(np.zeros((model.M, model.M)))
    obs = generate_observations(truth, model, 0.0, seed)
    A = diffusion_operator(laplacian_spectrum(grid), nu)
    config = FilterConfig(grid, A, model, q, Q=Q, D=forcing.D)
    run = run_filter(obs, config, truth)
    params = ErrorBoundParams.from_operators(A, s, q)
    E = UncertaintyEllipsoid.scalar(grid.N, model.M, s=s, q=Q)
    inside, margin = ellipsoid_contains(E, w0, [forcing.f_at(t) for t in truth.times])
    return run, params, truth, config, {"feasible": inside, "ellipsoid_margin": margin}


def suite_bound_validity(**kw):
    run, params, truth, config, feas = bound_instance(**kw)
    dt = run.metadata["dt"]
    bound = error_bound(params, run.times) + 10 * dt
    gap = float(np.max(run.sigma - bound))
    # last entry has no step after it, hence no diagnostics
    holds = bool(np.all(run.lmi_max_eig[:-1] < -1e-8 * config.q))
    return SuiteResult(
        "bound_validity",
        gap <= 0 and holds and feas["feasible"],
        gap,
        0.0,
        {"lmi_holds_every_step": holds, **feas, "sigma0": float(run.sigma[0]), "C1": params.C1, "C2": params.C2},
    )


def suite_midpoint_order(n=15, dt=0.1, T=1.0, seed=5):
    rng = np.random.default_rng(seed)
    J = rng.standard_normal((n, n)) / np.sqrt(n) - 0.5 * np.eye(n)
    F = rng.standard_normal(n)
    x0 = rng.standard_normal(n)

    def exact(t):
        # x' = J x + F  =>  x(t) = e^{Jt} x0 + J^{-1}(e^{Jt} - I) F
        E = sla.expm(J * t)
        return E @ x0 + np.linalg.solve(J, (E - np.eye(n)) @ F)

    def integrate(h):
        x = x0.astype(complex)
        for _ in range(int(round(T / h))):
            x = midpoint_step(x, J, F, h)
        return x

    errs = [np.linalg.norm(integrate(h) - exact(T)) for h in (dt, dt / 2)]
    ratio = errs[0] / errs[1]
    return SuiteResult("midpoint_order", 3.6 <= ratio <= 4.4, ratio, 4.0, {"errors": errs})


SUITES = {
    "skew_symmetry": suite_skew_symmetry,
    "enstrophy": suite_enstrophy,
    "b1_identity": suite_b1_identity,
    "solver_equivalence": suite_solver_equivalence,
    "bound_validity": suite_bound_validity,
    "midpoint_order": suite_midpoint_order,
}


def run_all(names=None, overrides=None):
    overrides = overrides or {}
    results = []
    for name in names or SUITES:
        t0 = time.perf_counter()
        res = SUITES[name](**overrides.get(name, {}))
        res.seconds = time.perf_counter() - t0
        results.append(res)
    return results


def report(results):
    return {
        "passed": all(r.passed for r in results),
        "suites": [asdict(r) for r in results],
    }
