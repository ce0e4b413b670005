import numpy as np
import pytest
import scipy.sparse as sp

from vortassim.diagnostics import (
    ErrorBoundParams,
    check_detectability,
    check_lmi,
    error_bound,
    max_eigenvalue,
    riccati_residual,
)
from vortassim.dynamics import two_mode_forcing
from vortassim.gain import GainProblem, assemble_W, lyapunov_map, solve_gain_structured
from vortassim.observation import selection_observation
from vortassim.operators import assemble_B1, diffusion_operator
from vortassim.spectral import laplacian_spectrum, random_vorticity

from conftest import square_grid


class TestLMI:
    def test_diagonal_case(self, grid4):
        q, kappa = 1.0, 0.8
        res = check_lmi(kappa * np.eye(grid4.N), grid4.zeros(), None, 0.0, q, np.eye(grid4.N), grid4)
        assert res.holds
        assert res.max_eigenvalue == pytest.approx(q - 2 * kappa)

    def test_zero_gain_fails(self, grid4, rng):
        H = selection_observation(grid4, [(1, 0), (-1, 0)]).H
        res = check_lmi(np.zeros((grid4.N, grid4.N)), random_vorticity(grid4, rng), None, 0.0, 0.5, H, grid4)
        assert not res.holds and res.max_eigenvalue >= 0.5

    def test_full_observation_boundary(self, grid4, rng):
        w = random_vorticity(grid4, rng)
        q = 2.0
        H = np.eye(grid4.N)
        W = assemble_W(w, None, 0.0, q, grid4)
        exact = solve_gain_structured(GainProblem(W, H, q)).P
        res = check_lmi(exact, w, None, 0.0, q, H, grid4)
        assert res.max_eigenvalue == pytest.approx(0.0, abs=1e-12) and not res.holds
        slack = 1e-6
        shifted = solve_gain_structured(GainProblem(W + q * slack * np.eye(grid4.N), H, q)).P
        res = check_lmi(shifted, w, None, 0.0, q, H, grid4)
        assert res.holds
        assert res.max_eigenvalue == pytest.approx(-q * slack, rel=1e-6)


class TestRiccati:
    def test_reduces_to_lmi(self, grid4, rng):
        w = random_vorticity(grid4, rng)
        H = selection_observation(grid4, [(1, 1), (-1, -1)]).H
        P = np.eye(grid4.N)
        a = riccati_residual(P, w, None, 0.0, 1.0, H, np.zeros((2, 2)), np.eye(2), grid4)
        b = check_lmi(P, w, None, 0.0, 1.0, H, grid4)
        assert a.max_eigenvalue == pytest.approx(b.max_eigenvalue, abs=1e-13)

    @pytest.mark.parametrize("p,inside", [(1.0, True), (0.2, False), (1.8, False), (0.3, True)])
    def test_scalar_quadratic(self, p, inside):
        # -2p + r p^2 + q < 0 on (1 - sqrt(1 - rq), 1 + sqrt(1 - rq)) / r with r=1, q=0.5
        g = square_grid(2)
        n = g.N
        res = riccati_residual(p * np.eye(n), g.zeros(), None, 0.0, 0.5, np.eye(n), np.eye(n), np.eye(n), g)
        assert res.max_eigenvalue == pytest.approx(-2 * p + p**2 + 0.5)
        assert res.holds is inside

    def test_random_instance(self, grid4, rng):
        N = grid4.N
        w = random_vorticity(grid4, rng)
        H = selection_observation(grid4, [(1, 1), (-1, -1), (0, 1), (0, -1)]).H
        X = rng.standard_normal((N, N))
        P = X + X.T
        F = rng.standard_normal((4, 4))
        R = np.diag(rng.uniform(0.5, 1.5, 4))
        D = two_mode_forcing(grid4, 1).D
        B1 = assemble_B1(w, grid4)
        Dd = D.toarray()
        M = B1 + B1.conj().T + 0.7 * Dd @ Dd.T - P @ H.T @ H - H.T @ H @ P + P @ H.T @ F @ R @ F.T @ H @ P
        M = M + 0.3 * np.eye(N)
        expect = np.linalg.eigvalsh(0.5 * (M + M.conj().T))[-1]
        got = riccati_residual(P, w, D, 0.7, 0.3, H, F, R, grid4)
        assert got.max_eigenvalue == pytest.approx(expect, rel=1e-10)


class TestDetectability:
    def test_full_observation_zero_residual(self, grid4, rng):
        W = assemble_W(random_vorticity(grid4, rng), None, 0.0, 1.0, grid4)
        prob = GainProblem(W, np.eye(grid4.N), 1.0)
        rep = check_detectability(prob, solve_gain_structured(prob))
        assert abs(rep.max_real) <= 1e-12
        assert rep.label == "fail"
        assert np.allclose(rep.residual, 0)

    def test_nothing_observed(self, grid4):
        prob = GainProblem(0.7 * np.eye(grid4.N), np.zeros((0, grid4.N)), 0.7)
        rep = check_detectability(prob, solve_gain_structured(prob))
        assert rep.max_real == pytest.approx(0.7)
        assert not rep.verdict

    def test_shortcut_matches_generic(self, grid8, rng):
        H = selection_observation(grid8, [(c, d) for c in (-1, 0, 1) for d in (-2, 2)]).H
        W = assemble_W(random_vorticity(grid8, rng), two_mode_forcing(grid8, 2).D, 0.1, 0.2, grid8)
        prob = GainProblem(W, H, 0.2)
        gain = solve_gain_structured(prob)
        rep = check_detectability(prob, gain)
        generic = W - lyapunov_map(gain.P, H)
        assert rep.max_real == pytest.approx(np.linalg.eigvalsh(generic)[-1], abs=1e-12)
        np.testing.assert_allclose(rep.residual, generic, atol=1e-13)

    def test_exact_gain_sits_on_boundary(self, grid4):
        # the observed block of the residual vanishes for the exact gain
        W = -np.eye(grid4.N)
        H = selection_observation(grid4, [(1, 0), (-1, 0)]).H
        prob = GainProblem(W, H, 0.1)
        rep = check_detectability(prob, solve_gain_structured(prob))
        assert rep.unobserved_max == pytest.approx(-1.0)
        assert rep.max_real == 0.0 and not rep.verdict

    def test_shifted_gain_can_pass(self, grid4):
        W = -np.eye(grid4.N)
        H = selection_observation(grid4, [(1, 0), (-1, 0)]).H
        prob = GainProblem(W, H, 0.1)
        shifted = GainProblem(W + 1e-6 * 0.1 * np.eye(grid4.N), H, 0.1)
        rep = check_detectability(prob, solve_gain_structured(shifted))
        assert rep.verdict
        assert rep.max_real == pytest.approx(-1e-7)


def test_max_eigenvalue_large_path(rng):
    X = rng.standard_normal((450, 450))
    M = X + X.T
    assert max_eigenvalue(M) == pytest.approx(np.linalg.eigvalsh(M)[-1], rel=1e-9)


class TestErrorBound:
    def test_values(self):
        p = ErrorBoundParams(q=1.0, lamA=0.5, lamS=3.0)
        assert error_bound(p, 0.0) == pytest.approx(3.0)
        assert error_bound(p, 1.0) == pytest.approx(0.5 + 2.5 * np.exp(-2))
        assert error_bound(p, 1e3) == pytest.approx(p.C1)

    def test_negative_time(self):
        with pytest.raises(ValueError):
            error_bound(ErrorBoundParams(1.0, 1.0, 1.0), -1.0)

    def test_from_operators(self, grid4):
        A = diffusion_operator(laplacian_spectrum(grid4), 0.1)
        p = ErrorBoundParams.from_operators(A, 2.0, 1.0)
        assert p.lamA == pytest.approx(0.1)
        assert p.lamS == 2.0
        assert ErrorBoundParams.from_operators(sp.diags_array(np.zeros(3)), np.diag([1.0, 4.0]), 1.0).lamS == 4.0
