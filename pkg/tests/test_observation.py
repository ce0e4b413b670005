import numpy as np
import pytest

from vortassim.dynamics import Trajectory
from vortassim.exceptions import ValidationError
from vortassim.observation import (
    UncertaintyEllipsoid,
    ellipsoid_contains,
    generate_observations,
    kernel_observation,
    tensor_observed_modes,
    selection_observation,
)
from vortassim.spectral import physical_grid, random_vorticity

from conftest import square_grid


def _traj(g, n=5, seed=0):
    rng = np.random.default_rng(seed)
    states = np.array([random_vorticity(g, rng) for _ in range(n)])
    return Trajectory(0.1 * np.arange(n), states)


class TestSelection:
    def test_tensor_set_81(self):
        g = square_grid(40)
        m = selection_observation(g, tensor_observed_modes())
        assert m.M == 81
        assert m.H.shape == (81, 1681)

    def test_full(self, grid4):
        c, d = grid4.wavenumbers
        m = selection_observation(grid4, list(zip(c, d)))
        np.testing.assert_array_equal(m.H.T @ m.H, np.eye(grid4.N))

    def test_single_pair(self, grid4):
        m = selection_observation(grid4, [(1, 0), (-1, 0)])
        G = m.H.T @ m.H
        assert m.M == 2
        assert np.count_nonzero(G) == 2
        np.testing.assert_array_equal(np.diag(G), m.HtH_diag())
        np.testing.assert_array_equal(m.H @ m.H.T, np.eye(2))

    def test_rejects_unclosed(self, grid4):
        with pytest.raises(ValidationError, match="conjugate-closed"):
            selection_observation(grid4, [(1, 0)])

    def test_rejects_out_of_band(self, grid4):
        with pytest.raises(ValidationError, match="outside"):
            selection_observation(grid4, [(3, 0), (-3, 0)])

    def test_rejects_duplicates(self, grid4):
        with pytest.raises(ValidationError):
            selection_observation(grid4, [(1, 0), (-1, 0), (1, 0)])


def test_kernel_rows(grid4):
    x, y = physical_grid(grid4, 16)
    k = 2 * np.cos(2 * np.pi * x / grid4.Lx)
    m = kernel_observation(grid4, k[None])
    assert not m.is_selection
    expect = np.zeros(grid4.N)
    expect[[grid4.lin(1, 0), grid4.lin(-1, 0)]] = 1
    np.testing.assert_allclose(m.H[0], expect, atol=1e-14)


class TestGenerate:
    def test_noiseless(self, grid4):
        tr = _traj(grid4)
        m = selection_observation(grid4, [(1, 1), (-1, -1), (0, 2), (0, -2)])
        obs = generate_observations(tr, m, 0.0, 3)
        np.testing.assert_array_equal(obs.y, tr.states[:, m.observed])

    def test_full_noiseless_reconstructs(self, grid4):
        tr = _traj(grid4)
        c, d = grid4.wavenumbers
        m = selection_observation(grid4, list(zip(c, d)))
        obs = generate_observations(tr, m, 0.0)
        np.testing.assert_array_equal(obs.y, tr.states)

    def test_deterministic(self, grid4):
        tr = _traj(grid4)
        m = selection_observation(grid4, [(1, 1), (-1, -1)])
        a = generate_observations(tr, m, 0.2, 11)
        b = generate_observations(tr, m, 0.2, 11)
        c = generate_observations(tr, m, 0.2, 12)
        np.testing.assert_array_equal(a.y, b.y)
        assert not np.array_equal(a.y, c.y)
        assert a.noise["rng"] == "numpy.random.PCG64"

    def test_default_amplitude_bounds(self):
        g = square_grid(40)
        tr = Trajectory(np.arange(3.0), np.zeros((3, g.N), dtype=complex))
        m = selection_observation(g, tensor_observed_modes())
        y = generate_observations(tr, m, 0.2, 0).y
        bound = 0.2 / 41
        assert np.all(np.abs(y.real) < bound) and np.all(np.abs(y.imag) < bound)
        # mirror modes carry conjugate noise
        mirror = [list(m.observed).index(g.N - 1 - k) for k in m.observed]
        np.testing.assert_allclose(y[:, mirror], np.conj(y))

    def test_literal_interval(self, grid4):
        tr = Trajectory(np.arange(200.0), np.zeros((200, grid4.N), dtype=complex))
        m = selection_observation(grid4, [(1, 1), (-1, -1)])
        y = generate_observations(tr, m, 0.2, 0, literal_interval=True).y
        assert y.real.max() > 0.2 / 5


class TestEllipsoid:
    def test_center(self):
        E = UncertaintyEllipsoid.scalar(3, 2)
        inside, margin = ellipsoid_contains(E, np.zeros(3), [np.zeros(3)], [np.zeros(2)])
        assert inside and margin == 1.0

    def test_boundary(self):
        E = UncertaintyEllipsoid.scalar(3, 2)
        inside, margin = ellipsoid_contains(E, np.array([0.6, 0.8, 0]))
        assert inside and margin == pytest.approx(0.0, abs=1e-15)

    def test_outside(self):
        E = UncertaintyEllipsoid.scalar(2, 1, s=1.0, q=0.5)
        inside, margin = ellipsoid_contains(E, np.zeros(2), [np.array([1.0, 0])])
        assert not inside and margin == pytest.approx(-1.0)

    def test_noise_scaling_value_40x40(self):
        # Q = 2/||f|| I gives Q^{-1} f.f = ||f||^3 / 2
        g = square_grid(40)
        f = np.full(g.N, 3.0)
        nf = np.linalg.norm(f)
        E = UncertaintyEllipsoid(np.eye(2), (2 / nf) * np.eye(g.N), np.eye(1))
        _, margin = ellipsoid_contains(UncertaintyEllipsoid(np.eye(g.N), E.Q, np.eye(1)), g.zeros(), [f])
        assert 1 - margin == pytest.approx(nf**3 / 2)

    def test_rejects_indefinite(self):
        with pytest.raises(ValidationError):
            UncertaintyEllipsoid(-np.eye(2), np.eye(2), np.eye(1))
