import numpy as np
import pytest

from vortassim import filtering
from vortassim.dynamics import ForcingSpec, two_mode_forcing, simulate_truth
from vortassim.exceptions import FilterAborted, NumericalError, ValidationError
from vortassim.filtering import FilterConfig, filter_step, run_filter
from vortassim.gain import GainProblem, assemble_W, solve_gain_structured
from vortassim.observation import ObservationSeries, generate_observations, selection_observation
from vortassim.operators import assemble_B1, assemble_convection, diffusion_operator
from vortassim.spectral import laplacian_spectrum, random_vorticity

from conftest import square_grid


def all_modes(g):
    c, d = g.wavenumbers
    return list(zip(c.tolist(), d.tolist()))


def exact_full_model(g):
    m = selection_observation(g, all_modes(g))
    return m.with_noise_matrix(np.zeros((m.M, m.M)))


def test_zero_gain_is_free_model_step(grid8, rng):
    A = diffusion_operator(laplacian_spectrum(grid8), 0.01)
    m = selection_observation(grid8, [(1, 0), (-1, 0)])
    w = random_vorticity(grid8, rng)
    y = rng.standard_normal(2)
    x, fix = filter_step(w, np.zeros((grid8.N, grid8.N)), y, y, A, m, 0.05, grid8)
    free = simulate_truth(w, ForcingSpec.zero(grid8), 0.01, grid8, 0.05, 0.05)
    np.testing.assert_allclose(x, free.states[1], atol=1e-14)
    assert fix < 1e-14


def test_exact_tracking_from_truth(grid8):
    nu = 0.01
    w0 = random_vorticity(grid8, 4, decay=1.0)
    forcing = ForcingSpec.zero(grid8)
    truth = simulate_truth(w0, forcing, nu, grid8, 0.02, 1.0)
    model = exact_full_model(grid8)
    obs = generate_observations(truth, model, 0.0)
    A = diffusion_operator(laplacian_spectrum(grid8), nu)
    run = run_filter(obs, FilterConfig(grid8, A, model, 1.0), truth, omega_hat0=w0)
    assert len(run.times) == 51
    assert np.nanmax(run.rel_error) <= 1e-8
    assert run.symmetry_correction.max() <= 1e-9


def test_zero_data_fixed_point(grid4):
    A = diffusion_operator(laplacian_spectrum(grid4), 0.1)
    m = selection_observation(grid4, [(1, 1), (-1, -1)])
    obs = ObservationSeries(0.1 * np.arange(11), np.zeros((11, 2), dtype=complex), m.observed)
    run = run_filter(obs, FilterConfig(grid4, A, m, 1.0), None)
    assert np.all(run.estimates == 0)
    assert not run.has_truth


def test_full_noiseless_observation_converges(grid8):
    nu = 0.01
    # the filter does not see the forcing, so the truth runs unforced here
    truth = simulate_truth(random_vorticity(grid8, 5), ForcingSpec.zero(grid8), nu, grid8, 0.02, 2.0)
    model = exact_full_model(grid8)
    obs = generate_observations(truth, model, 0.0)
    A = diffusion_operator(laplacian_spectrum(grid8), nu)
    run = run_filter(obs, FilterConfig(grid8, A, model, 20.0, Q=1.0, D=two_mode_forcing(grid8, 2).D), truth)
    assert run.rel_error[0] == pytest.approx(1.0)
    assert run.rel_error[-1] < 1e-3
    assert np.all(np.diff(run.sigma) <= 1e-12)


def test_zero_gain_control_does_not_decay(grid8):
    nu = 0.01
    truth = simulate_truth(random_vorticity(grid8, 6), ForcingSpec.zero(grid8), nu, grid8, 0.02, 1.0)
    model = selection_observation(grid8, [(1, 0), (-1, 0)])
    obs = generate_observations(truth, model, 0.0)
    A = diffusion_operator(laplacian_spectrum(grid8), nu)
    run = run_filter(obs, FilterConfig(grid8, A, model, 1.0, assimilate=False), truth)
    np.testing.assert_allclose(run.rel_error, 1.0)
    assert np.all(np.isnan(run.detect_max_real))


def test_diagnostics_cadence_and_refresh(grid8):
    truth = simulate_truth(random_vorticity(grid8, 7), ForcingSpec.zero(grid8), 0.01, grid8, 0.02, 0.2)
    model = selection_observation(grid8, [(1, 0), (-1, 0), (0, 1), (0, -1)])
    obs = generate_observations(truth, model, 0.1, 1)
    A = diffusion_operator(laplacian_spectrum(grid8), 0.01)
    run = run_filter(obs, FilterConfig(grid8, A, model, 1.0, gain_refresh=2, diagnostics_every=4), truth)
    checked = np.flatnonzero(~np.isnan(run.detect_max_real)).tolist()
    assert checked == [0, 4, 8]
    assert np.flatnonzero(~np.isnan(run.gain_residual)).tolist() == [0, 2, 4, 6, 8]
    np.testing.assert_array_equal(run.lmi_max_eig[checked], run.detect_max_real[checked])


def test_error_energy_identity(rng):
    # finite-difference d(sigma)/dt against 2 Re(e, e_dot) along the filter;
    # with J frozen at the start of each step the agreement improves at least linearly in dt
    g = square_grid(6)
    nu, q, Q = 0.05, 5.0, 1.0
    A = diffusion_operator(laplacian_spectrum(g), nu)
    forcing = two_mode_forcing(g, 2)
    w0 = random_vorticity(g, 1, decay=1.0)
    m = selection_observation(g, [(c, d) for c in (-1, 0, 1) for d in (-1, 0, 1)])
    m = m.with_noise_matrix(np.zeros((m.M, m.M)))
    gaps = []
    for dt in (0.02, 0.01, 0.005):
        truth = simulate_truth(w0, forcing, nu, g, dt, 0.4)
        cfg = FilterConfig(g, A, m, q, Q=Q, D=forcing.D, q_slack=0.0, diagnostics_every=0)
        run = run_filter(generate_observations(truth, m, 0.0), cfg, truth)
        k = len(run.times) // 2
        fd = (run.sigma[k + 1] - run.sigma[k - 1]) / (2 * dt)
        wh, w = run.estimates[k], truth.states[k]
        e = w - wh
        P = solve_gain_structured(GainProblem(assemble_W(wh, forcing.D, Q, q, g), m.H, q)).P
        e_dot = (assemble_convection(w, g) @ e + assemble_B1(wh, g) @ e + A @ e + forcing.Df(0.0)
                 - P @ m.H.T @ (m.H @ e))
        gaps.append(abs(fd - 2 * np.vdot(e, e_dot).real))
    assert gaps[0] / gaps[1] >= 1.8 and gaps[1] / gaps[2] >= 1.8
    assert gaps[-1] < 5e-3


def test_abort_carries_partial_run(grid4, monkeypatch):
    real = filtering.midpoint_step

    def flaky(x, J, F, dt, *, step=None):
        if step == 3:
            raise NumericalError("forced failure", step=step, dt=dt)
        return real(x, J, F, dt, step=step)

    monkeypatch.setattr(filtering, "midpoint_step", flaky)
    A = diffusion_operator(laplacian_spectrum(grid4), 0.1)
    m = selection_observation(grid4, [(1, 1), (-1, -1)])
    obs = ObservationSeries(0.1 * np.arange(8), np.zeros((8, 2), dtype=complex), m.observed)
    with pytest.raises(FilterAborted) as info:
        run_filter(obs, FilterConfig(grid4, A, m, 1.0), None)
    exc = info.value
    assert exc.step == 3
    assert len(exc.partial.times) == 4
    assert exc.partial.metadata["failed_step"] == 3


class TestValidation:
    def test_shape_mismatch(self, grid4):
        A = diffusion_operator(laplacian_spectrum(grid4), 0.1)
        m = selection_observation(grid4, [(1, 1), (-1, -1)])
        obs = ObservationSeries(np.arange(3.0), np.zeros((3, 4)), m.observed)
        with pytest.raises(ValidationError):
            run_filter(obs, FilterConfig(grid4, A, m, 1.0))

    def test_uneven_times(self, grid4):
        A = diffusion_operator(laplacian_spectrum(grid4), 0.1)
        m = selection_observation(grid4, [(1, 1), (-1, -1)])
        obs = ObservationSeries(np.array([0.0, 0.1, 0.3]), np.zeros((3, 2)), m.observed)
        with pytest.raises(ValidationError):
            run_filter(obs, FilterConfig(grid4, A, m, 1.0))

    @pytest.mark.parametrize("kw", [{"q": 0.0}, {"gain_refresh": 0}, {"diagnostics_every": -1}])
    def test_config(self, grid4, kw):
        A = diffusion_operator(laplacian_spectrum(grid4), 0.1)
        m = selection_observation(grid4, [(1, 1), (-1, -1)])
        args = {"q": 1.0, **kw}
        with pytest.raises(ValidationError):
            FilterConfig(grid4, A, m, **args)
