"""Basis identities, steady-state solutions, and frozen reference energetics."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

import _oracles
from qfpme.spectral import (
    HermiteBasis,
    classical_energetics,
    classical_error_probability,
    classical_mean_square_error,
    engine_energetics,
    log_double_factorial,
    reconstruct,
    solve_classical_two_level,
    solve_engine,
)

N_B = _oracles.N_B


@pytest.fixture(scope="module")
def classical_state():
    # gamma/kappa = 10, lam/gamma = 0.5, omega = T = 1.
    return solve_classical_two_level(1.0, 0.1, 1.0, 0.5, N_B)


@pytest.fixture(scope="module")
def engine_state():
    # kappa = 0, lam = gamma = g = 1, omega = T = 1.
    return solve_engine(1.0, 0.0, 1.0, 1.0, 1.0, N_B)


class TestHermiteBasis:
    def test_matches_probabilists_polynomials(self):
        sigma = 0.37
        basis = HermiteBasis(sigma, 8)
        D = np.linspace(-2.0, 2.0, 11)
        for n in range(9):
            scaled = sigma ** (n / 2.0) * np.polynomial.hermite_e.hermeval(
                D / math.sqrt(sigma), [0.0] * n + [1.0]
            )
            np.testing.assert_allclose(basis.eval_He(n, D), scaled, rtol=1e-12, atol=1e-12)

    def test_g_functions_consistent(self):
        sigma = 0.2
        basis = HermiteBasis(sigma, 6)
        D = np.linspace(-3.0, 3.0, 7)
        g_hat = basis.eval_G_hat(D)
        for n in range(7):
            norm = math.exp(0.5 * (n * math.log(sigma) + math.lgamma(n + 1)))
            np.testing.assert_allclose(
                g_hat[n], basis.eval_G(n, D) / norm, rtol=1e-12, atol=1e-14
            )

    def test_weight_normalization(self):
        basis = HermiteBasis(0.5, 0)
        val, _ = quad(lambda d: basis.eval_G(0, np.array([d]))[0], -20, 20)
        assert val == pytest.approx(1.0, rel=1e-10)

    @pytest.mark.parametrize("n,m", [(0, 0), (3, 3), (0, 1), (2, 5), (1, 4), (2, 4)])
    def test_halfline_overlap_against_quadrature(self, n, m):
        sigma = 0.6
        basis = HermiteBasis(sigma, 6)

        def integrand(d):
            arr = np.array([d])
            return basis.eval_He(n, arr)[0] * basis.eval_He(m, arr)[0] * basis.eval_G(0, arr)[0]

        val, _ = quad(integrand, 0.0, 25.0, limit=200)
        assert basis.halfline_overlap(n, m) == pytest.approx(val, rel=1e-9, abs=1e-12)

    def test_order_bound_enforced(self):
        basis = HermiteBasis(1.0, 3)
        with pytest.raises(ValueError):
            basis.eval_He(4, np.array([0.0]))

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            HermiteBasis(0.0, 3)
        with pytest.raises(ValueError):
            HermiteBasis(1.0, -1)


def test_log_double_factorial():
    assert log_double_factorial(0) == 0.0
    assert log_double_factorial(5) == pytest.approx(math.log(15.0), rel=1e-12)
    assert log_double_factorial(6) == pytest.approx(math.log(48.0), rel=1e-12)


class TestClassicalSolution:
    def test_input_validation(self):
        with pytest.raises(ValueError):
            solve_classical_two_level(1.0, 0.1, 1.0, 0.5, N_B, L=1)
        with pytest.raises(ValueError):
            solve_classical_two_level(1.0, -0.1, 1.0, 0.5, N_B)

    def test_normalized_density(self, classical_state):
        D = np.linspace(-8.0, 8.0, 4001)
        rec = reconstruct(classical_state, D)
        total = np.trapezoid(rec["p0"] + rec["p1"], D)
        assert total == pytest.approx(1.0, abs=1e-8)
        assert (rec["p0"] + rec["p1"]).min() > -1e-10

    def test_mirror_symmetry(self, classical_state):
        # Swapping both the microstate and the outcome sign is a symmetry.
        D = np.linspace(-3.0, 3.0, 61)
        rec = reconstruct(classical_state, D)
        np.testing.assert_allclose(rec["p0"], rec["p1"][::-1], atol=1e-10)

    def test_error_probability_is_wrong_sign_mass(self, classical_state):
        # eta must equal the integral of the wrong-branch populations.
        D = np.linspace(0.0, 9.0, 3001)
        rec = reconstruct(classical_state, D)
        eta_quad = 2.0 * np.trapezoid(rec["p0"], D)  # doubled by symmetry
        assert classical_error_probability(classical_state) == pytest.approx(
            eta_quad, abs=1e-6
        )

    def test_mean_square_error_matches_quadrature(self, classical_state):
        D = np.linspace(-9.0, 9.0, 4001)
        rec = reconstruct(classical_state, D)
        mse_quad = np.trapezoid(
            (D - 1.0) ** 2 * rec["p1"] + (D + 1.0) ** 2 * rec["p0"], D
        )
        assert classical_mean_square_error(classical_state) == pytest.approx(
            mse_quad, rel=1e-8
        )

    @pytest.mark.parametrize("ratio,lam_over_gamma", sorted(_oracles.CLASSICAL_POWER))
    def test_power_reference_values(self, ratio, lam_over_gamma):
        kappa = 1.0 / ratio
        state = solve_classical_two_level(1.0, kappa, 1.0, lam_over_gamma, N_B)
        power, heat, eta = classical_energetics(
            state, 1.0, kappa, 1.0, lam_over_gamma, N_B
        )
        assert -power / kappa == pytest.approx(
            _oracles.CLASSICAL_POWER[(ratio, lam_over_gamma)], abs=2e-6
        )
        assert power + heat == pytest.approx(0.0, abs=1e-14)
        key = (ratio, lam_over_gamma)
        if key in _oracles.CLASSICAL_ETA:
            assert eta == pytest.approx(_oracles.CLASSICAL_ETA[key], rel=1e-4)


class TestEngineSolution:
    def test_input_validation(self):
        with pytest.raises(ValueError):
            solve_engine(1.0, 0.1, 1.0, 0.5, 0.0, N_B)

    def test_normalized_density_and_parity(self, engine_state):
        D = np.linspace(-8.0, 8.0, 4001)
        rec = reconstruct(engine_state, D)
        assert np.trapezoid(rec["P"], D) == pytest.approx(1.0, abs=1e-8)
        assert rec["P"].min() > -1e-10
        # P and a_z are even in D; a_x is odd; a_y vanishes identically.
        np.testing.assert_allclose(rec["P"], rec["P"][::-1], atol=1e-10)
        np.testing.assert_allclose(rec["a_z"], rec["a_z"][::-1], atol=1e-8)
        np.testing.assert_allclose(rec["a_x"], -rec["a_x"][::-1], atol=1e-8)
        np.testing.assert_allclose(rec["a_y"], 0.0, atol=1e-12)

    def test_bloch_vector_physical(self, engine_state):
        D = np.linspace(-3.0, 3.0, 121)
        rec = reconstruct(engine_state, D)
        norm = np.sqrt(rec["a_x"] ** 2 + rec["a_y"] ** 2 + rec["a_z"] ** 2)
        assert norm.max() <= 1.0 + 1e-9

    @pytest.mark.parametrize(
        "kappa,targets",
        [
            (0.0, _oracles.ENGINE_POWER_KAPPA0),
            (1.0 / 3.0, _oracles.ENGINE_POWER_KAPPA_THIRD),
        ],
        ids=["kappa0", "kappa_third"],
    )
    def test_power_reference_values(self, kappa, targets):
        for lam, target in zip(_oracles.ENGINE_LAM_SWEEP[:5], targets[:5]):
            state = solve_engine(1.0, kappa, 1.0, lam, 1.0, N_B)
            power, heat, e_m = engine_energetics(state, 1.0, kappa, 1.0, lam, 1.0, N_B)
            assert power == pytest.approx(target, abs=2e-6)
            assert power + heat + e_m == pytest.approx(0.0, abs=1e-10)
