"""Model-level contracts: rates, channels, detailed balance, frames."""

import math

import numpy as np
import pytest

from qfpme.models import MeasurementEngine, TwoLevelBangBang
from qfpme.operators import SIGMA_Y, SIGMA_Z, ProtocolVariant, protocol_eval


@pytest.fixture
def classical():
    return TwoLevelBangBang(omega=1.0, kappa=0.1, gamma=1.0, lam=0.5, T=1.0)


@pytest.fixture
def engine():
    return MeasurementEngine(omega=1.0, kappa=0.1, gamma=1.0, lam=0.2, g=0.2, T=1.0)


class TestTemperatureResolution:
    def test_requires_exactly_one(self):
        with pytest.raises(ValueError):
            TwoLevelBangBang(omega=1.0, kappa=0.1, gamma=1.0, lam=0.5)
        with pytest.raises(ValueError):
            TwoLevelBangBang(omega=1.0, kappa=0.1, gamma=1.0, lam=0.5, T=1.0, n_B=0.5)

    def test_roundtrip(self):
        a = TwoLevelBangBang(omega=2.0, kappa=0.1, gamma=1.0, lam=0.5, T=0.7)
        b = TwoLevelBangBang(omega=2.0, kappa=0.1, gamma=1.0, lam=0.5, n_B=a.n_B)
        assert b.T == pytest.approx(0.7, rel=1e-12)
        assert a.n_B == pytest.approx(1.0 / math.expm1(2.0 / 0.7), rel=1e-12)

    def test_negative_rate_rejected(self):
        with pytest.raises(ValueError):
            TwoLevelBangBang(omega=1.0, kappa=-0.1, gamma=1.0, lam=0.5, T=1.0)
        with pytest.raises(ValueError):
            MeasurementEngine(omega=1.0, kappa=0.1, gamma=1.0, lam=-0.2, g=0.2, T=1.0)


def test_sigma_filter(classical, engine):
    assert classical.sigma_filter == pytest.approx(1.0 / 4.0)
    assert engine.sigma_filter == pytest.approx(1.0 / 1.6)


class TestClassicalModel:
    def test_measured_observable(self, classical):
        np.testing.assert_allclose(classical.A, np.diag([-1.0, 1.0]))

    def test_flip_rates(self, classical):
        nb = classical.n_B
        # Correct indication (microstate matches sign of outcome): the system
        # sits in the branch ground state, so only absorption can flip it.
        assert classical.flip_rate(1.0, 0.5) == pytest.approx(0.1 * nb)
        assert classical.flip_rate(-1.0, -0.5) == pytest.approx(0.1 * nb)
        # Wrong indication: the system is excited and can emit.
        assert classical.flip_rate(1.0, -0.5) == pytest.approx(0.1 * (nb + 1.0))
        assert classical.flip_rate(-1.0, 0.5) == pytest.approx(0.1 * (nb + 1.0))
        # D = 0 counts as the non-negative branch.
        assert classical.flip_rate(1.0, 0.0) == pytest.approx(0.1 * nb)

    def test_flip_rate_vectorized(self, classical):
        a = np.array([1.0, 1.0, -1.0])
        D = np.array([0.5, -0.5, -0.5])
        rates = classical.flip_rate(a, D)
        nb = classical.n_B
        np.testing.assert_allclose(rates, [0.1 * nb, 0.1 * (nb + 1.0), 0.1 * nb])

    def test_level_energy(self, classical):
        # The level favoured by the detector costs nothing; the other, omega.
        assert classical.level_energy(1.0, 0.5) == 0.0
        assert classical.level_energy(-1.0, 0.5) == 1.0
        assert classical.level_energy(-1.0, -0.5) == 0.0
        assert classical.level_energy(1.0, -0.5) == 1.0

    def test_channel_detailed_balance(self, classical):
        for branch in (True, False):
            emit, absorb = classical.channels(branch)
            rate_emit = np.trace(emit.jump.conj().T @ emit.jump).real
            rate_absorb = np.trace(absorb.jump.conj().T @ absorb.jump).real
            assert rate_absorb / rate_emit == pytest.approx(
                math.exp(-classical.omega / classical.T), rel=1e-12
            )
            assert emit.sigma_k == pytest.approx(classical.omega / classical.T)
            assert absorb.sigma_k == pytest.approx(-classical.omega / classical.T)

    def test_protocol_regions(self, classical):
        proto = classical.protocol()
        assert proto.variant is ProtocolVariant.THRESHOLD
        h_lo, _ = protocol_eval(proto, -1.0)
        h_hi, _ = protocol_eval(proto, 1.0)
        # The branch Hamiltonian charges the level the detector disfavours.
        np.testing.assert_allclose(h_hi, np.diag([1.0 + 0j, 0.0]))
        np.testing.assert_allclose(h_lo, np.diag([0.0, 1.0 + 0j]))


class TestEngineModel:
    def test_linear_protocol(self, engine):
        proto = engine.protocol()
        assert proto.variant is ProtocolVariant.LINEAR
        h, channels = protocol_eval(proto, 0.7)
        np.testing.assert_allclose(h, 0.7 * 0.2 * SIGMA_Y, atol=1e-15)
        assert len(channels) == 2

    def test_channel_rates_and_entropies(self, engine):
        emit, absorb = engine.channels()
        nb = engine.n_B
        assert np.trace(emit.jump.conj().T @ emit.jump).real == pytest.approx(
            0.1 * (nb + 1.0)
        )
        assert np.trace(absorb.jump.conj().T @ absorb.jump).real == pytest.approx(
            0.1 * nb
        )
        assert emit.sigma_k == pytest.approx(1.0)
        assert absorb.sigma_k == pytest.approx(-1.0)
        # The reverse channel of emission is the rescaled absorption operator.
        np.testing.assert_allclose(
            emit.partner().jump,
            math.exp(-0.5) * emit.jump.conj().T,
            atol=1e-15,
        )

    def test_no_bath_when_kappa_zero(self):
        quiet = MeasurementEngine(omega=1.0, kappa=0.0, gamma=1.0, lam=1.0, g=1.0, T=1.0)
        assert quiet.channels() == ()

    def test_thermal_state(self, engine):
        rho = engine.thermal_state()
        assert np.trace(rho).real == pytest.approx(1.0, abs=1e-14)
        # Gibbs ratio between the sigma_z eigenstates.
        assert (rho[0, 0] / rho[1, 1]).real == pytest.approx(
            math.exp(-engine.omega / engine.T), rel=1e-12
        )
        np.testing.assert_allclose(engine.h_td, 0.5 * SIGMA_Z, atol=1e-15)
