"""Energy bookkeeping: frames, per-step closure, ensemble rates."""

import numpy as np
import pytest

from qfpme.models import MeasurementEngine, TwoLevelBangBang
from qfpme.thermo import (
    EnergyFrame,
    FrameChoice,
    ThermoLedger,
    classical_ledger_increments,
    ensemble_thermo,
    ledger_update,
)
from qfpme.trajectory import RngStream, simulate_classical


@pytest.fixture(scope="module")
def classical():
    return TwoLevelBangBang(omega=1.0, kappa=0.1, gamma=1.0, lam=1.0, T=1.0)


@pytest.fixture(scope="module")
def engine():
    return MeasurementEngine(omega=1.0, kappa=0.1, gamma=1.0, lam=0.2, g=0.2, T=1.0)


def diag_state(a):
    """Classical microstate a = +-1 as a diagonal density matrix."""
    return np.diag([1.0 + 0j, 0.0]) if a < 0 else np.diag([0.0, 1.0 + 0j])


class TestEnergyFrame:
    def test_bare_frame_uses_protocol_hamiltonian(self, classical):
        frame = EnergyFrame.bare()
        np.testing.assert_allclose(
            frame.u_operator(classical, 0.5), np.diag([1.0 + 0j, 0.0])
        )
        np.testing.assert_allclose(
            frame.u_operator(classical, -0.5), np.diag([0.0, 1.0 + 0j])
        )

    def test_thermodynamic_frame_verifies_generator(self, engine):
        frame = EnergyFrame.thermodynamic(engine)
        assert frame.choice is FrameChoice.THERMODYNAMIC
        np.testing.assert_allclose(frame.u_operator(engine, 2.3), engine.h_td)

    def test_thermodynamic_frame_restricted_to_engine(self, classical, engine):
        frame = EnergyFrame.thermodynamic(engine)
        with pytest.raises(ValueError):
            ledger_update(
                ThermoLedger(), diag_state(1), diag_state(1), 0.1, 0.2,
                classical, frame, 0.01,
            )


class TestClassicalLedger:
    def test_work_is_feedback_heat_is_jump(self, classical):
        frame = EnergyFrame.bare()
        # Feedback switch at fixed microstate: pure work.
        ledger = ledger_update(
            ThermoLedger(), diag_state(1), diag_state(1), 0.5, -0.5,
            classical, frame, 0.01,
        )
        assert ledger.work == pytest.approx(1.0)
        assert ledger.heat == pytest.approx(0.0)
        # Jump at fixed outcome: pure heat.
        ledger = ledger_update(
            ThermoLedger(), diag_state(1), diag_state(-1), 0.5, 0.5,
            classical, frame, 0.01,
        )
        assert ledger.work == pytest.approx(0.0)
        assert ledger.heat == pytest.approx(1.0)
        assert ledger.meas_energy == 0.0

    def test_pathwise_closure_on_sampled_batch(self, classical):
        rec = simulate_classical(classical, 0.01, 300, RngStream(41, 0), 200)
        work, heat, meas, delta = classical_ledger_increments(
            rec.a_path, rec.D_path, classical
        )
        np.testing.assert_allclose(work + heat + meas, delta, atol=1e-12)
        np.testing.assert_array_equal(meas, 0.0)

    def test_vectorized_matches_stepwise(self, classical):
        rec = simulate_classical(classical, 0.01, 40, RngStream(42, 0), 3)
        work, heat, _, _ = classical_ledger_increments(
            rec.a_path, rec.D_path, classical
        )
        frame = EnergyFrame.bare()
        for i in range(3):
            ledger = ThermoLedger().log_increments()
            for n in range(40):
                # The sampler updates the outcome first (work at the old
                # microstate), then jumps at the updated outcome (heat).
                ledger_update(
                    ledger, diag_state(rec.a_path[i, n]), diag_state(rec.a_path[i, n]),
                    rec.D_path[i, n], rec.D_path[i, n + 1], classical, frame, 0.01,
                )
                ledger_update(
                    ledger, diag_state(rec.a_path[i, n]),
                    diag_state(rec.a_path[i, n + 1]),
                    rec.D_path[i, n + 1], rec.D_path[i, n + 1], classical, frame, 0.01,
                )
            inc = np.asarray(ledger.increments)
            steps = inc.reshape(40, 2, 4).sum(axis=1)
            np.testing.assert_allclose(steps[:, 0], work[i], atol=1e-12)
            np.testing.assert_allclose(steps[:, 1], heat[i], atol=1e-12)


class TestQuantumLedger:
    def test_heat_channel_matches_dissipator(self, engine):
        frame = EnergyFrame.thermodynamic(engine)
        rho_e = np.diag([1.0 + 0j, 0.0])  # excited state
        dt = 0.01
        ledger = ledger_update(
            ThermoLedger(), rho_e, rho_e, 0.3, 0.3, engine, frame, dt
        )
        # Only emission acts on the excited state: it removes one quantum at
        # rate kappa (n_B + 1).
        rate = engine.kappa * (engine.n_B + 1.0)
        assert ledger.heat == pytest.approx(-engine.omega * rate * dt, rel=1e-12)

    def test_pathwise_closure_random_steps(self, engine):
        rng = np.random.default_rng(2)
        frame_td = EnergyFrame.thermodynamic(engine)
        frame_bare = EnergyFrame.bare()
        for frame in (frame_td, frame_bare):
            ledger = ThermoLedger().log_increments()
            rho = engine.thermal_state()
            D = 0.4
            for _ in range(50):
                step = rng.normal(scale=0.05, size=(2, 2)) + 1j * rng.normal(
                    scale=0.05, size=(2, 2)
                )
                step = 0.5 * (step + step.conj().T)
                rho_new = rho + step - np.trace(step).real * rho
                rho_new = 0.5 * (rho_new + rho_new.conj().T)
                D_new = D + rng.normal(scale=0.1)
                ledger_update(ledger, rho, rho_new, D, D_new, engine, frame, 0.01)
                rho, D = rho_new, D_new
            for work, heat, meas, delta in ledger.increments:
                assert abs(work + heat + meas - delta) <= 1e-12


class TestEnsembleThermo:
    def _ledger(self, rows):
        ledger = ThermoLedger().log_increments()
        for row in rows:
            ledger.increments.append(row)
        return ledger

    def test_windowed_rates(self):
        l1 = self._ledger([(1.0, 2.0, 3.0, 6.0)] * 10)
        l2 = self._ledger([(3.0, 0.0, 1.0, 4.0)] * 10)
        p, j, em, (sp, sj, sem) = ensemble_thermo([l1, l2], (5, 10), 0.1)
        assert p == pytest.approx(20.0)  # mean work rate (1+3)/2 / 0.1
        assert j == pytest.approx(10.0)
        assert em == pytest.approx(20.0)
        assert sp == pytest.approx(10.0)  # std of {10, 30} over sqrt(2)

    def test_requires_two_ledgers(self):
        with pytest.raises(ValueError):
            ensemble_thermo([self._ledger([(0.0,) * 4])], (0, 1), 0.1)

    def test_window_bounds_checked(self):
        ledgers = [self._ledger([(0.0,) * 4] * 3) for _ in range(2)]
        with pytest.raises(ValueError):
            ensemble_thermo(ledgers, (0, 5), 0.1)
