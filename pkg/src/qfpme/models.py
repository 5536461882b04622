"""The two reference models: a classical two-level system under threshold
(bang-bang) feedback, and a qubit engine driven by continuous measurement.

Classical model (basis |0>, |1>, measured observable A = |1><1| - |0><0|):
the sign of D selects which level is the energetic ground state, so a correct
detector reading always sees the system relaxed at zero energy.

Engine model (rotating frame, energy basis |e>, |g>): H(D) = g*D*sigma_y,
measured observable A = sigma_x, thermodynamic Hamiltonian (omega/2)*sigma_z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .operators import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    FeedbackProtocol,
    LindbladChannel,
    ProtocolVariant,
    ThresholdRegion,
    bose_einstein,
)

# Classical two-level basis (|0>, |1>): A = diag(-1, +1), jump |0><1|.
CL_A = np.diag([-1.0 + 0j, 1.0 + 0j])
CL_SIGMA = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)  # |0><1|
CL_PROJ_0 = np.diag([1.0 + 0j, 0.0])
CL_PROJ_1 = np.diag([0.0, 1.0 + 0j])


def _resolve_temperature(omega: float, T: Optional[float], n_B: Optional[float]) -> Tuple[float, float]:
    """Return (T, n_B) given exactly one of them."""
    if (T is None) == (n_B is None):
        raise ValueError("specify exactly one of T or n_B")
    if T is None:
        T = omega / math.log(1.0 / n_B + 1.0)
    else:
        n_B = bose_einstein(omega, T)
    return T, n_B


@dataclass(frozen=True)
class TwoLevelBangBang:
    """Classical two-level system with threshold feedback swapping the levels."""

    omega: float
    kappa: float
    gamma: float
    lam: float
    T: Optional[float] = None
    n_B: Optional[float] = None

    def __post_init__(self):
        T, n_B = _resolve_temperature(self.omega, self.T, self.n_B)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "n_B", n_B)
        for name in ("omega", "kappa", "gamma", "lam"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def sigma_filter(self) -> float:
        """Stationary detector variance gamma/(8 lambda)."""
        return self.gamma / (8.0 * self.lam)

    @property
    def A(self) -> np.ndarray:
        return CL_A

    def channels(self, D_nonneg: bool) -> Tuple[LindbladChannel, ...]:
        """Bath channels for the D >= 0 (or D < 0) feedback branch.

        In each branch, the level favoured by the detector is the ground
        state; emission carries entropy +omega/T into the bath.
        """
        w = self.omega / self.T
        emit = math.sqrt(self.kappa * (self.n_B + 1.0))
        absorb = math.sqrt(self.kappa * self.n_B)
        if D_nonneg:
            # |1> is ground: emission |0> -> |1> via sigma^dag, absorption via sigma.
            return (
                LindbladChannel(jump=emit * CL_SIGMA.conj().T, sigma_k=w, partner_index=1),
                LindbladChannel(jump=absorb * CL_SIGMA, sigma_k=-w, partner_index=0),
            )
        return (
            LindbladChannel(jump=emit * CL_SIGMA, sigma_k=w, partner_index=1),
            LindbladChannel(jump=absorb * CL_SIGMA.conj().T, sigma_k=-w, partner_index=0),
        )

    def hamiltonian(self, D_nonneg: bool) -> np.ndarray:
        if D_nonneg:
            return self.omega * CL_PROJ_0
        return self.omega * CL_PROJ_1

    def protocol(self) -> FeedbackProtocol:
        return FeedbackProtocol(
            variant=ProtocolVariant.THRESHOLD,
            regions=(
                ThresholdRegion(-np.inf, 0.0, self.hamiltonian(False), self.channels(False)),
                ThresholdRegion(0.0, np.inf, self.hamiltonian(True), self.channels(True)),
            ),
        )

    def level_energy(self, a: np.ndarray, D: np.ndarray) -> np.ndarray:
        """Energy of microstate a in {-1,+1} when the outcome is D (vectorized)."""
        s = np.where(np.asarray(D) >= 0.0, 1.0, -1.0)
        return np.where(np.asarray(a) * s < 0.0, self.omega, 0.0)

    def flip_rate(self, a: np.ndarray, D: np.ndarray) -> np.ndarray:
        """Rate of the jump a -> -a given the sign of D (vectorized)."""
        s = np.where(np.asarray(D) >= 0.0, 1.0, -1.0)
        ground = np.asarray(a) * s > 0.0
        return np.where(ground, self.kappa * self.n_B, self.kappa * (self.n_B + 1.0))


@dataclass(frozen=True)
class MeasurementEngine:
    """Qubit engine fueled by measurement backaction, in the rotating frame."""

    omega: float
    kappa: float
    gamma: float
    lam: float
    g: float
    T: Optional[float] = None
    n_B: Optional[float] = None

    def __post_init__(self):
        T, n_B = _resolve_temperature(self.omega, self.T, self.n_B)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "n_B", n_B)
        for name in ("omega", "kappa", "gamma", "lam", "g"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @property
    def sigma_filter(self) -> float:
        return self.gamma / (8.0 * self.lam)

    @property
    def A(self) -> np.ndarray:
        return SIGMA_X

    @property
    def h_td(self) -> np.ndarray:
        return 0.5 * self.omega * SIGMA_Z

    def channels(self) -> Tuple[LindbladChannel, ...]:
        w = self.omega / self.T
        out = []
        if self.kappa > 0:
            emit = math.sqrt(self.kappa * (self.n_B + 1.0))
            absorb = math.sqrt(self.kappa * self.n_B)
            out.append(LindbladChannel(jump=emit * SIGMA_MINUS, sigma_k=w, partner_index=1))
            if self.n_B > 0:
                out.append(LindbladChannel(jump=absorb * SIGMA_PLUS, sigma_k=-w, partner_index=0))
        return tuple(out)

    def protocol(self) -> FeedbackProtocol:
        return FeedbackProtocol(
            variant=ProtocolVariant.LINEAR,
            h0=np.zeros((2, 2), dtype=complex),
            hf=self.g * SIGMA_Y,
            channels=self.channels(),
        )

    def thermal_state(self) -> np.ndarray:
        """Thermal state with respect to the thermodynamic Hamiltonian."""
        z = math.exp(-0.5 * self.omega / self.T) + math.exp(0.5 * self.omega / self.T)
        p_e = math.exp(-0.5 * self.omega / self.T) / z
        return np.diag([p_e + 0j, 1.0 - p_e])
