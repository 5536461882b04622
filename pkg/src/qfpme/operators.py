"""Dense complex matrix algebra for small quantum systems and the superoperator
vocabulary of the joint system-detector master equation.

Units: hbar = k_B = 1 throughout; temperature enters only via the Bose-Einstein
occupation n_B = 1/(exp(omega/T) - 1).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Tuple

import numpy as np

HERMITIAN_TOL = 1e-12

# Standard Pauli matrices in the energy basis (|e>, |g>) = ((1,0), (0,1)):
# sigma_z|e> = +|e>, and SIGMA_MINUS = |g><e| lowers the energy.
SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)
SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)  # |g><e|
SIGMA_PLUS = SIGMA_MINUS.conj().T  # |e><g|


def bose_einstein(omega: float, T: float) -> float:
    """Bose-Einstein occupation of a mode at frequency omega and temperature T."""
    return 1.0 / np.expm1(omega / T)


def is_hermitian(mat: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return bool(np.max(np.abs(mat - mat.conj().T)) <= tol)


@dataclass(frozen=True)
class Operator:
    """A dense complex matrix with an optional Hermiticity guarantee."""

    entries: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        mat = np.asarray(self.entries, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1] or mat.shape[0] < 1:
            raise ValueError(f"operator must be a square matrix, got shape {mat.shape}")
        object.__setattr__(self, "entries", mat)
        if self.hermitian and not is_hermitian(mat):
            raise ValueError("hermitian flag set but matrix is not self-adjoint")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class DensityMatrix:
    """A positive-semidefinite operator, unit trace when flagged normalized."""

    op: Operator
    normalized: bool = True

    def __post_init__(self):
        mat = self.op.entries
        if not is_hermitian(mat, 1e-10):
            raise ValueError("density matrix must be Hermitian")
        if self.normalized and abs(np.trace(mat).real - 1.0) > 1e-10:
            raise ValueError(f"trace is {np.trace(mat).real}, expected 1")
        eigvals = np.linalg.eigvalsh(mat)
        if eigvals.min() < -1e-10:
            raise ValueError(f"negative eigenvalue {eigvals.min()}")

    @property
    def entries(self) -> np.ndarray:
        return self.op.entries


@dataclass(frozen=True)
class LindbladChannel:
    """A jump operator with its entropy increment and reverse-channel index.

    The partner channel obeys L_partner = exp(-sigma_k/2) * L^dagger.
    """

    jump: np.ndarray
    sigma_k: float
    partner_index: int
    rate: float = 1.0  # prefactor already folded into `jump`; kept for bookkeeping

    def __post_init__(self):
        object.__setattr__(self, "jump", np.asarray(self.jump, dtype=complex))

    def partner(self) -> "LindbladChannel":
        return LindbladChannel(
            jump=np.exp(-self.sigma_k / 2.0) * self.jump.conj().T,
            sigma_k=-self.sigma_k,
            partner_index=self.partner_index,
        )


class ProtocolVariant(Enum):
    LINEAR = "linear"
    THRESHOLD = "threshold"


@dataclass(frozen=True)
class ThresholdRegion:
    """Half-open interval [lo, hi) with its Hamiltonian and bath channels."""

    lo: float
    hi: float
    hamiltonian: np.ndarray
    channels: Tuple[LindbladChannel, ...]


@dataclass(frozen=True)
class FeedbackProtocol:
    """Outcome-conditioned control map D -> (Hamiltonian, bath channels).

    Linear variant: H(D) = H0 + D*Hf with outcome-independent channels.
    Threshold variant: finitely many half-open regions partitioning the line.
    """

    variant: ProtocolVariant
    h0: Optional[np.ndarray] = None
    hf: Optional[np.ndarray] = None
    channels: Tuple[LindbladChannel, ...] = ()
    regions: Tuple[ThresholdRegion, ...] = ()

    def __post_init__(self):
        if self.variant is ProtocolVariant.THRESHOLD:
            if not self.regions:
                raise ValueError("threshold protocol needs at least one region")
            regions = sorted(self.regions, key=lambda r: r.lo)
            if regions[0].lo != -np.inf or regions[-1].hi != np.inf:
                raise ValueError("threshold regions must cover the real line")
            for left, right in zip(regions, regions[1:]):
                if left.hi != right.lo:
                    raise ValueError("threshold regions must tile without gaps")
            object.__setattr__(self, "regions", tuple(regions))
        else:
            if self.h0 is None or self.hf is None:
                raise ValueError("linear protocol needs h0 and hf")


def dissipator_apply(O: np.ndarray, rho: np.ndarray) -> np.ndarray:
    """D[O]rho = O rho O^dag - {O^dag O, rho}/2; traceless for any rho."""
    O = np.asarray(O, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    if O.shape != rho.shape:
        raise ValueError(f"dimension mismatch: {O.shape} vs {rho.shape}")
    OdO = O.conj().T @ O
    return O @ rho @ O.conj().T - 0.5 * (OdO @ rho + rho @ OdO)


def a_superop_apply(A: np.ndarray, D: float, rho: np.ndarray) -> np.ndarray:
    """Backaction drift term: {A - D, rho}/2."""
    A = np.asarray(A, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    if A.shape != rho.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {rho.shape}")
    shifted = A - D * np.eye(A.shape[0])
    return 0.5 * (shifted @ rho + rho @ shifted)


def protocol_eval(
    protocol: FeedbackProtocol, D: float
) -> Tuple[np.ndarray, Tuple[LindbladChannel, ...]]:
    """Look up the Hamiltonian and active bath channels at outcome D."""
    if protocol.variant is ProtocolVariant.LINEAR:
        return protocol.h0 + D * protocol.hf, protocol.channels
    for region in protocol.regions:
        if region.lo <= D < region.hi:
            return region.hamiltonian, region.channels
    raise ValueError(f"no region contains D={D}")  # unreachable for valid protocols


def liouvillian_apply(protocol: FeedbackProtocol, D: float, rho: np.ndarray) -> np.ndarray:
    """-i[H(D), rho] + sum_k D[L_k(D)]rho."""
    H, channels = protocol_eval(protocol, D)
    rho = np.asarray(rho, dtype=complex)
    out = -1j * (H @ rho - rho @ H)
    for ch in channels:
        out = out + dissipator_apply(ch.jump, rho)
    return out
