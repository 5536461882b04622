"""Stochastic samplers for the measured-and-fed-back models.

Three samplers share one discretization of the detector: the filtered outcome
follows D_{n+1} = e^{-gamma dt} D_n + gamma dt z_{n+1}, where z_{n+1} is the
raw Gaussian measurement outcome of step n (variance 1/(4 lambda dt) around
the measured value). The classical sampler interleaves thermally activated
jumps whose rates follow the sign of the current outcome; the Belavkin
sampler diffuses a conditional density matrix with the same Wiener increment
that drives the filter; the Kraus sampler keeps a pure state, resolves bath
exchanges as jumps, and records everything needed to re-evaluate the
trajectory's probability forwards and backwards.

All samplers are vectorized over a batch of trajectories: one RngStream
drives one batch, so results are bit-reproducible for a given (master_seed,
stream_index, n_traj) regardless of how batches are scheduled across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .models import MeasurementEngine, TwoLevelBangBang
from . import grid_solver


@dataclass(frozen=True)
class RngStream:
    """Independent, reproducible random stream (master seed + stream index)."""

    master_seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.master_seed, spawn_key=(self.stream_index,))
        return np.random.default_rng(seq)


@dataclass
class TrajectoryRecord:
    """A batch of sampled trajectories (leading axis = trajectory).

    D_path has N+2 columns (D_0 .. D_{N+1}). Classical records carry a_path
    (N+1 microstates per trajectory); Kraus records carry z_path (N+1 raw
    outcomes), jump_channels (N entries; -1 means no jump), the two-point
    outcome indices v_i / v_f with their probabilities, and the final-state
    eigenbasis used for the closing projective measurement. Belavkin records
    carry decimated Bloch-vector snapshots instead.
    """

    model: str
    dt: float
    N: int
    seed: Tuple[int, int]
    D_path: np.ndarray
    a_path: Optional[np.ndarray] = None
    z_path: Optional[np.ndarray] = None
    jump_channels: Optional[np.ndarray] = None
    v_i: Optional[np.ndarray] = None
    v_f: Optional[np.ndarray] = None
    p_vi: Optional[np.ndarray] = None
    p_vf: Optional[np.ndarray] = None
    final_basis: Optional[np.ndarray] = None
    final_probs: Optional[np.ndarray] = None
    bloch_path: Optional[np.ndarray] = None
    bloch_stride: Optional[int] = None
    aborted: Optional[np.ndarray] = None

    @property
    def n_traj(self) -> int:
        return self.D_path.shape[0]


def ou_filter_update(D, drive, gamma: float, lam: float, dt: float, rng):
    """One Euler-Maruyama step of the filtered-outcome process.

    Returns (D_next, dW) with D_next = D + gamma (drive - D) dt +
    (gamma / 2 sqrt(lambda)) dW and dW ~ Normal(0, dt). Vectorized over D and
    drive.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    D = np.asarray(D, dtype=float)
    dW = rng.normal(0.0, math.sqrt(dt), size=D.shape)
    D_next = D + gamma * (np.asarray(drive, dtype=float) - D) * dt + (
        gamma / (2.0 * math.sqrt(lam))
    ) * dW
    return D_next, dW


def _filter_step_exact(D, z, gamma: float, dt: float):
    """The discrete filter recursion D' = e^{-gamma dt} D + gamma dt z."""
    return math.exp(-gamma * dt) * D + gamma * dt * z


def simulate_classical(
    model: TwoLevelBangBang, dt: float, N: int, rng: RngStream, n_traj: int = 1
) -> TrajectoryRecord:
    """Jump process of the threshold-feedback two-level system plus filter.

    Each step first advances the filter with the current microstate as drive
    (via the exact discrete recursion, which matches the Gaussian path
    measure used by the entropy estimators), then fires a thermal jump with
    the rate selected by the sign of the just-updated outcome. Initial
    microstates are +-1 with probability 1/2 and D_0 is Gaussian around the
    microstate with the stationary filter variance.
    """
    rate_max = model.kappa * (model.n_B + 1.0)
    if rate_max * dt >= 0.1:
        raise ValueError(f"rate_max*dt = {rate_max * dt:.3g} >= 0.1; reduce dt")
    gen = rng.generator()
    gamma, lam = model.gamma, model.lam
    sigma = model.sigma_filter
    z_std = 1.0 / (2.0 * math.sqrt(lam * dt))

    a = np.where(gen.random(n_traj) < 0.5, -1.0, 1.0)
    D = a + math.sqrt(sigma) * gen.standard_normal(n_traj)
    a_path = np.empty((n_traj, N + 1))
    D_path = np.empty((n_traj, N + 2))
    a_path[:, 0] = a
    D_path[:, 0] = D
    for n in range(N + 1):
        z = a + z_std * gen.standard_normal(n_traj)
        D = _filter_step_exact(D, z, gamma, dt)
        D_path[:, n + 1] = D
        if n < N:
            flip = gen.random(n_traj) < model.flip_rate(a, D) * dt
            a = np.where(flip, -a, a)
            a_path[:, n + 1] = a
    return TrajectoryRecord(
        model="two_level",
        dt=dt,
        N=N,
        seed=(rng.master_seed, rng.stream_index),
        D_path=D_path,
        a_path=a_path,
    )


def _dissipator_matrices(channels):
    """Stacked jump operators and their rate operators L^dag L."""
    L = np.stack([ch.jump for ch in channels]) if channels else np.zeros((0, 2, 2))
    LdL = np.einsum("kba,kbc->kac", L.conj(), L)
    return np.asarray(L, dtype=complex), np.asarray(LdL, dtype=complex)


def simulate_belavkin(
    model: MeasurementEngine,
    dt: float,
    N: int,
    rng: RngStream,
    n_traj: int = 1,
    bloch_stride: int = 10,
) -> TrajectoryRecord:
    """Diffusive conditional-state unraveling of the engine.

    Euler-Maruyama step of the conditional master equation — feedback
    Hamiltonian at the current outcome, bath dissipators, measurement
    dephasing, and the innovation term sqrt(lambda){A - <A>, rho} dW — with
    the same Wiener increment driving the outcome filter (drive <A>).
    """
    scale = max(model.lam, model.gamma, model.kappa, model.g)
    if dt * scale >= 0.05:
        raise ValueError(f"dt*max rate = {dt * scale:.3g} >= 0.05; reduce dt")
    gen = rng.generator()
    gamma, lam, g = model.gamma, model.lam, model.g
    sigma = model.sigma_filter
    L, LdL = _dissipator_matrices(model.channels())
    sx = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    sy = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
    sz = np.diag([1.0 + 0j, -1.0])
    sqrt_lam = math.sqrt(lam)

    rho = np.broadcast_to(model.thermal_state(), (n_traj, 2, 2)).copy()
    # Outcome marginal of the initial state: Gaussian mixture over <a|rho|a>.
    p_plus = 0.5 * (1.0 + np.einsum("jab,ba->j", rho, sx).real)
    centre = np.where(gen.random(n_traj) < p_plus, 1.0, -1.0)
    D = centre + math.sqrt(sigma) * gen.standard_normal(n_traj)

    n_rec = N // bloch_stride + 1
    bloch = np.empty((n_traj, n_rec, 3))
    D_path = np.empty((n_traj, N + 2))
    D_path[:, 0] = D
    aborted = np.zeros(n_traj, dtype=bool)
    rec = 0
    for n in range(N + 1):
        if n % bloch_stride == 0 and rec < n_rec:
            bloch[:, rec, 0] = np.einsum("jab,ba->j", rho, sx).real
            bloch[:, rec, 1] = np.einsum("jab,ba->j", rho, sy).real
            bloch[:, rec, 2] = np.einsum("jab,ba->j", rho, sz).real
            rec += 1
        mean_a = np.einsum("jab,ba->j", rho, sx).real
        H = g * D[:, None, None] * sy
        drho = -1j * (np.einsum("jab,jbc->jac", H, rho) - np.einsum("jab,jbc->jac", rho, H))
        for k in range(L.shape[0]):
            drho += np.einsum("ab,jbc,cd->jad", L[k], rho, L[k].conj().T)
            drho -= 0.5 * (
                np.einsum("ab,jbc->jac", LdL[k], rho) + np.einsum("jab,bc->jac", rho, LdL[k])
            )
        drho += lam * (
            np.einsum("ab,jbc,cd->jad", sx, rho, sx) - rho
        )
        dW = gen.normal(0.0, math.sqrt(dt), size=n_traj)
        anti = np.einsum("ab,jbc->jac", sx, rho) + np.einsum("jab,bc->jac", rho, sx)
        innov = sqrt_lam * (anti - 2.0 * mean_a[:, None, None] * rho)
        rho = rho + dt * drho + dW[:, None, None] * innov
        trace = np.einsum("jaa->j", rho).real
        aborted |= trace < 1e-6
        trace = np.where(trace < 1e-6, 1.0, trace)
        rho /= trace[:, None, None]
        rho = 0.5 * (rho + rho.conj().transpose(0, 2, 1))
        D = D + gamma * (mean_a - D) * dt + (gamma / (2.0 * sqrt_lam)) * dW
        D_path[:, n + 1] = D
    return TrajectoryRecord(
        model="engine",
        dt=dt,
        N=N,
        seed=(rng.master_seed, rng.stream_index),
        D_path=D_path,
        bloch_path=bloch,
        bloch_stride=bloch_stride,
        aborted=aborted,
    )


def _expm_batch(H_eff: np.ndarray, dt: float) -> np.ndarray:
    """exp(-i dt H_eff) for a batch of (possibly non-Hermitian) 2x2 matrices."""
    M = -1j * dt * H_eff
    alpha = 0.5 * (M[..., 0, 0] + M[..., 1, 1])
    V = M - alpha[..., None, None] * np.eye(2)
    # V is traceless: V^2 = det-like scalar times identity.
    s2 = V[..., 0, 0] ** 2 + V[..., 0, 1] * V[..., 1, 0]
    s = np.sqrt(s2 + 0j)
    small = np.abs(s) < 1e-30
    ratio = np.where(small, 1.0, np.sinh(np.where(small, 1.0, s)) / np.where(small, 1.0, s))
    return np.exp(alpha)[..., None, None] * (
        np.cosh(s)[..., None, None] * np.eye(2) + ratio[..., None, None] * V
    )


def average_final_basis(
    model: MeasurementEngine, dt: float, N: int, M: int = 801
) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenbasis and eigenvalues of the outcome-averaged state at time N dt.

    Evolves the ensemble-averaged joint state on the outcome grid from the
    same initial condition the samplers use and diagonalizes the reduced
    system state; the closing projective measurement of the two-point scheme
    is taken in this basis.
    """
    protocol = model.protocol()
    A = model.A
    edges = grid_solver.make_grid(A, model.lam, model.gamma, M)
    state = grid_solver.initial_state(edges, A, model.thermal_state(), model.lam, model.gamma)
    step_dt = grid_solver.admissible_dt(protocol, A, model.lam, model.gamma, edges)
    t_end = N * dt
    n_steps = max(1, int(math.ceil(t_end / step_dt)))
    step_dt = t_end / n_steps
    for _ in range(n_steps):
        state = grid_solver.qfpme_step(state, protocol, A, model.lam, model.gamma, step_dt)
    rho_eig = np.einsum("jab->ab", state.field) * state.delta
    rho = state.basis @ rho_eig @ state.basis.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    vals, vecs = np.linalg.eigh(rho)
    vals = np.clip(vals.real, 0.0, None)
    vals = vals / vals.sum()
    return vecs, vals


def simulate_kraus_jump(
    model: MeasurementEngine,
    dt: float,
    N: int,
    rng: RngStream,
    n_traj: int = 1,
    final_basis: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> TrajectoryRecord:
    """Jump-resolved unraveling with two-point boundary measurements.

    The initial state is an energy eigenstate drawn from the thermal
    distribution, D_0 from the corresponding outcome mixture. Each step:
    Gaussian measurement (Kraus update and raw outcome z), exact filter
    recursion for D, then for the first N steps a bath jump with probability
    dt <L^dag L> (else the normalized no-jump half step with H_eff at the
    current outcome). Closes with a projective measurement in the
    outcome-averaged final-state eigenbasis.
    """
    scale = max(model.lam, model.gamma, model.kappa, model.g)
    if dt * scale >= 0.05:
        raise ValueError(f"dt*max rate = {dt * scale:.3g} >= 0.05; reduce dt")
    gen = rng.generator()
    gamma, lam, g = model.gamma, model.lam, model.g
    sigma = model.sigma_filter
    z_std = 1.0 / (2.0 * math.sqrt(lam * dt))
    channels = model.channels()
    L, LdL = _dissipator_matrices(channels)
    n_ch = L.shape[0]
    sy = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
    LdL_sum = LdL.sum(axis=0)
    plus = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
    minus = np.array([1.0, -1.0], dtype=complex) / math.sqrt(2.0)

    if final_basis is None:
        final_basis = average_final_basis(model, dt, N)
    basis_f, probs_f = final_basis

    # Two-point initial measurement: thermal occupation of the energy basis.
    therm = np.diag(model.thermal_state()).real
    v_i = (gen.random(n_traj) >= therm[0]).astype(np.int8)  # 0 = excited, 1 = ground
    p_vi = therm[v_i]
    psi = np.zeros((n_traj, 2), dtype=complex)
    psi[np.arange(n_traj), v_i] = 1.0

    w_plus = np.abs(psi @ plus.conj()) ** 2
    centre = np.where(gen.random(n_traj) < w_plus, 1.0, -1.0)
    D = centre + math.sqrt(sigma) * gen.standard_normal(n_traj)

    D_path = np.empty((n_traj, N + 2))
    z_path = np.empty((n_traj, N + 1))
    jumps = np.full((n_traj, N), -1, dtype=np.int8)
    D_path[:, 0] = D
    for n in range(N + 1):
        # Gaussian measurement of A: outcome from the mixture, Kraus update.
        amp_p = psi @ plus.conj()
        amp_m = psi @ minus.conj()
        w_plus = np.abs(amp_p) ** 2
        a_drawn = np.where(gen.random(n_traj) < w_plus, 1.0, -1.0)
        z = a_drawn + z_std * gen.standard_normal(n_traj)
        c_p = np.exp(-lam * dt * (z - 1.0) ** 2)
        c_m = np.exp(-lam * dt * (z + 1.0) ** 2)
        psi = (c_p * amp_p)[:, None] * plus + (c_m * amp_m)[:, None] * minus
        psi /= np.linalg.norm(psi, axis=1, keepdims=True)
        z_path[:, n] = z
        D = _filter_step_exact(D, z, gamma, dt)
        D_path[:, n + 1] = D
        if n == N:
            break
        # Bath jump or normalized no-jump evolution at the current outcome.
        jump_p = dt * np.einsum("jb,kba,ja->jk", psi.conj(), LdL, psi).real
        u = gen.random(n_traj)
        cum = np.cumsum(jump_p, axis=1)
        fired = np.full(n_traj, -1, dtype=np.int8)
        for k in range(n_ch):
            lower = cum[:, k - 1] if k > 0 else 0.0
            fired = np.where((u >= lower) & (u < cum[:, k]), np.int8(k), fired)
        jumps[:, n] = fired
        H_eff = g * D[:, None, None] * sy - 0.5j * LdL_sum
        psi_nj = np.einsum("jab,jb->ja", _expm_batch(H_eff, dt), psi)
        psi_new = psi_nj
        for k in range(n_ch):
            mask = fired == k
            if np.any(mask):
                psi_new[mask] = psi[mask] @ L[k].T
        norms = np.linalg.norm(psi_new, axis=1, keepdims=True)
        psi = psi_new / norms

    # Closing projective measurement in the averaged-final-state eigenbasis.
    amps = np.abs(psi @ basis_f.conj()) ** 2  # column v of basis_f
    p0 = amps[:, 0] / amps.sum(axis=1)
    v_f = (gen.random(n_traj) >= p0).astype(np.int8)
    p_vf = probs_f[v_f]
    return TrajectoryRecord(
        model="engine",
        dt=dt,
        N=N,
        seed=(rng.master_seed, rng.stream_index),
        D_path=D_path,
        z_path=z_path,
        jump_channels=jumps,
        v_i=v_i,
        v_f=v_f,
        p_vi=p_vi,
        p_vf=p_vf,
        final_basis=basis_f,
        final_probs=probs_f,
    )


_DUMP_VERSION = 1


def dump_record(traj: TrajectoryRecord, path) -> None:
    """Binary trajectory dump (versioned header + packed arrays)."""
    payload = {
        "version": np.array([_DUMP_VERSION]),
        "header": np.array([traj.dt, float(traj.N)]),
        "model": np.array([traj.model]),
        "seed": np.array(traj.seed),
        "D_path": traj.D_path,
    }
    for key in ("a_path", "z_path", "jump_channels", "v_i", "v_f", "p_vi",
                "p_vf", "final_basis", "final_probs"):
        value = getattr(traj, key)
        if value is not None:
            payload[key] = value
    np.savez_compressed(path, **payload)


def load_record(path) -> TrajectoryRecord:
    """Load a trajectory dump written by dump_record."""
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"][0])
        if version != _DUMP_VERSION:
            raise ValueError(f"unsupported dump version {version}")
        dt, n_steps = data["header"]
        optional = {
            key: data[key]
            for key in ("a_path", "z_path", "jump_channels", "v_i", "v_f",
                        "p_vi", "p_vf", "final_basis", "final_probs")
            if key in data
        }
        return TrajectoryRecord(
            model=str(data["model"][0]),
            dt=float(dt),
            N=int(n_steps),
            seed=(int(data["seed"][0]), int(data["seed"][1])),
            D_path=data["D_path"],
            **optional,
        )


def _log_mixture_outcome(D0: np.ndarray, psi_basis_weights: np.ndarray, sigma: float):
    """log of the Gaussian-mixture outcome density (prefactor dropped)."""
    e_p = -((D0 - 1.0) ** 2) / (2.0 * sigma)
    e_m = -((D0 + 1.0) ** 2) / (2.0 * sigma)
    hi = np.maximum(e_p, e_m)
    return hi + np.log(
        psi_basis_weights * np.exp(e_p - hi) + (1.0 - psi_basis_weights) * np.exp(e_m - hi)
    )


def trajectory_log_prob_ratio(
    traj: TrajectoryRecord, model: MeasurementEngine
) -> Tuple[np.ndarray, np.ndarray]:
    """log P[forward record] - log P_B[reversed record], per trajectory.

    Re-propagates the recorded Kraus/jump sequence from the initial
    projection to get the forward probability, then propagates the reversed
    sequence — conjugated operators, backward raw outcomes z_bar computed
    from the stored D path, bath operators e^{-sigma_k/2} L_k^T, and swapped
    two-point outcomes with the same initial-distribution family — for the
    backward probability. Constant Gaussian prefactors cancel in the ratio.
    Returns (log_ratio, excluded) where excluded marks trajectories whose
    forward or backward probability underflowed to zero.
    """
    if traj.z_path is None:
        raise ValueError("record lacks raw outcomes; only Kraus records are supported")
    dt, N = traj.dt, traj.N
    gamma, lam, g = model.gamma, model.lam, model.g
    sigma = model.sigma_filter
    n = traj.n_traj
    channels = model.channels()
    L, LdL = _dissipator_matrices(channels)
    n_ch = L.shape[0]
    sy = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
    plus = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
    minus = np.array([1.0, -1.0], dtype=complex) / math.sqrt(2.0)
    LdL_sum = LdL.sum(axis=0)
    L_back = np.stack(
        [math.exp(-0.5 * ch.sigma_k) * ch.jump.conj().T for ch in channels]
    ) if channels else L
    LdL_back = np.einsum("kba,kbc->kac", L_back.conj(), L_back)
    LdL_back_sum = LdL_back.sum(axis=0) if channels else LdL_sum

    D = traj.D_path

    def propagate(psi0, z_seq, jump_seq, D_for_h, L_ops, LdL_ops, LdL_total, h_sign):
        """Accumulate log-probability along one direction."""
        psi = psi0.copy()
        logp = np.zeros(n)
        n_steps = z_seq.shape[1]
        for m in range(n_steps):
            z = z_seq[:, m]
            amp_p = psi @ plus.conj()
            amp_m = psi @ minus.conj()
            c_p = np.exp(-lam * dt * (z - 1.0) ** 2)
            c_m = np.exp(-lam * dt * (z + 1.0) ** 2)
            weight = (c_p * np.abs(amp_p)) ** 2 + (c_m * np.abs(amp_m)) ** 2
            logp += np.log(weight)
            psi = (c_p * amp_p)[:, None] * plus + (c_m * amp_m)[:, None] * minus
            psi /= np.sqrt(weight)[:, None]
            if m >= jump_seq.shape[1]:
                continue
            fired = jump_seq[:, m]
            rates = dt * np.einsum(
                "jb,kba,ja->jk", psi.conj(), LdL_ops, psi
            ).real if n_ch else np.zeros((n, 0))
            p_nojump = 1.0 - rates.sum(axis=1)
            H_eff = h_sign * g * D_for_h[:, m, None, None] * sy - 0.5j * LdL_total
            psi_nj = np.einsum("jab,jb->ja", _expm_batch(H_eff, dt), psi)
            psi_new = psi_nj
            step_logp = np.log(np.maximum(p_nojump, 0.0))
            for k in range(n_ch):
                mask = fired == k
                if np.any(mask):
                    psi_new[mask] = psi[mask] @ L_ops[k].T
                    step_logp[mask] = np.log(rates[mask, k])
            logp += step_logp
            norms = np.linalg.norm(psi_new, axis=1, keepdims=True)
            psi = psi_new / np.maximum(norms, 1e-300)
        return psi, logp

    # Forward pass.
    psi0 = np.zeros((n, 2), dtype=complex)
    psi0[np.arange(n), traj.v_i] = 1.0
    w_plus0 = np.abs(psi0 @ plus.conj()) ** 2
    log_f = np.log(traj.p_vi) + _log_mixture_outcome(D[:, 0], w_plus0, sigma)
    # forward jump m sits after the Kraus that produced D_{m+1}
    psi_f, lp = propagate(
        psi0, traj.z_path, traj.jump_channels, D[:, 1 : N + 1], L, LdL, LdL_sum, +1.0
    )
    log_f += lp
    amp_f = np.abs(np.einsum("ja,av->jv", psi_f, traj.final_basis.conj())) ** 2
    log_f += np.log(amp_f[np.arange(n), traj.v_f])

    # Backward pass: reversed outcomes and conjugated operators.
    z_back = (D[:, :-1] - math.exp(-gamma * dt) * D[:, 1:]) / (gamma * dt)
    z_back = z_back[:, ::-1]
    jumps_back = traj.jump_channels[:, ::-1]
    D_for_h_back = D[:, 1 : N + 1][:, ::-1]
    psi0_b = traj.final_basis.conj()[:, traj.v_f].T.copy()
    w_plus0_b = np.abs(psi0_b @ plus.conj()) ** 2
    log_b = np.log(traj.p_vf) + _log_mixture_outcome(D[:, N + 1], w_plus0_b, sigma)
    psi_b, lp = propagate(
        psi0_b, z_back, jumps_back, D_for_h_back, L_back, LdL_back, LdL_back_sum, -1.0
    )
    log_b += lp
    # Closing backward projection onto the conjugated energy basis.
    amp_b = np.abs(psi_b) ** 2
    log_b += np.log(amp_b[np.arange(n), traj.v_i])

    log_ratio = log_f - log_b
    excluded = ~np.isfinite(log_f) | ~np.isfinite(log_b)
    return log_ratio, excluded
