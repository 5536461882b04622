"""Gaussian-weighted Hermite basis and truncated-linear-system steady states.

The basis functions G_n(D) = G_0(D) * He_n(D) diagonalize the detector's
drift-diffusion operator. Raw coefficients multiply sigma^n n!-weighted
functions, which under/overflow near n ~ 40; all linear systems are therefore
assembled for rescaled coefficients x_hat_n = x_n * sqrt(sigma^n n!), which
multiply unit-normalized basis functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import gmpy2
import numpy as np
from scipy.linalg import lu_factor, lu_solve

SQRT_2PI = math.sqrt(2.0 * math.pi)

# The rescaled coefficients of a distribution peaked at D = +-1 grow up to
# exp(1/(2 sigma)) before decaying, so for sharp detectors the linear systems
# must be solved in extended precision to survive the cancellation.
_EXTENDED_THRESHOLD = 14.0  # switch when 1/(2 sigma) exceeds this


def _extended_bits(sigma: float) -> Optional[int]:
    """Working precision (bits) needed for the solve, or None if float64 is safe."""
    growth = 1.0 / (2.0 * sigma)
    if growth <= _EXTENDED_THRESHOLD:
        return None
    return 64 + int(math.ceil(3.0 * growth))


class SolverConvergenceError(RuntimeError):
    """Truncation refinement or time marching failed to converge."""


def log_factorial(n: int) -> float:
    return math.lgamma(n + 1.0)


def log_double_factorial(n: int) -> float:
    """log(n!!) with (-1)!! = 0!! = 1, computed via lgamma to avoid overflow."""
    if n <= 0:
        return 0.0
    if n % 2 == 0:
        k = n // 2
        return k * math.log(2.0) + math.lgamma(k + 1.0)
    k = (n + 1) // 2  # n = 2k-1: n!! = n!/(2^(k-1) (k-1)!)
    return math.lgamma(n + 1.0) - (k - 1) * math.log(2.0) - math.lgamma(k)


@dataclass(frozen=True)
class HermiteBasis:
    """Gaussian-weighted polynomial basis with scale sigma = gamma/(8 lambda)."""

    sigma: float
    max_order: int

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.max_order < 0:
            raise ValueError("max_order must be non-negative")

    def eval_He(self, n: int, D: np.ndarray) -> np.ndarray:
        """He_n(D) by the three-term recurrence He_{n+1} = D He_n - n sigma He_{n-1}."""
        self._check_order(n)
        D = np.asarray(D, dtype=float)
        prev, cur = np.ones_like(D), D.copy()
        if n == 0:
            return prev
        for k in range(1, n):
            prev, cur = cur, D * cur - k * self.sigma * prev
        return cur

    def eval_G(self, n: int, D: np.ndarray) -> np.ndarray:
        """G_n(D) = exp(-D^2/2 sigma)/sqrt(2 pi sigma) * He_n(D)."""
        self._check_order(n)
        D = np.asarray(D, dtype=float)
        g0 = np.exp(-(D**2) / (2.0 * self.sigma)) / math.sqrt(2.0 * math.pi * self.sigma)
        return g0 * self.eval_He(n, D)

    def eval_G_hat(self, D: np.ndarray) -> np.ndarray:
        """All unit-normalized G_hat_n = G_n / sqrt(sigma^n n!) for n <= max_order.

        Returns an array of shape (max_order + 1,) + D.shape.
        """
        D = np.atleast_1d(np.asarray(D, dtype=float))
        s = self.sigma
        out = np.empty((self.max_order + 1,) + D.shape)
        g0 = np.exp(-(D**2) / (2.0 * s)) / math.sqrt(2.0 * math.pi * s)
        he_prev = np.ones_like(D)
        out[0] = g0 * he_prev
        if self.max_order == 0:
            return out
        he_cur = D / math.sqrt(s)
        out[1] = g0 * he_cur
        for n in range(1, self.max_order):
            he_prev, he_cur = he_cur, (
                D * he_cur / math.sqrt(s * (n + 1)) - math.sqrt(n / (n + 1.0)) * he_prev
            )
            out[n + 1] = g0 * he_cur
        return out

    def halfline_overlap(self, n: int, m: int) -> float:
        """Integral of He_n He_m G_0 over [0, infinity), by the closed form."""
        self._check_order(n)
        self._check_order(m)
        s = self.sigma
        if n == m:
            return 0.5 * math.exp(m * math.log(s) + log_factorial(m))
        if (n + m) % 2 == 0:
            return 0.0
        if n % 2 == 0:  # n even, m odd
            logmag = (
                0.5 * (m + n) * math.log(s)
                + log_double_factorial(m)
                + log_double_factorial(n - 1)
            )
            sign = (-1) ** ((m + n - 1) // 2)
            return sign * math.exp(logmag) / (SQRT_2PI * (m - n))
        # n odd, m even: symmetric in the roles of n and m
        logmag = (
            0.5 * (m + n) * math.log(s)
            + log_double_factorial(n)
            + log_double_factorial(m - 1)
        )
        sign = (-1) ** ((m + n - 1) // 2)
        return sign * math.exp(logmag) / (SQRT_2PI * (n - m))

    def _check_order(self, n: int) -> None:
        if not 0 <= n <= self.max_order:
            raise ValueError(f"order {n} outside [0, {self.max_order}]")


@dataclass(frozen=True)
class SpectralState:
    """Truncated steady-state coefficients in the unit-normalized basis.

    coeff_hat holds dense arrays indexed by basis order n; entries of the
    wrong parity are zero. Models: 'two_level' with keys q_plus (even) and
    q_minus (odd); 'engine' with keys p (even), a_z (even), a_x (odd).
    """

    model: str
    sigma: float
    L: int
    coeff_hat: Dict[str, np.ndarray]
    diagnostics: Dict[str, float] = field(default_factory=dict)
    # Extended-precision copies of coeff_hat (object arrays of gmpy2.mpfr),
    # present when the solve needed extended arithmetic. Observables that sum
    # over many coefficients cancel from magnitude exp(1/(2 sigma)) down to
    # order unity and must use these instead of the float64 copies.
    coeff_ext: Optional[Dict[str, np.ndarray]] = None
    precision_bits: Optional[int] = None

    def basis(self) -> HermiteBasis:
        max_order = max(arr.shape[0] for arr in self.coeff_hat.values()) - 1
        return HermiteBasis(self.sigma, max_order)

    def raw_coeff(self, key: str) -> np.ndarray:
        """Coefficients multiplying the raw (sigma^n n!-weighted) functions."""
        hat = self.coeff_hat[key]
        n = np.arange(hat.shape[0])
        log_scale = 0.5 * (n * math.log(self.sigma) + np.array([log_factorial(k) for k in n]))
        return hat * np.exp(-log_scale)


def _row_equilibrate(mat: np.ndarray, rhs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    scale = np.max(np.abs(mat), axis=1)
    scale[scale == 0.0] = 1.0
    return mat / scale[:, None], rhs / scale


def _solve_dense(mat: np.ndarray, rhs: np.ndarray) -> Tuple[np.ndarray, float]:
    mat, rhs = _row_equilibrate(mat, rhs)
    cond = float(np.linalg.cond(mat))
    if not np.isfinite(cond) or cond > 1e14:
        raise SolverConvergenceError(f"linear system ill-conditioned (cond ~ {cond:.3e})")
    sol = lu_solve(lu_factor(mat), rhs)
    return sol, cond


def _lu_solve_extended(
    mat: np.ndarray, rhs: np.ndarray, bits: int, band: Optional[int] = None
) -> np.ndarray:
    """Partial-pivot Gaussian elimination in `bits`-bit arithmetic.

    For a banded matrix, `band` limits elimination and fill-in windows, giving
    O(n band^2) work instead of O(n^3). Entries are float64-exact inputs; all
    cancellation happens at the extended precision.
    """
    ctx = gmpy2.get_context()
    old_bits = ctx.precision
    ctx.precision = bits
    try:
        n = mat.shape[0]
        a = np.empty((n, n + 1), dtype=object)
        for i in range(n):
            for j in range(n):
                a[i, j] = gmpy2.mpfr(mat[i, j]) if mat.dtype != object else mat[i, j]
            a[i, n] = gmpy2.mpfr(rhs[i]) if rhs.dtype != object else rhs[i]
        row_win = band if band is not None else n
        for k in range(n - 1):
            rmax = min(n, k + 1 + row_win)
            piv = k + max(range(rmax - k), key=lambda i: abs(a[k + i, k]))
            if piv != k:
                a[[k, piv], k:] = a[[piv, k], k:]
            if a[k, k] == 0:
                raise SolverConvergenceError("singular matrix in extended-precision solve")
            fac = a[k + 1 : rmax, k] / a[k, k]
            if band is None:
                a[k + 1 : rmax, k + 1 :] -= fac[:, None] * a[k, k + 1 :][None, :]
            else:
                cmax = min(n, k + 1 + 2 * band)  # pivoting doubles the fill window
                a[k + 1 : rmax, k + 1 : cmax] -= fac[:, None] * a[k, k + 1 : cmax][None, :]
                a[k + 1 : rmax, n] -= fac * a[k, n]
            a[k + 1 : rmax, k] = 0
        if a[n - 1, n - 1] == 0:
            raise SolverConvergenceError("singular matrix in extended-precision solve")
        x = np.empty(n, dtype=object)
        for i in range(n - 1, -1, -1):
            jmax = n if band is None else min(n, i + 1 + 2 * band)
            s = a[i, n]
            if jmax > i + 1:
                s = s - np.dot(a[i, i + 1 : jmax], x[i + 1 : jmax])
            x[i] = s / a[i, i]
        return x
    finally:
        ctx.precision = old_bits


def _classical_system(kappa_over_gamma: float, n_B: float, sigma: float, L: int, bits=None):
    """Assemble the (2L+1)-unknown system for the threshold two-level model.

    Unknowns: q_hat_plus[2l] for l=1..L, then q_hat_minus[2l+1] for l=0..L.
    q_hat_plus[0] = 1 is moved to the right-hand side. With `bits` set, the
    entries are computed in extended precision (the solution components grow
    to exp(1/(2 sigma)), so entry-level rounding would otherwise dominate).
    """
    n_unknown = 2 * L + 1
    if bits is None:
        conv = float
        mat = np.zeros((n_unknown, n_unknown))
        rhs = np.zeros(n_unknown)
        sqrt_over_sigma = lambda n: math.sqrt(n / sigma)
        sqrt_2pi = SQRT_2PI
        # Factorial ratio (2l+1)!! (2k-1)!! / sqrt((2l+1)! (2k)!) in log space.
        halfline_factor = lambda l, k: math.exp(
            log_double_factorial(2 * l + 1)
            + log_double_factorial(2 * k - 1)
            - 0.5 * log_factorial(2 * l + 1)
            - 0.5 * log_factorial(2 * k)
        )
    else:
        conv = gmpy2.mpfr
        mat = np.full((n_unknown, n_unknown), gmpy2.mpfr(0), dtype=object)
        rhs = np.full(n_unknown, gmpy2.mpfr(0), dtype=object)
        # The quotient must be formed in working precision: a float64-rounded
        # entry perturbs the solution at relative 1e-16, which the cancelling
        # observable sums amplify by exp(1/(2 sigma)).
        msigma = gmpy2.mpfr(sigma)
        sqrt_over_sigma = lambda n: gmpy2.sqrt(n / msigma)
        sqrt_2pi = gmpy2.sqrt(2 * gmpy2.const_pi())
        halfline_factor = lambda l, k: gmpy2.mpfr(
            gmpy2.double_fac(2 * l + 1) * gmpy2.double_fac(max(2 * k - 1, 0))
        ) / gmpy2.sqrt(gmpy2.mpfr(gmpy2.fac(2 * l + 1) * gmpy2.fac(2 * k)))

    def col_plus(l):  # q_hat_plus[2l], l = 1..L
        return l - 1

    def col_minus(l):  # q_hat_minus[2l+1], l = 0..L
        return L + l

    row = 0
    # Drift-balance family: 2l q+_{2l} + sqrt(2l/sigma) q-_{2l-1} = 0, l = 1..L.
    for l in range(1, L + 1):
        mat[row, col_plus(l)] = conv(2 * l)
        mat[row, col_minus(l - 1)] = sqrt_over_sigma(2 * l)
        row += 1
    # Jump-coupled family, l = 0..L (rows divided by gamma).
    for l in range(0, L + 1):
        mat[row, col_minus(l)] = (2 * l + 1) + conv(kappa_over_gamma) * (1.0 + 2.0 * n_B)
        coeff_direct = sqrt_over_sigma(2 * l + 1)
        # Half-line coupling sum over q+_{2k}, k = 0..L; sigma powers cancel
        # against the rescaling, so only factorial ratios remain.
        for k in range(0, L + 1):
            sign = (-1) ** (l + k)
            c = 2.0 * kappa_over_gamma * sign * halfline_factor(l, k) / (
                sqrt_2pi * (2 * l - 2 * k + 1)
            )
            if k == 0:
                rhs[row] -= c
            else:
                mat[row, col_plus(k)] += c
        if l == 0:
            rhs[row] -= coeff_direct  # q+_0 = 1 contribution of the gradient term
        else:
            mat[row, col_plus(l)] += coeff_direct
        row += 1
    return mat, rhs


def _solve_classical_once(omega, kappa, gamma, lam, n_B, L):
    sigma = gamma / (8.0 * lam)
    bits = _extended_bits(sigma)
    if bits is None:
        mat, rhs = _classical_system(kappa / gamma, n_B, sigma, L)
        sol, cond = _solve_dense(mat, rhs)
        diagnostics = {"condition_number": cond}
    else:
        ctx = gmpy2.get_context()
        old_bits = ctx.precision
        ctx.precision = bits
        try:
            # Equilibration divisions must also round at working precision.
            mat, rhs = _classical_system(kappa / gamma, n_B, sigma, L, bits=bits)
            mat, rhs = _row_equilibrate(mat, rhs)
        finally:
            ctx.precision = old_bits
        sol = _lu_solve_extended(mat, rhs, bits)
        diagnostics = {"precision_bits": float(bits)}
    coeff_ext = None
    if bits is not None:
        q_plus_ext = np.full(2 * L + 2, gmpy2.mpfr(0), dtype=object)
        q_minus_ext = np.full(2 * L + 2, gmpy2.mpfr(0), dtype=object)
        q_plus_ext[0] = gmpy2.mpfr(1)
        for l in range(1, L + 1):
            q_plus_ext[2 * l] = sol[l - 1]
        for l in range(0, L + 1):
            q_minus_ext[2 * l + 1] = sol[L + l]
        coeff_ext = {"q_plus": q_plus_ext, "q_minus": q_minus_ext}
        sol = np.array([float(v) for v in sol])
    q_plus = np.zeros(2 * L + 2)
    q_minus = np.zeros(2 * L + 2)
    q_plus[0] = 1.0
    for l in range(1, L + 1):
        q_plus[2 * l] = sol[l - 1]
    for l in range(0, L + 1):
        q_minus[2 * l + 1] = sol[L + l]
    return SpectralState(
        model="two_level",
        sigma=sigma,
        L=L,
        coeff_hat={"q_plus": q_plus, "q_minus": q_minus},
        diagnostics=diagnostics,
        coeff_ext=coeff_ext,
        precision_bits=bits,
    )


def _refinement_delta(coarse: Dict[str, np.ndarray], fine: Dict[str, np.ndarray]) -> float:
    """Element-wise disagreement between two truncations.

    Relative for large coefficients, absolute below unity, so that the huge
    mid-order coefficients of sharp distributions cannot mask errors in the
    order-unity coefficients that determine the observables.
    """
    delta = 0.0
    for key, arr in coarse.items():
        shared = arr.shape[0]
        scale = np.maximum(1.0, np.abs(fine[key][:shared]))
        delta = max(delta, float(np.max(np.abs(fine[key][:shared] - arr) / scale)))
    return delta


def _start_truncation(L: int, sigma: float) -> int:
    """Deepen the requested truncation so basis orders cover the +-1 peaks.

    Coefficients of a peak at D = +-1 only start decaying beyond order
    1/sigma, so the truncation must reach past that with some margin.
    """
    return max(L, int(math.ceil(0.5 / sigma)) + 20)


def _solve_refined(solve_once, L, refine_tol, check_refinement, L_max=400, step=25):
    """Solve at L and L+5; escalate L until the shared coefficients agree."""
    if not check_refinement:
        return solve_once(L)
    last_delta = np.inf
    while L <= L_max:
        state = solve_once(L)
        fine = solve_once(L + 5)
        last_delta = _refinement_delta(state.coeff_hat, fine.coeff_hat)
        if last_delta <= refine_tol:
            state.diagnostics["refinement_delta"] = last_delta
            state.diagnostics["truncation_used"] = float(L)
            return state
        L += step
    raise SolverConvergenceError(
        f"truncation not converged: delta {last_delta:.3e} > {refine_tol:.1e} at L_max={L_max}"
    )


def solve_classical_two_level(
    omega: float,
    kappa: float,
    gamma: float,
    lam: float,
    n_B: float,
    L: int = 40,
    refine_tol: float = 1e-8,
    check_refinement: bool = True,
) -> SpectralState:
    """Steady state of the threshold two-level model by truncated expansion.

    L is the starting truncation; it is deepened automatically until the
    shared coefficients of the L and L+5 solutions agree to refine_tol
    (relative to the largest coefficient), and an error is raised otherwise.
    """
    if L < 2:
        raise ValueError("L must be at least 2")
    if min(omega, kappa, gamma, lam) <= 0 or n_B <= 0:
        raise ValueError("all rates must be strictly positive")
    return _solve_refined(
        lambda l: _solve_classical_once(omega, kappa, gamma, lam, n_B, l),
        _start_truncation(L, gamma / (8.0 * lam)),
        refine_tol,
        check_refinement,
    )


def classical_error_probability(state: SpectralState) -> float:
    """Steady-state probability that the detector sign disagrees with the state.

    The sum cancels from the coefficient magnitude down to order unity, so it
    runs over the extended-precision coefficients when the solve produced them.
    """
    if state.model != "two_level":
        raise ValueError(f"expected two_level state, got {state.model}")
    if state.coeff_ext is None:
        q_minus = state.coeff_hat["q_minus"]
        eta = 0.5
        for n in range(1, q_minus.shape[0], 2):
            logmag = log_double_factorial(n) - 0.5 * log_factorial(n)
            sign = (-1) ** ((n - 1) // 2)
            eta += q_minus[n] * sign * math.exp(logmag) / (SQRT_2PI * n)
        return eta
    ctx = gmpy2.get_context()
    old_bits = ctx.precision
    ctx.precision = state.precision_bits
    try:
        q_minus = state.coeff_ext["q_minus"]
        sqrt_2pi = gmpy2.sqrt(2 * gmpy2.const_pi())
        eta = gmpy2.mpfr(0.5)
        for n in range(1, q_minus.shape[0], 2):
            factor = gmpy2.mpfr(gmpy2.double_fac(n)) / gmpy2.sqrt(gmpy2.mpfr(gmpy2.fac(n)))
            sign = (-1) ** ((n - 1) // 2)
            eta += q_minus[n] * sign * factor / (sqrt_2pi * n)
        return float(eta)
    finally:
        ctx.precision = old_bits


def _eval_G_hat_ext(sigma: float, max_order: int, D: np.ndarray, bits: int) -> np.ndarray:
    """Normalized basis functions on a grid in extended precision.

    Returns an object array of shape (max_order + 1, len(D)) of gmpy2.mpfr,
    for expanding coefficient sets whose cancellation exceeds float64.
    """
    ctx = gmpy2.get_context()
    old_bits = ctx.precision
    ctx.precision = bits
    try:
        exp_u = np.frompyfunc(gmpy2.exp, 1, 1)
        s = gmpy2.mpfr(sigma)
        d = np.array([gmpy2.mpfr(float(v)) for v in np.atleast_1d(D)], dtype=object)
        out = np.empty((max_order + 1, d.shape[0]), dtype=object)
        g0 = exp_u(-(d * d) / (2 * s)) / gmpy2.sqrt(2 * gmpy2.const_pi() * s)
        he_prev = np.full(d.shape[0], gmpy2.mpfr(1), dtype=object)
        out[0] = g0 * he_prev
        if max_order == 0:
            return out
        he_cur = d / gmpy2.sqrt(s)
        out[1] = g0 * he_cur
        for n in range(1, max_order):
            he_prev, he_cur = he_cur, (
                d * he_cur / gmpy2.sqrt(s * (n + 1)) - gmpy2.sqrt(gmpy2.mpfr(n) / (n + 1)) * he_prev
            )
            out[n + 1] = g0 * he_cur
        return out
    finally:
        ctx.precision = old_bits


def classical_power_pointwise(state: SpectralState, omega: float, gamma: float) -> float:
    """Feedback power from the boundary values at the switching threshold.

    Evaluates -gamma*omega*P(0) + gamma*sigma*omega*d_D[p1 - p0](0) by summing
    the expansion at D = 0. The steady state has a derivative kink there, so
    this sum converges only algebraically in the truncation; it is kept as a
    diagnostic cross-check of the flux-reduced form used by
    classical_energetics.
    """
    if state.model != "two_level":
        raise ValueError(f"expected two_level state, got {state.model}")
    sigma = state.sigma
    if state.coeff_ext is None:
        q_plus = state.coeff_hat["q_plus"]
        q_minus = state.coeff_hat["q_minus"]
        basis = HermiteBasis(sigma, q_plus.shape[0] + 1)
        g_hat0 = basis.eval_G_hat(np.array([0.0]))[:, 0]
        sqrt_times_sigma = lambda n: math.sqrt(n * sigma)
    else:
        q_plus = state.coeff_ext["q_plus"]
        q_minus = state.coeff_ext["q_minus"]
        g_hat0 = _eval_G_hat_ext(
            sigma, q_plus.shape[0] + 1, np.array([0.0]), state.precision_bits
        )[:, 0]
        sqrt_times_sigma = lambda n: gmpy2.sqrt(n * gmpy2.mpfr(sigma))
    power = 0.0
    for n in range(0, q_plus.shape[0], 2):
        power += -omega * gamma * q_plus[n] * g_hat0[n]
    for n in range(1, q_minus.shape[0], 2):
        # q_n^- G_{n+1}(0) with both factors rescaled to the normalized basis
        power += omega * gamma * q_minus[n] * g_hat0[n + 1] * sqrt_times_sigma(n + 1)
    return float(power)


def classical_energetics(
    state: SpectralState, omega: float, kappa: float, gamma: float, lam: float, n_B: float
) -> Tuple[float, float, float]:
    """(power, heat current, error probability) from the spectral solution.

    Integrating the stationary probability-flux balance over the half line
    D >= 0 reduces the threshold boundary evaluation of the power exactly to
    P = omega*kappa*[(1 + 2 n_B)*eta - n_B], which converges spectrally in the
    truncation (the direct boundary sum is available as
    classical_power_pointwise). The measurement-energy rate is identically
    zero for this model.
    """
    if state.model != "two_level":
        raise ValueError(f"expected two_level state, got {state.model}")
    eta = classical_error_probability(state)
    power = omega * kappa * ((1.0 + 2.0 * n_B) * eta - n_B)
    heat = omega * kappa * n_B * (1.0 - eta) - omega * kappa * (1.0 + n_B) * eta
    return power, heat, eta


def classical_mean_square_error(state: SpectralState) -> float:
    """Steady-state <(D - a)^2> from the low-order spectral coefficients."""
    sigma = state.sigma
    q2_raw = state.coeff_hat["q_plus"][2] / math.sqrt(2.0 * sigma**2)
    q1_raw = state.coeff_hat["q_minus"][1] / math.sqrt(sigma)
    return 2.0 * sigma**2 * q2_raw + sigma + 1.0 + 2.0 * sigma * q1_raw


def _engine_system(omega, kappa, gamma, lam, g, n_B, L, bits=None):
    """Assemble the (3L+2)-unknown odd-sector system for the engine model.

    Unknowns: p_hat[2l] l=1..L, a_z_hat[2l] l=0..L, a_x_hat[2l+1] l=0..L,
    with p_hat[0] = 1 on the right-hand side and a_z[2L+2] = 0. With `bits`
    set, entries are computed in extended precision (see _classical_system).
    """
    sigma = gamma / (8.0 * lam)
    n_unknown = 3 * L + 2
    if bits is None:
        conv = float
        sqrt_over_sigma = lambda n: math.sqrt(n / sigma)
        sqrt_times_sigma = lambda n: math.sqrt(n * sigma)
        mat = np.zeros((n_unknown, n_unknown))
        rhs = np.zeros(n_unknown)
    else:
        conv = gmpy2.mpfr
        # Quotients and products with sigma are formed in working precision;
        # see the matching note in _classical_system.
        msigma = gmpy2.mpfr(sigma)
        sqrt_over_sigma = lambda n: gmpy2.sqrt(n / msigma)
        sqrt_times_sigma = lambda n: gmpy2.sqrt(n * msigma)
        mat = np.full((n_unknown, n_unknown), gmpy2.mpfr(0), dtype=object)
        rhs = np.full(n_unknown, gmpy2.mpfr(0), dtype=object)
    kk = kappa * (1.0 + 2.0 * n_B)

    def col_p(l):  # l = 1..L
        return l - 1

    def col_az(l):  # l = 0..L
        return L + l

    def col_ax(l):  # l = 0..L  (order 2l+1)
        return 2 * L + 1 + l

    row = 0
    # Continuity family: 2l p_{2l} - sqrt(2l/sigma) a_x_{2l-1} = 0, l = 1..L.
    for l in range(1, L + 1):
        mat[row, col_p(l)] = conv(2 * l)
        mat[row, col_ax(l - 1)] = -sqrt_over_sigma(2 * l)
        row += 1
    # a_x family, l = 0..L.
    for l in range(0, L + 1):
        mat[row, col_az(l)] = g * sqrt_times_sigma(2 * l + 1)
        if l + 1 <= L:
            mat[row, col_az(l + 1)] = g * sqrt_times_sigma(2 * l + 2)
        mat[row, col_ax(l)] = -conv(0.5 * gamma * (2 * l + 1) + 0.25 * kk)
        coeff_p = 0.5 * gamma * sqrt_over_sigma(2 * l + 1)
        if l == 0:
            rhs[row] -= coeff_p
        else:
            mat[row, col_p(l)] = coeff_p
        row += 1
    # a_z family, l = 0..L.
    for l in range(0, L + 1):
        if l >= 1:
            mat[row, col_ax(l - 1)] = -g * sqrt_times_sigma(2 * l)
        mat[row, col_ax(l)] = -g * sqrt_times_sigma(2 * l + 1)
        mat[row, col_az(l)] = -conv(lam + 0.5 * kk + gamma * l)
        if l == 0:
            rhs[row] += conv(0.5 * kappa)
        else:
            mat[row, col_p(l)] = -conv(0.5 * kappa)
        row += 1
    return mat, rhs


def _engine_permutation(L: int) -> Tuple[np.ndarray, np.ndarray]:
    """Row/column maps interleaving the engine unknowns by basis order.

    Ordering az_0, ax_1, then (p_{2l}, az_{2l}, ax_{2l+1}) per l makes the
    system banded with bandwidth 3, which the extended-precision solver
    exploits. Rows are placed next to their dominant diagonal unknown.
    """
    n = 3 * L + 2
    colmap = np.empty(n, dtype=int)
    rowmap = np.empty(n, dtype=int)
    for l in range(1, L + 1):
        colmap[l - 1] = 3 * l - 1  # p_{2l}
        rowmap[l - 1] = 3 * l - 1
    for l in range(0, L + 1):
        colmap[L + l] = 0 if l == 0 else 3 * l  # az_{2l}
        rowmap[L + l] = 0 if l == 0 else 3 * l
        colmap[2 * L + 1 + l] = 1 if l == 0 else 3 * l + 1  # ax_{2l+1}
        rowmap[2 * L + 1 + l] = 1 if l == 0 else 3 * l + 1
    return rowmap, colmap


def _solve_engine_once(omega, kappa, gamma, lam, g, n_B, L):
    sigma = gamma / (8.0 * lam)
    bits = _extended_bits(sigma)
    if bits is None:
        mat, rhs = _engine_system(omega, kappa, gamma, lam, g, n_B, L)
        sol, cond = _solve_dense(mat, rhs)
        diagnostics = {"condition_number": cond}
    else:
        ctx = gmpy2.get_context()
        old_bits = ctx.precision
        ctx.precision = bits
        try:
            mat, rhs = _engine_system(omega, kappa, gamma, lam, g, n_B, L, bits=bits)
            rowmap, colmap = _engine_permutation(L)
            banded = np.full_like(mat, gmpy2.mpfr(0))
            banded_rhs = np.full_like(rhs, gmpy2.mpfr(0))
            banded[np.ix_(rowmap, colmap)] = mat
            banded_rhs[rowmap] = rhs
            # Equilibration divisions must also round at working precision.
            banded, banded_rhs = _row_equilibrate(banded, banded_rhs)
        finally:
            ctx.precision = old_bits
        sol = _lu_solve_extended(banded, banded_rhs, bits, band=6)[colmap]
        diagnostics = {"precision_bits": float(bits)}
    coeff_ext = None
    if bits is not None:
        p_ext = np.full(2 * L + 2, gmpy2.mpfr(0), dtype=object)
        az_ext = np.full(2 * L + 2, gmpy2.mpfr(0), dtype=object)
        ax_ext = np.full(2 * L + 2, gmpy2.mpfr(0), dtype=object)
        p_ext[0] = gmpy2.mpfr(1)
        for l in range(1, L + 1):
            p_ext[2 * l] = sol[l - 1]
        for l in range(0, L + 1):
            az_ext[2 * l] = sol[L + l]
            ax_ext[2 * l + 1] = sol[2 * L + 1 + l]
        coeff_ext = {"p": p_ext, "a_z": az_ext, "a_x": ax_ext}
        sol = np.array([float(v) for v in sol])
    p_hat = np.zeros(2 * L + 2)
    az_hat = np.zeros(2 * L + 2)
    ax_hat = np.zeros(2 * L + 2)
    p_hat[0] = 1.0
    for l in range(1, L + 1):
        p_hat[2 * l] = sol[l - 1]
    for l in range(0, L + 1):
        az_hat[2 * l] = sol[L + l]
        ax_hat[2 * l + 1] = sol[2 * L + 1 + l]
    return SpectralState(
        model="engine",
        sigma=sigma,
        L=L,
        coeff_hat={"p": p_hat, "a_z": az_hat, "a_x": ax_hat},
        diagnostics=diagnostics,
        coeff_ext=coeff_ext,
        precision_bits=bits,
    )


def solve_engine(
    omega: float,
    kappa: float,
    gamma: float,
    lam: float,
    g: float,
    n_B: float,
    L: int = 40,
    refine_tol: float = 1e-8,
    check_refinement: bool = True,
) -> SpectralState:
    """Steady state of the measurement-driven engine by truncated expansion.

    As for the two-level solver, the starting truncation L is deepened
    automatically until the L and L+5 solutions agree to refine_tol.
    """
    if L < 2:
        raise ValueError("L must be at least 2")
    if min(omega, gamma, lam, g) <= 0 or kappa < 0 or n_B <= 0:
        raise ValueError("omega, gamma, lambda, g must be positive; kappa non-negative")
    return _solve_refined(
        lambda l: _solve_engine_once(omega, kappa, gamma, lam, g, n_B, l),
        _start_truncation(L, gamma / (8.0 * lam)),
        refine_tol,
        check_refinement,
    )


def engine_energetics(
    state: SpectralState,
    omega: float,
    kappa: float,
    gamma: float,
    lam: float,
    g: float,
    n_B: float,
) -> Tuple[float, float, float]:
    """(power, heat current, measurement-energy rate) for the engine."""
    if state.model != "engine":
        raise ValueError(f"expected engine state, got {state.model}")
    sigma = state.sigma
    a1x = state.coeff_hat["a_x"][1] / math.sqrt(sigma)  # raw coefficient
    a0z = state.coeff_hat["a_z"][0]
    power = -omega * g * sigma * a1x
    e_m_rate = -lam * omega * a0z
    heat = -0.5 * omega * kappa - 0.5 * omega * kappa * (1.0 + 2.0 * n_B) * a0z
    return power, heat, e_m_rate


def reconstruct(state: SpectralState, D: np.ndarray) -> Dict[str, np.ndarray]:
    """Evaluate the expansion on a grid of outcomes D.

    Returns {'P', 'p0', 'p1'} for the two-level model and
    {'P', 'a_x', 'a_y', 'a_z'} for the engine.
    """
    D = np.atleast_1d(np.asarray(D, dtype=float))
    ctx = gmpy2.get_context()
    old_bits = ctx.precision
    if state.coeff_ext is None:
        coeff = state.coeff_hat
        some = next(iter(coeff.values()))
        g_hat = HermiteBasis(state.sigma, some.shape[0] - 1).eval_G_hat(D)
    else:
        # The expansion sums cancel from exp(1/(2 sigma)) down to order unity
        # and must run at the working precision of the stored coefficients.
        ctx.precision = state.precision_bits
        coeff = state.coeff_ext
        some = next(iter(coeff.values()))
        g_hat = _eval_G_hat_ext(state.sigma, some.shape[0] - 1, D, state.precision_bits)

    def expand(hat):
        out = np.tensordot(hat, g_hat[: hat.shape[0]], axes=(0, 0))
        return out.astype(float) if out.dtype == object else out

    try:
        return _reconstruct_fields(state, D, coeff, expand)
    finally:
        ctx.precision = old_bits


def _reconstruct_fields(state, D, coeff, expand) -> Dict[str, np.ndarray]:

    if state.model == "two_level":
        q_plus = expand(coeff["q_plus"])
        q_minus = expand(coeff["q_minus"])
        return {
            "P": q_plus,
            "p0": 0.5 * (q_plus + q_minus),
            "p1": 0.5 * (q_plus - q_minus),
        }
    return {
        "P": expand(coeff["p"]),
        "a_x": expand(coeff["a_x"]),
        "a_y": np.zeros_like(D),
        "a_z": expand(coeff["a_z"]),
    }
