"""Nonlinear Floquet states of the driven two-mode system.

The equations of motion for the two mode amplitudes are

    i dc1/dt = -(v/2) c2 + (S(t)/2) c1 - chi |c1|^2 c1
    i dc2/dt = -(v/2) c1 - (S(t)/2) c2 - chi |c2|^2 c2

with the harmonic-mixing bias S(t) from the drive module.  A nonlinear
Floquet state is a solution c(t) = ctilde(t) exp(-i eps t) with ctilde
T-periodic; expanding ctilde in drive harmonics turns the problem into a
self-consistent eigenproblem for the coefficient vector and the quasienergy
eps, which this module solves by frozen-nonlinearity iteration.  Branches of
states are followed through parameter sweeps by overlap continuation, with
localized branches seeded from the averaged model's stationary states.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import hankel, toeplitz

from . import effective
from .drive import DriveParams, drive_antiderivative, drive_value

__all__ = [
    "SystemParams",
    "FloquetState",
    "SpectrumBranch",
    "ConvergenceError",
    "NumericalError",
    "BRANCH_LABELS",
    "fold_quasienergy",
    "floquet_residual",
    "solve_floquet_state",
    "undriven_states",
    "dressed_state_guess",
    "state_amplitudes",
    "population_imbalance",
    "cycle_averaged_population",
    "monodromy_quasienergies",
    "discover_states",
    "linear_state_pair",
    "normal_state_pair",
    "continue_branch",
    "compute_spectrum",
]

DEFAULT_CUTOFF = 16
DEFAULT_TOL = 1e-10
MAX_CUTOFF = 64

BRANCH_LABELS = ("normal_lower", "normal_upper", "bifurcated_plus", "bifurcated_minus")


class ConvergenceError(RuntimeError):
    """Self-consistent iteration failed to reach the residual tolerance.

    Carries the best iterate seen so far in ``best_state`` so callers can
    inspect how close the solve came (branch continuation uses the failure
    itself as the branch-termination signal and discards the iterate).
    """

    def __init__(self, message: str, best_state: "FloquetState | None" = None):
        super().__init__(message)
        self.best_state = best_state


class NumericalError(RuntimeError):
    """Non-finite numbers appeared where they never should."""


@dataclass(frozen=True)
class SystemParams:
    """Static system parameters: tunneling v, nonlinearity chi, and the drive."""

    v: float
    chi: float
    drive: DriveParams

    def __post_init__(self) -> None:
        if self.v < 0.0:
            raise ValueError(f"tunneling v must be nonnegative, got {self.v}")
        if self.chi < 0.0:
            raise ValueError(f"nonlinearity chi must be nonnegative, got {self.chi}")

    def at_a_over_omega(self, x: float) -> "SystemParams":
        return dataclasses.replace(self, drive=self.drive.with_a_over_omega(x))


@dataclass
class FloquetState:
    """One nonlinear Floquet state in Fourier representation.

    coeffs_a[n + cutoff] and coeffs_b[n + cutoff] are the harmonic-n
    coefficients of the periodic parts of modes 1 and 2.  The quasienergy
    lives in the first zone (-w/2, w/2]; residual_norm is the L2 norm of
    the nonlinear eigenproblem residual achieved by the solver (inf for
    raw guesses that were never solved).
    """

    quasienergy: float
    coeffs_a: np.ndarray
    coeffs_b: np.ndarray
    cutoff: int
    residual_norm: float = np.inf

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.coeffs_a, self.coeffs_b])

    def norm(self) -> float:
        return float(np.sqrt(np.sum(np.abs(self.coeffs_a) ** 2)
                             + np.sum(np.abs(self.coeffs_b) ** 2)))


def fold_quasienergy(eps: float, omega: float) -> float:
    """Fold a quasienergy into the first zone (-omega/2, omega/2]."""
    return eps - omega * np.ceil(eps / omega - 0.5)


def _fold_index(eps: float, omega: float) -> int:
    return int(np.ceil(eps / omega - 0.5))


def _shift_harmonics(c: np.ndarray, k: int) -> np.ndarray:
    """Shift coefficients c'_n = c_{n+k}, zero-filling at the edges."""
    if k == 0:
        return c.copy()
    out = np.zeros_like(c)
    if abs(k) < len(c):
        if k > 0:
            out[:-k] = c[k:]
        else:
            out[-k:] = c[:k]
    return out


def _drive_coupling(drive: DriveParams, n_dim: int) -> np.ndarray:
    """Fourier matrix of S/2 acting on one mode's harmonic ladder."""
    a, f, phi = drive.amplitude, drive.ratio, drive.phase
    c1 = 0.25j * a
    c2 = 0.25j * a * f * np.exp(1j * phi)
    m = np.zeros((n_dim, n_dim), dtype=complex)
    idx = np.arange(n_dim)
    m[idx[1:], idx[1:] - 1] = c1
    m[idx[:-1], idx[:-1] + 1] = np.conj(c1)
    if n_dim > 2:
        m[idx[2:], idx[2:] - 2] = c2
        m[idx[:-2], idx[:-2] + 2] = np.conj(c2)
    return m


def _cubic_profile(c: np.ndarray) -> np.ndarray:
    """Autocorrelation u_q = sum_m c_m conj(c_{m-q}), q = -(L-1)..(L-1)."""
    return np.correlate(c, c, mode="full")


def _cubic_matrix(c: np.ndarray) -> np.ndarray:
    """Toeplitz matrix of the frozen cubic term, entries u_{j-n}."""
    u = _cubic_profile(c)
    L = len(c)
    return toeplitz(u[L - 1:], u[:L][::-1])


def _pair_matrix(c: np.ndarray) -> np.ndarray:
    """Hankel matrix of pair sums v_{j+n} with v_s = sum_m c_m c_{s-m}.

    This is the anti-holomorphic part of the cubic term's derivative; the
    holomorphic part is twice the frozen Toeplitz matrix.
    """
    v = np.convolve(c, c)
    L = len(c)
    return hankel(v[:L], v[L - 1:])


def _build_matrix(params: SystemParams, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hermitian frozen-nonlinearity Floquet matrix at coefficient vectors (a, b)."""
    n = len(a)
    cutoff = (n - 1) // 2
    w = params.drive.frequency
    ladder = np.diag(w * np.arange(-cutoff, cutoff + 1).astype(float))
    dmat = _drive_coupling(params.drive, n)
    haa = ladder + dmat - params.chi * _cubic_matrix(a)
    hbb = ladder - dmat - params.chi * _cubic_matrix(b)
    hop = -0.5 * params.v * np.eye(n)
    return np.block([[haa, hop], [hop, hbb]])


def floquet_residual(state: FloquetState, params: SystemParams) -> float:
    """L2 norm of the nonlinear eigenproblem residual of a candidate state."""
    psi = state.stacked()
    h = _build_matrix(params, state.coeffs_a, state.coeffs_b)
    r = h @ psi - state.quasienergy * psi
    return float(np.linalg.norm(r))


def _embed(state: FloquetState, cutoff: int) -> FloquetState:
    """Zero-pad a state to a larger harmonic cutoff."""
    if cutoff == state.cutoff:
        return state
    if cutoff < state.cutoff:
        raise ValueError("can only embed into a larger cutoff")
    pad = cutoff - state.cutoff
    return FloquetState(
        quasienergy=state.quasienergy,
        coeffs_a=np.pad(state.coeffs_a, pad),
        coeffs_b=np.pad(state.coeffs_b, pad),
        cutoff=cutoff,
        residual_norm=state.residual_norm,
    )


def _overlap(s1: FloquetState, s2: FloquetState) -> float:
    n = max(s1.cutoff, s2.cutoff)
    v1, v2 = _embed(s1, n).stacked(), _embed(s2, n).stacked()
    n1, n2 = np.linalg.norm(v1), np.linalg.norm(v2)
    if n1 == 0.0 or n2 == 0.0:
        return 0.0
    return float(abs(np.vdot(v1, v2)) / (n1 * n2))


def _gauge_fix(psi: np.ndarray) -> np.ndarray:
    """Rotate the global phase so the largest-magnitude entry is real positive."""
    idx = int(np.argmax(np.abs(psi)))
    ph = psi[idx]
    if abs(ph) == 0.0:
        return psi
    return psi * (np.conj(ph) / abs(ph))


def _rayleigh(params: SystemParams, psi: np.ndarray) -> tuple[float, float]:
    """Quasienergy estimate and residual norm of psi under its own mean field."""
    half = len(psi) // 2
    h = _build_matrix(params, psi[:half], psi[half:])
    eps = float(np.real(np.vdot(psi, h @ psi)))
    res = float(np.linalg.norm(h @ psi - eps * psi))
    return eps, res


def _damped_stage(params: SystemParams, psi: np.ndarray, tol: float,
                  n_iter: int, damping: float):
    """Frozen-matrix iteration with overlap selection and mixing.

    Returns (converged, best_res, best_psi, best_eps).  The mean-field map
    contracts onto dynamically stable states; unstable ones repel it, which
    the Newton stage below handles.
    """
    half = len(psi) // 2
    best: tuple[float, np.ndarray, float] | None = None
    for _ in range(n_iter):
        h = _build_matrix(params, psi[:half], psi[half:])
        if not np.all(np.isfinite(h)):
            raise NumericalError("frozen Floquet matrix contains non-finite entries")
        _, vecs = np.linalg.eigh(h)
        sel = int(np.argmax(np.abs(vecs.conj().T @ psi)))
        cand = vecs[:, sel]
        inner = np.vdot(psi, cand)
        if abs(inner) > 0.0:
            cand = cand * (np.conj(inner) / abs(inner))
        eps, res = _rayleigh(params, cand)
        if not np.isfinite(res):
            raise NumericalError("residual became non-finite during iteration")
        if best is None or res < best[0]:
            best = (res, cand.copy(), eps)
        if res <= tol:
            return True, res, cand, eps
        psi = (1.0 - damping) * psi + damping * cand
        psi = psi / np.linalg.norm(psi)
    return False, *best


def _newton_stage(params: SystemParams, psi: np.ndarray, eps: float, tol: float,
                  n_iter: int):
    """Newton iteration on the full nonlinear eigensystem.

    Solves R(psi, eps) = 0 together with the norm constraint and a phase
    pin against the starting vector, in real variables via least squares.
    Converges to the nearest state whether or not the mean-field map is
    stable there, at the price of a smaller basin than the damped stage.
    """
    half = len(psi) // 2
    chi = params.chi
    ref = psi.copy()
    best: tuple[float, np.ndarray, float] | None = None
    prev_res = np.inf
    for _ in range(n_iter):
        a, b = psi[:half], psi[half:]
        h = _build_matrix(params, a, b)
        r = h @ psi - eps * psi
        res = float(np.linalg.norm(r))
        if not np.isfinite(res):
            break
        if best is None or res < best[0]:
            best = (res, psi.copy(), eps)
        if res <= tol and abs(np.vdot(psi, psi).real - 1.0) <= 1e-10:
            return True, res, psi, eps
        if res > 10.0 * prev_res:
            break  # left the basin, no point continuing
        prev_res = res

        amat = h - eps * np.eye(2 * half, dtype=complex)
        amat[:half, :half] -= chi * _cubic_matrix(a)
        amat[half:, half:] -= chi * _cubic_matrix(b)
        bmat = np.zeros_like(amat)
        bmat[:half, :half] = -chi * _pair_matrix(a)
        bmat[half:, half:] = -chi * _pair_matrix(b)

        jrr = amat.real + bmat.real
        jri = -amat.imag + bmat.imag
        jir = amat.imag + bmat.imag
        jii = amat.real - bmat.real
        col = np.concatenate([-psi.real, -psi.imag])[:, None]
        top = np.hstack([jrr, jri, col[: 2 * half]])
        mid = np.hstack([jir, jii, col[2 * half:]])
        norm_row = np.concatenate([2.0 * psi.real, 2.0 * psi.imag, [0.0]])
        phase_row = np.concatenate([-ref.imag, ref.real, [0.0]])
        jac = np.vstack([top, mid, norm_row[None, :], phase_row[None, :]])
        fvec = np.concatenate([
            r.real, r.imag,
            [np.vdot(psi, psi).real - 1.0],
            [np.vdot(ref, psi).imag],
        ])
        step, *_ = np.linalg.lstsq(jac, -fvec, rcond=None)
        n_c = 2 * half
        psi = (psi.real + step[:n_c]) + 1j * (psi.imag + step[n_c:2 * n_c])
        eps = eps + float(step[-1])
    if best is None:
        best = (np.inf, psi, eps)
    return False, *best


def _solve_fixed_cutoff(params: SystemParams, guess: FloquetState, tol: float,
                        max_iter: int, damping: float, method: str) -> FloquetState:
    if method not in ("auto", "damped", "newton"):
        raise ValueError(f"unknown method {method!r}")
    psi = guess.stacked()
    nrm = np.linalg.norm(psi)
    if nrm == 0.0 or not np.all(np.isfinite(psi)):
        raise ValueError("guess state must be finite with nonzero norm")
    psi = psi / nrm
    omega = params.drive.frequency

    tried = []
    if method == "damped":
        ok, res, psi, eps = _damped_stage(params, psi, tol, max_iter, damping)
        tried.append((res, psi, eps))
    elif method == "newton":
        eps0, _ = _rayleigh(params, psi)
        ok, res, psi, eps = _newton_stage(params, psi, eps0, tol, max_iter)
        tried.append((res, psi, eps))
    else:
        n_damped = min(10, max_iter)
        ok, res, psi, eps = _damped_stage(params, psi, tol, n_damped, damping)
        tried.append((res, psi, eps))
        if not ok:
            ok, res, psi, eps = _newton_stage(params, psi, eps, tol,
                                              max_iter - n_damped)
            tried.append((res, psi, eps))

    if ok:
        return _finalize(params, psi, eps, omega, guess.cutoff)
    res, psi, eps = min(tried, key=lambda t: t[0])
    raise ConvergenceError(
        f"no convergence within {max_iter} iterations "
        f"(method {method}, best residual {res:.3e})",
        best_state=_finalize(params, psi, eps, omega, guess.cutoff),
    )


def _finalize(params: SystemParams, psi: np.ndarray, eps: float, omega: float,
              cutoff: int) -> FloquetState:
    """Fold the quasienergy, shift harmonics accordingly, fix phase and norm."""
    k = _fold_index(eps, omega)
    half = 2 * cutoff + 1
    a, b = psi[:half], psi[half:]
    if k != 0:
        a, b = _shift_harmonics(a, k), _shift_harmonics(b, k)
        eps = eps - k * omega
    psi = np.concatenate([a, b])
    psi = _gauge_fix(psi / np.linalg.norm(psi))
    a, b = psi[:half], psi[half:]
    h = _build_matrix(params, a, b)
    eps = float(np.real(np.vdot(psi, h @ psi)))
    res = float(np.linalg.norm(h @ psi - eps * psi))
    return FloquetState(quasienergy=eps, coeffs_a=a, coeffs_b=b, cutoff=cutoff,
                        residual_norm=res)


def solve_floquet_state(params: SystemParams, guess: FloquetState,
                        tol: float = DEFAULT_TOL, max_iter: int = 200,
                        damping: float = 0.5, method: str = "auto",
                        adapt_cutoff: bool = True,
                        max_cutoff: int = MAX_CUTOFF) -> FloquetState:
    """Solve the self-consistent Floquet eigenproblem near a guess state.

    Two stages are available.  The damped stage freezes the cubic term at
    the current iterate, diagonalizes the resulting Hermitian matrix, picks
    the eigenvector with maximal overlap against the iterate and mixes it in
    with weight ``damping``; it is robust for rough guesses but can only
    reach states where the mean-field map contracts.  The Newton stage
    iterates the full nonlinear system and also reaches mean-field-unstable
    states (the balanced state beyond its symmetry-breaking point needs
    this), but wants a close guess.  ``method`` picks "damped", "newton", or
    "auto" (a short damped phase, then Newton on whatever it reached).

    Convergence is declared when the residual under the state's own mean
    field drops below ``tol``.  The returned state is normalized,
    gauge-fixed (largest coefficient real positive) and has its quasienergy
    folded into the first zone.  With ``adapt_cutoff`` the solve is repeated
    at a cutoff enlarged by 8 whenever the outermost harmonic shell carries
    at least 1e-12 of the norm, up to ``max_cutoff``.

    Raises ConvergenceError (carrying the best iterate) when the iteration
    budget is exhausted, NumericalError on non-finite intermediates.
    """
    state = _solve_fixed_cutoff(params, guess, tol, max_iter, damping, method)
    while adapt_cutoff and state.cutoff < max_cutoff:
        shell = (
            abs(state.coeffs_a[0]) ** 2 + abs(state.coeffs_a[-1]) ** 2
            + abs(state.coeffs_b[0]) ** 2 + abs(state.coeffs_b[-1]) ** 2
        )
        if shell < 1e-12:
            break
        bigger = min(state.cutoff + 8, max_cutoff)
        state = _solve_fixed_cutoff(params, _embed(state, bigger), tol,
                                    max_iter, damping, method)
    return state


def undriven_states(params: SystemParams, cutoff: int = DEFAULT_CUTOFF
                    ) -> tuple[FloquetState, FloquetState]:
    """Exact symmetric/antisymmetric states of the undriven dimer.

    At A = 0 the balanced combinations (1, +-1)/sqrt(2) solve the nonlinear
    problem exactly with quasienergies -+ v/2 - chi/2.  Returned in order
    (symmetric, antisymmetric); these seed continuation from the undriven
    limit.
    """
    omega = params.drive.frequency
    half = 2 * cutoff + 1
    out = []
    for sign in (+1.0, -1.0):
        a = np.zeros(half, dtype=complex)
        b = np.zeros(half, dtype=complex)
        a[cutoff] = 1.0 / np.sqrt(2.0)
        b[cutoff] = sign / np.sqrt(2.0)
        eps = fold_quasienergy(-sign * params.v / 2.0 - params.chi / 2.0, omega)
        out.append(FloquetState(eps, a, b, cutoff, residual_norm=np.inf))
    return out[0], out[1]


def dressed_state_guess(params: SystemParams, amps: tuple[complex, complex],
                        cutoff: int = DEFAULT_CUTOFF) -> FloquetState:
    """Periodic guess built from averaged-model amplitudes.

    Undoes the averaging gauge: ctilde_1 = A1 exp(-i theta(t)/2) and
    ctilde_2 = A2 exp(+i theta(t)/2) with theta the accumulated drive phase.
    Coefficients are read off by FFT on a dense time grid.
    """
    n_grid = 512
    period = params.drive.period
    ts = np.arange(n_grid) * (period / n_grid)
    theta = drive_antiderivative(ts, params.drive)
    c1 = amps[0] * np.exp(-0.5j * theta)
    c2 = amps[1] * np.exp(+0.5j * theta)
    f1 = np.fft.fft(c1) / n_grid
    f2 = np.fft.fft(c2) / n_grid
    ns = np.arange(-cutoff, cutoff + 1)
    a = f1[ns % n_grid]
    b = f2[ns % n_grid]
    psi = np.concatenate([a, b])
    psi = psi / np.linalg.norm(psi)
    return FloquetState(0.0, psi[: len(a)], psi[len(a):], cutoff,
                        residual_norm=np.inf)


def state_amplitudes(state: FloquetState, params: SystemParams, t):
    """Evaluate the periodic parts (ctilde_1, ctilde_2) at times t."""
    w = params.drive.frequency
    ns = np.arange(-state.cutoff, state.cutoff + 1)
    phases = np.exp(1j * np.multiply.outer(np.asarray(t, dtype=float), ns * w))
    return phases @ state.coeffs_a, phases @ state.coeffs_b


def population_imbalance(state: FloquetState) -> float:
    """Cycle-averaged population imbalance <|c1|^2 - |c2|^2>."""
    return float(np.sum(np.abs(state.coeffs_a) ** 2)
                 - np.sum(np.abs(state.coeffs_b) ** 2))


def cycle_averaged_population(state: FloquetState, mode: int) -> float:
    """Cycle-averaged population of mode 1 or 2."""
    if mode == 1:
        return float(np.sum(np.abs(state.coeffs_a) ** 2))
    if mode == 2:
        return float(np.sum(np.abs(state.coeffs_b) ** 2))
    raise ValueError(f"mode must be 1 or 2, got {mode}")


def monodromy_quasienergies(params: SystemParams, rtol: float = 1e-12,
                            atol: float = 1e-12) -> tuple[float, float]:
    """Linear (chi = 0) quasienergies from the one-period evolution operator.

    Integrates the 2x2 Schroedinger propagator over one period with a
    high-order adaptive scheme and reads the quasienergies off the
    eigenvalue phases.  Serves as an independent check on the Fourier-space
    solver; only valid for chi = 0.
    """
    if params.chi != 0.0:
        raise ValueError("monodromy quasienergies are defined for chi = 0 only")
    v = params.v
    period = params.drive.period

    def rhs(t, y):
        u = y.reshape(2, 2)
        s = drive_value(t, params.drive)
        h = np.array([[0.5 * s, -0.5 * v], [-0.5 * v, -0.5 * s]], dtype=complex)
        return (-1j * h @ u).ravel()

    y0 = np.eye(2, dtype=complex).ravel()
    sol = solve_ivp(rhs, (0.0, period), y0, method="DOP853", rtol=rtol, atol=atol)
    if not sol.success:
        raise NumericalError(f"monodromy integration failed: {sol.message}")
    u = sol.y[:, -1].reshape(2, 2)
    lams = np.linalg.eigvals(u)
    if np.max(np.abs(np.abs(lams) - 1.0)) > 1e-8:
        raise NumericalError("monodromy matrix lost unitarity beyond 1e-8")
    eps = [fold_quasienergy(-np.angle(lam) / period, params.drive.frequency)
           for lam in lams]
    return tuple(sorted(eps))


def linear_state_pair(params: SystemParams, cutoff: int = DEFAULT_CUTOFF
                      ) -> tuple[FloquetState, FloquetState]:
    """The two chi = 0 Floquet states, from one dense eigensolve.

    Every physical state appears in the extended eigenproblem as a ladder of
    copies shifted by multiples of omega; the two physical representatives
    are picked as the eigenvectors with the smallest mean-square harmonic
    index.  Returned sorted by quasienergy.
    """
    p0 = dataclasses.replace(params, chi=0.0)
    half = 2 * cutoff + 1
    zeros = np.zeros(half, dtype=complex)
    h = _build_matrix(p0, zeros, zeros)
    evals, vecs = np.linalg.eigh(h)
    ns = np.arange(-cutoff, cutoff + 1).astype(float)
    weight = np.concatenate([ns ** 2, ns ** 2])
    centrality = (np.abs(vecs) ** 2).T @ weight
    order = np.argsort(centrality)
    states = []
    for idx in order[:2]:
        psi = _gauge_fix(vecs[:, idx])
        st = _finalize(p0, psi, float(evals[idx]), params.drive.frequency, cutoff)
        states.append(st)
    return tuple(sorted(states, key=lambda s: s.quasienergy))


def discover_states(params: SystemParams, cutoff: int = DEFAULT_CUTOFF,
                    tol: float = DEFAULT_TOL, extra_guesses=(),
                    **solve_kw) -> list[FloquetState]:
    """All distinct Floquet states reachable from averaged-model seeds.

    Runs one Newton solve from the dressed counterpart of every stationary
    state of the averaged model (plus any ``extra_guesses``, e.g. solutions
    from a neighbouring parameter point) and keeps the distinct solutions,
    sorted by quasienergy.  Seeds that fail to converge are dropped; if none
    converge the last failure is re-raised.
    """
    ep = effective.effective_params(params.drive, params.v, params.chi)
    seeds = [dressed_state_guess(params, amps, cutoff=cutoff)
             for _, amps in effective.effective_stationary_states(ep)]
    seeds.extend(extra_guesses)
    found: list[FloquetState] = []
    failure: ConvergenceError | None = None
    for guess in seeds:
        try:
            st = solve_floquet_state(params, guess, tol=tol, method="newton",
                                     **solve_kw)
        except ConvergenceError as exc:
            failure = exc
            continue
        if all(abs(_overlap(st, other)) < 0.99 for other in found):
            found.append(st)
    if not found:
        raise failure if failure is not None else ConvergenceError(
            "no averaged-model seeds available")
    found.sort(key=lambda s: s.quasienergy)
    return found


def normal_state_pair(params: SystemParams, cutoff: int = DEFAULT_CUTOFF,
                      tol: float = DEFAULT_TOL,
                      **solve_kw) -> tuple[FloquetState, FloquetState]:
    """The two Floquet states with linear counterparts, at full nonlinearity.

    For chi = 0 this is the exact linear pair.  With nonlinearity the pair
    is selected from discover_states by smallest cycle-averaged imbalance:
    past the localization threshold that skips the bifurcated localized
    states, which have no linear counterpart.  Returned sorted by
    quasienergy.
    """
    if params.chi == 0.0:
        return linear_state_pair(params, cutoff=cutoff)
    states = discover_states(params, cutoff=cutoff, tol=tol, **solve_kw)
    if len(states) < 2:
        raise ConvergenceError(
            f"found only {len(states)} distinct states; need 2 for the pair")
    pair = sorted(states, key=lambda s: abs(population_imbalance(s)))[:2]
    return tuple(sorted(pair, key=lambda s: s.quasienergy))


@dataclass
class SpectrumBranch:
    """A connected branch of Floquet states over an A/w grid.

    label is one of BRANCH_LABELS; points holds (A/w, state) pairs in grid
    order; birth is the lowest A/w the branch extends to when it appears via
    a bifurcation inside the sweep (None for branches reaching the sweep
    start).
    """

    label: str
    points: list[tuple[float, FloquetState]] = field(default_factory=list)
    birth: float | None = None

    @property
    def grid(self) -> np.ndarray:
        return np.array([x for x, _ in self.points])

    @property
    def quasienergies(self) -> np.ndarray:
        return np.array([s.quasienergy for _, s in self.points])

    @property
    def imbalances(self) -> np.ndarray:
        return np.array([population_imbalance(s) for _, s in self.points])


def continue_branch(params: SystemParams, grid, seed: FloquetState, label: str,
                    tol: float = DEFAULT_TOL, min_overlap: float = 0.8,
                    method: str = "newton", **solve_kw) -> SpectrumBranch:
    """Follow one branch across an A/w grid by overlap continuation.

    The seed must solve the first grid point (a failure there raises
    ValueError); afterwards each solution seeds the next point.  The branch
    is truncated when the solver stops converging or the overlap between
    consecutive states falls below ``min_overlap``.  Newton solves are the
    default so branches survive their mean-field stability changes.
    """
    if label not in BRANCH_LABELS:
        raise ValueError(f"unknown branch label {label!r}")
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    points: list[tuple[float, FloquetState]] = []
    prev = seed
    for i, x in enumerate(grid):
        p = params.at_a_over_omega(float(x))
        try:
            st = solve_floquet_state(p, prev, tol=tol, method=method, **solve_kw)
        except ConvergenceError as exc:
            if i == 0:
                raise ValueError(
                    f"seed does not solve the first grid point A/w = {x}"
                ) from exc
            break
        if i > 0 and _overlap(prev, st) < min_overlap:
            break
        points.append((float(x), st))
        prev = st
    return SpectrumBranch(label=label, points=points)


def _march_to(params: SystemParams, seed: FloquetState, x_from: float,
              x_to: float, tol: float, step: float = 0.1) -> FloquetState:
    """Continue a single state from x_from to x_to in amplitude."""
    n = max(1, int(np.ceil(abs(x_to - x_from) / step)))
    cur = seed
    for x in np.linspace(x_from, x_to, n + 1)[1:]:
        cur = solve_floquet_state(params.at_a_over_omega(float(x)), cur,
                                  tol=tol, method="newton")
    return cur


def compute_spectrum(params: SystemParams, grid, tol: float = DEFAULT_TOL,
                     cutoff: int = DEFAULT_CUTOFF) -> list[SpectrumBranch]:
    """Quasienergy branch structure over an ascending A/w grid.

    The two normal branches are continued up from the undriven limit.  Extra
    branches are discovered by probing the averaged model for additional
    stationary states, dressing those into guesses at the probe point where
    localization is strongest, dropping duplicates of the normal branches,
    and continuing the novel states in both directions until they die.
    Bifurcated labels are assigned by cycle-averaged imbalance at the probe
    point (largest imbalance -> bifurcated_plus).
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or len(grid) == 0 or np.any(np.diff(grid) <= 0.0):
        raise ValueError("grid must be a nonempty ascending 1-d array")
    if grid[0] < 0.0:
        raise ValueError("grid must start at nonnegative A/w")

    sym, anti = undriven_states(params, cutoff)
    seed_lo = _march_to(params, sym, 0.0, float(grid[0]), tol)
    seed_hi = _march_to(params, anti, 0.0, float(grid[0]), tol)
    lower = continue_branch(params, grid, seed_lo, "normal_lower", tol=tol)
    upper = continue_branch(params, grid, seed_hi, "normal_upper", tol=tol)
    branches = [lower, upper]

    anchor = _novel_anchor(params, grid)
    if anchor is not None:
        x0, extra_amps = anchor
        i0 = int(np.argmin(np.abs(grid - x0)))
        x0 = float(grid[i0])
        novel: list[FloquetState] = []
        for amps in extra_amps:
            guess = dressed_state_guess(params.at_a_over_omega(x0), amps, cutoff)
            try:
                # Newton: damped stages slide off mean-field-unstable states
                st = solve_floquet_state(params.at_a_over_omega(x0), guess,
                                         tol=tol, method="newton")
            except ConvergenceError:
                continue
            dup = False
            for br in branches:
                for x, s in br.points:
                    if x == x0 and _overlap(s, st) > 0.9:
                        dup = True
            for s in novel:
                if _overlap(s, st) > 0.9:
                    dup = True
            if not dup:
                novel.append(st)

        novel.sort(key=population_imbalance, reverse=True)
        labels = ["bifurcated_plus", "bifurcated_minus"]
        normal_at = {}
        for br in branches:
            for x, s in br.points:
                normal_at.setdefault(x, []).append(s)
        for st, label in zip(novel, labels):
            up = continue_branch(params, grid[i0:], st, label, tol=tol)
            down = continue_branch(params, grid[i0::-1], st, label, tol=tol)
            pts = down.points[::-1][:-1] + up.points
            # near a branch endpoint the continuation can slide onto a normal
            # branch; trim such duplicated tails
            def _dup(point) -> bool:
                x, s = point
                return any(_overlap(s, s2) > 0.98 for s2 in normal_at.get(x, []))
            while pts and _dup(pts[-1]):
                pts.pop()
            while pts and _dup(pts[0]):
                pts.pop(0)
            birth = pts[0][0] if pts and pts[0][0] > grid[0] else None
            branches.append(SpectrumBranch(label=label, points=pts, birth=birth))

    return branches


def _novel_anchor(params: SystemParams, grid: np.ndarray
                  ) -> tuple[float, list[tuple[complex, complex]]] | None:
    """Probe the averaged model for extra stationary states along the grid.

    Returns (anchor A/w, averaged amplitudes of all stationary states there)
    for the probe point with the strongest localization, or None when the
    averaged model never has more than two states on this grid.
    """
    stride = max(1, len(grid) // 40)
    best_x, best_z, best_states = None, 0.0, None
    for x in grid[::stride]:
        p = params.at_a_over_omega(float(x))
        eff = effective.effective_params(p.drive, p.v, p.chi)
        states = effective.effective_stationary_states(eff)
        if len(states) <= 2:
            continue
        zmax = max(abs(abs(a1) ** 2 - abs(a2) ** 2) for _, (a1, a2) in states)
        if best_x is None or zmax > best_z:
            best_x, best_z, best_states = float(x), zmax, states
    if best_x is None:
        return None
    return best_x, [amps for _, amps in best_states]
