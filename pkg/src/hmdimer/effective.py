"""High-frequency effective model of the driven nonlinear dimer.

In the rotating frame of the drive the inter-mode coupling acquires the
periodic envelope F(tau) = exp[i x cos(tau) + i (x f / 2) cos(2 tau + phi)]
with x = A/w.  Averaging renormalizes the tunneling by the mean envelope
F_bar, and at second order in v/w a static bias delta between the two modes
appears.  delta is odd in phi and vanishes for f = 0, so it is the witness
of broken generalized time-reversal symmetry: its sign selects the mode the
system localizes into.

All series here are Bessel-function expansions of the envelope; each one has
an independent quadrature twin used for validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import jv

from .drive import DriveParams

__all__ = [
    "EffectiveParams",
    "effective_params",
    "f_envelope",
    "f_bar",
    "f_bar_by_quadrature",
    "f_bar_zeros",
    "phi_correction",
    "phi_correction_by_quadrature",
    "delta_bias",
    "delta_by_quadrature",
    "linear_splitting",
    "effective_rhs",
    "effective_stationary_states",
]

_IPOW = np.array([1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j])

_TAIL_TARGET = 1e-15


def _ipow(k) -> np.ndarray:
    """Exact integer powers of the imaginary unit."""
    return _IPOW[np.asarray(k) % 4]


def _bessel_cutoff(z: float, floor: int) -> int:
    """Smallest order m with the tail bound (z/2)^(m+1)/(m+1)! below 1e-15.

    |J_m(z)| <= (z/2)^m / m! for real z, so truncating the order sum at m
    leaves a tail controlled by the first omitted term.
    """
    z = abs(z)
    m = floor
    term = (0.5 * z) ** (m + 1) / math.factorial(m + 1) if z > 0 else 0.0
    while term > _TAIL_TARGET:
        m += 1
        term *= 0.5 * z / (m + 1)
        if m > 400:
            raise ValueError(f"Bessel cutoff did not stabilize for argument {z}")
    return m


def _xy(drive: DriveParams) -> tuple[float, float]:
    x = drive.a_over_omega
    return x, 0.5 * x * drive.ratio


def f_envelope(tau, drive: DriveParams):
    """The periodic coupling envelope F(tau) in the rotating frame."""
    x, y = _xy(drive)
    return np.exp(1j * (x * np.cos(tau) + y * np.cos(2.0 * tau + drive.phase)))


def f_bar(drive: DriveParams, m_cutoff: int | None = None) -> complex:
    """Cycle average of the coupling envelope (tunneling renormalization).

    Expanding both exponentials in Bessel series and keeping the zero
    harmonic gives

        F_bar = sum_m J_{-2m}(x) J_m(x f / 2) i^{-m} e^{i m phi}.

    F_bar is real for phi = +-pi/2 and its zeros mark coherent destruction
    of tunneling.
    """
    x, y = _xy(drive)
    mc = _bessel_cutoff(y, 12) if m_cutoff is None else m_cutoff
    ms = np.arange(-mc, mc + 1)
    terms = jv(-2 * ms, x) * jv(ms, y) * _ipow(-ms) * np.exp(1j * ms * drive.phase)
    return complex(terms.sum())


def f_bar_by_quadrature(drive: DriveParams, n: int = 4096) -> complex:
    """F_bar from direct trapezoidal averaging of the envelope."""
    tau = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return complex(np.mean(f_envelope(tau, drive)))


def f_bar_zeros(
    drive: DriveParams, lo: float, hi: float, n_scan: int = 2000
) -> list[float]:
    """Zeros of F_bar in A/w over [lo, hi] for a drive with real F_bar.

    Only phases phi = +-pi/2 (mod pi) make F_bar real so that sign changes
    bracket true zeros; other phases raise ValueError.
    """
    r = (drive.phase - 0.5 * np.pi) % np.pi
    if min(r, np.pi - r) > 1e-9:
        raise ValueError("f_bar is complex away from phi = +-pi/2; no real zeros")

    def g(xv: float) -> float:
        return f_bar(drive.with_a_over_omega(xv)).real

    xs = np.linspace(lo, hi, n_scan)
    vals = np.array([g(xv) for xv in xs])
    roots = []
    for i in range(n_scan - 1):
        if vals[i] == 0.0:
            roots.append(float(xs[i]))
        elif vals[i] * vals[i + 1] < 0.0:
            roots.append(float(brentq(g, xs[i], xs[i + 1], xtol=1e-12)))
    if vals[-1] == 0.0:
        roots.append(float(xs[-1]))
    return roots


def phi_correction(tau, drive: DriveParams, m_cutoff: int | None = None,
                   n_cutoff: int | None = None):
    """First-order micromotion kernel Phi(tau).

    Phi is i times the zero-mean antiderivative of F - F_bar.  In Bessel
    form it collects every harmonic k = 2m + n except k = 0:

        Phi(tau) = sum_{m,n, 2m+n != 0} J_n(x) J_m(x f / 2)
                   i^(m+n) e^(i m phi) e^(i (2m+n) tau) / (2m + n).

    Accepts scalar or array tau.
    """
    x, y = _xy(drive)
    mc = _bessel_cutoff(y, 12) if m_cutoff is None else m_cutoff
    nc = _bessel_cutoff(x, 20) if n_cutoff is None else n_cutoff
    ms = np.arange(-mc, mc + 1)
    ns = np.arange(-nc, nc + 1)

    kk = 2 * ms[:, None] + ns[None, :]
    coef = (
        jv(ns[None, :], x)
        * jv(ms[:, None], y)
        * _ipow(ms[:, None] + ns[None, :])
        * np.exp(1j * ms[:, None] * drive.phase)
    )
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(kk == 0, 0.0, coef / np.where(kk == 0, 1, kk))

    # aggregate per harmonic so evaluation is a short Fourier sum
    kmax = 2 * mc + nc
    per_k = np.zeros(2 * kmax + 1, dtype=complex)
    np.add.at(per_k, (kk + kmax).ravel(), coef.ravel())

    tau_arr = np.asarray(tau, dtype=float)
    ks = np.arange(-kmax, kmax + 1)
    out = np.exp(1j * np.outer(ks, tau_arr.ravel())).T @ per_k
    out = out.reshape(tau_arr.shape)
    return complex(out) if tau_arr.ndim == 0 else out


def phi_correction_by_quadrature(
    drive: DriveParams, n: int = 4096
) -> tuple[np.ndarray, np.ndarray]:
    """Micromotion kernel via FFT antidifferentiation of the envelope.

    Returns (tau grid, Phi values).  Independent of the Bessel series: the
    envelope is sampled, its mean removed, and the antiderivative taken in
    Fourier space.
    """
    tau = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    fv = f_envelope(tau, drive)
    g = fv - fv.mean()
    gh = np.fft.fft(g) / n
    k = np.fft.fftfreq(n, d=1.0 / n)
    with np.errstate(divide="ignore", invalid="ignore"):
        ah = np.where(k == 0, 0.0, gh / np.where(k == 0, 1.0, k))
    # Phi = i * antiderivative, antiderivative coeffs are gh/(i k)
    phi_vals = np.fft.ifft(ah) * n
    return tau, phi_vals


def _delta_grids(x: float, y: float, m_cutoff: int | None, big_m_cutoff: int | None):
    mc = _bessel_cutoff(y, 12) if m_cutoff is None else m_cutoff
    bc = (
        _bessel_cutoff(x, 20) + 2 * mc
        if big_m_cutoff is None
        else big_m_cutoff
    )
    bc = max(bc, 40)
    return mc, bc


def delta_bias(drive: DriveParams, m_cutoff: int | None = None,
               big_m_cutoff: int | None = None) -> float:
    """Second-order bias coefficient delta of the effective model.

    delta is the cycle average of F Phi*; it feeds the static inter-mode
    bias delta' = (v^2 / w) delta.  Two algebraically distinct evaluations
    are carried out on every call: the full double-order sum over all
    nonzero harmonics M, and the reduced form restricted to M > 0 where the
    two phase factors combine into 2i sin((m - l) phi).  Their agreement
    within 1e-12 is asserted, as is reality of the result.
    """
    x, y = _xy(drive)
    phi = drive.phase
    mc, bc = _delta_grids(x, y, m_cutoff, big_m_cutoff)
    ms = np.arange(-mc, mc + 1)
    ls = np.arange(-mc, mc + 1)

    def bessel_block(big_ms: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        jm = jv(big_ms[:, None] - 2 * ms[None, :], x) * jv(ms[None, :], y)
        return jm[:, :, None], jm[:, None, :], big_ms[:, None, None]

    # full sum over M != 0
    big_all = np.concatenate([np.arange(-bc, 0), np.arange(1, bc + 1)])
    jm_m, jm_l, big = bessel_block(big_all)
    sign = np.where((big - ls[None, None, :]) % 2 == 0, 1.0, -1.0)
    phase_pow = _ipow(2 * big - ms[None, :, None] - ls[None, None, :])
    osc = np.exp(1j * (ms[None, :, None] - ls[None, None, :]) * phi)
    full = np.sum(sign / big * phase_pow * osc * jm_m * jm_l)

    # reduced sum over M > 0
    big_pos = np.arange(1, bc + 1)
    jm_m, jm_l, big = bessel_block(big_pos)
    sign = np.where((big - ls[None, None, :]) % 2 == 0, 1.0, -1.0)
    phase_pow = _ipow(2 * big - ms[None, :, None] - ls[None, None, :])
    osc = 2j * np.sin((ms[None, :, None] - ls[None, None, :]) * phi)
    reduced = np.sum(sign / big * phase_pow * osc * jm_m * jm_l)

    if abs(full.imag) > 1e-12 or abs(reduced.imag) > 1e-12:
        raise ArithmeticError(
            f"bias coefficient came out complex: full={full}, reduced={reduced}"
        )
    if abs(full - reduced) > 1e-12:
        raise ArithmeticError(
            f"bias sum cross-check failed: full={full.real}, reduced={reduced.real}"
        )
    return float(reduced.real)


def delta_by_quadrature(drive: DriveParams, n: int = 4096) -> complex:
    """Bias coefficient from quadrature, avg of F Phi* on a dense grid."""
    _, phi_vals = phi_correction_by_quadrature(drive, n)
    tau = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    return complex(np.mean(f_envelope(tau, drive) * np.conj(phi_vals)))


@dataclass(frozen=True)
class EffectiveParams:
    """Static parameters of the averaged two-mode model.

    v_eff is the renormalized (complex) tunneling v F_bar, delta_eff the
    second-order bias (v^2 / w) delta, chi the bare nonlinearity.
    epsilon_small = v / w is the expansion parameter; the averaged model is
    trustworthy for epsilon_small well below about 0.2.  series_cutoff
    records the order-sum cutoff used for the underlying Bessel series.
    """

    v_eff: complex
    delta_eff: float
    chi: float
    epsilon_small: float
    series_cutoff: int


def effective_params(drive: DriveParams, v: float, chi: float,
                     m_cutoff: int | None = None,
                     big_m_cutoff: int | None = None) -> EffectiveParams:
    """Assemble the averaged-model parameters for a given drive and dimer."""
    x, y = _xy(drive)
    mc, _ = _delta_grids(x, y, m_cutoff, big_m_cutoff)
    w = drive.frequency
    return EffectiveParams(
        v_eff=v * f_bar(drive, m_cutoff),
        delta_eff=v * v / w * delta_bias(drive, m_cutoff, big_m_cutoff),
        chi=chi,
        epsilon_small=v / w,
        series_cutoff=mc,
    )


def linear_splitting(params: EffectiveParams) -> float:
    """Level splitting of the chi = 0 averaged model, sqrt(delta'^2 + |v'|^2)."""
    return float(np.hypot(params.delta_eff, abs(params.v_eff)))


def effective_rhs(a1: complex, a2: complex, params: EffectiveParams
                  ) -> tuple[complex, complex]:
    """Time derivatives (dA1/dt, dA2/dt) of the averaged amplitudes."""
    d, ve, chi = params.delta_eff, params.v_eff, params.chi
    da1 = -1j * (0.5 * d * a1 - chi * abs(a1) ** 2 * a1 - 0.5 * ve * a2)
    da2 = -1j * (-0.5 * d * a2 - chi * abs(a2) ** 2 * a2 - 0.5 * np.conj(ve) * a1)
    return da1, da2


def _stationary_energy(x: float, y: float, params: EffectiveParams, kappa: float
                       ) -> float:
    z = x * x - y * y
    return float(
        0.5 * params.delta_eff * z
        - params.chi * (x ** 4 + y ** 4)
        - kappa * x * y
    )


def effective_stationary_states(
    params: EffectiveParams,
) -> list[tuple[float, tuple[complex, complex]]]:
    """All stationary states of the averaged model, sorted by energy.

    Writing A1 = cos(alpha), A2 = sin(alpha) e^(-i gamma) with
    gamma = arg(v_eff) reduces stationarity to a single real equation on
    u = 2 alpha in [0, 2 pi):

        h(u) = delta' sin(u) - (chi / 2) sin(2 u) + |v_eff| cos(u) = 0.

    The relative phase is pinned to -gamma mod pi by stationarity whenever
    v_eff != 0; the mod-pi freedom is absorbed into the sign of sin(alpha).
    h is smooth, periodic and zero-mean, so all states are found by dense
    sampling plus bracketed root polishing.  Returns 2 to 4 states; each
    entry is (energy, (A1, A2)) with A1 real nonnegative.
    """
    d, chi = params.delta_eff, params.chi
    kappa = abs(params.v_eff)
    gamma = float(np.angle(params.v_eff)) if kappa > 0 else 0.0

    if chi == 0.0:
        h2 = np.array(
            [[0.5 * d, -0.5 * params.v_eff],
             [-0.5 * np.conj(params.v_eff), -0.5 * d]]
        )
        evals, evecs = np.linalg.eigh(h2)
        out = []
        for i in range(2):
            vec = evecs[:, i]
            vec = vec * np.exp(-1j * np.angle(vec[0])) if abs(vec[0]) > 1e-12 else vec
            out.append((float(evals[i]), (complex(vec[0]), complex(vec[1]))))
        return sorted(out, key=lambda s: s[0])

    def h(u: float) -> float:
        return d * np.sin(u) - 0.5 * chi * np.sin(2.0 * u) + kappa * np.cos(u)

    n_scan = 2048
    us = np.linspace(0.0, 2.0 * np.pi, n_scan, endpoint=False)
    vals = h(us)
    roots: list[float] = []
    for i in range(n_scan):
        j = (i + 1) % n_scan
        if vals[i] == 0.0:
            roots.append(float(us[i]))
        elif vals[i] * vals[j] < 0.0:
            lo, hi = us[i], us[i] + (2.0 * np.pi / n_scan)
            roots.append(float(brentq(h, lo, hi, xtol=1e-14)))

    # drop duplicates, including the wrap-around pair
    uniq: list[float] = []
    for u in sorted(r % (2.0 * np.pi) for r in roots):
        if not uniq or (u - uniq[-1] > 1e-9 and (2.0 * np.pi - u + uniq[0]) > 1e-9):
            uniq.append(u)

    states = []
    for u in uniq:
        alpha = 0.5 * u
        xv, yv = np.cos(alpha), np.sin(alpha)
        if xv < 0.0:
            xv, yv = -xv, -yv
        energy = _stationary_energy(xv, yv, params, kappa)
        states.append((energy, (complex(xv), yv * np.exp(-1j * gamma))))
    return sorted(states, key=lambda s: s[0])
