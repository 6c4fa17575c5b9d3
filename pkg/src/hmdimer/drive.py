"""Harmonic-mixing drive signal and its symmetry classification.

The two-mode system is driven by an energy bias

    S(t) = -A [sin(w t) + f sin(2 w t + phi)],

a fundamental plus a relative-phase-shifted second harmonic.  The relative
phase phi controls which generalized time symmetries of S survive, which in
turn decides whether quasienergy crossings are exact or avoided and whether
a directed bias between the modes can build up.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DriveParams",
    "SymmetryReport",
    "SymmetryClassificationError",
    "canonical_phase",
    "drive_value",
    "drive_antiderivative",
    "classify_symmetries",
]


class SymmetryClassificationError(RuntimeError):
    """Analytic and sampled symmetry verdicts disagree; indicates a bug."""


def canonical_phase(phi: float) -> float:
    """Map a phase to the canonical interval [-pi, pi)."""
    return (phi + np.pi) % (2.0 * np.pi) - np.pi


@dataclass(frozen=True)
class DriveParams:
    """Parameters of the two-harmonic drive.

    Attributes:
        amplitude: overall drive strength A.
        ratio: second-harmonic admixture f (dimensionless).
        frequency: angular frequency w of the fundamental; must be positive.
        phase: relative phase phi of the second harmonic, stored canonically
            in [-pi, pi).
    """

    amplitude: float
    ratio: float
    frequency: float
    phase: float = 0.0

    def __post_init__(self) -> None:
        if not self.frequency > 0.0:
            raise ValueError(f"drive frequency must be positive, got {self.frequency}")
        object.__setattr__(self, "phase", float(canonical_phase(self.phase)))
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "ratio", float(self.ratio))
        object.__setattr__(self, "frequency", float(self.frequency))

    @property
    def period(self) -> float:
        return 2.0 * np.pi / self.frequency

    @property
    def a_over_omega(self) -> float:
        return self.amplitude / self.frequency

    @property
    def scale(self) -> float:
        """Characteristic magnitude |A| (1 + |f|), used to normalize tolerances."""
        return abs(self.amplitude) * (1.0 + abs(self.ratio))

    def with_a_over_omega(self, x: float) -> "DriveParams":
        """Copy with the amplitude set to x * frequency."""
        return dataclasses.replace(self, amplitude=x * self.frequency)


def drive_value(t, params: DriveParams):
    """Evaluate S(t); accepts scalars or arrays."""
    w = params.frequency
    return -params.amplitude * (
        np.sin(w * t) + params.ratio * np.sin(2.0 * w * t + params.phase)
    )


def drive_antiderivative(t, params: DriveParams):
    """Zero-mean antiderivative of S, the accumulated drive phase.

    Integrating S term by term gives

        theta(t) = (A/w) cos(w t) + (A f / 2 w) cos(2 w t + phi),

    which already has zero average over one period, so no constant is added.
    The local mode amplitudes pick up the gauge phases exp(-+ i theta / 2).
    """
    w = params.frequency
    a = params.amplitude
    return (a / w) * np.cos(w * t) + (a * params.ratio / (2.0 * w)) * np.cos(
        2.0 * w * t + params.phase
    )


@dataclass(frozen=True)
class SymmetryReport:
    """Which generalized symmetries the drive satisfies.

    shift_symmetric:          S(t + T/2) = S(t)  (half-period shift)
    antisymmetric:            S(t0 + t) = -S(t0 - t) for some t0
    time_reversal_symmetric:  S(t0 + t) = +S(t0 - t) for some t0
    symmetry_point: a witness t0 in [0, T) for the reflection symmetry, or
        None when neither reflection holds.  When both hold, the
        time-reversal witness is reported.
    """

    shift_symmetric: bool
    antisymmetric: bool
    time_reversal_symmetric: bool
    symmetry_point: float | None


def _dist_to_multiple(x: float, unit: float) -> float:
    r = x % unit
    return min(r, unit - r)


def classify_symmetries(params: DriveParams, tol: float = 1e-9) -> SymmetryReport:
    """Classify the drive's generalized time symmetries.

    Each symmetry is decided twice: once from closed-form conditions on
    (A, f, phi) and once by dense sampling of S over one period.  The two
    verdicts must agree; a mismatch raises SymmetryClassificationError.

    The closed-form conditions for the two-harmonic drive are:
      * shift symmetry requires the second harmonic to vanish (f = 0 or A = 0);
      * antisymmetry requires phi = 0 mod pi, with t0 in {0, T/2};
      * time-reversal symmetry requires phi = pi/2 mod pi, with t0 in
        {T/4, 3T/4}.
    """
    a, f, phi = params.amplitude, params.ratio, params.phase
    scale = params.scale
    period = params.period

    if scale == 0.0:
        return SymmetryReport(True, True, True, 0.0)

    abs_tol = tol * scale

    # Closed-form verdicts.  The shift residual max|S(t)+S(t+T/2)| equals
    # 2|A f| exactly, so the analytic test mirrors the sampled one.
    second_harmonic = abs(a * f)
    shift_analytic = 2.0 * second_harmonic <= abs_tol
    anti_analytic = (
        second_harmonic <= abs_tol or _dist_to_multiple(phi, np.pi) <= tol
    )
    trs_analytic = (
        second_harmonic <= abs_tol
        or _dist_to_multiple(phi - 0.5 * np.pi, np.pi) <= tol
    )

    n_grid = 1024
    ts = np.linspace(0.0, period, n_grid, endpoint=False)

    shift_res = np.max(
        np.abs(drive_value(ts, params) + drive_value(ts + 0.5 * period, params))
    )
    shift_sampled = bool(shift_res <= abs_tol)

    def reflection_residual(t0: np.ndarray, sign: float) -> np.ndarray:
        # max over t of |S(t0+t) - sign * S(t0-t)|, vectorized over t0
        plus = drive_value(t0[:, None] + ts[None, :], params)
        minus = drive_value(t0[:, None] - ts[None, :], params)
        return np.max(np.abs(plus - sign * minus), axis=1)

    def find_reflection(sign: float, candidates: np.ndarray) -> tuple[bool, float | None]:
        res = reflection_residual(candidates, sign)
        best = int(np.argmin(res))
        if res[best] <= abs_tol:
            return True, float(candidates[best] % period)
        # fall back to a dense t0 scan before declaring the symmetry absent
        t0s = np.linspace(0.0, period, n_grid, endpoint=False)
        res = reflection_residual(t0s, sign)
        best = int(np.argmin(res))
        if res[best] <= abs_tol:
            return True, float(t0s[best])
        return False, None

    quarter_points = np.array([0.0, 0.25, 0.5, 0.75]) * period
    anti_sampled, anti_t0 = find_reflection(-1.0, quarter_points)
    trs_sampled, trs_t0 = find_reflection(+1.0, quarter_points)

    for name, analytic, sampled in (
        ("shift", shift_analytic, shift_sampled),
        ("antisymmetry", anti_analytic, anti_sampled),
        ("time reversal", trs_analytic, trs_sampled),
    ):
        if analytic != sampled:
            raise SymmetryClassificationError(
                f"{name} check disagrees for {params}: "
                f"analytic={analytic}, sampled={sampled}"
            )

    symmetry_point = trs_t0 if trs_sampled else anti_t0
    return SymmetryReport(shift_sampled, anti_sampled, trs_sampled, symmetry_point)
