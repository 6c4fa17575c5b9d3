"""End-to-end acceptance battery.

Each test covers one headline capability at its stated tolerance and prints
one CRITERION line so a full run doubles as a report card.  Shared physics:
v = 1, omega = 10, f = 1/4 throughout; amplitudes are quoted as A/omega.
"""

import numpy as np
import pytest

from hmdimer.drive import DriveParams
from hmdimer.dynamics import RampSchedule, integrate, ramp_localization, \
    time_averaged_population
from hmdimer.effective import (
    delta_bias,
    delta_by_quadrature,
    effective_params,
    f_bar,
    f_bar_by_quadrature,
    f_bar_zeros,
    linear_splitting,
)
from hmdimer.floquet import (
    SystemParams,
    compute_spectrum,
    discover_states,
    dressed_state_guess,
    floquet_residual,
    linear_state_pair,
    monodromy_quasienergies,
    normal_state_pair,
    population_imbalance,
    solve_floquet_state,
)

V = 1.0
OMEGA = 10.0
F = 0.25


def _params(a_over_omega, phase, chi=0.0):
    return SystemParams(V, chi, DriveParams(a_over_omega * OMEGA, F, OMEGA,
                                            phase))


def _report(capsys, n, ok, detail):
    # bypass capture so a plain ``pytest -v`` still shows every verdict line
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    with capsys.disabled():
        print(line)
    return line


def _circular_gap(e1, e2, omega=OMEGA):
    d = abs(e1 - e2) % omega
    return min(d, omega - d)


def _pair_gap_scan(chi, phi, x_lo, x_hi, step):
    """Minimum splitting of the weakly imbalanced state pair over a window.

    The pair is found once at the window center and then continued outward
    point by point, so each member keeps its identity through the
    anticrossing region.
    """
    if chi == 0.0:
        best_x, best_gap = None, np.inf
        for x in np.arange(x_lo, x_hi + 0.5 * step, step):
            lo, hi = linear_state_pair(_params(float(x), phi))
            gap = hi.quasienergy - lo.quasienergy
            if gap < best_gap:
                best_x, best_gap = float(x), gap
        return best_x, best_gap

    x_mid = 0.5 * (x_lo + x_hi)
    lo0, hi0 = normal_state_pair(_params(x_mid, phi, chi))
    best_x, best_gap = x_mid, abs(hi0.quasienergy - lo0.quasienergy)
    for xs in (np.arange(x_mid, x_hi + 0.5 * step, step),
               np.arange(x_mid, x_lo - 0.5 * step, -step)):
        a, b = lo0, hi0
        for x in xs[1:]:
            p = _params(float(x), phi, chi)
            a = solve_floquet_state(p, a, tol=1e-10, method="newton")
            b = solve_floquet_state(p, b, tol=1e-10, method="newton")
            gap = abs(b.quasienergy - a.quasienergy)
            if gap < best_gap:
                best_x, best_gap = float(x), gap
    return best_x, best_gap


def test_criterion_01_linear_anticrossing_closes_at_suppression_point(capsys):
    x_min, gap_min = _pair_gap_scan(0.0, np.pi / 2, 2.0, 2.8, 0.005)
    root = f_bar_zeros(DriveParams(24.0, F, OMEGA, np.pi / 2), 2.0, 2.8)[0]
    ok_loc = abs(x_min - 2.4) <= 0.05
    ok_gap = gap_min < 0.01 * V
    ok_root = abs(x_min - root) <= 0.05
    ok = ok_loc and ok_gap and ok_root
    line = _report(capsys, 1, ok, f"min gap {gap_min:.6f} at A/w={x_min:.3f}, "
                          f"|F| root at {root:.3f}")
    assert ok_loc, line
    assert ok_root, line
    # the gap floor is the drive-induced bias, which sits just above 0.01 v
    assert ok_gap, line


def test_criterion_02_gap_minimal_at_quarter_period_phase(capsys):
    phis = np.arange(-np.pi, np.pi, np.pi / 64)
    gaps = {}
    for phi in phis:
        lo, hi = normal_state_pair(_params(2.4, float(phi), chi=0.4))
        gaps[float(phi)] = hi.quasienergy - lo.quasienergy
    arr = np.array([gaps[float(p)] for p in phis])
    i_min = int(np.argmin(arr))
    dist_min = min(abs(phis[i_min] - np.pi / 2), abs(phis[i_min] + np.pi / 2))
    i_max = int(np.argmax(arr))
    dist_max = min(abs(phis[i_max]), abs(phis[i_max] + np.pi))
    ok = dist_min <= np.pi / 64 + 1e-12 and dist_max <= np.pi / 64 + 1e-12
    line = _report(capsys, 2, ok,
                   f"min {arr[i_min]:.6f} at phi={phis[i_min]:.4f}, "
                   f"max {arr[i_max]:.6f} at phi={phis[i_max]:.4f}")
    assert ok, line


def test_criterion_03_gap_constancy_in_nonlinearity(capsys):
    phi = np.pi / 4
    chis = [0.0, 0.1, 0.2, 0.3, 0.4]
    gaps = [_pair_gap_scan(c, phi, 2.3, 2.5, 0.005)[1] for c in chis]
    spread = (max(gaps) - min(gaps)) / (0.5 * (max(gaps) + min(gaps)))

    # the quoted operating point: A/w = 2.4, where the renormalized
    # tunneling magnitude bottoms out
    ep = effective_params(_params(2.4, phi).drive, V, 0.0)
    predicted = linear_splitting(ep)
    worst_ratio = max(abs(g - predicted) / predicted for g in gaps)

    ok_flat = spread < 0.02
    ok_pred = worst_ratio <= 0.10
    ok = ok_flat and ok_pred
    line = _report(capsys, 3, ok,
                   f"gaps {', '.join(f'{g:.6f}' for g in gaps)}; "
                   f"spread {spread:.1%}; formula {predicted:.6f}, "
                   f"worst deviation {worst_ratio:.1%}")
    assert ok_pred, line
    # fails at chi = 0.1: below the saddle-node threshold the self-trapped
    # doublet does not exist yet, so the scan sees the normal pair instead
    assert ok_flat, line


def test_criterion_04_degenerate_localized_pair(capsys):
    states = discover_states(_params(2.4, 0.0, chi=0.4))
    localized = sorted((s for s in states
                        if abs(population_imbalance(s)) >= 0.5),
                       key=population_imbalance)
    ok_count = len(localized) == 2
    if ok_count:
        z1, z2 = (population_imbalance(s) for s in localized)
        de = abs(localized[0].quasienergy - localized[1].quasienergy)
        ok = de <= 1e-6 * OMEGA and abs(z1 + z2) <= 1e-6 and abs(z2) >= 0.5
        detail = f"de={de:.2e}, z=({z1:+.4f}, {z2:+.4f})"
    else:
        ok, detail = False, f"found {len(localized)} localized states"
    line = _report(capsys, 4, ok, detail)
    assert ok, line


def test_criterion_05_spectrum_even_in_phase(capsys):
    grid = np.arange(2.3, 2.501, 0.01)
    partner = {"normal_lower": "normal_lower", "normal_upper": "normal_upper",
               "bifurcated_plus": "bifurcated_minus",
               "bifurcated_minus": "bifurcated_plus"}
    plus = {b.label: b for b in compute_spectrum(_params(0.0, np.pi / 4,
                                                         chi=0.4), grid)}
    minus = {b.label: b for b in compute_spectrum(_params(0.0, -np.pi / 4,
                                                          chi=0.4), grid)}
    worst_e, worst_z = 0.0, 0.0
    for label, br in plus.items():
        other = minus[partner[label]]
        assert len(br.points) == len(other.points), label
        np.testing.assert_allclose(br.grid, other.grid)
        worst_e = max(worst_e, np.max(np.abs(br.quasienergies
                                             - other.quasienergies)))
        worst_z = max(worst_z, np.max(np.abs(br.imbalances
                                             + other.imbalances)))
    ok = worst_e <= 1e-8 and worst_z <= 1e-6
    line = _report(capsys, 5, ok, f"max quasienergy mismatch {worst_e:.2e}, "
                          f"max imbalance sum {worst_z:.2e}")
    assert ok, line


def test_criterion_06_averaged_parameter_identities(capsys):
    worst = {"im_fbar": 0.0, "im_delta": 0.0, "odd": 0.0,
             "fbar_qd": 0.0, "delta_qd": 0.0}
    for x in np.linspace(0.0, 5.0, 26):
        for sign in (1.0, -1.0):
            d = DriveParams(x * OMEGA, F, OMEGA, sign * np.pi / 2)
            worst["im_fbar"] = max(worst["im_fbar"], abs(f_bar(d).imag))
    zero = abs(delta_bias(DriveParams(24.0, F, OMEGA, 0.0)))
    rng = np.random.default_rng(19)
    for _ in range(100):
        x = float(rng.uniform(0.0, 5.0))
        phi = float(rng.uniform(-np.pi, np.pi))
        f = float(rng.uniform(0.0, 0.5))
        d = DriveParams(x * OMEGA, f, OMEGA, phi)
        dm = DriveParams(x * OMEGA, f, OMEGA, -phi)
        worst["im_delta"] = max(worst["im_delta"],
                                abs(delta_by_quadrature(d).imag))
        worst["odd"] = max(worst["odd"],
                           abs(delta_bias(d) + delta_bias(dm)))
        worst["fbar_qd"] = max(worst["fbar_qd"],
                               abs(f_bar(d) - f_bar_by_quadrature(d)))
        worst["delta_qd"] = max(worst["delta_qd"],
                                abs(delta_bias(d) - delta_by_quadrature(d).real))
    ok = (worst["im_fbar"] <= 1e-12 and worst["im_delta"] <= 1e-12
          and zero <= 1e-12 and worst["odd"] <= 1e-12
          and worst["fbar_qd"] <= 1e-8 and worst["delta_qd"] <= 1e-8)
    line = _report(capsys, 6, ok, ", ".join(f"{k}={v:.1e}" for k, v in worst.items()))
    assert ok, line


def test_criterion_07_ramp_steers_localization_by_phase(capsys):
    ramp = RampSchedule.to_target(0.01, 2.4, OMEGA)
    window = 400.0
    base = _params(2.4, 0.0, chi=0.4)

    plus, minus = ramp_localization(base, [np.pi / 4, -np.pi / 4], ramp, window)
    ok_dir = plus.pop1 >= 0.9 and minus.pop1 <= 0.1

    # mirror symmetry of the sweep; the grid avoids phi = 0 and +-pi, where
    # the balanced state is dynamically unstable and falls to either side
    phis = [(2 * k + 1) * np.pi / 20 for k in range(10)]
    rows_p = ramp_localization(base, phis, ramp, window)
    rows_m = ramp_localization(base, [-p for p in phis], ramp, window)
    worst = max(abs(rp.pop1 - rm.pop2)
                for rp, rm in zip(rows_p, rows_m))
    ok = ok_dir and worst <= 0.03
    line = _report(capsys, 7, ok, f"pop1(+pi/4)={plus.pop1:.4f}, "
                          f"pop1(-pi/4)={minus.pop1:.4f}, "
                          f"mirror deviation {worst:.4f}")
    assert ok, line


def test_criterion_08_localization_threshold_dichotomy(capsys):
    t_end, window = 2000.0, None

    def avg(phi, chi):
        p = _params(2.4, phi, chi=chi)
        traj = integrate((1.0, 0.0), p, t_end)
        return time_averaged_population(traj, 1, (p.drive.period, t_end))

    sym_small = avg(np.pi / 2, 0.05)
    anti_small = avg(0.0, 0.05)
    threshold = None
    for chi in np.arange(0.1, 1.001, 0.05):
        if avg(0.0, float(chi)) >= 0.9:
            threshold = float(chi)
            break
    ok = sym_small >= 0.9 and anti_small < 0.6 and threshold is not None
    line = _report(capsys, 8, ok, f"phi=pi/2 avg {sym_small:.4f} at chi=0.05; "
                          f"phi=0 avg {anti_small:.4f} at chi=0.05, "
                          f"crosses 0.9 at chi={threshold}")
    assert ok, line


def test_criterion_09_solver_agrees_with_monodromy(capsys):
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(20):
        x = float(rng.uniform(0.0, 5.0))
        phi = float(rng.uniform(-np.pi, np.pi))
        f = float(rng.uniform(0.0, 0.5))
        p = SystemParams(V, 0.0, DriveParams(x * OMEGA, f, OMEGA, phi))
        ref = monodromy_quasienergies(p)
        got = sorted(s.quasienergy for s in linear_state_pair(p))
        worst = max(worst, *(_circular_gap(a, b) for a, b in zip(got, ref)))
    ok = worst <= 1e-8
    line = _report(capsys, 9, ok, f"max quasienergy deviation {worst:.2e}")
    assert ok, line


def test_criterion_10_conservation_and_convergence(capsys):
    p = _params(2.4, np.pi / 4, chi=0.4)
    drift = integrate((1.0, 0.0), p, 3000.0).norm_drift()

    from test_floquet import _time_domain_residual
    states = discover_states(p)
    dual = max(abs(floquet_residual(s, p) - _time_domain_residual(s, p))
               for s in states)

    lo16, hi16 = normal_state_pair(p, cutoff=16)
    lo32, hi32 = normal_state_pair(p, cutoff=32)
    cut = max(abs(lo16.quasienergy - lo32.quasienergy),
              abs(hi16.quasienergy - hi32.quasienergy))

    ok = drift <= 1e-9 and dual <= 1e-10 and cut <= 10 * 1e-10
    line = _report(capsys, 10, ok, f"norm drift {drift:.2e}, residual duality "
                           f"{dual:.2e}, cutoff doubling {cut:.2e}")
    assert ok, line
