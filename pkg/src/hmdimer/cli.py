"""Command-line front end.

Subcommands cover the main workflows: quasienergy spectra over drive
amplitude (``spectrum``), the averaged-model parameter maps (``perturb``),
single trajectories (``dynamics``), phase-controlled switch-on sweeps
(``ramp``), drive symmetry classification (``symmetry``) and the built-in
cross-validation battery (``validate``).

Output is deterministic CSV: a ``# key = value`` header block echoing the
full configuration, a column-name line, then rows with floats printed at 17
significant digits.  ``--json`` mirrors the same table to a JSON file.
Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 solver or
integrator failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import dynamics, effective, floquet
from .drive import DriveParams, classify_symmetries
from .dynamics import IntegrationError, RampSchedule
from .floquet import ConvergenceError, NumericalError, SystemParams

__all__ = ["RunConfig", "ConfigError", "main", "parse_range",
           "parse_config_text", "serialize_config"]


class ConfigError(Exception):
    """Bad flags, bad config file, or an unusable grid."""


COMMANDS = ("spectrum", "perturb", "dynamics", "ramp", "symmetry", "validate")

DEFAULTS = {
    "v": 1.0,
    "chi": 0.0,
    "omega": 10.0,
    "f": 0.25,
    "phi": "0",
    "a_over_omega": "2.4",
    "cutoff": 16,
    "tol": 1e-10,
    "dt": None,
    "alpha": 0.01,
    "tf": 2400.0,
    "dt_avg": 400.0,
    "out": None,
}

# hallmark parameter set used throughout: f = 1/4, w = 10 v, chi = 0.4 v,
# slow ramp alpha = 0.01 reaching A/w = 2.4 at t_f = 2400, averaged over 400
PAPER_PRESET = {
    "v": 1.0,
    "chi": 0.4,
    "omega": 10.0,
    "f": 0.25,
    "alpha": 0.01,
    "tf": 2400.0,
    "dt_avg": 400.0,
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration of one invocation."""

    command: str
    v: float
    chi: float
    omega: float
    f: float
    phi: str
    a_over_omega: str
    cutoff: int
    tol: float
    dt: float | None
    alpha: float
    tf: float
    dt_avg: float
    out: str | None
    json_mirror: bool = False
    validate: bool = False
    paper: bool = False


def parse_range(text: str) -> np.ndarray:
    """Parse '2.4' or 'start:stop:step' into a grid (endpoints inclusive)."""
    parts = str(text).split(":")
    try:
        if len(parts) == 1:
            return np.array([float(parts[0])])
        if len(parts) != 3:
            raise ValueError(f"expected value or start:stop:step, got {text!r}")
        start, stop, step = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    if step <= 0.0 or stop < start:
        raise ConfigError(f"range {text!r} must have step > 0 and stop >= start")
    grid = np.arange(start, stop + 0.5 * step, step)
    if len(grid) == 0:
        raise ConfigError(f"range {text!r} is empty")
    return grid


def _scalar(text: str, name: str) -> float:
    grid = parse_range(text)
    if len(grid) != 1:
        raise ConfigError(f"{name} must be a single value here, got a sweep {text!r}")
    return float(grid[0])


def parse_config_text(text: str) -> dict[str, str]:
    """Parse flat 'key = value' lines; '#' starts a comment."""
    out: dict[str, str] = {}
    for i, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {i} is not key = value: {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"config line {i} has an empty key")
        out[key] = val
    return out


def serialize_config(entries: dict) -> str:
    """Canonical flat form of a configuration, one 'key = value' per line."""
    lines = []
    for key in sorted(entries):
        val = entries[key]
        if val is None:
            continue
        if isinstance(val, bool):
            val = int(val)
        elif isinstance(val, float):
            val = format(val, ".17g")
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); keep 2 for I/O errors
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="hmdimer", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--v", type=float)
        p.add_argument("--chi", type=float)
        p.add_argument("--omega", type=float)
        p.add_argument("--f", type=float)
        p.add_argument("--phi", type=str, help="value or start:stop:step, radians")
        p.add_argument("--A-over-omega", dest="a_over_omega", type=str,
                       help="value or start:stop:step")
        p.add_argument("--N", dest="cutoff", type=int)
        p.add_argument("--tol", type=float)
        p.add_argument("--dt", type=float)
        p.add_argument("--alpha", type=float)
        p.add_argument("--tf", type=float)
        p.add_argument("--dt-avg", dest="dt_avg", type=float)
        p.add_argument("--out", type=str)
        p.add_argument("--json", dest="json_mirror", action="store_true")
        p.add_argument("--config", type=str)
        p.add_argument("--paper", action="store_true")
        if name == "perturb":
            p.add_argument("--validate", action="store_true")
    return parser


_FIELD_TYPES = {
    "v": float, "chi": float, "omega": float, "f": float,
    "phi": str, "a_over_omega": str, "cutoff": int, "tol": float,
    "dt": float, "alpha": float, "tf": float, "dt_avg": float, "out": str,
}


def build_config(argv: list[str]) -> RunConfig:
    args = _build_parser().parse_args(argv)
    entries = dict(DEFAULTS)
    if args.paper:
        entries.update(PAPER_PRESET)
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                file_entries = parse_config_text(fh.read())
        except OSError:
            raise
        for key, val in file_entries.items():
            if key not in _FIELD_TYPES:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                entries[key] = _FIELD_TYPES[key](val)
            except ValueError:
                raise ConfigError(f"bad value for {key!r}: {val!r}") from None
    for key in _FIELD_TYPES:
        val = getattr(args, key, None)
        if val is not None:
            entries[key] = val
    try:
        return RunConfig(
            command=args.command,
            v=float(entries["v"]), chi=float(entries["chi"]),
            omega=float(entries["omega"]), f=float(entries["f"]),
            phi=str(entries["phi"]), a_over_omega=str(entries["a_over_omega"]),
            cutoff=int(entries["cutoff"]), tol=float(entries["tol"]),
            dt=None if entries["dt"] is None else float(entries["dt"]),
            alpha=float(entries["alpha"]), tf=float(entries["tf"]),
            dt_avg=float(entries["dt_avg"]),
            out=entries["out"],
            json_mirror=bool(getattr(args, "json_mirror", False)),
            validate=bool(getattr(args, "validate", False)),
            paper=bool(args.paper),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _config_entries(cfg: RunConfig) -> dict:
    entries = dataclasses.asdict(cfg)
    entries.pop("json_mirror")
    return entries


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_table(cfg: RunConfig, columns: list[str], rows: list[tuple]) -> None:
    header = serialize_config(_config_entries(cfg))
    lines = ["# " + line for line in header.splitlines()]
    lines.append(",".join(columns))
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    text = "\n".join(lines) + "\n"
    if cfg.out is None:
        sys.stdout.write(text)
    else:
        with open(cfg.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        if cfg.json_mirror:
            payload = {
                "config": {k: v for k, v in _config_entries(cfg).items()
                           if v is not None},
                "columns": columns,
                "rows": [[None if isinstance(v, float) and np.isnan(v) else v
                          for v in row] for row in rows],
            }
            with open(cfg.out + ".json", "w", encoding="utf-8") as fh:
                json.dump(payload, fh, indent=1)
                fh.write("\n")


def _system(cfg: RunConfig, phi: float, a_over_omega: float) -> SystemParams:
    drive = DriveParams(amplitude=a_over_omega * cfg.omega, ratio=cfg.f,
                        frequency=cfg.omega, phase=phi)
    return SystemParams(v=cfg.v, chi=cfg.chi, drive=drive)


def cmd_spectrum(cfg: RunConfig) -> int:
    grid = parse_range(cfg.a_over_omega)
    phi = _scalar(cfg.phi, "phi")
    params = _system(cfg, phi, float(grid[0]) if grid[0] > 0 else 1.0)
    branches = floquet.compute_spectrum(params, grid, tol=cfg.tol,
                                        cutoff=cfg.cutoff)
    columns = ["a_over_omega", "branch", "quasienergy", "imbalance",
               "avg_pop1", "residual", "n_harmonics"]
    rows = []
    for br in branches:
        for x, st in br.points:
            rows.append((
                x, br.label, st.quasienergy,
                floquet.population_imbalance(st),
                floquet.cycle_averaged_population(st, 1),
                st.residual_norm, st.cutoff,
            ))
    write_table(cfg, columns, rows)
    return 0


def cmd_perturb(cfg: RunConfig) -> int:
    if cfg.v <= 0.0:
        raise ConfigError("perturb reports quantities in units of v; need v > 0")
    xs = parse_range(cfg.a_over_omega)
    phis = parse_range(cfg.phi)
    columns = ["a_over_omega", "phi", "f_bar_re", "f_bar_im", "delta",
               "delta_prime", "splitting"]
    if cfg.validate:
        columns += ["f_bar_quad_re", "f_bar_quad_im", "delta_quad"]
    rows = []
    for x in xs:
        for phi in phis:
            drive = DriveParams(x * cfg.omega, cfg.f, cfg.omega, phi)
            ep = effective.effective_params(drive, cfg.v, cfg.chi)
            fb = ep.v_eff / cfg.v
            row = [float(x), float(drive.phase), fb.real, fb.imag,
                   ep.delta_eff * cfg.omega / cfg.v ** 2, ep.delta_eff,
                   effective.linear_splitting(ep)]
            if cfg.validate:
                fq = effective.f_bar_by_quadrature(drive)
                dq = effective.delta_by_quadrature(drive)
                row += [fq.real, fq.imag, dq.real]
            rows.append(tuple(row))
    write_table(cfg, columns, rows)
    return 0


def cmd_dynamics(cfg: RunConfig) -> int:
    phi = _scalar(cfg.phi, "phi")
    x = _scalar(cfg.a_over_omega, "A-over-omega")
    params = _system(cfg, phi, x)
    dt = cfg.dt if cfg.dt is not None else params.drive.period / dynamics.STEPS_PER_PERIOD
    n_total = max(1, int(np.ceil(cfg.tf / dt - 1e-12)))
    stride = max(1, int(np.ceil(n_total / 5000)))
    traj = dynamics.integrate((1.0 + 0.0j, 0.0j), params, cfg.tf, dt=cfg.dt,
                              stride=stride)
    columns = ["t", "c1_re", "c1_im", "c2_re", "c2_im", "pop1", "pop2"]
    p1, p2 = traj.populations(1), traj.populations(2)
    rows = [
        (t, c1.real, c1.imag, c2.real, c2.imag, q1, q2)
        for t, c1, c2, q1, q2 in zip(traj.times, traj.c1, traj.c2, p1, p2)
    ]
    write_table(cfg, columns, rows)
    return 0


def cmd_ramp(cfg: RunConfig) -> int:
    phis = parse_range(cfg.phi)
    target = _scalar(cfg.a_over_omega, "A-over-omega")
    if cfg.alpha == 0.0:
        # no ramp: hold A = 0 for the whole run
        ramp = RampSchedule(0.0, cfg.tf, 0.0)
    else:
        ramp = RampSchedule(cfg.alpha, cfg.tf, cfg.alpha * cfg.tf / cfg.omega)
        if abs(ramp.target_a_over_omega - target) > 1e-12 * max(1.0, target):
            raise ConfigError(
                f"alpha * tf / omega = {ramp.target_a_over_omega} does not reach "
                f"A/omega = {target}; adjust --alpha, --tf or --A-over-omega"
            )
    params = _system(cfg, float(phis[0]), target)
    rows = [
        (row.phi, row.pop1, row.pop2, row.error or "")
        for row in dynamics.ramp_localization(params, phis, ramp, cfg.dt_avg,
                                              dt=cfg.dt)
    ]
    write_table(cfg, ["phi", "pop1", "pop2", "error"], rows)
    return 0


def cmd_symmetry(cfg: RunConfig) -> int:
    phi = _scalar(cfg.phi, "phi")
    x = _scalar(cfg.a_over_omega, "A-over-omega")
    drive = DriveParams(x * cfg.omega, cfg.f, cfg.omega, phi)
    rep = classify_symmetries(drive)
    rows = [(
        int(rep.shift_symmetric), int(rep.antisymmetric),
        int(rep.time_reversal_symmetric),
        np.nan if rep.symmetry_point is None else rep.symmetry_point,
    )]
    write_table(cfg, ["shift_symmetric", "antisymmetric",
                      "time_reversal_symmetric", "symmetry_point"], rows)
    return 0


def _circular_gap(e1: float, e2: float, omega: float) -> float:
    d = abs(e1 - e2) % omega
    return min(d, omega - d)


def cmd_validate(cfg: RunConfig) -> int:
    """Built-in cross-checks: independent routes must agree."""
    failures = 0

    def report(name: str, ok: bool, detail: str) -> None:
        nonlocal failures
        print(f"{name}: {'PASS' if ok else 'FAIL'} ({detail})")
        if not ok:
            failures += 1

    rng = np.random.default_rng(7)
    draws = [(2.4, 0.5 * np.pi, 0.25, 10.0)]
    for _ in range(3):
        draws.append((
            float(rng.uniform(0.2, 5.0)), float(rng.uniform(-np.pi, np.pi)),
            float(rng.uniform(0.0, 0.5)), float(rng.uniform(5.0, 15.0)),
        ))
    worst = 0.0
    for x, phi, f, w in draws:
        p = SystemParams(1.0, 0.0, DriveParams(x * w, f, w, phi))
        em = floquet.monodromy_quasienergies(p)
        guessed = floquet.normal_state_pair(p, cutoff=cfg.cutoff, tol=cfg.tol)
        es = sorted(s.quasienergy for s in guessed)
        worst = max(worst, *(
            _circular_gap(a, b, w) for a, b in zip(es, em)
        ))
    report("monodromy-vs-solver", worst <= 1e-8, f"max deviation {worst:.3e}")

    worst_f, worst_d, worst_p = 0.0, 0.0, 0.0
    for x, phi, f, w in draws:
        drive = DriveParams(x * w, f, w, phi)
        worst_f = max(worst_f, abs(effective.f_bar(drive)
                                   - effective.f_bar_by_quadrature(drive)))
        worst_d = max(worst_d, abs(effective.delta_bias(drive)
                                   - effective.delta_by_quadrature(drive).real))
        tau, phi_q = effective.phi_correction_by_quadrature(drive, 1024)
        worst_p = max(worst_p, float(np.max(np.abs(
            effective.phi_correction(tau, drive) - phi_q))))
    report("f-bar-series-vs-quadrature", worst_f <= 1e-10, f"max {worst_f:.3e}")
    report("micromotion-series-vs-quadrature", worst_p <= 1e-8, f"max {worst_p:.3e}")
    report("bias-series-vs-quadrature", worst_d <= 1e-8, f"max {worst_d:.3e}")

    return 3 if failures else 0


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        cfg = build_config(list(argv))
        handler = {
            "spectrum": cmd_spectrum,
            "perturb": cmd_perturb,
            "dynamics": cmd_dynamics,
            "ramp": cmd_ramp,
            "symmetry": cmd_symmetry,
            "validate": cmd_validate,
        }[cfg.command]
        return handler(cfg)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, IntegrationError, NumericalError,
            ArithmeticError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
