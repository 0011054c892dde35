"""Command-line front end: ``revham {design,fit,simulate,sweep,stirap}``.

Configuration comes from an optional JSON file (``--config``) overridden by
flags. Rates are dimensionless: Rabi frequencies as ``Omega T``, decay rates
as ``Gamma T``. Every CSV gets a ``<name>.json`` sidecar holding the resolved
configuration; JSON reports embed it under ``"metadata"``.
"""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .dynamics import DEFAULT_STEPS, IntegrationError, LindbladParams, evolve_lindblad, evolve_pure
from .engine import extract_H, forbidden_coupling_report, rydberg_design, rydberg_H_theta, eliminate_13
from .frames import ScheduleParams, gram_deviation, rydberg_frame
from .propagator import NonUnitaryError, build_U, unitarity_deviation
from .pulses import (PAPER_OMEGA1, PAPER_OMEGA2, FitError, StirapParams, exact_pulses, fit_exact_pulses,
                     paper_fitted_pulses, stirap_pulses, write_pulse_csv)
from .sweeps import (FIG4_PAIRS, STIRAP_TABLE, STRATEGIES, Axis, decoherence_map, deviation_grid,
                     run_table, stirap_scan, write_rows, write_sidecar, write_stirap_csv, write_table_csv)

PULSE_SOURCES = ("exact", "fitted", "paper_fitted", "stirap")
UNITS = {
    "mu": "rad",
    "A": "rad",
    "T": "arbitrary time unit; all rates below are multiplied by T",
    "stirap_omega0_T": "dimensionless Omega0 * T",
    "gamma1_T": "dimensionless Gamma1 * T",
    "gamma2_T": "dimensionless Gamma2 * T",
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


@dataclass(frozen=True)
class RunConfig:
    mu: float = float(np.pi / 4)
    A: float = 1.0
    T: float = 1.0
    steps: int = DEFAULT_STEPS
    pulse_source: str = "paper_fitted"
    deviation_strategy: str = "split_clock"
    out: str = "."
    stirap_omega0_T: float = 10.0
    gamma1_T: float = 0.0
    gamma2_T: float = 0.0
    grid: str = ""

    def validate(self) -> "RunConfig":
        def fail(name, why):
            raise ConfigError(f"config field {name!r}: {why}")

        for name in ("mu", "A", "T", "stirap_omega0_T", "gamma1_T", "gamma2_T"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not np.isfinite(v):
                fail(name, f"expected a finite number, got {v!r}")
        if self.T <= 0:
            fail("T", "must be positive")
        if self.A <= 0:
            fail("A", "must be positive; A = 0 makes beta vanish and cot(beta) singular")
        if isinstance(self.steps, bool) or not isinstance(self.steps, int) or self.steps < 10:
            fail("steps", f"expected an integer >= 10, got {self.steps!r}")
        if self.pulse_source not in PULSE_SOURCES:
            fail("pulse_source", f"expected one of {PULSE_SOURCES}, got {self.pulse_source!r}")
        if self.deviation_strategy not in STRATEGIES:
            fail("deviation_strategy", f"expected one of {STRATEGIES}, got {self.deviation_strategy!r}")
        if self.stirap_omega0_T <= 0:
            fail("stirap_omega0_T", "must be positive")
        if self.gamma1_T < 0 or self.gamma2_T < 0:
            fail("gamma1_T/gamma2_T", "decay rates must be non-negative")
        if self.grid:
            parse_grid(self.grid)
        return self

    @property
    def schedule(self) -> ScheduleParams:
        return ScheduleParams(self.mu, self.A, self.T)

    def to_dict(self) -> dict:
        return {**asdict(self), "_units": UNITS}


def parse_grid(text: str):
    try:
        a, b = (int(x) for x in text.lower().split("x"))
    except ValueError:
        raise ConfigError(f"config field 'grid': expected 'NxM', got {text!r}") from None
    if a < 1 or b < 1:
        raise ConfigError(f"config field 'grid': sizes must be positive, got {text!r}")
    return a, b


def load_config(path: Optional[str], overrides: dict) -> RunConfig:
    data = {}
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known - {"_units"})
    if unknown:
        raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
    data = {k: v for k, v in data.items() if k in known}
    data.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**data).validate()


def _metadata(cfg: RunConfig, command: str, **extra) -> dict:
    return {"command": command, "version": __version__, "config": cfg.to_dict(), **extra}


def _emit_csv(path: Path, cfg: RunConfig, command: str, **extra) -> None:
    write_sidecar(path, _metadata(cfg, command, file=path.name, **extra))
    print(f"wrote {path}")


def _pulse_set(cfg: RunConfig):
    if cfg.pulse_source == "exact":
        return exact_pulses(cfg.schedule)
    if cfg.pulse_source == "fitted":
        return fit_exact_pulses(cfg.schedule)[0]
    if cfg.pulse_source == "paper_fitted":
        return paper_fitted_pulses(cfg.T)
    return stirap_pulses(StirapParams(cfg.stirap_omega0_T / cfg.T, mu=cfg.mu), cfg.T)


def _deviation_base(cfg: RunConfig):
    """Robustness studies perturb fitted pulses: our own fit or the reference one."""
    return _pulse_set(cfg) if cfg.pulse_source == "fitted" else paper_fitted_pulses(cfg.T)


# --- invariant check -------------------------------------------------------------

def run_checks(cfg: RunConfig) -> bool:
    """Invariant suite on the configured schedule; prints one line per check."""
    p = cfg.schedule
    t = np.linspace(0.0, p.T, 401)
    design = rydberg_design(p)
    H = extract_H(design, p.T)
    Hm = H(t)
    checks = [
        ("frame orthonormality", gram_deviation(rydberg_frame(p), t), 1e-12),
        ("unitarity of U", float(np.max(unitarity_deviation(build_U(design, t)))), 1e-10),
        ("Hermiticity of H", float(np.max(np.abs(Hm - np.swapaxes(Hm, -1, -2).conj()))), 1e-9),
        ("forbidden |1><3| coupling * T", forbidden_coupling_report(H).max_abs * p.T, 1e-9),
        ("generic vs term-by-term H", float(np.max(np.abs(Hm - rydberg_H_theta(eliminate_13(p), p)(t)))), 1e-9),
    ]
    ok = True
    for name, value, tol in checks:
        passed = value < tol
        ok &= passed
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {value:.3e} (< {tol:g})")
    return ok


# --- subcommands -------------------------------------------------------------------

def cmd_design(cfg: RunConfig, args) -> int:
    p = cfg.schedule
    out = Path(cfg.out)
    H = extract_H(rydberg_design(p), p.T)
    report = forbidden_coupling_report(H)
    path = write_pulse_csv(out / "pulses_exact.csv", exact_pulses(p))
    _emit_csv(path, cfg, "design")
    rep = {"forbidden_coupling": report.to_dict(), "max_abs_times_T": report.max_abs * p.T,
           "metadata": _metadata(cfg, "design")}
    (out / "elimination_report.json").write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out / 'elimination_report.json'}")
    print(f"max |<1|H|3>| * T = {report.max_abs * p.T:.3e}")
    return 0


def cmd_fit(cfg: RunConfig, args) -> int:
    p = cfg.schedule
    out = Path(cfg.out)
    ps, r1, r2 = fit_exact_pulses(p)
    path = write_pulse_csv(out / "pulses_fitted.csv", ps)
    _emit_csv(path, cfg, "fit")
    rep = {
        "omega1": {"model": "piecewise_sine", "params": r1.params.tolist(), "rms": r1.residual_rms,
                   "reference": list(PAPER_OMEGA1)},
        "omega2": {"model": "gaussian_sum", "params": r2.params.tolist(), "rms": r2.residual_rms,
                   "reference": list(PAPER_OMEGA2)},
        "metadata": _metadata(cfg, "fit"),
    }
    (out / "fit_report.json").write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out / 'fit_report.json'}")
    print(f"Omega1 T: {np.array2string(r1.params, precision=4)} rms {r1.residual_rms:.4f}")
    print(f"Omega2 T: {np.array2string(r2.params, precision=4)} rms {r2.residual_rms:.4f}")
    return 0


def cmd_simulate(cfg: RunConfig, args) -> int:
    ps = _pulse_set(cfg)
    if cfg.gamma1_T or cfg.gamma2_T:
        lp = LindbladParams(cfg.gamma1_T / cfg.T, cfg.gamma2_T / cfg.T)
        res = evolve_lindblad(ps, lp=lp, steps=cfg.steps, mu=cfg.mu)
    else:
        res = evolve_pure(ps, steps=cfg.steps, mu=cfg.mu)
    path = res.write_csv(Path(cfg.out) / f"trajectory_{cfg.pulse_source}.csv", cfg.T)
    _emit_csv(path, cfg, "simulate", fidelity=res.fidelity)
    print(f"F = {res.fidelity:.4f}")
    return 0


def _table(cfg: RunConfig, table_id: str) -> None:
    out = Path(cfg.out)
    path = out / f"table_{table_id}.csv"
    if table_id == "V":
        scan = stirap_scan([w for w, _ in STIRAP_TABLE], cfg.steps, cfg.T, cfg.mu)
        write_stirap_csv(path, scan, dict(STIRAP_TABLE))
        values = scan
    else:
        rows = run_table(table_id, _deviation_base(cfg), cfg.deviation_strategy, cfg.steps, cfg.mu)
        write_table_csv(path, table_id, rows)
        values = [(r.deviation.d_omega1, r.deviation.d_omega2, r.deviation.d_T, r.fidelity) for r in rows]
    _emit_csv(path, cfg, "sweep", table=table_id, pulse_source="stirap" if table_id == "V" else "fitted")
    for row in values:
        print("  ".join(f"{v:+.2f}" for v in row[:-1]) + f"  F = {row[-1]:.4f}")


def _figure(cfg: RunConfig, fig: str) -> None:
    out = Path(cfg.out)
    if fig == "5":
        pts = cfg.grid and parse_grid(cfg.grid)[0] or 59
        scan = stirap_scan(list(np.linspace(1.0, 30.0, pts)), cfg.steps, cfg.T, cfg.mu)
        path = write_stirap_csv(out / "fig5.csv", scan)
        _emit_csv(path, cfg, "sweep", figure=fig, axis=asdict(Axis("Omega0_T", 1.0, 30.0, pts)))
        return
    base = _deviation_base(cfg)
    if fig == "6":
        n1, n2 = parse_grid(cfg.grid) if cfg.grid else (21, 21)
        grid = decoherence_map(Axis("gamma1_over_omega0", 0.0, 0.1, n1),
                               Axis("gamma2_over_omega0", 0.0, 0.1, n2), base, cfg.steps, cfg.mu)
        path = grid.write_csv(out / "fig6.csv")
    else:
        n1, n2 = parse_grid(cfg.grid) if cfg.grid else (41, 41)
        if n1 != n2:
            raise ConfigError("config field 'grid': deviation grids are square")
        grid = deviation_grid(fig, n1, base=base, strategy=cfg.deviation_strategy, steps=cfg.steps, mu=cfg.mu)
        path = grid.write_csv(out / f"fig4_{fig[1]}.csv")
    _emit_csv(path, cfg, "sweep", figure=fig, axes=list(grid.axes), study=grid.metadata)
    i, j = np.unravel_index(np.argmin(grid.values), grid.values.shape)
    print(f"{grid.values.size} points, min F = {grid.values[i, j]:.4f}")


def cmd_sweep(cfg: RunConfig, args) -> int:
    if bool(args.table) == bool(args.fig):
        raise ConfigError("sweep needs exactly one of --table or --fig")
    if args.table:
        _table(cfg, args.table)
    else:
        _figure(cfg, args.fig)
    return 0


def cmd_stirap(cfg: RunConfig, args) -> int:
    points = args.points or [w for w, _ in STIRAP_TABLE]
    if any(w <= 0 for w in points):
        raise ConfigError("Omega0 T values must be positive")
    scan = stirap_scan(points, cfg.steps, cfg.T, cfg.mu)
    path = write_stirap_csv(Path(cfg.out) / "stirap.csv", scan)
    _emit_csv(path, cfg, "stirap")
    for w, f in scan:
        print(f"Omega0 T = {w:g}  F = {f:.4f}")
    return 0


COMMANDS = {"design": cmd_design, "fit": cmd_fit, "simulate": cmd_simulate, "sweep": cmd_sweep,
            "stirap": cmd_stirap}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--steps", type=int, help="RK4 steps over the interaction time")
    common.add_argument("--mu", type=float, help="target mixing angle (rad)")
    common.add_argument("--A", type=float, dest="A", help="peak of the beta schedule (rad)")
    common.add_argument("--pulse-source", choices=PULSE_SOURCES)
    common.add_argument("--deviation-strategy", choices=STRATEGIES)
    common.add_argument("--omega0", type=float, dest="stirap_omega0_T", help="STIRAP amplitude as Omega0 T")
    common.add_argument("--gamma1", type=float, dest="gamma1_T", help="decay rate |2>->|1> as Gamma1 T")
    common.add_argument("--gamma2", type=float, dest="gamma2_T", help="decay rate |3>->|2> as Gamma2 T")
    common.add_argument("--grid", help="grid size as NxM")
    common.add_argument("--check", action="store_true", help="run the invariant suite first")

    parser = argparse.ArgumentParser(prog="revham", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("design", parents=[common], help="exact pulses and forbidden-coupling report")
    sub.add_parser("fit", parents=[common], help="fit lab-friendly shapes to the exact pulses")
    sub.add_parser("simulate", parents=[common], help="integrate one pulse set, print F")
    sw = sub.add_parser("sweep", parents=[common], help="deviation tables and figure grids")
    sw.add_argument("--table", choices=("I", "II", "III", "IV", "V"))
    sw.add_argument("--fig", choices=tuple(FIG4_PAIRS) + ("5", "6"))
    st = sub.add_parser("stirap", parents=[common], help="STIRAP fidelity versus Omega0 T")
    st.add_argument("--points", type=float, nargs="+", help="Omega0 T values")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: getattr(args, k) for k in ("out", "steps", "mu", "A", "pulse_source", "deviation_strategy",
                                                "stirap_omega0_T", "gamma1_T", "gamma2_T", "grid")}
    try:
        cfg = load_config(args.config, overrides)
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        if args.check and not run_checks(cfg):
            print("error: invariant check failed", file=sys.stderr)
            return 1
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, IntegrationError, NonUnitaryError, FitError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
