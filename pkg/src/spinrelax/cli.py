"""Command-line front end.

    spinrelax <evolve|equivalence|control-sweep|kraus-verify> --config PATH
              [--out PATH] [--engine NAME] [--strict-adiabatic]

Exit codes: 0 pass, 2 tolerance breach, 3 config error, 4 numerical failure.
The worker count for sweeps comes from ``SPINRELAX_WORKERS``.
"""

from __future__ import annotations

import argparse
import io
import math
import sys
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import scipy

from . import __version__
from .bloch import EquivalenceResult, identify, magnetization_series, run_equivalence
from .channels import (
    ParameterError, apply_channel, evolve_kraus, kraus_amplitude, kraus_phase,
    thermalizing_channel,
)
from .config import ConfigError, ScenarioConfig, load_config
from .control import SweepRow, decay_function, default_workers, sweep
from .lindblad import QuantumEnvironment, evolve_master
from .modulation import AdiabaticityError
from .numerics import NumericalError
from .redfield import evolve_redfield, to_rotating_frame

EXIT_OK = 0
EXIT_BREACH = 2
EXIT_CONFIG = 3
EXIT_NUMERIC = 4

KRAUS_TOL = 1e-12
THERMALIZE_TOL = 1e-9
CURVE_CLOSENESS = 0.05


@dataclass
class ResultTable:
    """Rectangular real-valued table with a units row and provenance comments."""

    columns: list[str]
    units: list[str]
    rows: list[Sequence[float]] = field(default_factory=list)
    provenance: list[str] = field(default_factory=list)

    def __post_init__(self):
        if len(self.units) != len(self.columns):
            raise ValueError("units row must match the columns")
        if any("," in c for c in [*self.columns, *self.units]):
            raise ValueError("column names and units must not contain commas")

    def add(self, row: Sequence[float]):
        if len(row) != len(self.columns):
            raise ValueError(f"row has {len(row)} cells, expected {len(self.columns)}")
        self.rows.append(tuple(float(x) for x in row))

    def to_csv(self) -> str:
        buf = io.StringIO()
        for line in self.provenance:
            buf.write(f"# {line}\n")
        buf.write(",".join(self.columns) + "\n")
        buf.write(",".join(self.units) + "\n")
        for row in self.rows:
            buf.write(",".join(_fmt(x) for x in row) + "\n")
        return buf.getvalue()


def _fmt(x: float) -> str:
    if math.isnan(x):
        return "nan"
    return repr(float(x))


def _provenance(cfg: ScenarioConfig, command: str, **extra) -> list[str]:
    lines = [
        f"spinrelax {__version__} (numpy {np.__version__}, scipy {scipy.__version__})",
        f"command: {command}",
        f"config_sha256: {cfg.sha256}",
    ]
    lines += [f"{k}: {v}" for k, v in extra.items()]
    return lines


def quantum_environment(cfg: ScenarioConfig) -> QuantumEnvironment:
    """Quantum baths from the config: bridged from the noise model or given directly."""
    q = cfg.quantum
    if q.theta_a_mode == "bridged":
        env = identify(cfg.noise, cfg.modulation, q.betaE, q.n_p, cfg.run.quad)
        if q.theta_p is not None:
            env = replace(env, theta_p=q.theta_p)
        return env
    return QuantumEnvironment(betaE=q.betaE, theta_a=q.theta_a, theta_p=q.theta_p or 0.0, n_p=q.n_p)


STATE_COLUMNS = ["t", "rho_ee", "rho_eg_re", "rho_eg_im", "rho_gg", "mx", "my", "mz"]
STATE_UNITS = ["time", "1", "1", "1", "1", "1", "1", "1"]


def evolve_table(cfg: ScenarioConfig, engine: str) -> ResultTable:
    """Rotating-frame density matrix and magnetization samples for one engine."""
    run = cfg.run
    t = run.t_eval
    if engine == "redfield":
        lab = run.frame == "lab"
        tr = evolve_redfield(cfg.noise, cfg.modulation, run.initial_state, run.t_span, run.ode,
                             t, run.quad, free_evolution=lab)
        rho = to_rotating_frame(cfg.modulation, tr.t, tr.rho) if lab else tr.rho
    elif engine == "master":
        rho = evolve_master(quantum_environment(cfg), run.initial_state, run.t_span, run.ode, t).rho
    elif engine == "kraus":
        rho = evolve_kraus(quantum_environment(cfg), run.initial_state, t, run.rate_quad)
    else:
        raise ConfigError(f"unknown engine {engine!r} (redfield, master, kraus)")
    if not np.all(np.isfinite(rho)):
        raise NumericalError(f"{engine} engine produced non-finite values")
    m = magnetization_series(rho)
    table = ResultTable(STATE_COLUMNS, STATE_UNITS,
                        provenance=_provenance(cfg, "evolve", engine=engine, frame="rotating"))
    for ti, r, mi in zip(t, rho, m):
        table.add([ti, r[0, 0].real, r[0, 1].real, r[0, 1].imag, r[1, 1].real, *mi])
    return table


def equivalence_breaches(res: EquivalenceResult, tol: float) -> list[str]:
    """Named breaches: transverse components map to T2, longitudinal to T1."""
    out = []
    for pair, comps in res.max_deviation().items():
        for comp, dev in comps.items():
            if not dev <= tol:
                channel = "T1" if comp == "mz" else "T2"
                out.append(f"{channel} channel: {pair} {comp} deviation {dev:.3e} > {tol:g}")
    return out


def equivalence_report(cfg: ScenarioConfig) -> tuple[EquivalenceResult, list[str], list[str]]:
    run = cfg.run
    res = run_equivalence(
        cfg.noise, cfg.modulation, run.initial_state, run.t_span, cfg.quantum.betaE,
        cfg.quantum.n_p, quantum_environment(cfg), run.n_samples, run.ode, run.quad,
        free_evolution=run.frame == "lab",
    )
    lines = [f"three-way equivalence over t in [{run.t_span[0]:g}, {run.t_span[1]:g}], "
             f"tolerance {run.tolerance:g}"]
    for pair, comps in res.max_deviation().items():
        vals = "  ".join(f"{k}={v:.3e}" for k, v in comps.items())
        lines.append(f"  {pair:<16} {vals}")
    lines.append(f"  redfield min eigenvalue {res.min_eigenvalue:.3e}")
    breaches = equivalence_breaches(res, run.tolerance)
    lines += [f"BREACH {b}" for b in breaches] or ["PASS"]
    return res, breaches, lines


def equivalence_table(cfg: ScenarioConfig, res: EquivalenceResult) -> ResultTable:
    cols = ["t"] + [f"{c}_{e}" for e in ("redfield", "master", "bloch") for c in ("mx", "my", "mz")]
    table = ResultTable(cols, ["time"] + ["1"] * 9, provenance=_provenance(cfg, "equivalence"))
    for i, t in enumerate(res.t):
        table.add([t, *res.redfield[i], *res.master[i], *res.bloch[i]])
    return table


def sweep_table(cfg: ScenarioConfig, rows: list[SweepRow]) -> ResultTable:
    prov = _provenance(cfg, "control-sweep", variant=cfg.control.variant)
    prov += [f"error: eta={r.eta!r} chi_over_zeta={r.chi_over_zeta!r}: {r.error}"
             for r in rows if r.error and r.tau == rows[0].tau]
    table = ResultTable(["eta", "chi_over_zeta", "tau", "D", "a"],
                        ["1", "1", "T1_0", "1", "1"], provenance=prov)
    for r in rows:
        table.add([r.eta, r.chi_over_zeta, r.tau, r.D, r.a])
    return table


def sweep_summary(cfg: ScenarioConfig, rows: list[SweepRow]) -> tuple[list[str], bool]:
    """Attenuation ordering at tau = 1 and closeness of curves that differ only in eta."""
    lines, ok = [], True
    grid, base, quad = cfg.grid, cfg.control, cfg.control_quad
    czs = sorted(set(grid.chi_over_zetas))
    at1 = {}
    for eta in grid.etas:
        for cz in czs:
            try:
                at1[eta, cz] = decay_function(replace(base, eta=eta, chi_over_zeta=cz), 1.0, quad)
            except NumericalError as exc:
                at1[eta, cz] = math.nan
                ok = False
                lines.append(f"summary cell eta={eta:g} cz={cz:g} failed: {exc}")
    for eta in grid.etas:
        vals = [at1[eta, cz] for cz in czs]
        margins = [a - b for a, b in zip(vals, vals[1:])]
        good = all(m >= 0 for m in margins)
        ok &= good
        desc = ", ".join(f"a(cz={cz:g})={v:.8f}" for cz, v in zip(czs, vals))
        lines.append(f"ordering eta={eta:g} at tau=1: {desc}; "
                     f"min margin {min(margins, default=0.0):.3e} {'PASS' if good else 'FAIL'}")
    curves = {}
    for r in rows:
        if r.tau <= 3.0:
            curves.setdefault((r.eta, r.chi_over_zeta), []).append(r.a)
    etas = sorted(set(grid.etas))
    for cz in czs if curves else []:
        for e1, e2 in zip(etas, etas[1:]):
            diff = float(np.max(np.abs(np.subtract(curves[e1, cz], curves[e2, cz]))))
            good = diff < CURVE_CLOSENESS
            ok &= good
            lines.append(f"closeness cz={cz:g} eta {e1:g} vs {e2:g}: max |da| {diff:.3e} "
                         f"(< {CURVE_CLOSENESS:g}) {'PASS' if good else 'FAIL'}")
    # informational: amplitude effect against rate effect
    for eta in etas:
        for e2 in etas:
            if e2 >= eta:
                continue
            for c1, c2 in zip(czs, czs[1:]):
                if c1 == 0:
                    continue
                amp = abs(at1[eta, c2] - at1[eta, c1])
                rate = abs(at1[eta, c1] - at1[e2, c1])
                lines.append(f"info: amplitude effect {amp:.3e} vs rate effect {rate:.3e} "
                             f"(eta={eta:g}, cz {c1:g}->{c2:g}, eta {eta:g}->{e2:g})")
    return lines, ok


def kraus_checks(cfg: ScenarioConfig) -> tuple[ResultTable, list[str], list[str]]:
    """Completeness, fixed point, thermalization and composition checks."""
    k = cfg.kraus
    rng = np.random.default_rng(cfg.run.seed)
    states = [_random_state(rng) for _ in range(k.n_states)]
    table = ResultTable(["channel", "p_or_a", "gamma_T", "completeness_error", "fixed_point_error"],
                        ["0 phase | 1 amplitude", "1", "1", "1", "1"],
                        provenance=_provenance(cfg, "kraus-verify", seed=cfg.run.seed))
    breaches = []
    worst = {"completeness": 0.0, "fixed_point": 0.0, "thermalize": 0.0, "composition": 0.0}

    for p in k.p_values:
        ks = kraus_phase(p)
        err = ks.completeness_error()
        worst["completeness"] = max(worst["completeness"], err)
        table.add([0, p, math.nan, err, math.nan])
    for g in k.gamma_T_values:
        thermal = np.diag([g, 1 - g]).astype(complex)
        for a in k.a_values:
            ks = kraus_amplitude(a, g)
            err = ks.completeness_error()
            fp = float(np.max(np.abs(apply_channel(ks, thermal) - thermal)))
            worst["completeness"] = max(worst["completeness"], err)
            worst["fixed_point"] = max(worst["fixed_point"], fp)
            table.add([1, a, g, err, fp])
        ks = thermalizing_channel(g)
        for s in states:
            worst["thermalize"] = max(worst["thermalize"],
                                      float(np.max(np.abs(apply_channel(ks, s) - thermal))))
    for p1 in k.p_values:
        for p2 in k.p_values:
            p12 = 0.5 * (1 - (1 - 2 * p1) * (1 - 2 * p2))
            k1, k2, k12 = kraus_phase(p1), kraus_phase(p2), kraus_phase(p12)
            for s in states[:5]:
                d = apply_channel(k2, apply_channel(k1, s)) - apply_channel(k12, s)
                worst["composition"] = max(worst["composition"], float(np.max(np.abs(d))))

    limits = {"completeness": KRAUS_TOL, "fixed_point": KRAUS_TOL,
              "thermalize": THERMALIZE_TOL, "composition": KRAUS_TOL}
    lines = []
    for name, value in worst.items():
        good = value <= limits[name]
        lines.append(f"{name:<13} max error {value:.3e} (limit {limits[name]:g}) "
                     f"{'PASS' if good else 'FAIL'}")
        if not good:
            breaches.append(name)
    return table, breaches, lines


def _random_state(rng: np.random.Generator) -> np.ndarray:
    z = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    m = z @ z.conj().T
    return m / np.trace(m).real


def _emit(table: ResultTable, out: str | None):
    text = table.to_csv()
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _report(lines: list[str], to_stderr: bool):
    stream = sys.stderr if to_stderr else sys.stdout
    for line in lines:
        print(line, file=stream)


def cmd_evolve(cfg: ScenarioConfig, args) -> int:
    engine = args.engine or cfg.run.engine
    _emit(evolve_table(cfg, engine), args.out or cfg.run.output)
    return EXIT_OK


def cmd_equivalence(cfg: ScenarioConfig, args) -> int:
    res, breaches, lines = equivalence_report(cfg)
    out = args.out or cfg.run.output
    if out:
        _emit(equivalence_table(cfg, res), out)
    _report(lines, to_stderr=False)
    return EXIT_BREACH if breaches else EXIT_OK


def cmd_control_sweep(cfg: ScenarioConfig, args) -> int:
    rows = sweep(cfg.grid, cfg.control, cfg.control_quad, default_workers())
    out = args.out or cfg.run.output
    _emit(sweep_table(cfg, rows), out)
    lines, ok = sweep_summary(cfg, rows)
    failed = [r for r in rows if r.error]
    if failed:
        lines.append(f"{len(failed)} rows failed; see the error lines in the CSV header")
    _report(lines, to_stderr=not out)
    if failed:
        return EXIT_NUMERIC
    return EXIT_OK if ok else EXIT_BREACH


def cmd_kraus_verify(cfg: ScenarioConfig, args) -> int:
    table, breaches, lines = kraus_checks(cfg)
    out = args.out or cfg.run.output
    if out:
        _emit(table, out)
    _report(lines, to_stderr=False)
    return EXIT_BREACH if breaches else EXIT_OK


COMMANDS = {
    "evolve": cmd_evolve,
    "equivalence": cmd_equivalence,
    "control-sweep": cmd_control_sweep,
    "kraus-verify": cmd_kraus_verify,
}


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors, not tolerance breaches (argparse uses 2)
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="spinrelax", description="Spin-1/2 relaxation engines and checks.")
    ap.add_argument("command", choices=list(COMMANDS))
    ap.add_argument("--config", required=True, help="YAML scenario file")
    ap.add_argument("--out", help="CSV output path (default: run.output or stdout)")
    ap.add_argument("--engine", choices=["redfield", "master", "kraus"],
                    help="engine for 'evolve' (default: run.engine)")
    ap.add_argument("--strict-adiabatic", action="store_true",
                    help="reject modulation profiles that are not adiabatic")
    return ap


def _run(args) -> int:
    try:
        cfg = load_config(args.config, strict_adiabatic=args.strict_adiabatic)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, ParameterError, AdiabaticityError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # environment-variable problems and similar input errors
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    with warnings.catch_warnings():
        warnings.showwarning = lambda message, *_a, **_k: print(f"warning: {message}", file=sys.stderr)
        return _run(args)


if __name__ == "__main__":
    sys.exit(main())
