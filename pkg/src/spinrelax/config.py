"""YAML scenario configuration with schema validation and line-numbered errors."""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .channels import ParameterError
from .control import ControlParams, SweepGrid
from .modulation import ModulationProfile
from .numerics import OdeStepperConfig, QuadratureConfig, is_density_matrix
from .redfield import NoiseEnvironment


class ConfigError(ValueError):
    """Schema or value error in a scenario file."""


_NUM = "number"
_OPT_NUM = "number or null"

# section -> key -> (kind, default); defaults documented in the README table
SCHEMA: dict[str, dict[str, tuple[str, Any]]] = {
    "modulation": {
        "omega0": (_NUM, 1.0),
        "chi": (_NUM, 0.0),
        "zeta": (_NUM, 0.0),
        "adiabatic_threshold": (_NUM, 0.01),
    },
    "noise": {
        "gamma_n": (_NUM, 1.0),
        "lambda_sq": ("number or list", 0.01),
        "tau0": (_NUM, 1.0),
        "beta": (_OPT_NUM, None),
    },
    "quantum": {
        "betaE": (_NUM, 0.01),
        "n_p": (_NUM, 0.0),
        "theta_a_mode": ("string", "bridged"),
        "theta_a": (_NUM, 0.0),
        "theta_p": (_OPT_NUM, None),
    },
    "control": {
        "eta": (_NUM, 0.1),
        "chi_over_zeta": (_NUM, 0.0),
        "omega_T1": (_NUM, 1e4),
        "tau0_over_T1": (_NUM, 1e-4),
        "epsilon": (_NUM, 0.0),
        "prefactor": (_OPT_NUM, None),
        "variant": ("string", "verbatim"),
        "etas": ("list", [0.1]),
        "chi_over_zetas": ("list", [0.0, 1.0, 10.0]),
        "taus": ("list or null", None),
        "tau_max": (_NUM, 3.0),
        "n_tau": ("integer", 301),
        "panels_per_unit": ("integer", 128),
    },
    "run": {
        "engine": ("string", "redfield"),
        "t_span": ("list", [0.0, 500.0]),
        "n_samples": ("integer", 201),
        "initial_state": ("list", [[0.7, 0.3], [0.3, 0.3]]),
        "frame": ("string", "rotating"),
        "method": ("string", "rk45"),
        "rel_tol": (_NUM, 1e-9),
        "abs_tol": (_NUM, 1e-12),
        "max_step": (_OPT_NUM, None),
        "panels_per_unit": ("integer", 128),
        "rule": ("string", "simpson"),
        "rate_panels_per_unit": ("integer", 8),
        "tolerance": (_NUM, 1e-5),
        "output": ("string or null", None),
        "seed": ("integer", 0),
    },
    "kraus": {
        "p_points": ("integer", 21),
        "p_values": ("list or null", None),
        "a_points": ("integer", 21),
        "a_max": (_NUM, 0.99),
        "a_values": ("list or null", None),
        "gamma_T_points": ("integer", 21),
        "gamma_T_values": ("list or null", None),
        "n_states": ("integer", 100),
    },
}


def _line_map(node, path=(), out=None) -> dict[tuple, int]:
    """1-based source line of every mapping key and sequence item."""
    out = {} if out is None else out
    out.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            out[path + (key,)] = k.start_mark.line + 1
            _line_map(v, path + (key,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            out[path + (i,)] = v.start_mark.line + 1
            _line_map(v, path + (i,), out)
    return out


@dataclass(frozen=True)
class QuantumSection:
    betaE: float
    n_p: float
    theta_a_mode: str
    theta_a: float
    theta_p: Optional[float]


@dataclass(frozen=True)
class KrausSection:
    p_values: tuple
    a_values: tuple
    gamma_T_values: tuple
    n_states: int


@dataclass(frozen=True)
class RunSection:
    engine: str
    t_span: tuple[float, float]
    n_samples: int
    initial_state: np.ndarray
    frame: str
    ode: OdeStepperConfig
    quad: QuadratureConfig
    rate_quad: QuadratureConfig
    tolerance: float
    output: Optional[str]
    seed: int

    @property
    def t_eval(self) -> np.ndarray:
        return np.linspace(self.t_span[0], self.t_span[1], self.n_samples)


@dataclass(frozen=True)
class ScenarioConfig:
    modulation: ModulationProfile
    noise: NoiseEnvironment
    quantum: QuantumSection
    control: ControlParams
    grid: SweepGrid
    control_quad: QuadratureConfig
    run: RunSection
    kraus: KrausSection
    sha256: str = ""
    source: str = ""
    raw: dict = field(default_factory=dict, repr=False)


class _Reader:
    """Typed access to one section with errors that carry the source line."""

    def __init__(self, data: dict, lines: dict, source: str):
        self.data = data
        self.lines = lines
        self.source = source

    def where(self, *path) -> str:
        while path and path not in self.lines:
            path = path[:-1]
        line = self.lines.get(path)
        return f"{self.source}:{line}" if line else self.source

    def fail(self, path: tuple, msg: str):
        dotted = ".".join(str(p) for p in path)
        raise ConfigError(f"{self.where(*path)}: {dotted}: {msg}")

    def section(self, name: str) -> dict:
        sec = self.data.get(name, {})
        if sec is None:
            sec = {}
        if not isinstance(sec, dict):
            self.fail((name,), "section must be a mapping")
        unknown = sorted(set(sec) - set(SCHEMA[name]))
        if unknown:
            self.fail((name, unknown[0]), f"unknown key (allowed: {', '.join(SCHEMA[name])})")
        out = {}
        for key, (kind, default) in SCHEMA[name].items():
            out[key] = self._check(name, key, kind, sec.get(key, default), key in sec)
        return out

    def _check(self, sec, key, kind, value, given):
        path = (sec, key)
        if value is None:
            if "null" in kind or not given:
                return None
            self.fail(path, f"expected {kind}, got null")
        if kind.startswith("number"):
            value = _coerce(value)
        if kind.startswith("number") and "list" not in kind:
            if not _is_number(value):
                self.fail(path, f"expected a number, got {value!r}")
            if not math.isfinite(float(value)):
                self.fail(path, "must be finite")
            return float(value)
        if kind == "integer":
            if isinstance(value, bool) or not isinstance(value, int):
                self.fail(path, f"expected an integer, got {value!r}")
            return value
        if kind.startswith("string"):
            if not isinstance(value, str):
                self.fail(path, f"expected a string, got {value!r}")
            return value
        if kind == "number or list":
            if _is_number(value):
                return float(value)
        if not isinstance(value, list):
            self.fail(path, f"expected {kind}, got {value!r}")
        return value

    def numbers(self, path: tuple, values, n: int | None = None) -> tuple:
        if n is not None and len(values) != n:
            self.fail(path, f"expected {n} entries, got {len(values)}")
        values = [_coerce(v) for v in values]
        for i, v in enumerate(values):
            if not _is_number(v) or not math.isfinite(float(v)):
                self.fail(path + (i,), f"expected a finite number, got {v!r}")
        return tuple(float(v) for v in values)


_FLOAT_RE = re.compile(r"^[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?$")


def _coerce(v):
    # YAML 1.1 reads "1e4" (no dot) as a string
    if isinstance(v, str) and _FLOAT_RE.match(v.strip()):
        return float(v)
    return v


def _is_number(v) -> bool:
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _matrix(r: _Reader, path: tuple, value) -> np.ndarray:
    """2x2 matrix whose entries are numbers or ``[re, im]`` pairs."""
    if len(value) != 2 or any(not isinstance(row, list) or len(row) != 2 for row in value):
        r.fail(path, "initial_state must be a 2x2 nested list")
    m = np.zeros((2, 2), dtype=complex)
    for i, row in enumerate(value):
        for j, x in enumerate(row):
            if _is_number(x):
                m[i, j] = float(x)
            elif isinstance(x, list) and len(x) == 2 and all(_is_number(c) for c in x):
                m[i, j] = complex(float(x[0]), float(x[1]))
            else:
                r.fail(path + (i, j), f"entry must be a number or [re, im], got {x!r}")
    return m


def _build(data: dict, lines: dict, source: str, strict_adiabatic: bool) -> ScenarioConfig:
    r = _Reader(data, lines, source)
    unknown = sorted(set(data) - set(SCHEMA))
    if unknown:
        r.fail((unknown[0],), f"unknown section (allowed: {', '.join(SCHEMA)})")

    def guarded(path, fn, *args, **kw):
        try:
            return fn(*args, **kw)
        except (ValueError, TypeError) as exc:
            r.fail(path, str(exc))

    m = r.section("modulation")
    modulation = guarded(("modulation",), ModulationProfile, m["omega0"], m["chi"], m["zeta"],
                         m["adiabatic_threshold"], strict_adiabatic)

    q = r.section("quantum")
    if q["theta_a_mode"] not in ("direct", "bridged"):
        r.fail(("quantum", "theta_a_mode"), "must be 'direct' or 'bridged'")
    if not q["betaE"] > 0:
        r.fail(("quantum", "betaE"), "must be positive")
    for key in ("n_p", "theta_a"):
        if q[key] < 0:
            r.fail(("quantum", key), "must be nonnegative")
    if q["theta_p"] is not None and q["theta_p"] < 0:
        r.fail(("quantum", "theta_p"), "must be nonnegative")
    quantum = QuantumSection(**q)

    n = r.section("noise")
    lam = n["lambda_sq"]
    lam = (lam,) * 3 if isinstance(lam, float) else r.numbers(("noise", "lambda_sq"), lam, 3)
    beta = n["beta"] if n["beta"] is not None else q["betaE"] / modulation.omega0
    noise = guarded(("noise",), NoiseEnvironment, n["gamma_n"], lam, n["tau0"], beta)

    c = r.section("control")
    control = guarded(("control",), ControlParams, c["eta"], c["chi_over_zeta"], c["omega_T1"],
                      c["tau0_over_T1"], c["epsilon"], c["prefactor"], c["variant"])
    etas = r.numbers(("control", "etas"), c["etas"])
    czs = r.numbers(("control", "chi_over_zetas"), c["chi_over_zetas"])
    if any(e <= 0 for e in etas):
        r.fail(("control", "etas"), "eta values must be positive")
    if c["taus"] is not None:
        taus = r.numbers(("control", "taus"), c["taus"])
        grid = guarded(("control", "taus"), SweepGrid, etas, czs, taus)
    else:
        grid = guarded(("control", "tau_max"), SweepGrid.uniform, etas, czs, c["tau_max"], c["n_tau"])
    control_quad = guarded(("control", "panels_per_unit"), QuadratureConfig, c["panels_per_unit"])

    u = r.section("run")
    if u["engine"] not in ("redfield", "master", "kraus"):
        r.fail(("run", "engine"), "must be one of redfield, master, kraus")
    if u["frame"] not in ("rotating", "lab"):
        r.fail(("run", "frame"), "must be 'rotating' or 'lab'")
    t_span = r.numbers(("run", "t_span"), u["t_span"], 2)
    if not t_span[1] > t_span[0] >= 0:
        r.fail(("run", "t_span"), "need 0 <= t0 < t1")
    if u["n_samples"] < 1:
        r.fail(("run", "n_samples"), "must be >= 1")
    if not u["tolerance"] > 0:
        r.fail(("run", "tolerance"), "must be positive")
    ode = guarded(("run", "method"), OdeStepperConfig, u["rel_tol"], u["abs_tol"],
                  math.inf if u["max_step"] is None else u["max_step"], u["method"])
    quad = guarded(("run", "panels_per_unit"), QuadratureConfig, u["panels_per_unit"], u["rule"])
    rate_quad = guarded(("run", "rate_panels_per_unit"), QuadratureConfig,
                        u["rate_panels_per_unit"], u["rule"])
    state = _matrix(r, ("run", "initial_state"), u["initial_state"])
    if not is_density_matrix(state, 1e-9):
        r.fail(("run", "initial_state"), "not a density matrix (Hermitian, unit trace, PSD)")
    run = RunSection(u["engine"], t_span, u["n_samples"], state, u["frame"], ode, quad, rate_quad,
                     u["tolerance"], u["output"], u["seed"])

    k = r.section("kraus")
    for key in ("p_points", "a_points", "gamma_T_points", "n_states"):
        if k[key] < 1:
            r.fail(("kraus", key), "must be >= 1")
    if not 0 <= k["a_max"] < 1:
        r.fail(("kraus", "a_max"), "must lie in [0, 1)")
    p_vals = (r.numbers(("kraus", "p_values"), k["p_values"]) if k["p_values"] is not None
              else tuple(np.linspace(0.0, 0.5, k["p_points"])))
    a_vals = (r.numbers(("kraus", "a_values"), k["a_values"]) if k["a_values"] is not None
              else tuple(np.linspace(0.0, k["a_max"], k["a_points"])))
    g_vals = (r.numbers(("kraus", "gamma_T_values"), k["gamma_T_values"])
              if k["gamma_T_values"] is not None
              else tuple(np.linspace(0.0, 0.5, k["gamma_T_points"] + 2)[1:-1]))
    kraus = KrausSection(p_vals, a_vals, g_vals, k["n_states"])

    return ScenarioConfig(modulation, noise, quantum, control, grid, control_quad, run, kraus,
                          raw=data)


def parse_config(text: str, source: str = "<config>", strict_adiabatic: bool = False
                 ) -> ScenarioConfig:
    """Validate a YAML document and build the scenario objects.

    Raises:
        ConfigError: malformed YAML, unknown keys, wrong types or values
            outside the admissible ranges; the message starts with
            ``source:line``.
    """
    try:
        loader = yaml.SafeLoader(text)
        try:
            node = loader.get_single_node()
            data = loader.construct_document(node) if node is not None else {}
        finally:
            loader.dispose()
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f":{mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{source}{line}: invalid YAML: {getattr(exc, 'problem', exc)}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}:1: top level must be a mapping of sections")
    lines = _line_map(node) if node is not None else {}
    try:
        cfg = _build(data, lines, source, strict_adiabatic)
    except ParameterError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return replace(cfg, sha256=digest, source=source)


def load_config(path, strict_adiabatic: bool = False) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{p}: cannot read config: {exc.strerror}") from None
    return parse_config(text, str(p), strict_adiabatic)
