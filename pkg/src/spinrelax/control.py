"""Relaxation control by Larmor-frequency modulation.

All quantities are dimensionless, with time measured in units of the static
relaxation time ``T1_0``. The accumulated decay is

    D(tau) = C int_0^tau dtau2 int_0^tau2 dtau1 f(tau1),
    f(tau1) = exp(-tau1 / tau_c) cos(w tau1 + 2 (chi/zeta) sin^2(phi(tau1)))

with ``tau_c = tau0 / T1_0``, ``w = omega_L T1_0`` and the modulation phase
``phi = 2 tau1 / eta`` (``variant="verbatim"``) or ``phi = tau1 / (2 eta)``
(``variant="rederived"``). The calibrated prefactor ``C`` makes the static
decay rate equal to ``1/T1_0``, so the static curve passes through
``a(1) = 1 - 1/e``.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Literal, Optional

import numpy as np

from .numerics import (
    IntegrandDomainError, NumericalError, QuadratureConfig, cumulative_integral, nested_integral,
)

# exp(-60) ~ 1e-26: the integrand tail past 60 correlation times is negligible
_CUTOFF = 60.0
ADIABATIC_RATIO = 100.0
FEASIBILITY_MARGIN = 100.0
_MAX_NODES = 20_000_000


class AdiabaticityWarning(UserWarning):
    """Modulation rate not small against the Larmor frequency."""


@dataclass(frozen=True)
class ControlParams:
    """Dimensionless control parameters.

    Attributes:
        eta: ``1 / (T1_0 zeta)``.
        chi_over_zeta: modulation amplitude over modulation rate.
        omega_T1: ``omega_L T1_0``.
        tau0_over_T1: ``tau0 / T1_0``.
        epsilon: ``xi / chi``; recorded for reports, not used in ``D``.
        prefactor: ``2 (gamma_n lambda T1_0)^2``; ``None`` selects the
            calibrated value.
        variant: modulation phase, ``"verbatim"`` or ``"rederived"``.
    """

    eta: float
    chi_over_zeta: float = 0.0
    omega_T1: float = 1e4
    tau0_over_T1: float = 1e-4
    epsilon: float = 0.0
    prefactor: Optional[float] = None
    variant: Literal["verbatim", "rederived"] = "verbatim"

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.chi_over_zeta < 0:
            raise ValueError("chi_over_zeta must be nonnegative")
        if not self.omega_T1 > 0:
            raise ValueError("omega_T1 must be positive")
        if not self.tau0_over_T1 > 0:
            raise ValueError("tau0_over_T1 must be positive")
        if self.prefactor is not None and not self.prefactor >= 0:
            raise ValueError("prefactor must be nonnegative")
        if self.variant not in ("verbatim", "rederived"):
            raise ValueError(f"unknown variant {self.variant!r}")

    @property
    def adiabatic_ratio(self) -> float:
        """``omega_L / zeta = eta * omega_T1``."""
        return self.eta * self.omega_T1

    def check_adiabatic(self, threshold: float = ADIABATIC_RATIO) -> bool:
        ok = self.adiabatic_ratio > threshold
        if not ok:
            warnings.warn(
                f"omega_L/zeta = {self.adiabatic_ratio:.3g} is not above {threshold:g}",
                AdiabaticityWarning, stacklevel=2,
            )
        return ok

    @property
    def effective_prefactor(self) -> float:
        if self.prefactor is not None:
            return self.prefactor
        return calibrated_prefactor(self.omega_T1, self.tau0_over_T1)


def calibrated_prefactor(omega_T1: float, tau0_over_T1: float) -> float:
    """Prefactor for which the static long-time decay rate is exactly 1."""
    return (1 + (omega_T1 * tau0_over_T1) ** 2) / tau0_over_T1


def integrand(cp: ControlParams, tau1):
    """Inner integrand ``f(tau1)`` without the prefactor."""
    tau1 = np.asarray(tau1, dtype=float)
    if cp.variant == "verbatim":
        arg = 2 * tau1 / cp.eta
    else:
        arg = tau1 / (2 * cp.eta)
    phase = cp.omega_T1 * tau1 + 2 * cp.chi_over_zeta * np.sin(arg) ** 2
    return np.exp(-tau1 / cp.tau0_over_T1) * np.cos(phase)


def _scale(cp: ControlParams) -> float:
    # shortest feature of f: decay, carrier period or modulation period
    scales = [cp.tau0_over_T1, 1.0 / cp.omega_T1]
    if cp.chi_over_zeta > 0:
        rate = 2 / cp.eta if cp.variant == "verbatim" else 1 / (2 * cp.eta)
        scales.append(1.0 / (rate * max(1.0, 2 * cp.chi_over_zeta)))
    return min(scales)


def _moments(cp: ControlParams, tau_max: float, quad: QuadratureConfig):
    """Grid and cumulative integrals ``F0 = int f`` and ``F1 = int tau1 f`` up to the cutoff."""
    length = min(tau_max, _CUTOFF * cp.tau0_over_T1)
    scale = _scale(cp)
    if not scale > 0 or length / scale * quad.panels_per_unit > _MAX_NODES:
        raise NumericalError("integrand oscillates too fast to resolve; reduce chi_over_zeta")
    n = quad.panels(length / scale)
    s = np.linspace(0.0, length, n + 1)
    f = integrand(cp, s)
    if not np.all(np.isfinite(f)):
        raise IntegrandDomainError("integrand domain error: non-finite sample")
    h = length / n
    return s, cumulative_integral(f, h, quad.rule), cumulative_integral(s * f, h, quad.rule)


def decay_integral(cp: ControlParams, tau, quad: QuadratureConfig | None = None):
    """``D(tau)`` for scalar or array ``tau``.

    The double integral is reduced to ``tau F0(tau) - F1(tau)`` with the
    cumulative moments of the inner integrand. Past the cutoff the moments
    are constant, so ``D`` grows linearly.
    """
    quad = quad or QuadratureConfig()
    tau_arr = np.asarray(tau, dtype=float)
    if np.any(tau_arr < 0) or not np.all(np.isfinite(tau_arr)):
        raise ValueError("tau must be finite and nonnegative")
    flat = tau_arr.ravel()
    out = np.zeros_like(flat)
    tau_max = float(flat.max()) if flat.size else 0.0
    if tau_max > 0:
        s, F0, F1 = _moments(cp, tau_max, quad)
        inside = flat <= s[-1]
        # linear interpolation between nodes; the grid resolves f finely
        f0 = np.where(inside, np.interp(flat, s, F0.real), F0[-1].real)
        f1 = np.where(inside, np.interp(flat, s, F1.real), F1[-1].real)
        out = cp.effective_prefactor * (flat * f0 - f1)
        out[flat == 0] = 0.0
    out = out.reshape(tau_arr.shape)
    return float(out) if out.ndim == 0 else out


def decay_integral_nested(cp: ControlParams, tau: float, quad: QuadratureConfig | None = None
                          ) -> float:
    """Reference evaluation of ``D(tau)`` as a literal double integral.

    Uses :func:`nested_integral` on ``[0, min(tau, cutoff)]`` and extends the
    result linearly beyond the cutoff. Slower than :func:`decay_integral`;
    intended for cross-checks.
    """
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    if tau == 0:
        return 0.0
    quad = quad or QuadratureConfig()
    cut = min(tau, _CUTOFF * cp.tau0_over_T1)
    # nested_integral counts panels per unit; rescale so the grid resolves f
    q = replace(quad, panels_per_unit=max(8, math.ceil(quad.panels_per_unit / _scale(cp))))
    d = nested_integral(lambda t1, t2: integrand(cp, t1), cut, q)
    if tau > cut:
        _, F0, _ = _moments(cp, cut, quad)
        d += (tau - cut) * F0[-1].real
    return cp.effective_prefactor * d


def decay_function(cp: ControlParams, tau, quad: QuadratureConfig | None = None):
    """``a(tau) = 1 - exp(-D(tau))``."""
    d = decay_integral(cp, tau, quad)
    return -np.expm1(-d) if isinstance(d, np.ndarray) else -math.expm1(-d)


@dataclass(frozen=True)
class SweepGrid:
    """Cartesian grid of ``(eta, chi_over_zeta)`` cells, each sampled at ``taus``."""

    etas: tuple
    chi_over_zetas: tuple
    taus: tuple

    def __post_init__(self):
        for name in ("etas", "chi_over_zetas", "taus"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals:
                raise ValueError(f"{name} must be nonempty")
            object.__setattr__(self, name, vals)
        if any(t < 0 for t in self.taus) or any(np.diff(self.taus) < 0):
            raise ValueError("taus must be nonnegative and nondecreasing")

    @classmethod
    def uniform(cls, etas, chi_over_zetas, tau_max: float, n_tau: int) -> "SweepGrid":
        if tau_max < 0:
            raise ValueError("tau_max must be nonnegative")
        if tau_max == 0:
            return cls(etas, chi_over_zetas, (0.0,))
        if n_tau < 2:
            raise ValueError("n_tau must be at least 2")
        return cls(etas, chi_over_zetas, tuple(np.linspace(0.0, tau_max, n_tau)))

    def cells(self):
        return [(e, c) for e in self.etas for c in self.chi_over_zetas]


@dataclass(frozen=True)
class SweepRow:
    eta: float
    chi_over_zeta: float
    tau: float
    D: float
    a: float
    error: str = ""


def _sweep_cell(args):
    base, eta, cz, taus, quad = args
    cp = replace(base, eta=eta, chi_over_zeta=cz)
    try:
        d = np.atleast_1d(decay_integral(cp, np.array(taus), quad))
        return [SweepRow(eta, cz, t, float(x), float(-math.expm1(-x))) for t, x in zip(taus, d)]
    except Exception as exc:  # recorded per row; the sweep continues
        msg = f"{type(exc).__name__}: {exc}"
        return [SweepRow(eta, cz, t, math.nan, math.nan, msg) for t in taus]


def default_workers() -> int:
    """Worker count from ``SPINRELAX_WORKERS`` (default 1)."""
    raw = os.environ.get("SPINRELAX_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"SPINRELAX_WORKERS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ValueError("SPINRELAX_WORKERS must be >= 1")
    return n


def sweep(grid: SweepGrid, base: ControlParams, quad: QuadratureConfig | None = None,
          workers: int | None = None) -> list[SweepRow]:
    """Evaluate ``D`` and ``a`` on every grid cell.

    Rows are ordered by ``(eta, chi_over_zeta)`` grid index and then by
    ``tau`` regardless of the worker count.
    """
    quad = quad or QuadratureConfig()
    workers = default_workers() if workers is None else workers
    jobs = [(base, e, c, grid.taus, quad) for e, c in grid.cells()]
    for _, e, _, _, _ in jobs:
        replace(base, eta=e).check_adiabatic()
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
            results = list(ex.map(_sweep_cell, jobs))
    else:
        results = [_sweep_cell(j) for j in jobs]
    return [row for cell in results for row in cell]


@dataclass(frozen=True)
class Condition:
    name: str
    margin: float
    status: Literal["pass", "warn", "fail"]


@dataclass(frozen=True)
class FeasibilityReport:
    zeta: float
    chi: float
    field: float
    field_window: tuple[float, float]
    conditions: tuple = field(default_factory=tuple)

    @property
    def status(self) -> str:
        states = [c.status for c in self.conditions]
        return "fail" if "fail" in states else "warn" if "warn" in states else "pass"


def _grade(name: str, margin: float, threshold: float) -> Condition:
    if margin >= threshold:
        return Condition(name, margin, "pass")
    return Condition(name, margin, "warn" if margin > 1 else "fail")


def feasibility(cp: ControlParams, b0: float, gamma_n: float, t1_0: float,
                threshold: float = FEASIBILITY_MARGIN) -> FeasibilityReport:
    """Check the physical requirements of the protocol for a concrete spin.

    A strong inequality ``x >> y`` passes when ``x / y >= threshold``, warns
    when ``1 < x / y < threshold`` and fails otherwise.

    Args:
        cp: control parameters (``eta`` and ``chi_over_zeta`` are used).
        b0: static field in tesla.
        gamma_n: gyromagnetic factor in rad s^-1 T^-1.
        t1_0: static relaxation time in seconds.
    """
    if not (b0 > 0 and gamma_n > 0 and t1_0 > 0):
        raise ValueError("b0, gamma_n and t1_0 must be positive")
    zeta = 1.0 / (cp.eta * t1_0)
    chi = cp.chi_over_zeta * zeta
    b_field = chi / gamma_n
    lower = 1.0 / (gamma_n * t1_0)
    omega_l = gamma_n * b0
    conds = (
        _grade("modulation_rate", zeta * t1_0, threshold),
        _grade("modulation_amplitude", chi * t1_0, threshold),
        _grade("field_above_lower", b_field / lower, threshold),
        _grade("field_below_static", b0 / b_field if b_field > 0 else math.inf, threshold),
        _grade("adiabatic", omega_l / zeta, threshold),
    )
    return FeasibilityReport(zeta, chi, b_field, (lower, b0), conds)
