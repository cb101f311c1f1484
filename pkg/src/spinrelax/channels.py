"""Operator-sum (Kraus) maps for phase and finite-temperature amplitude damping.

Matrices use the (excited, ground) layout of :mod:`spinrelax.numerics`, which
is also the order in which the Kraus operators are conventionally written
(row 0 is the excited level ``|1>``).

The channel parameters are

* ``p(t) = (1 - exp(-Gamma_p t)) / 2`` for phase damping, so coherences are
  multiplied by ``1 - 2p = exp(-Gamma_p t)``;
* ``a(t) = 1 - exp(-int_0^t 1/T1)`` for amplitude damping, so populations
  relax toward ``diag(gamma_T, 1 - gamma_T)`` and coherences shrink by
  ``sqrt(1 - a)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Literal, Optional

import numpy as np

from .lindblad import QuantumEnvironment, decay_rates
from .numerics import IDENTITY, QuadratureConfig, dagger, integrate, is_density_matrix

COMPLETENESS_TOL = 1e-12


class ParameterError(ValueError):
    """Raised when a channel parameter is outside its admissible range."""


def _check_range(name: str, value: float, lo: float, hi: float, *, lo_open=False, hi_open=False):
    if not math.isfinite(value):
        raise ParameterError(f"{name} must be finite, got {value!r}")
    below = value <= lo if lo_open else value < lo
    above = value >= hi if hi_open else value > hi
    if below or above:
        lb = "(" if lo_open else "["
        rb = ")" if hi_open else "]"
        raise ParameterError(f"{name} = {value:g} outside {lb}{lo:g}, {hi:g}{rb}")


@dataclass(frozen=True)
class KrausSet:
    """Ordered Kraus operators of a single-qubit channel.

    Completeness ``sum_k E_k^dagger E_k = 1`` is checked on construction.
    """

    operators: tuple
    channel: Literal["phase", "amplitude"]
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        ops = tuple(np.asarray(e, dtype=complex) for e in self.operators)
        if not ops or any(e.shape != (2, 2) for e in ops):
            raise ParameterError("Kraus operators must be a nonempty list of 2x2 matrices")
        object.__setattr__(self, "operators", ops)
        err = self.completeness_error()
        if err > COMPLETENESS_TOL:
            raise ParameterError(f"Kraus completeness violated by {err:.3g}")

    def completeness_error(self) -> float:
        """``max |sum_k E_k^dagger E_k - 1|`` over matrix entries."""
        s = sum(dagger(e) @ e for e in self.operators)
        return float(np.max(np.abs(s - IDENTITY)))

    def __len__(self):
        return len(self.operators)


def phase_p(gamma_p: float, t: float) -> float:
    """Phase-flip probability ``(1 - exp(-Gamma_p t)) / 2``."""
    if gamma_p < 0 or t < 0:
        raise ParameterError("Gamma_p and t must be nonnegative")
    return -0.5 * math.expm1(-gamma_p * t)


def amplitude_a(rate_integral: float) -> float:
    """Decay probability ``1 - exp(-I)`` for an accumulated dimensionless rate ``I``.

    ``I`` is either ``2 int_0^t Re[F_a + G_a]`` or ``int_0^t 1/T1``; the two
    coincide for the master-equation rates.
    """
    if not rate_integral >= 0:
        raise ParameterError(f"rate integral must be nonnegative, got {rate_integral!r}")
    return -math.expm1(-rate_integral)


def _integrate_rate(rate: Callable[[float], float], t0: float, t1: float,
                    quad: QuadratureConfig) -> float:
    if t0 < 0 or t1 < t0:
        raise ParameterError("need 0 <= t0 <= t1")
    if t1 == t0:
        return 0.0
    n = quad.panels(t1 - t0)
    s = np.linspace(t0, t1, n + 1)
    vals = np.array([rate(x) for x in s], dtype=float)
    return float(integrate(vals, (t1 - t0) / n, quad.rule))


def rate_integral_fg(env: QuantumEnvironment, t: float, quad: QuadratureConfig | None = None) -> float:
    """``2 int_0^t Re[F_a + G_a] dtau`` from the amplitude-bath decay rates."""

    def rate(x):
        r = decay_rates(env, x)
        return 2 * (r.F_a + r.G_a).real

    return _integrate_rate(rate, 0.0, t, quad or QuadratureConfig())


def rate_integral_inv_t1(inv_t1: Callable[[float], float], t: float,
                         quad: QuadratureConfig | None = None) -> float:
    """``int_0^t 1/T1(tau) dtau`` for any longitudinal-rate function."""
    return _integrate_rate(inv_t1, 0.0, t, quad or QuadratureConfig())


def kraus_phase(p: float) -> KrausSet:
    """Phase-damping Kraus pair ``sqrt(1-p) 1`` and ``sqrt(p) diag(1, -1)``."""
    _check_range("p", p, 0.0, 0.5)
    e0 = math.sqrt(1 - p) * IDENTITY
    e1 = math.sqrt(p) * np.diag([1.0, -1.0]).astype(complex)
    return KrausSet((e0, e1), "phase", {"p": p})


def kraus_amplitude(a: float, gamma_T: float) -> KrausSet:
    """Four Kraus operators of generalized (finite-temperature) amplitude damping."""
    _check_range("a", a, 0.0, 1.0, hi_open=True)
    _check_range("gamma_T", gamma_T, 0.0, 0.5, lo_open=True)
    q = math.sqrt(1 - a)
    r = math.sqrt(a)
    g = math.sqrt(gamma_T)
    h = math.sqrt(1 - gamma_T)
    ops = (
        g * np.array([[1, 0], [0, q]], dtype=complex),
        g * np.array([[0, r], [0, 0]], dtype=complex),
        h * np.array([[q, 0], [0, 1]], dtype=complex),
        h * np.array([[0, 0], [r, 0]], dtype=complex),
    )
    return KrausSet(ops, "amplitude", {"a": a, "gamma_T": gamma_T})


def thermalizing_channel(gamma_T: float) -> KrausSet:
    """The ``a -> 1`` limit of :func:`kraus_amplitude`: every state goes to ``diag(gamma_T, 1 - gamma_T)``.

    ``a`` itself stays below 1 for any finite time; in double precision the
    coherence factor ``sqrt(1 - a)`` cannot drop below ~1e-8, so the limit
    is built directly.
    """
    _check_range("gamma_T", gamma_T, 0.0, 0.5, lo_open=True)
    g = math.sqrt(gamma_T)
    h = math.sqrt(1 - gamma_T)
    ops = (
        g * np.array([[1, 0], [0, 0]], dtype=complex),
        g * np.array([[0, 1], [0, 0]], dtype=complex),
        h * np.array([[0, 0], [0, 1]], dtype=complex),
        h * np.array([[0, 0], [1, 0]], dtype=complex),
    )
    return KrausSet(ops, "amplitude", {"a": 1.0, "gamma_T": gamma_T})


def apply_channel(ks: KrausSet, sigma0) -> np.ndarray:
    """``sum_k E_k sigma0 E_k^dagger``."""
    sigma0 = np.asarray(sigma0, dtype=complex)
    if sigma0.shape != (2, 2):
        raise ValueError("sigma0 must be a 2x2 matrix")
    return sum(e @ sigma0 @ dagger(e) for e in ks.operators)


def evolve_kraus(env: QuantumEnvironment, sigma0, t, quad: QuadratureConfig | None = None
                 ) -> np.ndarray:
    """Density matrices at times ``t`` from the combined amplitude and phase channels.

    The two channels commute, so the order of application is immaterial. The
    amplitude parameter accumulates the rate integral interval by interval.
    """
    quad = quad or QuadratureConfig()
    sigma0 = np.asarray(sigma0, dtype=complex)
    if not is_density_matrix(sigma0, 1e-9):
        raise ValueError("sigma0 is not a density matrix")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if t.size and (t[0] < 0 or np.any(np.diff(t) < 0)):
        raise ValueError("times must be nonnegative and nondecreasing")
    out = np.empty((t.size, 2, 2), dtype=complex)
    acc, prev = 0.0, 0.0
    for i, ti in enumerate(t):
        acc += _integrate_rate(env.inv_t1, prev, ti, quad)
        prev = ti
        a, p = amplitude_a(acc), phase_p(env.gamma_p, ti)
        # identity channels are skipped so that t = 0 returns sigma0 bit for bit
        rho = apply_channel(kraus_amplitude(a, env.gamma_T), sigma0) if a > 0 else sigma0.copy()
        out[i] = apply_channel(kraus_phase(p), rho) if p > 0 else rho
    return out


@dataclass(frozen=True)
class PhenomenologicalNorms:
    """Scalar norms of the system-environment map at one instant.

    Phase channel: ``t11`` and ``f_sq_sum``. Amplitude channel: ``t00``,
    ``t11``, ``g_sq_sum`` (the zero-temperature emission weight),
    ``h_sq_sum`` and ``h_tilde_sq_sum``. The last two are stored as their
    published square-root expressions and are not normalization weights;
    they take no part in consistency checks.
    """

    channel: Literal["phase", "amplitude"]
    t: float
    t00: float = 1.0
    t11: float = 1.0
    f_sq_sum: Optional[float] = None
    g_sq_sum: Optional[float] = None
    h_sq_sum: Optional[float] = None
    h_tilde_sq_sum: Optional[float] = None

    def values(self) -> dict[str, float]:
        names = ("t00", "t11", "f_sq_sum", "g_sq_sum", "h_sq_sum", "h_tilde_sq_sum")
        return {k: getattr(self, k) for k in names if getattr(self, k) is not None}


def amplitude_rate_from_a(a: float, t: float) -> float:
    """Rate ``Gamma_a`` with ``exp(-2 Gamma_a t) = 1 - a`` (the excited-state survival)."""
    _check_range("a", a, 0.0, 1.0, hi_open=True)
    if not t > 0:
        raise ParameterError("t must be positive")
    return -0.5 * math.log1p(-a) / t


def phenomenological_norms(channel: Literal["phase", "amplitude"], t: float, *,
                           gamma_p: float = 0.0, gamma_a: float = 0.0,
                           gamma_T: float = 0.0) -> PhenomenologicalNorms:
    """Norms of the map operators after time ``t``.

    Args:
        channel: ``"phase"`` or ``"amplitude"``.
        t: elapsed time.
        gamma_p: coherence decay rate of the phase bath.
        gamma_a: amplitude rate, defined so that the excited-state survival
            probability at zero temperature is ``exp(-2 gamma_a t)``.
        gamma_T: Boltzmann factor; 0 selects the zero-temperature map.
    """
    if t < 0:
        raise ParameterError("t must be nonnegative")
    if channel == "phase":
        if gamma_p < 0:
            raise ParameterError("gamma_p must be nonnegative")
        return PhenomenologicalNorms("phase", t, t00=1.0, t11=math.exp(-gamma_p * t),
                                     f_sq_sum=-math.expm1(-2 * gamma_p * t))
    if channel != "amplitude":
        raise ParameterError(f"unknown channel {channel!r}")
    if gamma_a < 0:
        raise ParameterError("gamma_a must be nonnegative")
    _check_range("gamma_T", gamma_T, 0.0, 0.5)
    lost = -math.expm1(-2 * gamma_a * t)
    if gamma_T == 0:
        return PhenomenologicalNorms("amplitude", t, t00=1.0, t11=math.exp(-gamma_a * t),
                                     g_sq_sum=lost)
    return PhenomenologicalNorms(
        "amplitude", t,
        t00=math.sqrt(1 - lost * gamma_T),
        t11=math.sqrt(1 - lost + lost * gamma_T),
        g_sq_sum=lost,
        h_sq_sum=math.sqrt(lost * gamma_T),
        h_tilde_sq_sum=math.sqrt(lost * (1 - gamma_T)),
    )


def reconstruct_phase(norms: PhenomenologicalNorms, sigma0) -> np.ndarray:
    """Reduced state produced by the phase map: coherences scale by ``|T11| |T00|``."""
    if norms.channel != "phase":
        raise ValueError("phase norms required")
    out = np.array(sigma0, dtype=complex, copy=True)
    c = norms.t00 * norms.t11
    out[0, 1] *= c
    out[1, 0] *= c
    return out


def reconstruct_populations(norms: PhenomenologicalNorms, sigma0) -> np.ndarray:
    """Excited and ground populations produced by the amplitude map."""
    if norms.channel != "amplitude":
        raise ValueError("amplitude norms required")
    s = np.asarray(sigma0, dtype=complex)
    pe, pg = s[0, 0].real, s[1, 1].real
    stay_e = norms.t11**2
    stay_g = norms.t00**2
    excited = stay_e * pe + (1 - stay_g) * pg
    return np.array([excited, 1 - excited])
