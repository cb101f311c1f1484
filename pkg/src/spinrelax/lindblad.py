"""Quantum master-equation engine with amplitude- and phase-damping baths.

Conventions (layout row 0 = excited level):

* The amplitude bath absorbs at rate ``F_a = <n_a> Theta_a / 2pi`` (ground to
  excited) and emits at ``G_a = (<n_a> + 1) Theta_a / 2pi``, so the thermal
  state ``diag(gamma_T, 1 - gamma_T)`` is the fixed point.
* The phase bath damps coherences at ``Gamma_p = 2 Re[F_p + G_p]
  = Theta_p (2<n_p> + 1) / pi`` and leaves populations untouched.

``Theta_a`` may be a constant, any callable of time, or the Redfield bridge
from :func:`theta_a_from_redfield`. The frequency-space integral that defines
``Theta_a`` microscopically is not evaluated here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .modulation import ModulationProfile
from .numerics import (
    I_MINUS, I_PLUS, IZ, OdeStepperConfig, QuadratureConfig, dagger, integrate_ode,
    is_density_matrix, pack_complex, unpack_complex,
)
from .redfield import NoiseEnvironment, longitudinal_rate

RateFunction = Callable[[float], float]


def thermal_occupation(betaE: float) -> float:
    """Bose occupation ``1 / (exp(betaE) - 1)``."""
    return math.exp(-betaE) / -math.expm1(-betaE)


def boltzmann_factor(betaE: float) -> float:
    """Excited-state population ``exp(-betaE) / (1 + exp(-betaE))``."""
    x = math.exp(-betaE)
    return x / (1.0 + x)


def _as_rate_function(theta) -> RateFunction:
    if callable(theta):
        return theta
    value = float(theta)
    if value < 0:
        raise ValueError("Theta_a must be nonnegative")
    return lambda t: value


@dataclass(frozen=True)
class QuantumEnvironment:
    """Amplitude and phase quantum baths at a common ``betaE``.

    ``n_a`` and ``gamma_T`` are derived from ``betaE`` and checked against
    ``n_a = gamma_T / (1 - 2 gamma_T)``.
    """

    betaE: float
    theta_a: Union[float, RateFunction] = 0.0
    theta_p: float = 0.0
    n_p: float = 0.0
    n_a: float = field(init=False)
    gamma_T: float = field(init=False)

    def __post_init__(self):
        if not self.betaE > 0:
            raise ValueError("betaE must be positive (finite temperature)")
        if self.theta_p < 0:
            raise ValueError("Theta_p must be nonnegative")
        if self.n_p < 0:
            raise ValueError("<n_p> must be nonnegative")
        n_a = thermal_occupation(self.betaE)
        g = boltzmann_factor(self.betaE)
        if not 0 < g < 0.5:
            raise ValueError("gamma_T outside (0, 1/2)")
        if abs(g / (1 - 2 * g) - n_a) > 1e-12 * max(1.0, n_a):
            raise ValueError("thermal identity n_a = gamma_T / (1 - 2 gamma_T) violated")
        object.__setattr__(self, "n_a", n_a)
        object.__setattr__(self, "gamma_T", g)
        object.__setattr__(self, "_theta_a_fn", _as_rate_function(self.theta_a))

    def theta_a_at(self, t: float) -> float:
        return float(self._theta_a_fn(t))

    @property
    def gamma_p(self) -> float:
        """Coherence damping rate of the phase bath."""
        return self.theta_p * (2 * self.n_p + 1) / math.pi

    def inv_t1(self, t: float) -> float:
        return self.theta_a_at(t) * (2 * self.n_a + 1) / math.pi


@dataclass(frozen=True)
class DecayRates:
    F_a: complex
    G_a: complex
    F_p: complex
    G_p: complex


def decay_rates(env: QuantumEnvironment, t: float) -> DecayRates:
    if t < 0:
        raise ValueError("t must be nonnegative")
    th = env.theta_a_at(t)
    two_pi = 2 * math.pi
    return DecayRates(
        F_a=env.n_a * th / two_pi,
        G_a=(env.n_a + 1) * th / two_pi,
        F_p=env.n_p * env.theta_p / two_pi,
        G_p=(env.n_p + 1) * env.theta_p / two_pi,
    )


def _dissipator_term(rate: complex, a: np.ndarray, b: np.ndarray, sigma: np.ndarray):
    """``rate [a sigma, b] + H.c.``, extended linearly to non-Hermitian ``sigma``."""
    ad, bd = dagger(a), dagger(b)
    return (rate * (a @ sigma @ b - b @ a @ sigma)
            + np.conj(rate) * (bd @ sigma @ ad - sigma @ ad @ bd))


def master_rhs(env: QuantumEnvironment, t: float, sigma: np.ndarray,
               rates: DecayRates | None = None) -> np.ndarray:
    """Interaction-picture master equation for the spin density matrix."""
    r = rates or decay_rates(env, t)
    out = _dissipator_term(r.G_a, I_MINUS, I_PLUS, sigma)   # emission
    out = out + _dissipator_term(r.F_a, I_PLUS, I_MINUS, sigma)  # absorption
    out = out + _dissipator_term(2 * (r.F_p + r.G_p), IZ, IZ, sigma)
    return out


@dataclass(frozen=True)
class MasterTrajectory:
    t: np.ndarray
    rho: np.ndarray


def evolve_master(env: QuantumEnvironment, sigma0, t_span, cfg: OdeStepperConfig | None = None,
                  t_eval=None) -> MasterTrajectory:
    sigma0 = np.asarray(sigma0, dtype=complex)
    if not is_density_matrix(sigma0, 1e-9):
        raise ValueError("sigma0 is not a density matrix")

    def rhs(t, y):
        return pack_complex(master_rhs(env, t, unpack_complex(y)))

    traj = integrate_ode(rhs, pack_complex(sigma0), t_span, cfg, t_eval)
    rho = np.array([unpack_complex(y) for y in traj.y])
    return MasterTrajectory(traj.t, rho)


def theta_a_from_redfield(env_noise: NoiseEnvironment, p: ModulationProfile, n_a: float,
                          cfg: QuadratureConfig | None = None) -> RateFunction:
    """Amplitude-bath rate that reproduces the Redfield longitudinal rate.

    Returns ``t -> pi Re[k_x(t) + k_y(t)] / (2 n_a + 1)``.
    """
    cfg = cfg or QuadratureConfig()
    scale = math.pi / (2 * n_a + 1)

    def theta_a(t: float) -> float:
        return scale * longitudinal_rate(env_noise, p, t, cfg)

    return theta_a
