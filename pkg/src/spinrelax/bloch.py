"""Magnetizations, Bloch equations, T1/T2 and the Redfield <-> master-equation identification."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .lindblad import QuantumEnvironment, evolve_master, theta_a_from_redfield, thermal_occupation
from .modulation import ModulationProfile
from .numerics import IX, IY, IZ, OdeStepperConfig, QuadratureConfig, integrate_ode
from .redfield import (
    NoiseEnvironment, equilibrium_state, evolve_redfield, kappa_z_plateau,
    longitudinal_rate, to_rotating_frame,
)


@dataclass(frozen=True)
class Magnetization:
    mx: float
    my: float
    mz: float
    m0: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.mx, self.my, self.mz])


@dataclass(frozen=True)
class RelaxationTimes:
    """Time-dependent rates with ``1/T2 = 1/(2 T1) + kappa_z`` built in."""

    inv_t1: Callable[[float], float]
    kappa_z: float

    def inv_t2(self, t: float) -> float:
        return 0.5 * self.inv_t1(t) + self.kappa_z

    def t1(self, t: float) -> float:
        r = self.inv_t1(t)
        return math.inf if r == 0 else 1.0 / r

    def t2(self, t: float) -> float:
        r = self.inv_t2(t)
        return math.inf if r == 0 else 1.0 / r


def magnetization_of(sigma, m0: float = 0.0) -> Magnetization:
    """Expectation values ``Tr(I_q sigma)``."""
    sigma = np.asarray(sigma)
    return Magnetization(
        float(np.trace(IX @ sigma).real),
        float(np.trace(IY @ sigma).real),
        float(np.trace(IZ @ sigma).real),
        m0,
    )


def magnetization_series(rho: np.ndarray) -> np.ndarray:
    """(N, 3) array of ``(mx, my, mz)`` for a stack of density matrices."""
    rho = np.asarray(rho)
    eg = rho[:, 0, 1]
    return np.column_stack([eg.real, -eg.imag, 0.5 * (rho[:, 0, 0] - rho[:, 1, 1]).real])


def bloch_rhs(rates: RelaxationTimes, t: float, m: Magnetization) -> Magnetization:
    """Relaxing Bloch equations: ``dmz/dt = -(mz - m0)/T1``, ``dm_perp/dt = -m_perp/T2``.

    The returned ``Magnetization`` holds derivatives; its ``m0`` is zero.
    """
    r1 = rates.inv_t1(t)
    r2 = 0.5 * r1 + rates.kappa_z
    return Magnetization(-r2 * m.mx, -r2 * m.my, -r1 * (m.mz - m.m0))


def evolve_bloch(rates: RelaxationTimes, m_init: Magnetization, t_span,
                 cfg: OdeStepperConfig | None = None, t_eval=None):
    """Integrate the Bloch equations; returns ``(t, (N, 3) array)``."""
    m0 = m_init.m0

    def rhs(t, y):
        d = bloch_rhs(rates, t, Magnetization(y[0], y[1], y[2], m0))
        return np.array([d.mx, d.my, d.mz])

    traj = integrate_ode(rhs, m_init.as_array(), t_span, cfg, t_eval)
    return traj.t, traj.y


def relaxation_times_redfield(env: NoiseEnvironment, p: ModulationProfile,
                              cfg: QuadratureConfig | None = None) -> RelaxationTimes:
    """T1(t), T2(t) from the classical-noise decay rates.

    ``kappa_z`` enters as its stationary value; the finite-time secular rate
    is available from ``kappa_q(env, p, "z", t)``.
    """
    cfg = cfg or QuadratureConfig()
    return RelaxationTimes(lambda t: longitudinal_rate(env, p, t, cfg), kappa_z_plateau(env))


def relaxation_times_master(env: QuantumEnvironment) -> RelaxationTimes:
    return RelaxationTimes(env.inv_t1, env.gamma_p)


def identify(env_noise: NoiseEnvironment, p: ModulationProfile, betaE: float, n_p: float = 0.0,
             cfg: QuadratureConfig | None = None) -> QuantumEnvironment:
    """Quantum baths whose master-equation dynamics reproduce the Redfield Bloch rates."""
    n_a = thermal_occupation(betaE)
    theta_a = theta_a_from_redfield(env_noise, p, n_a, cfg)
    theta_p = math.pi * kappa_z_plateau(env_noise) / (2 * n_p + 1)
    return QuantumEnvironment(betaE=betaE, theta_a=theta_a, theta_p=theta_p, n_p=n_p)


def static_t1(env: NoiseEnvironment, p: ModulationProfile) -> float:
    """Long-time T1 of the unmodulated profile (Lorentzian limit)."""
    g = env.strength("x") + env.strength("y")
    rate = g * env.tau0 / (1 + (p.omega0 * env.tau0) ** 2)
    return math.inf if rate == 0 else 1.0 / rate


@dataclass(frozen=True)
class EquivalenceResult:
    """Rotating-frame magnetizations of the three descriptions and their deviations."""

    t: np.ndarray
    redfield: np.ndarray
    master: np.ndarray
    bloch: np.ndarray
    min_eigenvalue: float

    def max_deviation(self) -> dict[str, dict[str, float]]:
        pairs = {
            "redfield-master": (self.redfield, self.master),
            "redfield-bloch": (self.redfield, self.bloch),
            "master-bloch": (self.master, self.bloch),
        }
        out = {}
        for name, (a, b) in pairs.items():
            d = np.max(np.abs(a - b), axis=0)
            out[name] = dict(zip(("mx", "my", "mz"), map(float, d)))
        return out

    def worst(self) -> float:
        return max(max(v.values()) for v in self.max_deviation().values())


def run_equivalence(env_noise: NoiseEnvironment, p: ModulationProfile, sigma0, t_span,
                    betaE: float, n_p: float = 0.0, qenv: QuantumEnvironment | None = None,
                    n_samples: int = 201, cfg: OdeStepperConfig | None = None,
                    quad: QuadratureConfig | None = None, free_evolution: bool = True
                    ) -> EquivalenceResult:
    """Evolve ``sigma0`` with Redfield, the identified master equation and the Bloch equations.

    Redfield output is brought to the rotating frame so the three series are
    directly comparable. ``qenv`` overrides the identified quantum baths.
    """
    quad = quad or QuadratureConfig()
    qenv = qenv or identify(env_noise, p, betaE, n_p, quad)
    t_eval = np.linspace(t_span[0], t_span[1], n_samples)

    rf = evolve_redfield(env_noise, p, sigma0, t_span, cfg, t_eval, quad,
                         free_evolution=free_evolution)
    rot = to_rotating_frame(p, rf.t, rf.rho) if free_evolution else rf.rho
    m_rf = magnetization_series(rot)

    me = evolve_master(qenv, sigma0, t_span, cfg, t_eval)
    m_me = magnetization_series(me.rho)

    m0 = magnetization_of(equilibrium_state(env_noise, p)).mz
    start = magnetization_of(sigma0, m0)
    rates = relaxation_times_redfield(env_noise, p, quad)
    _, m_bl = evolve_bloch(rates, start, t_span, cfg, t_eval)

    return EquivalenceResult(t_eval, m_rf, m_me, m_bl, rf.min_eigenvalue)
