"""Semiclassical Redfield engine for a frequency-modulated spin-1/2.

The lattice is a classical isotropic noise field with exponential correlation
``lambda_q^2 exp(-|dt|/tau0)`` on each Cartesian axis, coupled through
``-gamma_n * sum_q lambda_q(t) I_q``.

Level labels follow ``I_z|k> = (k - 1/2)|k>``: label 0 is the ground level and
label 1 the excited level, so ``Omega_10(t) = +Omega(t)``. Relaxation-matrix
entries are indexed by these labels. Density matrices exchanged with the rest
of the package use the (excited, ground) layout of :mod:`spinrelax.numerics`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .modulation import ModulationProfile, accumulated_phase, larmor_frequency, phase_increment
from .numerics import (
    IX, IY, IZ, IDENTITY, OdeStepperConfig, QuadratureConfig, integrate,
    integrate_ode, is_density_matrix, pack_complex, unpack_complex,
)

AXES = ("x", "y", "z")
# tail of exp(-t'/tau0) beyond this many correlation times is below 1e-18
_TAIL = math.log(1e18)
_MAX_NODES = 4_000_000

# spin operators in the label basis (index = level label, 0 = ground)
_LABEL_OPS = {q: op[::-1, ::-1].copy() for q, op in zip(AXES, (IX, IY, IZ))}


def to_labels(m: np.ndarray) -> np.ndarray:
    """(excited, ground) layout -> label basis (ground, excited)."""
    return np.asarray(m)[..., ::-1, ::-1]


to_layout = to_labels  # the reordering is an involution


@dataclass(frozen=True)
class NoiseEnvironment:
    """Classical stochastic bath.

    Attributes:
        gamma_n: gyromagnetic factor.
        lambda_sq: mean-square field fluctuation per axis ``(x, y, z)``.
        tau0: correlation time.
        beta: inverse temperature in energy units matching ``omega0``.
    """

    gamma_n: float
    lambda_sq: tuple[float, float, float]
    tau0: float
    beta: float = 0.0

    def __post_init__(self):
        lam = tuple(float(v) for v in self.lambda_sq)
        if len(lam) != 3:
            raise ValueError("lambda_sq needs one entry per axis (x, y, z)")
        if min(lam) < 0:
            raise ValueError("lambda_sq entries must be nonnegative")
        if not self.tau0 > 0:
            raise ValueError("tau0 must be positive")
        object.__setattr__(self, "lambda_sq", lam)

    @classmethod
    def isotropic(cls, gamma_n: float, lambda_sq: float, tau0: float, beta: float = 0.0):
        return cls(gamma_n, (lambda_sq,) * 3, tau0, beta)

    def strength(self, q: str) -> float:
        """``gamma_n^2 lambda_q^2``."""
        return self.gamma_n**2 * self.lambda_sq[AXES.index(q)]


@dataclass(frozen=True)
class RelaxationMatrix:
    """``entries[k, n, n', k']`` over level labels, in units of 1/time."""

    entries: np.ndarray
    t: float

    def __getitem__(self, idx):
        return self.entries[idx]


def correlation(env: NoiseEnvironment, q: str, dt):
    """Lattice autocorrelation ``lambda_q^2 exp(-|dt| / tau0)``."""
    return env.lambda_sq[AXES.index(q)] * np.exp(-np.abs(dt) / env.tau0)


def _memory_integral(env: NoiseEnvironment, p: ModulationProfile, t: float,
                     cfg: QuadratureConfig) -> complex:
    """``int_0^t dt' exp(-t'/tau0) exp(i [Omega(t+t') - Omega(t)])`` by composite quadrature."""
    if t <= 0:
        return 0j
    length = min(t, _TAIL * env.tau0)
    scale = min(env.tau0, 1.0 / p.max_frequency)
    n = cfg.panels(length / scale)
    if n > _MAX_NODES:
        raise ValueError(
            f"spectral-density quadrature needs {n} panels; omega*tau0 is too large"
        )
    s = np.linspace(0.0, length, n + 1)
    f = np.exp(-s / env.tau0 + 1j * phase_increment(p, t, s))
    return complex(integrate(f, length / n, cfg.rule))


def _base_theta(env, p, t, cfg, *, lamb_shift=True, kappa_z_plateau=False):
    """Per-sign spectral integrals without the ``gamma^2 lambda_q^2`` factor.

    Returns ``{+1: ..., -1: ..., 0: ...}`` such that
    ``Theta_q(t, s*Omega) = strength_q * base[s]``.
    """
    mem = _memory_integral(env, p, t, cfg)
    if not lamb_shift:
        mem = mem.real
    rot = np.exp(1j * accumulated_phase(p, t))
    plus = rot * mem
    zero = env.tau0 if kappa_z_plateau else env.tau0 * -math.expm1(-t / env.tau0)
    return {1: plus, -1: np.conj(plus), 0: complex(zero)}


def theta_q(env: NoiseEnvironment, p: ModulationProfile, q: str, t: float, sign: int,
            cfg: QuadratureConfig | None = None) -> complex:
    """Time-dependent spectral density for axis ``q``.

    ``sign`` selects the transition phase ``sign * Omega``; ``sign = 0`` is
    the secular (diagonal) case whose integrand carries no phase.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if sign not in (-1, 0, 1):
        raise ValueError("sign must be -1, 0 or +1")
    base = _base_theta(env, p, t, cfg or QuadratureConfig())
    return env.strength(q) * base[sign]


def kappa_q(env: NoiseEnvironment, p: ModulationProfile, q: str, t: float,
            cfg: QuadratureConfig | None = None, *, kappa_z_plateau: bool = False) -> complex:
    """Decay rate ``Theta_q(t, +Omega) exp(-i Omega(t))``; for ``q='z'`` the secular ``Theta_z(t, 0)``."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    if q == "z":
        zero = env.tau0 if kappa_z_plateau else env.tau0 * -math.expm1(-t / env.tau0)
        return complex(env.strength("z") * zero)
    return complex(env.strength(q) * _memory_integral(env, p, t, cfg or QuadratureConfig()))


def longitudinal_rate(env: NoiseEnvironment, p: ModulationProfile, t: float,
                      cfg: QuadratureConfig | None = None) -> float:
    """``Re[k_x(t) + k_y(t)]`` with a single quadrature (the integral is axis independent)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    g = env.strength("x") + env.strength("y")
    if g == 0:
        return 0.0
    return g * _memory_integral(env, p, t, cfg or QuadratureConfig()).real


def kappa_z_plateau(env: NoiseEnvironment) -> float:
    """Long-time value of the secular rate, ``gamma^2 lambda_z^2 tau0``."""
    return env.strength("z") * env.tau0


def _transition_signs():
    # sign of Omega_ab for labels a, b
    return np.array([[0, -1], [1, 0]])


_SIGNS = _transition_signs()


def _relaxation_entries(env, p, t, cfg, **opts) -> np.ndarray:
    base = _base_theta(env, p, t, cfg, **opts)
    omega = accumulated_phase(p, t)
    phase = np.exp(1j * omega * _SIGNS)                      # e^{i Omega_ab(t)}
    R = np.zeros((2, 2, 2, 2), dtype=complex)
    delta = np.eye(2)
    table = np.array([[base[0], base[-1]], [base[1], base[0]]])  # Theta(t, Omega_ab) / strength
    for q in AXES:
        g = env.strength(q)
        if g == 0:
            continue
        Iq = _LABEL_OPS[q]
        theta = g * table
        IP = Iq * phase
        IT = Iq * theta
        R += np.einsum("kn,pq->knpq", IP, IT)                 # Theta(Omega_n'k') e^{iOmega_kn}
        R += np.einsum("kn,pq->knpq", IT, IP)                 # Theta(Omega_kn) e^{iOmega_n'k'}
        R -= np.einsum("kn,pq->knpq", IP @ IT, delta)         # delta_k'n' sum_j
        R -= np.einsum("kn,pq->knpq", delta, IT @ IP)         # delta_kn sum_j
    return R


def relaxation_matrix(env: NoiseEnvironment, p: ModulationProfile, t: float,
                      cfg: QuadratureConfig | None = None, *, lamb_shift: bool = True,
                      kappa_z_plateau: bool = False) -> RelaxationMatrix:
    """All 16 relaxation-matrix elements ``R[k, n, n', k']`` at time ``t``.

    The defaults evaluate the spectral densities exactly as defined, including
    their imaginary parts and the finite-time secular integral.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    R = _relaxation_entries(env, p, t, cfg or QuadratureConfig(),
                            lamb_shift=lamb_shift, kappa_z_plateau=kappa_z_plateau)
    return RelaxationMatrix(R, float(t))


def equilibrium_state(env: NoiseEnvironment, p: ModulationProfile) -> np.ndarray:
    """High-temperature equilibrium ``(1 - beta H_S(0)) / 2`` in layout order."""
    return 0.5 * (IDENTITY - env.beta * p.omega0 * IZ)


def redfield_rhs(env: NoiseEnvironment, p: ModulationProfile, t: float, Sigma: np.ndarray,
                 cfg: QuadratureConfig | None = None, *, free_evolution: bool = True,
                 lamb_shift: bool = False, kappa_z_plateau: bool = True,
                 R: RelaxationMatrix | None = None) -> np.ndarray:
    """Time derivative of the Schrodinger-picture deviation operator ``Sigma = sigma - sigma_eq``.

    Args:
        Sigma: deviation operator in (excited, ground) layout.
        free_evolution: include ``-i[H_S(t), Sigma]`` with ``H_S = omega_L(t) I_z``.
        lamb_shift: keep the imaginary (frequency-shift) part of the decay
            rates. Off by default so that the coherence rate is the real
            ``Re[k_x + k_y]/2 + k_z`` of the Bloch description.
        kappa_z_plateau: use the stationary secular rate instead of its
            finite-time transient.
        R: precomputed relaxation matrix (overrides the three options above).
    """
    if R is None:
        R = relaxation_matrix(env, p, t, cfg, lamb_shift=lamb_shift,
                              kappa_z_plateau=kappa_z_plateau)
    S = to_labels(Sigma)
    omega = accumulated_phase(p, t)
    Om = omega * _SIGNS
    # e^{-i(Omega_kk' + Omega_n'n)} indexed [k, k', n, n']
    ph = np.exp(-1j * (Om[:, :, None, None] + Om.T[None, None, :, :]))
    dS = np.einsum("kcnm,knmc,nm->kc", ph, R.entries, S)
    out = to_layout(dS)
    if free_evolution:
        H = larmor_frequency(p, t) * IZ
        out = out - 1j * (H @ Sigma - Sigma @ H)
    return out


@dataclass(frozen=True)
class RedfieldTrajectory:
    """Samples of ``sigma(t) = Sigma(t) + sigma_eq`` in the lab (Schrodinger) frame."""

    t: np.ndarray
    rho: np.ndarray
    sigma_eq: np.ndarray
    min_eigenvalue: float


def evolve_redfield(env: NoiseEnvironment, p: ModulationProfile, sigma0, t_span,
                    cfg: OdeStepperConfig | None = None, t_eval=None,
                    quad: QuadratureConfig | None = None, **rhs_opts) -> RedfieldTrajectory:
    """Propagate a density matrix under the Redfield equation.

    The deviation operator is integrated and ``sigma`` is rebuilt on output.
    Positivity is monitored, not enforced: the most negative eigenvalue seen
    along the samples is reported in ``min_eigenvalue``.
    """
    sigma0 = np.asarray(sigma0, dtype=complex)
    if not is_density_matrix(sigma0, 1e-9):
        raise ValueError("sigma0 is not a density matrix")
    quad = quad or QuadratureConfig()
    eq = equilibrium_state(env, p)

    def rhs(t, y):
        return pack_complex(redfield_rhs(env, p, t, unpack_complex(y), quad, **rhs_opts))

    traj = integrate_ode(rhs, pack_complex(sigma0 - eq), t_span, cfg, t_eval)
    rho = np.array([unpack_complex(y) for y in traj.y]) + eq
    rho = 0.5 * (rho + np.conj(np.swapaxes(rho, -1, -2)))
    min_eig = float(np.linalg.eigvalsh(rho).min())
    return RedfieldTrajectory(traj.t, rho, eq, min_eig)


def to_rotating_frame(p: ModulationProfile, t, rho) -> np.ndarray:
    """Remove the free precession: ``sigma_eg -> sigma_eg * exp(i Omega(t))``."""
    rho = np.array(rho, dtype=complex, copy=True)
    ph = np.exp(1j * accumulated_phase(p, np.asarray(t)))
    rho[..., 0, 1] *= ph
    rho[..., 1, 0] *= np.conj(ph)
    return rho
