"""Shared numerical kernels: 2x2 operators, ODE integration and quadrature.

Every engine in the package goes through :func:`integrate_ode`, so the state
contract lives here: complex states are flattened to a real vector with real
and imaginary parts interleaved (``[re0, im0, re1, im1, ...]``).

Operator layout
---------------
All 2x2 matrices use the (excited, ground) ordering: row/column 0 is the
excited level, row/column 1 the ground level. With this layout the spin
operators are the usual Pauli matrices divided by two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np
from scipy.integrate import solve_ivp

__all__ = [
    "IX", "IY", "IZ", "I_PLUS", "I_MINUS", "IDENTITY",
    "NumericalError", "IntegrationError", "IntegrandDomainError",
    "OdeStepperConfig", "QuadratureConfig", "Trajectory",
    "dagger", "commutator", "pack_complex", "unpack_complex",
    "integrate_ode", "integrate", "cumulative_integral", "nested_integral",
    "is_density_matrix",
]

IDENTITY = np.eye(2, dtype=complex)
IX = 0.5 * np.array([[0, 1], [1, 0]], dtype=complex)
IY = 0.5 * np.array([[0, -1j], [1j, 0]], dtype=complex)
IZ = 0.5 * np.array([[1, 0], [0, -1]], dtype=complex)
# raising: ground -> excited; lowering: excited -> ground
I_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
I_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)


class NumericalError(RuntimeError):
    """Base class for failures inside a numerical kernel."""


class IntegrationError(NumericalError):
    """Raised when the ODE stepper cannot meet its tolerances."""


class IntegrandDomainError(NumericalError):
    """Raised when a quadrature integrand returns a non-finite sample."""


@dataclass(frozen=True)
class OdeStepperConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: float = math.inf
    method: Literal["rk45", "rk4", "dop853"] = "rk45"

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("ODE tolerances must be strictly positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if self.method not in ("rk45", "rk4", "dop853"):
            raise ValueError(f"unknown ODE method {self.method!r}")
        if self.method == "rk4" and not math.isfinite(self.max_step):
            raise ValueError("fixed-step rk4 needs a finite max_step")


@dataclass(frozen=True)
class QuadratureConfig:
    """Composite quadrature settings.

    ``panels_per_unit`` is the panel count per unit of the integration
    variable, or per characteristic scale when the caller supplies one
    (e.g. the correlation time in the spectral-density integrals).
    """

    panels_per_unit: int = 128
    rule: Literal["simpson", "trapezoid"] = "simpson"

    def __post_init__(self):
        if self.panels_per_unit < 8:
            raise ValueError("panels_per_unit must be >= 8")
        if self.rule not in ("simpson", "trapezoid"):
            raise ValueError(f"unknown quadrature rule {self.rule!r}")

    def panels(self, length: float) -> int:
        n = max(2, math.ceil(self.panels_per_unit * length))
        if self.rule == "simpson" and n % 2:
            n += 1
        return n


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered samples of an ODE solution. ``y`` has shape (len(t), dim)."""

    t: np.ndarray
    y: np.ndarray

    def __len__(self):
        return len(self.t)


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def pack_complex(z: np.ndarray) -> np.ndarray:
    """Flatten a complex array to an interleaved real vector."""
    z = np.asarray(z, dtype=complex).ravel()
    out = np.empty(2 * z.size)
    out[0::2] = z.real
    out[1::2] = z.imag
    return out


def unpack_complex(v: np.ndarray, shape=(2, 2)) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return (v[0::2] + 1j * v[1::2]).reshape(shape)


def _rk4(rhs, y0, t_eval, h):
    ys = [np.array(y0, dtype=float)]
    y = ys[0].copy()
    for t0, t1 in zip(t_eval[:-1], t_eval[1:]):
        n = max(1, math.ceil((t1 - t0) / h - 1e-12))
        dt = (t1 - t0) / n
        t = t0
        for _ in range(n):
            k1 = rhs(t, y)
            k2 = rhs(t + dt / 2, y + dt / 2 * k1)
            k3 = rhs(t + dt / 2, y + dt / 2 * k2)
            k4 = rhs(t + dt, y + dt * k3)
            y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += dt
        ys.append(y.copy())
    return np.array(ys)


def integrate_ode(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0,
    t_span,
    cfg: OdeStepperConfig | None = None,
    t_eval=None,
) -> Trajectory:
    """Integrate ``dy/dt = rhs(t, y)`` for a real state vector.

    Args:
        rhs: derivative function ``rhs(t, y) -> dy/dt``.
        y0: initial real state vector.
        t_span: ``(t0, t1)`` with ``t1 > t0``.
        cfg: stepper configuration; defaults to adaptive RK45 at 1e-9/1e-12.
        t_eval: sample times inside ``t_span``; defaults to the two endpoints.

    Raises:
        IntegrationError: the step size underflowed (stiffness or tolerances
            too strict for the problem).
    """
    cfg = cfg or OdeStepperConfig()
    t0, t1 = map(float, t_span)
    if not t1 > t0:
        raise ValueError(f"t_span must satisfy t1 > t0, got {t_span}")
    t_eval = np.array([t0, t1] if t_eval is None else t_eval, dtype=float)
    if t_eval[0] < t0 or t_eval[-1] > t1 or np.any(np.diff(t_eval) < 0):
        raise ValueError("t_eval must be nondecreasing and inside t_span")
    y0 = np.asarray(y0, dtype=float)

    if cfg.method == "rk4":
        grid = t_eval if t_eval[0] == t0 else np.concatenate([[t0], t_eval])
        y = _rk4(rhs, y0, grid, cfg.max_step)
        if t_eval[0] != t0:
            y = y[1:]
        return Trajectory(t_eval, y)

    sol = solve_ivp(
        rhs,
        (t0, t1),
        y0,
        method="RK45" if cfg.method == "rk45" else "DOP853",
        t_eval=t_eval,
        rtol=cfg.rel_tol,
        atol=cfg.abs_tol,
        max_step=cfg.max_step,
    )
    if not sol.success:
        raise IntegrationError(f"stiffness/tolerance failure: {sol.message}")
    return Trajectory(sol.t, sol.y.T)


def _weights(n: int, h: float, rule: str) -> np.ndarray:
    w = np.full(n + 1, h)
    if rule == "trapezoid":
        w[0] = w[-1] = h / 2
    else:
        w[1:-1:2] = 4 * h / 3
        w[2:-1:2] = 2 * h / 3
        w[0] = w[-1] = h / 3
    return w


def integrate(y: np.ndarray, h: float, rule: str = "simpson", axis: int = -1):
    """Composite rule on uniformly spaced samples (Simpson needs an odd count)."""
    y = np.asarray(y)
    n = y.shape[axis] - 1
    if rule == "simpson" and n % 2:
        raise ValueError("Simpson's rule needs an even number of panels")
    w = _weights(n, h, rule)
    return np.tensordot(y, w, axes=([axis], [0]))


def cumulative_integral(y: np.ndarray, h: float, rule: str = "simpson") -> np.ndarray:
    """Running integral ``F[j] = int_0^{x_j} y`` on a uniform grid.

    With Simpson's rule, even nodes use composite Simpson and odd nodes add a
    three-point (quadratic) partial panel, so every node is fourth-order
    accurate in the interior.
    """
    y = np.asarray(y)
    out = np.zeros_like(y, dtype=np.result_type(y, float))
    if y.size < 2:
        return out
    if rule == "trapezoid" or y.size < 3:
        out[1:] = np.cumsum(0.5 * h * (y[1:] + y[:-1]))
        return out
    pairs = h / 3 * (y[0:-2:2] + 4 * y[1:-1:2] + y[2::2])
    out[2::2] = np.cumsum(pairs)
    # quadratic through (x_{j-1}, x_j, x_{j+1}) integrated over [x_{j-1}, x_j]
    half = h / 12 * (5 * y[0:-2:2] + 8 * y[1:-1:2] - y[2::2])
    out[1:-1:2] = out[0:-2:2] + half
    if y.size % 2 == 0:
        # trailing odd node: use the backward quadratic over the last panel
        j = y.size - 1
        out[j] = out[j - 1] + h / 12 * (-y[j - 2] + 8 * y[j - 1] + 5 * y[j])
    return out


def nested_integral(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    T: float,
    cfg: QuadratureConfig | None = None,
) -> float:
    """Evaluate ``int_0^T dtau2 int_0^tau2 dtau1 f(tau1, tau2)``.

    ``f`` must accept broadcast arrays. Each outer node carries its own inner
    grid with the same panel count, scaled to ``[0, tau2]``.

    Raises:
        IntegrandDomainError: if ``f`` produces a non-finite value.
    """
    cfg = cfg or QuadratureConfig(rule="simpson", panels_per_unit=64)
    if T < 0:
        raise ValueError("upper limit must be nonnegative")
    if T == 0:
        return 0.0
    n = cfg.panels(T)
    tau2 = np.linspace(0.0, T, n + 1)
    s = np.linspace(0.0, 1.0, n + 1)
    tau1 = tau2[:, None] * s[None, :]
    vals = np.asarray(f(tau1, np.broadcast_to(tau2[:, None], tau1.shape)), dtype=float)
    if not np.all(np.isfinite(vals)):
        raise IntegrandDomainError("integrand domain error: non-finite sample")
    inner = integrate(vals, 1.0 / n, cfg.rule, axis=1) * tau2
    return float(integrate(inner, T / n, cfg.rule))


def is_density_matrix(m, tol: float = 1e-9) -> bool:
    """True if ``m`` is Hermitian, unit-trace and positive semidefinite within ``tol``."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    m = np.asarray(m, dtype=complex)
    if m.shape != (2, 2) or not np.all(np.isfinite(m)):
        return False
    if np.max(np.abs(m - dagger(m))) > tol:
        return False
    if abs(np.trace(m) - 1) > tol:
        return False
    return bool(np.linalg.eigvalsh(0.5 * (m + dagger(m))).min() >= -tol)
