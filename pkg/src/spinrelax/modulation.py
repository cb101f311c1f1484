"""Larmor-frequency modulation law and its accumulated phase."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class AdiabaticityError(ValueError):
    """Raised in strict mode when the modulation rate is not small against omega0."""


@dataclass(frozen=True)
class ModulationProfile:
    """Sinusoidally modulated Larmor frequency ``omega0 + chi * sin(zeta * t)``.

    ``chi = 0`` (or ``zeta = 0``) is the static profile. The adiabatic flag
    records whether ``zeta / omega0`` is below ``adiabatic_threshold``; with
    ``strict=True`` a non-adiabatic profile is rejected.
    """

    omega0: float
    chi: float = 0.0
    zeta: float = 0.0
    adiabatic_threshold: float = 0.01
    strict: bool = False
    adiabatic: bool = field(init=False)

    def __post_init__(self):
        if not self.omega0 > 0:
            raise ValueError("omega0 must be positive")
        if self.chi < 0 or self.zeta < 0:
            raise ValueError("chi and zeta must be nonnegative")
        object.__setattr__(self, "adiabatic", self.zeta / self.omega0 < self.adiabatic_threshold)
        if self.strict and not self.adiabatic:
            raise AdiabaticityError(
                f"zeta/omega0 = {self.zeta / self.omega0:.3g} is not below "
                f"{self.adiabatic_threshold:g}; the fast-modulation regime is not supported"
            )

    @classmethod
    def static(cls, omega0: float) -> "ModulationProfile":
        return cls(omega0=omega0)

    @property
    def is_static(self) -> bool:
        return self.chi == 0 or self.zeta == 0

    @property
    def max_frequency(self) -> float:
        return self.omega0 + (0.0 if self.is_static else self.chi)


def larmor_frequency(p: ModulationProfile, t):
    """Instantaneous angular frequency ``omega0 + chi sin(zeta t)``."""
    t = np.asarray(t, dtype=float)
    if p.is_static:
        out = np.full_like(t, p.omega0)
    else:
        out = p.omega0 + p.chi * np.sin(p.zeta * t)
    return out[()] if out.ndim == 0 else out


def accumulated_phase(p: ModulationProfile, t):
    """Closed-form integral of the Larmor frequency from 0 to ``t``."""
    t = np.asarray(t, dtype=float)
    out = p.omega0 * t
    if not p.is_static:
        out = out + (p.chi / p.zeta) * (1.0 - np.cos(p.zeta * t))
    return out[()] if np.ndim(out) == 0 else out


def phase_increment(p: ModulationProfile, t, dt):
    """``Omega(t + dt) - Omega(t)`` without the cancellation of subtracting two large phases."""
    t = np.asarray(t, dtype=float)
    dt = np.asarray(dt, dtype=float)
    out = p.omega0 * dt
    if not p.is_static:
        # cos a - cos b = -2 sin((a+b)/2) sin((a-b)/2)
        out = out + (2 * p.chi / p.zeta) * np.sin(p.zeta * (t + dt / 2)) * np.sin(p.zeta * dt / 2)
    return out[()] if np.ndim(out) == 0 else out
