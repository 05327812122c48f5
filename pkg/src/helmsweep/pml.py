"""Absorbing-layer damping profiles and complex coordinate stretching.

The absorbing layers are realized by stretching each coordinate with
``s(x) = 1 / (1 + i sigma(x) / omega)`` where ``sigma`` is a quadratic ramp
supported on a strip of width ``eta`` next to the absorbing boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PmlConfig",
    "default_damping_amplitude",
    "sigma_profile",
    "stretch_factor",
    "ramp",
]

#: one-pass amplitude transmission through the ramp used for the default C
TARGET_TRANSMISSION = 1e-3


def default_damping_amplitude(transmission=TARGET_TRANSMISSION):
    """Damping amplitude C giving the requested one-pass transmission.

    The quadratic ramp integrates to C/3 over its width, and a unit-speed
    plane wave crossing the layer once is attenuated by exp(-C/3).  The
    result is independent of frequency and of the layer width.
    """
    return -3.0 * np.log(transmission)


@dataclass(frozen=True)
class PmlConfig:
    """Absorbing-layer geometry: width ``eta`` spanning ``b`` grid layers.

    ``eta`` must equal ``b * h`` for the grid the config is used with.
    ``b = 0`` is the degenerate no-damping mode (pure Dirichlet box),
    only useful for discretization tests.
    """

    eta: float
    C: float
    b: int

    def __post_init__(self):
        if self.b < 0 or self.b == 1:
            raise ValueError(f"layer count must be 0 or >= 2, got b={self.b}")
        if self.C <= 0.0:
            raise ValueError("damping amplitude C must be positive")
        if self.eta < 0.0 or (self.b == 0) != (self.eta == 0.0):
            raise ValueError(f"inconsistent eta={self.eta} for b={self.b}")

    @classmethod
    def from_layers(cls, b, h, C=None):
        """Config whose ramp spans exactly ``b`` grid layers of spacing ``h``."""
        if C is None:
            C = default_damping_amplitude()
        return cls(eta=b * h, C=C, b=b)


def ramp(t, eta, C):
    """One-sided quadratic ramp: C/eta * ((t - eta)/eta)^2 for t < eta, else 0.

    Peaks at t = 0 with value C/eta and decays to zero at t = eta.  ``t`` may
    be an array; ``eta = 0`` gives identically zero.
    """
    t = np.asarray(t, dtype=float)
    if eta == 0.0:
        return np.zeros_like(t)
    u = (np.minimum(t, eta) - eta) / eta
    return (C / eta) * u * u


def sigma_profile(t, cfg, kind="two-sided"):
    """Damping profile on the unit interval.

    ``kind="two-sided"`` ramps up near both t = 0 and t = 1; ``"one-sided"``
    ramps only near t = 0 (used along an axis whose far end is a plain
    Dirichlet wall).  Raises for t outside [0, 1].
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError("profile coordinate outside [0, 1]")
    out = ramp(t, cfg.eta, cfg.C)
    if kind == "two-sided":
        out = out + ramp(1.0 - t, cfg.eta, cfg.C)
    elif kind != "one-sided":
        raise ValueError(f"unknown profile kind {kind!r}")
    return out if out.ndim else float(out)


def stretch_factor(sigma_val, omega_eff):
    """Coordinate stretch ``1 / (1 + i sigma / omega_eff)``.

    ``omega_eff`` is the (possibly complex-shifted) frequency used throughout
    one assembly; it must be nonzero.
    """
    if omega_eff == 0:
        raise ValueError("omega_eff must be nonzero")
    return 1.0 / (1.0 + 1j * np.asarray(sigma_val) / omega_eff)
