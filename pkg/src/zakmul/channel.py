"""Doubly-spread channel realizations (Vehicular-A profile).

A realization is a finite set of paths (gain, delay, Doppler).  Path
gains are complex Gaussian with per-path variances from the power-delay
profile, normalized so E[sum |h_i|^2] = 1; Dopplers are nu_max*cos(theta)
with theta uniform on [0, 2pi).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# ITU Vehicular-A power-delay profile.
VEH_A_DELAYS_S = np.array([0.0, 0.31, 0.71, 1.09, 1.73, 2.51]) * 1e-6
VEH_A_POWERS_DB = np.array([0.0, -1.0, -9.0, -10.0, -15.0, -20.0])


@dataclass(frozen=True)
class PathProfile:
    """Delays (s, ascending, first = 0-relative reference) and relative powers (dB)."""

    delays: np.ndarray
    relative_powers_db: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.delays, dtype=float)
        p = np.asarray(self.relative_powers_db, dtype=float)
        if d.shape != p.shape or d.ndim != 1:
            raise ValueError("delays and powers must be 1-D arrays of equal length")
        if np.any(d < 0) or np.any(np.diff(d) < 0):
            raise ValueError("delays must be non-negative and ascending")
        if p[0] != 0.0:
            raise ValueError("first relative power must be 0 dB")
        object.__setattr__(self, "delays", d)
        object.__setattr__(self, "relative_powers_db", p)

    def sigma2(self) -> np.ndarray:
        """Per-path gain variances, normalized to sum to 1."""
        w = 10.0 ** (self.relative_powers_db / 10.0)
        return w / w.sum()


VEH_A = PathProfile(VEH_A_DELAYS_S, VEH_A_POWERS_DB)


@dataclass(frozen=True)
class ChannelRealization:
    """P paths: complex gains, delays (s), Dopplers (Hz)."""

    gains: np.ndarray
    delays: np.ndarray
    dopplers: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gains, dtype=complex)
        d = np.asarray(self.delays, dtype=float)
        v = np.asarray(self.dopplers, dtype=float)
        if not (g.shape == d.shape == v.shape) or g.ndim != 1:
            raise ValueError("gains/delays/dopplers must be 1-D arrays of equal length")
        object.__setattr__(self, "gains", g)
        object.__setattr__(self, "delays", d)
        object.__setattr__(self, "dopplers", v)

    @property
    def n_paths(self) -> int:
        return self.gains.size


def draw_profile(rng: np.random.Generator, profile: PathProfile, nu_max: float) -> ChannelRealization:
    """Draw a realization for an arbitrary power-delay profile."""
    if nu_max < 0:
        raise ValueError("nu_max must be non-negative")
    sigma2 = profile.sigma2()
    g = rng.standard_normal(sigma2.size) + 1j * rng.standard_normal(sigma2.size)
    gains = np.sqrt(sigma2 / 2.0) * g
    theta = rng.uniform(0.0, 2.0 * np.pi, size=sigma2.size)
    dopplers = nu_max * np.cos(theta)
    return ChannelRealization(gains=gains, delays=profile.delays.copy(), dopplers=dopplers)


def draw_veh_a(rng: np.random.Generator, nu_max: float) -> ChannelRealization:
    """Six-path Veh-A draw; deterministic given the generator state."""
    return draw_profile(rng, VEH_A, nu_max)


def ideal_channel() -> ChannelRealization:
    """Single unit-gain path with zero delay and Doppler."""
    return ChannelRealization(gains=np.array([1.0 + 0j]),
                              delays=np.array([0.0]),
                              dopplers=np.array([0.0]))


def spread_bounds(c: ChannelRealization) -> tuple[float, float]:
    """(tau_max, nu_max) = max delay and max |Doppler| over paths."""
    return float(np.max(c.delays)), float(np.max(np.abs(c.dopplers)))
