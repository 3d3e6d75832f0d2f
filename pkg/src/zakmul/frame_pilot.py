"""Embedded pilot/data frames and pilot-based channel estimation.

The DD frame carries a single strong pilot inside a delay strip of
pilot-region bins, flanked by guard strips, with data elsewhere.  At the
receiver the effective channel taps are read off the pilot region after
removing the known pilot phase, and the pilot's reconstructed
contribution is subtracted before equalizing the data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dd_core import DDGridSignal, DDTapSet, qp_access
from .lattice import UserAllocation


@dataclass(frozen=True)
class FrameLayout:
    """Pilot, guard and data region masks over the M x N grid.

    Delay columns (mod M), all Doppler rows:
      pilot strip  P : [k_p - a1, k_p + k_max + a2]
      lower guard G1 : [k_p - a1 - k_max - g1, k_p - a1 - 1]
      upper guard G2 : [k_p + k_max + a2 + 1, k_p + k_max + a2 + g2]
      data        D  : everything else
    The lower guard is k_max wider than the upper one because the channel
    spreads data upward in delay by up to k_max bins.
    """

    M: int
    N: int
    k_p: int
    l_p: int
    k_max: int
    a1: int
    a2: int
    g1: int
    g2: int

    def __post_init__(self):
        n_strip = (self.a1 + self.k_max + self.a2 + 1) \
            + (self.k_max + self.g1) + self.g2
        if n_strip >= self.M:
            raise ValueError(f"pilot+guard strips ({n_strip} cols) must be < M={self.M}")

    def _delay_cols(self, lo: int, hi: int) -> np.ndarray:
        return np.mod(np.arange(lo, hi + 1), self.M)

    def pilot_cols(self) -> np.ndarray:
        return self._delay_cols(self.k_p - self.a1, self.k_p + self.k_max + self.a2)

    def mask_P(self) -> np.ndarray:
        m = np.zeros((self.M, self.N), dtype=bool)
        m[self.pilot_cols(), :] = True
        return m

    def mask_G1(self) -> np.ndarray:
        m = np.zeros((self.M, self.N), dtype=bool)
        cols = self._delay_cols(self.k_p - self.a1 - self.k_max - self.g1,
                                self.k_p - self.a1 - 1)
        m[cols, :] = True
        return m

    def mask_G2(self) -> np.ndarray:
        m = np.zeros((self.M, self.N), dtype=bool)
        cols = self._delay_cols(self.k_p + self.k_max + self.a2 + 1,
                                self.k_p + self.k_max + self.a2 + self.g2)
        m[cols, :] = True
        return m

    def mask_D(self) -> np.ndarray:
        return ~(self.mask_P() | self.mask_G1() | self.mask_G2())

    def data_positions(self) -> np.ndarray:
        """(n_data, 2) array of (k, l) data bins in fixed scan order."""
        return np.argwhere(self.mask_D())

    @property
    def n_data(self) -> int:
        return int(self.mask_D().sum())


def build_layout(u: UserAllocation, tau_max: float, a1: int, a2: int,
                 g1: int, g2: int, pilot_loc: tuple[int, int] | None = None) -> FrameLayout:
    """Layout with k_max = ceil(B tau_max); pilot defaults to the grid center."""
    k_max = int(np.ceil(u.B * tau_max - 1e-9))
    if pilot_loc is None:
        pilot_loc = (int(np.ceil(u.M / 2)), int(np.ceil(u.N / 2)))
    return FrameLayout(M=u.M, N=u.N, k_p=pilot_loc[0] % u.M, l_p=pilot_loc[1] % u.N,
                       k_max=k_max, a1=a1, a2=a2, g1=g1, g2=g2)


# ---- 4-QAM mapping ---------------------------------------------------------

def qam4_map(bits: np.ndarray) -> np.ndarray:
    """Gray-mapped 4-QAM with unit average energy; bits shape (n, 2)."""
    b = np.asarray(bits).reshape(-1, 2)
    return ((1.0 - 2.0 * b[:, 0]) + 1j * (1.0 - 2.0 * b[:, 1])) / np.sqrt(2.0)


def qam4_demap(symbols: np.ndarray) -> np.ndarray:
    """Nearest-neighbor decisions; points on a boundary demap to bit 0."""
    s = np.asarray(symbols).ravel()
    bits = np.empty((s.size, 2), dtype=np.int8)
    bits[:, 0] = (s.real < 0).astype(np.int8)
    bits[:, 1] = (s.imag < 0).astype(np.int8)
    return bits


@dataclass
class FrameSymbols:
    """A mapped DD frame: sqrt(E_d/|D|)-scaled data, sqrt(E_p) pilot, zero guards."""

    x: DDGridSignal
    E_d: float
    E_p: float
    data_bits: np.ndarray


def map_frame(layout: FrameLayout, bits: np.ndarray, E_d: float, E_p: float) -> FrameSymbols:
    """Gray 4-QAM data frame with the embedded pilot."""
    bits = np.asarray(bits).reshape(-1, 2)
    if bits.shape[0] != layout.n_data:
        raise ValueError(f"need {layout.n_data} symbols worth of bits, got {bits.shape[0]}")
    x = np.zeros((layout.M, layout.N), dtype=complex)
    pos = layout.data_positions()
    x[pos[:, 0], pos[:, 1]] = np.sqrt(E_d / layout.n_data) * qam4_map(bits)
    x[layout.k_p, layout.l_p] = np.sqrt(E_p)
    return FrameSymbols(x=DDGridSignal(layout.M, layout.N, x),
                        E_d=E_d, E_p=E_p, data_bits=bits)


def pilot_grid(layout: FrameLayout, E_p: float) -> DDGridSignal:
    """Pilot-only frame (for reconstructing the received pilot)."""
    x = np.zeros((layout.M, layout.N), dtype=complex)
    x[layout.k_p, layout.l_p] = np.sqrt(E_p)
    return DDGridSignal(layout.M, layout.N, x)


def estimate_taps(y: DDGridSignal, layout: FrameLayout, E_p: float) -> DDTapSet:
    """Read the effective channel taps off the pilot region.

    hhat[kappa, lam] = y[k_p+kappa, l_p+lam] e^{-j2pi k_p lam/(MN)} / sqrt(E_p)
    for kappa in the pilot strip and lam spanning the full Doppler strip
    (centered mod N); indices wrap quasi-periodically.  Data leakage,
    replica aliasing and noise contaminate the estimate by design.
    """
    M, N = layout.M, layout.N
    kappa = np.arange(-layout.a1, layout.k_max + layout.a2 + 1)
    lam = np.arange(N) - (N // 2)
    kk = layout.k_p + kappa[:, None]
    ll = layout.l_p + lam[None, :]
    vals = qp_access(y, kk, ll)
    phase = np.exp(-2j * np.pi * layout.k_p * lam[None, :] / (M * N))
    taps = vals * phase / np.sqrt(E_p)
    return DDTapSet(k_min=int(kappa[0]), l_min=int(lam[0]), taps=taps)
