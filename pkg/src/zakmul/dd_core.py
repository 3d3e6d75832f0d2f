"""Quasi-periodic DD grid signals, discrete twisted convolution, Zak transforms.

A DDGridSignal stores one fundamental period of an M x N quasi-periodic
DD signal; the extension rule

    x[k + nM, l + mN] = exp(j2pi n l / N) x[k, l]

is implemented by the accessor.  The discrete twisted convolution of a
finite tap set with a quasi-periodic signal is the per-user I/O relation
of the simulator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import UserAllocation


@dataclass
class DDGridSignal:
    """One fundamental M x N period of a quasi-periodic DD signal."""

    M: int
    N: int
    values: np.ndarray   # complex, shape (M, N), indexed [k, l]

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.M, self.N):
            raise ValueError(f"values shape {v.shape} != ({self.M}, {self.N})")
        self.values = v

    @classmethod
    def zeros(cls, M: int, N: int) -> "DDGridSignal":
        return cls(M, N, np.zeros((M, N), dtype=complex))

    @classmethod
    def delta(cls, M: int, N: int, k: int = 0, l: int = 0) -> "DDGridSignal":
        v = np.zeros((M, N), dtype=complex)
        v[k % M, l % N] = 1.0
        return cls(M, N, v)

    def energy(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2))


def qp_access(x: DDGridSignal, k, l):
    """Quasi-periodic extension: x[k, l] for any integer indices.

    Returns exp(j2pi floor(k/M) l / N) * values[k mod M, l mod N].
    Accepts scalar or array indices (broadcast together).
    """
    k = np.asarray(k)
    l = np.asarray(l)
    n = np.floor_divide(k, x.M)
    phase = np.exp(2j * np.pi * n * l / x.N)
    return phase * x.values[np.mod(k, x.M), np.mod(l, x.N)]


@dataclass
class DDTapSet:
    """Finite-support filter taps on the integer DD grid (not quasi-periodic).

    Stored densely over the bounding box [k_min, k_max] x [l_min, l_max];
    taps[i, j] is the tap at (k_min + i, l_min + j).
    """

    k_min: int
    l_min: int
    taps: np.ndarray   # complex, shape (K, L)

    def __post_init__(self):
        t = np.asarray(self.taps, dtype=complex)
        if t.ndim != 2:
            raise ValueError("taps must be 2-D")
        self.taps = t

    @classmethod
    def from_dict(cls, d: dict[tuple[int, int], complex]) -> "DDTapSet":
        ks = [k for k, _ in d]
        ls = [l for _, l in d]
        k0, k1 = min(ks), max(ks)
        l0, l1 = min(ls), max(ls)
        taps = np.zeros((k1 - k0 + 1, l1 - l0 + 1), dtype=complex)
        for (k, l), v in d.items():
            taps[k - k0, l - l0] = v
        return cls(k_min=k0, l_min=l0, taps=taps)

    @property
    def k_max(self) -> int:
        return self.k_min + self.taps.shape[0] - 1

    @property
    def l_max(self) -> int:
        return self.l_min + self.taps.shape[1] - 1

    def indices(self) -> tuple[np.ndarray, np.ndarray]:
        """Meshgrid of (k, l) integer indices covering the box."""
        kk = np.arange(self.k_min, self.k_max + 1)
        ll = np.arange(self.l_min, self.l_max + 1)
        return np.meshgrid(kk, ll, indexing="ij")

    def energy(self) -> float:
        return float(np.sum(np.abs(self.taps) ** 2))

    def pruned(self, floor_rel: float = 1e-7) -> "DDTapSet":
        """Shrink the bounding box, dropping rows/cols below floor_rel*max|tap|."""
        mag = np.abs(self.taps)
        thr = floor_rel * mag.max() if mag.size else 0.0
        keep_k = np.nonzero(mag.max(axis=1) >= thr)[0]
        keep_l = np.nonzero(mag.max(axis=0) >= thr)[0]
        if keep_k.size == 0 or keep_l.size == 0:
            return DDTapSet(self.k_min, self.l_min, self.taps[:1, :1] * 0)
        sl = (slice(keep_k[0], keep_k[-1] + 1), slice(keep_l[0], keep_l[-1] + 1))
        return DDTapSet(self.k_min + keep_k[0], self.l_min + keep_l[0], self.taps[sl])


def twisted_conv_discrete(h: DDTapSet, x: DDGridSignal) -> DDGridSignal:
    """Discrete twisted convolution of taps with a quasi-periodic signal.

    y[k', l'] = sum_{k,l} h[k,l] x_qp[k'-k, l'-l] exp(j 2pi l (k'-k) / (M N))

    evaluated on the fundamental grid; the output is quasi-periodic with
    the same (M, N).
    """
    M, N = x.M, x.N
    kp = np.arange(M)[:, None]
    lp = np.arange(N)[None, :]
    y = np.zeros((M, N), dtype=complex)
    for i in range(h.taps.shape[0]):
        k = h.k_min + i
        row = h.taps[i]
        nz = np.nonzero(row)[0]
        if nz.size == 0:
            continue
        for j in nz:
            l = h.l_min + j
            y += row[j] * qp_access(x, kp - k, lp - l) \
                * np.exp(2j * np.pi * l * (kp - k) / (M * N))
    return DDGridSignal(M, N, y)


def tapset_twisted_conv(h1: DDTapSet, h2: DDTapSet, MN: int) -> DDTapSet:
    """Twisted convolution of two integer-grid tap sets on a lattice with M*N = MN.

    (h1 * h2)[k, l] = sum h1[k',l'] h2[k-k', l-l'] exp(j 2pi l' (k-k') / MN)
    """
    k0 = h1.k_min + h2.k_min
    l0 = h1.l_min + h2.l_min
    K = h1.taps.shape[0] + h2.taps.shape[0] - 1
    L = h1.taps.shape[1] + h2.taps.shape[1] - 1
    out = np.zeros((K, L), dtype=complex)
    k2 = np.arange(h2.k_min, h2.k_max + 1)
    for i in range(h1.taps.shape[0]):
        kp = h1.k_min + i
        for j in range(h1.taps.shape[1]):
            v = h1.taps[i, j]
            if v == 0:
                continue
            lp = h1.l_min + j
            phase = np.exp(2j * np.pi * lp * k2 / MN)[:, None]
            out[i:i + h2.taps.shape[0], j:j + h2.taps.shape[1]] += v * h2.taps * phase
    return DDTapSet(k0, l0, out)


@dataclass
class TDSignal:
    """Uniformly sampled complex baseband signal."""

    sample_rate: float   # Hz
    t0: float            # s, time of first sample
    samples: np.ndarray

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        self.samples = np.asarray(self.samples, dtype=complex)

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.samples.size) / self.sample_rate

    def energy(self) -> float:
        """Continuous-time energy estimate sum |x|^2 dt."""
        return float(np.sum(np.abs(self.samples) ** 2) / self.sample_rate)


def zak_transform(x: TDSignal, u: UserAllocation, k_sub: int, l_sub: int) -> complex:
    """Discretized Zak transform at the lattice point (k_sub tau_p/M, l_sub nu_p/N).

    Z(tau, nu) = sqrt(tau_p) sum_n x(tau + n tau_p) exp(-j2pi n nu tau_p),
    with the sum truncated to the signal's span.  tau must fall on a
    sample instant (within half a sample).
    """
    tau = k_sub * u.tau_p / u.M
    fs = x.sample_rate
    # earliest/latest period index with tau + n*tau_p inside the span
    n_lo = int(np.ceil((x.t0 - tau) * fs / (u.tau_p * fs) - 1e-9))
    t_end = x.t0 + (x.samples.size - 1) / fs
    n_hi = int(np.floor((t_end - tau) / u.tau_p + 1e-9))
    if n_hi < n_lo:
        return 0.0 + 0j
    n = np.arange(n_lo, n_hi + 1)
    t = tau + n * u.tau_p
    idx_f = (t - x.t0) * fs
    idx = np.rint(idx_f).astype(int)
    # reading a misaligned sample silently corrupts the transform, so the
    # alignment tolerance is strict (well below half a sample)
    if np.any(np.abs(idx_f - idx) > 1e-3):
        raise ValueError("tau does not fall on a sample instant")
    ok = (idx >= 0) & (idx < x.samples.size)
    vals = x.samples[idx[ok]]
    phase = np.exp(-2j * np.pi * n[ok] * l_sub / u.N)
    return complex(np.sqrt(u.tau_p) * np.sum(vals * phase))


def zak_grid(x: TDSignal, u: UserAllocation) -> DDGridSignal:
    """Zak transform sampled on the full fundamental lattice."""
    v = np.empty((u.M, u.N), dtype=complex)
    for k in range(u.M):
        for l in range(u.N):
            v[k, l] = zak_transform(x, u, k, l)
    return DDGridSignal(u.M, u.N, v)


def inverse_zak(x_dd: DDGridSignal, u: UserAllocation, sample_rate: float,
                span: float) -> TDSignal:
    """Dirac-pulsone superposition of a DD grid signal, sampled on [0, span).

    Each lattice pulse phi^{k,l} contributes impulses at t = n tau_p +
    k tau_p / M with phases exp(j2pi n l / N).  Impulses are single-sample
    spikes scaled so that zak_transform over the same span inverts this
    map exactly; for that, span must cover an integer number of frame
    durations T (i.e. a multiple of N delay periods).
    """
    fs = sample_rate
    if abs(fs / u.B - round(fs / u.B)) > 1e-9:
        raise ValueError("sample_rate must be an integer multiple of B")
    n_periods = int(round(span / u.tau_p))
    if abs(span - n_periods * u.tau_p) > 0.5 / fs:
        raise ValueError("span must be an integer number of delay periods")
    n_samples = int(round(span * fs))
    out = np.zeros(n_samples, dtype=complex)
    # c[k, n] = sum_l x[k, l] exp(j2pi n l / N), N-periodic in n
    n_idx = np.arange(n_periods)
    phases = np.exp(2j * np.pi * np.outer(n_idx % u.N, np.arange(u.N)) / u.N)
    c = phases @ x_dd.values.T   # (n_periods, M)
    step = int(round(fs / u.B))
    scale = 1.0 / (np.sqrt(u.tau_p) * n_periods)
    for n in range(n_periods):
        base = n * u.M * step
        idx = base + np.arange(u.M) * step
        out[idx] += scale * c[n]
    return TDSignal(sample_rate=fs, t0=0.0, samples=out)
