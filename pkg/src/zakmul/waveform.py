"""Oversampled time-domain engine: carrier synthesis, channel, matched sampling.

This is the simulator's physical-layer ground truth.  Transmit signals
are synthesized as pulsone superpositions

    psi^{k,l}(t) = sum_n  sqrt(tau_p) e^{j2pi n l/N} W_T(t_nk - tau_s)
                   * w_B(t - t_nk) e^{j2pi nu_s (t - t_nk)},
    t_nk = (n M + k) / B,

the doubly-spread channel acts per path as a windowed-sinc fractional
delay plus a Doppler tone, and the receiver projects onto the noiseless
matched carriers of the wanted user (equivalent to DD matched filtering
followed by lattice sampling).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization
from .dd_core import DDGridSignal, TDSignal
from .filters import FactorizedDDFilter
from .lattice import UserAllocation


@dataclass(frozen=True)
class OracleConfig:
    """Time-domain engine settings.

    oversampling is the number of samples per 1/B_sys; time_pad extends
    the simulation span beyond the system frame on both sides (must
    cover the filter tails); truncation_lobes truncates each pulse
    segment to +-truncation_lobes main lobes.
    """

    oversampling: int = 8
    time_pad: float = 100e-6
    truncation_lobes: int = 20
    interp_halfwidth: int = 48   # samples, windowed-sinc fractional delay

    def __post_init__(self):
        if self.oversampling < 1:
            raise ValueError("oversampling must be >= 1")


class _SegmentCache:
    """Sampled w_B(t) e^{j2pi nu_shift t} segments, keyed by sub-sample offset.

    segment(frac)[m] = w~_B((m - frac) / fs) for m in [-half, half]; a
    pulse at continuous position pos is placed at sample round((pos-t0)fs)
    with frac the residual offset, so off-grid instants are exact.
    """

    def __init__(self, f: FactorizedDDFilter, fs: float, lobes: int):
        self.f = f
        self.fs = fs
        self.half = int(np.ceil(lobes * fs / f.B))
        self._cache: dict[int, np.ndarray] = {}

    def segment(self, frac: float) -> np.ndarray:
        key = int(round(frac * 1e6))
        seg = self._cache.get(key)
        if seg is None:
            m = np.arange(-self.half, self.half + 1)
            seg = self.f.eval_wB((m - frac) / self.fs)
            self._cache[key] = seg
        return seg

    def locate(self, pos: float, t0: float) -> tuple[int, float]:
        idx = (pos - t0) * self.fs
        i_near = int(round(idx))
        return i_near, idx - i_near


def _pulsone_times(u: UserAllocation, f: FactorizedDDFilter, k: int):
    """Pulse-train instants t_nk = (n M + k)/B inside the time window, with n."""
    hw = f.time_window_halfwidth()
    t_lo = f.tau_shift - hw - u.tau_p
    t_hi = f.tau_shift + hw + u.tau_p
    n_lo = int(np.floor((t_lo * u.B - k) / u.M))
    n_hi = int(np.ceil((t_hi * u.B - k) / u.M))
    n = np.arange(n_lo, n_hi + 1)
    t = (n * u.M + k) / u.B
    w = f.eval_WT(t)
    keep = w != 0
    return n[keep], t[keep], w[keep]


def synth_carrier(u: UserAllocation, f: FactorizedDDFilter, k: int, l: int,
                  cfg: OracleConfig, system_B: float,
                  span: tuple[float, float]) -> TDSignal:
    """Synthesize the DD carrier psi^{k,l} on [span[0]-pad, span[1]+pad)."""
    x = DDGridSignal.zeros(u.M, u.N)
    x.values[k % u.M, l % u.N] = 1.0
    return synth_frame(u, f, x, cfg, system_B, span)


def synth_frame(u: UserAllocation, f: FactorizedDDFilter, x: DDGridSignal,
                cfg: OracleConfig, system_B: float,
                span: tuple[float, float]) -> TDSignal:
    """Superpose all carriers of a DD frame: time-windowed pulse train
    convolved with the (tone-modulated) delay pulse."""
    fs = cfg.oversampling * system_B
    t0 = span[0] - cfg.time_pad
    n_samp = int(round((span[1] + cfg.time_pad - t0) * fs))
    out = np.zeros(n_samp, dtype=complex)
    cache = _SegmentCache(f, fs, cfg.truncation_lobes)
    # c[k, n] = sum_l x[k, l] e^{j2pi n l / N}, periodic in n with period N
    c = u.N * np.fft.ifft(x.values, axis=1)   # (M, N), index [k, n mod N]
    root = np.sqrt(u.tau_p)
    for k in range(u.M):
        if not np.any(x.values[k]):
            continue
        nn, tt, ww = _pulsone_times(u, f, k)
        amps = root * c[k, np.mod(nn, u.N)] * ww
        for t_nk, a in zip(tt, amps):
            if a == 0:
                continue
            i_near, frac = cache.locate(t_nk, t0)
            seg = cache.segment(frac)
            i0 = i_near - cache.half
            lo = max(i0, 0)
            hi = min(i0 + seg.size, out.size)
            if hi > lo:
                out[lo:hi] += a * seg[lo - i0:hi - i0]
    return TDSignal(sample_rate=fs, t0=t0, samples=out)


def _frac_delay_kernel(delay_samples: float, halfwidth: int) -> tuple[np.ndarray, int]:
    """Windowed-sinc fractional-delay FIR; returns (taps, integer part).

    The Kaiser window is centered on the fractional pulse position, not
    the integer grid, to keep the interpolator's passband flat.
    """
    d_int = int(np.floor(delay_samples))
    frac = delay_samples - d_int
    m = np.arange(-halfwidth, halfwidth + 1)
    beta = 8.6
    x = (m - frac) / (halfwidth + 0.5)
    win = np.where(np.abs(x) < 1.0,
                   np.i0(beta * np.sqrt(np.maximum(1.0 - x * x, 0.0))) / np.i0(beta),
                   0.0)
    taps = np.sinc(m - frac) * win
    return taps, d_int


def apply_channel(x: TDSignal, c: ChannelRealization,
                  cfg: OracleConfig | None = None) -> TDSignal:
    """y(t) = sum_i h_i x(t - tau_i) e^{j2pi nu_i (t - tau_i)} on x's grid."""
    halfwidth = cfg.interp_halfwidth if cfg is not None else 48
    fs = x.sample_rate
    t = x.times()
    out = np.zeros_like(x.samples)
    from scipy.signal import fftconvolve
    for h_i, tau_i, nu_i in zip(c.gains, c.delays, c.dopplers):
        if h_i == 0:
            continue
        d = tau_i * fs
        if abs(d - round(d)) < 1e-9:
            shift = int(round(d))
            delayed = np.zeros_like(x.samples)
            if shift >= 0:
                delayed[shift:] = x.samples[:x.samples.size - shift]
            else:
                delayed[:shift] = x.samples[-shift:]
        else:
            taps, d_int = _frac_delay_kernel(d, halfwidth)
            full = fftconvolve(x.samples, taps, mode="full")
            # delayed[i] = full[halfwidth - d_int + i]
            delayed = np.zeros_like(x.samples)
            start = halfwidth - d_int
            lo = max(0, -start)
            hi = min(x.samples.size, full.size - start)
            if hi > lo:
                delayed[lo:hi] = full[start + lo:start + hi]
        out += h_i * delayed * np.exp(2j * np.pi * nu_i * (t - tau_i))
    return TDSignal(sample_rate=fs, t0=x.t0, samples=out)


def add_awgn(x: TDSignal, N0: float, rng: np.random.Generator) -> TDSignal:
    """Complex AWGN with PSD N0: per-sample variance N0 * sample_rate."""
    if N0 == 0:
        return TDSignal(x.sample_rate, x.t0, x.samples.copy())
    sigma = np.sqrt(N0 * x.sample_rate / 2.0)
    n = sigma * (rng.standard_normal(x.samples.size)
                 + 1j * rng.standard_normal(x.samples.size))
    return TDSignal(x.sample_rate, x.t0, x.samples + n)


def rx_sample(y: TDSignal, u: UserAllocation, f: FactorizedDDFilter,
              cfg: OracleConfig) -> DDGridSignal:
    """Matched-filter y for user (u, f) and sample on the fundamental lattice.

    Implemented as the projection of y onto the noiseless matched
    carriers: y_dd[k', l'] = <y, psi^{k',l'}>.
    """
    fs = y.sample_rate
    dt = 1.0 / fs
    cache = _SegmentCache(f, fs, cfg.truncation_lobes)
    out = np.zeros((u.M, u.N), dtype=complex)
    root = np.sqrt(u.tau_p)
    for k in range(u.M):
        nn, tt, ww = _pulsone_times(u, f, k)
        g = np.empty(tt.size, dtype=complex)
        for i, t_nk in enumerate(tt):
            i_near, frac = cache.locate(t_nk, y.t0)
            seg = cache.segment(frac)
            i0 = i_near - cache.half
            lo = max(i0, 0)
            hi = min(i0 + seg.size, y.samples.size)
            if hi <= lo:
                g[i] = 0.0
                continue
            g[i] = np.dot(y.samples[lo:hi], np.conj(seg[lo - i0:hi - i0])) * dt
        coeff = root * np.conj(ww) * g
        phases = np.exp(-2j * np.pi * np.outer(nn, np.arange(u.N)) / u.N)
        out[k, :] = coeff @ phases
    return DDGridSignal(u.M, u.N, out)


# ---- simple binary dump of TD signals -------------------------------------

_MAGIC = b"ZMTD"


def dump_td(sig: TDSignal, path: str) -> None:
    """Write magic, sample_rate (f64), t0 (f64), count (u64), float32 re/im pairs."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<ddQ", sig.sample_rate, sig.t0, sig.samples.size))
        inter = np.empty(2 * sig.samples.size, dtype=np.float32)
        inter[0::2] = sig.samples.real
        inter[1::2] = sig.samples.imag
        fh.write(inter.tobytes())


def load_td(path: str) -> TDSignal:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not a TD dump file")
        fs, t0, count = struct.unpack("<ddQ", fh.read(24))
        inter = np.frombuffer(fh.read(8 * count), dtype=np.float32)
        return TDSignal(fs, t0, inter[0::2] + 1j * inter[1::2])
