"""Effective continuous DD channel between a transmit/receive filter pair.

The cascade receive-filter * physical-channel * transmit-filter reduces,
for factorized filters, to a per-path product of a delay cross-ambiguity
zeta_i(tau) and a Doppler cross-ambiguity eta_i(tau, nu):

    h_eff(tau, nu) = sum_i h_i  e^{j2pi nu_s (tau - tau_i)}
                             e^{j2pi nu_i (tau + tau_s - tau_i)}
                             e^{-j2pi nu tau_s}  zeta_i(tau) eta_i(tau, nu)

with, writing Dnu = nu_q - nu_s - nu_i and Dtau = tau - (tau_q - tau_s),

    zeta_i(tau)    = int W_Bq(f - Dnu) W_Bs(f) e^{j2pi f (tau - tau_i)} df
    eta_i(tau, nu) = int W_Tq(t + Dtau) W_Ts(t) e^{-j2pi t (nu - nu_i)} dt

where W_B / W_T are the unshifted band/time windows of the two filters.
For sinc filters both integrals are window-overlap closed forms; for RRC
they are evaluated by panel-wise Gauss-Legendre quadrature with panels
aligned to the window kinks.

Sampling h_eff on the receiver lattice gives the discrete taps that
drive the simulator's I/O relation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .channel import ChannelRealization, spread_bounds
from .dd_core import DDTapSet
from .filters import FactorizedDDFilter
from .lattice import UserAllocation


@lru_cache(maxsize=8)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def _overlap(lo1, hi1, lo2, hi2):
    """Width and center of the intersection of [lo1,hi1) and [lo2,hi2)."""
    lo = np.maximum(lo1, lo2)
    hi = np.minimum(hi1, hi2)
    w = np.maximum(hi - lo, 0.0)
    c = 0.5 * (lo + hi)
    return w, np.where(w > 0, c, 0.0)


def _panel_nodes(breaks: np.ndarray, osc: float, per_cycle: int = 16,
                 min_nodes: int = 16) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes/weights on panels split at `breaks`.

    Panels wider than ~1.5 oscillation cycles of exp(j2pi osc x) are
    subdivided; each sub-panel gets a 16-point rule.
    """
    xs, ws = [], []
    gx, gw = _leggauss(16)
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b - a <= 0:
            continue
        n_sub = max(1, int(math.ceil((b - a) * max(osc, 1e-30) / 1.5)))
        edges = np.linspace(a, b, n_sub + 1)
        for lo, hi in zip(edges[:-1], edges[1:]):
            h = 0.5 * (hi - lo)
            xs.append(lo + h + h * gx)
            ws.append(h * gw)
    if not xs:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(xs), np.concatenate(ws)


def _window_breaks(center: float, halfwidth_in: float, halfwidth_out: float):
    """Kink positions of an RC-shaped window centered at `center`."""
    return np.array([center - halfwidth_out, center - halfwidth_in,
                     center + halfwidth_in, center + halfwidth_out])


class EffectiveChannel:
    """Evaluator for h_eff between transmit user s and receive user q."""

    def __init__(self, q_filter: FactorizedDDFilter, s_filter: FactorizedDDFilter,
                 chan: ChannelRealization):
        self.fq = q_filter
        self.fs = s_filter
        self.chan = chan

    # ---- per-path delay factor -------------------------------------------

    def zeta(self, i: int, tau):
        """Delay cross-ambiguity of path i at delays tau (array ok)."""
        return self._zeta(float(self.chan.delays[i]), float(self.chan.dopplers[i]), tau)

    def _zeta(self, tau_i: float, nu_i: float, tau):
        fq, fs = self.fq, self.fs
        dnu = fq.nu_shift - fs.nu_shift - nu_i
        u = np.asarray(tau, dtype=float) - tau_i
        if fq.kind == "sinc" and fs.kind == "sinc":
            w, c = _overlap(dnu - fq.B / 2, dnu + fq.B / 2, -fs.B / 2, fs.B / 2)
            return (w * np.sinc(w * u) * np.exp(2j * np.pi * c * u)
                    / np.sqrt(fq.B * fs.B))
        # RRC: Fourier transform of the spectral-overlap product
        bq = _window_breaks(dnu, (1 - fq.beta_tau) * fq.B / 2, (1 + fq.beta_tau) * fq.B / 2)
        bs = _window_breaks(0.0, (1 - fs.beta_tau) * fs.B / 2, (1 + fs.beta_tau) * fs.B / 2)
        lo = max(bq[0], bs[0])
        hi = min(bq[-1], bs[-1])
        if hi <= lo:
            return np.zeros_like(u, dtype=complex)
        from .filters import rrc_spectrum
        umax = float(np.max(np.abs(u))) if u.size else 0.0
        du = np.diff(u.ravel())
        if u.size > 256 and du.size and du[0] > 0 \
                and np.allclose(du, du[0], rtol=0, atol=1e-15):
            # uniform ascending target grid: the transform of the smooth
            # compact integrand is an oversampled inverse FFT
            step = float(du[0])
            nfft = 1 << int(np.ceil(np.log2(max(
                4 * u.size, 32.0 / max((hi - lo) * step, 1e-12), 1024))))
            df = 1.0 / (nfft * step)
            m = np.arange(int(np.ceil(lo / df)), int(np.floor(hi / df)) + 1)
            f = m * df
            vals = (rrc_spectrum((f - dnu) / fq.B, fq.beta_tau)
                    * rrc_spectrum(f / fs.B, fs.beta_tau) * df / np.sqrt(fq.B * fs.B))
            u0 = float(u.ravel()[0])
            X = np.zeros(nfft, dtype=complex)
            np.add.at(X, np.mod(m, nfft), vals * np.exp(2j * np.pi * f * u0))
            z = nfft * np.fft.ifft(X)
            return z[:u.size].reshape(u.shape)
        breaks = np.unique(np.clip(np.concatenate([bq, bs]), lo, hi))
        f, w = _panel_nodes(breaks, osc=umax)
        vals = (rrc_spectrum((f - dnu) / fq.B, fq.beta_tau)
                * rrc_spectrum(f / fs.B, fs.beta_tau) * w / np.sqrt(fq.B * fs.B))
        return np.exp(2j * np.pi * np.multiply.outer(u, f)) @ vals

    # ---- per-path Doppler factor -----------------------------------------

    def eta(self, i: int, tau, nu):
        """Doppler cross-ambiguity of path i at (tau, nu) (broadcast arrays ok)."""
        return self._eta(float(self.chan.dopplers[i]), tau, nu)

    def _eta(self, nu_i: float, tau, nu):
        fq, fs = self.fq, self.fs
        dtau = np.asarray(tau, dtype=float) - (fq.tau_shift - fs.tau_shift)
        v = np.asarray(nu, dtype=float) - nu_i
        if fq.kind == "sinc" and fs.kind == "sinc":
            w, c = _overlap(-dtau - fq.T / 2, -dtau + fq.T / 2, -fs.T / 2, fs.T / 2)
            return (w * np.sinc(w * v) * np.exp(-2j * np.pi * c * v)
                    / np.sqrt(fq.T * fs.T))
        dtau_b, v_b = np.broadcast_arrays(dtau, v)
        out = np.zeros(dtau_b.shape, dtype=complex)
        vmax = float(np.max(np.abs(v_b))) if v_b.size else 0.0
        from .filters import rrc_spectrum
        for idx in np.ndindex(dtau_b.shape):
            d = dtau_b[idx]
            bq = _window_breaks(-d, (1 - fq.beta_nu) * fq.T / 2, (1 + fq.beta_nu) * fq.T / 2)
            bs = _window_breaks(0.0, (1 - fs.beta_nu) * fs.T / 2, (1 + fs.beta_nu) * fs.T / 2)
            lo = max(bq[0], bs[0])
            hi = min(bq[-1], bs[-1])
            if hi <= lo:
                continue
            breaks = np.unique(np.clip(np.concatenate([bq, bs]), lo, hi))
            t, w = _panel_nodes(breaks, osc=vmax)
            vals = (rrc_spectrum((t + d) / fq.T, fq.beta_nu)
                    * rrc_spectrum(t / fs.T, fs.beta_nu) * w / np.sqrt(fq.T * fs.T))
            out[idx] = np.sum(vals * np.exp(-2j * np.pi * t * v_b[idx]))
        return out

    def eta_tensor(self, nu_i: float, tau_grid: np.ndarray, nu_grid: np.ndarray):
        """eta on the outer product tau_grid x nu_grid (fast path for metrics)."""
        fq, fs = self.fq, self.fs
        if fq.kind == "sinc" and fs.kind == "sinc":
            return self._eta(nu_i, tau_grid[:, None], nu_grid[None, :])
        from .filters import rrc_spectrum
        v = nu_grid - nu_i
        vmax = float(np.max(np.abs(v))) if v.size else 0.0
        rows = []
        for tau in tau_grid:
            d = tau - (fq.tau_shift - fs.tau_shift)
            bq = _window_breaks(-d, (1 - fq.beta_nu) * fq.T / 2, (1 + fq.beta_nu) * fq.T / 2)
            bs = _window_breaks(0.0, (1 - fs.beta_nu) * fs.T / 2, (1 + fs.beta_nu) * fs.T / 2)
            lo = max(bq[0], bs[0])
            hi = min(bq[-1], bs[-1])
            if hi <= lo:
                rows.append(None)
                continue
            breaks = np.unique(np.clip(np.concatenate([bq, bs]), lo, hi))
            t, w = _panel_nodes(breaks, osc=vmax)
            vals = (rrc_spectrum((t + d) / fq.T, fq.beta_nu)
                    * rrc_spectrum(t / fs.T, fs.beta_nu) * w / np.sqrt(fq.T * fs.T))
            rows.append((t, vals))
        out = np.zeros((tau_grid.size, nu_grid.size), dtype=complex)
        for r, row in enumerate(rows):
            if row is None:
                continue
            t, vals = row
            out[r] = vals @ np.exp(-2j * np.pi * np.multiply.outer(t, v))
        return out

    # ---- full effective channel ------------------------------------------

    def _path_phase(self, i: int, tau, nu):
        """Phase factors of path i (everything except the gain and zeta*eta)."""
        fq, fs = self.fq, self.fs
        tau = np.asarray(tau, dtype=float)
        nu = np.asarray(nu, dtype=float)
        tau_i = self.chan.delays[i]
        nu_i = self.chan.dopplers[i]
        return (np.exp(2j * np.pi * fs.nu_shift * (tau - tau_i))
                * np.exp(2j * np.pi * nu_i * (tau + fs.tau_shift - tau_i))
                * np.exp(-2j * np.pi * nu * fs.tau_shift))

    def h_eff(self, tau, nu):
        """h_eff(tau, nu); tau and nu broadcast elementwise."""
        tau = np.asarray(tau, dtype=float)
        nu = np.asarray(nu, dtype=float)
        out = np.zeros(np.broadcast_shapes(tau.shape, nu.shape), dtype=complex)
        for i in range(self.chan.n_paths):
            out += (self.chan.gains[i] * self._path_phase(i, tau, nu)
                    * self.zeta(i, tau) * self.eta(i, tau, nu))
        return out

    def path_tensor(self, i: int, tau_grid: np.ndarray, nu_grid: np.ndarray):
        """Per-path h_eff contribution (without the gain) on tau_grid x nu_grid."""
        tau_i = float(self.chan.delays[i])
        nu_i = float(self.chan.dopplers[i])
        fq, fs = self.fq, self.fs
        zt = self._zeta(tau_i, nu_i, tau_grid)
        et = self.eta_tensor(nu_i, tau_grid, nu_grid)
        ph_tau = (np.exp(2j * np.pi * fs.nu_shift * (tau_grid - tau_i))
                  * np.exp(2j * np.pi * nu_i * (tau_grid + fs.tau_shift - tau_i)))
        ph_nu = np.exp(-2j * np.pi * nu_grid * fs.tau_shift)
        return (zt * ph_tau)[:, None] * et * ph_nu[None, :]

    def h_eff_tensor(self, tau_grid: np.ndarray, nu_grid: np.ndarray):
        """h_eff on the outer product tau_grid x nu_grid."""
        out = np.zeros((tau_grid.size, nu_grid.size), dtype=complex)
        for i in range(self.chan.n_paths):
            out += self.chan.gains[i] * self.path_tensor(i, tau_grid, nu_grid)
        return out

    # ---- support sizing ----------------------------------------------------

    def delay_support(self) -> tuple[float, float]:
        """Window outside which h_eff's delay profile is treated as zero."""
        tau_max, _ = spread_bounds(self.chan)
        tail = self.fq.delay_tail() + self.fs.delay_tail()
        return (-tail, tau_max + tail)

    def doppler_support(self) -> tuple[float, float]:
        """Window outside which h_eff's Doppler profile is treated as zero."""
        _, nu_max = spread_bounds(self.chan)
        tail = self.fq.truncation_lobes / self.fq.T + self.fs.truncation_lobes / self.fs.T
        return (-nu_max - tail, nu_max + tail)


def h_eff_continuous(e: EffectiveChannel, tau, nu):
    return e.h_eff(tau, nu)


def default_self_box(e: EffectiveChannel, q: UserAllocation,
                     delay_margin: int = 10, doppler_margin: int = 4):
    """Lattice bounding box (k_lo, k_hi, l_lo, l_hi) for self-channel taps.

    Delay columns run from -delay_margin to k_max + delay_margin with
    k_max = ceil(B tau_max); Doppler rows span the effective Doppler
    spread ceil(N (2 nu_max + 2/T) / nu_p) plus the margin.
    """
    tau_max, nu_max = spread_bounds(e.chan)
    k_max = int(np.ceil(q.B * tau_max - 1e-9))
    l_half = int(np.ceil(q.N * (2 * nu_max + 2.0 / q.T) / q.nu_p - 1e-9)) + doppler_margin
    return (-delay_margin, k_max + delay_margin, -l_half, l_half)


def discrete_self_channel(e: EffectiveChannel, q: UserAllocation,
                          box: tuple[int, int, int, int] | None = None) -> DDTapSet:
    """Sample h_eff on the q lattice: taps[k, l] = h_eff(k/B, l/T) over the box."""
    if box is None:
        box = default_self_box(e, q)
    k_lo, k_hi, l_lo, l_hi = box
    kk = np.arange(k_lo, k_hi + 1)
    ll = np.arange(l_lo, l_hi + 1)
    taps = e.h_eff_tensor(kk / q.B, ll / q.T)
    return DDTapSet(k_min=k_lo, l_min=l_lo, taps=taps)


def sample_taps_cross(e: EffectiveChannel, q: UserAllocation, s: UserAllocation,
                      k: int, l: int, box: tuple[int, int, int, int],
                      support: tuple[float, float, float, float] | None = None,
                      warn_floor: float = 1e-6) -> DDTapSet:
    """Response taps on the q lattice to the s-user carrier at (k, l).

    Evaluates the quasi-periodic replica sum

      taps[k',l'] = sum_{n,m} h_eff(k'/B_q - t_nk, l'/T_q - v_ml)
                    e^{j2pi n l / N_s} e^{j2pi (l'/T_q - v_ml) t_nk}

    with t_nk = (n M_s + k)/B_s and v_ml = (m N_s + l)/T_s, over all
    replicas whose h_eff support window intersects the requested box.
    """
    k_lo, k_hi, l_lo, l_hi = box
    if support is None:
        d_lo, d_hi = e.delay_support()
        v_lo, v_hi = e.doppler_support()
    else:
        d_lo, d_hi, v_lo, v_hi = support

    kk = np.arange(k_lo, k_hi + 1)
    ll = np.arange(l_lo, l_hi + 1)
    tau_q = kk / q.B
    nu_q = ll / q.T

    # replica index ranges from the support window
    n_lo = int(np.floor(((tau_q.min() - d_hi) * s.B - k) / s.M))
    n_hi = int(np.ceil(((tau_q.max() - d_lo) * s.B - k) / s.M))
    m_lo = int(np.floor(((nu_q.min() - v_hi) * s.T - l) / s.N))
    m_hi = int(np.ceil(((nu_q.max() - v_lo) * s.T - l) / s.N))

    taps = np.zeros((kk.size, ll.size), dtype=complex)
    for n in range(n_lo, n_hi + 1):
        t_nk = (n * s.M + k) / s.B
        tau_arg = tau_q - t_nk
        keep = (tau_arg >= d_lo - 1e-15) & (tau_arg <= d_hi + 1e-15)
        if not np.any(keep):
            continue
        for m in range(m_lo, m_hi + 1):
            v_ml = (m * s.N + l) / s.T
            nu_arg = nu_q - v_ml
            keep_nu = (nu_arg >= v_lo - 1e-15) & (nu_arg <= v_hi + 1e-15)
            if not np.any(keep_nu):
                continue
            h = e.h_eff_tensor(tau_arg[keep], nu_arg[keep_nu])
            phase = (np.exp(2j * np.pi * n * l / s.N)
                     * np.exp(2j * np.pi * nu_arg[keep_nu] * t_nk)[None, :])
            taps[np.ix_(keep, keep_nu)] += h * phase
    ts = DDTapSet(k_min=k_lo, l_min=l_lo, taps=taps)
    edge = max(np.abs(taps[0, :]).max(), np.abs(taps[-1, :]).max(),
               np.abs(taps[:, 0]).max(), np.abs(taps[:, -1]).max())
    peak = np.abs(taps).max()
    if peak > 0 and edge > warn_floor * peak:
        import warnings
        warnings.warn(f"tap box may be too small: edge/peak = {edge / peak:.2e}")
    return ts
