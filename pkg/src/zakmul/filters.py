"""Factorizable DD pulse-shaping filters (sinc, RRC) and the matched filter.

A transmit filter factorizes as w_tx(tau, nu) = w_B(tau) * w_T(nu) times
the TF-shift phase exp(j2pi(nu_shift*tau - nu*tau_shift)); the shift
moves the transmit signal's TF occupancy to the user's allocated slot.
The matched receive filter is the conjugate-flipped transmit filter with
an extra exp(j2pi nu tau).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_SING_TOL = 1e-8


def rect(x):
    """Unit rectangle, 1 on [-1/2, 1/2), 0 elsewhere.

    Half-open so a pulse train aligned with the window edges keeps exactly
    N = T/tau_p pulses: the sampled carrier family stays orthonormal.
    """
    x = np.asarray(x, dtype=float)
    return ((x >= -0.5) & (x < 0.5)).astype(float)


def rrc_pulse(x, beta: float):
    """Root-raised-cosine pulse rrc_beta(x), unit symbol interval.

    rrc_b(x) = [sin(pi x (1-b)) + 4 b x cos(pi x (1+b))] / [pi x (1 - (4 b x)^2)]

    Removable singularities at x = 0 and 4 b x = +-1 are evaluated by
    their analytic limits (switchover within 1e-8 of the singular point).
    beta = 0 reduces to sinc(x).
    """
    x = np.asarray(x, dtype=float)
    if beta == 0.0:
        return np.sinc(x)
    out = np.empty_like(x)
    at0 = np.abs(x) < _SING_TOL
    at_edge = np.abs(np.abs(4.0 * beta * x) - 1.0) < _SING_TOL
    reg = ~(at0 | at_edge)
    xr = x[reg]
    num = np.sin(np.pi * xr * (1.0 - beta)) + 4.0 * beta * xr * np.cos(np.pi * xr * (1.0 + beta))
    den = np.pi * xr * (1.0 - (4.0 * beta * xr) ** 2)
    out[reg] = num / den
    out[at0] = 1.0 - beta + 4.0 * beta / np.pi
    out[at_edge] = (beta / np.sqrt(2.0)) * (
        (1.0 + 2.0 / np.pi) * np.sin(np.pi / (4.0 * beta))
        + (1.0 - 2.0 / np.pi) * np.cos(np.pi / (4.0 * beta))
    )
    return out


def rrc_spectrum(u, beta: float):
    """Square-root raised-cosine spectrum (transform of rrc_pulse).

    Equals 1 for |u| <= (1-b)/2, rolls off as cos(pi/(2b)(|u|-(1-b)/2))
    up to |u| = (1+b)/2, and is 0 beyond.  beta = 0 gives rect(u).
    """
    u = np.asarray(u, dtype=float)
    if beta == 0.0:
        return rect(u)
    a = np.abs(u)
    flat = a <= (1.0 - beta) / 2.0
    roll = (~flat) & (a <= (1.0 + beta) / 2.0)
    out = np.zeros_like(a)
    out[flat] = 1.0
    out[roll] = np.cos(np.pi / (2.0 * beta) * (a[roll] - (1.0 - beta) / 2.0))
    return out


@dataclass(frozen=True)
class FactorizedDDFilter:
    """Pulse-shaping filter w_B(tau) w_T(nu) with a TF-shift modulation.

    kind is "sinc" or "rrc"; beta_tau/beta_nu are RRC roll-offs (0 for
    sinc).  truncation_lobes bounds quadrature and waveform synthesis to
    +-truncation_lobes main-lobe widths of each factor.
    """

    kind: str
    B: float                 # Hz
    T: float                 # s
    beta_tau: float = 0.0
    beta_nu: float = 0.0
    tau_shift: float = 0.0   # s
    nu_shift: float = 0.0    # Hz
    truncation_lobes: int = 20

    def __post_init__(self):
        if self.kind not in ("sinc", "rrc"):
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if self.kind == "sinc" and (self.beta_tau != 0.0 or self.beta_nu != 0.0):
            raise ValueError("sinc filter must have zero roll-offs")
        for b in (self.beta_tau, self.beta_nu):
            if not 0.0 <= b <= 1.0:
                raise ValueError("roll-off must be in [0, 1]")

    # -- unshifted real factors ------------------------------------------

    def factor_wB(self, tau):
        """w_B(tau) = sqrt(B) pulse(B tau), unit energy, no shift phase."""
        return np.sqrt(self.B) * rrc_pulse(np.asarray(tau) * self.B, self.beta_tau)

    def factor_wT(self, nu):
        """w_T(nu) = sqrt(T) pulse(T nu), unit energy, no shift phase."""
        return np.sqrt(self.T) * rrc_pulse(np.asarray(nu) * self.T, self.beta_nu)

    # -- shifted evaluators ----------------------------------------------

    def eval_wB(self, tau):
        """Delay factor including the frequency-shift tone exp(j2pi nu_shift tau)."""
        tau = np.asarray(tau, dtype=float)
        return self.factor_wB(tau) * np.exp(2j * np.pi * self.nu_shift * tau)

    def eval_wT(self, nu):
        """Doppler factor including the time-shift phase exp(-j2pi tau_shift nu)."""
        nu = np.asarray(nu, dtype=float)
        return self.factor_wT(nu) * np.exp(-2j * np.pi * self.tau_shift * nu)

    def eval_WT(self, t):
        """Time window W_T(t) = int w_T(nu) exp(j2pi nu t) dnu, shifted by tau_shift.

        Closed forms: rect((t - tau_shift)/T)/sqrt(T) for sinc, the RRC
        spectrum shape (support (1+beta_nu)T wide) for rrc.
        """
        u = (np.asarray(t, dtype=float) - self.tau_shift) / self.T
        return rrc_spectrum(u, self.beta_nu) / np.sqrt(self.T)

    def eval_WB(self, f):
        """Frequency window W_B(f) = int w_B(tau) exp(-j2pi f tau) dtau, shifted by nu_shift."""
        u = (np.asarray(f, dtype=float) - self.nu_shift) / self.B
        return rrc_spectrum(u, self.beta_tau) / np.sqrt(self.B)

    # -- support helpers ---------------------------------------------------

    def time_window_halfwidth(self) -> float:
        """Half-width of the support of eval_WT: (1 + beta_nu) T / 2."""
        return (1.0 + self.beta_nu) * self.T / 2.0

    def band_window_halfwidth(self) -> float:
        """Half-width of the support of eval_WB: (1 + beta_tau) B / 2."""
        return (1.0 + self.beta_tau) * self.B / 2.0

    def delay_tail(self) -> float:
        """Truncation extent of the delay factor in seconds."""
        return self.truncation_lobes / self.B

    def matched(self) -> "MatchedFilter":
        return MatchedFilter(self)


class MatchedFilter:
    """Receive filter w_rx(tau,nu) = w_B*(-tau) w_T*(-nu) e^{j2pi(nu_q tau - nu tau_q)} e^{j2pi nu tau}."""

    def __init__(self, tx: FactorizedDDFilter):
        self.tx = tx

    def __call__(self, tau, nu):
        tau = np.asarray(tau, dtype=float)
        nu = np.asarray(nu, dtype=float)
        f = self.tx
        phase = np.exp(2j * np.pi * (f.nu_shift * tau - nu * f.tau_shift)) \
            * np.exp(2j * np.pi * nu * tau)
        return np.conj(f.factor_wB(-tau)) * np.conj(f.factor_wT(-nu)) * phase


def matched_filter(f: FactorizedDDFilter) -> MatchedFilter:
    return MatchedFilter(f)


def factor_energy(f: FactorizedDDFilter, which: str = "wB",
                  lobes: float | None = None, points_per_lobe: int = 32) -> float:
    """Composite-Simpson energy of one filter factor over +-lobes main lobes.

    Sinc tails hold ~1/(pi^2 L) of the energy outside +-L lobes, so the
    truncated integral approaches 1 only slowly; RRC converges fast.
    """
    if lobes is None:
        lobes = f.truncation_lobes
    n = 2 * int(lobes * points_per_lobe) + 1
    x = np.linspace(-lobes, lobes, n)
    if which == "wB":
        vals = np.abs(f.factor_wB(x / f.B)) ** 2 / f.B
    elif which == "wT":
        vals = np.abs(f.factor_wT(x / f.T)) ** 2 / f.T
    else:
        raise ValueError("which must be 'wB' or 'wT'")
    from scipy.integrate import simpson
    return float(simpson(vals, x=x))


def tf_energy_fractions(f: FactorizedDDFilter, u, k: int, l: int, cfg=None):
    """Fractions of carrier psi^{k,l} energy inside the shifted TF slot.

    Synthesizes the carrier with the waveform engine and measures the
    energy fraction inside [tau_shift +- T/2) in time and inside
    [nu_shift +- B/2) in frequency.
    """
    from . import waveform

    if cfg is None:
        cfg = waveform.OracleConfig(time_pad=2 * f.delay_tail(),
                                    truncation_lobes=f.truncation_lobes)
    span = (u.tau_shift - f.time_window_halfwidth() - 2 * f.delay_tail(),
            u.tau_shift + f.time_window_halfwidth() + 2 * f.delay_tail())
    sig = waveform.synth_carrier(u, f, k, l, cfg, system_B=u.B, span=span)
    t = sig.times()
    e_tot = np.sum(np.abs(sig.samples) ** 2)
    if e_tot == 0.0:
        raise ValueError("carrier has zero energy")
    t_lo, t_hi = u.tau_shift - u.T / 2, u.tau_shift + u.T / 2
    in_time = (t >= t_lo) & (t < t_hi)
    time_frac = float(np.sum(np.abs(sig.samples[in_time]) ** 2) / e_tot)

    spec = np.fft.fft(sig.samples)
    freqs = np.fft.fftfreq(sig.samples.size, d=1.0 / sig.sample_rate)
    # frequency axis is periodic at fs; center the band test on nu_shift
    rel = (freqs - u.nu_shift + sig.sample_rate / 2) % sig.sample_rate - sig.sample_rate / 2
    in_band = (rel >= -u.B / 2) & (rel < u.B / 2)
    band_frac = float(np.sum(np.abs(spec[in_band]) ** 2) / np.sum(np.abs(spec) ** 2))
    return time_frac, band_frac
