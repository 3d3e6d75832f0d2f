"""User time-frequency allocations and information lattices.

Each uplink user shapes its delay-Doppler carriers so that the transmit
signal occupies a dedicated rectangle of the time-frequency plane.  This
module holds the allocation bookkeeping: periods, lattice sizes,
crystallization checks and the reference 4-user scenario.
"""

from __future__ import annotations

from dataclasses import dataclass, field

_REL_TOL = 1e-12
_ROUND_TOL = 1e-9


@dataclass(frozen=True)
class UserAllocation:
    """One user's TF slot and DD lattice.

    T, B are the slot duration/bandwidth; tau_p, nu_p the delay/Doppler
    periods of the quasi-periodic carriers (nu_p = 1/tau_p); M = B*tau_p
    and N = T*nu_p are the lattice dimensions; (tau_shift, nu_shift) is
    the TF center of the slot.
    """

    user_id: int
    T: float              # s
    B: float              # Hz
    tau_p: float          # s
    nu_p: float           # Hz
    M: int
    N: int
    tau_shift: float = 0.0   # s
    nu_shift: float = 0.0    # Hz

    def __post_init__(self):
        if self.T <= 0 or self.B <= 0:
            raise ValueError("T and B must be positive")
        if self.M < 1 or self.N < 1:
            raise ValueError("M and N must be >= 1")
        if abs(self.nu_p * self.tau_p - 1.0) > _REL_TOL:
            raise ValueError("nu_p must equal 1/tau_p")
        if abs(self.B * self.tau_p - self.M) > _ROUND_TOL:
            raise ValueError(f"M={self.M} inconsistent with B*tau_p={self.B * self.tau_p}")
        if abs(self.T * self.nu_p - self.N) > _ROUND_TOL:
            raise ValueError(f"N={self.N} inconsistent with T*nu_p={self.T * self.nu_p}")

    @property
    def delay_step(self) -> float:
        """Lattice delay spacing tau_p/M = 1/B."""
        return self.tau_p / self.M

    @property
    def doppler_step(self) -> float:
        """Lattice Doppler spacing nu_p/N = 1/T."""
        return self.nu_p / self.N

    def time_interval(self) -> tuple[float, float]:
        """Half-open occupied time interval [lo, hi)."""
        return (self.tau_shift - self.T / 2, self.tau_shift + self.T / 2)

    def freq_interval(self) -> tuple[float, float]:
        """Half-open occupied frequency interval [lo, hi)."""
        return (self.nu_shift - self.B / 2, self.nu_shift + self.B / 2)


def make_allocation(user_id: int, nu_p: float, M: int, N: int,
                    tau_shift: float = 0.0, nu_shift: float = 0.0) -> UserAllocation:
    """Build an allocation from the Doppler period and lattice sizes."""
    tau_p = 1.0 / nu_p
    return UserAllocation(user_id=user_id, T=N / nu_p, B=M * nu_p,
                          tau_p=tau_p, nu_p=nu_p, M=M, N=N,
                          tau_shift=tau_shift, nu_shift=nu_shift)


@dataclass(frozen=True)
class Scenario:
    """A set of users sharing the system TF rectangle [0,T) x [0,B)."""

    users: tuple[UserAllocation, ...]
    system_T: float
    system_B: float

    def user(self, user_id: int) -> UserAllocation:
        for u in self.users:
            if u.user_id == user_id:
                return u
        raise KeyError(f"no user {user_id}")


def check_crystallization(u: UserAllocation, tau_max: float, nu_max: float) -> bool:
    """True iff the channel spread fits the DD period: tau_p > tau_max and nu_p > 2 nu_max."""
    if tau_max < 0 or nu_max < 0:
        raise ValueError("spreads must be non-negative")
    return u.tau_p > tau_max and u.nu_p > 2.0 * nu_max


def _disjoint(a: tuple[float, float], b: tuple[float, float]) -> bool:
    """Half-open intervals [lo, hi) with disjoint interiors."""
    return a[1] <= b[0] or b[1] <= a[0]


def check_disjoint(sc: Scenario) -> bool:
    """True iff all user TF rectangles are pairwise disjoint and inside the system box."""
    rects = [(u.time_interval(), u.freq_interval()) for u in sc.users]
    for (t, f) in rects:
        if t[0] < -_ROUND_TOL or t[1] > sc.system_T + _ROUND_TOL:
            return False
        if f[0] < -_ROUND_TOL or f[1] > sc.system_B + _ROUND_TOL:
            return False
    for i in range(len(rects)):
        for j in range(i + 1, len(rects)):
            ti, fi = rects[i]
            tj, fj = rects[j]
            if not (_disjoint(ti, tj) or _disjoint(fi, fj)):
                return False
    return True


def table1_scenario(time_gap: float = 200e-6, filter_kind: str = "sinc",
                    rolloff: float = 0.1) -> Scenario:
    """The reference 4-user layout.

    Lattice parameters per user (Doppler period kHz, M, N, bandwidth,
    duration): UT-1 (15, 24, 15, 360 kHz, 1 ms), UT-2 (15, 24, 30,
    360 kHz, 2 ms), UT-3 (30, 12, 30, 360 kHz, 1 ms), UT-4 (30, 24, 15,
    720 kHz, 0.5 ms).

    UT-2 sits just above UT-1 in frequency over common time (the
    Doppler-spread leakage path); UT-4 and UT-3 occupy overlapping bands
    before/after UT-1 in time (the delay-axis leakage path) separated by
    `time_gap`; UT-3/UT-4 are far apart from each other.  With exact sinc
    pulses, zero-gap time adjacency couples slots through the slowly
    decaying pulse tails with a strongly carrier-dependent profile; the
    default three-delay-period gap keeps the time-axis leakage visible
    and Doppler-invariant while leaving the per-carrier interference
    nearly uniform.  Every user's TF center is additionally offset by
    half a lattice cell so window edges fall between pulse instants.

    For RRC filters the occupied band expands to (1+rolloff) B, so UT-2
    is raised by the half-skirt widths; otherwise the skirt overlap of
    adjacent bands dominates the leakage regardless of the Doppler
    spread.

        UT-4: [0.0, 0.5) ms x [  0, 720) kHz
        UT-1: [0.5 + g, 1.5 + g) ms x [360, 720) kHz
        UT-3: [1.5 + 2g, 2.5 + 2g) ms x [360, 720) kHz
        UT-2: [0.0, 2.0) ms x [721, 1081) kHz   (plus skirt room if RRC)
    """
    g = time_gap
    skirt = rolloff * (360e3 + 360e3) / 2 if filter_kind == "rrc" else 0.0

    def mk(uid, nu_p, M, N, tau0, nu0):
        B = M * nu_p
        T = N / nu_p
        return make_allocation(uid, nu_p=nu_p, M=M, N=N,
                               tau_shift=tau0 + 0.5 / B, nu_shift=nu0 + 0.5 / T)

    u1 = mk(1, 15e3, 24, 15, 1.00e-3 + g, 540e3)
    u2 = mk(2, 15e3, 24, 30, 1.00e-3, 901e3 + skirt)
    u3 = mk(3, 30e3, 12, 30, 2.00e-3 + 2 * g, 540e3)
    u4 = mk(4, 30e3, 24, 15, 0.25e-3, 360e3)
    return Scenario(users=(u1, u2, u3, u4), system_T=2.5e-3 + 2 * g + 0.05e-3,
                    system_B=1.082e6 + skirt)
