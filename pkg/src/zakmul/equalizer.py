"""Linear system assembly from estimated taps and LSMR data detection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .dd_core import DDGridSignal, DDTapSet, twisted_conv_discrete
from .frame_pilot import FrameLayout, qam4_demap


@dataclass(frozen=True)
class SolverParams:
    max_iters: int = 200
    atol: float = 1e-6
    btol: float = 1e-6
    damping: float = 0.0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass
class LinearIO:
    """y_obs ~ H x over the data columns of the frame.

    Rows are the M*N fundamental lattice samples in scan order
    (row = k*N + l); columns follow layout.data_positions().
    """

    H: np.ndarray
    y_obs: np.ndarray
    cols: np.ndarray          # (n_data, 2) of (k, l)
    row_shape: tuple[int, int]


def build_system(taps: DDTapSet, layout: FrameLayout, y: DDGridSignal) -> LinearIO:
    """Assemble H from the discrete twisted convolution with the tap set.

    H[(k',l'), (k,l)] accumulates tap * e^{j2pi lam (k'-kappa)/(MN)} times
    the quasi-periodic extension phase of the data symbol at (k, l).
    """
    M, N = layout.M, layout.N
    pos = layout.data_positions()
    col_of = -np.ones((M, N), dtype=int)
    col_of[pos[:, 0], pos[:, 1]] = np.arange(pos.shape[0])

    H = np.zeros((M * N, pos.shape[0]), dtype=complex)
    kp = np.arange(M)[:, None]
    lp = np.arange(N)[None, :]
    rows = (kp * N + lp).ravel()
    for i in range(taps.taps.shape[0]):
        kappa = taps.k_min + i
        src_k = kp - kappa
        n_wrap = np.floor_divide(src_k, M)
        src_k_mod = np.mod(src_k, M)
        for j in range(taps.taps.shape[1]):
            h = taps.taps[i, j]
            if h == 0:
                continue
            lam = taps.l_min + j
            src_l = lp - lam
            src_l_mod = np.mod(src_l, N)
            col = col_of[src_k_mod + np.zeros_like(src_l_mod), src_l_mod]
            w = h * np.exp(2j * np.pi * lam * src_k / (M * N)) \
                * np.exp(2j * np.pi * n_wrap * src_l / N)
            w = np.broadcast_to(w, (M, N))
            valid = col >= 0
            np.add.at(H, (rows[valid.ravel()], col[valid].ravel()), w[valid].ravel())
    return LinearIO(H=H, y_obs=y.values.ravel().copy(), cols=pos, row_shape=(M, N))


def lsmr_solve(sys: LinearIO, p: SolverParams = SolverParams()):
    """Least-squares solve of y_obs ~ H x; returns (x, converged, n_iters).

    converged is False when the iteration limit stopped the solver; the
    result is still returned.
    """
    res = spla.lsmr(sys.H, sys.y_obs, damp=p.damping, atol=p.atol, btol=p.btol,
                    maxiter=p.max_iters)
    x, istop, itn = res[0], res[1], res[2]
    return x, istop != 7, itn


def cancel_pilot(y: DDGridSignal, taps_hat: DDTapSet, layout: FrameLayout,
                 E_p: float) -> DDGridSignal:
    """Subtract the estimated received pilot from the lattice samples."""
    from .frame_pilot import pilot_grid
    rec = twisted_conv_discrete(taps_hat, pilot_grid(layout, E_p))
    return DDGridSignal(layout.M, layout.N, y.values - rec.values)


def demap(xhat: np.ndarray, E_d: float, n_data: int) -> np.ndarray:
    """Scale equalized symbols back to unit energy and slice to bits."""
    return qam4_demap(np.asarray(xhat) * np.sqrt(n_data / E_d))
