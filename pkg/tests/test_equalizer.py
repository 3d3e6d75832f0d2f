import numpy as np
import pytest

from zakmul import (DDGridSignal, DDTapSet, FactorizedDDFilter, SolverParams,
                    build_layout, build_system, cancel_pilot, demap, draw_veh_a,
                    lsmr_solve, make_allocation, map_frame, pilot_grid,
                    table1_scenario, twisted_conv_discrete, qam4_map)
from zakmul.equalizer import LinearIO
from zakmul.eff_channel import EffectiveChannel, discrete_self_channel, default_self_box
from zakmul.rng import substream

from oracles import lstsq_dense, qpsk_ber_awgn, twisted_conv_bruteforce


def test_lsmr_identity_one_iteration():
    n = 12
    H = np.eye(n, dtype=complex)
    y = np.arange(n) + 1j * np.arange(n)[::-1]
    sys = LinearIO(H=H, y_obs=y.astype(complex), cols=np.zeros((n, 2), int), row_shape=(n, 1))
    x, ok, itn = lsmr_solve(sys, SolverParams(max_iters=5))
    assert ok
    assert itn <= 1
    assert np.allclose(x, y)


def test_lsmr_matches_dense_lstsq():
    rng = np.random.default_rng(0)
    H = rng.standard_normal((50, 40)) + 1j * rng.standard_normal((50, 40))
    y = rng.standard_normal(50) + 1j * rng.standard_normal(50)
    sys = LinearIO(H=H, y_obs=y, cols=np.zeros((40, 2), int), row_shape=(50, 1))
    x, ok, _ = lsmr_solve(sys, SolverParams(max_iters=500, atol=1e-12, btol=1e-12))
    assert ok
    assert np.max(np.abs(x - lstsq_dense(H, y))) < 1e-8


def test_lsmr_heavy_damping_shrinks_to_zero():
    rng = np.random.default_rng(1)
    H = rng.standard_normal((30, 20)) + 1j * rng.standard_normal((30, 20))
    y = rng.standard_normal(30) + 1j * rng.standard_normal(30)
    sys = LinearIO(H=H, y_obs=y, cols=np.zeros((20, 2), int), row_shape=(30, 1))
    x, _, _ = lsmr_solve(sys, SolverParams(max_iters=500, damping=1e6))
    assert np.max(np.abs(x)) < 1e-9


def test_lsmr_residual_monotone():
    rng = np.random.default_rng(2)
    H = rng.standard_normal((40, 30)) + 1j * rng.standard_normal((40, 30))
    y = rng.standard_normal(40) + 1j * rng.standard_normal(40)
    sys = LinearIO(H=H, y_obs=y, cols=np.zeros((30, 2), int), row_shape=(40, 1))
    prev = np.inf
    for k in range(1, 25):
        x, _, _ = lsmr_solve(sys, SolverParams(max_iters=k, atol=0.0, btol=0.0))
        r = np.linalg.norm(y - H @ x)
        assert r <= prev + 1e-9
        prev = r


def test_lsmr_global_phase_invariance():
    rng = np.random.default_rng(3)
    H = rng.standard_normal((25, 18)) + 1j * rng.standard_normal((25, 18))
    y = rng.standard_normal(25) + 1j * rng.standard_normal(25)
    phi = np.exp(1j * 0.7)
    p = SolverParams(max_iters=500, atol=1e-13, btol=1e-13)
    a = lsmr_solve(LinearIO(H=H, y_obs=y, cols=np.zeros((18, 2), int),
                            row_shape=(25, 1)), p)[0]
    b = lsmr_solve(LinearIO(H=phi * H, y_obs=phi * y, cols=np.zeros((18, 2), int),
                            row_shape=(25, 1)), p)[0]
    assert np.max(np.abs(a - b)) < 1e-8


def small_layout():
    u = make_allocation(1, nu_p=15e3, M=8, N=4)
    return u, build_layout(u, tau_max=0.0, a1=1, a2=0, g1=1, g2=1)


def test_build_system_delta_taps_is_selection():
    u, layout = small_layout()
    taps = DDTapSet.from_dict({(0, 0): 1.0})
    y = DDGridSignal.zeros(u.M, u.N)
    sys = build_system(taps, layout, y)
    pos = layout.data_positions()
    want = np.zeros((u.M * u.N, pos.shape[0]), complex)
    for c, (k, l) in enumerate(pos):
        want[k * u.N + l, c] = 1.0
    assert np.allclose(sys.H, want)


def test_build_system_shift_tap_permutation_phase():
    u, layout = small_layout()
    taps = DDTapSet.from_dict({(1, 0): 1.0})
    sys = build_system(taps, layout, DDGridSignal.zeros(u.M, u.N))
    pos = layout.data_positions()
    # column (k,l) contributes to row ((k+1) mod M, l) with the
    # quasi-periodic wrap phase when k+1 == M
    for c, (k, l) in enumerate(pos):
        col = sys.H[:, c]
        nz = np.nonzero(np.abs(col) > 1e-15)[0]
        assert nz.size == 1
        kp, lp = divmod(int(nz[0]), u.N)
        assert (kp, lp) == ((k + 1) % u.M, l)
        # wrap reads x_dd[-1, l] = e^{-j2pi l/N} x[M-1, l]
        want = 1.0 if k + 1 < u.M else np.exp(-2j * np.pi * l / u.N)
        assert col[nz[0]] == pytest.approx(want)


def test_build_system_reproduces_twisted_conv():
    u, layout = small_layout()
    rng = np.random.default_rng(4)
    taps = DDTapSet(-1, -1, rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
    bits = rng.integers(0, 2, size=(layout.n_data, 2))
    fr = map_frame(layout, bits, float(layout.n_data), 0.0)
    # frame with data only (no pilot): E_p = 0
    y_ref = twisted_conv_discrete(taps, fr.x)
    sys = build_system(taps, layout, DDGridSignal.zeros(u.M, u.N))
    pos = layout.data_positions()
    xvec = fr.x.values[pos[:, 0], pos[:, 1]]
    y_mat = (sys.H @ xvec).reshape(u.M, u.N)
    assert np.max(np.abs(y_mat - y_ref.values)) < 1e-12


def test_demap_exact_and_awgn_ber():
    rng = np.random.default_rng(5)
    bits = rng.integers(0, 2, size=(4000, 2))
    sym = qam4_map(bits)
    assert np.array_equal(demap(sym * np.sqrt(2.5), 2.5 * sym.size, sym.size), bits)
    # identity channel + AWGN: BER matches the closed-form QPSK curve
    es_n0 = 10 ** (7.0 / 10)
    noise = (rng.standard_normal(sym.size) + 1j * rng.standard_normal(sym.size)) \
        * np.sqrt(1 / (2 * es_n0))
    got = np.mean(demap(sym + noise, float(sym.size), sym.size) != bits)
    want = qpsk_ber_awgn(es_n0)
    assert got == pytest.approx(want, rel=0.10)


@pytest.mark.parametrize("user_id", [1, 2, 3, 4])
def test_noiseless_perfect_csi_loopback(user_id):
    # exact taps, no noise: LSMR recovers every user's bits, Veh-A at 4 kHz
    sc = table1_scenario()
    u = sc.user(user_id)
    layout = build_layout(u, 2.51e-6, a1=2, a2=1, g1=3, g2=2)
    f = FactorizedDDFilter("sinc", B=u.B, T=u.T,
                           tau_shift=u.tau_shift, nu_shift=u.nu_shift)
    chan = draw_veh_a(substream(21, user_id), nu_max=4e3)
    e = EffectiveChannel(f, f, chan)
    taps = discrete_self_channel(e, u, default_self_box(e, u))
    rng = substream(22, user_id)
    bits = rng.integers(0, 2, size=(layout.n_data, 2))
    E_d = float(layout.n_data)
    fr = map_frame(layout, bits, E_d, E_d)
    y = twisted_conv_discrete(taps, fr.x)
    y = cancel_pilot(y, taps, layout, E_d)
    sys = build_system(taps, layout, y)
    xhat, ok, _ = lsmr_solve(sys, SolverParams(max_iters=300))
    assert ok
    got = demap(xhat, E_d, layout.n_data)
    assert np.array_equal(got, bits)
