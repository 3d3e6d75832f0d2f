"""Zak-OTFS multiuser uplink simulation library."""

from .lattice import (UserAllocation, Scenario, make_allocation,
                      check_crystallization, check_disjoint, table1_scenario)
from .dd_core import (DDGridSignal, DDTapSet, TDSignal, qp_access,
                      twisted_conv_discrete, tapset_twisted_conv,
                      zak_transform, zak_grid, inverse_zak)
from .filters import FactorizedDDFilter, matched_filter, rrc_pulse, rrc_spectrum
from .channel import (PathProfile, ChannelRealization, VEH_A,
                      draw_veh_a, draw_profile, ideal_channel, spread_bounds)
from .eff_channel import (EffectiveChannel, h_eff_continuous,
                          discrete_self_channel, sample_taps_cross, default_self_box)
from .waveform import (OracleConfig, synth_carrier, synth_frame, apply_channel,
                       add_awgn, rx_sample, dump_td, load_td)
from .frame_pilot import (FrameLayout, FrameSymbols, build_layout, map_frame,
                          pilot_grid, estimate_taps, qam4_map, qam4_demap)
from .equalizer import SolverParams, LinearIO, build_system, lsmr_solve, cancel_pilot, demap
from .metrics import (LeakageReport, PairEnergy, leakage_ratio, expected_gram,
                      gram_carrier_energies, mui_heatmap, ber, nmse, nmse_parts)

__all__ = [n for n in dir() if not n.startswith("_")]
__version__ = "0.1.0"
