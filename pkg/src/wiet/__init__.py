"""Transmit-covariance design for wireless information and energy transfer
in a K-user multi-antenna interference channel.

Five schemes are provided: an ideal receiver that decodes and harvests
simultaneously, time-division mode switching, two-user TDMA, TDMA with
deterministic energy signals, and power splitting, together with
brute-force oracles and a Monte-Carlo experiment harness.
"""

from .channel import (ChannelSet, Evaluation, GenConfig, channel_from_json,
                      channel_to_json, energies, feasible_alpha_interval,
                      generate_instance, rates, tdma_feasible,
                      weighted_sum_rate, zero_leakage_thresholds)
from .schemes import (IDEAL, PS, TDMA, TDMA_D, TDMS, SchemeOptions, Slot,
                      Strategy, evaluate, solve_ideal, solve_ps, solve_scheme,
                      solve_tdma, solve_tdma_d, solve_tdms)
from .subsolver import (ConvexProgram, SolveOptions, SolveReport, check_kkt,
                        solve_convex)

__version__ = "0.1.0"
