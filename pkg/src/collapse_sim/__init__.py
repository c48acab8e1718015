"""Stochastic norm-fluctuation model of wave-function collapse.

A wave function is reduced to packet weights and phases. Each fluctuation
removes weight eps from packets drawn in proportion to weight (destroying
packets that cannot cover the loss) and then adds eps to one packet. The
package simulates ensembles of such trajectories, computes the exact
absorption probabilities and relaxation spectrum of the induced weight walk,
and checks the simulator against those analytic results.
"""

from .conformance import CHECKS, CheckReport, ConformanceConfig, cascade_expectation, run_checks
from .ensemble import EnsembleStats, RunConfig, TrajectoryResult, mean_amplitude_series, run_ensemble, run_trajectory
from .ops import (
    CascadeRecord,
    PhaseSample,
    apply_nsf_cascade,
    apply_nsf_single,
    apply_psf,
    draw_packet,
    fluctuate,
    sample_phase_negative,
    sample_phase_positive,
)
from .rng import Stream
from .spectral import (
    SpectralResult,
    StatMatrix,
    asymptotic_selection_time,
    build_stat_matrix,
    eigen_spectrum,
    evolve_distribution,
    relaxation_times,
)
from .state import FluctuationParams, PacketAmplitude, WaveState, is_collapsed, new_state, total_weight
from .walk import (
    TransitionScheme,
    WalkGrid,
    absorption_oracle,
    combined_scheme,
    effective_probs,
    generic_scheme,
    simulate_walk,
    transition_probs,
)

__version__ = "0.1.0"
