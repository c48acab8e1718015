"""Trajectory runner and ensemble statistics.

Trajectories are grouped into fixed blocks of ``BLOCK_SIZE`` consecutive
indices. Each block is reduced to a partial ``EnsembleStats`` and the
partials are merged in block order, so the result depends only on the
config and never on how blocks were scheduled across workers.
"""

from __future__ import annotations

import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ops import nsf_cascade_inplace, psf_inplace, resolve_phase_dist
from .rng import DOMAIN_TRAJECTORY, Stream
from .state import FluctuationParams, new_state

__all__ = [
    "RunConfig",
    "TrajectoryResult",
    "EnsembleStats",
    "run_trajectory",
    "run_ensemble",
    "mean_amplitude_series",
    "resolve_workers",
    "BLOCK_SIZE",
    "WORKERS_ENV",
]

BLOCK_SIZE = 64
WORKERS_ENV = "COLLAPSE_SIM_WORKERS"


@dataclass(frozen=True)
class RunConfig:
    weights: tuple
    params: FluctuationParams
    phases: Optional[tuple] = None
    n_trajectories: int = 1000
    max_steps: int = 10**6
    record_every: int = 0
    worker_count: int = 0

    def __post_init__(self):
        # normalizes and validates weights/phases up front
        state = new_state(self.weights, self.phases)
        object.__setattr__(self, "weights", state.weights)
        object.__setattr__(self, "phases", state.phases)
        if self.n_trajectories < 1:
            raise ValueError(f"n_trajectories must be >= 1, got {self.n_trajectories}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.record_every < 0:
            raise ValueError(f"record_every must be >= 0, got {self.record_every}")
        if self.worker_count < 0:
            raise ValueError(f"worker_count must be >= 0, got {self.worker_count}")

    @property
    def n_packets(self) -> int:
        return len(self.weights)


@dataclass
class TrajectoryResult:
    """Outcome of one trajectory.

    ``weight_rows``/``phase_rows`` are the snapshots at steps 0, R, 2R, ...
    taken until the trajectory stopped; after that the state is constant and
    equal to ``final_weights``/``final_phases``.
    """

    surviving_packet: Optional[int]
    steps_to_collapse: int
    cascade_lengths: dict
    final_weights: tuple
    final_phases: tuple
    weight_rows: list = field(default_factory=list)
    phase_rows: list = field(default_factory=list)

    @property
    def resolved(self) -> bool:
        return self.surviving_packet is not None


def run_trajectory(config: RunConfig, trajectory_index: int) -> TrajectoryResult:
    """Fluctuate until one packet is left or max_steps is hit.

    The random stream is keyed by (seed, trajectory_index), so any trajectory
    replays bit-exactly on its own.
    """
    params = config.params
    eps = params.epsilon
    phase_fn = resolve_phase_dist(params.phase_dist)
    rng = Stream(params.seed, trajectory_index, DOMAIN_TRAJECTORY)
    weights = list(config.weights)
    phases = list(config.phases)
    stride = config.record_every
    weight_rows = [tuple(weights)]
    phase_rows = [tuple(phases)]
    hist = Counter()
    live = sum(1 for w in weights if w > 0.0)
    step = 0
    max_steps = config.max_steps
    while live > 1 and step < max_steps:
        draws, residual = nsf_cascade_inplace(weights, phases, eps, rng, phase_fn)
        psf_inplace(weights, phases, eps, rng, phase_fn)
        step += 1
        hist[len(draws)] += 1
        live -= len(draws) if residual == 0.0 else len(draws) - 1
        if stride and step % stride == 0:
            weight_rows.append(tuple(weights))
            phase_rows.append(tuple(phases))
    if live == 1:
        survivor = next(i for i, w in enumerate(weights) if w > 0.0)
    else:
        survivor = None
    return TrajectoryResult(
        surviving_packet=survivor,
        steps_to_collapse=step,
        cascade_lengths=dict(hist),
        final_weights=tuple(weights),
        final_phases=tuple(phases),
        weight_rows=weight_rows,
        phase_rows=phase_rows,
    )


def _amps(weights, phases) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    return np.sqrt(w) * np.exp(1j * np.asarray(phases, dtype=float))


@dataclass
class EnsembleStats:
    """Aggregated ensemble statistics.

    Sums rather than means are stored so partial results merge exactly and
    serialize without loss. Series row j is step ``j * record_every``;
    trajectories that stopped earlier contribute their final state. With
    ``record_every == 0`` only step 0 is kept.
    """

    n_packets: int
    record_every: int
    n_trajectories: int = 0
    survival_counts: list = field(default_factory=list)
    unresolved: int = 0
    weight_sums: np.ndarray = None
    amp_sums: np.ndarray = None
    final_weight_sums: np.ndarray = None
    final_amp_sums: np.ndarray = None
    collapse_times: dict = field(default_factory=dict)
    cascade_lengths: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.n_packets
        if not self.survival_counts:
            self.survival_counts = [0] * n
        if self.weight_sums is None:
            self.weight_sums = np.zeros((0, n))
        if self.amp_sums is None:
            self.amp_sums = np.zeros((0, n), dtype=complex)
        if self.final_weight_sums is None:
            self.final_weight_sums = np.zeros(n)
        if self.final_amp_sums is None:
            self.final_amp_sums = np.zeros(n, dtype=complex)

    @classmethod
    def from_trajectories(cls, n_packets: int, record_every: int, results: Sequence[TrajectoryResult]):
        stats = cls(n_packets, record_every)
        L = max((len(r.weight_rows) for r in results), default=0)
        if record_every == 0:
            L = min(L, 1)
        W = np.zeros((L, n_packets))
        A = np.zeros((L, n_packets), dtype=complex)
        for r in results:
            rows = min(len(r.weight_rows), L)
            W[:rows] += np.asarray(r.weight_rows[:rows])
            A[:rows] += _amps(r.weight_rows[:rows], r.phase_rows[:rows])
            fw = np.asarray(r.final_weights)
            fa = _amps(r.final_weights, r.final_phases)
            W[rows:] += fw
            A[rows:] += fa
            stats.final_weight_sums += fw
            stats.final_amp_sums += fa
            stats.n_trajectories += 1
            if r.resolved:
                stats.survival_counts[r.surviving_packet] += 1
                stats.collapse_times[r.steps_to_collapse] = stats.collapse_times.get(r.steps_to_collapse, 0) + 1
            else:
                stats.unresolved += 1
            for k, v in r.cascade_lengths.items():
                stats.cascade_lengths[k] = stats.cascade_lengths.get(k, 0) + v
        stats.weight_sums = W
        stats.amp_sums = A
        return stats

    def _extended(self, L: int) -> tuple:
        pad = L - len(self.weight_sums)
        if pad <= 0:
            return self.weight_sums, self.amp_sums
        W = np.vstack([self.weight_sums, np.tile(self.final_weight_sums, (pad, 1))])
        A = np.vstack([self.amp_sums, np.tile(self.final_amp_sums, (pad, 1))])
        return W, A

    def merge(self, other: "EnsembleStats") -> "EnsembleStats":
        """Combine two disjoint sets of trajectories (self first)."""
        if (self.n_packets, self.record_every) != (other.n_packets, other.record_every):
            raise ValueError("cannot merge statistics of different runs")
        L = max(len(self.weight_sums), len(other.weight_sums))
        W1, A1 = self._extended(L)
        W2, A2 = other._extended(L)
        ct = dict(self.collapse_times)
        for k, v in other.collapse_times.items():
            ct[k] = ct.get(k, 0) + v
        cl = dict(self.cascade_lengths)
        for k, v in other.cascade_lengths.items():
            cl[k] = cl.get(k, 0) + v
        return EnsembleStats(
            n_packets=self.n_packets,
            record_every=self.record_every,
            n_trajectories=self.n_trajectories + other.n_trajectories,
            survival_counts=[a + b for a, b in zip(self.survival_counts, other.survival_counts)],
            unresolved=self.unresolved + other.unresolved,
            weight_sums=W1 + W2,
            amp_sums=A1 + A2,
            final_weight_sums=self.final_weight_sums + other.final_weight_sums,
            final_amp_sums=self.final_amp_sums + other.final_amp_sums,
            collapse_times=dict(sorted(ct.items())),
            cascade_lengths=dict(sorted(cl.items())),
        )

    @property
    def resolved(self) -> int:
        return self.n_trajectories - self.unresolved

    @property
    def survival_frequencies(self) -> np.ndarray:
        """Fraction of resolved trajectories ending in each packet."""
        if self.resolved == 0:
            return np.full(self.n_packets, np.nan)
        return np.asarray(self.survival_counts, dtype=float) / self.resolved

    @property
    def unresolved_fraction(self) -> float:
        return self.unresolved / self.n_trajectories if self.n_trajectories else 0.0

    @property
    def steps(self) -> np.ndarray:
        return np.arange(len(self.weight_sums)) * max(self.record_every, 1)

    @property
    def mean_weights(self) -> np.ndarray:
        return self.weight_sums / self.n_trajectories

    @property
    def mean_amplitudes(self) -> np.ndarray:
        return self.amp_sums / self.n_trajectories

    @property
    def mean_collapse_time(self) -> float:
        n = sum(self.collapse_times.values())
        if n == 0:
            return math.nan
        return math.fsum(k * v for k, v in self.collapse_times.items()) / n


def resolve_workers(requested: int = 0) -> int:
    """Worker count: $COLLAPSE_SIM_WORKERS wins, then the request, then cpu count."""
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
        if n < 0:
            raise ValueError(f"{WORKERS_ENV} must be >= 0, got {n}")
        requested = n
    if requested == 0:
        requested = os.cpu_count() or 1
    return requested


def _run_block(args) -> EnsembleStats:
    config, start, stop = args
    results = [run_trajectory(config, i) for i in range(start, stop)]
    return EnsembleStats.from_trajectories(config.n_packets, config.record_every, results)


def run_ensemble(config: RunConfig) -> EnsembleStats:
    blocks = [
        (config, s, min(s + BLOCK_SIZE, config.n_trajectories))
        for s in range(0, config.n_trajectories, BLOCK_SIZE)
    ]
    workers = min(resolve_workers(config.worker_count), len(blocks))
    if workers <= 1:
        partials = map(_run_block, blocks)
        stats = EnsembleStats(config.n_packets, config.record_every)
        for part in partials:
            stats = stats.merge(part)
        return stats
    with ProcessPoolExecutor(max_workers=workers) as pool:
        stats = EnsembleStats(config.n_packets, config.record_every)
        for part in pool.map(_run_block, blocks):
            stats = stats.merge(part)
    return stats


def mean_amplitude_series(stats: EnsembleStats, packet: int) -> np.ndarray:
    """Per-step ensemble mean of packet's complex amplitude."""
    if stats.record_every == 0:
        raise ValueError("time series not recorded (record_every = 0)")
    if not (0 <= packet < stats.n_packets):
        raise IndexError(f"packet {packet} out of range")
    return stats.mean_amplitudes[:, packet]
