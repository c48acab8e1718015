"""Surrogate wave function: orthogonal packets carried as (weight, phase) pairs."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

__all__ = [
    "TWO_PI",
    "NORM_TOL",
    "PacketAmplitude",
    "WaveState",
    "FluctuationParams",
    "new_state",
    "total_weight",
    "is_collapsed",
]

TWO_PI = 2.0 * math.pi

# user-supplied weights are rescaled when their sum is this close to 1
NORM_TOL = 1e-9

PHASE_DISTS = ("three-point", "deterministic-real")


def _wrap(phase: float) -> float:
    p = math.fmod(phase, TWO_PI)
    if p < 0.0:
        p += TWO_PI
    # fmod of a tiny negative number can land exactly on 2*pi after the shift
    return 0.0 if p >= TWO_PI else p


@dataclass(frozen=True)
class PacketAmplitude:
    """One superposition term a = sqrt(weight) * exp(i*phase)."""

    weight: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.weight >= 0.0:
            raise ValueError(f"packet weight must be >= 0, got {self.weight}")

    @property
    def destroyed(self) -> bool:
        return self.weight == 0.0

    @property
    def amplitude(self) -> complex:
        if self.weight == 0.0:
            return 0j
        r = math.sqrt(self.weight)
        return complex(r * math.cos(self.phase), r * math.sin(self.phase))


@dataclass(frozen=True)
class WaveState:
    """Ordered packets of the surrogate state; positions are packet identities.

    Weights are held exactly as floats; a destroyed packet has weight 0.0 and
    phase 0.0. Instances are immutable, operators return new states.
    """

    weights: tuple
    phases: tuple

    @classmethod
    def _raw(cls, weights, phases) -> "WaveState":
        # trusted constructor for operator output; skips validation
        obj = object.__new__(cls)
        object.__setattr__(obj, "weights", tuple(weights))
        object.__setattr__(obj, "phases", tuple(phases))
        return obj

    @property
    def n(self) -> int:
        return len(self.weights)

    @property
    def packets(self) -> tuple:
        return tuple(PacketAmplitude(w, p) for w, p in zip(self.weights, self.phases))

    @property
    def live(self) -> tuple:
        """Indices of packets with nonzero weight."""
        return tuple(i for i, w in enumerate(self.weights) if w > 0.0)

    def amplitudes(self) -> np.ndarray:
        w = np.asarray(self.weights, dtype=float)
        ph = np.asarray(self.phases, dtype=float)
        return np.sqrt(w) * np.exp(1j * ph)

    def total_weight(self) -> float:
        return math.fsum(self.weights)

    def is_collapsed(self) -> bool:
        return sum(1 for w in self.weights if w > 0.0) == 1

    def __len__(self) -> int:
        return len(self.weights)


def new_state(weights: Sequence[float], phases: Sequence[float] | None = None) -> WaveState:
    """Build a normalized state from packet weights and (optional) phases.

    Raises ValueError on a length mismatch, a negative weight, or a weight sum
    further than ``NORM_TOL`` from 1. Sums inside the tolerance are rescaled
    so the stored weights add to 1.
    """
    weights = [float(w) for w in weights]
    if phases is None:
        phases = [0.0] * len(weights)
    phases = [float(p) for p in phases]
    if len(weights) == 0:
        raise ValueError("a state needs at least one packet")
    if len(weights) != len(phases):
        raise ValueError(
            f"length mismatch: {len(weights)} weights vs {len(phases)} phases"
        )
    for i, w in enumerate(weights):
        if not (w >= 0.0) or math.isinf(w):
            raise ValueError(f"weight {i} must be finite and >= 0, got {w}")
    for i, p in enumerate(phases):
        if not math.isfinite(p):
            raise ValueError(f"phase {i} must be finite, got {p}")
    total = math.fsum(weights)
    if abs(total - 1.0) > NORM_TOL:
        raise ValueError(f"weights must sum to 1 (within {NORM_TOL:g}); got norm {total!r}")
    if total != 1.0:
        weights = [w / total for w in weights]
    phases = [0.0 if w == 0.0 else _wrap(p) for w, p in zip(weights, phases)]
    return WaveState._raw(weights, phases)


def total_weight(state: WaveState) -> float:
    return state.total_weight()


def is_collapsed(state: WaveState) -> bool:
    """True iff exactly one packet has nonzero weight (no thresholding)."""
    return state.is_collapsed()


PhaseDist = Union[str, Callable]


@dataclass(frozen=True)
class FluctuationParams:
    """Free parameters of the fluctuation model.

    ``phase_dist`` is ``"three-point"`` (default), ``"deterministic-real"``
    or a callable ``f(theta, rng) -> angle`` whose mean of ``exp(i*angle)``
    must equal ``theta`` for the mean-value identities to hold.
    """

    epsilon: float
    tau: float = 1.0
    phase_dist: PhaseDist = "three-point"
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not (self.tau > 0.0) or math.isinf(self.tau):
            raise ValueError(f"tau must be a positive finite number, got {self.tau}")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if isinstance(self.phase_dist, str):
            if self.phase_dist not in PHASE_DISTS:
                raise ValueError(
                    f"unknown phase distribution {self.phase_dist!r}; "
                    f"expected one of {PHASE_DISTS} or a callable"
                )
        elif not callable(self.phase_dist):
            raise ValueError("phase_dist must be a name or a callable")
        if self.epsilon > 0.25:
            warnings.warn(
                f"epsilon={self.epsilon} is not small; the model assumes epsilon << 1",
                stacklevel=3,
            )
