"""Negative and positive semi-fluctuation operators.

The public functions take and return ``WaveState`` values. They are thin
wrappers around list-based kernels (``nsf_cascade_inplace``,
``psf_inplace``) that the ensemble runner calls directly in its hot loop, so
both paths execute the same arithmetic and consume the same random draws.

Random draw counts, per call:

* packet selection: 1 uniform
* three-point phase sample: 1 uniform (the deterministic distribution uses 0)
* NSF cascade: one selection per draw, plus one phase sample if the last
  drawn packet survives
* PSF: one selection plus one phase sample
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from .state import TWO_PI, FluctuationParams, WaveState, _wrap

__all__ = [
    "PhaseSample",
    "CascadeRecord",
    "three_point_phase",
    "deterministic_phase",
    "resolve_phase_dist",
    "nsf_phase_mean",
    "psf_phase_mean",
    "draw_packet",
    "sample_phase_negative",
    "sample_phase_positive",
    "apply_nsf_single",
    "apply_nsf_cascade",
    "apply_psf",
    "fluctuate",
    "nsf_cascade_inplace",
    "psf_inplace",
    "PSF_NORM_TOL",
    "DESTROY_TOL",
]

HALF_PI = 0.5 * math.pi
THREE_HALF_PI = 1.5 * math.pi

# apply_psf precondition: incoming norm must be 1 - eps to this tolerance
PSF_NORM_TOL = 1e-9

# a drawn packet within this of the deficit is destroyed, and a deficit
# below it ends the cascade; keeps rounding from leaving ulp-sized packets
DESTROY_TOL = 1e-13


@dataclass(frozen=True)
class PhaseSample:
    """A realized unit phase factor exp(i*angle)."""

    angle: float

    @property
    def value(self) -> complex:
        if self.angle == 0.0:
            return 1 + 0j
        if self.angle == HALF_PI:
            return 1j
        if self.angle == THREE_HALF_PI:
            return -1j
        return complex(math.cos(self.angle), math.sin(self.angle))


@dataclass
class CascadeRecord:
    """Draws made by one NSF cascade.

    ``draws`` holds ``(packet index, weight removed)`` pairs. ``residual_used``
    is the loss applied to the final, surviving packet, or 0.0 when the last
    draw destroyed its packet.
    """

    draws: list = field(default_factory=list)
    residual_used: float = 0.0

    @property
    def length(self) -> int:
        return len(self.draws)

    @property
    def total_removed(self) -> float:
        return math.fsum(w for _, w in self.draws)

    @property
    def destroyed(self) -> list:
        last = len(self.draws) - (1 if self.residual_used > 0.0 else 0)
        return [k for k, _ in self.draws[:last]]


# -- phase distributions -----------------------------------------------------


def three_point_phase(theta: float, rng) -> float:
    """1 with probability theta, +i or -i with probability (1 - theta)/2 each."""
    u = rng.random()
    if u < theta:
        return 0.0
    if u < theta + 0.5 * (1.0 - theta):
        return HALF_PI
    return THREE_HALF_PI


def deterministic_phase(theta: float, rng) -> float:
    # ablation only: always 1, so the mean constraint is violated
    return 0.0


_NAMED = {
    "three-point": three_point_phase,
    "deterministic-real": deterministic_phase,
}


def resolve_phase_dist(dist) -> Callable:
    if dist is None:
        return three_point_phase
    if isinstance(dist, str):
        try:
            return _NAMED[dist]
        except KeyError:
            raise ValueError(f"unknown phase distribution {dist!r}") from None
    if callable(dist):
        return dist
    raise ValueError("phase distribution must be a name or a callable")


def nsf_phase_mean(x: float, eps_prime: float) -> float:
    """Required mean of exp(i*xi) for an NSF removing eps_prime from weight x."""
    return math.sqrt(1.0 - eps_prime / x)


def psf_phase_mean(x_prime: float, eps: float) -> float:
    """Required mean of exp(i*eta) for a PSF adding eps to weight x_prime."""
    return 1.0 / math.sqrt(1.0 + eps / x_prime)


# -- list kernels --------------------------------------------------------------


def _select(weights: list, u: float) -> int:
    # probability x_k / sum(weights); zeros are never returned
    target = u * sum(weights)
    acc = 0.0
    last = -1
    for k, w in enumerate(weights):
        if w > 0.0:
            acc += w
            last = k
            if target < acc:
                return k
    if last < 0:
        raise ValueError("cannot draw a packet: every packet is destroyed")
    return last


def nsf_cascade_inplace(weights: list, phases: list, eps: float, rng, phase_fn) -> tuple:
    """Run one NSF cascade on mutable lists.

    Returns ``(draws, residual_used)``. The running deficit is ``eps`` minus
    the exactly-rounded sum of the weights removed so far, so the final loss
    is eps by construction (to ``DESTROY_TOL`` when a packet sitting on the
    deficit is destroyed).
    """
    draws = []
    removed = []
    deficit = eps
    while True:
        k = _select(weights, rng.random())
        x = weights[k]
        if x <= deficit + DESTROY_TOL:
            # x == deficit: sqrt(1 - deficit/x) vanishes, route to destroy
            weights[k] = 0.0
            phases[k] = 0.0
            draws.append((k, x))
            removed.append(x)
            deficit = eps - math.fsum(removed)
            if deficit <= DESTROY_TOL:
                return draws, 0.0
        else:
            angle = phase_fn(math.sqrt(1.0 - deficit / x), rng)
            weights[k] = x - deficit
            if angle != 0.0:
                phases[k] = _wrap(phases[k] + angle)
            draws.append((k, deficit))
            return draws, deficit


def psf_inplace(weights: list, phases: list, eps: float, rng, phase_fn) -> int:
    """Add eps to one packet drawn in proportion to weight; returns its index."""
    k = _select(weights, rng.random())
    x = weights[k]
    angle = phase_fn(1.0 / math.sqrt(1.0 + eps / x), rng)
    weights[k] = x + eps
    if angle != 0.0:
        phases[k] = _wrap(phases[k] + angle)
    return k


# -- public operators ------------------------------------------------------------


def draw_packet(state: WaveState, rng) -> int:
    """Index k drawn with probability x_k / total_weight(state)."""
    return _select(list(state.weights), rng.random())


def sample_phase_negative(x: float, eps_prime: float, rng, dist=None) -> PhaseSample:
    if not eps_prime > 0.0:
        raise ValueError(f"eps_prime must be > 0, got {eps_prime}")
    if x < eps_prime:
        raise ValueError(
            f"weight {x} is below the loss {eps_prime}: the packet must be destroyed"
        )
    fn = resolve_phase_dist(dist)
    return PhaseSample(fn(nsf_phase_mean(x, eps_prime), rng))


def sample_phase_positive(x_prime: float, eps: float, rng, dist=None) -> PhaseSample:
    if not x_prime > 0.0:
        raise ValueError(f"x_prime must be > 0, got {x_prime}")
    fn = resolve_phase_dist(dist)
    return PhaseSample(fn(psf_phase_mean(x_prime, eps), rng))


def apply_nsf_single(state: WaveState, k: int, eps_prime: float, phase: PhaseSample) -> WaveState:
    """Remove eps_prime from packet k, or destroy it if its weight does not exceed eps_prime."""
    x = state.weights[k]
    if x == 0.0:
        raise ValueError(f"packet {k} is already destroyed")
    weights = list(state.weights)
    phases = list(state.phases)
    if x <= eps_prime + DESTROY_TOL:
        weights[k] = 0.0
        phases[k] = 0.0
    else:
        weights[k] = x - eps_prime
        if phase.angle != 0.0:
            phases[k] = _wrap(phases[k] + phase.angle)
    return WaveState._raw(weights, phases)


def apply_nsf_cascade(state: WaveState, eps: float, rng, dist=None) -> tuple:
    """Negative semi-fluctuation with cascade; returns ``(state, CascadeRecord)``.

    Packets whose weight does not cover the remaining deficit are destroyed
    and the draw is repeated over the survivors; the last drawn packet loses
    exactly the remaining deficit. The output norm is ``total - eps``.
    """
    if state.total_weight() <= eps:
        raise ValueError("state norm must exceed eps for an NSF cascade")
    weights = list(state.weights)
    phases = list(state.phases)
    draws, residual = nsf_cascade_inplace(weights, phases, eps, rng, resolve_phase_dist(dist))
    return WaveState._raw(weights, phases), CascadeRecord(draws, residual)


def apply_psf(state: WaveState, eps: float, rng, dist=None) -> WaveState:
    """Positive semi-fluctuation: one packet gains exactly eps."""
    total = state.total_weight()
    if abs(total - (1.0 - eps)) > PSF_NORM_TOL:
        raise ValueError(f"PSF expects a state of norm 1 - eps = {1.0 - eps!r}, got {total!r}")
    weights = list(state.weights)
    phases = list(state.phases)
    psf_inplace(weights, phases, eps, rng, resolve_phase_dist(dist))
    return WaveState._raw(weights, phases)


def fluctuate(state: WaveState, params: FluctuationParams, rng) -> tuple:
    """One full fluctuation: NSF cascade, then PSF. Collapsed states pass through."""
    if state.is_collapsed():
        return state, CascadeRecord()
    fn = resolve_phase_dist(params.phase_dist)
    weights = list(state.weights)
    phases = list(state.phases)
    draws, residual = nsf_cascade_inplace(weights, phases, params.epsilon, rng, fn)
    psf_inplace(weights, phases, params.epsilon, rng, fn)
    return WaveState._raw(weights, phases), CascadeRecord(draws, residual)
