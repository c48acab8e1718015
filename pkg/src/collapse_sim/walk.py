"""Single-packet weight random walk and its exact absorption oracle.

A packet of weight x moves to x - eps, stays, or moves to x + eps with
probabilities (p, q, r). ``generic`` schemes take the miss probability q(x)
as a free function; the ``combined`` scheme fixes it from the joint NSF/PSF
hit probabilities, p = r = x(1 - x)/(1 - eps) on [eps, 1 - eps].
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded

__all__ = [
    "WalkGrid",
    "TransitionScheme",
    "combined_scheme",
    "generic_scheme",
    "transition_probs",
    "effective_probs",
    "absorption_oracle",
    "band_survival",
    "two_packet_survival",
    "simulate_walk",
]

GRID_TOL = 1e-12
# an x0 is on the grid if it is this close to m*eps
ONGRID_TOL = 1e-9


@dataclass(frozen=True)
class WalkGrid:
    """Weights x = m*eps, m = 0..M, with M = 1/eps."""

    eps: float

    def __post_init__(self):
        if not (0.0 < self.eps < 1.0):
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        M = round(1.0 / self.eps)
        if M < 2 or abs(M * self.eps - 1.0) > GRID_TOL:
            raise ValueError(f"1/eps must be an integer >= 2, got 1/{self.eps} = {1.0 / self.eps!r}")

    @property
    def M(self) -> int:
        return round(1.0 / self.eps)

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.M + 1) / self.M

    def index_of(self, x: float) -> int:
        m = round(x * self.M)
        if not (0 <= m <= self.M) or abs(m / self.M - x) > ONGRID_TOL:
            raise ValueError(f"x0={x} is not on the grid of step {self.eps}")
        return m


@dataclass(frozen=True)
class TransitionScheme:
    eps: float
    kind: str = "combined"
    q_function: Optional[Callable[[float], float]] = None

    def __post_init__(self):
        if not (0.0 < self.eps < 1.0):
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if self.kind not in ("combined", "generic"):
            raise ValueError(f"unknown scheme kind {self.kind!r}")
        if self.kind == "generic" and self.q_function is None:
            raise ValueError("a generic scheme needs a q_function")

    @property
    def grid(self) -> WalkGrid:
        return WalkGrid(self.eps)

    def q(self, x: float) -> float:
        if self.kind == "combined":
            return 1.0 - 2.0 * x * (1.0 - x) / (1.0 - self.eps)
        return float(self.q_function(x))


def combined_scheme(eps: float) -> TransitionScheme:
    return TransitionScheme(eps, "combined")


def generic_scheme(eps: float, q_function: Callable[[float], float]) -> TransitionScheme:
    return TransitionScheme(eps, "generic", q_function)


def transition_probs(x: float, scheme: TransitionScheme) -> tuple:
    """(p, q, r) = probabilities of x -> x - eps, x -> x, x -> x + eps."""
    if not (0.0 <= x <= 1.0):
        raise ValueError(f"x must lie in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0, 1.0, 0.0
    eps = scheme.eps
    if scheme.kind == "combined" and eps <= x <= 1.0 - eps:
        p = x * (1.0 - x) / (1.0 - eps)
        return p, 1.0 - 2.0 * p, p
    q = scheme.q(x)
    if not (0.0 <= q <= 1.0):
        raise ValueError(f"q({x}) = {q} is not a probability")
    move = 1.0 - q
    if x < eps:
        return eps * move / (x + eps), q, x * move / (x + eps)
    if x > 1.0 - eps:
        return (1.0 - x) * move / (1.0 - x + eps), q, eps * move / (1.0 - x + eps)
    return 0.5 * move, q, 0.5 * move


def effective_probs(p: float, q: float, r: float) -> tuple:
    """Leave-down / leave-up probabilities once idle strokes are summed out."""
    s = p + r
    if not s > 0.0:
        raise ValueError("p + r = 0: absorbing point, no effective move")
    return p / s, r / s


def absorption_oracle(scheme: TransitionScheme, x0: float) -> float:
    """Exact probability that a walk started at grid point x0 is absorbed at 1.

    Solves w_m = P_m w_{m-1} + R_m w_{m+1}, w_0 = 0, w_M = 1 in effective
    probabilities, so idle strokes never enter.
    """
    grid = scheme.grid
    m0 = grid.index_of(x0)
    M = grid.M
    if m0 == 0:
        return 0.0
    if m0 == M:
        return 1.0
    n = M - 1
    ab = np.zeros((3, n))
    rhs = np.zeros(n)
    for i in range(n):
        m = i + 1
        P, R = effective_probs(*transition_probs(m / M, scheme))
        ab[1, i] = 1.0
        if i > 0:
            ab[2, i - 1] = -P  # row i, column i-1
        if i < n - 1:
            ab[0, i + 1] = -R  # row i, column i+1
        else:
            rhs[i] = R  # w_M = 1
    w = solve_banded((1, 1), ab, rhs)
    return float(w[m0 - 1])


def band_survival(scheme: TransitionScheme, x: float) -> float:
    """Survival probability for an off-grid x in the edge bands (0, eps) or (1 - eps, 1).

    One effective step lands on 0 or 1 or on a point of the interior band,
    where the symmetric walk survives with probability equal to its weight.
    """
    eps = scheme.eps
    P, R = effective_probs(*transition_probs(x, scheme))
    if 0.0 < x < eps:
        return R * (x + eps)
    if 1.0 - eps < x < 1.0:
        return P * (x - eps) + R
    raise ValueError(f"x={x} is not in an edge band of width {eps}")


def two_packet_survival(x0: float, eps: float) -> float:
    """Exact survival probability of packet 0 in a two-packet state (x0, 1 - x0).

    Works for any x0, on the eps grid or not. The weight stays on the
    lattice x0 + j*eps; one fluctuation moves it down with probability
    x(1 - x)/(1 - eps) (or destroys it with probability x when x <= eps) and
    up with probability x*y/(1 - eps) (or absorbs at 1 with probability y
    when y = 1 - x <= eps).
    """
    if not (0.0 < eps < 1.0):
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if not (0.0 <= x0 <= 1.0):
        raise ValueError(f"x0 must lie in [0, 1], got {x0}")
    if x0 == 0.0 or x0 == 1.0:
        return x0
    tol = 1e-13  # same destruction tolerance as the operators
    j_lo = -math.floor((x0 - tol) / eps)
    j_hi = math.floor((1.0 - x0 - tol) / eps)
    xs = [x0 + j * eps for j in range(j_lo, j_hi + 1)]
    n = len(xs)
    ab = np.zeros((3, n))
    rhs = np.zeros(n)
    for i, x in enumerate(xs):
        y = 1.0 - x
        p = x if x <= eps + tol else x * y / (1.0 - eps)
        r = y if y <= eps + tol else x * y / (1.0 - eps)
        s = p + r
        ab[1, i] = 1.0
        if i > 0:
            ab[2, i - 1] = -p / s
        if i < n - 1:
            ab[0, i + 1] = -r / s
        else:
            rhs[i] = r / s
    h = solve_banded((1, 1), ab, rhs)
    return float(h[-j_lo])


def simulate_walk(scheme: TransitionScheme, x0: float, rng, max_steps: int = 10**8) -> tuple:
    """One Monte Carlo walk; returns ``(absorbed_at, steps)``.

    ``absorbed_at`` is 0, 1, or None when max_steps is exhausted. Idle
    strokes are skipped in bulk with one geometric draw per move, so a move
    costs 2 uniforms (1 where q = 0).
    """
    grid = scheme.grid
    M = grid.M
    m = grid.index_of(x0)
    probs = [transition_probs(k / M, scheme) for k in range(M + 1)]
    steps = 0
    while 0 < m < M:
        p, q, r = probs[m]
        if q >= 1.0:
            return None, max_steps
        if q > 0.0:
            # idle strokes before the next move: P(idle >= k) = q**k
            steps += int(math.log(1.0 - rng.random()) / math.log(q)) + 1
        else:
            steps += 1
        if steps > max_steps:
            return None, max_steps
        if rng.random() * (p + r) < p:
            m -= 1
        else:
            m += 1
    return (1 if m == M else 0), steps
