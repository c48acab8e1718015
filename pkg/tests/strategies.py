"""Shared hypothesis strategies."""

import math

from hypothesis import strategies as st

from collapse_sim.state import new_state


@st.composite
def weight_vectors(draw, min_size=2, max_size=8, allow_zero=False):
    n = draw(st.integers(min_size, max_size))
    lo = 0.0 if allow_zero else 1e-3
    raw = draw(st.lists(st.floats(lo, 1.0), min_size=n, max_size=n))
    total = math.fsum(raw)
    if total == 0.0:
        raw[0] = 1.0
        total = 1.0
    return [w / total for w in raw]


@st.composite
def states(draw, min_size=2, max_size=8):
    w = draw(weight_vectors(min_size, max_size))
    ph = draw(st.lists(st.floats(-10.0, 10.0), min_size=len(w), max_size=len(w)))
    return new_state(w, ph)


# epsilons with an integer reciprocal, so the walk grid exists
grid_epsilons = st.sampled_from([0.5, 0.25, 0.2, 0.1, 0.05, 0.04, 0.02, 0.01])
