import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from collapse_sim.rng import Stream
from collapse_sim.walk import (
    WalkGrid,
    absorption_oracle,
    band_survival,
    combined_scheme,
    effective_probs,
    generic_scheme,
    simulate_walk,
    transition_probs,
)

from strategies import grid_epsilons

Q_CHOICES = {
    "zero": lambda x: 0.0,
    "const": lambda x: 0.6,
    "wavy": lambda x: 0.5 + 0.4 * math.sin(7.0 * x),
}


def test_grid():
    g = WalkGrid(0.25)
    assert g.M == 4
    np.testing.assert_array_equal(g.points, [0, 0.25, 0.5, 0.75, 1])
    assert g.index_of(0.75) == 3
    with pytest.raises(ValueError):
        g.index_of(0.37)
    with pytest.raises(ValueError):
        WalkGrid(0.3)
    with pytest.raises(ValueError):
        WalkGrid(0.75)


def test_combined_interior_probs():
    p, q, r = transition_probs(0.5, combined_scheme(0.1))
    assert p == pytest.approx(0.25 / 0.9)
    assert r == p
    assert q == pytest.approx(1 - 0.5 / 0.9)


def test_boundary_rows_absorb():
    for x in (0.0, 1.0):
        assert transition_probs(x, combined_scheme(0.1)) == (0.0, 1.0, 0.0)


def test_edge_band_rows_sum_to_one():
    s = generic_scheme(0.1, Q_CHOICES["const"])
    for x in (0.03, 0.97, 0.5):
        p, q, r = transition_probs(x, s)
        assert p + q + r == pytest.approx(1.0)
    p, q, r = transition_probs(0.03, s)
    # down move destroys the packet: weight ratio eps : x
    assert p / r == pytest.approx(0.1 / 0.03)


def test_transition_probs_validation():
    with pytest.raises(ValueError):
        transition_probs(1.5, combined_scheme(0.1))
    with pytest.raises(ValueError):
        transition_probs(0.5, generic_scheme(0.1, lambda x: 1.5))
    with pytest.raises(ValueError):
        generic_scheme(0.1, None)


def test_effective_probs():
    assert effective_probs(0.2, 0.6, 0.2) == (0.5, 0.5)
    with pytest.raises(ValueError):
        effective_probs(0.0, 1.0, 0.0)


def test_oracle_frozen_values():
    assert absorption_oracle(combined_scheme(0.25), 0.5) == pytest.approx(0.5, abs=1e-10)
    assert absorption_oracle(combined_scheme(0.25), 0.0) == 0.0
    assert absorption_oracle(combined_scheme(0.25), 1.0) == 1.0
    assert absorption_oracle(combined_scheme(0.01), 0.37) == pytest.approx(0.37, abs=1e-10)
    assert absorption_oracle(generic_scheme(0.25, Q_CHOICES["zero"]), 0.5) == pytest.approx(0.5)


def test_oracle_off_grid():
    with pytest.raises(ValueError):
        absorption_oracle(combined_scheme(0.25), 0.37)


@given(grid_epsilons, st.sampled_from(sorted(Q_CHOICES)), st.data())
def test_oracle_identity(eps, qname, data):
    grid = WalkGrid(eps)
    m = data.draw(st.integers(0, grid.M))
    x0 = m / grid.M
    for scheme in (combined_scheme(eps), generic_scheme(eps, Q_CHOICES[qname])):
        assert abs(absorption_oracle(scheme, x0) - x0) <= 1e-10


def test_band_survival_equals_x_only_for_generic_rows():
    s = generic_scheme(0.1, Q_CHOICES["const"])
    assert band_survival(s, 0.03) == pytest.approx(0.03)
    assert band_survival(s, 0.97) == pytest.approx(0.97)
    with pytest.raises(ValueError):
        band_survival(s, 0.5)


def test_simulate_walk_matches_oracle():
    eps, x0, n = 0.1, 0.3, 4000
    scheme = combined_scheme(eps)
    hits = 0
    for i in range(n):
        end, steps = simulate_walk(scheme, x0, Stream(21, i))
        assert end in (0, 1) and steps >= 1
        hits += end
    assert abs(hits / n - x0) < 4 * math.sqrt(x0 * (1 - x0) / n)


def test_simulate_walk_budget_and_stuck():
    end, steps = simulate_walk(combined_scheme(0.01), 0.5, Stream(0), max_steps=10)
    assert end is None and steps == 10
    end, _ = simulate_walk(generic_scheme(0.25, lambda x: 1.0 if 0 < x < 1 else 1.0), 0.5, Stream(0))
    assert end is None
    assert simulate_walk(combined_scheme(0.25), 1.0, Stream(0)) == (1, 0)
