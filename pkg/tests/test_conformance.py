import json
import math
import warnings

import numpy as np
import pytest
from scipy.stats import norm

from collapse_sim.conformance import (
    CHECKS,
    CheckItem,
    CheckReport,
    ConformanceConfig,
    _small_cascade_bound,
    cascade_expectation,
    check_additivity,
    check_measurement_axiom,
    check_nsf_means,
    check_psf_means,
    check_spectral,
    check_walk_equivalence,
    merge_pair,
    run_checks,
)
from collapse_sim.walk import two_packet_survival

# default configuration grid: mixed small (< eps) and large packets
GRID = {
    0.25: {2: (0.25, 0.75), 3: (0.1, 0.15, 0.75), 5: (0.05, 0.1, 0.2, 0.3, 0.35), 16: (0.02,) * 15 + (0.7,)},
    0.1: {2: (0.05, 0.95), 3: (0.03, 0.06, 0.91), 5: (0.02, 0.08, 0.2, 0.3, 0.4), 16: (1 / 16,) * 16},
    0.05: {2: (0.025, 0.975), 3: (0.01, 0.02, 0.97), 5: (0.01, 0.04, 0.15, 0.3, 0.5),
           16: (0.01,) * 10 + (0.05, 0.1, 0.15, 0.2, 0.2, 0.2)},
}
GRID_CASES = [(eps, n, w) for eps, d in GRID.items() for n, w in d.items()]

# About 1000 statistical items are compared across the grid. A per-item 3 sigma
# test would fail ~2.5 of them by chance, so the grid uses a Bonferroni level
# keeping the family-wise false-failure rate at 1%.
GRID_ITEMS = 1000
GRID_SIGMAS = float(norm.isf(0.01 / (2 * GRID_ITEMS)))


def quiet_config(**kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return ConformanceConfig(**kw)


def describe(report):
    return report.to_text()


class TestCheckItem:
    def test_tolerance_is_bound_plus_stat(self):
        it = CheckItem("x", 1.3, 1.0, bound=0.2, stat=0.1)
        assert it.tolerance == pytest.approx(0.3)
        assert it.passed

    def test_float_floor(self):
        assert CheckItem("x", 1e-13, 0.0).passed
        assert not CheckItem("x", 1e-11, 0.0).passed

    def test_report_semantics(self):
        r = CheckReport("demo", n_samples=5)
        r.add("a", 1.0, 1.0)
        assert r.passed
        r.add("b", 2.0, 1.0, bound=0.5)
        assert not r.passed and [i.label for i in r.failures()] == ["b"]
        d = r.to_dict()
        json.dumps(d)
        assert d["items"][1]["passed"] is False and d["n_samples"] == 5
        assert r.to_text().startswith("[FAIL] demo")


class TestCascadeExpectation:
    def test_large_packets_contract_exactly(self):
        w, c = cascade_expectation((0.3, 0.7), 0.1)
        np.testing.assert_allclose(w, [0.27, 0.63], atol=1e-15)
        np.testing.assert_allclose(c, [0.9, 0.9], atol=1e-15)

    def test_half_eps_packet_hits_max_deviation(self):
        # frozen: x = eps/2 gives delta = eps^2/4 exactly
        w, c = cascade_expectation((0.05, 0.95), 0.1)
        assert w[0] - 0.9 * 0.05 == pytest.approx(0.0025, abs=1e-15)
        assert c[0] == pytest.approx(0.95)

    def test_three_packets_frozen(self):
        w, c = cascade_expectation((0.03, 0.06, 0.91), 0.1)
        np.testing.assert_allclose(w, [0.029042553191489, 0.056288659793814, 0.814668786], atol=1e-9)
        # delta for the smallest packet, eps^2 (1 - y) a (1 - a) with a = x / (eps (1 - y))
        a = 0.03 / (0.1 * 0.94)
        assert w[0] - 0.027 == pytest.approx(0.01 * 0.94 * a * (1 - a), abs=1e-12)

    def test_mean_weight_sums_to_one_minus_eps(self):
        for eps, _, wts in GRID_CASES:
            w, _ = cascade_expectation(wts, eps)
            assert math.fsum(w) == pytest.approx(1 - eps, abs=1e-12)


def test_small_cascade_bound():
    x = np.array([0.05, 0.95])
    small = x < 0.1
    assert _small_cascade_bound(x, small, 0, 0.1) == 0.0
    x = np.full(16, 1 / 16)
    assert _small_cascade_bound(x, x < 0.1, 0, 0.1) == pytest.approx((1 / 16) / 0.9)


def test_merge_pair():
    w, m = merge_pair((0.2, 0.3, 0.5), (0, 1))
    assert m == 0 and w == pytest.approx((0.5, 0.5))


def test_config_validation():
    with pytest.raises(ValueError):
        ConformanceConfig(n_samples=1)
    with pytest.raises(ValueError):
        ConformanceConfig(weights=(0.3, 0.6))
    with pytest.raises(ValueError):
        ConformanceConfig(mean_sigmas=0.0)


def test_streams_are_distinct():
    cfg = ConformanceConfig()
    a = cfg.stream("nsf-means").random()
    b = cfg.stream("psf-means").random()
    assert a != b and a == cfg.stream("nsf-means").random()


@pytest.mark.parametrize("check", [check_nsf_means, check_psf_means, check_additivity, check_walk_equivalence])
def test_checks_pass_on_default_state(check):
    r = check(ConformanceConfig(n_samples=20_000))
    assert r.passed, describe(r)


def test_axiom_passes_on_grid_state():
    r = check_measurement_axiom(ConformanceConfig(epsilon=0.1, weights=(0.3, 0.7), n_samples=3000))
    assert r.passed, describe(r)


def test_spectral_passes_at_eps_005():
    r = check_spectral(ConformanceConfig(epsilon=0.05))
    assert r.passed, describe(r)


def test_spectral_eps_01_fails_only_on_ratio():
    r = check_spectral(ConformanceConfig(epsilon=0.1))
    assert [i.label for i in r.failures()] == ["T2 / (tau / 2 eps^2)"]
    assert r.failures()[0].measured == pytest.approx(0.88996, abs=1e-5)


@pytest.mark.filterwarnings("ignore:epsilon=")
def test_spectral_needs_ten_grid_steps():
    with pytest.raises(ValueError):
        check_spectral(quiet_config(epsilon=0.25))


def test_walk_rejects_edge_x():
    with pytest.raises(ValueError):
        check_walk_equivalence(ConformanceConfig(walk_x=0.05))


def test_additivity_edge_cases():
    all_pair = check_additivity(ConformanceConfig(weights=(0.2, 0.3, 0.5), pair=(0, 1, 2), n_samples=2000))
    assert all_pair.passed
    freq = next(i for i in all_pair.items if i.label == "pair frequency")
    assert freq.measured == 1.0
    with_dead = check_additivity(ConformanceConfig(weights=(0.0, 0.3, 0.7), pair=(0, 1), n_samples=2000))
    assert with_dead.passed
    with pytest.raises(ValueError):
        check_additivity(ConformanceConfig(pair=(0, 5)))


def test_psf_single_live_packet():
    r = check_psf_means(ConformanceConfig(weights=(0.0, 1.0), n_samples=200))
    assert r.passed
    w = next(i for i in r.items if i.label == "mean weight[1]")
    assert w.measured == pytest.approx(1.0) and w.stat == 0.0


def test_ablation_is_detected():
    # a real phase factor breaks the mean-amplitude identities
    r = check_nsf_means(ConformanceConfig(n_samples=5000, phase_dist="deterministic-real"))
    assert not r.passed
    assert any(i.label.startswith("c-") for i in r.failures())


def test_statistical_term_shrinks_with_samples():
    a = check_nsf_means(ConformanceConfig(weights=(0.05, 0.95), n_samples=4000))
    b = check_nsf_means(ConformanceConfig(weights=(0.05, 0.95), n_samples=16000))
    for ia, ib in zip(a.items, b.items):
        assert ia.bound == ib.bound
        if ia.stat > 0:
            assert ib.stat == pytest.approx(ia.stat / 2, rel=0.1)


@pytest.mark.filterwarnings("ignore:epsilon=")
def test_run_checks_all_skips_inapplicable():
    reps = run_checks(quiet_config(epsilon=0.3, n_samples=500))
    skipped = {r.name for r in reps if r.skipped}
    assert skipped == {"spectral"}
    assert len(reps) == len(CHECKS)


@pytest.mark.filterwarnings("ignore:epsilon=")
def test_run_checks_named_inapplicable_raises():
    with pytest.raises(ValueError):
        run_checks(quiet_config(epsilon=0.3, n_samples=500), ["spectral"])
    with pytest.raises(ValueError):
        run_checks(ConformanceConfig(), ["nope"])


def test_checks_are_deterministic():
    cfg = ConformanceConfig(n_samples=3000)
    assert check_nsf_means(cfg).to_dict() == check_nsf_means(cfg).to_dict()


@pytest.mark.parametrize("eps, n, weights", GRID_CASES, ids=[f"eps{e}-n{n}" for e, n, _ in GRID_CASES])
def test_grid_operator_checks(eps, n, weights):
    cfg = quiet_config(epsilon=eps, weights=weights, n_samples=20_000, seed=7,
                       mean_sigmas=GRID_SIGMAS, freq_sigmas=GRID_SIGMAS)
    for name in ("nsf-means", "psf-means", "additivity"):
        r = CHECKS[name](cfg)
        assert r.passed, describe(r)


@pytest.mark.parametrize("eps", sorted(GRID))
def test_grid_walk(eps):
    r = check_walk_equivalence(quiet_config(epsilon=eps, n_samples=100_000, freq_sigmas=GRID_SIGMAS))
    assert r.passed, describe(r)


# survival equals weight where every weight is a multiple of eps, or by symmetry
AXIOM_OK = [(0.25, (0.25, 0.75)), (0.1, (1 / 16,) * 16), (0.05, (0.3, 0.7)), (0.1, (0.2, 0.3, 0.5))]


@pytest.mark.parametrize("eps, weights", AXIOM_OK)
def test_grid_axiom_on_lattice(eps, weights):
    r = check_measurement_axiom(quiet_config(epsilon=eps, weights=weights, n_samples=3000,
                                             mean_sigmas=GRID_SIGMAS))
    assert r.passed, describe(r)


@pytest.mark.xfail(strict=True, reason="off-lattice weights: survival of a packet below eps is not its weight")
def test_grid_axiom_off_lattice():
    r = check_measurement_axiom(ConformanceConfig(epsilon=0.1, weights=(0.05, 0.95), n_samples=4000))
    assert r.passed, describe(r)


def test_off_lattice_matches_exact_chain():
    # the simulator agrees with the exact two-packet chain, so the defect is the model's
    r = check_measurement_axiom(ConformanceConfig(epsilon=0.1, weights=(0.05, 0.95), n_samples=4000))
    chain = next(i for i in r.items if i.label == "survival[0] vs two-packet chain")
    assert chain.passed
    assert chain.expected == pytest.approx(0.095, abs=1e-12)
    assert two_packet_survival(0.3, 0.1) == pytest.approx(0.3, abs=1e-12)
