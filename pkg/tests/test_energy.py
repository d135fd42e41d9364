"""Tests for the pairwise energy, its linearization, and the experiment."""

import math

import numpy as np
import pytest

from foamlab import (CubeTiling, DomainError, EnergyParams, coordinate_load,
                     coordinate_loads, energy, is_good, linearized_energy,
                     linearized_energy_batch, run_lb_experiment)
from foamlab.sampling import philox_generator, TAG_MC


def test_energy_two_point_exact_values():
    Z = 3.0
    # equal coordinates sit at gap distance exactly 1
    assert energy([0.25, 0.25], Z) == pytest.approx(math.exp(-Z), rel=1e-15)
    # a pair differing by exactly one integer has gap distance 0
    assert energy([0.25, 1.25], Z) == pytest.approx(1.0, rel=1e-15)
    # half-integer separation: the nearest nonzero-integer shift misses by 1/2
    assert energy([0.25, 0.75], Z) == pytest.approx(math.exp(-Z / 2), rel=1e-15)


def test_energy_permutation_invariant_bit_exact():
    rng = np.random.default_rng(0)
    a = rng.uniform(0, 1, 40)
    Z = 12.0
    base = energy(a, Z, method="reference")
    for _ in range(5):
        assert energy(rng.permutation(a), Z, method="reference") == base


def test_energy_joint_translation_invariant_on_dyadic_points():
    # the gap distance only respects translating every coordinate by the
    # same integer; per-coordinate shifts change it (that is by design)
    rng = np.random.default_rng(1)
    a = rng.integers(0, 2 ** 20, 30) * 2.0 ** -20
    Z = 8.0
    for c in (-2, 3):
        assert energy(a + c, Z) == energy(a, Z)


def test_sorted_method_agrees_with_reference():
    rng = np.random.default_rng(2)
    a = rng.uniform(0, 1, 512)
    Z = 500.0  # window well below 1/2, so the pruned path is exercised
    ref = energy(a, Z, method="reference")
    fast = energy(a, Z, method="sorted")
    assert fast == pytest.approx(ref, rel=1e-9)


def test_sorted_method_degenerates_to_reference_for_small_z():
    rng = np.random.default_rng(3)
    a = rng.uniform(0, 1, 100)
    Z = 2.0  # window >= 1/2: no pruning is valid, paths must coincide
    assert energy(a, Z, method="sorted") == energy(a, Z, method="reference")


def test_linearized_energy_at_zero_direction_is_the_energy():
    rng = np.random.default_rng(4)
    a = rng.uniform(0, 1, 64)
    Z = 10.0
    got = linearized_energy(a, np.zeros(64), Z)
    assert got == pytest.approx(energy(a, Z), rel=1e-12)


def test_linearized_energy_single_pair_closed_form():
    Z = 5.0
    a = np.array([0.2, 0.3])
    u = np.array([0.01, -0.02])
    # gap distance 0.9, gap sign +1 (ties toward positive shifts)
    expect = math.exp(-Z * (0.9 + 1.0 * (u[0] - u[1])))
    assert linearized_energy(a, u, Z) == pytest.approx(expect, rel=1e-12)
    # flipping the pair flips which coordinate leads
    expect_flip = math.exp(-Z * (0.9 - 1.0 * (u[0] - u[1])))
    assert linearized_energy(a[::-1].copy(), u, Z) == pytest.approx(
        expect_flip, rel=1e-12)


def test_linearized_batch_matches_loop():
    rng = np.random.default_rng(5)
    a = rng.uniform(0, 1, 48)
    U = rng.normal(0, 0.01, (20, 48))
    Z = 6.0
    batch = linearized_energy_batch(a, U, Z)
    for i in range(U.shape[0]):
        assert batch[i] == pytest.approx(linearized_energy(a, U[i], Z),
                                         rel=1e-12)


def test_expectation_identity_monte_carlo():
    """Mean of the linearized energy under Gaussian directions."""
    n = 64
    params = EnergyParams.defaults(n)
    rng = philox_generator(0, TAG_MC)
    a = rng.uniform(0, 1, n)
    N = 40000
    U = params.sigma * philox_generator(1, TAG_MC).standard_normal((N, n))
    vals = linearized_energy_batch(a, U, params.Z)
    mean = vals.mean()
    stderr = vals.std(ddof=1) / math.sqrt(N)
    expect = energy(a, params.Z) * math.exp((params.Z * params.sigma) ** 2)
    assert abs(mean - expect) <= 4 * stderr


def test_coordinate_loads_sum_to_twice_the_energy():
    rng = np.random.default_rng(6)
    a = rng.uniform(0, 1, 80)
    Z = 9.0
    loads = coordinate_loads(a, Z)
    assert loads.shape == (80,)
    assert loads.sum() == pytest.approx(2 * energy(a, Z), rel=1e-12)
    for i in (0, 17, 79):
        assert coordinate_load(a, i, Z) == pytest.approx(loads[i], rel=1e-12)


def test_is_good_for_spread_and_clustered_configurations():
    n = 64
    spread = (np.arange(n) + 0.5) / n
    assert is_good(spread)
    clustered = np.full(n, 0.5) + np.linspace(0, 1e-4, n)
    assert not is_good(clustered)


def test_is_good_trivial_for_small_n():
    # window length 10 ln(n)/n >= 1 makes every window the whole circle
    assert is_good(np.linspace(0, 0.9, 8))


def test_is_good_holds_for_uniform_points_at_scale():
    rng = philox_generator(2, TAG_MC)
    hits = sum(bool(is_good(rng.uniform(0, 1, 4096))) for _ in range(20))
    assert hits == 20


def test_energy_params_defaults():
    n = 1024
    p = EnergyParams.defaults(n)
    assert p.Z == pytest.approx(n / (10 * math.log(n)))
    assert p.sigma == pytest.approx(math.sqrt(math.log(n)) / n)
    half = EnergyParams.defaults(n, sigma_scale=0.5)
    assert half.sigma == pytest.approx(0.5 * p.sigma)


def test_energy_input_validation():
    with pytest.raises(DomainError):
        energy([0.5], 3.0)
    with pytest.raises(DomainError):
        energy([0.2, 0.4], 0.0)
    with pytest.raises(DomainError):
        energy([0.2, 0.4], 3.0, method="telepathy")


def test_lb_experiment_report_sanity():
    body = CubeTiling(64)
    rep = run_lb_experiment(body, n_samples=400, seed=3, k_subdiv=8)
    assert rep.n == 64
    assert rep.escape_rate.n_samples == 400
    for name in ("e1", "e2", "e3", "e4", "e5", "escape_rate",
                 "pr_energy_forward_gt_backward", "goodness_rate"):
        est = getattr(rep, name)
        assert 0.0 <= est.value <= 1.0
    # forward vs backward perturbations are exchangeable
    fwd = rep.pr_energy_forward_gt_backward
    assert fwd.value <= 0.5 + 4 * fwd.stderr
    # uniform points at n = 64 are good essentially always
    assert rep.goodness_rate.value >= 0.95


def test_lb_experiment_is_reproducible():
    body = CubeTiling(16)
    a = run_lb_experiment(body, n_samples=200, seed=5, k_subdiv=4)
    b = run_lb_experiment(body, n_samples=200, seed=5, k_subdiv=4)
    assert a.escape_rate == b.escape_rate
    assert a.e4 == b.e4
