"""Tests for step families, escape estimators, and needle surface areas."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from foamlab import (BernoulliSteps, CalibrationError, CubeTiling,
                     DisjointBernoulliSteps, DomainError, FoamTiling,
                     GaussianSteps, count_crossings,
                     estimate_condition_failure, estimate_escape,
                     estimate_noise_sensitivity, estimate_surface_area)
from foamlab.sampling import philox_generator, TAG_MC


def test_gaussian_steps_moments():
    fam = GaussianSteps(8, 0.25)
    rng = philox_generator(0, TAG_MC)
    U = fam.sample(rng, 20000)
    assert U.shape == (20000, 8)
    assert abs(U.mean()) < 4 * 0.25 / math.sqrt(U.size)
    assert U.std() == pytest.approx(0.25, rel=0.02)


def test_bernoulli_steps_support_and_rates():
    fam = BernoulliSteps(6, 0.25, cycle=12)
    rng = philox_generator(1, TAG_MC)
    U = fam.sample(rng, 20000)
    vals = np.unique(U)
    np.testing.assert_allclose(vals, [-1.0 / 12, 0.0, 1.0 / 12])
    up = (U > 0).mean()
    down = (U < 0).mean()
    se = math.sqrt(0.25 * 0.75 / U.size)
    assert abs(up - 0.25) < 4 * se
    assert abs(down - 0.25) < 4 * se


def test_bernoulli_cycle_defaults_to_dimension():
    fam = BernoulliSteps(10, 0.25)
    rng = philox_generator(2, TAG_MC)
    U = fam.sample(rng, 100)
    assert set(np.unique(np.abs(U))) <= {0.0, 0.1}


def test_disjoint_pair_never_overlaps_and_sums_to_bernoulli():
    fam = DisjointBernoulliSteps(5, 0.25, cycle=10)
    rng = philox_generator(3, TAG_MC)
    U1, U2 = fam.sample_pair(rng, 20000)
    # disjoint support coordinate by coordinate
    assert not np.any((U1 != 0) & (U2 != 0))
    total = U1 + U2
    up = (total > 0).mean()
    se = math.sqrt(0.25 * 0.75 / total.size)
    assert abs(up - 0.25) < 4 * se
    # each leg individually is a Bernoulli(eps/2) step
    leg = (U1 != 0).mean()
    se_leg = math.sqrt(0.25 * 0.75 / U1.size)
    assert abs(leg - 0.25) < 4 * se_leg


def test_step_families_validate_inputs():
    with pytest.raises(DomainError):
        GaussianSteps(4, 0.0)
    with pytest.raises(DomainError):
        BernoulliSteps(4, 0.6)  # 2*eps would exceed 1
    with pytest.raises(DomainError):
        DisjointBernoulliSteps(4, -0.1)


def cube_ns_oracle(n, sigma):
    """Closed-form noise sensitivity of the unit cube under Gaussian steps.

    A uniform coordinate escapes [0,1) with probability
    q = 2 * int_0^1 Phi(-x / sigma) dx and coordinates are independent.
    """
    q = 2 * quad(lambda x: norm.cdf(-x / sigma), 0.0, 1.0)[0]
    return 1.0 - (1.0 - q) ** n


def test_cube_noise_sensitivity_matches_quadrature():
    n, sigma = 64, 0.01
    body = CubeTiling(n)
    fam = GaussianSteps(n, sigma)
    est = estimate_noise_sensitivity(body, fam, 40000, seed=2)
    expect = cube_ns_oracle(n, sigma)
    assert abs(est.value - expect) <= 4 * est.stderr
    assert est.budget_errors == 0


def test_escape_with_one_checkpoint_equals_noise_sensitivity():
    """k_subdiv = 1 checks only the endpoint, which is the NS event."""
    n, sigma = 16, 0.02
    body = CubeTiling(n)
    ns = estimate_noise_sensitivity(body, GaussianSteps(n, sigma), 20000, seed=4)
    esc = estimate_escape(body, sigma, 20000, k_subdiv=1, seed=4)
    assert esc.value == ns.value
    assert esc.stderr == ns.stderr


def test_escape_is_monotone_in_subdivision():
    """Checkpoint sets nest for divisor chains, so escapes only grow."""
    n, sigma = 16, 0.05
    body = CubeTiling(n)
    values = [estimate_escape(body, sigma, 8000, k_subdiv=k, seed=5).value
              for k in (1, 4, 16)]
    assert values[0] <= values[1] <= values[2]


def test_estimators_are_worker_count_invariant():
    body = CubeTiling(16)
    fam = GaussianSteps(16, 0.02)
    a = estimate_noise_sensitivity(body, fam, 30000, seed=6, workers=1)
    b = estimate_noise_sensitivity(body, fam, 30000, seed=6, workers=3)
    assert a == b


def test_budget_errors_are_counted_not_fatal():
    tight = FoamTiling(n_dim=16, seed=0, max_rounds=1)
    fam = GaussianSteps(16, 0.01)
    est = estimate_noise_sensitivity(tight, fam, 2000, seed=7)
    assert est.budget_errors > 0
    assert est.n_samples + est.budget_errors == 2000
    assert 0.0 <= est.value <= 1.0


def test_count_crossings_examples():
    body = CubeTiling(2)
    assert count_crossings(body, [0.5, 0.5], [1.0, 0.0], 64) == 1
    assert count_crossings(body, [0.5, 0.5], [2.3, 0.0], 64) == 2
    assert count_crossings(body, [0.9, 0.1], [0.2, 0.0], 64) == 1
    assert count_crossings(body, [0.5, 0.5], [0.1, 0.1], 64) == 0
    # two walls crossed at distinct times are two events
    assert count_crossings(body, [0.5, 0.5], [0.8, 0.6], 64) == 2
    # an exact corner hit changes both labels at once: one event
    assert count_crossings(body, [0.5, 0.5], [0.8, 0.8], 64) == 1


def test_cube_area_is_exactly_two_n_by_self_calibration():
    body = CubeTiling(16)
    rep = estimate_surface_area(body, 1e-4, 4000, k_subdiv=32, seed=8)
    assert rep.area.value == pytest.approx(32.0)
    assert rep.area.stderr == 0.0
    assert rep.calibration_constant > 0


def test_area_scales_like_sqrt_delta():
    """A constant calibrated at one delta transfers to another."""
    body = CubeTiling(16)
    first = estimate_surface_area(body, 4e-4, 6000, k_subdiv=32, seed=9)
    second = estimate_surface_area(body, 1e-4, 6000, k_subdiv=32, seed=10,
                                   calibration_constant=first.calibration_constant)
    assert second.area.value == pytest.approx(32.0, rel=0.08)


def test_area_calibration_failure_raises():
    body = CubeTiling(4)
    with pytest.raises(CalibrationError):
        # far too few needles at a tiny delta: crossings are essentially
        # never observed and the cube anchor cannot be trusted
        estimate_surface_area(body, 1e-10, 60, k_subdiv=8, seed=11)


def test_condition_failure_grows_with_sigma():
    body = FoamTiling(n_dim=16, seed=3)
    lo = estimate_condition_failure(body, 1e-7, 3000, seed=12)
    hi = estimate_condition_failure(body, 3e-3, 3000, seed=12)
    assert lo.value <= hi.value
    assert lo.budget_errors == 0 and hi.budget_errors == 0
    assert hi.value > 0


def test_condition_failure_requires_a_foam_body():
    with pytest.raises(DomainError):
        estimate_condition_failure(CubeTiling(8), 1e-3, 100)


def test_estimates_are_reproducible():
    body = CubeTiling(8)
    fam = GaussianSteps(8, 0.03)
    assert (estimate_noise_sensitivity(body, fam, 5000, seed=13)
            == estimate_noise_sensitivity(body, fam, 5000, seed=13))
