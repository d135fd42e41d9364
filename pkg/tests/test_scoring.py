"""Tests for interval scores and the shared-stream center selection."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from foamlab import (DomainError, SamplingBudgetError, TilingParams,
                     canonical_config, center_score, choice_distribution,
                     interval_products, sample_index, select_center,
                     smooth_step)
from foamlab.scoring import _grid_fallback, _scores_sorted


def make_params(n=8, m=2, width_inv=None, **kw):
    return TilingParams.create(n, m=m, width_inv=width_inv, **kw)


def test_smooth_step_anchor_values():
    assert smooth_step(0.0) == 0.0
    assert smooth_step(1.0) == 0.0
    assert smooth_step(2.0) == 1.0
    assert smooth_step(5.0) == 1.0
    assert smooth_step(1.5) == pytest.approx(0.5)


def test_smooth_step_is_monotone_and_bounded():
    t = np.linspace(0.0, 3.0, 2001)
    v = smooth_step(t)
    assert np.all(np.diff(v) >= 0)
    assert np.all((v >= 0) & (v <= 1))


def test_smooth_step_cubic_takeoff():
    # just above 1 the ramp grows like 10 s^3, so tiny s barely scores
    s = 1e-4
    assert smooth_step(1.0 + s) == pytest.approx(10 * s**3, rel=1e-3)


def test_smooth_step_rejects_negative_and_nan():
    with pytest.raises(DomainError):
        smooth_step(-0.1)
    with pytest.raises(DomainError):
        smooth_step(float("nan"))


def test_center_score_blocked_at_midpoint_and_free_far_away():
    params = make_params(n=8, m=2, width_inv=16.0)
    # interval 0 has midpoint 0.25; a coordinate sitting there scores 0
    assert center_score(params, 0, 0.25) == 0.0
    # within one zero-radius (1/16) the score stays 0
    assert center_score(params, 0, 0.25 + 0.9 / 16) == 0.0
    # beyond twice the radius the coordinate does not constrain the center
    assert center_score(params, 0, 0.25 + 2.1 / 16) == 1.0
    with pytest.raises(DomainError):
        center_score(params, 0, 0.7)  # not in interval 0


def products_oracle(params, coords):
    """Per-interval product of ramp scores, one coordinate at a time."""
    m = params.m
    out = np.ones(m)
    for t in coords:
        j = min(int(t * m), m - 1)
        out[j] *= center_score(params, j, t)
    return out


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=50, deadline=None)
def test_interval_products_match_per_coordinate_oracle(seed):
    rng = np.random.default_rng(seed)
    n = 12
    params = TilingParams.create(n, m=3, width_inv=24.0)
    cfg = canonical_config(rng.uniform(0, 1, n))
    sv = interval_products(params, cfg)
    np.testing.assert_allclose(sv.r, products_oracle(params, cfg.coords),
                               rtol=1e-12, atol=0)
    assert sv.total == pytest.approx(sv.r.sum())


def test_scores_sorted_handles_many_rows_at_once():
    rng = np.random.default_rng(5)
    n = 10
    params = TilingParams.create(n, m=2, width_inv=20.0)
    S = np.sort(rng.uniform(0, 1, (40, n)), axis=1)
    R = _scores_sorted(params, S)
    for b in range(S.shape[0]):
        np.testing.assert_allclose(R[b], products_oracle(params, S[b]),
                                   rtol=1e-12, atol=0)


def test_choice_distribution_normalizes():
    rng = np.random.default_rng(11)
    params = TilingParams.create(16)
    cfg = canonical_config(rng.uniform(0, 1, 16))
    p = choice_distribution(params, cfg)
    assert p.shape == (params.m,)
    assert p.sum() == pytest.approx(1.0)
    assert np.all(p >= 0)


def test_choice_distribution_raises_when_everything_vanishes():
    params = make_params(n=8, m=2, width_inv=16.0)
    cfg = canonical_config([0.25, 0.75, 0.1, 0.4, 0.6, 0.8, 0.9, 0.95])
    with pytest.raises(DomainError):
        choice_distribution(params, cfg)


def test_sample_index_follows_the_distribution():
    p = np.array([0.5, 0.3, 0.2, 0.0])
    n_seeds = 4000
    counts = np.zeros(4)
    for seed in range(n_seeds):
        idx, _ = sample_index(p, seed)
        counts[idx] += 1
    freq = counts / n_seeds
    for j in range(4):
        se = math.sqrt(max(p[j] * (1 - p[j]), 1e-12) / n_seeds)
        assert abs(freq[j] - p[j]) <= 4 * se + 1e-9
    assert counts[3] == 0  # zero-probability entries are never chosen


def test_sample_index_is_deterministic_and_prefix_stable():
    p = np.full(8, 1.0 / 8)
    a = sample_index(p, seed=123)
    b = sample_index(p, seed=123)
    assert a == b
    # enlarging the budget cannot change an already-resolved draw
    idx_small, rounds = sample_index(p, seed=123, max_rounds=5000)
    idx_big, _ = sample_index(p, seed=123, max_rounds=50000)
    assert idx_small == idx_big


def test_sample_index_budget_error_is_raised():
    p = np.zeros(64)
    p[0] = 1.0
    # acceptance needs to draw interval 0 (chance 1/64 per round);
    # a couple of rounds will typically not be enough
    raised = 0
    for seed in range(20):
        try:
            sample_index(p, seed, max_rounds=2)
        except SamplingBudgetError:
            raised += 1
    assert raised > 0


def test_coupled_draws_disagree_at_most_l1_often():
    """Two nearby distributions sampled under one seed rarely disagree."""
    p = np.array([0.5, 0.3, 0.2, 0.0])
    q = np.array([0.45, 0.3, 0.2, 0.05])  # l1 distance 0.1
    l1 = float(np.abs(p - q).sum())
    n_seeds = 3000
    disagree = 0
    for seed in range(n_seeds):
        i, _ = sample_index(p, seed)
        j, _ = sample_index(q, seed)
        disagree += i != j
    rate = disagree / n_seeds
    se = math.sqrt(rate * (1 - rate) / n_seeds)
    assert rate <= l1 + 3 * se


def test_coupled_draws_identical_for_identical_distributions():
    p = np.array([0.25, 0.25, 0.25, 0.25])
    for seed in range(200):
        assert sample_index(p, seed) == sample_index(p.copy(), seed)


def test_select_center_case_a_takes_a_midpoint():
    rng = np.random.default_rng(2)
    params = TilingParams.create(27)
    cfg = canonical_config(rng.uniform(0, 1, 27))
    choice = select_center(params, cfg)
    assert choice.case_tag == "A"
    assert choice.rounds_used >= 1
    k = choice.z * params.m - 0.5
    assert k == pytest.approx(round(k), abs=1e-12)
    assert not np.any(cfg.coords == choice.z)


def test_select_center_case_b1_takes_one_half():
    params = make_params(n=8, m=2, width_inv=16.0)
    cfg = canonical_config([0.25, 0.75, 0.1, 0.4, 0.6, 0.8, 0.9, 0.95])
    choice = select_center(params, cfg)
    assert choice.case_tag == "B1"
    assert choice.z == 0.5
    assert choice.rounds_used == 0


def test_select_center_case_b2_grid_fallback():
    params = make_params(n=8, m=2, width_inv=16.0)
    cfg = canonical_config([0.25, 0.75, 0.5, 0.1, 0.4, 0.6, 0.8, 0.9])
    choice = select_center(params, cfg)
    assert choice.case_tag == "B2"
    assert choice.z == pytest.approx(1.0 / 32.0)
    assert min(np.minimum(np.abs(cfg.coords - choice.z),
                          1 - np.abs(cfg.coords - choice.z))) >= 1.0 / 32.0


def test_select_center_is_deterministic():
    rng = np.random.default_rng(9)
    params = TilingParams.create(16, seed=4)
    cfg = canonical_config(rng.uniform(0, 1, 16))
    a = select_center(params, cfg)
    b = select_center(params, cfg)
    assert (a.z, a.case_tag, a.rounds_used) == (b.z, b.case_tag, b.rounds_used)


@given(st.integers(min_value=0, max_value=2**32 - 1))
@settings(max_examples=100, deadline=None)
def test_grid_fallback_always_finds_an_admissible_point(seed):
    rng = np.random.default_rng(seed)
    n = rng.integers(2, 20)
    coords = np.sort(rng.uniform(0, 1, n))
    z = _grid_fallback(coords, n)
    spacing = 1.0 / (4.0 * n)
    diff = np.abs(coords - z)
    assert np.all(np.minimum(diff, 1.0 - diff) >= spacing)
    # z is one of the half-open grid points (2k-1)/(4n)
    k = (z / spacing + 1.0) / 2.0
    assert k == pytest.approx(round(k), abs=1e-9)


def test_params_defaults_follow_the_construction():
    params = TilingParams.create(1024)
    assert params.m == 10
    assert params.width_inv == pytest.approx(50 * 1024 / math.log(1024))
    assert params.max_sampling_rounds == 1000 * params.m
    np.testing.assert_allclose(params.centers,
                               (np.arange(10) + 0.5) / 10)


def test_params_reject_overlapping_zero_radius():
    # zero radius 1/width_inv must stay below half an interval width
    with pytest.raises(DomainError):
        TilingParams.create(8, m=2, width_inv=3.0)


def test_params_reject_bad_sizes():
    with pytest.raises(DomainError):
        TilingParams.create(1)
    with pytest.raises(DomainError):
        TilingParams.create(8, m=1)
