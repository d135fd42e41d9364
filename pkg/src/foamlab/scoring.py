"""Interval scoring and shared-randomness center selection.

The circle [0, 1) is cut into m half-open intervals.  Each interval scores a
configuration by a product of C^2 ramp values measuring how far the interval's
coordinates sit from its midpoint; the normalized scores induce a distribution
over midpoints, and a center is drawn from it with an acceptance sampler that
reads a stream of (interval, threshold) pairs regenerated deterministically
from the seed.  Because the stream depends only on the seed, two nearby
configurations consume identical randomness and almost always accept the same
round, which is what keeps the induced tiling's boundary small.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, SamplingBudgetError
from .sampling import stream_uniforms
from .torus import TorusConfig
from .validation import check_positive_int, check_probability_vector

__all__ = [
    "TilingParams",
    "ScoreVector",
    "CenterChoice",
    "smooth_step",
    "center_score",
    "interval_products",
    "choice_distribution",
    "sample_index",
    "select_center",
]

CASE_A = "A"
CASE_HALF = "B1"
CASE_GRID = "B2"
_CASE_TAGS = (CASE_A, CASE_HALF, CASE_GRID)


@dataclass(frozen=True)
class TilingParams:
    """Frozen parameter block for one foam body.

    n : dimension (>= 2)
    m : number of intervals (>= 2); default rounds n**(1/3)
    width_inv : ramp steepness; scores vanish within 1/width_inv of a midpoint
    seed : key of the shared selection stream
    max_sampling_rounds : acceptance budget before SamplingBudgetError
    """

    n: int
    m: int
    width_inv: float
    seed: int
    max_sampling_rounds: int

    def __post_init__(self):
        if self.n < 2:
            raise DomainError(f"n must be >= 2, got {self.n}")
        if self.m < 2:
            raise DomainError(f"m must be >= 2, got {self.m}")
        if not (self.width_inv > 0 and math.isfinite(self.width_inv)):
            raise DomainError(f"width_inv must be positive and finite, got {self.width_inv}")
        if self.seed < 0:
            raise DomainError("seed must be nonnegative")
        if self.max_sampling_rounds < 1:
            raise DomainError("max_sampling_rounds must be >= 1")
        # Score supports must stay inside their interval: the zero radius
        # 1/width_inv has to be smaller than half the interval width.
        if 1.0 / self.width_inv >= 1.0 / (2.0 * self.m):
            raise DomainError(
                f"zero radius {1.0 / self.width_inv:g} must be < 1/(2m) = {1.0 / (2 * self.m):g}"
            )

    @classmethod
    def create(cls, n, m=None, seed=0, width_inv=None, max_sampling_rounds=None):
        n = check_positive_int(n, "n", minimum=2)
        if m is None:
            m = max(2, round(n ** (1.0 / 3.0)))
        m = check_positive_int(m, "m", minimum=2)
        if width_inv is None:
            width_inv = 50.0 * n / math.log(n)
        if max_sampling_rounds is None:
            max_sampling_rounds = 1000 * m
        return cls(n=n, m=int(m), width_inv=float(width_inv), seed=int(seed),
                   max_sampling_rounds=int(max_sampling_rounds))

    @property
    def centers(self):
        """Interval midpoints (j + 1/2)/m for j = 0..m-1."""
        return (np.arange(self.m) + 0.5) / self.m

    @property
    def zero_radius(self):
        return 1.0 / self.width_inv


@dataclass(frozen=True)
class ScoreVector:
    """Per-interval score products and their sum."""

    r: np.ndarray = field(repr=False)
    total: float = 0.0

    @property
    def m(self):
        return self.r.shape[0]


@dataclass(frozen=True)
class CenterChoice:
    """Outcome of center selection.

    case_tag is "A" (sampled from the score distribution), "B1" (all scores
    vanished, 1/2 was free) or "B2" (grid fallback).  rounds_used counts
    acceptance rounds consumed in case A and is 0 otherwise.
    """

    z: float
    case_tag: str
    rounds_used: int


def smooth_step(t):
    """C^2 ramp: 0 for t <= 1, 1 for t >= 2, quintic 10s^3 - 15s^4 + 6s^5 between.

    The ramp rises like (t - 1)^3 just above 1, which is what caps how hard a
    single coordinate can move an interval's score.  Accepts scalars or arrays;
    negative input is a domain error.
    """
    arr = np.asarray(t, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError("smooth_step input must be finite")
    if np.any(arr < 0):
        raise DomainError("smooth_step input must be >= 0")
    s = np.clip(arr - 1.0, 0.0, 1.0)
    val = s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
    if np.ndim(t) == 0:
        return float(val)
    return val


def _bin_of(coords, m):
    """Interval index floor(c * m), clipped into range.

    A coordinate equal to a boundary j/m belongs to the upper interval, which
    is what floor gives; clipping only guards the last representable floats
    below 1.0.
    """
    return np.minimum((coords * m).astype(np.int64), m - 1)


def center_score(params, j, t):
    """Ramp score of coordinate t against midpoint j (0-based interval index).

    t must lie in interval j, i.e. j/m <= t < (j+1)/m; the plain absolute
    difference then equals the circle distance because score supports stay
    inside their interval.
    """
    j = int(j)
    if not 0 <= j < params.m:
        raise DomainError(f"interval index {j} out of range [0, {params.m})")
    t = float(t)
    if not (j / params.m <= t < (j + 1) / params.m):
        raise DomainError(f"t={t!r} outside interval [{j}/{params.m}, {j + 1}/{params.m})")
    z = (j + 0.5) / params.m
    return smooth_step(params.width_inv * abs(t - z))


def _products_by_bin(scores_flat, keys_flat, n_rows, m):
    """Per-(row, bin) products of a flat nondecreasing-keyed score array.

    keys_flat holds row * m + bin and is globally nondecreasing (rows are
    sorted configurations, so bins are nondecreasing within each row).
    Empty segments are the empty product 1.
    """
    total = n_rows * m
    starts = np.searchsorted(keys_flat, np.arange(total), side="left")
    counts = np.diff(np.append(starts, keys_flat.size))
    # Sentinel 1.0 keeps reduceat's trailing segment harmless; empty segments
    # (reduceat returns a stray singleton for them) are masked to 1 afterwards.
    ext = np.append(scores_flat, 1.0)
    red = np.multiply.reduceat(ext, starts)
    out = np.where(counts > 0, red, 1.0)
    return out.reshape(n_rows, m)


def _scores_sorted(params, S):
    """Score products for rows of ascending fractional parts.

    S : (B, n) array, each row sorted ascending in [0, 1).
    Returns (B, m) products.
    """
    B, n = S.shape
    m = params.m
    bins = _bin_of(S, m)
    centers = (bins + 0.5) / m
    g = smooth_step(params.width_inv * np.abs(S - centers))
    keys = (np.arange(B, dtype=np.int64)[:, None] * m + bins).ravel()
    return _products_by_bin(g.ravel(), keys, B, m)


def interval_products(params, cfg):
    """ScoreVector of per-interval products for one configuration."""
    if not isinstance(cfg, TorusConfig):
        raise DomainError("cfg must be a TorusConfig (see canonical_config)")
    if cfg.n != params.n:
        raise DomainError(f"configuration has {cfg.n} points, params expect {params.n}")
    r = _scores_sorted(params, cfg.coords[None, :])[0]
    return ScoreVector(r=r, total=float(r.sum()))


def choice_distribution(params, cfg):
    """Normalized score products as a probability vector over midpoints."""
    sv = interval_products(params, cfg)
    if sv.total <= 0.0:
        raise DomainError("all interval scores vanished; no distribution exists")
    return sv.r / sv.total


def _accept_stream(P, seed, max_rounds):
    """Run the shared acceptance stream against rows of distributions.

    Every row reads the *same* stream of (interval, threshold) pairs, freshly
    regenerated from the seed, and stops at its first round k with
    threshold_k <= P[row, interval_k] (and a strictly positive entry, so a
    zero-probability interval can never be chosen).  Returns (index, rounds,
    resolved); unresolved rows exhausted max_rounds.
    """
    R, m = P.shape
    idx = np.full(R, -1, dtype=np.int64)
    rounds = np.zeros(R, dtype=np.int64)
    unresolved = np.arange(R)
    L = min(max(64 * m, 64), max_rounds)
    while unresolved.size:
        u = stream_uniforms(seed, 2 * L)
        i_s = np.minimum((u[0::2] * m).astype(np.int64), m - 1)
        h_s = u[1::2]
        Pu = P[unresolved][:, i_s]
        acc = (Pu > 0.0) & (h_s[None, :] <= Pu)
        found = acc.any(axis=1)
        first = np.argmax(acc, axis=1)
        hit_rows = unresolved[found]
        idx[hit_rows] = i_s[first[found]]
        rounds[hit_rows] = first[found] + 1
        unresolved = unresolved[~found]
        if L >= max_rounds:
            break
        L = min(L * 4, max_rounds)
    return idx, rounds, idx >= 0


def sample_index(p, seed, max_rounds=None):
    """Draw an index from distribution p via the shared stream for `seed`.

    This is the coupling primitive: two distributions sampled under the same
    seed read identical streams, and the probability (over seeds) that they
    pick different indices is at most the l1 distance between them.
    """
    p = check_probability_vector(p)
    if max_rounds is None:
        max_rounds = 1000 * p.shape[0]
    max_rounds = check_positive_int(max_rounds, "max_rounds")
    idx, rounds, ok = _accept_stream(p[None, :], seed, max_rounds)
    if not ok[0]:
        raise SamplingBudgetError(f"no acceptance within {max_rounds} rounds")
    return int(idx[0]), int(rounds[0])


def _grid_fallback(coords, n):
    """First grid point (2k-1)/(4n) at circle distance >= 1/(4n) from all coords.

    Each coordinate disqualifies at most one grid point (the open ball of
    radius 1/(4n) spans one grid spacing), so n coordinates cannot cover all
    2n candidates.
    """
    spacing = 1.0 / (4.0 * n)
    for k in range(1, 2 * n + 1):
        z = (2.0 * k - 1.0) * spacing
        diff = np.abs(coords - z)
        if np.all(np.minimum(diff, 1.0 - diff) >= spacing):
            return z
    raise AssertionError("no admissible grid center; pigeonhole violated")


def _select_sorted(params, S, budget_mode="raise"):
    """Center selection for rows of ascending fractional parts.

    Returns (z, tags, rounds, resolved): midpoint per row, case tag index into
    _CASE_TAGS, acceptance rounds, and a mask of rows that resolved within the
    budget.  budget_mode "raise" throws SamplingBudgetError on any unresolved
    row; "mask" leaves them flagged for the caller to count.
    """
    B, n = S.shape
    m = params.m
    r = _scores_sorted(params, S)
    totals = r.sum(axis=1)
    z = np.empty(B)
    tags = np.zeros(B, dtype=np.int8)
    rounds = np.zeros(B, dtype=np.int64)
    resolved = np.ones(B, dtype=bool)

    case_a = totals > 0.0
    if np.any(case_a):
        P = r[case_a] / totals[case_a, None]
        idx, rds, ok = _accept_stream(P, params.seed, params.max_sampling_rounds)
        z[case_a] = (idx + 0.5) / m
        rounds[case_a] = rds
        resolved[case_a] = ok
        if budget_mode == "raise" and not np.all(ok):
            raise SamplingBudgetError(
                f"no acceptance within {params.max_sampling_rounds} rounds")

    for row in np.nonzero(~case_a)[0]:
        coords = S[row]
        if not np.any(coords == 0.5):
            z[row] = 0.5
            tags[row] = 1
        else:
            z[row] = _grid_fallback(coords, n)
            tags[row] = 2
    return z, tags, rounds, resolved


def select_center(params, cfg):
    """Pick the rounding center for one configuration.

    Case A (some interval scores positive): normalize the score products and
    run the shared acceptance stream.  Case B (all products zero): take 1/2
    if no coordinate sits exactly there, else the first admissible fallback
    grid point.  The returned center never equals 0 and never collides with a
    coordinate of the configuration.
    """
    if not isinstance(cfg, TorusConfig):
        raise DomainError("cfg must be a TorusConfig (see canonical_config)")
    if cfg.n != params.n:
        raise DomainError(f"configuration has {cfg.n} points, params expect {params.n}")
    z, tags, rounds, _ = _select_sorted(params, cfg.coords[None, :], budget_mode="raise")
    return CenterChoice(z=float(z[0]), case_tag=_CASE_TAGS[tags[0]], rounds_used=int(rounds[0]))
