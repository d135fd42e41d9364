"""Needle Monte Carlo: step samplers and the estimators built on them.

A needle is the segment x -> x + u for a random direction u.  Everything
here reduces to asking a tiling body for cell labels along needles whose
base point is uniform in the body's base cell: noise sensitivity looks at
the endpoint, escape at intermediate checkpoints, crossing counts at label
changes between consecutive checkpoints, and the surface-area estimator
converts mean crossings into area through a cube calibration run.

Estimates depend only on (seed, n_samples): the sample budget is cut into
fixed-size chunks and each chunk regenerates its own substream, so worker
count and scheduling never change a result.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import partial

import numpy as np

from .bodies import CubeTiling, FoamTiling
from .errors import CalibrationError, DomainError
from .sampling import TAG_CALIBRATION, TAG_MC, philox_generator
from .scoring import _select_sorted
from .validation import check_finite_scalar, check_positive_int, check_vector

__all__ = [
    "GaussianSteps",
    "BernoulliSteps",
    "DisjointBernoulliSteps",
    "MCEstimate",
    "SurfaceAreaReport",
    "sample_step",
    "estimate_noise_sensitivity",
    "estimate_escape",
    "estimate_condition_failure",
    "count_crossings",
    "estimate_surface_area",
]

# Unit of reproducibility: estimators always cut their budget into chunks of
# this size, one Philox substream per chunk.  Changing it changes results.
_CHUNK = 2048


@dataclass(frozen=True)
class GaussianSteps:
    """Direction family u ~ N(0, sigma^2 I)."""

    n_dim: int
    sigma: float

    def __post_init__(self):
        check_positive_int(self.n_dim, "n_dim")
        s = check_finite_scalar(self.sigma, "sigma")
        if s <= 0:
            raise DomainError(f"sigma must be positive, got {s!r}")

    def sample(self, rng, count):
        return rng.normal(0.0, self.sigma, (int(count), self.n_dim))


@dataclass(frozen=True)
class BernoulliSteps:
    """Direction family with coordinates +-1/cycle w.p. eps each, else 0.

    `cycle` defaults to the dimension; the game passes the cycle length so
    steps move between adjacent vertices i/n.
    """

    n_dim: int
    eps: float
    cycle: int = 0

    def __post_init__(self):
        check_positive_int(self.n_dim, "n_dim")
        e = check_finite_scalar(self.eps, "eps")
        if not 0 < e <= 0.5:
            raise DomainError(f"eps must be in (0, 1/2], got {e!r}")
        if self.cycle == 0:
            object.__setattr__(self, "cycle", self.n_dim)
        check_positive_int(self.cycle, "cycle")

    def sample(self, rng, count):
        v = rng.random((int(count), self.n_dim))
        step = 1.0 / self.cycle
        return np.where(v < self.eps, step,
                        np.where(v < 2.0 * self.eps, -step, 0.0))


@dataclass(frozen=True)
class DisjointBernoulliSteps:
    """Pairs (u1, u2) with disjoint supports whose sum is Bernoulli(eps).

    Per coordinate the pair is (+s, 0), (-s, 0), (0, +s) or (0, -s), each
    with probability eps/2, and (0, 0) otherwise, where s = 1/cycle.
    """

    n_dim: int
    eps: float
    cycle: int = 0

    def __post_init__(self):
        check_positive_int(self.n_dim, "n_dim")
        e = check_finite_scalar(self.eps, "eps")
        if not 0 < e <= 0.5:
            raise DomainError(f"eps must be in (0, 1/2], got {e!r}")
        if self.cycle == 0:
            object.__setattr__(self, "cycle", self.n_dim)
        check_positive_int(self.cycle, "cycle")

    def sample_pair(self, rng, count):
        v = rng.random((int(count), self.n_dim))
        step = 1.0 / self.cycle
        half = 0.5 * self.eps
        u1 = np.where(v < half, step, np.where(v < 2 * half, -step, 0.0))
        u2 = np.where((v >= 2 * half) & (v < 3 * half), step,
                      np.where((v >= 3 * half) & (v < 4 * half), -step, 0.0))
        return u1, u2

    def sample(self, rng, count):
        """Summed pair; same per-coordinate law as BernoulliSteps(eps)."""
        u1, u2 = self.sample_pair(rng, count)
        return u1 + u2


def sample_step(family, rng):
    """One draw from a step family: a vector, or an (u1, u2) pair."""
    if isinstance(family, DisjointBernoulliSteps):
        u1, u2 = family.sample_pair(rng, 1)
        return u1[0], u2[0]
    return family.sample(rng, 1)[0]


@dataclass(frozen=True)
class MCEstimate:
    """A Monte Carlo estimate with its standard error.

    budget_errors counts samples discarded because the body's center
    selection ran out of acceptance rounds; they are excluded from
    n_samples and should be zero in any healthy run.
    """

    value: float
    stderr: float
    n_samples: int
    seed: int
    budget_errors: int = 0


def _bernoulli_estimate(hits, used, seed, budget_errors=0):
    if used <= 0:
        raise DomainError("no usable samples (all hit the sampling budget)")
    p = hits / used
    se = math.sqrt(p * (1.0 - p) / used)
    return MCEstimate(value=p, stderr=se, n_samples=int(used), seed=int(seed),
                      budget_errors=int(budget_errors))


def _mean_estimate(total, total_sq, used, seed, budget_errors=0):
    if used <= 0:
        raise DomainError("no usable samples (all hit the sampling budget)")
    mean = total / used
    if used > 1:
        var = max(total_sq - used * mean * mean, 0.0) / (used - 1)
        se = math.sqrt(var / used)
    else:
        se = float("inf")
    return MCEstimate(value=mean, stderr=se, n_samples=int(used), seed=int(seed),
                      budget_errors=int(budget_errors))


def _n_chunks(n_samples):
    return (n_samples + _CHUNK - 1) // _CHUNK


def _chunk_bounds(chunk_index, n_samples):
    lo = chunk_index * _CHUNK
    return min(_CHUNK, n_samples - lo)


def _run_chunks(fn, n_samples, workers):
    """Sum fn(c) over all chunks; fn must be picklable for workers > 1."""
    chunks = range(_n_chunks(n_samples))
    if workers is None or int(workers) <= 1:
        results = map(fn, chunks)
        total = None
        for r in results:
            total = r if total is None else tuple(a + b for a, b in zip(total, r))
        return total
    with ProcessPoolExecutor(max_workers=int(workers)) as pool:
        total = None
        for r in pool.map(fn, chunks):
            total = r if total is None else tuple(a + b for a, b in zip(total, r))
    return total


def _labels_and_bad(body, X):
    """Cell labels plus a mask of rows whose selection blew its budget."""
    if isinstance(body, FoamTiling):
        return body.transform(X, on_budget="mask")
    labels = body.transform(X)
    return labels, np.zeros(X.shape[0], dtype=bool)


def _escape_chunk(c, body, family, n_samples, k_subdiv, seed, tag):
    b = _chunk_bounds(c, n_samples)
    rng = philox_generator(seed, tag, c)
    X = rng.random((b, body.n_dim))
    U = family.sample(rng, b)
    lab0, bad = _labels_and_bad(body, X)
    A = X - lab0
    escaped = np.zeros(b, dtype=bool)
    for j in range(1, k_subdiv + 1):
        P = A + (j / k_subdiv) * U
        labels, bad_j = _labels_and_bad(body, P)
        bad |= bad_j
        escaped |= labels.any(axis=1)
    used = ~bad
    return (int(np.count_nonzero(escaped & used)),
            int(np.count_nonzero(used)),
            int(np.count_nonzero(bad)))


def estimate_noise_sensitivity(body, family, n_samples, seed=0, workers=1):
    """Pr[x and x + u land in different cells], x uniform in the base cell.

    x is mod_cell of a uniform point of [0,1)^n, so its own label is zero
    and the estimand reduces to Pr[round(x + u) != 0].  For the disjoint
    pair family the summed step is used (its law is plain Bernoulli).
    Identical (seed, n_samples) share draws with estimate_escape, of which
    this is the k_subdiv = 1 case.
    """
    n_samples = check_positive_int(n_samples, "n_samples")
    if family.n_dim != body.n_dim:
        raise DomainError(f"family dimension {family.n_dim} != body dimension {body.n_dim}")
    fn = partial(_escape_chunk, body=body, family=family, n_samples=n_samples,
                 k_subdiv=1, seed=int(seed), tag=TAG_MC)
    hits, used, bad = _run_chunks(fn, n_samples, workers)
    return _bernoulli_estimate(hits, used, seed, bad)


def estimate_escape(body, sigma, n_samples, k_subdiv=64, seed=0, workers=1):
    """Pr[the needle x -> x + u leaves the cell of x], u ~ N(0, sigma^2 I).

    The segment is checked at k_subdiv + 1 equally spaced points; more
    checkpoints can only detect more escapes, and k_subdiv = 1 is exactly
    endpoint noise sensitivity.
    """
    n_samples = check_positive_int(n_samples, "n_samples")
    k_subdiv = check_positive_int(k_subdiv, "k_subdiv")
    family = GaussianSteps(n_dim=body.n_dim, sigma=sigma)
    fn = partial(_escape_chunk, body=body, family=family, n_samples=n_samples,
                 k_subdiv=k_subdiv, seed=int(seed), tag=TAG_MC)
    hits, used, bad = _run_chunks(fn, n_samples, workers)
    return _bernoulli_estimate(hits, used, seed, bad)


def _condition_chunk(c, body, sigma, n_samples, seed, tag):
    b = _chunk_bounds(c, n_samples)
    n = body.n_dim
    params = body.params
    rng = philox_generator(seed, tag, c)
    X = rng.random((b, n))
    U = rng.normal(0.0, sigma, (b, n))
    # Fractional parts are translation invariant, so the center chosen for
    # X is also the center of A = mod_cell(X); one selection serves both.
    floors = np.floor(X)
    F = X - floors
    z_x, _, _, ok_x = _select_sorted(params, np.sort(F, axis=1), budget_mode="mask")
    A = X - (floors + (F > z_x[:, None]))
    Y = A + U
    fy = Y - np.floor(Y)
    z_y, _, _, ok_y = _select_sorted(params, np.sort(fy, axis=1), budget_mode="mask")
    same_center = z_x == z_y
    lo = np.minimum(A, Y) - z_x[:, None]
    hi = np.maximum(A, Y) - z_x[:, None]
    crosses = (np.ceil(lo) <= np.floor(hi)).any(axis=1)
    fails = ~(same_center & ~crosses)
    used = ok_x & ok_y
    return (int(np.count_nonzero(fails & used)),
            int(np.count_nonzero(used)),
            int(np.count_nonzero(~used)))


def estimate_condition_failure(body, sigma, n_samples, seed=0, workers=1):
    """How often the sufficient same-cell conditions fail under Gaussian noise.

    The conditions are those of check_cell_stability: x and x + u choose the
    same center, and no coordinate segment [x_i, x_i + u_i] meets that center
    modulo 1.  Their failure frequency upper-bounds noise sensitivity and is
    linear in sigma at small sigma.
    """
    if not isinstance(body, FoamTiling):
        raise DomainError("condition failure is defined for foam bodies")
    n_samples = check_positive_int(n_samples, "n_samples")
    sigma = check_finite_scalar(sigma, "sigma")
    if sigma <= 0:
        raise DomainError(f"sigma must be positive, got {sigma!r}")
    fn = partial(_condition_chunk, body=body, sigma=sigma, n_samples=n_samples,
                 seed=int(seed), tag=TAG_MC)
    fails, used, bad = _run_chunks(fn, n_samples, workers)
    return _bernoulli_estimate(fails, used, seed, bad)


def count_crossings(body, x, u, k_subdiv):
    """Label changes between consecutive checkpoints of the needle x -> x + u.

    A lower bound on the number of true boundary crossings, exact when no
    sub-segment crosses twice; refining k_subdiv never decreases it.
    """
    x = check_vector(x, body.n_dim, "x")
    u = check_vector(u, body.n_dim, "u")
    k_subdiv = check_positive_int(k_subdiv, "k_subdiv")
    ts = np.arange(k_subdiv + 1)[:, None] / k_subdiv
    labels = body.transform(x[None, :] + ts * u[None, :])
    changes = (labels[1:] != labels[:-1]).any(axis=1)
    return int(np.count_nonzero(changes))


def _crossings_chunk(c, body, delta, n_samples, k_subdiv, seed, tag):
    b = _chunk_bounds(c, n_samples)
    rng = philox_generator(seed, tag, c)
    X = rng.random((b, body.n_dim))
    U = rng.normal(0.0, math.sqrt(delta), (b, body.n_dim))
    lab0, bad = _labels_and_bad(body, X)
    A = X - lab0
    prev = np.zeros_like(lab0)
    crossings = np.zeros(b, dtype=np.int64)
    for j in range(1, k_subdiv + 1):
        P = A + (j / k_subdiv) * U
        labels, bad_j = _labels_and_bad(body, P)
        bad |= bad_j
        crossings += (labels != prev).any(axis=1)
        prev = labels
    used = ~bad
    cr = crossings[used]
    return (int(cr.sum()), int((cr * cr).sum()),
            int(np.count_nonzero(used)), int(np.count_nonzero(bad)))


def _mean_crossings(body, delta, n_samples, k_subdiv, seed, tag, workers):
    fn = partial(_crossings_chunk, body=body, delta=delta, n_samples=n_samples,
                 k_subdiv=k_subdiv, seed=int(seed), tag=tag)
    total, total_sq, used, bad = _run_chunks(fn, n_samples, workers)
    return _mean_estimate(total, total_sq, used, seed, bad)


@dataclass(frozen=True)
class SurfaceAreaReport:
    """Calibrated surface area and the measurements behind it.

    raw_crossings is the mean crossing count per needle on the target body;
    calibration_crossings the same on the unit cube, whose area 2n anchors
    the constant: calibration_constant = cube mean / (sqrt(delta) * 2n).
    """

    area: MCEstimate
    raw_crossings: MCEstimate
    calibration_crossings: MCEstimate
    calibration_constant: float
    delta: float
    k_subdiv: int


def estimate_surface_area(body, delta, n_samples, k_subdiv=64, seed=0,
                          workers=1, calibration_constant=None):
    """Surface area of the body's cell boundary from needle crossings.

    Needles have direction N(0, delta I); their expected crossing count is
    proportional to sqrt(delta) times the area, with a dimension constant
    that is not taken from theory but measured on the unit cube (area
    exactly 2n) using an independent substream.  Passing a precomputed
    calibration_constant skips the cube run, which is how the sqrt(delta)
    scaling law can be checked across different delta values.

    delta should be small enough that the mean crossing count stays below 1,
    otherwise multiple crossings inside one subdivision bias the estimate low.
    """
    n_samples = check_positive_int(n_samples, "n_samples")
    k_subdiv = check_positive_int(k_subdiv, "k_subdiv")
    delta = check_finite_scalar(delta, "delta")
    if delta <= 0:
        raise DomainError(f"delta must be positive, got {delta!r}")
    n = body.n_dim
    root = math.sqrt(delta)

    if calibration_constant is None:
        cube = CubeTiling(n_dim=n)
        cal = _mean_crossings(cube, delta, n_samples, k_subdiv, seed,
                              TAG_CALIBRATION, workers)
        if cal.value <= 0 or cal.stderr > 0.05 * cal.value:
            raise CalibrationError(
                f"cube calibration too noisy: mean {cal.value:g} +- {cal.stderr:g} "
                f"over {cal.n_samples} needles (need stderr <= 5% of mean)")
        constant = cal.value / (root * 2.0 * n)
    else:
        constant = check_finite_scalar(calibration_constant, "calibration_constant")
        if constant <= 0:
            raise DomainError("calibration_constant must be positive")
        cal = MCEstimate(value=constant * root * 2.0 * n, stderr=0.0,
                         n_samples=0, seed=int(seed))

    if calibration_constant is None and body.kind == CubeTiling.kind:
        # The cube is its own anchor: reuse the calibration measurement so
        # the reported area is 2n exactly, not 2n plus resampling noise.
        raw = cal
    else:
        raw = _mean_crossings(body, delta, n_samples, k_subdiv, seed,
                              TAG_MC, workers)

    value = raw.value / (constant * root)
    if raw is cal:
        se = 0.0
    else:
        rel_raw = raw.stderr / raw.value if raw.value > 0 else 0.0
        rel_cal = cal.stderr / cal.value if cal.n_samples and cal.value > 0 else 0.0
        se = value * math.sqrt(rel_raw ** 2 + rel_cal ** 2)
    area = MCEstimate(value=value, stderr=se, n_samples=raw.n_samples,
                      seed=int(seed), budget_errors=raw.budget_errors)
    return SurfaceAreaReport(area=area, raw_crossings=raw,
                             calibration_crossings=cal,
                             calibration_constant=constant,
                             delta=delta, k_subdiv=k_subdiv)
