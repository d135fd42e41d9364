"""The odd cycle game, its symmetric repetition, and tiling-derived strategies.

Challenges live on the cycle C_n = {i/n}; everywhere in this module they are
represented by integer vectors a in {0..n-1}^t so that challenge arithmetic
is exact.  A symmetric strategy answers bit vectors equivariantly under
coordinate permutations (it may abort, which the judge counts as failure).
Strategies convert to lattice rounding maps and back: success on a challenge
pair is the same event as the two scaled points sharing a rounding cell,
which is what lets tiling bodies play the game.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import partial
from itertools import combinations_with_replacement, product

import numpy as np

from .bodies import TilingBody
from .errors import DomainError, StateSpaceError
from .needles import (MCEstimate, _bernoulli_estimate, _chunk_bounds,
                      _mean_estimate, _run_chunks)
from .sampling import TAG_BOX, TAG_CHALLENGE, fold_key, philox_generator
from .validation import check_positive_int

__all__ = [
    "GameInstance",
    "LatticeRounding",
    "BodyLatticeRounding",
    "ConstantStrategy",
    "ParityStrategy",
    "TableStrategy",
    "TilingStrategy",
    "GameEvalReport",
    "DecencyReport",
    "amplification_step_count",
    "sample_challenge",
    "judge",
    "brute_force_value",
    "enumerate_symmetric_strategies",
    "exact_strategy_value",
    "strategy_to_rounding",
    "equivalence_counterexamples",
    "box_majority",
    "estimate_step_escape",
    "decency_probe",
    "estimate_decency",
    "estimate_indecisive_rate",
    "evaluate_strategy",
]

# Exact enumeration guards: states for value computations, strategy count
# for brute force (the pair matrix is quadratic in the latter).
_MAX_STATES = 3000
_MAX_STRATEGIES = 2048


@dataclass(frozen=True)
class GameInstance:
    """The t-fold symmetric repetition of the odd cycle game on C_n."""

    n: int
    t: int

    def __post_init__(self):
        check_positive_int(self.n, "n", minimum=3)
        if self.n % 2 == 0:
            raise DomainError(f"cycle length must be odd, got {self.n}")
        check_positive_int(self.t, "t", minimum=1)

    @property
    def n_states(self):
        return self.n ** self.t


def _is_prime(k):
    if k < 2:
        return False
    f = 2
    while f * f <= k:
        if k % f == 0:
            return False
        f += 1
    return True


def amplification_step_count(n, t):
    """k = ceil(n * sqrt(ln t) / t), rounded up to the next prime.

    For t = 1 the formula degenerates to 0 and the smallest prime is used.
    """
    n = check_positive_int(n, "n", minimum=3)
    t = check_positive_int(t, "t", minimum=1)
    k = max(2, math.ceil(n * math.sqrt(math.log(t)) / t))
    while not _is_prime(k):
        k += 1
    return k


def _sample_steps_int(rng, shape):
    """Bernoulli(1/4) steps as integers: +-1 w.p. 1/4 each, else 0."""
    v = rng.random(shape)
    return (v < 0.25).astype(np.int64) - (v >= 0.75)


def sample_challenge(instance, rng):
    """One verifier challenge pair (x, y) as integer vectors.

    x is uniform on {0..n-1}^t and y = x + u mod n for a Bernoulli(1/4)
    step u, so each coordinate of y repeats x w.p. 1/2 and moves to either
    cycle neighbour w.p. 1/4.
    """
    x = rng.integers(0, instance.n, instance.t)
    u = _sample_steps_int(rng, instance.t)
    return x, (x + u) % instance.n


def judge(instance, x, y, a, b):
    """Accept iff equal questions got equal bits and unequal ones differed.

    An abort (answer None) is judged as failure.
    """
    if a is None or b is None:
        return False
    x = np.asarray(x)
    y = np.asarray(y)
    a = np.asarray(a)
    b = np.asarray(b)
    return bool(np.all((x == y) == (a == b)))


class SymStrategy:
    """Base: a permutation-equivariant answering rule over {0..n-1}^t."""

    def __init__(self, instance):
        self.instance = instance

    def answer(self, a):
        """Bit vector in {0,1}^t, or None to abort."""
        raise NotImplementedError

    def answer_batch(self, A):
        """(bits, abort) for rows of A; default loops over answer()."""
        A = np.asarray(A, dtype=np.int64)
        bits = np.zeros_like(A)
        abort = np.zeros(A.shape[0], dtype=bool)
        for i in range(A.shape[0]):
            out = self.answer(A[i])
            if out is None:
                abort[i] = True
            else:
                bits[i] = out
        return bits, abort


class ConstantStrategy(SymStrategy):
    """Answers the same bit everywhere; the all-equal vector is equivariant."""

    def __init__(self, instance, bit=0):
        super().__init__(instance)
        if bit not in (0, 1):
            raise DomainError("bit must be 0 or 1")
        self.bit = int(bit)

    def answer(self, a):
        return np.full(self.instance.t, self.bit, dtype=np.int64)

    def answer_batch(self, A):
        A = np.asarray(A, dtype=np.int64)
        return np.full_like(A, self.bit), np.zeros(A.shape[0], dtype=bool)


class ParityStrategy(SymStrategy):
    """Answers the vertex parity coordinatewise.

    This is the classic near-optimal cycle strategy: a proper 2-coloring of
    the path, wrong only across the wrap-around edge, so each coordinate
    fails with probability 1/(2n).
    """

    def answer(self, a):
        return np.asarray(a, dtype=np.int64) % 2

    def answer_batch(self, A):
        A = np.asarray(A, dtype=np.int64)
        return A % 2, np.zeros(A.shape[0], dtype=bool)


def _sort_key(a):
    return tuple(int(v) for v in np.sort(np.asarray(a)))


def _unpermute(a, sorted_bits):
    """Spread bits given for sorted(a) back onto a's coordinate order."""
    a = np.asarray(a, dtype=np.int64)
    order = np.argsort(a, kind="stable")
    out = np.empty(a.shape[0], dtype=np.int64)
    out[order] = sorted_bits
    return out


def _tie_consistent(sorted_a, bits):
    """Bits must be constant on runs of equal challenge values, otherwise
    un-permuting is ambiguous and equivariance would silently break."""
    for i in range(1, len(sorted_a)):
        if sorted_a[i] == sorted_a[i - 1] and bits[i] != bits[i - 1]:
            return False
    return True


class TableStrategy(SymStrategy):
    """Explicit answers per sorted challenge orbit.

    orbit_table maps each sorted tuple in {0..n-1}^t to a bit tuple; bits
    must be constant on ties.  Missing orbits abort.
    """

    def __init__(self, instance, orbit_table):
        super().__init__(instance)
        table = {}
        for key, bits in orbit_table.items():
            key = tuple(int(v) for v in key)
            bits = tuple(int(b) for b in bits)
            if list(key) != sorted(key):
                raise DomainError(f"orbit key {key} is not sorted")
            if any(not 0 <= v < instance.n for v in key) or len(key) != instance.t:
                raise DomainError(f"orbit key {key} out of range")
            if any(b not in (0, 1) for b in bits) or len(bits) != instance.t:
                raise DomainError(f"bits {bits} must be {{0,1}}^t")
            if not _tie_consistent(key, bits):
                raise DomainError(f"bits {bits} not constant on ties of {key}")
            table[key] = bits
        self.orbit_table = table

    def answer(self, a):
        bits = self.orbit_table.get(_sort_key(a))
        if bits is None:
            return None
        return _unpermute(a, np.array(bits, dtype=np.int64))


def box_majority(body, a, cycle, n_samples=400, threshold=0.5, seed=0):
    """Majority cell label of the box prod [a_i/n, (a_i+1)/n), or None.

    Samples n_samples uniform points of the box from a substream keyed by
    (seed, a, n) and returns the most frequent label z (the lattice point
    with the box's mass in D + z) provided its frequency reaches
    threshold + 3 * stderr; anything less aborts.  Count ties break to the
    lexicographically smallest label, which a rerun reproduces.
    """
    a = np.asarray(a, dtype=np.int64)
    n_samples = check_positive_int(n_samples, "n_samples", minimum=2)
    cycle = check_positive_int(cycle, "cycle", minimum=1)
    rng = philox_generator(seed, TAG_BOX,
                           fold_key(tuple(int(v) for v in a) + (cycle,)))
    P = (a[None, :] + rng.random((n_samples, a.shape[0]))) / cycle
    labels = body.transform(P)
    rows, counts = np.unique(labels, axis=0, return_counts=True)
    top = int(counts.argmax())
    freq = counts[top] / n_samples
    stderr = math.sqrt(freq * (1.0 - freq) / n_samples)
    if freq >= threshold + 3.0 * stderr:
        return rows[top].astype(np.int64)
    return None


class TilingStrategy(SymStrategy):
    """Play the repeated game by rounding boxes with a tiling body.

    On challenge a the box of the sorted challenge is classified by
    box_majority; the sorted decision is cached and un-permuted, which makes
    the strategy bit-exactly equivariant.  The answer is (z + a) mod 2 with
    z the box's cell label; no confident majority, or a majority that
    distinguishes tied coordinates, aborts.
    """

    def __init__(self, instance, body, n_per_box=400, threshold=0.5, seed=0):
        super().__init__(instance)
        if body.n_dim != instance.t:
            raise DomainError(
                f"body dimension {body.n_dim} must equal repetition count {instance.t}")
        self.body = body
        self.n_per_box = int(n_per_box)
        self.threshold = float(threshold)
        self.seed = int(seed)
        self._cache = {}

    def _sorted_label(self, key):
        if key not in self._cache:
            z = box_majority(self.body, np.array(key, dtype=np.int64),
                             cycle=self.instance.n, n_samples=self.n_per_box,
                             threshold=self.threshold, seed=self.seed)
            if z is not None and not _tie_consistent(key, z):
                z = None
            self._cache[key] = None if z is None else tuple(int(v) for v in z)
        return self._cache[key]

    def answer(self, a):
        a = np.asarray(a, dtype=np.int64)
        z = self._sorted_label(_sort_key(a))
        if z is None:
            return None
        return (_unpermute(a, np.array(z, dtype=np.int64)) + a) % 2


def enumerate_symmetric_strategies(instance):
    """All total symmetric strategies as TableStrategy objects.

    A symmetric strategy is an independent bit per distinct value of each
    sorted challenge orbit (bits on tied coordinates must agree, and the
    stabilizer of an orbit permutes exactly its tied coordinates).
    """
    reps = list(combinations_with_replacement(range(instance.n), instance.t))
    group_sizes = []
    for rep in reps:
        group_sizes.append(len(set(rep)))
    total_bits = sum(group_sizes)
    count = 1 << total_bits
    if count > _MAX_STRATEGIES:
        raise StateSpaceError(
            f"{count} symmetric strategies exceed the enumeration limit "
            f"{_MAX_STRATEGIES} (n={instance.n}, t={instance.t})")
    strategies = []
    for code in range(count):
        table = {}
        shift = 0
        for rep, size in zip(reps, group_sizes):
            distinct = sorted(set(rep))
            value_bit = {}
            for j, v in enumerate(distinct):
                value_bit[v] = (code >> (shift + j)) & 1
            shift += size
            table[rep] = tuple(value_bit[v] for v in rep)
        strategies.append(TableStrategy(instance, table))
    return strategies


def _challenge_support(instance):
    """All (x, u) pairs with integer weights over denominator (4n)^t."""
    states = list(product(range(instance.n), repeat=instance.t))
    steps = list(product((-1, 0, 1), repeat=instance.t))
    weights = [2 ** sum(1 for s in u if s == 0) for u in steps]
    return states, steps, weights


def _answer_codes(strategies, states, instance):
    """codes[s, x] packs strategy s's bits on state x into one integer."""
    codes = np.zeros((len(strategies), len(states)), dtype=np.int64)
    for xi, x in enumerate(states):
        xa = np.array(x, dtype=np.int64)
        for si, strat in enumerate(strategies):
            bits = strat.answer(xa)
            codes[si, xi] = int(np.dot(bits, 1 << np.arange(instance.t)))
    return codes


def brute_force_value(n, t):
    """Exact game value over all pairs of symmetric strategies.

    Enumerates every pair of symmetric answer tables against the exact
    challenge distribution with integer weights; the result is the exact
    rational maximum.
    """
    instance = GameInstance(n=n, t=t)
    if instance.n_states > _MAX_STATES:
        raise StateSpaceError(
            f"state space {instance.n_states} exceeds {_MAX_STATES}")
    strategies = enumerate_symmetric_strategies(instance)
    states, steps, weights = _challenge_support(instance)
    codes = _answer_codes(strategies, states, instance)
    index = {x: i for i, x in enumerate(states)}
    S = len(strategies)
    wins = np.zeros((S, S), dtype=np.int64)
    for xi, x in enumerate(states):
        ax = codes[:, xi]
        for u, w in zip(steps, weights):
            y = tuple((xv + uv) % instance.n for xv, uv in zip(x, u))
            rcode = sum(1 << i for i, uv in enumerate(u) if uv != 0)
            match = (ax[:, None] ^ codes[:, index[y]][None, :]) == rcode
            wins += w * match
    return Fraction(int(wins.max()), (4 * instance.n) ** instance.t)


def exact_strategy_value(instance, strategy, other=None):
    """Exact success probability of a strategy pair by full enumeration."""
    if instance.n_states > _MAX_STATES:
        raise StateSpaceError(
            f"state space {instance.n_states} exceeds {_MAX_STATES}")
    other = strategy if other is None else other
    states, steps, weights = _challenge_support(instance)
    num = 0
    for x in states:
        xa = np.array(x, dtype=np.int64)
        ax = strategy.answer(xa)
        for u, w in zip(steps, weights):
            ya = (xa + np.array(u, dtype=np.int64)) % instance.n
            if judge(instance, xa, ya, ax, other.answer(ya)):
                num += w
    return Fraction(num, (4 * instance.n) ** instance.t)


class LatticeRounding:
    """A rounding map on the scaled lattice Z^t, periodic up to translation.

    Labels satisfy label(w + n z) = label(w) + z; the base block
    {0..n-1}^t is stored as an explicit table.
    """

    def __init__(self, n, t, base_table):
        self.n = int(n)
        self.t = int(t)
        base_table = np.asarray(base_table, dtype=np.int64)
        if base_table.shape != (self.n ** self.t, self.t):
            raise DomainError(
                f"base table must have shape {(self.n ** self.t, self.t)}")
        self.base_table = base_table

    def _ravel(self, W):
        idx = np.zeros(W.shape[0], dtype=np.int64)
        for i in range(self.t):
            idx = idx * self.n + W[:, i]
        return idx

    def label(self, W):
        W = np.asarray(W, dtype=np.int64)
        single = W.ndim == 1
        if single:
            W = W[None, :]
        w0 = W % self.n
        z = (W - w0) // self.n
        out = self.base_table[self._ravel(w0)] + z
        return out[0] if single else out


class BodyLatticeRounding:
    """A tiling body restricted to the scaled lattice (1/n) Z^t."""

    def __init__(self, body, n):
        self.body = body
        self.n = int(n)
        self.t = body.n_dim

    def label(self, W):
        W = np.asarray(W, dtype=np.int64)
        single = W.ndim == 1
        if single:
            W = W[None, :]
        out = self.body.transform(W / self.n)
        return out[0] if single else out


def strategy_to_rounding(strategy, instance):
    """R(x) = A(x) + n x reduced mod 2, extended to the lattice.

    The returned map takes scaled integer points w = n x; on the base block
    the label is (A(w) + w) mod 2, and integer translates shift labels by
    construction.  The strategy must be total.
    """
    if instance.n_states > _MAX_STATES:
        raise StateSpaceError(
            f"state space {instance.n_states} exceeds {_MAX_STATES}")
    states = list(product(range(instance.n), repeat=instance.t))
    table = np.zeros((len(states), instance.t), dtype=np.int64)
    for i, x in enumerate(states):
        bits = strategy.answer(np.array(x, dtype=np.int64))
        if bits is None:
            raise DomainError("only total (non-aborting) strategies convert")
        table[i] = (np.asarray(bits) + np.array(x)) % 2
    return LatticeRounding(instance.n, instance.t, table)


def equivalence_counterexamples(instance, strategy):
    """Count (x, u) pairs where game success disagrees with label parity.

    Exhausts all challenges x and steps u in {0,+-1}^t and compares the
    judge's verdict on the strategy's answers against equality mod 2 of the
    derived rounding's labels at w = nx and w + u.  Parity is the judged
    quantity: translating a cell by an even lattice vector leaves every
    answer bit unchanged, so labels matching mod 2 is exactly success (cells
    whose labels differ by 2 in a coordinate do occur at the wrap edge).
    A faithful conversion returns 0.
    """
    rounding = strategy_to_rounding(strategy, instance)
    states, steps, _ = _challenge_support(instance)
    bad = 0
    for x in states:
        xa = np.array(x, dtype=np.int64)
        lx = rounding.label(xa) % 2
        for u in steps:
            ua = np.array(u, dtype=np.int64)
            ya = (xa + ua) % instance.n
            success = judge(instance, xa, ya, strategy.answer(xa),
                            strategy.answer(ya))
            same_parity = bool(
                np.array_equal(lx, rounding.label(xa + ua) % 2))
            bad += success != same_parity
    return bad


def _step_escape_chunk(c, rounding, steps, n_samples, seed, tag):
    b = _chunk_bounds(c, n_samples)
    t = rounding.t
    rng = philox_generator(seed, tag, c)
    W0 = rng.integers(0, rounding.n, (b, t))
    U = _sample_steps_int(rng, (b, t))
    W = W0 - rounding.n * rounding.label(W0)
    moved = rounding.label(W + steps * U)
    return (int(np.count_nonzero(moved.any(axis=1))), b)


def estimate_step_escape(rounding, n_samples, steps=1, seed=0, workers=1):
    """Pr[x + steps * u leaves the cell of x] on the scaled lattice.

    x is uniform over the base cell's lattice points and u a Bernoulli(1/4)
    step.  steps = 1 estimates the single-step escape eta, steps = k the
    amplified escape delta of the union bound delta <= k * eta.
    """
    n_samples = check_positive_int(n_samples, "n_samples")
    steps = check_positive_int(steps, "steps")
    fn = partial(_step_escape_chunk, rounding=rounding, steps=steps,
                 n_samples=n_samples, seed=int(seed), tag=TAG_CHALLENGE)
    hits, used = _run_chunks(fn, n_samples, workers)
    return _bernoulli_estimate(hits, used, seed)


def decency_probe(rounding, x, u, k, n_samples=256, seed=0):
    """Conditional escape probability over disjoint splittings of u.

    Given the summed step u, each nonzero coordinate belongs to u1 or u2
    with probability 1/2; the probe estimates how often any of x + u1,
    x + u2, x + k u1, x + k u2 leaves the base cell.  (x, u) is called
    decent when this stays below 1/32.
    """
    x = np.asarray(x, dtype=np.int64)
    u = np.asarray(u, dtype=np.int64)
    n_samples = check_positive_int(n_samples, "n_samples")
    k = check_positive_int(k, "k")
    rng = philox_generator(seed, TAG_CHALLENGE,
                           fold_key(tuple(x) + tuple(u) + (k,)))
    pick = rng.random((n_samples, x.shape[0])) < 0.5
    u1 = np.where(pick, u[None, :], 0)
    u2 = u[None, :] - u1
    bad = np.zeros(n_samples, dtype=bool)
    for step in (u1, u2, k * u1, k * u2):
        bad |= rounding.label(x[None, :] + step).any(axis=1)
    return _bernoulli_estimate(int(bad.sum()), n_samples, seed)


@dataclass(frozen=True)
class DecencyReport:
    """Aggregate decency diagnostics over random (x, u) pairs."""

    mean_probe: MCEstimate
    decent_rate: MCEstimate
    k: int
    threshold: float


def estimate_decency(rounding, k, n_pairs=200, n_probe=256, threshold=1.0 / 32.0,
                     seed=0):
    """Mean probe value and the fraction of decent pairs.

    The mean is the quantity the union bound controls (at most twice the
    sum of the one-step and k-step escape probabilities); the rate applies
    the decency threshold pair by pair.
    """
    n_pairs = check_positive_int(n_pairs, "n_pairs")
    rng = philox_generator(seed, TAG_CHALLENGE)
    total = 0.0
    total_sq = 0.0
    decent = 0
    for i in range(n_pairs):
        w0 = rng.integers(0, rounding.n, rounding.t)
        x = w0 - rounding.n * rounding.label(w0)
        u = _sample_steps_int(rng, rounding.t)
        probe = decency_probe(rounding, x, u, k, n_samples=n_probe,
                              seed=seed + 1)
        total += probe.value
        total_sq += probe.value ** 2
        decent += probe.value < threshold
    mean = _mean_estimate(total, total_sq, n_pairs, seed)
    rate = _bernoulli_estimate(decent, n_pairs, seed)
    return DecencyReport(mean_probe=mean, decent_rate=rate, k=k,
                         threshold=threshold)


def _indecisive_chunk(c, body, cycle, t, n_per_box, n_samples, seed):
    b = _chunk_bounds(c, n_samples)
    rng = philox_generator(seed, TAG_CHALLENGE, c)
    boxes = rng.integers(0, cycle, (b, t))
    indecisive = 0
    for i in range(b):
        z = box_majority(body, boxes[i], cycle, n_samples=n_per_box,
                         threshold=2.0 / 3.0, seed=seed)
        indecisive += z is None
    return (indecisive, b)


def estimate_indecisive_rate(body, cycle, n_boxes=400, n_per_box=400, seed=0,
                             workers=1):
    """Fraction of boxes with no cell holding a confident 2/3 majority."""
    n_boxes = check_positive_int(n_boxes, "n_boxes")
    fn = partial(_indecisive_chunk, body=body, cycle=int(cycle), t=body.n_dim,
                 n_per_box=int(n_per_box), n_samples=n_boxes, seed=int(seed))
    hits, used = _run_chunks(fn, n_boxes, workers)
    return _bernoulli_estimate(hits, used, seed)


@dataclass(frozen=True)
class GameEvalReport:
    """Monte Carlo evaluation of one strategy playing both sides."""

    success: MCEstimate
    abort_rate: MCEstimate
    n: int
    t: int


def _eval_chunk(c, instance, strategy, n_samples, seed):
    b = _chunk_bounds(c, n_samples)
    rng = philox_generator(seed, TAG_CHALLENGE, c)
    X = rng.integers(0, instance.n, (b, instance.t))
    U = _sample_steps_int(rng, (b, instance.t))
    Y = (X + U) % instance.n
    bx, abort_x = strategy.answer_batch(X)
    by, abort_y = strategy.answer_batch(Y)
    aborted = abort_x | abort_y
    consistent = ((U == 0) == (bx == by)).all(axis=1)
    wins = consistent & ~aborted
    return (int(wins.sum()), int(aborted.sum()), b)


def evaluate_strategy(instance, strategy, n_samples, seed=0, workers=1):
    """Empirical success rate of the strategy against itself.

    Challenges are sampled exactly as the verifier does; aborts by either
    side count as failures and are also reported as their own rate.
    """
    n_samples = check_positive_int(n_samples, "n_samples")
    fn = partial(_eval_chunk, instance=instance, strategy=strategy,
                 n_samples=n_samples, seed=int(seed))
    wins, aborts, used = _run_chunks(fn, n_samples, workers)
    return GameEvalReport(success=_bernoulli_estimate(wins, used, seed),
                          abort_rate=_bernoulli_estimate(aborts, used, seed),
                          n=instance.n, t=instance.t)
