"""Tiling bodies of R^n behind a sklearn-style transformer surface.

A body D is a set whose integer translates partition R^n.  It is represented
implicitly by its rounding map: `transform` sends each row point x to the
lattice label z with x in D + z, and the cell of x is x - transform(x).
Both bodies here are symmetric under coordinate permutations and equivariant
under integer translations.

`CubeTiling` rounds coordinatewise by floor.  `FoamTiling` picks a shared
center level z from the configuration of fractional parts (see `scoring`)
and floors or ceils each coordinate according to which side of z its
fractional part falls; the adaptive center is what makes its cells far less
noise-sensitive than the cube's.
"""

import hashlib
import json
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .errors import DomainError, SamplingBudgetError
from .sampling import TAG_PROBE, philox_generator
from .scoring import _CASE_TAGS, TilingParams, _select_sorted, select_center
from .torus import canonical_config, segment_contains_level
from .validation import check_points, check_vector

__all__ = [
    "TilingBody",
    "CubeTiling",
    "FoamTiling",
    "CellStabilityReport",
    "body_from_descriptor",
    "check_cell_stability",
    "no_integer_gap",
]

_TRANSFORM_CHUNK = 1024


class TilingBody(BaseEstimator, TransformerMixin):
    """Base class: a stateless transformer from points to lattice labels."""

    kind = None

    def fit(self, X=None, y=None):
        """No-op; bodies are fully determined by their constructor params."""
        self._validate()
        return self

    def _validate(self):
        pass

    def transform(self, X):
        raise NotImplementedError

    def round_point(self, x):
        """Lattice label of a single point."""
        x = check_vector(x, self.n_dim, "x")
        return self.transform(x[None, :])[0]

    def mod_cell(self, X):
        """Representative of X in the base cell D: x - round(x), rowwise."""
        single = np.ndim(X) == 1
        X = check_points(X, self.n_dim, "X")
        out = X - self.transform(X)
        return out[0] if single else out

    def sample_in_cell(self, rng, size=None):
        """Uniform points of D: uniform in [0,1)^n pushed through mod_cell."""
        if size is None:
            return self.mod_cell(rng.random(self.n_dim))
        return self.mod_cell(rng.random((int(size), self.n_dim)))

    def descriptor(self):
        raise NotImplementedError

    def to_json(self):
        return json.dumps(self.descriptor(), sort_keys=True)

    def fingerprint(self, n_probes=1000):
        """Short hash of the labels of a fixed probe cloud; identifies the body."""
        rng = philox_generator(self.descriptor().get("seed", 0), TAG_PROBE)
        probes = rng.uniform(-2.0, 2.0, (int(n_probes), self.n_dim))
        labels = self.transform(probes)
        return hashlib.sha256(labels.astype("<i8").tobytes()).hexdigest()[:16]


class CubeTiling(TilingBody):
    """The unit cube [0,1)^n: rounding is coordinatewise floor."""

    kind = "unit-cube"

    def __init__(self, n_dim):
        self.n_dim = n_dim

    def _validate(self):
        if int(self.n_dim) < 1:
            raise DomainError("n_dim must be >= 1")

    def transform(self, X):
        self._validate()
        X = check_points(X, self.n_dim, "X")
        return np.floor(X).astype(np.int64)

    def descriptor(self):
        return {"kind": self.kind, "n": int(self.n_dim)}


class FoamTiling(TilingBody):
    """The symmetric foam body induced by shared-randomness center selection.

    Parameters mirror TilingParams: `n_intervals`, `width_inv` and
    `max_rounds` default from the dimension (see TilingParams.create).
    """

    kind = "symmetric-foam"

    def __init__(self, n_dim, n_intervals=None, seed=0, width_inv=None, max_rounds=None):
        self.n_dim = n_dim
        self.n_intervals = n_intervals
        self.seed = seed
        self.width_inv = width_inv
        self.max_rounds = max_rounds

    @property
    def params(self):
        return TilingParams.create(
            self.n_dim, m=self.n_intervals, seed=self.seed,
            width_inv=self.width_inv, max_sampling_rounds=self.max_rounds)

    def _validate(self):
        self.params

    def select_center(self, x):
        """CenterChoice for the configuration of x's fractional parts."""
        x = check_vector(x, self.n_dim, "x")
        return select_center(self.params, canonical_config(x))

    def transform(self, X, on_budget="raise"):
        """Rowwise lattice labels.

        on_budget "raise" propagates SamplingBudgetError; "mask" instead
        returns (labels, bad) where bad marks rows whose center selection
        exhausted its budget (their labels are meaningless).
        """
        params = self.params
        X = check_points(X, self.n_dim, "X")
        B = X.shape[0]
        labels = np.empty_like(X, dtype=np.int64)
        bad = np.zeros(B, dtype=bool)
        for lo in range(0, B, _TRANSFORM_CHUNK):
            hi = min(lo + _TRANSFORM_CHUNK, B)
            chunk = X[lo:hi]
            floors = np.floor(chunk)
            F = chunk - floors
            S = np.sort(F, axis=1)
            z, _, _, ok = _select_sorted(params, S, budget_mode=on_budget)
            if np.any(F == z[:, None]):
                raise AssertionError("fractional part collided with center level")
            labels[lo:hi] = floors.astype(np.int64) + (F > z[:, None])
            bad[lo:hi] = ~ok
        if on_budget == "mask":
            return labels, bad
        return labels

    def descriptor(self):
        p = self.params
        return {
            "kind": self.kind,
            "n": p.n,
            "m": p.m,
            "seed": p.seed,
            "width_inv": p.width_inv,
            "max_sampling_rounds": p.max_sampling_rounds,
        }


def body_from_descriptor(desc):
    """Rebuild a body from its JSON descriptor (dict or JSON text)."""
    if isinstance(desc, (str, bytes)):
        desc = json.loads(desc)
    kind = desc.get("kind")
    if kind == CubeTiling.kind:
        return CubeTiling(n_dim=int(desc["n"]))
    if kind == FoamTiling.kind:
        return FoamTiling(
            n_dim=int(desc["n"]),
            n_intervals=desc.get("m"),
            seed=int(desc.get("seed", 0)),
            width_inv=desc.get("width_inv"),
            max_rounds=desc.get("max_sampling_rounds"),
        )
    raise DomainError(f"unknown body kind {kind!r}")


@dataclass(frozen=True)
class CellStabilityReport:
    """Why x and x + delta do or don't share a cell.

    same_center: both points chose the same center level.
    segments_clear: no coordinate segment [x_i, x_i + delta_i] meets the
    center of x modulo 1.  Together these force same_cell; the converse can
    fail (points may share a cell by luck).
    """

    same_center: bool
    segments_clear: bool
    same_cell: bool

    @property
    def conditions_hold(self):
        return self.same_center and self.segments_clear


def check_cell_stability(body, x, delta):
    """Evaluate the sufficient same-cell conditions for x vs x + delta."""
    if not isinstance(body, FoamTiling):
        raise DomainError("cell stability conditions are defined for foam bodies")
    x = check_vector(x, body.n_dim, "x")
    delta = check_vector(delta, body.n_dim, "delta")
    y = x + delta
    cx = body.select_center(x)
    cy = body.select_center(y)
    same_center = cx.z == cy.z
    segments_clear = not any(
        segment_contains_level(x[i], delta[i], cx.z) for i in range(body.n_dim))
    same_cell = bool(np.array_equal(body.round_point(x), body.round_point(y)))
    return CellStabilityReport(same_center=same_center,
                               segments_clear=segments_clear,
                               same_cell=same_cell)


def no_integer_gap(body, y):
    """True iff no two coordinates of y differ by a nonzero integer.

    y is expected to lie in the body's base cell (round_point(y) == 0).
    Exact fractional-part equality is the test: y_i - y_j is a nonzero
    integer iff frac(y_i) == frac(y_j) while y_i != y_j.
    """
    y = check_vector(y, body.n_dim, "y")
    fr = y - np.floor(y)
    order = np.argsort(fr, kind="stable")
    fr_s = fr[order]
    val_s = y[order]
    lo = 0
    n = y.shape[0]
    while lo < n:
        hi = lo + 1
        while hi < n and fr_s[hi] == fr_s[lo]:
            hi += 1
        if hi - lo > 1 and np.any(val_s[lo:hi] != val_s[lo]):
            return False
        lo = hi
    return True
