"""Arithmetic on the circle R/Z.

The quantity that drives everything here is not the usual torus metric but
the distance to *differing by a nonzero integer*:

    gap_distance(x, y) = min over integers z != 0 of |(x + z) - y|

Two reals at small gap distance nearly differ by a whole nonzero integer,
which is the configuration the energy diagnostics penalize.  Note the value
depends on the actual reals, not just their fractional parts: for x, y both
in [0, 1) it equals 1 - |x - y|.

All functions are pure, operate in plain float64, and have deterministic
tie rules.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .validation import check_finite_scalar

__all__ = [
    "frac",
    "gap_distance",
    "gap_sign",
    "gap_distance_sign_arrays",
    "segment_contains_level",
    "TorusConfig",
    "canonical_config",
]


def frac(x):
    """Fractional part x - floor(x), always in [0, 1).

    For tiny negative x the subtraction rounds to 1.0 exactly; that case
    wraps back to 0.0 so the stated range really holds.
    """
    x = check_finite_scalar(x, "x")
    f = x - math.floor(x)
    return f if f < 1.0 else 0.0


def _gap_candidates(x, y):
    """Nonzero integer shifts that can realize the gap distance.

    The unconstrained minimizer of |z - (y - x)| is within one unit of
    floor(y - x); excluding z = 0 widens the search by at most one more
    step on each side.
    """
    h = y - x
    base = math.floor(h)
    return h, [z for z in range(base - 2, base + 3) if z != 0]


def gap_distance(x, y):
    """min over nonzero integers z of |(x + z) - y|; always in [0, 1]."""
    x = check_finite_scalar(x, "x")
    y = check_finite_scalar(y, "y")
    h, zs = _gap_candidates(x, y)
    return min(abs(z - h) for z in zs)


def gap_sign(x, y):
    """+1 if some minimizing shift realizes the gap as (x + z) - y = +d.

    Ties (both signs achieved, which includes d = 0 and the antipodal
    d = 1 case with equal fractional parts) resolve to +1.
    """
    x = check_finite_scalar(x, "x")
    y = check_finite_scalar(y, "y")
    h, zs = _gap_candidates(x, y)
    d = min(abs(z - h) for z in zs)
    for z in zs:
        if abs(z - h) == d and z - h >= 0:
            return 1
    return -1


def gap_distance_sign_arrays(h):
    """Vectorized (distance, sign) for an array of differences h = y - x.

    Same tie rules as the scalar functions.  Used by the energy module,
    where pair counts make per-pair python calls prohibitive.
    """
    h = np.asarray(h, dtype=np.float64)
    base = np.floor(h)
    d = np.full(h.shape, np.inf)
    sign = np.full(h.shape, -1, dtype=np.int8)
    # First pass: distances over admissible candidates.
    for off in (-2.0, -1.0, 0.0, 1.0, 2.0):
        z = base + off
        ok = z != 0.0
        cand = np.abs(z - h)
        better = ok & (cand < d)
        d = np.where(better, cand, d)
    # Second pass: +1 wherever some minimizer sits at or above h.
    for off in (-2.0, -1.0, 0.0, 1.0, 2.0):
        z = base + off
        ok = z != 0.0
        hit = ok & (np.abs(z - h) == d) & (z - h >= 0)
        sign[hit] = 1
    return d, sign


def segment_contains_level(x, delta, z):
    """Does {x + lam * delta : lam in [0, 1]} meet z modulo 1?

    Exact integer-interval containment: the segment meets z + Z iff the
    closed interval [min(x, x+delta) - z, max(x, x+delta) - z] contains
    an integer.  Decided in exact integer arithmetic on the binary values
    of the inputs (every finite float is an integer over a power of two);
    a float evaluation of (x + delta) - z double-rounds and can miss a
    level sitting precisely on a segment endpoint.
    """
    x = check_finite_scalar(x, "x")
    delta = check_finite_scalar(delta, "delta")
    z = check_finite_scalar(z, "z")
    xn, xd = x.as_integer_ratio()
    dn, dd = delta.as_integer_ratio()
    zn, zd = z.as_integer_ratio()
    den = max(xd, dd, zd)
    xi = xn * (den // xd)
    end = xi + dn * (den // dd)
    zi = zn * (den // zd)
    lo = min(xi, end) - zi
    hi = max(xi, end) - zi
    return -((-lo) // den) <= hi // den


@dataclass(frozen=True, eq=False)
class TorusConfig:
    """A canonical multiset of circle points: fractional parts, ascending."""

    coords: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "coords", np.asarray(self.coords, dtype=np.float64))
        self.coords.setflags(write=False)

    @property
    def n(self):
        return self.coords.shape[0]

    def __repr__(self):
        return f"TorusConfig(n={self.n})"


def canonical_config(raw):
    """Sort the fractional parts of `raw` ascending into a TorusConfig.

    The sorted array is a permutation-invariant canonical form: two inputs
    differing by a coordinate permutation (or by integer translations per
    coordinate) produce bit-identical configurations.
    """
    raw = np.ascontiguousarray(raw, dtype=np.float64)
    if raw.ndim != 1:
        raise DomainError(f"configuration must be 1-dimensional, got shape {raw.shape}")
    if raw.shape[0] < 2:
        raise DomainError("configuration needs at least 2 points")
    if not np.all(np.isfinite(raw)):
        raise DomainError("configuration must be finite everywhere")
    return TorusConfig(np.sort(raw - np.floor(raw)))
