"""Orthonormal polynomial families and hyperbolic multi-index sets.

Conventions, fixed throughout the package:

* Legendre polynomials are orthonormal against the uniform density 1/2 on
  [-1, 1], i.e. psi_n = sqrt(2n+1) * P_n.
* Hermite polynomials are the probabilists' family normalized by
  1/sqrt(n!), orthonormal against the standard normal density.
* Multi-index sets are ordered graded-lexicographically (total degree
  first, then lexicographic on the degree tuple) so coefficient vectors
  are comparable across runs.

With orthonormal (not merely orthogonal) one-dimensional families, the
variance of an expansion is the plain sum of squared coefficients, with no
norm factors anywhere downstream.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

LEGENDRE = "legendre"
HERMITE = "hermite"

# slack when testing the q-quasi-norm against the degree bound; sums of
# fractional powers of small integers can tie the bound exactly in reals
# but drift by an ulp in floats (e.g. sqrt(2)+sqrt(2) vs sqrt(8))
_NORM_TOL = 1e-9


def eval_orthonormal_all(family: str, max_degree: int, u) -> np.ndarray:
    """All orthonormal polynomial values of degree 0..max_degree at ``u``.

    Returns an array of shape ``u.shape + (max_degree + 1,)``.  Evaluation
    uses the orthonormal three-term recurrences, which stay well
    conditioned far beyond degree 30.
    """
    if max_degree < 0:
        raise ValueError("degree must be nonnegative")
    u = np.asarray(u, dtype=float)
    if family == LEGENDRE:
        if np.any(np.abs(u) > 1.0 + 1e-12):
            raise ValueError("legendre evaluation requires u in [-1, 1]")
    elif family != HERMITE:
        raise ValueError(f"unknown family {family!r}")
    out = np.empty(u.shape + (max_degree + 1,))
    out[..., 0] = 1.0
    if max_degree == 0:
        return out
    if family == LEGENDRE:
        out[..., 1] = math.sqrt(3.0) * u
        for n in range(1, max_degree):
            out[..., n + 1] = (math.sqrt(2 * n + 3) / (n + 1)) * (
                math.sqrt(2 * n + 1) * u * out[..., n]
                - (n / math.sqrt(2 * n - 1)) * out[..., n - 1]
            )
    else:
        out[..., 1] = u
        for n in range(1, max_degree):
            out[..., n + 1] = (
                u * out[..., n] - math.sqrt(n) * out[..., n - 1]
            ) / math.sqrt(n + 1)
    return out


def eval_orthonormal_1d(family: str, degree: int, u):
    """Value of the orthonormal polynomial of a given degree at ``u``."""
    values = eval_orthonormal_all(family, degree, u)
    return values[..., degree]


def count_total_degree(m: int, p: int) -> int:
    """Size of the full total-degree basis, binom(m + p, p), exactly."""
    return math.comb(m + p, p)


@dataclass(frozen=True)
class MultiIndexSet:
    """Ordered set of tensor-degree tuples under a hyperbolic truncation.

    ``degrees`` has one row per multi-index.  The zero index is always
    present (and first), rows are unique, every row satisfies the q-norm
    bound, and the ordering is graded-lexicographic.
    """

    degrees: np.ndarray
    p: int
    q: float

    def __post_init__(self):
        degrees = np.atleast_2d(np.asarray(self.degrees))
        if degrees.dtype.kind not in "iu":
            degrees = degrees.astype(np.int64)
        object.__setattr__(self, "degrees", degrees)
        if np.any(degrees < 0):
            raise ValueError("multi-index degrees must be nonnegative")
        if not (0.0 < self.q <= 1.0):
            raise ValueError(f"q must lie in (0, 1], got {self.q}")
        order = _graded_lex_order(degrees)
        if not np.array_equal(order, np.arange(len(degrees))):
            raise ValueError("multi-index rows must be graded-lex sorted")
        if np.any(degrees[0] != 0):
            raise ValueError("the zero multi-index must be present")
        if len(degrees) > 1:
            dup = np.all(degrees[1:] == degrees[:-1], axis=1)
            if np.any(dup):
                raise ValueError("duplicate multi-indices")
        norms = np.sum(degrees.astype(float) ** self.q, axis=1)
        if np.any(norms > self.p**self.q + _NORM_TOL):
            raise ValueError("a multi-index violates the q-norm bound")

    @property
    def m(self) -> int:
        return self.degrees.shape[1]

    def __len__(self) -> int:
        return self.degrees.shape[0]

    def total_degrees(self) -> np.ndarray:
        return self.degrees.sum(axis=1)

    def subset(self, rows) -> "MultiIndexSet":
        """New set from a selection of rows (re-sorted graded-lex)."""
        sel = self.degrees[np.asarray(rows, dtype=int)]
        sel = sel[_graded_lex_order(sel)]
        return MultiIndexSet(sel, self.p, self.q)

    def issubset(self, other: "MultiIndexSet") -> bool:
        mine = {tuple(row) for row in self.degrees}
        theirs = {tuple(row) for row in other.degrees}
        return mine <= theirs

    def to_sparse_pairs(self) -> list:
        """Rows as lists of (coordinate, degree) pairs, zero entries elided."""
        out = []
        for row in self.degrees:
            nz = np.nonzero(row)[0]
            out.append([(int(j), int(row[j])) for j in nz])
        return out

    @classmethod
    def from_sparse_pairs(cls, pairs, m: int, p: int, q: float) -> "MultiIndexSet":
        degrees = np.zeros((len(pairs), m), dtype=np.int64)
        for k, row in enumerate(pairs):
            for j, d in row:
                degrees[k, j] = d
        return cls(degrees[_graded_lex_order(degrees)], p, q)


def _graded_lex_order(degrees: np.ndarray) -> np.ndarray:
    keys = [degrees[:, j] for j in range(degrees.shape[1] - 1, -1, -1)]
    keys.append(degrees.sum(axis=1))
    return np.lexsort(keys)


def _degree_patterns(p: int, q: float):
    """Nonincreasing tuples of positive degrees satisfying the q-norm bound.

    These are the sparse 'shapes' of admissible multi-indices; the actual
    set is produced by distributing each shape over the coordinates.  The
    empty tuple (the zero index) is included.
    """
    budget = float(p) ** q + _NORM_TOL
    patterns = []

    def descend(prefix, remaining, d_cap):
        patterns.append(tuple(prefix))
        d_max = min(d_cap, int(remaining ** (1.0 / q) + 1e-9)) if remaining > 0 else 0
        for d in range(d_max, 0, -1):
            cost = float(d) ** q
            if cost <= remaining:
                prefix.append(d)
                descend(prefix, remaining - cost, d)
                prefix.pop()

    descend([], budget, p)
    return patterns


def enumerate_hyperbolic(m: int, p: int, q: float) -> MultiIndexSet:
    """All multi-indices with (sum_i a_i^q)^(1/q) <= p, graded-lex ordered.

    Enumeration goes through sparse degree patterns and their coordinate
    placements rather than filtering a total-degree hypercube, so large
    dimensions stay cheap: the full q=1 candidate set can be astronomically
    large where the hyperbolic set has only ~1e5 members.
    """
    if m < 1:
        raise ValueError("dimension must be at least 1")
    if p < 0:
        raise ValueError("max degree must be nonnegative")
    if not (0.0 < q <= 1.0):
        raise ValueError(f"q must lie in (0, 1], got {q}")

    if q == 1.0:
        patterns = [
            tuple(pat)
            for k in range(0, p + 1)
            for pat in _partitions_desc(k)
        ]
    else:
        patterns = _degree_patterns(p, q)

    rows = []
    for pattern in patterns:
        if len(pattern) > m:
            continue
        # multiplicities of the distinct degree values, largest first
        values = [(d, len(list(g))) for d, g in itertools.groupby(pattern)]
        rows.extend(_place_pattern(values, m))
    degrees = np.array(rows, dtype=np.int16)
    degrees = degrees[_graded_lex_order(degrees)]
    return MultiIndexSet(degrees, p, q)


def _partitions_desc(total: int):
    """Integer partitions of ``total`` as nonincreasing tuples."""
    if total == 0:
        yield ()
        return

    def rec(remaining, cap, prefix):
        if remaining == 0:
            yield tuple(prefix)
            return
        for d in range(min(cap, remaining), 0, -1):
            prefix.append(d)
            yield from rec(remaining - d, d, prefix)
            prefix.pop()

    yield from rec(total, total, [])


def _place_pattern(values, m: int):
    """Distribute degree values with multiplicities over m coordinates."""
    rows = []

    def rec(avail, vi, partial):
        if vi == len(values):
            row = [0] * m
            for j, d in partial:
                row[j] = d
            rows.append(row)
            return
        d, mult = values[vi]
        for combo in itertools.combinations(avail, mult):
            remaining = tuple(c for c in avail if c not in combo)
            rec(remaining, vi + 1, partial + [(j, d) for j in combo])

    rec(tuple(range(m)), 0, [])
    return rows


def eval_basis_matrix(mset: MultiIndexSet, u_points, families) -> np.ndarray:
    """Evaluate every basis polynomial at every standardized point.

    ``u_points`` is (N, M) or (M,) in standardized space; returns (N, card)
    with one column per multi-index (entry = product of the univariate
    orthonormal values; the zero-index column is identically 1).
    """
    u = np.atleast_2d(np.asarray(u_points, dtype=float))
    if u.shape[1] != mset.m:
        raise ValueError(f"points have dimension {u.shape[1]}, basis has {mset.m}")
    if len(families) != mset.m:
        raise ValueError("one polynomial family is needed per coordinate")
    max_deg = mset.degrees.max(axis=0)
    tables = [
        eval_orthonormal_all(fam, int(max_deg[j]), u[:, j])
        for j, fam in enumerate(families)
    ]
    out = np.ones((u.shape[0], len(mset)))
    for k, row in enumerate(mset.degrees):
        for j in np.nonzero(row)[0]:
            out[:, k] *= tables[j][:, row[j]]
    return out


def eval_basis_row(mset: MultiIndexSet, u_point, families) -> np.ndarray:
    """Basis values at a single standardized point (1-D array)."""
    u = np.asarray(u_point, dtype=float)
    if u.ndim != 1:
        raise ValueError("eval_basis_row expects a single point")
    return eval_basis_matrix(mset, u[None, :], families)[0]
