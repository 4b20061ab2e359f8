"""Averaging functions on the discrete cube, plus rank/unrank machinery.

``g_m`` maps m^2-bit strings onto {0, ..., m} through a quantile staircase of
the Hamming weight: the m cut points sit at the binomial (y/(m+1))-quantiles
(pushed apart where a single weight class is heavier than the quantile
spacing).  A single bit flip changes the weight by one and the cut points are
distinct, so every discrete gradient of g_m is 0 or 1/2; each level set is a
narrow band of weight classes carrying probability at most 1/(m+1) plus one
central binomial mass, which is below 2*c1/m for every m (verified exactly
through m = 32 in the tests).

A block-slicing definition floor(rank(x)/ceil(2^(m^2)/m)) under a
weight-compatible rank order looks natural here but cannot work: any rank
order admits one-bit flips that shift the rank by nearly twice the central
binomial coefficient, which exceeds the block size for m >= 3, so that
variant violates the gradient property (exhaustively falsified at m = 3).

The weight-then-lexicographic ``rank``/``unrank`` bijection is kept as the
canonical cube ordering: g_m is nondecreasing along it, and a one-bit flip
moves the rank by at most the two adjacent weight-class sizes.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb
from typing import Sequence

import numpy as np


def _validate_bits(bits: Sequence[int], length: int) -> list[int]:
    vals = [int(b) for b in bits]
    if len(vals) != length:
        raise ValueError(f"bit vector must have length {length}, got {len(vals)}")
    if any(b not in (0, 1) for b in vals):
        raise ValueError("bit vector entries must be 0 or 1")
    return vals


def rank(bits: Sequence[int]) -> int:
    """1-based rank under weight-then-lexicographic order.

    The all-zeros string has rank 1 and the all-ones string rank 2^n.
    """
    n = len(bits)
    vals = _validate_bits(bits, n)
    w = sum(vals)
    below = sum(comb(n, j) for j in range(w))
    within = 0
    remaining_ones = w
    for i, b in enumerate(vals):
        if b:
            # strings matching the prefix, 0 here, remaining ones to the right
            within += comb(n - i - 1, remaining_ones)
            remaining_ones -= 1
    return below + within + 1


def unrank(r: int, n: int) -> list[int]:
    """Inverse of :func:`rank` on {1, ..., 2^n}."""
    if not (1 <= r <= 1 << n):
        raise ValueError("rank out of range")
    w = 0
    acc = 0
    while acc + comb(n, w) < r:
        acc += comb(n, w)
        w += 1
    idx = r - acc - 1  # 0-based within the weight class
    bits = []
    remaining_ones = w
    for i in range(n):
        if remaining_ones == 0:
            bits.append(0)
            continue
        c = comb(n - i - 1, remaining_ones)
        if idx < c:
            bits.append(0)
        else:
            bits.append(1)
            idx -= c
            remaining_ones -= 1
    return bits


def max_flip_rank_shift(m: int) -> int:
    """Upper bound 2*C(m^2, floor(m^2/2)) on the rank change of one bit flip."""
    n = m * m
    return 2 * comb(n, n // 2)


def c1_constant(m: int) -> float:
    """max over m' <= m of 2*C(m'^2, floor(m'^2/2)) * m' / 2^(m'^2)."""
    best = 0.0
    for mp in range(1, m + 1):
        n = mp * mp
        best = max(best, (2 * comb(n, n // 2) * mp) / (1 << n))
    return best


def weight_boundaries(m: int) -> tuple[int, ...]:
    """The m staircase cut points b_1 < ... < b_m in {1, ..., m^2}.

    b_y is the smallest weight with cumulative mass >= y/(m+1), pushed up
    where needed to keep the cut points distinct.  Exact integer arithmetic.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    n = m * m
    total = 1 << n
    cum = 0
    cums = []
    for w in range(n + 1):
        cum += comb(n, w)
        cums.append(cum)
    bounds = []
    prev = 0
    for y in range(1, m + 1):
        cand = next(w for w in range(n + 1) if (m + 1) * cums[w] >= y * total)
        b = max(cand, prev + 1, 1)
        if b > n:
            raise ValueError("staircase does not fit; m^2 bits are too few")
        bounds.append(b)
        prev = b
    return tuple(bounds)


@dataclass(frozen=True)
class AveragingFunction:
    """Weight-staircase map from m^2-bit strings onto {0, ..., m}."""
    m: int
    boundaries: tuple[int, ...] = ()

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not self.boundaries:
            object.__setattr__(self, "boundaries", weight_boundaries(self.m))

    @property
    def n_bits(self) -> int:
        return self.m * self.m

    @property
    def total(self) -> int:
        return 1 << self.n_bits

    def value_at_weight(self, w: int) -> int:
        if not (0 <= w <= self.n_bits):
            raise ValueError("weight out of range")
        return sum(1 for b in self.boundaries if b <= w)

    def __call__(self, bits: Sequence[int]) -> int:
        vals = _validate_bits(bits, self.n_bits)
        return self.value_at_weight(sum(vals))


def g_m(bits: Sequence[int], m: int) -> int:
    """Evaluate the averaging function for the given m."""
    return AveragingFunction(m)(bits)


@dataclass(frozen=True)
class AveragingReport:
    m: int
    max_level_prob: float
    gradient_ok: bool
    c1_value: float
    level_bound_ok: bool


def verify_averaging_properties(m: int) -> AveragingReport:
    """Exhaustively verify the flip-gradient and level-set bounds for small m.

    Enumerates all 2^(m^2) strings (m <= 4), checks that every one-bit flip
    changes g_m by at most 1, and that the largest level-set probability is
    at most 2*c1/m with c1 computed numerically.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if m > 4:
        raise ValueError("exhaustive verification is limited to m <= 4")
    n = m * m
    total = 1 << n
    fn = AveragingFunction(m)

    values = np.empty(total, dtype=np.int64)
    for mask in range(total):
        values[mask] = fn([(mask >> i) & 1 for i in range(n)])

    gradient_ok = True
    for q in range(n):
        flipped = np.arange(total) ^ (1 << q)
        if np.any(np.abs(values - values[flipped]) > 1):
            gradient_ok = False
            break

    counts = np.bincount(values, minlength=m + 1)
    max_level_prob = float(counts.max()) / total
    c1 = c1_constant(m)
    return AveragingReport(m=m, max_level_prob=max_level_prob,
                           gradient_ok=gradient_ok, c1_value=c1,
                           level_bound_ok=max_level_prob <= 2.0 * c1 / m)


def level_probabilities(m: int) -> list[float]:
    """Exact level-set probabilities of g_m via binomial counting (any m)."""
    fn = AveragingFunction(m)
    n = m * m
    counts = [0] * (m + 1)
    for w in range(n + 1):
        counts[fn.value_at_weight(w)] += comb(n, w)
    # int/int true division stays exact-ish even when both exceed float range
    return [c / fn.total for c in counts]


def random_vertex(a, d: int) -> tuple[int, ...]:
    """Coordinate-wise averaging of a d x m^2 bit matrix into {0..m}^d."""
    mat = np.asarray(a)
    if mat.ndim != 2 or mat.shape[0] != d:
        raise ValueError(f"bit matrix must have shape ({d}, m^2)")
    n = mat.shape[1]
    m = int(round(n ** 0.5))
    if m * m != n:
        raise ValueError("row length must be a perfect square m^2")
    fn = AveragingFunction(m)
    return tuple(fn(row) for row in mat)
