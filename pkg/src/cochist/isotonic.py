"""Isotonic (monotone) regression under L2 and L1 losses.

The L2 solver is pool-adjacent-violators compiled with numba; it handles
unattributed histograms with tens of millions of entries. The L1 solver is
the lower-median variant of PAV, run through a single max-heap so it stays
O(n log n) even when one block swallows most of the input.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numba
import numpy as np

from .errors import InfeasibleBounds


@dataclass(frozen=True)
class IsotonicFit:
    """Nondecreasing fitted values together with their level sets.

    ``starts`` holds the first index of every maximal run of equal values;
    runs are half open, so segment ``s`` covers ``starts[s]:starts[s+1]``.
    """

    values: np.ndarray
    starts: np.ndarray

    @classmethod
    def from_values(cls, values) -> "IsotonicFit":
        values = np.asarray(values, dtype=np.float64)
        if values.size == 0:
            return cls(values, np.zeros(0, dtype=np.int64))
        change = np.flatnonzero(values[1:] != values[:-1]) + 1
        starts = np.concatenate(([0], change)).astype(np.int64)
        return cls(values, starts)

    def __len__(self):
        return self.values.size

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(np.append(self.starts, self.values.size))

    @property
    def segments(self) -> list[tuple[int, int]]:
        stops = np.append(self.starts[1:], self.values.size)
        return [(int(a), int(b)) for a, b in zip(self.starts, stops)]

    def clipped(self, lower=None, upper=None) -> "IsotonicFit":
        return IsotonicFit.from_values(np.clip(self.values, lower, upper))


@numba.njit(cache=True)
def _pav(y, w):
    n = y.size
    vals = np.empty(n)
    wts = np.empty(n)
    cnt = np.empty(n, dtype=np.int64)
    m = 0
    for i in range(n):
        vals[m] = y[i]
        wts[m] = w[i]
        cnt[m] = 1
        m += 1
        while m > 1 and vals[m - 2] >= vals[m - 1]:
            tw = wts[m - 2] + wts[m - 1]
            vals[m - 2] = (vals[m - 2] * wts[m - 2] + vals[m - 1] * wts[m - 1]) / tw
            wts[m - 2] = tw
            cnt[m - 2] += cnt[m - 1]
            m -= 1
    out = np.empty(n)
    k = 0
    for b in range(m):
        for _ in range(cnt[b]):
            out[k] = vals[b]
            k += 1
    return out


def isotonic_l2(y, w=None) -> IsotonicFit:
    """Weighted least-squares nondecreasing fit (pool-adjacent-violators)."""
    y = np.ascontiguousarray(y, dtype=np.float64)
    if w is None:
        w = np.ones_like(y)
    else:
        w = np.ascontiguousarray(w, dtype=np.float64)
        if w.shape != y.shape:
            raise ValueError("weights and values must have the same length")
        if (w <= 0).any():
            raise ValueError("weights must be positive")
    if y.size == 0:
        return IsotonicFit.from_values(y)
    return IsotonicFit.from_values(_pav(y, w))


def _l1_values(y: np.ndarray) -> np.ndarray:
    # The heap holds the pooled entries of the current last block(s); its top
    # is the block's lower median. A backward min-scan recovers the fit.
    heap: list = []
    tops = [None] * len(y)
    for i, v in enumerate(y.tolist()):
        if heap and -heap[0] > v:
            heapq.heapreplace(heap, -v)
            heapq.heappush(heap, -v)
        else:
            heapq.heappush(heap, -v)
        tops[i] = -heap[0]
    out = np.asarray(tops, dtype=np.float64)
    return np.minimum.accumulate(out[::-1])[::-1]


def isotonic_l1(y) -> IsotonicFit:
    """Least-absolute-deviation nondecreasing fit.

    Each level set takes the lower median of its pooled entries, so integer
    input gives integer output.
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size == 0:
        return IsotonicFit.from_values(y)
    return IsotonicFit.from_values(_l1_values(y))


def isotonic_constrained(y, p: int, lower: float, last_value: float) -> IsotonicFit:
    """Nondecreasing fit with every value >= ``lower`` and the last one pinned.

    Pinning the last entry caps all earlier ones at ``last_value``, so the
    problem on the prefix is a box-constrained isotonic regression, which the
    clipped unconstrained fit solves exactly.
    """
    if last_value < lower:
        raise InfeasibleBounds(f"last value {last_value} is below lower bound {lower}")
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size == 0:
        raise ValueError("cannot pin the last value of an empty sequence")
    head = y[:-1]
    fit = isotonic_l1(head) if p == 1 else isotonic_l2(head)
    values = np.append(np.clip(fit.values, lower, last_value), float(last_value))
    return IsotonicFit.from_values(values)


def partition_sizes(fit: IsotonicFit) -> np.ndarray:
    """Size of the level set each index belongs to."""
    lengths = fit.lengths
    return np.repeat(lengths, lengths)


def l2_objective(y, x, w=None) -> float:
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=np.float64)
    return float(np.sum(w * (y - x) ** 2))


def l1_objective(y, x) -> float:
    return float(np.sum(np.abs(np.asarray(y, float) - np.asarray(x, float))))
