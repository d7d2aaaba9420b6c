"""Count-of-counts histogram representations and the earthmover's distance.

Three equivalent views of the same data are used throughout:

* count histogram ``h``: ``h[i]`` is the number of groups with exactly ``i`` members
* cumulative histogram ``hc``: ``hc[i]`` is the number of groups with at most ``i`` members
* unattributed histogram ``hg``: the sorted list of group sizes, one entry per group

All functions take array-likes and return fresh ``int64`` numpy arrays.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DecreasingInput, MalformedRow, TotalMismatch

FORMAT_TAG = "coc-v1"
REPRESENTATIONS = ("count", "cumulative", "unattributed")


def _as_int_array(x) -> np.ndarray:
    arr = np.asarray(x)
    if arr.size == 0:
        return np.zeros(0, dtype=np.int64)
    if arr.dtype.kind == "f":
        rounded = np.rint(arr)
        if not np.array_equal(rounded, arr):
            raise ValueError("histogram entries must be integral")
        arr = rounded
    return arr.astype(np.int64, copy=False).ravel()


def _check_nondecreasing(arr: np.ndarray, what: str) -> None:
    if arr.size > 1:
        bad = np.flatnonzero(arr[1:] < arr[:-1])
        if bad.size:
            i = int(bad[0])
            raise DecreasingInput(
                f"{what} decreases at index {i}: {arr[i]} > {arr[i + 1]}"
            )


def to_cumulative(h) -> np.ndarray:
    return np.cumsum(_as_int_array(h), dtype=np.int64)


def from_cumulative(hc) -> np.ndarray:
    hc = _as_int_array(hc)
    _check_nondecreasing(hc, "cumulative histogram")
    if hc.size == 0:
        return hc.copy()
    return np.diff(hc, prepend=0)


def to_unattributed(h) -> np.ndarray:
    h = _as_int_array(h)
    if (h < 0).any():
        raise ValueError("count histogram has negative entries")
    return np.repeat(np.arange(h.size, dtype=np.int64), h)


def from_unattributed(hg, k: int | None = None) -> np.ndarray:
    """Count how many groups have each size.

    With a size bound ``k`` the result has length ``k + 1`` and every size
    above ``k`` is counted at ``k``. Without one the result is just long
    enough to hold the largest size.
    """
    hg = _as_int_array(hg)
    _check_nondecreasing(hg, "unattributed histogram")
    if hg.size and hg[0] < 0:
        raise ValueError("group sizes must be nonnegative")
    if k is None:
        length = int(hg[-1]) + 1 if hg.size else 0
        return np.bincount(hg, minlength=length).astype(np.int64)
    if k < 1:
        raise ValueError("size bound must be >= 1")
    return np.bincount(np.minimum(hg, k), minlength=k + 1).astype(np.int64)


def truncate_extend(h, k: int) -> np.ndarray:
    """Resize ``h`` to length ``k + 1``, folding every size above ``k`` into ``k``."""
    if k < 1:
        raise ValueError("size bound must be >= 1")
    h = _as_int_array(h)
    out = np.zeros(k + 1, dtype=np.int64)
    n = min(h.size, k)
    out[:n] = h[:n]
    if h.size > k:
        out[k] = h[k:].sum()
    return out


def pad(h, length: int) -> np.ndarray:
    h = _as_int_array(h)
    if h.size >= length:
        return h
    out = np.zeros(length, dtype=np.int64)
    out[: h.size] = h
    return out


def emd(h1, h2) -> int:
    """Earthmover's distance between two count histograms with equal group totals.

    Computed as the L1 distance between cumulative histograms; the shorter
    histogram is zero padded first, so lengths may differ.
    """
    a = _as_int_array(h1)
    b = _as_int_array(h2)
    if a.sum() != b.sum():
        raise TotalMismatch(f"group totals differ: {a.sum()} vs {b.sum()}")
    n = max(a.size, b.size)
    return int(np.abs(np.cumsum(pad(a, n)) - np.cumsum(pad(b, n))).sum())


def write_histogram(path, values, representation: str = "count") -> None:
    if representation not in REPRESENTATIONS:
        raise ValueError(f"unknown representation {representation!r}")
    values = _as_int_array(values)
    lines = [f"{FORMAT_TAG} {representation} {values.size}"]
    lines.extend(str(int(v)) for v in values)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_histogram(path) -> tuple[str, np.ndarray]:
    """Read a ``coc-v1`` file, returning ``(representation, values)``."""
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != FORMAT_TAG:
            raise MalformedRow(f"bad header {' '.join(header)!r}", path, 1)
        rep = header[1]
        if rep not in REPRESENTATIONS:
            raise MalformedRow(f"unknown representation {rep!r}", path, 1)
        try:
            length = int(header[2])
        except ValueError:
            raise MalformedRow(f"bad length {header[2]!r}", path, 1) from None
        values = []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            try:
                values.append(int(line))
            except ValueError:
                raise MalformedRow(f"not an integer: {line!r}", path, lineno) from None
    if len(values) != length:
        raise MalformedRow(f"header says {length} values, found {len(values)}", path)
    return rep, np.asarray(values, dtype=np.int64)


def read_count_histogram(path) -> np.ndarray:
    """Read any ``coc-v1`` file and convert it to the count representation."""
    rep, values = read_histogram(path)
    if rep == "cumulative":
        return from_cumulative(values)
    if rep == "unattributed":
        return from_unattributed(values)
    return values
