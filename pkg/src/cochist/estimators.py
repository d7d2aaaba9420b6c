"""Single-node private estimators of a count-of-counts histogram.

Every estimator returns a :class:`NodeEstimate` whose histogram is integral,
nonnegative and sums to the public group total.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import histogram as hist
from .errors import InfeasibleTotal
from .isotonic import IsotonicFit, isotonic_constrained, isotonic_l2
from .privacy import add_noise, noise_scale

#: public size bound used when nothing better is known
DEFAULT_K = 100_000


class EstimatorKind(str, enum.Enum):
    NAIVE = "naive"
    HG = "hg"
    HC_L1 = "hc"
    HC_L2 = "hc-l2"

    @classmethod
    def parse(cls, text: str) -> "EstimatorKind":
        key = text.strip().lower().replace("_", "-")
        aliases = {"hc-l1": "hc", "h_c": "hc", "h_g": "hg"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown estimator {text!r} (choose from {choices})") from None


def parse_kinds(text) -> list[EstimatorKind]:
    if isinstance(text, str):
        text = text.split(",")
    return [k if isinstance(k, EstimatorKind) else EstimatorKind.parse(k) for k in text]


@dataclass
class NodeEstimate:
    hat_h: np.ndarray
    hat_hg: np.ndarray
    fit: IsotonicFit | None
    kind: EstimatorKind
    eps_used: float

    @property
    def groups(self) -> int:
        return int(self.hat_hg.size)


def round_half_up(x) -> np.ndarray:
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5).astype(np.int64)


def round_largest_fractional(v, total: int) -> np.ndarray:
    """Round to integers summing to ``total``.

    Cells with the largest fractional parts are rounded up, the rest down;
    equal fractional parts go to the lower index first.
    """
    v = np.asarray(v, dtype=np.float64)
    floors = np.floor(v)
    r = int(total) - int(floors.sum())
    if r < 0 or r > v.size:
        raise InfeasibleTotal(
            f"cannot round {v.size} cells summing to {v.sum():g} onto total {total}"
        )
    out = floors.astype(np.int64)
    if r:
        frac = v - floors
        order = np.argsort(-frac, kind="stable")
        out[order[:r]] += 1
    return out


def project_simplex(v, total: float) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{x >= 0, sum(x) = total}``."""
    v = np.asarray(v, dtype=np.float64)
    if total < 0:
        raise ValueError("total must be nonnegative")
    if v.size == 0:
        if total:
            raise ValueError("cannot place a positive total on zero cells")
        return v.copy()
    if total == 0:
        return np.zeros_like(v)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    idx = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / idx > 0)[-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def estimate_naive(h, g: int, k: int, eps: float, rng) -> NodeEstimate:
    """Noise every cell of the truncated histogram, project, round."""
    truncated = hist.truncate_extend(h, k)
    noisy = add_noise(truncated, noise_scale(2, eps), rng)
    projected = project_simplex(noisy, g)
    hat_h = round_largest_fractional(projected, g)
    return NodeEstimate(hat_h, hist.to_unattributed(hat_h), None, EstimatorKind.NAIVE, eps)


def estimate_hg(hg, eps: float, rng) -> NodeEstimate:
    """Noise the sorted group sizes, refit monotonically, round."""
    hg = np.asarray(hg, dtype=np.int64)
    if hg.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return NodeEstimate(empty, empty, IsotonicFit.from_values(empty), EstimatorKind.HG, eps)
    noisy = add_noise(hg, noise_scale(1, eps), rng)
    fit = isotonic_l2(noisy).clipped(lower=0)
    hat_hg = round_half_up(fit.values)
    return NodeEstimate(hist.from_unattributed(hat_hg), hat_hg, fit, EstimatorKind.HG, eps)


def round_cumulative(values, g: int) -> np.ndarray:
    """Round a fitted cumulative histogram, keeping it monotone and ending at ``g``."""
    out = np.clip(round_half_up(values), 0, g)
    out = np.maximum.accumulate(out)
    if out.size:
        out[-1] = g
    return out


def estimate_hc(hc, g: int, k: int, eps: float, p: int, rng) -> NodeEstimate:
    """Noise the cumulative histogram, refit with the total pinned, round."""
    hc = np.asarray(hc, dtype=np.int64)
    if hc.size != k + 1:
        raise ValueError(f"cumulative histogram must have length K+1={k + 1}")
    if hc[-1] != g:
        raise ValueError(f"cumulative histogram ends at {hc[-1]}, expected G={g}")
    noisy = add_noise(hc, noise_scale(1, eps), rng)
    fit = isotonic_constrained(noisy, p, lower=0, last_value=g)
    hat_h = hist.from_cumulative(round_cumulative(fit.values, g))
    kind = EstimatorKind.HC_L1 if p == 1 else EstimatorKind.HC_L2
    return NodeEstimate(hat_h, hist.to_unattributed(hat_h), fit, kind, eps)


def estimate(kind, h, g: int, k: int, eps: float, rng) -> NodeEstimate:
    """Run the estimator ``kind`` on the true count histogram ``h``."""
    kind = EstimatorKind.parse(kind) if isinstance(kind, str) else kind
    if kind is EstimatorKind.NAIVE:
        return estimate_naive(h, g, k, eps, rng)
    if kind is EstimatorKind.HG:
        return estimate_hg(hist.to_unattributed(h), eps, rng)
    hc = hist.to_cumulative(hist.truncate_extend(h, k))
    return estimate_hc(hc, g, k, eps, 1 if kind is EstimatorKind.HC_L1 else 2, rng)
