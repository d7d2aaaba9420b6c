"""Integer noise, budget splitting and the private size-bound estimate."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyHistogram, NonPositiveLevels

_MASK64 = (1 << 64) - 1

#: budget set aside for estimating the size bound when none is supplied
DEFAULT_BOUND_EPSILON = 1e-4


def _key_word(key) -> int:
    digest = hashlib.blake2b(str(key).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


class SeededRng:
    """Reproducible random source that can be split by key.

    ``rng.child("US/S1")`` always yields the same stream for the same root
    seed, no matter how many draws the parent has already made or in which
    order children are created.
    """

    def __init__(self, seed: int, path: tuple = ()):
        self.seed = int(seed) & _MASK64
        self.path = tuple(path)
        ss = np.random.SeedSequence(
            self.seed, spawn_key=tuple(_key_word(k) for k in self.path)
        )
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, key) -> "SeededRng":
        return SeededRng(self.seed, self.path + (key,))

    def laplace(self, scale: float) -> float:
        return float(self.generator.laplace(0.0, scale))

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, path={self.path!r})"


def as_rng(rng) -> SeededRng:
    if isinstance(rng, SeededRng):
        return rng
    if rng is None:
        return SeededRng(0)
    return SeededRng(int(rng))


def noise_scale(sensitivity: float, epsilon: float) -> float:
    """Scale ``sensitivity / epsilon``; an infinite budget means no noise."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if math.isinf(epsilon):
        return 0.0
    return sensitivity / epsilon


def geometric_alpha(scale: float) -> float:
    return math.exp(-1.0 / scale) if scale > 0 else 0.0


def double_geometric_variance(scale: float) -> float:
    a = geometric_alpha(scale)
    return 2 * a / (1 - a) ** 2


def double_geometric_pmf(k, scale: float):
    """P(X = k) for the two-sided geometric law with ratio ``exp(-1/scale)``."""
    a = geometric_alpha(scale)
    k = np.abs(np.asarray(k))
    return (1 - a) / (1 + a) * a ** k


def sample_double_geometric(scale: float, rng, size=None):
    """Draw two-sided geometric noise as the difference of two geometric draws.

    Scale 0 is the degenerate limit and returns zeros without touching the rng.
    """
    if scale < 0:
        raise ValueError("noise scale must be nonnegative")
    if scale == 0:
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    gen = as_rng(rng).generator
    p = -math.expm1(-1.0 / scale)
    x = gen.geometric(p, size) - gen.geometric(p, size)
    if size is None:
        return int(x)
    return x.astype(np.int64, copy=False)


def add_noise(values, scale: float, rng) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    return values + sample_double_geometric(scale, rng, size=values.shape)


def split_budget(total: float, levels: int) -> list[float]:
    if levels < 1:
        raise NonPositiveLevels(f"need at least one level, got {levels}")
    if total <= 0:
        raise ValueError("epsilon must be positive")
    return [total / levels] * levels


def estimate_size_bound(hg, eps_k: float = DEFAULT_BOUND_EPSILON, rng=None) -> int:
    """Noisy upper bound on the largest group size.

    Adds Laplace(1/eps_k) to the true maximum plus five standard deviations,
    so the bound falls below the true maximum with probability under 0.0005.
    """
    hg = np.asarray(hg)
    if hg.size == 0:
        raise EmptyHistogram("cannot bound the size of an empty histogram")
    if eps_k <= 0:
        raise ValueError("epsilon must be positive")
    x = float(hg.max())
    noise = as_rng(rng).laplace(1.0 / eps_k)
    k = math.ceil(x + noise + 5 * math.sqrt(2) / eps_k)
    return max(1, k)


@dataclass
class PrivacyAccount:
    """Budget spent by one release: sequential across levels, parallel within."""

    level_epsilons: list[float] = field(default_factory=list)
    size_bound_epsilon: float = 0.0

    @property
    def total(self) -> float:
        return math.fsum(self.level_epsilons) + self.size_bound_epsilon

    def to_dict(self) -> dict:
        return {
            "level_epsilons": list(self.level_epsilons),
            "size_bound_epsilon": self.size_bound_epsilon,
            "total": self.total,
        }
