import math

import numpy as np
import pytest

from cochist import privacy as P
from cochist.errors import EmptyHistogram, NonPositiveLevels


class ZeroNoise(P.SeededRng):
    def laplace(self, scale):
        return 0.0


def test_child_streams_are_order_independent():
    a = P.SeededRng(3)
    a.generator.random(10)
    x = a.child("US/S01").generator.integers(0, 1 << 30, 5)
    y = P.SeededRng(3).child("US/S01").generator.integers(0, 1 << 30, 5)
    assert x.tolist() == y.tolist()
    z = P.SeededRng(3).child("US/S02").generator.integers(0, 1 << 30, 5)
    assert x.tolist() != z.tolist()


def test_as_rng():
    assert isinstance(P.as_rng(None), P.SeededRng)
    assert P.as_rng(5).seed == 5
    r = P.SeededRng(1)
    assert P.as_rng(r) is r


def test_noise_scale():
    assert P.noise_scale(2, 0.5) == 4
    assert P.noise_scale(1, math.inf) == 0
    with pytest.raises(ValueError):
        P.noise_scale(1, 0)


def test_zero_scale_gives_no_noise():
    assert P.sample_double_geometric(0, P.SeededRng(1)) == 0
    assert P.add_noise([5, 5], 0, P.SeededRng(1)).tolist() == [5, 5]


def test_add_noise_deterministic():
    a = P.add_noise(np.arange(50), 2.0, P.SeededRng(9))
    b = P.add_noise(np.arange(50), 2.0, P.SeededRng(9))
    assert a.tolist() == b.tolist()
    assert a.dtype == np.int64


def test_add_noise_unbiased():
    n = 100_000
    noise = P.add_noise(np.zeros(n, dtype=np.int64), 1.0, P.SeededRng(2))
    se = math.sqrt(P.double_geometric_variance(1.0) / n)
    assert abs(noise.mean()) < 3 * se


def test_probability_of_zero_at_eps_one():
    x = P.sample_double_geometric(1.0, P.SeededRng(4), size=1_000_000)
    expected = (1 - math.exp(-1)) / (1 + math.exp(-1))
    assert abs(expected - 0.4621) < 1e-4
    assert abs((x == 0).mean() - expected) < 0.002
    assert abs(x.var() - 2 * math.exp(-1) / (1 - math.exp(-1)) ** 2) < 0.02


def test_pmf_sums_to_one():
    k = np.arange(-400, 401)
    assert abs(P.double_geometric_pmf(k, 5.0).sum() - 1) < 1e-12


def test_split_budget():
    assert P.split_budget(1.0, 2) == [0.5, 0.5]
    assert P.split_budget(1.0, 3) == pytest.approx([1 / 3] * 3)
    assert P.split_budget(0.3, 1) == [0.3]
    with pytest.raises(NonPositiveLevels):
        P.split_budget(1.0, 0)


class TestSizeBound:
    def test_default_epsilon(self):
        assert P.DEFAULT_BOUND_EPSILON == 1e-4

    def test_forced_zero_noise(self):
        assert P.estimate_size_bound([1, 4, 10], 1.0, ZeroNoise(0)) == 18

    def test_empty(self):
        with pytest.raises(EmptyHistogram):
            P.estimate_size_bound([], 1.0, P.SeededRng(0))

    def test_exceeds_max_with_high_probability(self):
        hg = np.array([1, 2, 50])
        hits = sum(P.estimate_size_bound(hg, 0.5, P.SeededRng(s)) >= 50 for s in range(10_000))
        assert hits / 10_000 >= 0.999


def test_privacy_account():
    acct = P.PrivacyAccount([0.25, 0.25], 1e-4)
    assert acct.total == pytest.approx(0.5001)
    assert acct.to_dict()["level_epsilons"] == [0.25, 0.25]
