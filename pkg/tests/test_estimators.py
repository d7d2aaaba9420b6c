import math

import numpy as np
import pytest

from cochist import histogram as H
from cochist.errors import InfeasibleTotal
from cochist.estimators import (
    DEFAULT_K,
    EstimatorKind,
    estimate,
    estimate_hc,
    estimate_hg,
    estimate_naive,
    parse_kinds,
    project_simplex,
    round_cumulative,
    round_half_up,
    round_largest_fractional,
)
from cochist.isotonic import isotonic_l2
from cochist.privacy import SeededRng

from oracles import simplex_oracle

INF = math.inf


def test_defaults():
    assert DEFAULT_K == 100_000
    assert EstimatorKind.parse("hc") is EstimatorKind.HC_L1
    assert EstimatorKind.parse("HC_L2") is EstimatorKind.HC_L2
    assert parse_kinds("hc,hg") == [EstimatorKind.HC_L1, EstimatorKind.HG]
    with pytest.raises(ValueError):
        EstimatorKind.parse("foo")


class TestRounding:
    def test_largest_fractional(self):
        assert round_largest_fractional([1.6, 1.6, 1.8], 5).tolist() == [2, 1, 2]
        assert round_largest_fractional([1, 2, 3], 6).tolist() == [1, 2, 3]
        assert round_largest_fractional([0.5, 0.5, 0.5], 1).tolist() == [1, 0, 0]

    def test_infeasible(self):
        with pytest.raises(InfeasibleTotal):
            round_largest_fractional([0.5, 0.5], 5)

    def test_half_up(self):
        assert round_half_up([0.5, 1.49, 2.5, -0.5]).tolist() == [1, 1, 3, 0]

    def test_round_cumulative(self):
        assert round_cumulative([0.4, 2.6, 2.2, 7.0, 3], 4).tolist() == [0, 3, 3, 4, 4]


class TestSimplex:
    def test_feasible(self):
        assert project_simplex([1, 2, 0], 3).tolist() == [1, 2, 0]

    def test_two_cells(self):
        assert project_simplex([2, 0], 1).tolist() == [1, 0]
        assert project_simplex([-1, 3], 2).tolist() == [0, 2]

    def test_zero_total(self):
        assert project_simplex([1, -2, 3], 0).tolist() == [0, 0, 0]

    def test_matches_oracle(self):
        gen = np.random.default_rng(0)
        for _ in range(200):
            v = gen.normal(0, 5, int(gen.integers(1, 9)))
            total = float(gen.uniform(0, 20))
            got = project_simplex(v, total)
            assert np.allclose(got, simplex_oracle(v, total), atol=1e-9)


class TestZeroNoise:
    h = np.array([0, 3, 2, 0, 1, 0, 4])

    def test_naive(self):
        est = estimate_naive(self.h, 10, 8, INF, SeededRng(0))
        assert est.hat_h.tolist() == H.truncate_extend(self.h, 8).tolist()
        assert estimate_naive(self.h, 10, 4, INF, SeededRng(0)).hat_h.tolist() == [0, 3, 2, 0, 5]

    def test_hg(self):
        hg = H.to_unattributed(self.h)
        assert estimate_hg(hg, INF, SeededRng(0)).hat_hg.tolist() == hg.tolist()

    @pytest.mark.parametrize("p", [1, 2])
    def test_hc(self, p):
        hc = H.to_cumulative(H.truncate_extend(self.h, 8))
        est = estimate_hc(hc, 10, 8, INF, p, SeededRng(0))
        assert est.hat_h.tolist() == H.truncate_extend(self.h, 8).tolist()


def test_hg_worked_refit():
    # sizes [2,3,3,4,4,4] noised to [0,4,2,4,5,3] refit to [0,3,3,4,4,4]
    fit = isotonic_l2(np.array([0, 4, 2, 4, 5, 3]))
    assert round_half_up(fit.clipped(lower=0).values).tolist() == [0, 3, 3, 4, 4, 4]


def test_hc_validates_input():
    with pytest.raises(ValueError):
        estimate_hc([0, 1, 2], 2, 5, 1.0, 1, SeededRng(0))
    with pytest.raises(ValueError):
        estimate_hc([0, 1, 2], 3, 2, 1.0, 1, SeededRng(0))


def test_hc_default_is_l1():
    est = estimate("hc", [0, 2, 1], 3, 5, 1.0, SeededRng(0))
    assert est.kind is EstimatorKind.HC_L1


def test_empty_node():
    for kind in EstimatorKind:
        est = estimate(kind, [0], 0, 5, 1.0, SeededRng(0))
        assert est.hat_h.sum() == 0 and est.groups == 0


@pytest.mark.parametrize("kind", list(EstimatorKind))
def test_outputs_are_valid(kind):
    gen = np.random.default_rng(3)
    for seed in range(30):
        h = np.bincount(gen.geometric(0.3, int(gen.integers(1, 200))), minlength=2)
        g = int(h.sum())
        k = int(gen.integers(5, 40))
        est = estimate(kind, h, g, k, float(gen.choice([0.1, 1.0])), SeededRng(seed))
        assert est.hat_h.dtype.kind == "i"
        assert (est.hat_h >= 0).all()
        assert est.hat_h.sum() == g
        assert est.hat_hg.size == g
        assert np.all(np.diff(est.hat_hg) >= 0)


def test_deterministic():
    h = [0, 5, 3, 1, 0, 2]
    for kind in EstimatorKind:
        a = estimate(kind, h, 11, 10, 0.5, SeededRng(4).child("n"))
        b = estimate(kind, h, 11, 10, 0.5, SeededRng(4).child("n"))
        assert a.hat_h.tolist() == b.hat_h.tolist()
