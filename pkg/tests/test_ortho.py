import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ogan import ndnum as nd
from ogan import ortho

ATOL = 1e-6


def vectors(min_size=3, max_size=16):
    return st.integers(min_size, max_size).flatmap(
        lambda n: arrays(np.float64, n, elements=st.floats(-10, 10, allow_nan=False)))


def spread_out(v):
    return np.std(v) > 1e-3


class TestAvg:
    @pytest.mark.parametrize("v, expected", [([1, 2, 3], 2.0), ([0, 0, 0, 0], 0.0), ([-1, 1], 0.0)])
    def test_examples(self, v, expected):
        assert abs(ortho.avg(v) - expected) <= ATOL

    def test_empty_vector_is_an_error(self):
        with pytest.raises(ValueError):
            ortho.avg(np.zeros(0))

    def test_row_wise_on_batches(self):
        out = ortho.avg(np.array([[1.0, 2, 3], [4, 4, 4]]))
        assert out.tolist() == [2.0, 4.0]


class TestStd:
    def test_examples(self):
        assert abs(ortho.std([1, 2, 3]) - math.sqrt(2 / 3)) <= ATOL
        assert abs(ortho.std([1, 2, 3]) - 0.8164966) <= ATOL
        assert ortho.std([5, 5, 5]) == 0.0

    @pytest.mark.parametrize("a", [0.0, 0.5, 3.0, 1e3])
    def test_two_point_symmetry(self, a):
        assert abs(ortho.std([-a, a]) - a) <= ATOL * max(1.0, a)

    def test_population_divisor(self):
        v = np.array([2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0])
        assert ortho.std(v) == pytest.approx(np.std(v, ddof=0), abs=1e-12)
        assert ortho.std(v) != pytest.approx(np.std(v, ddof=1), abs=1e-6)


class TestNormalize:
    def test_example(self):
        out = ortho.normalize([1, 2, 3], eps=0.0)
        np.testing.assert_allclose(out, [-1.2247449, 0.0, 1.2247449], atol=ATOL)

    def test_fixed_point(self):
        v = np.array([-1.2247449, 0.0, 1.2247449, 0.0]) * math.sqrt(4 / 3)
        v = (v - v.mean()) / v.std()
        np.testing.assert_allclose(ortho.normalize(v, eps=0.0), v, atol=ATOL)

    def test_constant_vector_with_zero_eps_is_singular(self):
        with pytest.raises(nd.SingularityError):
            ortho.normalize([7, 7, 7], eps=0.0)

    def test_constant_vector_with_eps_is_zero(self):
        assert not np.any(ortho.normalize([7.0, 7.0, 7.0]))

    def test_short_vectors_rejected(self):
        with pytest.raises(ValueError):
            ortho.normalize([1.0, 2.0])

    @settings(max_examples=200, deadline=None)
    @given(vectors())
    def test_output_is_standardised(self, v):
        if not spread_out(v):
            return
        out = ortho.normalize(v, eps=1e-8)
        assert abs(out.mean()) < 1e-5
        assert abs(out.std() - 1) < 1e-3


class TestPearson:
    @pytest.mark.parametrize("z, z_hat, expected", [
        ([1, 2, 3], [2, 4, 6], 1.0),
        ([1, 2, 3], [3, 2, 1], -1.0),
        ([1, 0, -1], [0, 1, 0], 0.0),
    ])
    def test_examples(self, z, z_hat, expected):
        assert abs(ortho.pearson(z, z_hat, eps=0.0) - expected) <= ATOL
        assert abs(ortho.pearson(z, z_hat) - expected) <= ATOL

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            ortho.pearson([1, 2, 3], [1, 2, 3, 4])

    def test_both_constant_with_zero_eps_is_singular(self):
        with pytest.raises(nd.SingularityError):
            ortho.pearson([2, 2, 2], [3, 3, 3], eps=0.0)

    def test_constant_with_eps_is_zero(self):
        assert ortho.pearson([2, 2, 2], [3, 3, 3]) == 0.0
        assert ortho.pearson([1, 2, 3], [0, 0, 0]) == 0.0

    @settings(max_examples=300, deadline=None)
    @given(vectors(), st.floats(0.01, 100), st.floats(-100, 100))
    def test_affine_invariance(self, z, a, b):
        z_hat = np.roll(z, 1) + np.linspace(0, 1, len(z))
        if not (spread_out(z) and spread_out(z_hat)):
            return
        base = ortho.pearson(z, z_hat, eps=0.0)
        assert ortho.pearson(z, a * z_hat + b, eps=0.0) == pytest.approx(base, abs=1e-5)
        assert ortho.pearson(z, -a * z_hat + b, eps=0.0) == pytest.approx(-base, abs=1e-5)

    @settings(max_examples=300, deadline=None)
    @given(vectors(), vectors())
    def test_range(self, z, w):
        n = min(len(z), len(w))
        rho = ortho.pearson(z[:n], w[:n])
        assert -1 - 1e-9 <= rho <= 1 + 1e-9

    def test_gradients_pass_grad_check(self):
        rng = np.random.default_rng(11)
        z, zh = nd.placeholder("z"), nd.placeholder("zh")
        root = ortho.pearson(z, zh)
        for _ in range(20):
            feeds = {"z": rng.standard_normal(8), "zh": rng.standard_normal(8)}
            for leaf in feeds:
                assert nd.grad_check(root, leaf, feeds, 1e-3, 1e-4).passed

    def test_noise_lowers_correlation_monotonically(self):
        rng = nd.Rng(21)
        z = rng.normal((2000, 8), dtype=np.float64)
        means = []
        for sigma in (0.1, 1.0, 3.0):
            noise = rng.normal((2000, 8), dtype=np.float64)
            means.append(float(np.mean(ortho.pearson(z, z + sigma * noise))))
        assert means[0] > means[1] > means[2]


class TestNormalizedMse:
    def test_examples(self):
        assert abs(ortho.normalized_mse([1, 2, 3], [3, 2, 1], eps=0.0) - 12.0) <= 1e-5
        assert ortho.normalized_mse([1, 2, 3], [1, 2, 3], eps=0.0) == 0.0

    def test_identity_on_random_pair(self):
        rng = np.random.default_rng(2)
        z, zh = rng.standard_normal(8), rng.standard_normal(8)
        lhs = ortho.normalized_mse(z, zh, eps=0.0)
        rhs = 2 * 8 * (1 - ortho.pearson(z, zh, eps=0.0))
        assert abs(lhs - rhs) < 1e-5

    def test_identity_over_1000_pairs(self):
        rng = nd.Rng(3)
        sizes = 3 + rng.integers(14, 1000)
        worst = 0.0
        for n in sizes:
            z = rng.normal(int(n), dtype=np.float64)
            zh = rng.normal(int(n), dtype=np.float64)
            lhs = ortho.normalized_mse(z, zh, eps=0.0)
            rhs = 2 * n * (1 - ortho.pearson(z, zh, eps=0.0))
            worst = max(worst, abs(lhs - rhs))
        assert worst < 1e-4
