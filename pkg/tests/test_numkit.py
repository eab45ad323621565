import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparsedp.numkit import Rng, laplace_inverse_cdf, least_squares, matvec, sample_gaussian, sample_laplace


class TestRng:
    def test_same_seed_same_stream(self):
        a = Rng(42).standard_normal(50)
        b = Rng(42).standard_normal(50)
        assert np.array_equal(a, b)

    def test_children_are_distinct_and_reproducible(self):
        root = Rng(42)
        c1 = root.child("mechanism", 1).standard_normal(10)
        c2 = root.child("mechanism", 2).standard_normal(10)
        c1_again = Rng(42).child("mechanism", 1).standard_normal(10)
        assert not np.array_equal(c1, c2)
        assert np.array_equal(c1, c1_again)

    def test_child_independent_of_parent_consumption(self):
        root = Rng(3)
        root.standard_normal(1000)
        assert np.array_equal(root.child("x").random(5), Rng(3).child("x").random(5))

    def test_label_matters(self):
        assert not np.array_equal(Rng(1).child("a").random(4), Rng(1).child("b").random(4))

    @pytest.mark.parametrize("seed", [-1, 2**64])
    def test_seed_range(self, seed):
        with pytest.raises(ValueError):
            Rng(seed)


class TestGaussian:
    def test_zero_stddev_is_mean(self):
        assert sample_gaussian(Rng(0), 0.0, 0.0) == 0.0
        assert sample_gaussian(Rng(0), 3.5, 0.0) == 3.5

    def test_moments(self):
        x = sample_gaussian(Rng(1), 0.0, 1.0, size=100_000)
        assert abs(x.mean()) <= 0.02
        assert 0.97 <= x.var() <= 1.03

    def test_determinism(self):
        assert np.array_equal(sample_gaussian(Rng(9), 0, 1, size=20), sample_gaussian(Rng(9), 0, 1, size=20))

    def test_negative_stddev(self):
        with pytest.raises(ValueError):
            sample_gaussian(Rng(0), 0.0, -1.0)


class TestLaplace:
    def test_inverse_cdf_at_zero(self):
        assert laplace_inverse_cdf(0.0, 3.0) == 0.0

    def test_mean_abs_and_variance(self):
        x = sample_laplace(Rng(2), 2.0, size=100_000)
        assert 1.94 <= np.abs(x).mean() <= 2.06
        assert 7.6 <= x.var() <= 8.4

    def test_deciles(self):
        # closed-form Laplace quantiles, compared at 5 deciles with tolerance 3/sqrt(N) in probability
        n, b = 100_000, 1.5
        x = np.sort(sample_laplace(Rng(4), b, size=n))

        def cdf(t):
            return np.where(t < 0, 0.5 * np.exp(t / b), 1 - 0.5 * np.exp(-t / b))

        for q in (0.1, 0.3, 0.5, 0.7, 0.9):
            assert abs(cdf(x[int(q * n)]) - q) <= 3 / np.sqrt(n)

    @pytest.mark.parametrize("scale", [0.0, -1.0])
    def test_rejects_non_positive_scale(self, scale):
        with pytest.raises(ValueError):
            sample_laplace(Rng(0), scale)

    def test_scalar_draw(self):
        assert isinstance(sample_laplace(Rng(0), 1.0), float)


class TestLeastSquares:
    def test_identity(self):
        np.testing.assert_allclose(least_squares(np.eye(2), [1.0, 2.0]), [1.0, 2.0])

    def test_single_column(self):
        np.testing.assert_allclose(least_squares([[1.0], [1.0]], [1.0, 3.0]), [2.0])

    def test_zero_matrix_min_norm(self):
        np.testing.assert_array_equal(least_squares(np.zeros((2, 2)), [1.0, 1.0]), [0.0, 0.0])

    def test_rank_deficient_matches_pinv(self):
        a = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0], [1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
        a[:, 2] = a[:, 0] + a[:, 1]
        y = np.array([1.0, -1.0, 2.0, 0.5])
        np.testing.assert_allclose(least_squares(a, y), np.linalg.pinv(a) @ y, atol=1e-10)

    def test_underdetermined_min_norm(self):
        a = np.random.default_rng(0).standard_normal((3, 7))
        y = np.array([1.0, 2.0, 3.0])
        x = least_squares(a, y)
        np.testing.assert_allclose(a @ x, y, atol=1e-10)
        np.testing.assert_allclose(x, np.linalg.pinv(a) @ y, atol=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            least_squares(np.eye(3), [1.0, 2.0])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 8), st.integers(0, 12), st.integers(0, 2**32 - 1))
    def test_residual_orthogonal(self, m, extra, seed):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((m + extra, m))
        y = rng.standard_normal(m + extra)
        x = least_squares(a, y)
        scale = np.linalg.norm(a) * np.linalg.norm(y) + 1.0
        assert np.linalg.norm(a.T @ (a @ x - y)) <= 1e-8 * scale


class TestMatvec:
    def test_identity(self):
        np.testing.assert_array_equal(matvec(np.eye(3), [1.0, 2.0, 3.0]), [1.0, 2.0, 3.0])

    def test_zero(self):
        np.testing.assert_array_equal(matvec(np.zeros((2, 3)), [1.0, 2.0, 3.0]), [0.0, 0.0])

    def test_small(self):
        np.testing.assert_array_equal(matvec([[1.0, 2.0], [3.0, 4.0]], [1.0, 1.0]), [3.0, 7.0])

    def test_mismatch(self):
        with pytest.raises(ValueError):
            matvec(np.eye(2), [1.0, 2.0, 3.0])
