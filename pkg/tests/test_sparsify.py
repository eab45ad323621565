import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sparsedp.sparsify import SparseVector, to_dense, top_k

finite = st.floats(-1e6, 1e6, allow_nan=False, allow_infinity=False)


def brute_force_best(v, kappa):
    """Smallest residual over every support of size kappa."""
    return min(
        float(np.sum(np.delete(v, list(s)) ** 2))
        for s in itertools.combinations(range(len(v)), kappa)
    )


class TestTopK:
    def test_full_kappa_is_identity(self):
        v = np.array([0.3, -2.0, 1.0])
        np.testing.assert_array_equal(top_k(v, 3).to_dense(), v)

    def test_forced_example(self):
        np.testing.assert_array_equal(top_k([3.0, -5.0, 1.0, 0.5], 2).to_dense(), [3.0, -5.0, 0.0, 0.0])

    def test_tie_goes_to_lowest_index(self):
        np.testing.assert_array_equal(top_k([1.0, -1.0, 0.0], 1).to_dense(), [1.0, 0.0, 0.0])
        np.testing.assert_array_equal(top_k([0.0, 2.0, -2.0, 2.0], 2).to_dense(), [0.0, 2.0, -2.0, 0.0])

    def test_zero_entries_not_stored(self):
        s = top_k([0.0, 0.0, 4.0], 2)
        assert s.nnz == 1
        assert list(s.indices) == [2]

    @pytest.mark.parametrize("kappa", [0, 4])
    def test_kappa_range(self, kappa):
        with pytest.raises(ValueError):
            top_k([1.0, 2.0, 3.0], kappa)

    @settings(max_examples=300, deadline=None)
    @given(st.integers(1, 10).flatmap(lambda n: st.tuples(arrays(np.float64, n, elements=finite), st.integers(1, min(3, n)))))
    def test_matches_brute_force(self, case):
        v, kappa = case
        residual = float(np.sum((top_k(v, kappa).to_dense() - v) ** 2))
        assert residual == pytest.approx(brute_force_best(v, kappa), rel=1e-12, abs=1e-12)

    @pytest.mark.parametrize("kappa", [1, 8, 32])
    def test_residual_bound(self, kappa):
        rng = np.random.default_rng(kappa)
        for _ in range(1000):
            v = rng.standard_normal(64)
            q = top_k(v, kappa).to_dense()
            assert np.sum((q - v) ** 2) <= (1 - kappa / 64) * np.sum(v**2) + 1e-12

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, st.integers(1, 30), elements=finite), st.data())
    def test_idempotent(self, v, data):
        kappa = data.draw(st.integers(1, len(v)))
        once = top_k(v, kappa)
        assert top_k(once.to_dense(), kappa) == once

    @settings(max_examples=200, deadline=None)
    @given(arrays(np.float64, st.integers(1, 30), elements=finite), st.data())
    def test_invariants(self, v, data):
        kappa = data.draw(st.integers(1, len(v)))
        s = top_k(v, kappa)
        assert s.nnz <= kappa
        assert np.all(np.diff(s.indices) > 0)
        assert np.all(s.values != 0)
        np.testing.assert_array_equal(s.values, v[s.indices])


class TestSparseVector:
    def test_empty_to_dense(self):
        np.testing.assert_array_equal(to_dense(SparseVector(3, [], [])), [0.0, 0.0, 0.0])

    def test_single_entry(self):
        np.testing.assert_array_equal(to_dense(SparseVector(3, [1], [2.5])), [0.0, 2.5, 0.0])

    def test_round_trip(self):
        s = SparseVector(10, [0, 4, 9], [1.0, -3.0, 0.5])
        assert top_k(to_dense(s), 3) == s
        assert top_k(to_dense(s), 5) == s

    @pytest.mark.parametrize(
        "idx, val",
        [([2, 1], [1.0, 1.0]), ([1, 1], [1.0, 1.0]), ([3], [1.0]), ([0], [0.0]), ([-1], [1.0])],
    )
    def test_rejects_bad_entries(self, idx, val):
        with pytest.raises(ValueError):
            SparseVector(3, idx, val)

    def test_from_dense(self):
        s = SparseVector.from_dense([0.0, 1.5, 0.0, -2.0])
        assert list(s.indices) == [1, 3]
        np.testing.assert_array_equal(s.values, [1.5, -2.0])
