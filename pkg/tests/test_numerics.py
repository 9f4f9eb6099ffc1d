"""Scalar helpers and labeled random streams."""

import math

import numpy as np
import pytest

from ansrec.numerics import (argmax_lowest_id, candidate_scores, dot_scores,
                             sigmoid, softplus)
from ansrec.rng import rng_stream


class TestSigmoid:
    def test_frozen_values(self):
        assert sigmoid(0.0) == 0.5
        assert sigmoid(1.0) == pytest.approx(0.7310585786300049, abs=1e-16)
        assert sigmoid(-1.0) == pytest.approx(0.2689414213699951, abs=1e-16)

    def test_extremes_stay_finite(self):
        with np.errstate(over="raise"):
            assert sigmoid(1000.0) == 1.0
            assert sigmoid(-1000.0) == 0.0

    def test_symmetry(self):
        x = np.random.default_rng(0).uniform(-50, 50, size=2000)
        np.testing.assert_allclose(sigmoid(x) + sigmoid(-x), 1.0, atol=1e-12)

    def test_strictly_inside_unit_interval_below_saturation(self):
        x = np.random.default_rng(1).uniform(-36, 36, size=2000)
        y = sigmoid(x)
        assert np.all(y > 0.0) and np.all(y < 1.0)

    def test_monotone(self):
        x = np.sort(np.random.default_rng(2).uniform(-40, 40, size=500))
        assert np.all(np.diff(sigmoid(x)) >= 0)

    def test_scalar_in_scalar_out(self):
        assert isinstance(sigmoid(0.3), float)
        assert isinstance(sigmoid(np.float64(0.3)), float)


class TestSoftplus:
    def test_frozen_values(self):
        assert softplus(0.0) == pytest.approx(math.log(2.0), abs=1e-16)
        # far in the linear regime the additive term is below one ulp
        assert softplus(100.0) == 100.0

    def test_positive_everywhere(self):
        x = np.random.default_rng(3).uniform(-200, 200, size=2000)
        assert np.all(softplus(x) > 0.0)

    def test_matches_naive_in_safe_range(self):
        x = np.random.default_rng(4).uniform(-30, 30, size=500)
        np.testing.assert_allclose(softplus(x), np.log1p(np.exp(x)), rtol=1e-13)

    def test_no_overflow(self):
        with np.errstate(over="raise"):
            out = softplus(np.array([-750.0, 750.0]))
        assert np.all(np.isfinite(out))


class TestEinsumHelpers:
    def test_dot_scores_matches_row_loop(self):
        rng = np.random.default_rng(5)
        u = rng.normal(size=(7, 5))
        v = rng.normal(size=(7, 5))
        expected = np.array([float(u[b] @ v[b]) for b in range(7)])
        # the einsum kernel and BLAS dot reduce in different orders, so
        # agreement is only up to a couple of ulps
        np.testing.assert_allclose(dot_scores(u, v), expected, rtol=1e-14)

    def test_candidate_scores_matches_nested_loop(self):
        rng = np.random.default_rng(6)
        u = rng.normal(size=(4, 3))
        vecs = rng.normal(size=(4, 6, 3))
        got = candidate_scores(u, vecs)
        for b in range(4):
            for m in range(6):
                assert got[b, m] == pytest.approx(float(u[b] @ vecs[b, m]), rel=1e-15)


class TestArgmaxLowestId:
    def test_plain_argmax(self):
        vals = np.array([[0.1, 0.9, 0.4]])
        ids = np.array([[5, 6, 7]])
        assert argmax_lowest_id(vals, ids)[0] == 1

    def test_exact_tie_takes_lowest_id(self):
        vals = np.array([[1.0, 2.0, 2.0]])
        ids = np.array([[3, 9, 4]])
        assert argmax_lowest_id(vals, ids)[0] == 2  # id 4 beats id 9

    def test_all_equal(self):
        vals = np.zeros((1, 4))
        ids = np.array([[8, 2, 6, 5]])
        assert ids[0, argmax_lowest_id(vals, ids)[0]] == 2

    def test_row_independence(self):
        vals = np.array([[1.0, 0.0], [0.0, 1.0]])
        ids = np.array([[10, 11], [10, 11]])
        np.testing.assert_array_equal(argmax_lowest_id(vals, ids), [0, 1])


class TestRngStream:
    def test_same_labels_same_draws(self):
        a = rng_stream(0, "shuffle", 3).uniform(size=8)
        b = rng_stream(0, "shuffle", 3).uniform(size=8)
        np.testing.assert_array_equal(a, b)

    def test_distinct_labels_distinct_draws(self):
        a = rng_stream(0, "shuffle", 3).uniform(size=8)
        b = rng_stream(0, "shuffle", 4).uniform(size=8)
        c = rng_stream(0, "candidates", 3).uniform(size=8)
        d = rng_stream(1, "shuffle", 3).uniform(size=8)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)
        assert not np.array_equal(a, d)

    def test_streams_do_not_interfere(self):
        # creating and draining one stream never shifts another
        before = rng_stream(7, "init").uniform(size=4)
        rng_stream(7, "noise", 0, 0).uniform(size=100)
        after = rng_stream(7, "init").uniform(size=4)
        np.testing.assert_array_equal(before, after)
