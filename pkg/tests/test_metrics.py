"""Evaluation metric unit semantics, pinned hand values and oracle checks."""

import numpy as np
import pytest

from adforecast.errors import UndefinedMetricError
from adforecast.evaluation.metrics import (ape, pearson_matrix, ratio_p,
                                           weighted_mape)

from oracles import oracle_pearson, oracle_weighted_mape


class TestWeightedMape:
    def test_hand_value(self):
        # apes 0.5 and 0.1 with weights 1 and 3: (1*0.5 + 3*0.1)/4 = 0.2
        truth = np.array([1.0, 10.0])
        forecast = np.array([1.5, 11.0])
        weights = np.array([1.0, 3.0])
        m = weighted_mape(truth, forecast, weights)
        assert m.value == pytest.approx(0.2, abs=1e-12)

    def test_zero_truth_excluded(self):
        truth = np.array([0.0, 2.0])
        forecast = np.array([5.0, 3.0])
        weights = np.array([1.0, 1.0])
        m = weighted_mape(truth, forecast, weights)
        assert m.value == pytest.approx(0.5)
        assert m.n_used == 1 and m.n_excluded == 1

    def test_all_zero_truth_undefined(self):
        with pytest.raises(UndefinedMetricError):
            weighted_mape(np.zeros(3), np.ones(3), np.ones(3))

    def test_zero_weights_fall_back_to_unweighted(self):
        truth = np.array([1.0, 2.0])
        forecast = np.array([1.5, 2.0])
        m = weighted_mape(truth, forecast, np.zeros(2))
        assert m.value == pytest.approx(0.25)

    def test_matches_oracle(self):
        rng = np.random.default_rng(5)
        truth = rng.uniform(0.1, 10.0, 50)
        truth[::7] = 0.0
        forecast = truth * rng.uniform(0.5, 1.5, 50)
        weights = rng.uniform(0.0, 3.0, 50)
        got = weighted_mape(truth, forecast, weights).value
        want = oracle_weighted_mape(truth.tolist(), forecast.tolist(),
                                    weights.tolist())
        assert got == pytest.approx(want, abs=1e-12)


class TestRatioP:
    def test_strictly_below_threshold(self):
        # apes: 0.5 exactly, 0.4, 0.6 -> only one of three counts
        truth = np.array([1.0, 1.0, 1.0])
        forecast = np.array([1.5, 1.4, 1.6])
        m = ratio_p(truth, forecast, 0.5)
        assert m.value == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_excludes_zero_truth(self):
        truth = np.array([0.0, 1.0])
        forecast = np.array([0.0, 1.1])
        m = ratio_p(truth, forecast, 0.5)
        assert m.value == pytest.approx(1.0)
        assert m.n_used == 1

    def test_all_zero_truth_undefined(self):
        with pytest.raises(UndefinedMetricError):
            ratio_p(np.zeros(2), np.ones(2), 0.5)


class TestApe:
    def test_values(self):
        values, mask = ape(np.array([2.0, 0.0]), np.array([3.0, 1.0]))
        assert mask.tolist() == [True, False]
        assert values[0] == pytest.approx(0.5)


class TestPearson:
    def test_hand_value(self):
        # a nearly collinear pair with correlation 0.9934 to four figures
        x = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        y = np.array([1.2, 2.3, 2.9, 4.4, 5.4])
        r = float(pearson_matrix(np.column_stack([x, y]))[0, 1])
        assert r == pytest.approx(0.9934, abs=1e-3)

    def test_matches_oracle(self):
        rng = np.random.default_rng(11)
        cols = rng.normal(size=(40, 3))
        cols[:, 1] += 0.8 * cols[:, 0]
        mat = pearson_matrix(cols)
        for i in range(3):
            assert mat[i, i] == pytest.approx(1.0)
            for j in range(i + 1, 3):
                want = oracle_pearson(cols[:, i].tolist(), cols[:, j].tolist())
                assert mat[i, j] == pytest.approx(want, abs=1e-12)
                assert mat[i, j] == pytest.approx(mat[j, i], abs=0)

    def test_errors(self):
        with pytest.raises(UndefinedMetricError):
            pearson_matrix(np.ones((1, 2)))
        const = np.column_stack([np.ones(5), np.arange(5.0)])
        with pytest.raises(UndefinedMetricError):
            pearson_matrix(const)
