import numpy as np
import pytest

from vesselseg.evaluation import (
    ContingencyCounts,
    EmptyNegativeClassError,
    EmptyPositiveClassError,
    EvaluationConfig,
    RocCurve,
    RocPoint,
    aggregate,
    contingency,
    roc_curve,
    roc_thresholds,
    sens_spec,
)
from vesselseg.threshold import entropic_threshold


def _rows(first, last, shape=(10, 10)):
    mask = np.zeros(shape, dtype=bool)
    mask[first:last, :] = True
    return mask


class TestContingency:
    def test_overlapping_bands(self):
        c = contingency(_rows(1, 4), _rows(0, 3))
        assert c == ContingencyCounts(tp=20, fp=10, tn=60, fn=10)
        assert c.total == 100

    def test_all_vessel_prediction_on_empty_truth(self):
        c = contingency(np.ones((10, 10), dtype=bool), np.zeros((10, 10), dtype=bool))
        assert (c.tp, c.fp, c.tn, c.fn) == (0, 100, 0, 0)

    def test_fov_restricts_counts(self):
        fov = np.zeros((10, 10), dtype=bool)
        fov[:, :5] = True
        c = contingency(_rows(1, 4), _rows(0, 3), fov)
        assert c == ContingencyCounts(tp=10, fp=5, tn=30, fn=5)
        assert c.total == fov.sum()

    def test_swap_and_complement(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            pred = rng.random((12, 12)) < 0.3
            truth = rng.random((12, 12)) < 0.2
            fov = rng.random((12, 12)) < 0.8
            c = contingency(pred, truth, fov)
            assert contingency(truth, pred, fov) == c.swapped()
            flipped = contingency(~pred, ~truth, fov)
            assert flipped == ContingencyCounts(tp=c.tn, fp=c.fn, tn=c.tp, fn=c.fp)
            assert c.total == fov.sum()

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            contingency(np.zeros((3, 3)), np.zeros((3, 4)))


class TestSensSpec:
    def test_typical_counts(self):
        sens, spec = sens_spec(ContingencyCounts(tp=87, fp=4, tn=96, fn=13))
        assert sens == pytest.approx(0.87)
        assert spec == pytest.approx(0.96)

    def test_small_counts(self):
        assert sens_spec(ContingencyCounts(tp=1, fp=1, tn=1, fn=3)) == (0.25, 0.5)

    def test_no_positives(self):
        with pytest.raises(EmptyPositiveClassError):
            sens_spec(ContingencyCounts(tp=0, fp=3, tn=5, fn=0))

    def test_no_negatives(self):
        with pytest.raises(EmptyNegativeClassError):
            sens_spec(ContingencyCounts(tp=4, fp=0, tn=0, fn=1))

    def test_errors_are_value_errors(self):
        with pytest.raises(ValueError):
            sens_spec(ContingencyCounts(tp=0, fp=0, tn=0, fn=0))


class TestRocThresholds:
    def test_default_step(self):
        thresholds = roc_thresholds(5)
        assert len(thresholds) == 52
        assert thresholds[0] == 0 and thresholds[-1] == 255

    def test_top_level_appended(self):
        thresholds = roc_thresholds(7)
        assert thresholds[-2:] == [252, 255]

    def test_step_must_be_positive(self):
        with pytest.raises(ValueError, match="step"):
            roc_thresholds(0)


class TestRocCurve:
    def _case(self, seed=1):
        rng = np.random.default_rng(seed)
        truth = rng.random((40, 40)) < 0.25
        response = rng.normal(size=(40, 40)) + 1.5 * truth
        fov = np.ones((40, 40), dtype=bool)
        fov[:4, :] = False
        return response, truth, fov

    def test_rows_and_monotonicity(self):
        curve = roc_curve(*self._case())
        assert len(curve) == 52
        tpr = [p.tpr for p in curve.points]
        fpr = [p.fpr for p in curve.points]
        assert all(b <= a for a, b in zip(tpr, tpr[1:]))
        assert all(b <= a for a, b in zip(fpr, fpr[1:]))
        assert all(0.0 <= v <= 1.0 for v in tpr + fpr)

    def test_top_threshold_predicts_nothing(self):
        last = roc_curve(*self._case()).points[-1]
        assert last.threshold == 255
        assert (last.tpr, last.fpr) == (0.0, 0.0)

    def test_operating_point_lies_on_curve(self):
        response, truth, fov = self._case(2)
        result = entropic_threshold(response, 256, fov)
        sens, spec = sens_spec(contingency(result.mask, truth, fov))
        point = roc_curve(response, truth, fov, step=1).at(result.threshold)
        assert point is not None
        assert point.tpr == pytest.approx(sens, abs=1e-12)
        assert point.fpr == pytest.approx(1.0 - spec, abs=1e-12)

    def test_separable_response_reaches_corner(self):
        truth = np.zeros((20, 20), dtype=bool)
        truth[:, 8:12] = True
        response = truth.astype(float)
        point = roc_curve(response, truth, np.ones_like(truth), step=1).at(0)
        assert (point.tpr, point.fpr) == (1.0, 0.0)

    def test_empty_truth_rejected(self):
        response, _, fov = self._case()
        with pytest.raises(EmptyPositiveClassError):
            roc_curve(response, np.zeros((40, 40), dtype=bool), fov)

    def test_thresholds_must_increase(self):
        with pytest.raises(ValueError, match="increasing"):
            RocCurve((RocPoint(5, 0.1, 0.2), RocPoint(5, 0.0, 0.1)))


class TestAggregate:
    def test_mean_and_population_sd(self):
        summary = aggregate([(0.8, 0.9), (1.0, 0.95)])
        assert summary.count == 2
        assert summary.sensitivity_mean == pytest.approx(0.9)
        assert summary.sensitivity_sd == pytest.approx(0.1)
        assert summary.specificity_mean == pytest.approx(0.925)
        assert summary.specificity_sd == pytest.approx(0.025)

    def test_single_image_has_zero_sd(self):
        summary = aggregate([(0.7, 0.99)])
        assert summary.sensitivity_sd == 0.0
        assert summary.specificity_sd == 0.0

    def test_empty_list(self):
        with pytest.raises(ValueError, match="empty"):
            aggregate([])


def test_evaluation_config_validation():
    assert EvaluationConfig().roc_step == 5
    with pytest.raises(ValueError, match="roc_step"):
        EvaluationConfig(roc_step=0)
