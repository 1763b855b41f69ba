import numpy as np
import pytest

from vulnhunter import metrics


def test_accuracy_all_correct():
    assert metrics.multiclass_accuracy([1, 2, 3], [1, 2, 3]) == 1.0


def test_accuracy_none_correct():
    assert metrics.multiclass_accuracy([1, 1], [2, 3]) == 0.0


def test_accuracy_reported_ratio():
    # 567 correct out of 879 test samples
    preds = [1] * 567 + [0] * 312
    labels = [1] * 879
    acc = metrics.multiclass_accuracy(preds, labels)
    assert acc == pytest.approx(567 / 879)
    assert acc == pytest.approx(0.645, abs=5e-4)


def test_accuracy_empty_raises():
    with pytest.raises(metrics.MetricsError):
        metrics.multiclass_accuracy([], [])


def test_accuracy_length_mismatch():
    with pytest.raises(metrics.MetricsError):
        metrics.multiclass_accuracy([1], [1, 2])


def test_mse_mae_identical():
    assert metrics.mse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert metrics.mae([1.0, 2.0], [1.0, 2.0]) == 0.0


def test_mse_mae_hand_fixture():
    assert metrics.mse([1.0, 2.0], [0.0, 4.0]) == pytest.approx(2.5)
    assert metrics.mae([1.0, 2.0], [0.0, 4.0]) == pytest.approx(1.5)


def test_mse_mae_single_pair():
    assert metrics.mse([3.0], [0.0]) == pytest.approx(9.0)
    assert metrics.mae([3.0], [0.0]) == pytest.approx(3.0)


def test_mse_mae_empty_raises():
    with pytest.raises(metrics.MetricsError):
        metrics.mse([], [])
    with pytest.raises(metrics.MetricsError):
        metrics.mae([], [])


def test_regression_error_relationships():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = rng.integers(1, 30)
        p = rng.normal(size=n)
        t = rng.normal(size=n)
        assert metrics.mse(p, t) >= 0.0
        assert metrics.mae(p, t) >= 0.0
        zero = bool(np.array_equal(p, t))
        assert (metrics.mse(p, t) == 0.0) == zero
        assert (metrics.mae(p, t) == 0.0) == zero


def test_confusion_perfect_is_diagonal():
    cm = metrics.confusion_matrix([0, 1, 2, 1], [0, 1, 2, 1], [0, 1, 2])
    assert np.array_equal(cm.counts, np.diag([1, 2, 1]))
    assert cm.accuracy == 1.0


def test_confusion_per_class_support_seven():
    # class "a" support 7, 6 predicted correctly -> ~86%
    preds = ["a"] * 6 + ["b"] + ["b"] * 3
    labels = ["a"] * 7 + ["b"] * 3
    cm = metrics.confusion_matrix(preds, labels, ["a", "b"])
    assert cm.supports[0] == 7
    assert cm.per_class_accuracy[0] == pytest.approx(6 / 7)
    assert round(cm.per_class_accuracy[0] * 100) == 86


def test_confusion_identities():
    rng = np.random.default_rng(3)
    preds = rng.integers(0, 4, size=200).tolist()
    labels = rng.integers(0, 4, size=200).tolist()
    cm = metrics.confusion_matrix(preds, labels, [0, 1, 2, 3])
    total_errors = sum(1 for p, y in zip(preds, labels) if p != y)
    off_diag = cm.counts.sum() - np.trace(cm.counts)
    assert off_diag == total_errors
    assert cm.accuracy == pytest.approx(metrics.multiclass_accuracy(preds, labels))
    assert np.array_equal(cm.supports, np.bincount(labels, minlength=4))


def test_confusion_unknown_class():
    with pytest.raises(metrics.MetricsError):
        metrics.confusion_matrix([5], [0], [0, 1])


def test_confusion_renderings():
    cm = metrics.confusion_matrix(["x", "y"], ["x", "x"], ["x", "y"])
    csv = cm.to_csv()
    assert csv.splitlines()[0].startswith("truth\\pred")
    assert "x,1,1,2" in csv
    text = cm.to_text()
    assert "x" in text and "y" in text
    table = metrics.per_class_table(cm)
    assert "n/a" in table  # class y has no support


def test_type_consistent_rate_reported_fixture():
    # 312 fine-label errors, 89 of them with the coarse label still right
    pred_ids = [1] * 312
    true_ids = [0] * 312
    pred_types = [0] * 89 + [1] * 223
    true_types = [0] * 312
    rate = metrics.type_consistent_rate(pred_ids, true_ids, pred_types, true_types)
    assert rate == pytest.approx(89 / 312)
    assert rate == pytest.approx(0.285, abs=5e-4)


def test_type_consistent_rate_no_errors_is_none():
    assert metrics.type_consistent_rate([1], [1], [0], [0]) is None
