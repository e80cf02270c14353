import numpy as np

from myoselect.errors import StatisticsError


def per_class_recall(y_true: np.ndarray, y_pred: np.ndarray, class_count: int | None = None) -> dict[int, float]:
    """Recall of every class present in y_true."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise StatisticsError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    if y_true.size == 0:
        raise StatisticsError("balanced accuracy of an empty sample")
    if class_count is not None and (y_true.min() < 0 or y_true.max() >= class_count):
        raise StatisticsError(f"true labels outside [0, {class_count})")
    return {int(c): float(np.mean(y_pred[y_true == c] == c)) for c in np.unique(y_true)}


def balanced_accuracy(y_true: np.ndarray, y_pred: np.ndarray, class_count: int | None = None) -> float:
    """
    Mean per-class recall over the classes present in y_true.

    Args:
        y_true (np.ndarray): True labels.
        y_pred (np.ndarray): Predicted labels.
        class_count (int | None): If given, true labels must lie in [0, class_count).

    Returns:
        float: Balanced accuracy in [0, 1].

    Raises:
        StatisticsError: On empty input or mismatched lengths.
    """
    return float(np.mean(list(per_class_recall(y_true, y_pred, class_count).values())))
