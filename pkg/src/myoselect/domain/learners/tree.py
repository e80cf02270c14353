from dataclasses import dataclass
from typing import Any

import numpy as np

LEAF = -1


@dataclass(frozen=True)
class DecisionTree:
    """
    Array-backed binary classification tree.

    Node i is a leaf when feature[i] == LEAF; otherwise samples with x[feature[i]] <= threshold[i] go to
    left[i], the rest to right[i]. Every node keeps the class-count histogram of the training samples that
    reached it.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray

    @property
    def node_count(self) -> int:
        return int(self.feature.shape[0])

    @property
    def class_count(self) -> int:
        return int(self.counts.shape[1])

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row of X."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            current = node[active]
            go_left = X[active, self.feature[current]] <= self.threshold[current]
            node[active] = np.where(go_left, self.left[current], self.right[current])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Leaf-histogram argmax per row; ties go to the lowest class index."""
        return np.argmax(self.counts[self.apply(X)], axis=1)

    def to_dict(self) -> dict[str, Any]:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "counts": self.counts.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DecisionTree":
        return cls(
            feature=np.asarray(data["feature"], dtype=np.int64),
            threshold=np.asarray(data["threshold"], dtype=np.float64),
            left=np.asarray(data["left"], dtype=np.int64),
            right=np.asarray(data["right"], dtype=np.int64),
            counts=np.asarray(data["counts"], dtype=np.float64).reshape(len(data["feature"]), -1),
        )


def leaf_tree(counts: np.ndarray) -> DecisionTree:
    """Single-leaf tree with the given class histogram."""
    return DecisionTree(
        feature=np.array([LEAF], dtype=np.int64),
        threshold=np.zeros(1),
        left=np.array([LEAF], dtype=np.int64),
        right=np.array([LEAF], dtype=np.int64),
        counts=np.asarray(counts, dtype=np.float64).reshape(1, -1),
    )


def best_gini_split(Xs: np.ndarray, y: np.ndarray, class_count: int) -> tuple[int, float] | None:
    """
    Lowest weighted Gini impurity split over the columns of Xs.

    Candidate thresholds are midpoints between consecutive distinct sorted values. Ties prefer the earlier
    column, then the lower threshold.

    Args:
        Xs (np.ndarray): [n x k] candidate feature columns.
        y (np.ndarray): Labels of the n samples.
        class_count (int): Number of classes.

    Returns:
        tuple[int, float] | None: (column index in Xs, threshold), or None if every column is constant.
    """
    n, k = Xs.shape
    order = np.argsort(Xs, axis=0, kind="stable")
    xs = np.take_along_axis(Xs, order, axis=0)
    valid = xs[1:] > xs[:-1]
    if not valid.any():
        return None
    onehot = np.eye(class_count)[y[order]]
    left = np.cumsum(onehot, axis=0)[:-1]
    right = onehot.sum(axis=0) - left
    n_left = np.arange(1, n, dtype=np.float64)[:, None]
    n_right = n - n_left
    gini_left = 1.0 - np.sum((left / n_left[..., None]) ** 2, axis=-1)
    gini_right = 1.0 - np.sum((right / n_right[..., None]) ** 2, axis=-1)
    impurity = (n_left * gini_left + n_right * gini_right) / n
    impurity[~valid] = np.inf
    flat = int(np.argmin(impurity.T))
    column, position = divmod(flat, n - 1)
    low, high = xs[position, column], xs[position + 1, column]
    threshold = 0.5 * (low + high)
    if not low <= threshold < high:
        threshold = low
    return column, float(threshold)


def grow_tree(
    X: np.ndarray, y: np.ndarray, class_count: int, max_features: int, rng: np.random.Generator
) -> DecisionTree:
    """
    Grow an unpruned Gini tree.

    At each node `max_features` features are drawn without replacement; if all of them are constant on the
    node, the remaining features are searched. Growth stops at pure nodes and nodes with fewer than two samples.

    Args:
        X (np.ndarray): [n x d] training matrix.
        y (np.ndarray): Labels in [0, class_count).
        class_count (int): Number of classes.
        max_features (int): Features drawn per node.
        rng (np.random.Generator): Source of the feature draws.

    Returns:
        DecisionTree: The grown tree.
    """
    d = X.shape[1]
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    counts: list[np.ndarray] = []

    def new_node() -> int:
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        counts.append(np.zeros(class_count))
        return len(feature) - 1

    stack = [(new_node(), np.arange(X.shape[0]))]
    while stack:
        node, idx = stack.pop()
        hist = np.bincount(y[idx], minlength=class_count).astype(np.float64)
        counts[node] = hist
        if idx.size < 2 or hist.max() == idx.size:
            continue
        drawn = rng.choice(d, size=max_features, replace=False)
        split = best_gini_split(X[np.ix_(idx, drawn)], y[idx], class_count)
        candidates = drawn
        if split is None and max_features < d:
            candidates = np.setdiff1d(np.arange(d), drawn)
            split = best_gini_split(X[np.ix_(idx, candidates)], y[idx], class_count)
        if split is None:
            continue
        column, cut = split
        f = int(candidates[column])
        goes_left = X[idx, f] <= cut
        feature[node] = f
        threshold[node] = cut
        left[node] = new_node()
        right[node] = new_node()
        stack.append((right[node], idx[~goes_left]))
        stack.append((left[node], idx[goes_left]))

    return DecisionTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        counts=np.vstack(counts),
    )
