import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from myoselect.domain.learners.tree import DecisionTree, grow_tree
from myoselect.errors import LearnerError
from myoselect.infrastructure.monitoring.logger import Logger

logger = Logger.get_logger("myoselect.forest")

DEFAULT_TREES = 30


class ForestConfig(BaseModel):
    """
    Random forest settings.

    Attributes:
        trees (int): Ensemble size.
        seed (int): Seed of the bootstrap and feature draws.
    """

    model_config = ConfigDict(frozen=True)

    trees: int = Field(DEFAULT_TREES, ge=1)
    seed: int = 0


DEFAULT_FOREST = ForestConfig()


@dataclass(frozen=True)
class ForestModel:
    """Trained random forest."""

    trees: tuple[DecisionTree, ...]
    class_count: int
    n_features: int
    train_seed: int

    def to_dict(self) -> dict[str, Any]:
        return {
            "class_count": self.class_count,
            "n_features": self.n_features,
            "train_seed": self.train_seed,
            "trees": [tree.to_dict() for tree in self.trees],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ForestModel":
        return cls(
            trees=tuple(DecisionTree.from_dict(t) for t in data["trees"]),
            class_count=int(data["class_count"]),
            n_features=int(data["n_features"]),
            train_seed=int(data["train_seed"]),
        )


def check_matrix(X: np.ndarray, n_features: int | None = None) -> np.ndarray:
    """
    Validate a feature matrix.

    Raises:
        LearnerError: On a non 2-D matrix, a non-finite value or a column count other than `n_features`.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise LearnerError(f"expected a 2-D feature matrix, got shape {X.shape}")
    if n_features is not None and X.shape[1] != n_features:
        raise LearnerError(f"dimension mismatch: model expects {n_features} features, got {X.shape[1]}")
    if not np.all(np.isfinite(X)):
        raise LearnerError("NaN feature in input")
    return X


def majority_vote(predictions: np.ndarray, class_count: int) -> np.ndarray:
    """
    Column-wise majority vote of a [voters x n] label matrix; ties go to the lowest label.
    """
    predictions = np.asarray(predictions, dtype=np.int64)
    votes = np.zeros((predictions.shape[1], class_count), dtype=np.int64)
    cols = np.broadcast_to(np.arange(predictions.shape[1]), predictions.shape)
    np.add.at(votes, (cols.ravel(), predictions.ravel()), 1)
    return np.argmax(votes, axis=1)


def train_forest(
    X: np.ndarray, y: np.ndarray, config: ForestConfig = DEFAULT_FOREST, class_count: int | None = None
) -> ForestModel:
    """
    Train a random forest of unpruned Gini trees.

    Each tree sees a bootstrap sample of size n and draws floor(sqrt(d)) features per node.

    Args:
        X (np.ndarray): [n x d] training matrix.
        y (np.ndarray): Class labels.
        config (ForestConfig): Tree count and seed.
        class_count (int | None): Number of classes M; defaults to max(y) + 1.

    Returns:
        ForestModel: The trained forest.

    Raises:
        LearnerError: On single-class input, a NaN feature or mismatched lengths.
    """
    X = check_matrix(X)
    y = np.asarray(y, dtype=np.int64)
    if y.shape != (X.shape[0],):
        raise LearnerError(f"{y.shape[0]} labels for {X.shape[0]} samples")
    if np.unique(y).size < 2:
        raise LearnerError("single-class input: at least two classes are required")
    if y.min() < 0:
        raise LearnerError("labels must be non-negative")
    classes = int(class_count) if class_count is not None else int(y.max()) + 1
    if y.max() >= classes:
        raise LearnerError(f"label {int(y.max())} outside {classes} classes")

    n, d = X.shape
    max_features = max(1, math.isqrt(d))
    logger.debug(f"Training {config.trees} trees on {n} samples x {d} features, seed {config.seed}.")
    rng = np.random.default_rng(config.seed)
    trees = []
    for _ in range(config.trees):
        sample = rng.integers(0, n, size=n)
        trees.append(grow_tree(X[sample], y[sample], classes, max_features, rng))
    return ForestModel(trees=tuple(trees), class_count=classes, n_features=d, train_seed=config.seed)


def tree_predictions(model: ForestModel, X: np.ndarray) -> np.ndarray:
    """Per-tree labels, [trees x n]."""
    X = check_matrix(X, model.n_features)
    return np.stack([tree.predict(X) for tree in model.trees])


def predict_forest_batch(model: ForestModel, X: np.ndarray) -> np.ndarray:
    """Forest labels for every row of X."""
    return majority_vote(tree_predictions(model, X), model.class_count)


def predict_forest(model: ForestModel, x: np.ndarray) -> int:
    """
    Forest label of one feature vector: majority of per-tree leaf-histogram argmaxes, ties to the lowest class.

    Raises:
        LearnerError: If the vector length differs from the training dimension.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise LearnerError(f"expected a feature vector, got shape {x.shape}")
    return int(predict_forest_batch(model, x[None, :])[0])
