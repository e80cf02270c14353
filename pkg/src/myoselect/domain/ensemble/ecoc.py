import math
from dataclasses import dataclass
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from myoselect.domain.evaluation.metrics import balanced_accuracy
from myoselect.domain.learners.forest import (
    DEFAULT_TREES,
    ForestConfig,
    ForestModel,
    check_matrix,
    predict_forest_batch,
    train_forest,
)
from myoselect.domain.learners.validation import stratified_kfold
from myoselect.domain.seeding import derive_seed
from myoselect.errors import EnsembleError
from myoselect.infrastructure.monitoring.logger import Logger

logger = Logger.get_logger("myoselect.ecoc")

CODE_SIZE_GRID = (2.0, 3.0, 4.0, 5.0, 6.0)
MAX_REDRAWS = 1000
_MAX_PACKED_CLASSES = 62


class EcocConfig(BaseModel):
    """
    Output-code ensemble settings.

    Attributes:
        code_size_grid (tuple[float, ...]): Candidate code sizes; B = ceil(code_size * M) binary learners.
        folds (int): Cross-validation folds of the code size search.
        trees (int): Trees per binary forest.
        max_redraws (int): Codebook draws before giving up.
    """

    model_config = ConfigDict(frozen=True)

    code_size_grid: tuple[float, ...] = CODE_SIZE_GRID
    folds: int = Field(3, ge=2)
    trees: int = Field(DEFAULT_TREES, ge=1)
    max_redraws: int = Field(MAX_REDRAWS, ge=1)


DEFAULT_ECOC = EcocConfig()


@dataclass(frozen=True)
class EcocModel:
    """
    Trained output-code ensemble.

    Attributes:
        codebook (np.ndarray): [M x B] matrix of +1/-1; row r is the codeword of class r.
        learners (tuple[ForestModel, ...]): Binary forest of column b at index b (label 1 means +1).
        code_size (float): Selected code size.
        grid_bac (tuple[float, ...]): Cross-validated balanced accuracy per grid value.
    """

    codebook: np.ndarray
    learners: tuple[ForestModel, ...]
    code_size: float
    grid_bac: tuple[float, ...] = ()

    @property
    def class_count(self) -> int:
        return int(self.codebook.shape[0])

    def to_dict(self) -> dict[str, Any]:
        return {
            "codebook": self.codebook.tolist(),
            "learners": [m.to_dict() for m in self.learners],
            "code_size": self.code_size,
            "grid_bac": list(self.grid_bac),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EcocModel":
        return cls(
            codebook=np.asarray(data["codebook"], dtype=np.int64),
            learners=tuple(ForestModel.from_dict(m) for m in data["learners"]),
            code_size=float(data["code_size"]),
            grid_bac=tuple(float(v) for v in data["grid_bac"]),
        )


def binary_learner_count(code_size: float, class_count: int) -> int:
    """B = ceil(code_size * M)."""
    return math.ceil(code_size * class_count - 1e-9)


def is_valid_codebook(codebook: np.ndarray) -> bool:
    """Rows pairwise distinct and no constant column."""
    rows_distinct = np.unique(codebook, axis=0).shape[0] == codebook.shape[0]
    columns_split = bool(np.all(codebook.max(axis=0) != codebook.min(axis=0)))
    return rows_distinct and columns_split


def _draw_codebook(class_count: int, learner_count: int, rng: np.random.Generator) -> np.ndarray:
    if class_count > _MAX_PACKED_CLASSES:
        return rng.choice(np.array([-1, 1], dtype=np.int64), size=(class_count, learner_count))
    # Each column is a non-trivial dichotomy: an integer in [1, 2^M - 2] read as M bits
    columns = rng.integers(1, 2**class_count - 1, size=learner_count)
    bits = (columns[None, :] >> np.arange(class_count)[:, None]) & 1
    return np.where(bits == 1, 1, -1).astype(np.int64)


def random_codebook(
    class_count: int, learner_count: int, rng: np.random.Generator, max_redraws: int = MAX_REDRAWS
) -> np.ndarray:
    """
    Draw a valid +1/-1 codebook.

    Raises:
        EnsembleError: If no valid codebook turns up within `max_redraws` draws.
    """
    for _ in range(max_redraws):
        codebook = _draw_codebook(class_count, learner_count, rng)
        if is_valid_codebook(codebook):
            return codebook
    raise EnsembleError(
        f"codebook validity unreachable after {max_redraws} redraws (M={class_count}, B={learner_count})"
    )


def decode(codebook: np.ndarray, signs: np.ndarray) -> np.ndarray:
    """
    Nearest codeword by Hamming distance; ties go to the lowest class.

    Args:
        codebook (np.ndarray): [M x B] codebook.
        signs (np.ndarray): [n x B] (or [B]) matrix of +1/-1 learner outputs.

    Returns:
        np.ndarray: Class per row (a scalar array for a single codeword).
    """
    signs = np.asarray(signs)
    distances = (signs[..., None, :] != codebook).sum(axis=-1)
    return np.argmin(distances, axis=-1)


def _fit_learners(X: np.ndarray, y: np.ndarray, codebook: np.ndarray, seed: int, trees: int) -> tuple[ForestModel, ...]:
    learners = []
    for b in range(codebook.shape[1]):
        bits = (codebook[y, b] > 0).astype(np.int64)
        config = ForestConfig(trees=trees, seed=derive_seed(seed, "column", b))
        learners.append(train_forest(X, bits, config, class_count=2))
    return tuple(learners)


def _predict_codes(learners: tuple[ForestModel, ...], X: np.ndarray) -> np.ndarray:
    bits = np.stack([predict_forest_batch(m, X) for m in learners], axis=1)
    return 2 * bits - 1


def train_ecoc(
    X: np.ndarray, y: np.ndarray, class_count: int, seed: int, config: EcocConfig = DEFAULT_ECOC
) -> EcocModel:
    """
    Train an output-code ensemble, choosing the code size by stratified cross-validation.

    For each grid value a random valid codebook is drawn and scored by mean fold balanced accuracy; the
    best (smaller code size on ties) is retrained on all data with its codebook.

    Args:
        X (np.ndarray): [n x d] training matrix.
        y (np.ndarray): Class labels in [0, class_count).
        class_count (int): Number of classes M.
        seed (int): Master seed of codebooks, folds and forests.
        config (EcocConfig): Grid and forest settings.

    Returns:
        EcocModel: The retrained model.

    Raises:
        EnsembleError: If a class has fewer than three samples or no valid codebook can be drawn.
    """
    X = check_matrix(X)
    y = np.asarray(y, dtype=np.int64)
    per_class = np.bincount(y, minlength=class_count)
    if per_class.min() < max(3, config.folds):
        raise EnsembleError(f"output-code tuning needs at least {max(3, config.folds)} samples per class")

    splits = stratified_kfold(y, config.folds, np.random.default_rng(derive_seed(seed, "ecoc", "folds")))
    grid = sorted(config.code_size_grid)
    codebooks = []
    scores = []
    for code_size in grid:
        count = binary_learner_count(code_size, class_count)
        codebook = random_codebook(
            class_count, count, np.random.default_rng(derive_seed(seed, "codebook", code_size)), config.max_redraws
        )
        fold_bac = []
        for f, (train, test) in enumerate(splits):
            learners = _fit_learners(X[train], y[train], codebook, derive_seed(seed, "cv", code_size, f), config.trees)
            fold_bac.append(balanced_accuracy(y[test], decode(codebook, _predict_codes(learners, X[test]))))
        codebooks.append(codebook)
        scores.append(float(np.mean(fold_bac)))
        logger.debug(f"code_size={code_size}: B={count}, cv bac={scores[-1]:.3f}")

    best = int(np.argmax(scores))
    learners = _fit_learners(X, y, codebooks[best], derive_seed(seed, "final"), config.trees)
    return EcocModel(codebook=codebooks[best], learners=learners, code_size=grid[best], grid_bac=tuple(scores))


def predict_ecoc_batch(model: EcocModel, X: np.ndarray) -> np.ndarray:
    """Decoded class of every row of X."""
    return decode(model.codebook, _predict_codes(model.learners, X))


def predict_ecoc(model: EcocModel, x: np.ndarray) -> int:
    """Decoded class of one feature vector."""
    return int(predict_ecoc_batch(model, np.asarray(x, dtype=np.float64)[None, :])[0])
