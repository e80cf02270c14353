import numpy as np

from myoselect.errors import LearnerError
from myoselect.infrastructure.monitoring.logger import Logger

logger = Logger.get_logger("myoselect.validation")

Split = tuple[np.ndarray, np.ndarray]


def _splits(fold_of: np.ndarray, folds: int) -> list[Split]:
    return [(np.flatnonzero(fold_of != f), np.flatnonzero(fold_of == f)) for f in range(folds)]


def kfold_indices(n: int, folds: int, rng: np.random.Generator) -> list[Split]:
    """
    Shuffled k-fold split of n items.

    Returns:
        list[Split]: (train, test) index arrays, ascending, one pair per fold.
    """
    if folds < 2:
        raise LearnerError(f"need at least 2 folds, got {folds}")
    if n < folds:
        raise LearnerError(f"cannot split {n} samples into {folds} folds")
    fold_of = np.empty(n, dtype=np.int64)
    fold_of[rng.permutation(n)] = np.arange(n) % folds
    return _splits(fold_of, folds)


def stratified_kfold(labels: np.ndarray, folds: int, rng: np.random.Generator) -> list[Split]:
    """
    Shuffled stratified k-fold split: every class is dealt round-robin over the folds.

    Args:
        labels (np.ndarray): Class label per item.
        folds (int): Number of folds.
        rng (np.random.Generator): Shuffling source.

    Returns:
        list[Split]: (train, test) index arrays, ascending, one pair per fold.
    """
    labels = np.asarray(labels)
    if folds < 2:
        raise LearnerError(f"need at least 2 folds, got {folds}")
    if labels.shape[0] < folds:
        raise LearnerError(f"cannot split {labels.shape[0]} samples into {folds} folds")
    fold_of = np.empty(labels.shape[0], dtype=np.int64)
    dealt = 0
    for label in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == label))
        if members.size < folds:
            logger.warning(f"Class {label} has {members.size} samples for {folds} folds.")
        fold_of[members] = (dealt + np.arange(members.size)) % folds
        dealt += members.size
    return _splits(fold_of, folds)
