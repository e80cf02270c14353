import numpy as np
import pytest

from myoselect.domain.learners.forest import (
    ForestConfig,
    ForestModel,
    majority_vote,
    predict_forest,
    predict_forest_batch,
    train_forest,
)
from myoselect.domain.learners.ocsvm import (
    KKT_TOLERANCE,
    OneClassModel,
    decision_function,
    rbf_kernel,
    score_ocsvm,
    solve_dual,
    train_ocsvm,
)
from myoselect.domain.learners.tree import LEAF, best_gini_split, grow_tree
from myoselect.domain.learners.validation import kfold_indices, stratified_kfold
from myoselect.errors import LearnerError


def test_best_gini_split_separable_column():
    """
    Test that a separable column is cut at the midpoint between the classes.
    """
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    assert best_gini_split(X, y, 2) == (0, 1.5)


def test_best_gini_split_constant_columns():
    """
    Test that constant columns offer no split.
    """
    assert best_gini_split(np.ones((5, 2)), np.array([0, 1, 0, 1, 0]), 2) is None


def test_grown_tree_fits_training_data(blobs):
    """
    Test that an unpruned tree reproduces distinct training points.
    """
    X, y = blobs
    tree = grow_tree(X, y, 2, max_features=2, rng=np.random.default_rng(0))
    assert np.array_equal(tree.predict(X), y)
    assert tree.feature[tree.apply(X)].tolist() == [LEAF] * len(y)


def test_forest_separates_blobs(blobs):
    """
    Test that a small forest classifies two separated blobs perfectly.
    """
    X, y = blobs
    model = train_forest(X, y, ForestConfig(trees=7, seed=1))
    assert np.array_equal(predict_forest_batch(model, X), y)
    assert predict_forest(model, np.full(4, 3.0)) == 1


def test_forest_is_deterministic(blobs):
    """
    Test that the same seed grows identical forests.
    """
    X, y = blobs
    a = train_forest(X, y, ForestConfig(trees=3, seed=8))
    b = train_forest(X, y, ForestConfig(trees=3, seed=8))
    assert a.to_dict() == b.to_dict()


def test_forest_rejects_single_class_and_nan(blobs):
    """
    Test the input checks of forest training and prediction.
    """
    X, y = blobs
    with pytest.raises(LearnerError, match="single-class"):
        train_forest(X, np.zeros_like(y))
    bad = X.copy()
    bad[0, 0] = np.nan
    with pytest.raises(LearnerError, match="NaN"):
        train_forest(bad, y)
    model = train_forest(X, y, ForestConfig(trees=2))
    with pytest.raises(LearnerError, match="dimension mismatch"):
        predict_forest(model, np.zeros(3))


def test_forest_dict_round_trip(blobs):
    """
    Test that a serialized forest predicts like the original.
    """
    X, y = blobs
    model = train_forest(X, y, ForestConfig(trees=3, seed=2))
    restored = ForestModel.from_dict(model.to_dict())
    assert np.array_equal(predict_forest_batch(restored, X), predict_forest_batch(model, X))


def test_majority_vote_ties_to_lowest_label():
    """
    Test that a tied vote picks the lowest label.
    """
    votes = np.array([[2, 0], [1, 0], [2, 1], [1, 1]])
    assert majority_vote(votes, 3).tolist() == [1, 0]


def test_solve_dual_constraints():
    """
    Test that the one-class duals are feasible: box-bounded and summing to one.
    """
    X = np.random.default_rng(3).normal(size=(30, 2))
    nu = 0.3
    alphas, _, _ = solve_dual(rbf_kernel(X, X, 0.5), nu)
    assert alphas.sum() == pytest.approx(1.0)
    assert alphas.min() >= 0.0
    assert alphas.max() <= 1.0 / (nu * 30) + 1e-12


def test_ocsvm_accepts_center_and_rejects_far_points():
    """
    Test that the one-class SVM scores the blob center as target and distant points as outliers.
    """
    X = np.random.default_rng(4).normal(size=(60, 3))
    model = train_ocsvm(X, nu=0.2)
    assert score_ocsvm(model, np.zeros(3)).is_target
    assert not score_ocsvm(model, np.full(3, 8.0)).is_target
    assert np.mean(decision_function(model, X) < 0.0) <= 0.2 + 0.1


def test_ocsvm_input_checks():
    """
    Test that nu, sample count and dimension are validated.
    """
    X = np.random.default_rng(5).normal(size=(10, 2))
    with pytest.raises(LearnerError):
        train_ocsvm(X, nu=0.0)
    with pytest.raises(LearnerError):
        train_ocsvm(X[:1], nu=0.5)
    model = train_ocsvm(X, nu=0.5)
    with pytest.raises(LearnerError, match="dimension mismatch"):
        score_ocsvm(model, np.zeros(3))


def test_ocsvm_dict_round_trip():
    """
    Test that a serialized one-class model scores like the original.
    """
    X = np.random.default_rng(6).normal(size=(20, 2))
    model = train_ocsvm(X, nu=0.5)
    restored = OneClassModel.from_dict(model.to_dict())
    assert np.allclose(decision_function(restored, X), decision_function(model, X))


def test_kfold_indices_partition():
    """
    Test that k-fold test parts are disjoint and cover every item.
    """
    splits = kfold_indices(11, 3, np.random.default_rng(0))
    tests = np.concatenate([test for _, test in splits])
    assert sorted(tests.tolist()) == list(range(11))
    for train, test in splits:
        assert np.intersect1d(train, test).size == 0


def test_stratified_kfold_balances_classes():
    """
    Test that each fold receives every class in near-equal share.
    """
    labels = np.repeat([0, 1, 2], [9, 6, 3])
    splits = stratified_kfold(labels, 3, np.random.default_rng(1))
    for _, test in splits:
        assert np.bincount(labels[test], minlength=3).tolist() == [3, 2, 1]


@pytest.mark.parametrize("nu", [0.1, 0.25, 0.5, 0.8])
def test_ocsvm_nu_bounds_outliers_and_support_vectors(nu):
    """
    Test that at most a fraction nu of training vectors score outside and at least a fraction nu are support
    vectors.
    """
    X = np.random.default_rng(6).normal(size=(80, 4))
    model = train_ocsvm(X, nu=nu)
    outside = decision_function(model, X) < -KKT_TOLERANCE
    assert outside.mean() <= nu
    assert model.alphas.size >= nu * X.shape[0] - 1e-9


@pytest.mark.parametrize("nu", [0.5, 1.0])
def test_two_vector_dual_is_balanced(nu):
    """
    Test that two training vectors share the dual mass equally.
    """
    X = np.array([[0.0, 0.0], [1.0, 2.0]])
    alphas, _, _ = solve_dual(rbf_kernel(X, X, 0.5), nu)
    assert alphas.tolist() == pytest.approx([0.5, 0.5])
