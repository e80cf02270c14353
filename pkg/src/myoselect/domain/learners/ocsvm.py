import math
from dataclasses import dataclass
from typing import Any, NamedTuple

import numpy as np
from scipy.spatial.distance import cdist

from myoselect.domain.learners.forest import check_matrix
from myoselect.errors import LearnerError, SolverStalledError
from myoselect.infrastructure.monitoring.logger import Logger

logger = Logger.get_logger("myoselect.ocsvm")

KKT_TOLERANCE = 1e-3
MAX_ITERATIONS = 100_000
_BOUND_EPS = 1e-12


@dataclass(frozen=True)
class OneClassModel:
    """
    Trained RBF one-class SVM.

    The decision function is f(x) = sum_i alphas[i] * exp(-gamma * |support_vectors[i] - x|^2) - rho.
    Only vectors with a positive dual are kept.
    """

    support_vectors: np.ndarray
    alphas: np.ndarray
    rho: float
    gamma: float
    nu: float

    @property
    def n_features(self) -> int:
        return int(self.support_vectors.shape[1])

    def to_dict(self) -> dict[str, Any]:
        return {
            "support_vectors": self.support_vectors.tolist(),
            "alphas": self.alphas.tolist(),
            "rho": self.rho,
            "gamma": self.gamma,
            "nu": self.nu,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "OneClassModel":
        return cls(
            support_vectors=np.asarray(data["support_vectors"], dtype=np.float64),
            alphas=np.asarray(data["alphas"], dtype=np.float64),
            rho=float(data["rho"]),
            gamma=float(data["gamma"]),
            nu=float(data["nu"]),
        )


class OneClassScore(NamedTuple):
    score: float
    is_target: bool


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """K[i, j] = exp(-gamma * |A[i] - B[j]|^2)."""
    return np.exp(-gamma * cdist(A, B, metric="sqeuclidean"))


def default_gamma(X: np.ndarray) -> float:
    """1 / (d * mean per-feature variance); 1.0 when every feature is constant."""
    variance = float(np.mean(np.var(X, axis=0)))
    if variance <= 0.0:
        return 1.0
    return 1.0 / (X.shape[1] * variance)


def _initial_alphas(n: int, upper: float) -> np.ndarray:
    # First floor(nu n) duals at the bound, the remainder on the next one
    alphas = np.zeros(n)
    full = min(int(math.floor(1.0 / upper + 1e-9)), n)
    alphas[:full] = upper
    if full < n:
        alphas[full] = max(0.0, 1.0 - full * upper)
    return alphas


def _offset(alphas: np.ndarray, gradient: np.ndarray, upper: float) -> float:
    free = (alphas > _BOUND_EPS * upper) & (alphas < upper * (1.0 - _BOUND_EPS))
    if free.any():
        return float(np.mean(gradient[free]))
    at_upper = alphas >= upper * (1.0 - _BOUND_EPS)
    at_lower = ~at_upper
    lower_bound = float(np.max(gradient[at_upper])) if at_upper.any() else -math.inf
    upper_bound = float(np.min(gradient[at_lower])) if at_lower.any() else math.inf
    if math.isinf(lower_bound):
        return upper_bound
    if math.isinf(upper_bound):
        return lower_bound
    return 0.5 * (lower_bound + upper_bound)


def solve_dual(K: np.ndarray, nu: float) -> tuple[np.ndarray, float, int]:
    """
    Minimize 1/2 a'Ka subject to 0 <= a_i <= 1/(nu n) and sum(a) = 1.

    Sequential minimal optimization on the maximal violating pair; stops when the KKT gap is at most
    KKT_TOLERANCE.

    Returns:
        tuple[np.ndarray, float, int]: Duals, offset rho, iterations used.

    Raises:
        SolverStalledError: If MAX_ITERATIONS is reached first.
    """
    n = K.shape[0]
    upper = 1.0 / (nu * n)
    alphas = _initial_alphas(n, upper)
    gradient = K @ alphas
    diagonal = np.diag(K)

    for iteration in range(MAX_ITERATIONS):
        can_grow = alphas < upper * (1.0 - _BOUND_EPS)
        can_shrink = alphas > upper * _BOUND_EPS
        if not can_grow.any() or not can_shrink.any():
            return alphas, _offset(alphas, gradient, upper), iteration
        i = int(np.argmin(np.where(can_grow, gradient, np.inf)))
        j = int(np.argmax(np.where(can_shrink, gradient, -np.inf)))
        gap = gradient[j] - gradient[i]
        if gap <= KKT_TOLERANCE:
            return alphas, _offset(alphas, gradient, upper), iteration
        curvature = max(diagonal[i] + diagonal[j] - 2.0 * K[i, j], 1e-12)
        step = min(gap / curvature, upper - alphas[i], alphas[j])
        alphas[i] += step
        alphas[j] -= step
        gradient += step * (K[:, i] - K[:, j])

    raise SolverStalledError(f"solver stalled after {MAX_ITERATIONS} iterations (n={n}, nu={nu})")


def train_ocsvm(X: np.ndarray, nu: float, gamma: float | None = None) -> OneClassModel:
    """
    Train a nu one-class SVM with an RBF kernel on target-class vectors.

    Args:
        X (np.ndarray): [n x d] target-class matrix, n >= 2.
        nu (float): Outlier fraction bound, in (0, 1].
        gamma (float | None): RBF width; defaults to `default_gamma(X)`.

    Returns:
        OneClassModel: Support vectors, duals and offset.

    Raises:
        LearnerError: On fewer than two vectors, nu outside (0, 1] or a non-finite feature.
        SolverStalledError: If the solver does not converge.
    """
    X = check_matrix(X)
    n = X.shape[0]
    if n < 2:
        raise LearnerError(f"one-class SVM needs at least 2 vectors, got {n}")
    if not 0.0 < nu <= 1.0:
        raise LearnerError(f"nu must be in (0, 1], got {nu}")
    gamma = default_gamma(X) if gamma is None else float(gamma)
    if gamma <= 0.0:
        raise LearnerError(f"gamma must be positive, got {gamma}")
    if np.all(X == X[0]):
        logger.warning(f"All {n} training vectors are identical; kernel matrix has rank 1.")

    K = rbf_kernel(X, X, gamma)
    alphas, rho, iterations = solve_dual(K, nu)
    logger.debug(f"One-class SVM converged in {iterations} iterations (n={n}, nu={nu}, gamma={gamma:.4g}).")
    keep = alphas > 0.0
    return OneClassModel(
        support_vectors=X[keep].copy(),
        alphas=alphas[keep].copy(),
        rho=rho,
        gamma=gamma,
        nu=float(nu),
    )


def decision_function(model: OneClassModel, X: np.ndarray) -> np.ndarray:
    """Signed decision values of every row of X."""
    X = check_matrix(X, model.n_features)
    return rbf_kernel(X, model.support_vectors, model.gamma) @ model.alphas - model.rho


def score_ocsvm(model: OneClassModel, x: np.ndarray) -> OneClassScore:
    """
    Score one vector; it is a target (clean) iff the score is non-negative.

    Raises:
        LearnerError: On dimension mismatch.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise LearnerError(f"expected a feature vector, got shape {x.shape}")
    score = float(decision_function(model, x[None, :])[0])
    return OneClassScore(score=score, is_target=score >= 0.0)
