import numpy as np

from myoselect.errors import FeatureError


def mav(coeffs: np.ndarray, axis: int = 0) -> float | np.ndarray:
    """
    Mean absolute value.

    Args:
        coeffs (np.ndarray): Coefficients; reduced along `axis`.
        axis (int): Reduction axis.

    Returns:
        float | np.ndarray: Scalar for 1-D input, array otherwise.

    Raises:
        FeatureError: On an empty vector.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.size == 0 or coeffs.shape[axis] == 0:
        raise FeatureError("MAV of an empty vector")
    value = np.mean(np.abs(coeffs), axis=axis)
    return float(value) if np.ndim(value) == 0 else value


def ssc(coeffs: np.ndarray, axis: int = 0) -> float | np.ndarray:
    """
    Slope sign change count with a zero threshold.

    Counts interior points i where (x[i] - x[i-1]) * (x[i+1] - x[i]) < 0; flat segments never count.

    Raises:
        FeatureError: If fewer than three values lie along `axis`.
    """
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.ndim == 0 or coeffs.shape[axis] < 3:
        raise FeatureError("SSC needs at least three values")
    slopes = np.diff(coeffs, axis=axis)
    n = slopes.shape[axis]
    before = np.take(slopes, np.arange(n - 1), axis=axis)
    after = np.take(slopes, np.arange(1, n), axis=axis)
    value = np.sum(before * after < 0, axis=axis).astype(np.float64)
    return float(value) if np.ndim(value) == 0 else value
