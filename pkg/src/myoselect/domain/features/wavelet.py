import warnings

import numpy as np
import pywt

from myoselect.errors import FeatureError

DEFAULT_WAVELET = "db6"
DEFAULT_LEVELS = 3
# Periodization keeps the transform orthonormal, so coefficient energy equals signal energy, as long as every
# level halves an even length: series lengths must be multiples of 2**levels
EXTENSION_MODE = "periodization"


def wavedec(signal: np.ndarray, levels: int, wavelet: str = DEFAULT_WAVELET, axis: int = 0) -> list[np.ndarray]:
    """
    Multilevel DWT along `axis` with periodic extension.

    Args:
        signal (np.ndarray): Series, 1-D or stacked along `axis`.
        levels (int): Decomposition depth (>= 1).
        wavelet (str): PyWavelets wavelet name.
        axis (int): Time axis.

    Returns:
        list[np.ndarray]: [A_levels, D_levels, ..., D_1].

    Raises:
        FeatureError: If `levels` < 1, or the series is shorter than 2**levels or not a multiple of it.
    """
    signal = np.asarray(signal, dtype=np.float64)
    if levels < 1:
        raise FeatureError(f"decomposition depth must be >= 1, got {levels}")
    if signal.shape[axis] < 2**levels:
        raise FeatureError(f"signal of length {signal.shape[axis]} is too short for {levels} decomposition levels")
    if signal.shape[axis] % 2**levels:
        raise FeatureError(
            f"signal length {signal.shape[axis]} is not a multiple of {2**levels} ({levels} decomposition levels)"
        )
    with warnings.catch_warnings():
        # pywt warns when the filter is longer than the deepest band; periodization stays exact regardless
        warnings.simplefilter("ignore", UserWarning)
        return pywt.wavedec(signal, wavelet, mode=EXTENSION_MODE, level=levels, axis=axis)


def waverec(coeffs: list[np.ndarray], wavelet: str = DEFAULT_WAVELET, axis: int = 0) -> np.ndarray:
    """Inverse of `wavedec`."""
    return pywt.waverec(coeffs, wavelet, mode=EXTENSION_MODE, axis=axis)


def dwt_db6(signal: np.ndarray, levels: int = DEFAULT_LEVELS) -> list[np.ndarray]:
    """
    Daubechies-6 analysis of a 1-D series with periodic boundary extension.

    Args:
        signal (np.ndarray): Real series whose length is a positive multiple of 2**levels.
        levels (int): Decomposition depth.

    Returns:
        list[np.ndarray]: Subbands [A_levels, D_levels, ..., D_1].
    """
    signal = np.asarray(signal, dtype=np.float64)
    if signal.ndim != 1:
        raise FeatureError(f"expected a 1-D series, got shape {signal.shape}")
    return wavedec(signal, levels, DEFAULT_WAVELET)


def idwt_db6(coeffs: list[np.ndarray], length: int | None = None) -> np.ndarray:
    """
    Daubechies-6 synthesis; inverse of `dwt_db6`.

    Args:
        coeffs (list[np.ndarray]): Subbands as returned by `dwt_db6`.
        length (int | None): Trim the reconstruction to this length.

    Returns:
        np.ndarray: Reconstructed series.
    """
    signal = waverec(coeffs, DEFAULT_WAVELET)
    return signal[:length] if length is not None else signal


def subband_names(levels: int, include_approximation: bool = True) -> list[str]:
    """Names of the subbands in `wavedec` order, e.g. ["A3", "D3", "D2", "D1"]."""
    names = [f"D{level}" for level in range(levels, 0, -1)]
    return [f"A{levels}", *names] if include_approximation else names
