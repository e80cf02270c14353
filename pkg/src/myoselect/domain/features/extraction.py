from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from myoselect.domain.features.statistics import mav, ssc
from myoselect.domain.features.wavelet import DEFAULT_LEVELS, DEFAULT_WAVELET, subband_names, wavedec
from myoselect.domain.signalset.models import ChannelInfo, Recording, SignalSet
from myoselect.errors import FeatureError
from myoselect.infrastructure.monitoring.logger import Logger

logger = Logger.get_logger("myoselect.features")

# SSC needs three coefficients in the deepest band
MIN_BAND_LENGTH = 3


class FeatureConfig(BaseModel):
    """
    Wavelet feature settings.

    Attributes:
        wavelet (str): PyWavelets wavelet name.
        levels (int): Decomposition depth.
        include_approximation (bool): Describe the approximation band too (8 features per channel at 3 levels
            instead of 6).

    Recordings must hold a multiple of 2**levels samples and at least `min_length` of them, so that the
    deepest band keeps the three coefficients SSC needs: 24 samples at the default depth.
    """

    model_config = ConfigDict(frozen=True)

    wavelet: str = DEFAULT_WAVELET
    levels: int = Field(DEFAULT_LEVELS, ge=1)
    include_approximation: bool = True

    @property
    def dimension(self) -> int:
        """Features per channel, d_l."""
        return 2 * (self.levels + 1 if self.include_approximation else self.levels)

    @property
    def min_length(self) -> int:
        """Shortest series the features are defined on."""
        return MIN_BAND_LENGTH * 2**self.levels

    def feature_names(self) -> list[str]:
        """Per-channel feature names in extraction order, e.g. ["A3_mav", "A3_ssc", "D3_mav", ...]."""
        bands = subband_names(self.levels, self.include_approximation)
        return [f"{band}_{stat}" for band in bands for stat in ("mav", "ssc")]


DEFAULT_FEATURES = FeatureConfig()


@dataclass(frozen=True)
class FeatureVector:
    """Features x_l of one channel of one recording."""

    values: np.ndarray
    channel_id: int

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64, copy=True)
        if not np.all(np.isfinite(values)):
            raise FeatureError(f"channel {self.channel_id}: non-finite feature")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class ConcatFeature:
    """Concatenated features x_K of a channel subset, channels in ascending order."""

    values: np.ndarray
    subset: tuple[int, ...]


def _band_features(bands: list[np.ndarray], axis: int) -> np.ndarray:
    # Interleave [mav, ssc] per band
    stats = []
    for band in bands:
        stats.append(mav(band, axis=axis))
        stats.append(ssc(band, axis=axis))
    return np.stack([np.asarray(s, dtype=np.float64) for s in stats], axis=-1)


def _selected_bands(coeffs: list[np.ndarray], config: FeatureConfig) -> list[np.ndarray]:
    return coeffs if config.include_approximation else coeffs[1:]


def _check_length(n: int, config: FeatureConfig) -> None:
    if n < config.min_length:
        raise FeatureError(
            f"recording of {n} samples is shorter than the {config.min_length} required at {config.levels} levels"
        )


def extract_channel(rec: Recording, channel_id: int, config: FeatureConfig = DEFAULT_FEATURES) -> FeatureVector:
    """
    Wavelet MAV/SSC features of one channel.

    Args:
        rec (Recording): Source recording.
        channel_id (int): Channel to describe.
        config (FeatureConfig): Wavelet settings.

    Returns:
        FeatureVector: [MAV, SSC] for each subband in order A3, D3, D2, D1 (default settings).

    Raises:
        FeatureError: On an invalid channel, or a signal shorter than `config.min_length` or not a multiple of
            2**levels.
    """
    if not 0 <= channel_id < rec.channel_count:
        raise FeatureError(f"channel {channel_id} outside the {rec.channel_count}-channel layout")
    _check_length(rec.n_samples, config)
    coeffs = wavedec(rec.samples[:, channel_id], config.levels, config.wavelet)
    values = _band_features(_selected_bands(coeffs, config), axis=0)
    return FeatureVector(values=values, channel_id=channel_id)


def extract_recording(rec: Recording, config: FeatureConfig = DEFAULT_FEATURES) -> np.ndarray:
    """
    Features of every channel of a recording.

    Returns:
        np.ndarray: [2L x d_l] matrix; row l equals `extract_channel(rec, l).values`.
    """
    _check_length(rec.n_samples, config)
    coeffs = wavedec(rec.samples, config.levels, config.wavelet, axis=0)
    return _band_features(_selected_bands(coeffs, config), axis=0)


def recording_features(rec: Recording, config: FeatureConfig = DEFAULT_FEATURES) -> dict[int, FeatureVector]:
    """Per-channel feature map of a recording."""
    matrix = extract_recording(rec, config)
    return {ch.id: FeatureVector(values=matrix[ch.id], channel_id=ch.id) for ch in rec.channels}


def canonical_subset(subset: Iterable[int]) -> tuple[int, ...]:
    """Ascending tuple of distinct channel ids."""
    return tuple(sorted({int(c) for c in subset}))


def concat(features: Mapping[int, FeatureVector], subset: Iterable[int]) -> ConcatFeature:
    """
    Concatenate channel features of `subset` in ascending channel order.

    Raises:
        FeatureError: If a channel of the subset is missing from `features`.
    """
    ordered = canonical_subset(subset)
    missing = [c for c in ordered if c not in features]
    if missing:
        raise FeatureError(f"missing channel features: {missing}")
    values = np.concatenate([features[c].values for c in ordered]) if ordered else np.empty(0)
    return ConcatFeature(values=values, subset=ordered)


@dataclass(frozen=True)
class FeatureTable:
    """
    Features of a whole signalset.

    Attributes:
        values (np.ndarray): [n_trials x 2L x d_l] feature tensor.
        labels (np.ndarray): Class index per trial.
        class_count (int): Number of classes M.
        channels (tuple[ChannelInfo, ...]): Channel layout.
        feature_names (tuple[str, ...]): Per-channel feature names.
        contaminated (bool): True if extracted from contaminated recordings.
    """

    values: np.ndarray
    labels: np.ndarray
    class_count: int
    channels: tuple[ChannelInfo, ...]
    feature_names: tuple[str, ...]
    contaminated: bool = False

    def __len__(self) -> int:
        return int(self.values.shape[0])

    @property
    def channel_count(self) -> int:
        return int(self.values.shape[1])

    @property
    def dimension(self) -> int:
        return int(self.values.shape[2])

    def channel_matrix(self, channel_id: int) -> np.ndarray:
        """Training matrix of one channel, [n_trials x d_l]."""
        return self.values[:, channel_id, :]

    def concat(self, subset: Iterable[int]) -> np.ndarray:
        """Concatenated features of `subset` for every trial, [n_trials x |subset| d_l]."""
        ordered = canonical_subset(subset)
        if not ordered or ordered[-1] >= self.channel_count:
            raise FeatureError(f"subset {ordered} not within the {self.channel_count}-channel layout")
        return self.values[:, ordered, :].reshape(len(self), -1)

    def full(self) -> np.ndarray:
        """Concatenation over all channels."""
        return self.values.reshape(len(self), -1)

    def take(self, indices: np.ndarray | list[int]) -> "FeatureTable":
        """Rows `indices` of the table."""
        idx = np.asarray(indices, dtype=np.int64)
        return FeatureTable(
            values=self.values[idx],
            labels=self.labels[idx],
            class_count=self.class_count,
            channels=self.channels,
            feature_names=self.feature_names,
            contaminated=self.contaminated,
        )

    def column_names(self) -> list[str]:
        """Flat column names of `full()`, e.g. "c0_A3_mav"."""
        return [f"c{ch.id}_{name}" for ch in self.channels for name in self.feature_names]


def extract_features(signalset: SignalSet, config: FeatureConfig = DEFAULT_FEATURES) -> FeatureTable:
    """
    Extract the feature tensor of every recording of a signalset.

    Args:
        signalset (SignalSet): Source recordings.
        config (FeatureConfig): Wavelet settings.

    Returns:
        FeatureTable: Features carrying the signalset's contamination flag.
    """
    logger.debug(
        f"Extracting {config.dimension} features x {signalset.channel_count} channels for {len(signalset)} trials."
    )
    values = np.stack([extract_recording(rec, config) for rec in signalset.recordings])
    return FeatureTable(
        values=values,
        labels=signalset.labels,
        class_count=signalset.class_count,
        channels=signalset.channels,
        feature_names=tuple(config.feature_names()),
        contaminated=signalset.contaminated,
    )
