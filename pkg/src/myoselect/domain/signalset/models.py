from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from myoselect.errors import SignalSetError


class Modality(str, Enum):
    """Sensor modality of a channel."""

    EMG = "EMG"
    MMG = "MMG"


@dataclass(frozen=True)
class ChannelInfo:
    """One recording channel: its index in the sample matrix and the sensor modality."""

    id: int
    modality: Modality


def paired_layout(sensor_pairs: int) -> tuple[ChannelInfo, ...]:
    """
    Build the standard channel layout for `sensor_pairs` EMG/MMG sensor pairs.

    EMG channels come first (ids 0..L-1), MMG channels follow (ids L..2L-1).

    Args:
        sensor_pairs (int): Number of sensor pairs L.

    Returns:
        tuple[ChannelInfo, ...]: 2L channels.
    """
    if sensor_pairs < 1:
        raise SignalSetError("at least one sensor pair is required")
    emg = [ChannelInfo(i, Modality.EMG) for i in range(sensor_pairs)]
    mmg = [ChannelInfo(sensor_pairs + i, Modality.MMG) for i in range(sensor_pairs)]
    return tuple(emg + mmg)


def validate_layout(channels: Sequence[ChannelInfo]) -> None:
    """
    Check that channel ids are contiguous from zero and both modalities have the same channel count.

    Raises:
        SignalSetError: If the layout breaks either rule.
    """
    ids = [c.id for c in channels]
    if ids != list(range(len(ids))):
        raise SignalSetError(f"channel ids must be contiguous 0..{len(ids) - 1}, got {ids}")
    per_modality = Counter(c.modality for c in channels)
    if per_modality[Modality.EMG] != per_modality[Modality.MMG]:
        raise SignalSetError(
            f"channel layout must pair sensors: {per_modality[Modality.EMG]} EMG vs {per_modality[Modality.MMG]} MMG"
        )


@dataclass(frozen=True)
class Recording:
    """
    One trial: a [n_samples x 2L] float64 sample matrix with its class label and channel layout.

    The sample matrix is copied on construction and made read-only.
    """

    samples: np.ndarray
    sampling_rate: float
    label: int
    channels: tuple[ChannelInfo, ...]

    def __post_init__(self) -> None:
        samples = np.array(self.samples, dtype=np.float64, copy=True)
        if samples.ndim != 2:
            raise SignalSetError(f"samples must be a 2-D matrix, got shape {samples.shape}")
        if samples.shape[1] != len(self.channels):
            raise SignalSetError(
                f"channel mismatch: {samples.shape[1]} sample columns for {len(self.channels)} channels"
            )
        if samples.shape[0] < 1:
            raise SignalSetError("recording has no samples")
        if not np.all(np.isfinite(samples)):
            raise SignalSetError("recording contains a non-finite sample")
        if self.sampling_rate <= 0:
            raise SignalSetError(f"sampling rate must be positive, got {self.sampling_rate}")
        if self.label < 0:
            raise SignalSetError(f"label must be non-negative, got {self.label}")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "label", int(self.label))
        object.__setattr__(self, "sampling_rate", float(self.sampling_rate))

    @property
    def n_samples(self) -> int:
        return int(self.samples.shape[0])

    @property
    def channel_count(self) -> int:
        return len(self.channels)

    @property
    def duration_ms(self) -> float:
        return 1000.0 * self.n_samples / self.sampling_rate

    def with_samples(self, samples: np.ndarray) -> "Recording":
        """Return a copy of this recording carrying different samples."""
        return Recording(samples=samples, sampling_rate=self.sampling_rate, label=self.label, channels=self.channels)


@dataclass(frozen=True)
class SignalSet:
    """
    A labelled collection of recordings sharing sampling rate and channel layout.

    Attributes:
        recordings (tuple[Recording, ...]): Trials in storage order.
        class_count (int): Number of classes M; labels lie in [0, M).
        name (str): Human-readable name.
        seed (int | None): Generator seed, when the set is synthetic.
        class_names (tuple[str, ...]): One label string per class.
        contaminated (bool): True once any recording went through noise injection.
    """

    recordings: tuple[Recording, ...]
    class_count: int
    name: str = "signalset"
    seed: int | None = None
    class_names: tuple[str, ...] = field(default=())
    contaminated: bool = False

    def __post_init__(self) -> None:
        recordings = tuple(self.recordings)
        if not recordings:
            raise SignalSetError("empty signalset")
        first = recordings[0]
        validate_layout(first.channels)
        for index, rec in enumerate(recordings):
            if rec.sampling_rate != first.sampling_rate:
                raise SignalSetError(f"trial {index}: sampling rate {rec.sampling_rate} != {first.sampling_rate}")
            if rec.channels != first.channels:
                raise SignalSetError(f"trial {index}: channel layout differs from trial 0")
            if rec.label >= self.class_count:
                raise SignalSetError(f"trial {index}: label {rec.label} outside [0, {self.class_count})")
        missing = set(range(self.class_count)) - {rec.label for rec in recordings}
        if missing:
            raise SignalSetError(f"classes without recordings: {sorted(missing)}")
        names = tuple(self.class_names) or tuple(f"class_{c}" for c in range(self.class_count))
        if len(names) != self.class_count:
            raise SignalSetError(f"{len(names)} class names for {self.class_count} classes")
        object.__setattr__(self, "recordings", recordings)
        object.__setattr__(self, "class_names", names)

    def __len__(self) -> int:
        return len(self.recordings)

    @property
    def channels(self) -> tuple[ChannelInfo, ...]:
        return self.recordings[0].channels

    @property
    def channel_count(self) -> int:
        return len(self.channels)

    @property
    def sampling_rate(self) -> float:
        return self.recordings[0].sampling_rate

    @property
    def labels(self) -> np.ndarray:
        return np.array([rec.label for rec in self.recordings], dtype=np.int64)

    def subset(self, indices: Sequence[int]) -> "SignalSet":
        """Return the signalset restricted to `indices`, in the given order."""
        return self.replace_recordings([self.recordings[i] for i in indices])

    def replace_recordings(self, recordings: Sequence[Recording], contaminated: bool | None = None) -> "SignalSet":
        """Return a signalset with the same metadata and different recordings."""
        return SignalSet(
            recordings=tuple(recordings),
            class_count=self.class_count,
            name=self.name,
            seed=self.seed,
            class_names=self.class_names,
            contaminated=self.contaminated if contaminated is None else contaminated,
        )
