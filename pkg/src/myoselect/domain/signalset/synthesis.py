import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from myoselect.domain.signalset.models import Modality, Recording, SignalSet, paired_layout
from myoselect.errors import SignalSetError
from myoselect.infrastructure.monitoring.logger import Logger

logger = Logger.get_logger("myoselect.synthesis")

EMG_BAND_HZ = (20.0, 450.0)
MMG_BAND_HZ = (5.0, 100.0)
MIN_RATE_HZ = 2 * EMG_BAND_HZ[1]
# Corner of the EMG power shape; the density peaks at EMG_CORNER_HZ / sqrt(2), about 71 Hz
EMG_CORNER_HZ = 100.0

# Nominal amplitude per modality, roughly millivolt scale
_MODALITY_GAIN = {Modality.EMG: 1.0, Modality.MMG: 0.5}

# Classes x channels (EMG 0-3, MMG 4-7); each row has its own sparsity pattern.
# Rows follow the eight imagined movements: wrist flexion/extension, ulnar/radial deviation,
# index+middle flexion/extension, ring+little flexion/extension.
_PAIRED_ACTIVATION = np.array(
    [
        [1.0, 0.6, 0.2, 0.2, 0.9, 0.5, 0.2, 0.2],
        [0.2, 0.2, 1.0, 0.6, 0.2, 0.2, 0.9, 0.5],
        [0.6, 0.2, 0.2, 1.0, 0.5, 0.2, 0.2, 0.9],
        [0.2, 1.0, 0.6, 0.2, 0.2, 0.9, 0.5, 0.2],
        [1.0, 0.2, 1.0, 0.2, 0.4, 0.2, 0.4, 0.2],
        [0.2, 1.0, 0.2, 1.0, 0.2, 0.4, 0.2, 0.4],
        [1.0, 1.0, 0.2, 0.2, 0.2, 0.2, 0.9, 0.9],
        [0.2, 0.2, 1.0, 1.0, 0.9, 0.9, 0.2, 0.2],
    ]
)
_ACTIVATION_LEVELS = np.array([0.2, 0.5, 1.0])
_ACTIVATION_SEED = 8_2024

TRIAL_GAIN_SIGMA = 0.10
CHANNEL_GAIN_SIGMA = 0.15


class SynthConfig(BaseModel):
    """
    Parameters of the synthetic EMG/MMG signalset generator.

    Attributes:
        classes (int): Number of movement classes M.
        trials_per_class (int): Recordings generated per class.
        sensor_pairs (int): Number of EMG/MMG sensor pairs L (2L channels).
        duration_ms (float): Trial length in milliseconds.
        rate_hz (float): Sampling rate; must cover the EMG band.
        seed (int): Seed of the per-trial noise realizations.
    """

    model_config = ConfigDict(frozen=True)

    classes: int = Field(8, ge=2)
    trials_per_class: int = Field(40, ge=1)
    sensor_pairs: int = Field(4, ge=1)
    duration_ms: float = Field(1000.0, gt=0)
    rate_hz: float = Field(1000.0, gt=0)
    seed: int = 0


def activation_matrix(classes: int, channel_total: int) -> np.ndarray:
    """
    Class x channel activation levels, independent of any generator seed.

    The paired 8x8 table is used whenever it covers the request; other shapes are drawn once from a
    fixed generator and redrawn until every class has a distinct row.

    Args:
        classes (int): Number of classes.
        channel_total (int): Number of channels 2L.

    Returns:
        np.ndarray: [classes x channel_total] activation matrix.
    """
    if classes <= _PAIRED_ACTIVATION.shape[0] and channel_total == _PAIRED_ACTIVATION.shape[1]:
        return _PAIRED_ACTIVATION[:classes].copy()
    rng = np.random.default_rng(_ACTIVATION_SEED)
    for _ in range(1000):
        matrix = rng.choice(_ACTIVATION_LEVELS, size=(classes, channel_total))
        if len({row.tobytes() for row in matrix}) == classes:
            return matrix
    raise SignalSetError(f"cannot build distinct activation rows for {classes} classes on {channel_total} channels")


def band_limit(signal: np.ndarray, rate_hz: float, band_hz: tuple[float, float]) -> np.ndarray:
    """
    Zero every frequency bin outside `band_hz` (inclusive edges).

    Args:
        signal (np.ndarray): Series along axis 0 (1-D or [n x channels]).
        rate_hz (float): Sampling rate.
        band_hz (tuple[float, float]): Pass band edges in Hz.

    Returns:
        np.ndarray: Band-limited series of the same shape.
    """
    n = signal.shape[0]
    spectrum = np.fft.rfft(signal, axis=0)
    freqs = np.fft.rfftfreq(n, d=1.0 / rate_hz)
    keep = (freqs >= band_hz[0]) & (freqs <= band_hz[1])
    spectrum[~keep] = 0.0
    return np.fft.irfft(spectrum, n=n, axis=0)


def emg_power_shape(freqs_hz: np.ndarray) -> np.ndarray:
    """
    Relative power density of surface EMG: x / (1 + x)^3 with x = (f / EMG_CORNER_HZ)^2.

    Rises as f^2 below the peak and falls as f^-4 above it, so most energy sits between 40 and 150 Hz and
    the 250-500 Hz band holds only a few percent.
    """
    x = np.square(np.asarray(freqs_hz, dtype=np.float64) / EMG_CORNER_HZ)
    return x / (1.0 + x) ** 3


def _band_noise(
    rng: np.random.Generator, n: int, rate_hz: float, band_hz: tuple[float, float], shaped: bool = False
) -> np.ndarray:
    spectrum = np.fft.rfft(rng.standard_normal(n))
    freqs = np.fft.rfftfreq(n, d=1.0 / rate_hz)
    if shaped:
        spectrum *= np.sqrt(emg_power_shape(freqs))
    spectrum[(freqs < band_hz[0]) | (freqs > band_hz[1])] = 0.0
    noise = np.fft.irfft(spectrum, n=n)
    std = noise.std()
    return noise / std if std > 0 else noise


def _envelope(n: int) -> np.ndarray:
    # Slow rise and fall over the trial window
    t = np.arange(n) / max(n - 1, 1)
    return 0.6 + 0.4 * np.sin(np.pi * t)


def synth_signalset(
    classes: int = 8,
    trials_per_class: int = 40,
    channel_count_L: int = 4,
    duration_ms: float = 1000.0,
    rate: float = 1000.0,
    seed: int = 0,
) -> SignalSet:
    """
    Generate a deterministic synthetic EMG/MMG signalset.

    EMG channels carry Gaussian noise coloured by `emg_power_shape` and limited to 20-450 Hz, MMG channels
    flat band-limited Gaussian noise in 5-100 Hz. Each channel
    is scaled by the class activation level, a per-trial gain and a per-channel gain, shaped by a slow
    envelope, then band-limited again so the band edges stay exact.

    Args:
        classes (int): Number of classes M (>= 2).
        trials_per_class (int): Recordings per class (>= 1).
        channel_count_L (int): Sensor pairs L (>= 1); the set has 2L channels.
        duration_ms (float): Trial duration in milliseconds.
        rate (float): Sampling rate in Hz (>= 900).
        seed (int): Seed for the noise realizations.

    Returns:
        SignalSet: classes x trials_per_class recordings, grouped by class.

    Raises:
        SignalSetError: If the arguments are out of range or the rate cannot carry the EMG band.
    """
    if classes < 2:
        raise SignalSetError(f"at least two classes are required, got {classes}")
    if trials_per_class < 1:
        raise SignalSetError(f"at least one trial per class is required, got {trials_per_class}")
    if rate < MIN_RATE_HZ:
        raise SignalSetError(f"sampling rate {rate} Hz is below {MIN_RATE_HZ} Hz required by the EMG band")
    n_samples = int(round(rate * duration_ms / 1000.0))
    if n_samples < 1:
        raise SignalSetError(f"duration {duration_ms} ms yields no samples at {rate} Hz")

    channels = paired_layout(channel_count_L)
    activation = activation_matrix(classes, len(channels))
    envelope = _envelope(n_samples)
    rng = np.random.default_rng(seed)
    logger.info(
        f"Synthesizing {classes * trials_per_class} trials: {classes} classes, {len(channels)} channels, "
        f"{n_samples} samples at {rate} Hz (seed={seed})."
    )

    recordings = []
    for label in range(classes):
        for _ in range(trials_per_class):
            trial_gain = np.exp(rng.normal(0.0, TRIAL_GAIN_SIGMA))
            samples = np.empty((n_samples, len(channels)))
            for ch in channels:
                band = EMG_BAND_HZ if ch.modality is Modality.EMG else MMG_BAND_HZ
                gain = _MODALITY_GAIN[ch.modality] * activation[label, ch.id] * trial_gain
                gain *= np.exp(rng.normal(0.0, CHANNEL_GAIN_SIGMA))
                carrier = _band_noise(rng, n_samples, rate, band, shaped=ch.modality is Modality.EMG)
                samples[:, ch.id] = band_limit(gain * envelope * carrier, rate, band)
            recordings.append(Recording(samples=samples, sampling_rate=rate, label=label, channels=channels))

    return SignalSet(
        recordings=tuple(recordings),
        class_count=classes,
        name=f"synth-{classes}x{trials_per_class}-L{channel_count_L}-s{seed}",
        seed=seed,
    )


def synth_from_config(config: SynthConfig) -> SignalSet:
    """Run `synth_signalset` with the fields of a `SynthConfig`."""
    return synth_signalset(
        classes=config.classes,
        trials_per_class=config.trials_per_class,
        channel_count_L=config.sensor_pairs,
        duration_ms=config.duration_ms,
        rate=config.rate_hz,
        seed=config.seed,
    )
