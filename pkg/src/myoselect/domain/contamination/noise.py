import math
from collections.abc import Sequence

import numpy as np

from myoselect.domain.contamination.models import ContaminationPlan, NoiseKind
from myoselect.domain.signalset.models import Recording, SignalSet
from myoselect.errors import ContaminationError
from myoselect.infrastructure.monitoring.logger import Logger

logger = Logger.get_logger("myoselect.noise")

POWER_LINE_HZ = (48.0, 52.0)
BASELINE_WANDER_HZ = (0.5, 1.5)

# Sentinel returned by measure_snr when dirty == clean
IDENTICAL = math.inf

CLIPPING_TOLERANCE_DB = 0.1
CLIPPING_MAX_ITERATIONS = 60
_CLIP_T_LOW = 1e-9
_CLIP_T_HIGH = 1e3


def signal_power(x: np.ndarray) -> float:
    """Mean square of a series."""
    return float(np.mean(np.square(x)))


def measure_snr(clean: np.ndarray, dirty: np.ndarray) -> float:
    """
    Signal-to-residual ratio of a contaminated series in decibels.

    SNR = 10 log10(P_clean / P_residual), with P_residual the mean square of (dirty - clean).

    Args:
        clean (np.ndarray): Uncontaminated series.
        dirty (np.ndarray): Contaminated series of the same length.

    Returns:
        float: SNR in dB, or `IDENTICAL` (+inf) when the residual is exactly zero.

    Raises:
        ContaminationError: On length mismatch or a silent clean series.
    """
    clean = np.asarray(clean, dtype=np.float64)
    dirty = np.asarray(dirty, dtype=np.float64)
    if clean.shape != dirty.shape:
        raise ContaminationError(f"length mismatch: {clean.shape} vs {dirty.shape}")
    p_clean = signal_power(clean)
    if p_clean == 0.0:
        raise ContaminationError("clean series has zero power")
    p_residual = signal_power(dirty - clean)
    if p_residual == 0.0:
        logger.debug("SNR measurement on identical series.")
        return IDENTICAL
    return 10.0 * math.log10(p_clean / p_residual)


def attenuation_gain(snr_db: float) -> float:
    """
    Gain a such that a*x has residual power 10^(-snr/10) relative to x; capped below 1.

    Raises:
        ContaminationError: If the target is below 0 dB, which would need a negative gain.
    """
    if snr_db < 0.0:
        raise ContaminationError(f"attenuation cannot realize SNR below 0 dB (requested {snr_db})")
    return min(1.0 - 10.0 ** (-snr_db / 20.0), math.nextafter(1.0, 0.0))


def attenuate(x: np.ndarray, snr_db: float) -> np.ndarray:
    """Scale a channel down so that the loss itself has the requested SNR."""
    return attenuation_gain(snr_db) * x


def soft_clip(x: np.ndarray, threshold: float) -> np.ndarray:
    """Saturating amplifier model y = T tanh(x / T)."""
    return threshold * np.tanh(x / threshold)


def clip(x: np.ndarray, snr_db: float) -> np.ndarray:
    """
    Soft-clip a channel with the threshold that realizes `snr_db`.

    The threshold is searched by bisection in log scale until the realized SNR is within
    CLIPPING_TOLERANCE_DB of the target or CLIPPING_MAX_ITERATIONS is reached. Realized SNR grows
    monotonically with the threshold and tends to 0 dB as the threshold vanishes.

    Raises:
        ContaminationError: If the target is below 0 dB, which clipping cannot reach.
    """
    if snr_db < 0.0:
        raise ContaminationError(f"clipping cannot realize SNR below 0 dB (requested {snr_db})")
    peak = float(np.max(np.abs(x)))
    lo, hi = math.log(_CLIP_T_LOW * peak), math.log(_CLIP_T_HIGH * peak)
    threshold = math.exp(0.5 * (lo + hi))
    for _ in range(CLIPPING_MAX_ITERATIONS):
        threshold = math.exp(0.5 * (lo + hi))
        realized = measure_snr(x, soft_clip(x, threshold))
        if abs(realized - snr_db) <= CLIPPING_TOLERANCE_DB:
            break
        if realized < snr_db:
            lo = math.log(threshold)
        else:
            hi = math.log(threshold)
    return soft_clip(x, threshold)


def scaled_to_power(component: np.ndarray, target_power: float) -> np.ndarray:
    """Rescale an additive component so its realized mean square equals `target_power`."""
    power = signal_power(component)
    if power == 0.0:
        return component
    return component * math.sqrt(target_power / power)


def sinusoid(n: int, rate_hz: float, freq_hz: float, phase: float) -> np.ndarray:
    """Unit-amplitude sampled sinusoid."""
    t = np.arange(n) / rate_hz
    return np.sin(2.0 * np.pi * freq_hz * t + phase)


def _tone_component(n: int, rate_hz: float, freq_hz: float, phase: float, target_power: float) -> np.ndarray:
    tone = sinusoid(n, rate_hz, freq_hz, phase)
    if signal_power(tone) == 0.0:
        # Closed form for a full-cycle tone: power A^2 / 2
        return math.sqrt(2.0 * target_power) * tone
    return scaled_to_power(tone, target_power)


def inject(rec: Recording, plan: ContaminationPlan) -> Recording:
    """
    Apply a contamination plan to a recording.

    Only the listed channels change. Additive kinds (power line, Gaussian, baseline wander) add a component
    whose realized power equals P_signal * 10^(-snr/10); attenuation and clipping distort the channel so that
    the residual has that power.

    Args:
        rec (Recording): Clean recording.
        plan (ContaminationPlan): Kind, SNR, channels and seed.

    Returns:
        Recording: New recording with contaminated channels.

    Raises:
        ContaminationError: If the plan names a channel outside the layout, or a multiplicative kind is
            requested on a silent channel.
    """
    if plan.channel_ids[-1] >= rec.channel_count:
        raise ContaminationError(f"plan channels {plan.channel_ids} exceed the {rec.channel_count}-channel layout")

    rng = np.random.default_rng(plan.seed)
    freq = phase = 0.0
    if plan.kind is NoiseKind.POWER_LINE:
        freq = rng.uniform(*POWER_LINE_HZ)
        phase = rng.uniform(0.0, 2.0 * np.pi)
    elif plan.kind is NoiseKind.BASELINE_WANDER:
        freq = rng.uniform(*BASELINE_WANDER_HZ)
        phase = rng.uniform(0.0, 2.0 * np.pi)

    samples = np.array(rec.samples, copy=True)
    n = rec.n_samples
    for channel in plan.channel_ids:
        x = samples[:, channel]
        p_signal = signal_power(x)
        if p_signal == 0.0:
            if plan.kind.is_multiplicative:
                raise ContaminationError(f"undefined SNR on silent channel {channel}")
            logger.warning(f"Channel {channel} is silent; {plan.kind.value} noise has zero power there.")
            continue
        target = p_signal * 10.0 ** (-plan.snr_db / 10.0)
        match plan.kind:
            case NoiseKind.ATTENUATION:
                samples[:, channel] = attenuate(x, plan.snr_db)
            case NoiseKind.CLIPPING:
                samples[:, channel] = clip(x, plan.snr_db)
            case NoiseKind.GAUSSIAN:
                samples[:, channel] = x + scaled_to_power(rng.standard_normal(n), target)
            case NoiseKind.POWER_LINE | NoiseKind.BASELINE_WANDER:
                samples[:, channel] = x + _tone_component(n, rec.sampling_rate, freq, phase, target)
    return rec.with_samples(samples)


def inject_signalset(signalset: SignalSet, plans: Sequence[ContaminationPlan]) -> SignalSet:
    """
    Contaminate every recording of a signalset with its plan; the result is flagged as contaminated.

    Raises:
        ContaminationError: If the plan count differs from the recording count, or from `inject`.
    """
    if len(plans) != len(signalset):
        raise ContaminationError(f"{len(plans)} plans for {len(signalset)} recordings")
    recordings = [inject(rec, plan) for rec, plan in zip(signalset.recordings, plans, strict=True)]
    return signalset.replace_recordings(recordings, contaminated=True)
