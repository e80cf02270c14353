import numpy as np

from myoselect.domain.contamination.models import ContaminationPlan, NoiseKind
from myoselect.domain.seeding import derive_seed
from myoselect.errors import ContaminationError

# Range of the contaminated-channel count on the paired 8-channel layout
MAX_CONTAMINATED_CHANNELS = 7

NOISE_KINDS = tuple(NoiseKind)


def contaminated_count_range(channel_total: int) -> range:
    """Admissible numbers of contaminated channels: 1..7, or 1..channel_total-1 on smaller layouts."""
    if channel_total < 2:
        raise ContaminationError(f"at least two channels are needed to leave one clean, got {channel_total}")
    return range(1, min(MAX_CONTAMINATED_CHANNELS, channel_total - 1) + 1)


def plan_random_contamination(rec_count: int, channel_total: int, snr_db: float, seed: int) -> list[ContaminationPlan]:
    """
    Draw one contamination plan per recording.

    The noise kind is uniform over the five kinds, the number of contaminated channels is uniform over
    `contaminated_count_range(channel_total)`, and channels are sampled without replacement. Each plan gets
    its own realization seed.

    Args:
        rec_count (int): Number of recordings.
        channel_total (int): Channels per recording (2L).
        snr_db (float): SNR shared by every plan.
        seed (int): Planner seed.

    Returns:
        list[ContaminationPlan]: Plans in recording order.
    """
    counts = contaminated_count_range(channel_total)
    rng = np.random.default_rng(seed)
    plans = []
    for index in range(rec_count):
        kind = NOISE_KINDS[int(rng.integers(len(NOISE_KINDS)))]
        count = int(rng.integers(counts.start, counts.stop))
        channels = rng.choice(channel_total, size=count, replace=False)
        plans.append(
            ContaminationPlan(
                kind=kind,
                snr_db=snr_db,
                channel_ids=tuple(int(c) for c in channels),
                seed=derive_seed(seed, "plan", index),
            )
        )
    return plans
