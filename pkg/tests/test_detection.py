import numpy as np
import pytest

from myoselect.domain.contamination.models import ContaminationPlan, NoiseKind
from myoselect.domain.contamination.noise import inject_signalset
from myoselect.domain.detection.detector_ensemble import (
    ChannelMask,
    DetectorConfig,
    DetectorEnsemble,
    detect,
    detect_batch,
    feature_bounds,
    min_max_scale,
    train_detectors,
    tune_channel_nu,
    uniform_outliers,
)
from myoselect.domain.features.extraction import extract_features, recording_features
from myoselect.domain.signalset.synthesis import synth_signalset
from myoselect.errors import DetectorError

FAST = DetectorConfig(nu_grid=(0.1, 0.3, 0.5))


@pytest.fixture(scope="module")
def detectors(table):
    """Detectors trained on the whole clean table."""
    return train_detectors(table, seed=1, config=FAST)


def test_channel_mask_properties():
    """
    Test the contaminated list and the all-clean flag of a mask.
    """
    mask = ChannelMask(clean=(True, False, True, False))
    assert mask.contaminated == (1, 3)
    assert not mask.all_clean
    assert len(mask) == 4


def test_min_max_scale_maps_bounds_to_unit_interval():
    """
    Test that training bounds map to 0 and 1 and constant features to 0.
    """
    X = np.array([[1.0, 5.0], [3.0, 5.0]])
    bounds = np.stack([X.min(axis=0), X.max(axis=0)])
    assert min_max_scale(X, bounds).tolist() == [[0.0, 0.0], [1.0, 0.0]]


def test_uniform_outliers_stay_in_inflated_box():
    """
    Test that artificial outliers fall inside the inflated bounding box.
    """
    X = np.array([[0.0, 0.0], [1.0, 2.0]])
    points = uniform_outliers(X, 200, 0.2, np.random.default_rng(0))
    assert points.shape == (200, 2)
    assert points[:, 0].min() >= -0.2 and points[:, 0].max() <= 1.2
    assert points[:, 1].min() >= -0.4 and points[:, 1].max() <= 2.4


def test_tune_channel_nu_prefers_smallest_on_ties(table):
    """
    Test that the selected nu belongs to the grid and ties resolve to the smallest value.
    """
    raw = table.channel_matrix(0)
    X = min_max_scale(raw, feature_bounds(raw))
    choice = tune_channel_nu(X, seed=3, config=FAST)
    assert choice.nu in FAST.nu_grid
    best = max(choice.grid_bac)
    assert choice.nu == FAST.nu_grid[choice.grid_bac.index(best)]
    assert 0.0 <= choice.bac <= 1.0


def test_tune_channel_nu_needs_samples():
    """
    Test that too few samples are rejected.
    """
    with pytest.raises(DetectorError):
        tune_channel_nu(np.zeros((2, 3)), seed=0, config=FAST)


def test_train_detectors_layout(detectors, table):
    """
    Test that one detector per channel is trained with a tuned nu.
    """
    assert detectors.channel_count == table.channel_count
    assert all(nu in FAST.nu_grid for nu in detectors.nu_per_channel)
    assert detectors.feature_bounds.shape == (4, 2, 8)


def test_train_detectors_requires_clean_data(signalset):
    """
    Test that contaminated features cannot train detectors.
    """
    plans = [ContaminationPlan(kind=NoiseKind.GAUSSIAN, snr_db=5.0, channel_ids=(0,), seed=i) for i in range(3)]
    dirty = extract_features(inject_signalset(signalset.subset([0, 10, 20]), plans))
    with pytest.raises(DetectorError, match="clean data"):
        train_detectors(dirty, seed=0, config=FAST)


def test_heavy_contamination_is_flagged(detectors, signalset):
    """
    Test that a channel drowned in noise is flagged on most trials.
    """
    plans = [
        ContaminationPlan(kind=NoiseKind.GAUSSIAN, snr_db=-20.0, channel_ids=(0,), seed=i)
        for i in range(len(signalset))
    ]
    dirty = extract_features(inject_signalset(signalset, plans))
    masks = detect_batch(detectors, dirty.values)
    assert np.mean([not m.clean[0] for m in masks]) >= 0.8


def test_detect_accepts_feature_map(detectors, signalset):
    """
    Test that single-trial detection matches the batch path and checks the layout.
    """
    rec = signalset.recordings[0]
    features = recording_features(rec)
    batch = detect_batch(detectors, np.stack([features[c].values for c in range(4)])[None, ...])[0]
    assert detect(detectors, features) == batch
    with pytest.raises(DetectorError):
        detect(detectors, {0: features[0]})


def test_detector_dict_round_trip(detectors, table):
    """
    Test that a serialized detector ensemble gives the same masks.
    """
    restored = DetectorEnsemble.from_dict(detectors.to_dict())
    assert detect_batch(restored, table.values[:5]) == detect_batch(detectors, table.values[:5])


@pytest.fixture(scope="module")
def paired_detectors():
    """Default-config detectors trained on a clean 8-class, 8-channel set."""
    clean = synth_signalset(classes=8, trials_per_class=20, channel_count_L=4, duration_ms=512.0, seed=1)
    return train_detectors(extract_features(clean), seed=2)


@pytest.mark.slow
def test_box_outliers_are_separated_on_every_channel(paired_detectors):
    """
    Test that the tuned nu separates clean vectors from box outliers with balanced accuracy >= 0.9 per channel.
    """
    assert paired_detectors.channel_count == 8
    assert min(paired_detectors.tuning_bac) >= 0.9


@pytest.mark.slow
def test_gaussian_noise_at_zero_db_is_flagged(paired_detectors):
    """
    Test that white noise at 0 dB on one EMG and one MMG channel is flagged on at least 90% of unseen trials,
    while most untouched channels stay clean.
    """
    unseen = synth_signalset(classes=8, trials_per_class=5, channel_count_L=4, duration_ms=512.0, seed=11)
    plans = [
        ContaminationPlan(kind=NoiseKind.GAUSSIAN, snr_db=0.0, channel_ids=(1, 4), seed=i) for i in range(len(unseen))
    ]
    masks = detect_batch(paired_detectors, extract_features(inject_signalset(unseen, plans)).values)
    flagged = np.array([[not ok for ok in m.clean] for m in masks])
    assert flagged[:, 1].mean() >= 0.9
    assert flagged[:, 4].mean() >= 0.9
    untouched = [0, 2, 3, 5, 6, 7]
    assert 1.0 - flagged[:, untouched].mean() >= 0.7
