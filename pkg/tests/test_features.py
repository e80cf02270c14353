import numpy as np
import pytest

from myoselect.domain.features.extraction import (
    FeatureConfig,
    FeatureVector,
    concat,
    extract_channel,
    extract_features,
    extract_recording,
    recording_features,
)
from myoselect.domain.features.statistics import mav, ssc
from myoselect.domain.features.wavelet import dwt_db6, idwt_db6, subband_names
from myoselect.domain.signalset.models import Recording, paired_layout
from myoselect.errors import FeatureError


def test_mav_and_ssc_small_examples():
    """
    Test MAV and SSC on hand-checked vectors.
    """
    assert mav(np.array([-1.0, 2.0, -3.0])) == pytest.approx(2.0)
    assert ssc(np.array([1.0, 3.0, 2.0, 4.0])) == 2.0
    assert ssc(np.array([1.0, 1.0, 1.0])) == 0.0


def test_statistics_reject_short_input():
    """
    Test that MAV needs one value and SSC needs three.
    """
    with pytest.raises(FeatureError):
        mav(np.array([]))
    with pytest.raises(FeatureError):
        ssc(np.array([1.0, 2.0]))


def test_db6_perfect_reconstruction():
    """
    Test that the three-level db6 transform inverts exactly.
    """
    x = np.random.default_rng(1).normal(size=256)
    coeffs = dwt_db6(x)
    assert [c.size for c in coeffs] == [32, 32, 64, 128]
    assert np.allclose(idwt_db6(coeffs, 256), x, atol=1e-10)


def test_db6_rejects_short_signal():
    """
    Test that a series shorter than 2**levels is rejected.
    """
    with pytest.raises(FeatureError):
        dwt_db6(np.ones(4))


def test_subband_names():
    """
    Test the order of subband names with and without the approximation band.
    """
    assert subband_names(3) == ["A3", "D3", "D2", "D1"]
    assert subband_names(3, include_approximation=False) == ["D3", "D2", "D1"]


def test_channel_features_match_recording_matrix(signalset):
    """
    Test that per-channel extraction equals the rows of the vectorized recording extraction.
    """
    rec = signalset.recordings[5]
    matrix = extract_recording(rec)
    assert matrix.shape == (4, 8)
    for channel in range(4):
        assert np.allclose(extract_channel(rec, channel).values, matrix[channel])


def test_feature_variant_drops_approximation(signalset):
    """
    Test that excluding the approximation band leaves six features per channel.
    """
    config = FeatureConfig(include_approximation=False)
    assert config.dimension == 6
    assert extract_channel(signalset.recordings[0], 0, config).values.shape == (6,)


def test_concat_orders_channels_ascending(signalset):
    """
    Test that concatenation follows ascending channel order whatever the subset order.
    """
    features = recording_features(signalset.recordings[1])
    joined = concat(features, [3, 1])
    assert joined.subset == (1, 3)
    assert np.array_equal(joined.values, np.concatenate([features[1].values, features[3].values]))


def test_concat_missing_channel():
    """
    Test that concatenating an absent channel raises.
    """
    with pytest.raises(FeatureError):
        concat({0: FeatureVector(values=np.ones(8), channel_id=0)}, [0, 1])


def test_feature_table(table):
    """
    Test the shape, column names and subset views of a feature table.
    """
    assert table.values.shape == (30, 4, 8)
    assert table.column_names()[0] == "c0_A3_mav"
    assert len(table.column_names()) == 32
    assert table.concat([2, 0]).shape == (30, 16)
    assert np.array_equal(table.full()[:, 8:16], table.channel_matrix(1))
    assert not table.contaminated


def test_extract_features_is_deterministic(signalset):
    """
    Test that extraction is a pure function of the recordings.
    """
    part = signalset.subset([0, 10, 20, 21])
    assert np.array_equal(extract_features(part).values, extract_features(part).values)


@pytest.mark.parametrize("n", [17, 30, 999, 1001])
def test_db6_rejects_lengths_off_the_dyadic_grid(n):
    """
    Test that lengths that are not multiples of 2**levels are refused instead of padded.
    """
    with pytest.raises(FeatureError, match="not a multiple of 8"):
        dwt_db6(np.ones(n))


def test_db6_preserves_energy_and_inverts():
    """
    Test energy preservation within 1e-6 relative and round trips within 1e-8 on random length-1000 signals.
    """
    rng = np.random.default_rng(8)
    for _ in range(100):
        x = rng.normal(size=1000) * rng.uniform(0.1, 10.0)
        coeffs = dwt_db6(x)
        energy = sum(float(np.sum(c**2)) for c in coeffs)
        assert abs(energy - float(np.sum(x**2))) <= 1e-6 * float(np.sum(x**2))
        assert np.max(np.abs(idwt_db6(coeffs, 1000) - x)) <= 1e-8


def test_features_need_three_coefficients_in_the_deepest_band():
    """
    Test that recordings shorter than 3 * 2**levels samples are refused up front.
    """
    assert FeatureConfig().min_length == 24
    assert FeatureConfig(levels=2).min_length == 12
    short = Recording(samples=np.ones((16, 2)), sampling_rate=1000.0, label=0, channels=paired_layout(1))
    with pytest.raises(FeatureError, match="shorter than the 24"):
        extract_channel(short, 0)
    with pytest.raises(FeatureError, match="shorter than the 24"):
        extract_recording(short)
    samples = np.random.default_rng(2).normal(size=(24, 2))
    shortest = Recording(samples=samples, sampling_rate=1000.0, label=0, channels=paired_layout(1))
    assert extract_recording(shortest).shape == (2, 8)
