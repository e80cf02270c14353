import numpy as np
import pytest

from myoselect.application.experiment_service.experiment_service import ExperimentConfig, run_experiment
from myoselect.domain.detection.detector_ensemble import DetectorConfig
from myoselect.domain.ensemble.ecoc import EcocConfig
from myoselect.domain.features.extraction import extract_features
from myoselect.domain.learners.forest import ForestConfig
from myoselect.domain.signalset.synthesis import synth_signalset


@pytest.fixture(scope="session")
def signalset():
    """
    Small synthetic set: 3 classes x 10 trials, 2 sensor pairs (4 channels), 256 ms at 1 kHz.
    """
    return synth_signalset(classes=3, trials_per_class=10, channel_count_L=2, duration_ms=256.0, rate=1000.0, seed=3)


@pytest.fixture(scope="session")
def table(signalset):
    """Clean feature table of the small set."""
    return extract_features(signalset)


@pytest.fixture
def blobs():
    """
    Two well separated Gaussian blobs in 4 dimensions, 20 points each.
    """
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(0.0, 0.3, size=(20, 4)), rng.normal(3.0, 0.3, size=(20, 4))])
    y = np.repeat([0, 1], 20)
    return X, y


@pytest.fixture(scope="session")
def small_config():
    """
    Reduced protocol that keeps a whole run within seconds.
    """
    return ExperimentConfig(
        folds=3,
        repeats=1,
        snr_levels=(0.0, 10.0),
        k_specs=((1,), (2,), (1, 2)),
        master_seed=5,
        forest=ForestConfig(trees=5),
        ecoc=EcocConfig(code_size_grid=(2.0, 3.0), trees=3),
        detector=DetectorConfig(nu_grid=(0.1, 0.5)),
    )


@pytest.fixture(scope="session")
def experiment_report(signalset, small_config):
    """Results of one reduced run on the small set."""
    return run_experiment(signalset, small_config, progress=False)
