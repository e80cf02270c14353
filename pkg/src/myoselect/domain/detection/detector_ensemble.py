from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, ConfigDict, Field, field_validator

from myoselect.domain.evaluation.metrics import balanced_accuracy
from myoselect.domain.features.extraction import FeatureTable, FeatureVector
from myoselect.domain.learners.ocsvm import OneClassModel, decision_function, train_ocsvm
from myoselect.domain.learners.validation import kfold_indices
from myoselect.domain.seeding import derive_seed
from myoselect.domain.signalset.models import ChannelInfo, Modality
from myoselect.errors import DetectorError
from myoselect.infrastructure.monitoring.logger import Logger

logger = Logger.get_logger("myoselect.detection")

NU_GRID = tuple(round(0.1 * i, 1) for i in range(1, 11))


class DetectorConfig(BaseModel):
    """
    One-class detector settings.

    Attributes:
        nu_grid (tuple[float, ...]): Candidate nu values, tried in ascending order.
        folds (int): Cross-validation folds of the nu search.
        outlier_ratio (float): Artificial outliers per validation vector.
        box_inflation (float): Fraction of the per-feature range added on each side of the outlier box.
        scale_features (bool): Min-max scale each channel by its training bounds before the SVM.
        gamma (float | None): Fixed RBF width; None uses the 1 / (d * variance) heuristic per channel.
    """

    model_config = ConfigDict(frozen=True)

    nu_grid: tuple[float, ...] = NU_GRID
    folds: int = Field(3, ge=2)
    outlier_ratio: float = Field(1.0, gt=0.0)
    box_inflation: float = Field(0.2, ge=0.0)
    scale_features: bool = True
    gamma: float | None = Field(None, gt=0.0)

    @field_validator("nu_grid")
    @classmethod
    def _sorted_grid(cls, grid: tuple[float, ...]) -> tuple[float, ...]:
        if not grid or any(not 0.0 < nu <= 1.0 for nu in grid):
            raise ValueError("nu grid values must lie in (0, 1]")
        return tuple(sorted(set(grid)))


DEFAULT_DETECTOR = DetectorConfig()


@dataclass(frozen=True)
class ChannelMask:
    """Per-channel detector verdicts; clean[l] is True when channel l looks uncontaminated."""

    clean: tuple[bool, ...]
    scores: tuple[float, ...] = ()

    @property
    def contaminated(self) -> tuple[int, ...]:
        return tuple(i for i, ok in enumerate(self.clean) if not ok)

    @property
    def all_clean(self) -> bool:
        return all(self.clean)

    def __len__(self) -> int:
        return len(self.clean)


@dataclass(frozen=True)
class NuChoice:
    """Selected nu of one channel with the mean validation balanced accuracy of every candidate."""

    nu: float
    bac: float
    grid_bac: tuple[float, ...]


@dataclass(frozen=True)
class DetectorEnsemble:
    """
    One one-class detector per channel.

    Attributes:
        detectors (tuple[OneClassModel, ...]): Detector of channel l at index l.
        nu_per_channel (tuple[float, ...]): Tuned nu values.
        tuning_bac (tuple[float, ...]): Validation balanced accuracy of the chosen nu.
        feature_bounds (np.ndarray): [2L x 2 x d] per-channel training min (row 0) and max (row 1).
        channels (tuple[ChannelInfo, ...]): Channel layout.
        scale_features (bool): Whether vectors are min-max scaled by `feature_bounds` before scoring.
    """

    detectors: tuple[OneClassModel, ...]
    nu_per_channel: tuple[float, ...]
    tuning_bac: tuple[float, ...]
    feature_bounds: np.ndarray
    channels: tuple[ChannelInfo, ...]
    scale_features: bool = True

    @property
    def channel_count(self) -> int:
        return len(self.detectors)

    def prepare(self, channel_id: int, X: np.ndarray) -> np.ndarray:
        """Bring raw channel features into the detector's input space."""
        if not self.scale_features:
            return np.asarray(X, dtype=np.float64)
        return min_max_scale(X, self.feature_bounds[channel_id])

    def to_dict(self) -> dict[str, Any]:
        return {
            "detectors": [d.to_dict() for d in self.detectors],
            "nu_per_channel": list(self.nu_per_channel),
            "tuning_bac": list(self.tuning_bac),
            "feature_bounds": self.feature_bounds.tolist(),
            "channels": [{"id": ch.id, "modality": ch.modality.value} for ch in self.channels],
            "scale_features": self.scale_features,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DetectorEnsemble":
        return cls(
            detectors=tuple(OneClassModel.from_dict(d) for d in data["detectors"]),
            nu_per_channel=tuple(float(v) for v in data["nu_per_channel"]),
            tuning_bac=tuple(float(v) for v in data["tuning_bac"]),
            feature_bounds=np.asarray(data["feature_bounds"], dtype=np.float64),
            channels=tuple(ChannelInfo(int(c["id"]), Modality(c["modality"])) for c in data["channels"]),
            scale_features=bool(data["scale_features"]),
        )


def feature_bounds(X: np.ndarray) -> np.ndarray:
    """[2 x d] column-wise min and max."""
    return np.stack([X.min(axis=0), X.max(axis=0)])


def min_max_scale(X: np.ndarray, bounds: np.ndarray) -> np.ndarray:
    """Map training bounds to [0, 1]; constant features map to 0."""
    low, high = bounds
    span = np.where(high > low, high - low, 1.0)
    return (np.asarray(X, dtype=np.float64) - low) / span


def uniform_outliers(X: np.ndarray, count: int, inflation: float, rng: np.random.Generator) -> np.ndarray:
    """Draw `count` points uniformly over the bounding box of X inflated by `inflation` of its range per side."""
    low, high = feature_bounds(X)
    margin = inflation * (high - low)
    return rng.uniform(low - margin, high + margin, size=(count, X.shape[1]))


def tune_channel_nu(X: np.ndarray, seed: int, config: DetectorConfig = DEFAULT_DETECTOR) -> NuChoice:
    """
    Pick nu for one channel by cross-validated binary balanced accuracy.

    Each validation fold is paired with artificial outliers drawn uniformly over the inflated bounding box of
    the fold's training part. Ties go to the smallest nu.

    Args:
        X (np.ndarray): [n x d] clean channel matrix (already in detector input space).
        seed (int): Seed of the fold split and the outlier draws.
        config (DetectorConfig): Grid and validation settings.

    Returns:
        NuChoice: The chosen nu and the grid scores.

    Raises:
        DetectorError: If fewer samples than folds are available.
    """
    n = X.shape[0]
    if n < max(config.folds, 3):
        raise DetectorError(f"nu tuning needs at least {max(config.folds, 3)} samples, got {n}")
    rng = np.random.default_rng(seed)
    scores = np.zeros((config.folds, len(config.nu_grid)))
    for f, (train, test) in enumerate(kfold_indices(n, config.folds, rng)):
        targets = X[test]
        count = max(1, round(config.outlier_ratio * test.size))
        outliers = uniform_outliers(X[train], count, config.box_inflation, rng)
        queries = np.vstack([targets, outliers])
        truth = np.repeat(np.array([1, 0], dtype=np.int64), [targets.shape[0], count])
        for g, nu in enumerate(config.nu_grid):
            model = train_ocsvm(X[train], nu, config.gamma)
            verdict = (decision_function(model, queries) >= 0.0).astype(np.int64)
            scores[f, g] = balanced_accuracy(truth, verdict)
    mean = scores.mean(axis=0)
    best = int(np.argmax(mean))
    return NuChoice(nu=config.nu_grid[best], bac=float(mean[best]), grid_bac=tuple(float(v) for v in mean))


def tune_nu(
    channel_matrices: Sequence[np.ndarray], seed: int, config: DetectorConfig = DEFAULT_DETECTOR
) -> list[NuChoice]:
    """Tune nu independently per channel; channel l uses the seed derived from (seed, "channel", l)."""
    return [
        tune_channel_nu(np.asarray(X, dtype=np.float64), derive_seed(seed, "channel", channel), config)
        for channel, X in enumerate(channel_matrices)
    ]


def _train_channel(X: np.ndarray, seed: int, config: DetectorConfig) -> tuple[OneClassModel, NuChoice, np.ndarray]:
    bounds = feature_bounds(X)
    prepared = min_max_scale(X, bounds) if config.scale_features else X
    choice = tune_channel_nu(prepared, seed, config)
    model = train_ocsvm(prepared, choice.nu, config.gamma)
    return model, choice, bounds


def train_detectors(
    features: FeatureTable, seed: int, config: DetectorConfig = DEFAULT_DETECTOR, jobs: int = 1
) -> DetectorEnsemble:
    """
    Tune and train one detector per channel on clean training features.

    Args:
        features (FeatureTable): Clean training features.
        seed (int): Master seed; channel l derives its own seed.
        config (DetectorConfig): Detector settings.
        jobs (int): Channels trained in parallel.

    Returns:
        DetectorEnsemble: Trained detectors.

    Raises:
        DetectorError: If the features come from contaminated recordings or a channel has too few samples.
    """
    if features.contaminated:
        raise DetectorError("detectors require clean data")
    logger.debug(f"Training {features.channel_count} detectors on {len(features)} clean trials.")
    results = Parallel(n_jobs=jobs)(
        delayed(_train_channel)(features.channel_matrix(ch.id), derive_seed(seed, "channel", ch.id), config)
        for ch in features.channels
    )
    models, choices, bounds = zip(*results, strict=True)
    for ch, choice in zip(features.channels, choices, strict=True):
        logger.debug(f"Channel {ch.id} ({ch.modality.value}): nu={choice.nu}, tuning bac={choice.bac:.3f}")
    return DetectorEnsemble(
        detectors=tuple(models),
        nu_per_channel=tuple(c.nu for c in choices),
        tuning_bac=tuple(c.bac for c in choices),
        feature_bounds=np.stack(bounds),
        channels=features.channels,
        scale_features=config.scale_features,
    )


def channel_scores(ens: DetectorEnsemble, values: np.ndarray) -> np.ndarray:
    """
    Detector scores of a batch of trials.

    Args:
        ens (DetectorEnsemble): Trained detectors.
        values (np.ndarray): [n x 2L x d] feature tensor.

    Returns:
        np.ndarray: [n x 2L] signed scores; non-negative means clean.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 3 or values.shape[1] != ens.channel_count:
        raise DetectorError(f"layout mismatch: {ens.channel_count} detectors for features of shape {values.shape}")
    return np.stack(
        [decision_function(model, ens.prepare(ch, values[:, ch, :])) for ch, model in enumerate(ens.detectors)],
        axis=1,
    )


def detect_batch(ens: DetectorEnsemble, values: np.ndarray) -> list[ChannelMask]:
    """Channel masks of every trial of a feature tensor."""
    scores = channel_scores(ens, values)
    return [
        ChannelMask(clean=tuple(bool(s >= 0.0) for s in row), scores=tuple(float(s) for s in row)) for row in scores
    ]


def detect(ens: DetectorEnsemble, rec_features: dict[int, FeatureVector] | np.ndarray) -> ChannelMask:
    """
    Channel mask of one trial: channel l is clean iff its detector scores it non-negative.

    Args:
        ens (DetectorEnsemble): Trained detectors.
        rec_features (dict[int, FeatureVector] | np.ndarray): Per-channel features, as a map or a [2L x d] matrix.

    Raises:
        DetectorError: If the channels do not match the detector layout.
    """
    if isinstance(rec_features, dict):
        if sorted(rec_features) != list(range(ens.channel_count)):
            raise DetectorError(f"layout mismatch: channels {sorted(rec_features)} for {ens.channel_count} detectors")
        matrix = np.stack([rec_features[ch].values for ch in range(ens.channel_count)])
    else:
        matrix = np.asarray(rec_features, dtype=np.float64)
    return detect_batch(ens, matrix[None, ...])[0]
