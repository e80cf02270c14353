from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from joblib import Parallel, delayed

from myoselect.domain.detection.detector_ensemble import ChannelMask, DetectorEnsemble, detect, detect_batch
from myoselect.domain.ensemble.move_ensemble import (
    MoveEnsemble,
    as_feature_tensor,
    member_predictions,
    member_seed,
    vote_selected,
)
from myoselect.domain.ensemble.subsets import ChannelSubset
from myoselect.domain.features.extraction import FeatureTable, FeatureVector
from myoselect.domain.learners.forest import (
    DEFAULT_FOREST,
    ForestConfig,
    ForestModel,
    predict_forest_batch,
    train_forest,
)
from myoselect.errors import EnsembleError
from myoselect.infrastructure.monitoring.logger import Logger

logger = Logger.get_logger("myoselect.references")

Features = Mapping[int, FeatureVector] | np.ndarray


def train_full_model(features: FeatureTable, seed: int, forest: ForestConfig = DEFAULT_FOREST) -> ForestModel:
    """Single forest on the concatenation of all channels."""
    if features.contaminated:
        raise EnsembleError("reference training requires clean data")
    # Same seed as the single member of a K=2L ensemble
    everything = ChannelSubset(tuple(range(features.channel_count)))
    config = forest.model_copy(update={"seed": member_seed(seed, everything)})
    return train_forest(features.full(), features.labels, config, features.class_count)


def predict_B_batch(model: ForestModel, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    return predict_forest_batch(model, values.reshape(values.shape[0], -1))


def predict_B(model: ForestModel, features: Features) -> int:
    """
    Label of the all-channel forest for one trial.

    Raises:
        LearnerError: If the concatenated features do not match the model dimension.
    """
    channel_count = len(features) if isinstance(features, Mapping) else np.asarray(features).shape[-2]
    return int(predict_B_batch(model, as_feature_tensor(features, channel_count))[0])


def all_clean_mask(channel_count: int) -> ChannelMask:
    return ChannelMask(clean=(True,) * channel_count)


def predict_Fu_batch(ens: MoveEnsemble, values: np.ndarray, predictions: np.ndarray | None = None) -> np.ndarray:
    """Majority over every member for each trial; the detector is ignored."""
    if predictions is None:
        predictions = member_predictions(ens, values)
    masks = [all_clean_mask(ens.channel_count)] * predictions.shape[1]
    return vote_selected(predictions, masks, ens)


def predict_Fu(ens: MoveEnsemble, features: Features) -> int:
    """Label of the full ensemble, as if every channel were clean."""
    return int(predict_Fu_batch(ens, as_feature_tensor(features, ens.channel_count))[0])


def predict_DO_batch(
    ens: MoveEnsemble, masks: Sequence[ChannelMask], values: np.ndarray, predictions: np.ndarray | None = None
) -> np.ndarray:
    """Dynamic selection driven by the detector masks."""
    if predictions is None:
        predictions = member_predictions(ens, values)
    return vote_selected(predictions, masks, ens)


def oracle_correct(predictions: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per trial: True if any member predicts the true label."""
    return np.any(predictions == np.asarray(labels)[None, :], axis=0)


def predict_Or(ens: MoveEnsemble, features: Features, true_label: int) -> bool:
    """
    Oracle verdict of one trial: correct iff at least one member predicts the true label.

    Raises:
        EnsembleError: If the label lies outside [0, M).
    """
    if not 0 <= true_label < ens.class_count:
        raise EnsembleError(f"label {true_label} outside {ens.class_count} classes")
    predictions = member_predictions(ens, as_feature_tensor(features, ens.channel_count))
    return bool(oracle_correct(predictions, np.array([true_label]))[0])


def oracle_labels(predictions: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """
    Labels scored by the oracle: the true label where some member has it, else the first member's label.

    Feeding these to balanced accuracy yields the oracle accuracy.
    """
    labels = np.asarray(labels)
    return np.where(oracle_correct(predictions, labels), labels, predictions[0])


@dataclass(frozen=True)
class DefaultChannelModels:
    """
    A full-channel forest with one leave-one-channel-out forest per channel.

    Attributes:
        full_model (ForestModel): Forest over all 2L channels.
        leave_one_out (tuple[ForestModel, ...]): Entry i is trained on every channel except i.
    """

    full_model: ForestModel
    leave_one_out: tuple[ForestModel, ...]

    @property
    def channel_count(self) -> int:
        return len(self.leave_one_out)

    def to_dict(self) -> dict[str, Any]:
        return {
            "full_model": self.full_model.to_dict(),
            "leave_one_out": [m.to_dict() for m in self.leave_one_out],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "DefaultChannelModels":
        return cls(
            full_model=ForestModel.from_dict(data["full_model"]),
            leave_one_out=tuple(ForestModel.from_dict(m) for m in data["leave_one_out"]),
        )


def _without(channel_total: int, channel: int) -> tuple[int, ...]:
    return tuple(c for c in range(channel_total) if c != channel)


def train_default_models(
    features: FeatureTable,
    seed: int,
    forest: ForestConfig = DEFAULT_FOREST,
    full_model: ForestModel | None = None,
    jobs: int = 1,
) -> DefaultChannelModels:
    """
    Train the leave-one-channel-out forests, reusing `full_model` when given.

    Returns:
        DefaultChannelModels: Full model plus 2L reduced models.
    """
    if full_model is None:
        full_model = train_full_model(features, seed, forest)
    total = features.channel_count
    reduced = Parallel(n_jobs=jobs)(
        delayed(train_forest)(
            features.concat(_without(total, channel)),
            features.labels,
            forest.model_copy(update={"seed": member_seed(seed, ChannelSubset(_without(total, channel)))}),
            features.class_count,
        )
        for channel in range(total)
    )
    return DefaultChannelModels(full_model=full_model, leave_one_out=tuple(reduced))


def excluded_channel(mask: ChannelMask) -> int | None:
    """
    Channel dropped by the default-model rule: None when all channels are clean, else the contaminated
    channel with the lowest detector score (lowest id on ties, or when no scores are attached).
    """
    contaminated = mask.contaminated
    if not contaminated:
        return None
    if not mask.scores:
        return contaminated[0]
    scores = np.asarray(mask.scores)[list(contaminated)]
    return contaminated[int(np.argmin(scores))]


def predict_DO7_batch(models: DefaultChannelModels, masks: Sequence[ChannelMask], values: np.ndarray) -> np.ndarray:
    """Default-model predictions for a batch of trials with their detector masks."""
    values = as_feature_tensor(values, models.channel_count)
    n = values.shape[0]
    if len(masks) != n:
        raise EnsembleError(f"{len(masks)} masks for {n} trials")
    labels = predict_B_batch(models.full_model, values)
    exclusions = [excluded_channel(mask) for mask in masks]
    for channel in sorted({c for c in exclusions if c is not None}):
        rows = np.array([i for i, c in enumerate(exclusions) if c == channel])
        reduced = values[rows][:, list(_without(models.channel_count, channel)), :].reshape(rows.size, -1)
        labels[rows] = predict_forest_batch(models.leave_one_out[channel], reduced)
    return labels


def predict_DO7(models: DefaultChannelModels, detector: DetectorEnsemble, features: Features) -> int:
    """
    One-model-out-of-2L+1 prediction.

    The full model answers when every channel is detected clean; otherwise the model trained without the
    most outlying contaminated channel answers.

    Args:
        models (DefaultChannelModels): Full and leave-one-out forests.
        detector (DetectorEnsemble): Channel detectors.
        features (Features): Features of every channel of the trial.

    Returns:
        int: Predicted class.
    """
    values = as_feature_tensor(features, models.channel_count)
    mask = detect(detector, values[0])
    return int(predict_DO7_batch(models, [mask], values)[0])


def predict_DO(ens: MoveEnsemble, detector: DetectorEnsemble, features: Features) -> int:
    """Dynamic selection with the detector's own mask."""
    values = as_feature_tensor(features, ens.channel_count)
    masks = detect_batch(detector, values)
    return int(predict_DO_batch(ens, masks, values)[0])
