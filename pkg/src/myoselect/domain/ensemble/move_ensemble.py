from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from functools import cached_property
from typing import Any, NamedTuple

import numpy as np
from joblib import Parallel, delayed
from tqdm import tqdm

from myoselect.domain.detection.detector_ensemble import ChannelMask
from myoselect.domain.ensemble.subsets import ChannelSubset, joint_subsets, validate_k_spec
from myoselect.domain.features.extraction import FeatureTable, FeatureVector
from myoselect.domain.learners.forest import (
    DEFAULT_FOREST,
    ForestConfig,
    ForestModel,
    predict_forest_batch,
    train_forest,
)
from myoselect.domain.seeding import derive_seed
from myoselect.errors import EnsembleError
from myoselect.infrastructure.monitoring.logger import Logger

logger = Logger.get_logger("myoselect.ensemble")


@dataclass(frozen=True)
class Member:
    subset: ChannelSubset
    model: ForestModel


@dataclass(frozen=True)
class MoveEnsemble:
    """
    Forests trained on every K-combination of channels for each K of the k spec.

    Attributes:
        members (tuple[Member, ...]): Members grouped by ascending K, lexicographic within a K.
        k_spec (tuple[int, ...]): Sorted K values.
        class_count (int): Number of classes M.
        channel_count (int): Channel total 2L.
    """

    members: tuple[Member, ...]
    k_spec: tuple[int, ...]
    class_count: int
    channel_count: int

    def __len__(self) -> int:
        return len(self.members)

    @cached_property
    def membership(self) -> np.ndarray:
        """[members x 2L] boolean matrix; True where the member uses the channel."""
        matrix = np.zeros((len(self.members), self.channel_count), dtype=bool)
        for i, member in enumerate(self.members):
            matrix[i, list(member.subset.ids)] = True
        return matrix

    def restrict(self, k_spec: Iterable[int]) -> "MoveEnsemble":
        """Sub-ensemble of the members whose subset size is in `k_spec`; members are shared, not retrained."""
        spec = tuple(sorted({int(k) for k in k_spec}))
        missing = sorted(set(spec) - set(self.k_spec))
        if not spec or missing:
            raise EnsembleError(f"K values {missing or spec} not in ensemble spec {self.k_spec}")
        members = tuple(m for m in self.members if len(m.subset) in spec)
        return MoveEnsemble(members, spec, self.class_count, self.channel_count)

    def to_dict(self) -> dict[str, Any]:
        return {
            "k_spec": list(self.k_spec),
            "class_count": self.class_count,
            "channel_count": self.channel_count,
            "members": [{"subset": list(m.subset.ids), "model": m.model.to_dict()} for m in self.members],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "MoveEnsemble":
        return cls(
            members=tuple(
                Member(ChannelSubset(tuple(m["subset"])), ForestModel.from_dict(m["model"])) for m in data["members"]
            ),
            k_spec=tuple(int(k) for k in data["k_spec"]),
            class_count=int(data["class_count"]),
            channel_count=int(data["channel_count"]),
        )


class Selection(NamedTuple):
    indices: np.ndarray
    fallback: bool


def member_seed(seed: int, subset: ChannelSubset) -> int:
    return derive_seed(seed, "member", subset.ids)


def build_ensemble(
    features: FeatureTable,
    k_spec: Iterable[int],
    seed: int,
    forest: ForestConfig = DEFAULT_FOREST,
    jobs: int = 1,
    progress: bool = False,
) -> MoveEnsemble:
    """
    Train one forest per K-combination of channels for every K in the k spec.

    Args:
        features (FeatureTable): Clean training features.
        k_spec (Iterable[int]): K values; several values build a joint ensemble.
        seed (int): Master seed; each member derives its seed from (seed, subset).
        forest (ForestConfig): Forest settings; its seed is replaced per member.
        jobs (int): Members trained in parallel.
        progress (bool): Show a progress bar.

    Returns:
        MoveEnsemble: The trained ensemble.

    Raises:
        EnsembleError: On contaminated training data or an invalid k spec.
    """
    if features.contaminated:
        raise EnsembleError("ensemble training requires clean data")
    spec = validate_k_spec(k_spec, features.channel_count)
    subsets = joint_subsets(features.channel_count, spec)
    logger.debug(f"Training {len(subsets)} members for K in {spec} on {len(features)} trials.")
    models = Parallel(n_jobs=jobs)(
        delayed(train_forest)(
            features.concat(subset.ids),
            features.labels,
            forest.model_copy(update={"seed": member_seed(seed, subset)}),
            features.class_count,
        )
        for subset in tqdm(subsets, desc="Training members", disable=not progress)
    )
    return MoveEnsemble(
        members=tuple(Member(s, m) for s, m in zip(subsets, models, strict=True)),
        k_spec=spec,
        class_count=features.class_count,
        channel_count=features.channel_count,
    )


def select(ens: MoveEnsemble, mask: ChannelMask) -> Selection:
    """
    Members whose channels are all detected clean; every member when none qualifies.

    Args:
        ens (MoveEnsemble): Trained ensemble.
        mask (ChannelMask): Detector verdicts.

    Returns:
        Selection: Ascending member indices and whether the all-members fallback fired.
    """
    if len(mask) != ens.channel_count:
        raise EnsembleError(f"mask of length {len(mask)} for a {ens.channel_count}-channel ensemble")
    contaminated = ~np.asarray(mask.clean, dtype=bool)
    eligible = np.flatnonzero(~ens.membership[:, contaminated].any(axis=1))
    if eligible.size == 0:
        return Selection(np.arange(len(ens.members)), True)
    return Selection(eligible, False)


def vote(labels: np.ndarray, class_count: int) -> int:
    """Majority label; ties go to the lowest label."""
    return int(np.argmax(np.bincount(np.asarray(labels, dtype=np.int64), minlength=class_count)))


def as_feature_tensor(features: Mapping[int, FeatureVector] | np.ndarray, channel_count: int) -> np.ndarray:
    """Per-channel features of one trial or a batch as an [n x 2L x d] tensor."""
    if isinstance(features, Mapping):
        missing = [c for c in range(channel_count) if c not in features]
        if missing:
            raise EnsembleError(f"features missing for channels {missing}")
        matrix = np.stack([features[c].values for c in range(channel_count)])
        return matrix[None, ...]
    values = np.asarray(features, dtype=np.float64)
    if values.ndim == 2:
        values = values[None, ...]
    if values.ndim != 3 or values.shape[1] != channel_count:
        raise EnsembleError(f"expected features of {channel_count} channels, got shape {values.shape}")
    return values


def member_predictions(ens: MoveEnsemble, values: np.ndarray) -> np.ndarray:
    """
    Labels of every member on every trial.

    Args:
        ens (MoveEnsemble): Trained ensemble.
        values (np.ndarray): [n x 2L x d] feature tensor.

    Returns:
        np.ndarray: [members x n] label matrix.
    """
    values = as_feature_tensor(values, ens.channel_count)
    n = values.shape[0]
    return np.stack(
        [predict_forest_batch(m.model, values[:, list(m.subset.ids), :].reshape(n, -1)) for m in ens.members]
    )


def vote_selected(predictions: np.ndarray, masks: Sequence[ChannelMask], ens: MoveEnsemble) -> np.ndarray:
    """Per-trial majority over the members selected by that trial's mask."""
    return np.array(
        [vote(predictions[select(ens, mask).indices, i], ens.class_count) for i, mask in enumerate(masks)],
        dtype=np.int64,
    )


def predict(ens: MoveEnsemble, features: Mapping[int, FeatureVector] | np.ndarray, mask: ChannelMask) -> int:
    """
    Dynamic-selection label of one trial: majority over the members selected by the mask.

    Args:
        ens (MoveEnsemble): Trained ensemble.
        features (Mapping[int, FeatureVector] | np.ndarray): Features of every channel.
        mask (ChannelMask): Detector verdicts of the trial.

    Returns:
        int: Predicted class; ties go to the lowest label.
    """
    predictions = member_predictions(ens, as_feature_tensor(features, ens.channel_count))
    return int(vote_selected(predictions, [mask], ens)[0])
