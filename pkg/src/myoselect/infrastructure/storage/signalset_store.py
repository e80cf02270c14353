import json
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from myoselect.domain.signalset.models import ChannelInfo, Modality, Recording, SignalSet, validate_layout
from myoselect.errors import SignalSetError, SignalSetIOError
from myoselect.infrastructure.monitoring.logger import Logger

logger = Logger.get_logger("myoselect.signalset_store")

MANIFEST_NAME = "manifest.json"
TRIAL_DIR = "trials"
# 17 significant digits round-trip float64 exactly
SAMPLE_FORMAT = "%.17g"


class ChannelEntry(BaseModel):
    """Manifest entry describing one channel."""

    id: int = Field(..., ge=0)
    modality: Modality


class TrialEntry(BaseModel):
    """Manifest entry pointing at one trial CSV file, relative to the signalset directory."""

    file: str
    class_index: int = Field(..., ge=0)


class SignalSetManifest(BaseModel):
    """
    Pydantic model of `manifest.json`.

    The optional `seed` and `contaminated` fields carry generator provenance and the contamination flag.
    """

    name: str
    sampling_rate_hz: float = Field(..., gt=0)
    channels: list[ChannelEntry]
    classes: list[str]
    trials: list[TrialEntry]
    seed: int | None = None
    contaminated: bool = False


def _trial_file_name(index: int, width: int) -> str:
    return f"{TRIAL_DIR}/trial_{index:0{width}d}.csv"


def save_signalset(signalset: SignalSet, path: str | Path) -> None:
    """
    Write a signalset directory: `manifest.json` plus one CSV file per recording.

    Every recording is checked for non-finite samples before any file is written.

    Args:
        signalset (SignalSet): The set to save.
        path (str | Path): Target directory, created if missing.

    Raises:
        SignalSetError: If a recording holds a non-finite sample.
        SignalSetIOError: If a file cannot be written; the message names the file.
    """
    for index, rec in enumerate(signalset.recordings):
        if not np.all(np.isfinite(rec.samples)):
            raise SignalSetError(f"trial {index} contains a non-finite sample")

    root = Path(path)
    width = max(4, len(str(len(signalset) - 1)))
    manifest = SignalSetManifest(
        name=signalset.name,
        sampling_rate_hz=signalset.sampling_rate,
        channels=[ChannelEntry(id=c.id, modality=c.modality) for c in signalset.channels],
        classes=list(signalset.class_names),
        trials=[
            TrialEntry(file=_trial_file_name(i, width), class_index=rec.label)
            for i, rec in enumerate(signalset.recordings)
        ],
        seed=signalset.seed,
        contaminated=signalset.contaminated,
    )
    header = ",".join(f"c{c.id}" for c in signalset.channels)

    target = root
    try:
        (root / TRIAL_DIR).mkdir(parents=True, exist_ok=True)
        for entry, rec in zip(manifest.trials, signalset.recordings, strict=True):
            target = root / entry.file
            np.savetxt(target, rec.samples, fmt=SAMPLE_FORMAT, delimiter=",", header=header, comments="", newline="\n")
        target = root / MANIFEST_NAME
        with open(target, "w", encoding="utf-8", newline="\n") as f:
            json.dump(manifest.model_dump(mode="json"), f, indent=2)
            f.write("\n")
    except OSError as e:
        logger.error(f"Error writing signalset file {target}: {e}")
        raise SignalSetIOError(f"cannot write {target}: {e}") from e
    logger.info(f"Saved signalset '{signalset.name}' ({len(signalset)} trials) to {root}.")


def _read_manifest(root: Path) -> SignalSetManifest:
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise SignalSetIOError(f"missing manifest: {manifest_path}")
    try:
        with open(manifest_path, encoding="utf-8") as f:
            return SignalSetManifest.model_validate(json.load(f))
    except (json.JSONDecodeError, ValidationError) as e:
        raise SignalSetError(f"invalid manifest {manifest_path}: {e}") from e
    except OSError as e:
        raise SignalSetIOError(f"cannot read {manifest_path}: {e}") from e


def _read_trial(path: Path, channel_count: int) -> np.ndarray:
    try:
        with open(path, encoding="utf-8") as f:
            header = f.readline().strip()
            samples = np.loadtxt(f, delimiter=",", ndmin=2, dtype=np.float64)
    except OSError as e:
        raise SignalSetIOError(f"cannot read {path}: {e}") from e
    except ValueError as e:
        raise SignalSetError(f"malformed trial file {path}: {e}") from e
    columns = len(header.split(",")) if header else 0
    if columns != channel_count or samples.shape[1] != channel_count:
        raise SignalSetError(
            f"channel mismatch in {path}: manifest declares {channel_count} channels, file has {samples.shape[1]}"
        )
    if not np.all(np.isfinite(samples)):
        raise SignalSetError(f"non-finite sample in {path}")
    return samples


def load_signalset(path: str | Path) -> SignalSet:
    """
    Read a signalset directory written by `save_signalset` (or by hand, following the same layout).

    Args:
        path (str | Path): Signalset directory.

    Returns:
        SignalSet: The loaded set.

    Raises:
        SignalSetIOError: If the manifest or a trial file cannot be read.
        SignalSetError: On an empty trial list, channel mismatch or non-finite sample.
    """
    root = Path(path)
    manifest = _read_manifest(root)
    if not manifest.trials:
        raise SignalSetError("empty signalset")
    channels = tuple(ChannelInfo(c.id, c.modality) for c in manifest.channels)
    validate_layout(channels)

    recordings = []
    for entry in manifest.trials:
        samples = _read_trial(root / entry.file, len(channels))
        recordings.append(
            Recording(
                samples=samples, sampling_rate=manifest.sampling_rate_hz, label=entry.class_index, channels=channels
            )
        )
    logger.info(f"Loaded signalset '{manifest.name}' ({len(recordings)} trials) from {root}.")
    return SignalSet(
        recordings=tuple(recordings),
        class_count=len(manifest.classes),
        name=manifest.name,
        seed=manifest.seed,
        class_names=tuple(manifest.classes),
        contaminated=manifest.contaminated,
    )
