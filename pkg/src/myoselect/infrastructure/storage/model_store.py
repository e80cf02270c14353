import json
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ValidationError

from myoselect.domain.detection.detector_ensemble import DetectorEnsemble
from myoselect.domain.ensemble.ecoc import EcocModel
from myoselect.domain.ensemble.move_ensemble import MoveEnsemble
from myoselect.domain.ensemble.references import DefaultChannelModels
from myoselect.domain.learners.forest import ForestModel
from myoselect.domain.learners.ocsvm import OneClassModel
from myoselect.errors import ModelIOError
from myoselect.infrastructure.monitoring.logger import Logger

logger = Logger.get_logger("myoselect.model_store")

FORMAT_VERSION = 1

# Document "kind" -> model class; every class provides to_dict() / from_dict()
MODEL_KINDS: dict[str, Any] = {
    "forest": ForestModel,
    "one_class_svm": OneClassModel,
    "detector_ensemble": DetectorEnsemble,
    "move_ensemble": MoveEnsemble,
    "default_channel_models": DefaultChannelModels,
    "ecoc": EcocModel,
}


class ModelDocument(BaseModel):
    """
    Envelope of a persisted model.

    The payload layout is each model's `to_dict()`; it is not guaranteed stable across versions.
    """

    format: str = "myoselect-model"
    version: int = FORMAT_VERSION
    kind: str
    payload: dict[str, Any]


def _kind_of(model: Any) -> str:
    for kind, cls in MODEL_KINDS.items():
        if isinstance(model, cls):
            return kind
    raise ModelIOError(f"unsupported model type {type(model).__name__}")


def save_model(model: Any, path: str | Path) -> None:
    """
    Write a trained model as a versioned JSON document.

    Args:
        model: ForestModel, OneClassModel, DetectorEnsemble, MoveEnsemble, DefaultChannelModels or EcocModel.
        path (str | Path): Output file.

    Raises:
        ModelIOError: On an unsupported model type or a write failure.
    """
    target = Path(path)
    document = ModelDocument(kind=_kind_of(model), payload=model.to_dict())
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(document.model_dump_json(), encoding="utf-8")
    except OSError as e:
        logger.error(f"Error writing model to {target}: {e}")
        raise ModelIOError(f"cannot write {target}: {e}") from e
    logger.debug(f"Saved {document.kind} model to {target}.")


def load_model(path: str | Path, expected_kind: str | None = None) -> Any:
    """
    Read a model document written by `save_model`.

    Args:
        path (str | Path): Model file.
        expected_kind (str | None): If given, the document kind must match.

    Raises:
        ModelIOError: If the file is unreadable, malformed, of another version or of an unexpected kind.
    """
    source = Path(path)
    try:
        raw = json.loads(source.read_text(encoding="utf-8"))
        document = ModelDocument.model_validate(raw)
    except OSError as e:
        raise ModelIOError(f"cannot read {source}: {e}") from e
    except (json.JSONDecodeError, ValidationError) as e:
        raise ModelIOError(f"{source}: malformed model document: {e}") from e
    if document.version != FORMAT_VERSION:
        raise ModelIOError(f"{source}: unsupported model format version {document.version}")
    if document.kind not in MODEL_KINDS:
        raise ModelIOError(f"{source}: unknown model kind '{document.kind}'")
    if expected_kind is not None and document.kind != expected_kind:
        raise ModelIOError(f"{source}: expected a {expected_kind} model, found {document.kind}")
    try:
        return MODEL_KINDS[document.kind].from_dict(document.payload)
    except (KeyError, TypeError, ValueError) as e:
        raise ModelIOError(f"{source}: invalid {document.kind} payload: {e}") from e
