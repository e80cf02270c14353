from collections.abc import Sequence
from pathlib import Path

from pydantic import ValidationError

from myoselect.domain.contamination.models import ContaminationPlan, PlanRecord
from myoselect.errors import ContaminationError, SignalSetIOError
from myoselect.infrastructure.monitoring.logger import Logger

logger = Logger.get_logger("myoselect.plan_store")


def save_plans(plans: Sequence[ContaminationPlan], path: str | Path) -> None:
    """
    Write contamination plans as JSON lines: {trial_index, kind, snr_db, channels, seed}.

    Args:
        plans (Sequence[ContaminationPlan]): One plan per trial, in trial order.
        path (str | Path): Output file.
    """
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, "w", encoding="utf-8", newline="\n") as f:
            for index, plan in enumerate(plans):
                f.write(PlanRecord.from_plan(index, plan).model_dump_json() + "\n")
    except OSError as e:
        logger.error(f"Error writing plans to {target}: {e}")
        raise SignalSetIOError(f"cannot write {target}: {e}") from e


def load_plans(path: str | Path) -> list[ContaminationPlan]:
    """
    Read a plans JSONL file, ordered by trial index.

    Raises:
        SignalSetIOError: If the file cannot be read.
        ContaminationError: If a line is not a valid plan record.
    """
    source = Path(path)
    try:
        lines = source.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise SignalSetIOError(f"cannot read {source}: {e}") from e
    records = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            records.append(PlanRecord.model_validate_json(line))
        except ValidationError as e:
            raise ContaminationError(f"{source}:{number}: invalid plan record: {e}") from e
    records.sort(key=lambda r: r.trial_index)
    return [r.to_plan() for r in records]
