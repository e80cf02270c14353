import math
from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, field_validator


class NoiseKind(str, Enum):
    """The five contamination models applied to test recordings."""

    POWER_LINE = "power_line"
    ATTENUATION = "attenuation"
    GAUSSIAN = "gaussian"
    CLIPPING = "clipping"
    BASELINE_WANDER = "baseline_wander"

    @property
    def is_multiplicative(self) -> bool:
        """True for kinds that distort the signal itself rather than add an independent component."""
        return self in (NoiseKind.ATTENUATION, NoiseKind.CLIPPING)


class ContaminationPlan(BaseModel):
    """
    Description of how one recording is contaminated.

    Attributes:
        kind (NoiseKind): Noise model shared by every listed channel.
        snr_db (float): Target signal-to-residual ratio in decibels.
        channel_ids (tuple[int, ...]): Channels to contaminate, ascending and distinct.
        seed (int): Seed of the noise realization (frequency, phase, Gaussian draws).
    """

    model_config = ConfigDict(frozen=True)

    kind: NoiseKind
    snr_db: float
    channel_ids: tuple[int, ...] = Field(..., min_length=1)
    seed: int = 0

    @field_validator("snr_db")
    @classmethod
    def _finite_snr(cls, value: float) -> float:
        if not math.isfinite(value):
            raise ValueError("snr_db must be finite")
        return value

    @field_validator("channel_ids")
    @classmethod
    def _canonical_channels(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if any(c < 0 for c in value):
            raise ValueError("channel ids must be non-negative")
        if len(set(value)) != len(value):
            raise ValueError("channel ids must be distinct")
        return tuple(sorted(value))


class PlanRecord(BaseModel):
    """One line of a plans JSONL file."""

    trial_index: int
    kind: NoiseKind
    snr_db: float
    channels: list[int]
    seed: int

    @classmethod
    def from_plan(cls, trial_index: int, plan: ContaminationPlan) -> "PlanRecord":
        return cls(
            trial_index=trial_index,
            kind=plan.kind,
            snr_db=plan.snr_db,
            channels=list(plan.channel_ids),
            seed=plan.seed,
        )

    def to_plan(self) -> ContaminationPlan:
        return ContaminationPlan(kind=self.kind, snr_db=self.snr_db, channel_ids=tuple(self.channels), seed=self.seed)
