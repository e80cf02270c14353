import math
from collections.abc import Iterable
from dataclasses import dataclass
from itertools import combinations

from myoselect.errors import EnsembleError


@dataclass(frozen=True, order=True)
class ChannelSubset:
    """Ascending, distinct channel ids of one ensemble member."""

    ids: tuple[int, ...]

    def __post_init__(self) -> None:
        ids = tuple(int(i) for i in self.ids)
        if not ids:
            raise EnsembleError("empty channel subset")
        if list(ids) != sorted(set(ids)) or ids[0] < 0:
            raise EnsembleError(f"channel subset must be ascending, distinct and non-negative: {ids}")
        object.__setattr__(self, "ids", ids)

    def __len__(self) -> int:
        return len(self.ids)

    def label(self) -> str:
        return "-".join(str(i) for i in self.ids)


def k_combinations(channel_total: int, k: int) -> list[ChannelSubset]:
    """All K-combinations of range(channel_total), lexicographic."""
    if not 1 <= k <= channel_total:
        raise EnsembleError(f"K={k} outside [1, {channel_total}]")
    return [ChannelSubset(ids) for ids in combinations(range(channel_total), k)]


def validate_k_spec(k_spec: Iterable[int], channel_total: int) -> tuple[int, ...]:
    """Sorted distinct K values, each within [1, channel_total]."""
    values = tuple(sorted({int(k) for k in k_spec}))
    if not values:
        raise EnsembleError("empty k spec")
    if values[0] < 1 or values[-1] > channel_total:
        raise EnsembleError(f"k spec {values} outside [1, {channel_total}]")
    return values


def parse_k_spec(text: str) -> tuple[int, ...]:
    """
    Parse a K set such as "7" or "2,3,5".

    Raises:
        EnsembleError: On a malformed or non-positive entry.
    """
    parts = [p.strip() for p in text.split(",")]
    try:
        values = [int(p) for p in parts]
    except ValueError as e:
        raise EnsembleError(f"malformed k spec: {text!r}") from e
    if not values or any(v < 1 for v in values):
        raise EnsembleError(f"malformed k spec: {text!r}")
    return tuple(sorted(set(values)))


def k_spec_label(k_spec: Iterable[int]) -> str:
    """Canonical text form, e.g. "2,3,5"."""
    return ",".join(str(k) for k in sorted(set(k_spec)))


def joint_subsets(channel_total: int, k_spec: Iterable[int]) -> list[ChannelSubset]:
    """Members of a joint ensemble: the K-combinations of every K in the k spec, grouped by ascending K."""
    return [s for k in validate_k_spec(k_spec, channel_total) for s in k_combinations(channel_total, k)]


def member_count(channel_total: int, k_spec: Iterable[int]) -> int:
    """Sum of C(channel_total, K) over the k spec."""
    return sum(math.comb(channel_total, k) for k in validate_k_spec(k_spec, channel_total))
