import hashlib

import numpy as np


def _plain(part: object) -> object:
    # numpy scalars repr differently across numpy versions
    if isinstance(part, np.integer):
        return int(part)
    if isinstance(part, np.floating):
        return float(part)
    if isinstance(part, tuple | list | frozenset | set):
        items = sorted(part) if isinstance(part, frozenset | set) else part
        return tuple(_plain(p) for p in items)
    return part


def derive_seed(master: int, *parts: object) -> int:
    """
    Derive a child seed from a master seed and a path of labels.

    The derivation is a stable hash, so the same (master, parts) always yields the same seed on every
    platform and in every worker process, independent of execution order.

    Args:
        master (int): Master seed.
        *parts (object): Labels identifying the consumer, e.g. ("member", (0, 3, 5)).

    Returns:
        int: Seed in [0, 2**63).
    """
    key = repr((int(master), *(_plain(p) for p in parts))).encode("utf-8")
    digest = hashlib.sha256(key).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def make_rng(master: int, *parts: object) -> np.random.Generator:
    """Return a numpy Generator seeded with `derive_seed(master, *parts)`."""
    return np.random.default_rng(derive_seed(master, *parts))
